#include "clothfit/clothfield.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace clothfit {

namespace {

using json = nlohmann::json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

constexpr double kSkirtMargin = 0.06;

}  // namespace

int latent_dim(ClothType type) { return type == ClothType::Shoes ? 4 : 18; }

int active_latent_dim(ClothType type) {
  return type == ClothType::Shoes ? 2 : 3;
}

const char* cloth_name(ClothType type) {
  switch (type) {
    case ClothType::UpperCloth: return "upper";
    case ClothType::Coat: return "coat";
    case ClothType::Pants: return "pants";
    case ClothType::Skirt: return "skirt";
    case ClothType::Shoes: return "shoes";
  }
  throw std::invalid_argument("bad cloth type");
}

ClothType cloth_from_name(const std::string& name) {
  for (int i = 0; i < kClothCount; ++i) {
    if (name == cloth_name(static_cast<ClothType>(i)))
      return static_cast<ClothType>(i);
  }
  throw std::invalid_argument("unknown cloth name: " + name);
}

ClothLatent ClothLatent::zeros(ClothType type) {
  ClothLatent latent;
  latent.cloth_type = type;
  latent.z = Eigen::VectorXd::Zero(latent_dim(type));
  return latent;
}

void ClothLatent::validate() const {
  if (z.size() != latent_dim(cloth_type))
    throw std::invalid_argument("latent length does not match cloth type");
  if (!z.allFinite()) throw std::invalid_argument("latent must be finite");
}

ClothState ClothState::neutral() {
  ClothState state;
  for (int i = 0; i < kClothCount; ++i) {
    state.existence[i] = 0.5;
    state.latents[i] = ClothLatent::zeros(static_cast<ClothType>(i));
  }
  return state;
}

void ClothState::validate() const {
  for (int i = 0; i < kClothCount; ++i) {
    if (!(existence[i] >= 0.0 && existence[i] <= 1.0))
      throw std::invalid_argument("existence score outside [0,1]");
    if (latents[i].cloth_type != static_cast<ClothType>(i))
      throw std::invalid_argument("latent slot/type mismatch");
    latents[i].validate();
  }
  if (!(gender_male >= 0 && gender_female >= 0 &&
        std::abs(gender_male + gender_female - 1.0) <= 1e-9))
    throw std::invalid_argument("gender must be a one-hot pair");
}

bool existence_gate(double score) { return score > kExistenceThreshold; }

ClothSurfaceParams decode_latent(const ClothLatent& latent) {
  latent.validate();
  ClothSurfaceParams params;
  if (latent.cloth_type == ClothType::Shoes) {
    params.coverage1 = sigmoid(latent.z[0]);
    params.coverage2 = 0.5;
    params.thickness = 0.005 + 0.02 * sigmoid(latent.z[1]);
  } else {
    params.coverage1 = sigmoid(latent.z[0]);
    params.coverage2 = sigmoid(latent.z[1]);
    params.thickness = 0.005 + 0.02 * sigmoid(latent.z[2]);
  }
  return params;
}

double udf_eval(const FieldBackend& backend, const Vec3& x,
                const ClothState& state, ClothType cloth) {
  return backend.instantiate(state, cloth)->eval(x);
}

ProceduralClothField::ProceduralClothField(Mesh surface)
    : surface_(std::move(surface)), query_(surface_) {}

double ProceduralClothField::eval(const Vec3& x) const {
  if (!query_.valid()) return std::numeric_limits<double>::infinity();
  return query_.distance(x);
}

ProceduralBackend::ProceduralBackend(const TPoseBody& body) {
  if (body.model->part_ids.empty())
    throw std::invalid_argument(
        "procedural backend needs a body with part annotations");
  vertices_ = body.vertices;
  faces_ = body.model->faces;
  part_ids_ = body.model->part_ids;
  limb_coord_ = body.model->limb_coord;
  normals_ = vertex_normals(body.surface_mesh());
  pelvis_ = body.joint("pelvis");
  waist_y_ = pelvis_.y();
  ankle_y_ = 0.5 * (body.joint("L_ankle").y() + body.joint("R_ankle").y());
  for (size_t i = 0; i < vertices_.size(); ++i) {
    const bool waist = part_ids_[i] == BodyPart::Torso && limb_coord_[i] >= 0.9;
    const bool upper_leg = (part_ids_[i] == BodyPart::LeftLeg ||
                            part_ids_[i] == BodyPart::RightLeg) &&
                           limb_coord_[i] <= 0.15;
    if (waist || upper_leg) {
      const double r = std::hypot(vertices_[i].x() - pelvis_.x(),
                                  vertices_[i].z() - pelvis_.z());
      waist_radius_ = std::max(waist_radius_, r);
    }
  }
  waist_radius_ += kSkirtMargin;
}

namespace {

// Keep the phi <= 0 part of each triangle, splitting along the zero set
// with linear interpolation; NaN phi marks vertices outside the cloth's
// parts (always dropped).
struct PatchClipper {
  Mesh out;
  std::vector<Vec3> out_normals;

  void add_face(const std::array<Vec3, 3>& pos,
                const std::array<Vec3, 3>& nrm,
                const std::array<double, 3>& phi) {
    for (double p : phi) {
      if (std::isnan(p)) return;
    }
    std::vector<Vec3> poly, poly_n;
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      if (phi[i] <= 0.0) {
        poly.push_back(pos[i]);
        poly_n.push_back(nrm[i]);
      }
      if ((phi[i] <= 0.0) != (phi[j] <= 0.0)) {
        const double t = phi[i] / (phi[i] - phi[j]);
        poly.push_back(pos[i] + t * (pos[j] - pos[i]));
        poly_n.push_back((nrm[i] + t * (nrm[j] - nrm[i])).normalized());
      }
    }
    if (poly.size() < 3) return;
    const std::uint32_t base = static_cast<std::uint32_t>(out.vertices.size());
    for (size_t i = 0; i < poly.size(); ++i) {
      out.vertices.push_back(poly[i]);
      out_normals.push_back(poly_n[i]);
    }
    for (size_t i = 1; i + 1 < poly.size(); ++i) {
      out.faces.push_back({base, base + static_cast<std::uint32_t>(i),
                           base + static_cast<std::uint32_t>(i + 1)});
    }
  }
};

constexpr double kOutside = std::numeric_limits<double>::quiet_NaN();

}  // namespace

Mesh ProceduralBackend::cloth_surface(const ClothLatent& latent) const {
  const ClothSurfaceParams p = decode_latent(latent);
  const ClothType type = latent.cloth_type;

  if (type == ClothType::Skirt) {
    // Lofted band around both legs, ignoring inner-leg separation.
    const double hem_y =
        waist_y_ + (ankle_y_ - waist_y_) * (0.1 + 0.8 * p.coverage1);
    const double top_y = waist_y_ + 0.03;
    const double r_top = waist_radius_ + p.thickness;
    const double r_hem = r_top + 0.25 * p.coverage2 * (top_y - hem_y);
    const int nr = 8, ns = 16;
    Mesh mesh;
    for (int i = 0; i < nr; ++i) {
      const double t = static_cast<double>(i) / (nr - 1);
      const double y = top_y + t * (hem_y - top_y);
      const double r = r_top + t * (r_hem - r_top);
      for (int s = 0; s < ns; ++s) {
        const double phi = 2.0 * M_PI * s / ns;
        mesh.vertices.push_back(Vec3(pelvis_.x() + r * std::cos(phi), y,
                                     pelvis_.z() + r * std::sin(phi)));
      }
    }
    for (int i = 0; i + 1 < nr; ++i) {
      for (int s = 0; s < ns; ++s) {
        const std::uint32_t v00 = i * ns + s;
        const std::uint32_t v01 = i * ns + (s + 1) % ns;
        const std::uint32_t v10 = (i + 1) * ns + s;
        const std::uint32_t v11 = (i + 1) * ns + (s + 1) % ns;
        mesh.faces.push_back({v00, v01, v11});
        mesh.faces.push_back({v00, v11, v10});
      }
    }
    return mesh;
  }

  auto phi_of = [&](size_t v) -> double {
    const BodyPart part = part_ids_[v];
    const double coord = limb_coord_[v];
    switch (type) {
      case ClothType::UpperCloth:
        if (part == BodyPart::Torso) return coord - (0.5 + 0.5 * p.coverage2);
        if (part == BodyPart::LeftArm || part == BodyPart::RightArm)
          return coord - p.coverage1;
        return kOutside;
      case ClothType::Coat: {
        const double reach = 0.7 + 0.6 * p.coverage2;
        if (part == BodyPart::Torso) return coord - reach;
        if (part == BodyPart::LeftLeg || part == BodyPart::RightLeg)
          return (1.0 + coord) - reach;
        if (part == BodyPart::LeftArm || part == BodyPart::RightArm)
          return coord - p.coverage1;
        return kOutside;
      }
      case ClothType::Pants:
        if (part == BodyPart::Torso) return 0.9 - coord;  // waist band
        if (part == BodyPart::LeftLeg || part == BodyPart::RightLeg)
          return coord - (0.15 + 0.8 * p.coverage1);
        return kOutside;
      case ClothType::Shoes:
        if (part == BodyPart::LeftFoot || part == BodyPart::RightFoot)
          return (0.5 - 0.5 * p.coverage1) - coord;
        return kOutside;
      default:
        return kOutside;
    }
  };

  PatchClipper clip;
  for (const Tri& f : faces_) {
    clip.add_face({vertices_[f[0]], vertices_[f[1]], vertices_[f[2]]},
                  {normals_[f[0]], normals_[f[1]], normals_[f[2]]},
                  {phi_of(f[0]), phi_of(f[1]), phi_of(f[2])});
  }
  for (size_t i = 0; i < clip.out.vertices.size(); ++i)
    clip.out.vertices[i] += p.thickness * clip.out_normals[i];
  return clip.out;
}

std::shared_ptr<const DistanceField> ProceduralBackend::instantiate(
    const ClothState& state, ClothType cloth) const {
  return std::make_shared<ProceduralClothField>(
      cloth_surface(state.latent(cloth)));
}

double GridField::eval(const Vec3& x) const {
  auto locate = [](double u, int n) {
    int i = static_cast<int>(std::floor(u));
    double f = u - i;
    if (i < 0) { i = 0; f = 0.0; }
    if (i > n - 2) { i = n - 2; f = 1.0; }
    return std::pair<int, double>(i, f);
  };
  const auto [ix, fx] = locate((x.x() - origin.x()) / cell.x(), nx);
  const auto [iy, fy] = locate((x.y() - origin.y()) / cell.y(), ny);
  const auto [iz, fz] = locate((x.z() - origin.z()) / cell.z(), nz);
  double v = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) *
                         (dz ? fz : 1 - fz);
        v += w * at(ix + dx, iy + dy, iz + dz);
      }
  return std::max(0.0, v);
}

void GridField::validate() const {
  if (nx < 2 || ny < 2 || nz < 2)
    throw std::invalid_argument("grid field: dims must be >= 2 per axis");
  if (samples.size() != static_cast<size_t>(nx) * ny * nz)
    throw std::invalid_argument("grid field: sample count mismatch");
  if (!(cell.x() > 0 && cell.y() > 0 && cell.z() > 0))
    throw std::invalid_argument("grid field: cell size must be positive");
  for (float s : samples)
    if (!std::isfinite(s)) throw std::invalid_argument("grid field: NaN sample");
}

void save_grid_field(const GridField& field, const std::string& json_path) {
  field.validate();
  namespace fs = std::filesystem;
  const fs::path path(json_path);
  const std::string blob_name = path.stem().string() + ".f32";
  json header{
      {"format", "clothfit-grid-1"},
      {"origin", {field.origin.x(), field.origin.y(), field.origin.z()}},
      {"cell_size", {field.cell.x(), field.cell.y(), field.cell.z()}},
      {"dims", {field.nx, field.ny, field.nz}},
      {"cloth_type", cloth_name(field.cloth_type)},
      {"latent", std::vector<double>(field.latent.data(),
                                     field.latent.data() + field.latent.size())},
      {"samples", blob_name},
  };
  std::ofstream out(json_path);
  if (!out) throw std::runtime_error("cannot write: " + json_path);
  out << header.dump(2) << "\n";
  write_blob((path.parent_path() / blob_name).string(), field.samples.data(),
             field.samples.size() * sizeof(float));
}

GridField load_grid_field(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open: " + json_path);
  json header = json::parse(in);
  if (header.value("format", "") != "clothfit-grid-1")
    throw std::runtime_error("unsupported grid field format");
  GridField field;
  auto origin = header.at("origin").get<std::array<double, 3>>();
  auto cell = header.at("cell_size").get<std::array<double, 3>>();
  auto dims = header.at("dims").get<std::array<int, 3>>();
  field.origin = Vec3(origin[0], origin[1], origin[2]);
  field.cell = Vec3(cell[0], cell[1], cell[2]);
  field.nx = dims[0];
  field.ny = dims[1];
  field.nz = dims[2];
  field.cloth_type = cloth_from_name(header.at("cloth_type").get<std::string>());
  auto latent = header.at("latent").get<std::vector<double>>();
  field.latent = Eigen::Map<const Eigen::VectorXd>(latent.data(),
                                                   static_cast<Eigen::Index>(latent.size()));
  namespace fs = std::filesystem;
  auto blob = read_blob(
      (fs::path(json_path).parent_path() / header.at("samples").get<std::string>())
          .string());
  field.samples.resize(blob.size() / sizeof(float));
  std::memcpy(field.samples.data(), blob.data(), blob.size());
  field.validate();
  return field;
}

}  // namespace clothfit
