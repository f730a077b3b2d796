#include "clothfit/body.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace clothfit {

namespace {

using json = nlohmann::json;

struct JointDef {
  const char* name;
  int parent;
  Vec3 pos;
};

// SMPL joint set (24) with chest/toe names used by the query-box formulas.
// T-pose, meters, y up, x toward the subject's left, z toward the camera.
const std::array<JointDef, kJointCount> kJoints = {{
    {"pelvis", -1, {0.00, 0.95, 0.0}},
    {"L_hip", 0, {0.09, 0.91, 0.0}},
    {"R_hip", 0, {-0.09, 0.91, 0.0}},
    {"spine1", 0, {0.00, 1.07, 0.0}},
    {"L_knee", 1, {0.10, 0.50, 0.0}},
    {"R_knee", 2, {-0.10, 0.50, 0.0}},
    {"spine2", 3, {0.00, 1.19, 0.0}},
    {"L_ankle", 4, {0.10, 0.09, 0.0}},
    {"R_ankle", 5, {-0.10, 0.09, 0.0}},
    {"chest", 6, {0.00, 1.31, 0.0}},
    {"L_toe", 7, {0.10, 0.02, 0.13}},
    {"R_toe", 8, {-0.10, 0.02, 0.13}},
    {"neck", 9, {0.00, 1.43, 0.0}},
    {"L_collar", 9, {0.08, 1.38, 0.0}},
    {"R_collar", 9, {-0.08, 1.38, 0.0}},
    {"head", 12, {0.00, 1.57, 0.0}},
    {"L_shoulder", 13, {0.19, 1.40, 0.0}},
    {"R_shoulder", 14, {-0.19, 1.40, 0.0}},
    {"L_elbow", 16, {0.46, 1.40, 0.0}},
    {"R_elbow", 17, {-0.46, 1.40, 0.0}},
    {"L_wrist", 18, {0.71, 1.40, 0.0}},
    {"R_wrist", 19, {-0.71, 1.40, 0.0}},
    {"L_hand", 20, {0.80, 1.40, 0.0}},
    {"R_hand", 21, {-0.80, 1.40, 0.0}},
}};

struct TubeDef {
  int ja, jb;      // proximal, distal joint
  double radius;
  BodyPart part;
  double ca, cb;   // limb coordinate at each end; -1 = torso y formula
};

Eigen::Matrix3d rodrigues(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle < 1e-12) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

}  // namespace

int BodyModel::joint_index(const std::string& name) const {
  for (int i = 0; i < static_cast<int>(joint_names.size()); ++i) {
    if (joint_names[i] == name) return i;
  }
  throw std::invalid_argument("unknown joint name: " + name);
}

void BodyModel::validate() const {
  const auto v = template_vertices.size();
  if (v == 0) throw std::invalid_argument("body: empty vertex set");
  if (joint_parents.size() != kJointCount ||
      joint_names.size() != kJointCount)
    throw std::invalid_argument("body: joint count must be 24");
  if (joint_parents[0] != -1)
    throw std::invalid_argument("body: pelvis must be the root");
  for (int j = 1; j < kJointCount; ++j) {
    if (joint_parents[j] < 0 || joint_parents[j] >= j)
      throw std::invalid_argument("body: parents must form a tree (topological order)");
  }
  for (const Tri& f : faces) {
    for (std::uint32_t i : f)
      if (i >= v) throw std::invalid_argument("body: face index out of range");
  }
  if (skin_weights.rows() != static_cast<Eigen::Index>(v) ||
      skin_weights.cols() != kJointCount)
    throw std::invalid_argument("body: skin weight shape mismatch");
  for (Eigen::Index r = 0; r < skin_weights.rows(); ++r) {
    double sum = 0;
    for (Eigen::Index c = 0; c < kJointCount; ++c) {
      const double w = skin_weights(r, c);
      if (w < 0) throw std::invalid_argument("body: negative skin weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw std::invalid_argument("body: skin weights must sum to 1");
  }
  if (joint_regressor.rows() != kJointCount ||
      joint_regressor.cols() != static_cast<Eigen::Index>(v))
    throw std::invalid_argument("body: regressor shape mismatch");
  if (shape_basis.size() != kShapeDims)
    throw std::invalid_argument("body: shape basis must have 10 directions");
  for (const auto& basis : shape_basis) {
    if (basis.size() != v)
      throw std::invalid_argument("body: shape basis size mismatch");
  }
  if (!part_ids.empty() && (part_ids.size() != v || limb_coord.size() != v))
    throw std::invalid_argument("body: part annotation size mismatch");
}

void ShapeParams::validate() const {
  for (double b : beta) {
    if (!std::isfinite(b) || std::abs(b) > 5.0)
      throw std::invalid_argument("shape: |beta| must be finite and <= 5");
  }
}

void PoseParams::validate() const {
  for (int j = 0; j < kJointCount; ++j) {
    const Vec3 aa = axis_angle(j);
    if (!aa.allFinite() || aa.norm() > M_PI + 1e-12)
      throw std::invalid_argument("pose: axis-angle norm must be <= pi");
  }
}

double TPoseBody::z_min() const {
  double m = vertices[0].z();
  for (const Vec3& v : vertices) m = std::min(m, v.z());
  return m;
}

double TPoseBody::z_max() const {
  double m = vertices[0].z();
  for (const Vec3& v : vertices) m = std::max(m, v.z());
  return m;
}

Mesh TPoseBody::surface_mesh() const {
  Mesh mesh;
  mesh.vertices = vertices;
  mesh.faces = model->faces;
  return mesh;
}

void ProceduralBodySpec::validate() const {
  if (!(stature > 0) || !(girth > 0))
    throw std::invalid_argument("body spec: dimensions must be positive");
  if (sectors < 4)
    throw std::invalid_argument("body spec: need at least 4 segments per capsule");
  if (!(ring_spacing > 0))
    throw std::invalid_argument("body spec: ring spacing must be positive");
}

BodyModel make_procedural_body(const ProceduralBodySpec& spec,
                               const std::string& gender) {
  spec.validate();

  BodyModel model;
  model.gender_variant = gender;
  std::array<Vec3, kJointCount> joints;
  for (int j = 0; j < kJointCount; ++j) {
    model.joint_names.push_back(kJoints[j].name);
    model.joint_parents.push_back(kJoints[j].parent);
    joints[j] = kJoints[j].pos * spec.stature;
  }

  const int P = 0, LHIP = 1, RHIP = 2, S1 = 3, LKNEE = 4, RKNEE = 5, S2 = 6,
            LANK = 7, RANK = 8, CHEST = 9, LTOE = 10, RTOE = 11, NECK = 12,
            LCOL = 13, RCOL = 14, HEAD = 15, LSHO = 16, RSHO = 17, LELB = 18,
            RELB = 19, LWRI = 20, RWRI = 21, LHAND = 22, RHAND = 23;

  auto seg = [&](int a, int b) { return (joints[b] - joints[a]).norm(); };
  const double arm = seg(LSHO, LELB) + seg(LELB, LWRI) + seg(LWRI, LHAND);
  const double a1 = seg(LSHO, LELB) / arm;
  const double a2 = (seg(LSHO, LELB) + seg(LELB, LWRI)) / arm;
  const double leg = seg(LHIP, LKNEE) + seg(LKNEE, LANK);
  const double l1 = seg(LHIP, LKNEE) / leg;

  // -1 limb coords mean "torso formula": (y_neck - y) / (y_neck - y_pelvis).
  const std::vector<TubeDef> tubes = {
      {P, S1, 0.125, BodyPart::Torso, -1, -1},
      {S1, S2, 0.115, BodyPart::Torso, -1, -1},
      {S2, CHEST, 0.110, BodyPart::Torso, -1, -1},
      {CHEST, NECK, 0.055, BodyPart::Torso, -1, -1},
      {P, LHIP, 0.065, BodyPart::Torso, -1, -1},
      {P, RHIP, 0.065, BodyPart::Torso, -1, -1},
      {CHEST, LCOL, 0.050, BodyPart::Torso, -1, -1},
      {CHEST, RCOL, 0.050, BodyPart::Torso, -1, -1},
      {LCOL, LSHO, 0.050, BodyPart::Torso, -1, -1},
      {RCOL, RSHO, 0.050, BodyPart::Torso, -1, -1},
      {NECK, HEAD, 0.085, BodyPart::Head, 0, 1},
      {LSHO, LELB, 0.048, BodyPart::LeftArm, 0, a1},
      {LELB, LWRI, 0.040, BodyPart::LeftArm, a1, a2},
      {LWRI, LHAND, 0.034, BodyPart::LeftArm, a2, 1},
      {RSHO, RELB, 0.048, BodyPart::RightArm, 0, a1},
      {RELB, RWRI, 0.040, BodyPart::RightArm, a1, a2},
      {RWRI, RHAND, 0.034, BodyPart::RightArm, a2, 1},
      {LHIP, LKNEE, 0.070, BodyPart::LeftLeg, 0, l1},
      {LKNEE, LANK, 0.055, BodyPart::LeftLeg, l1, 1},
      {RHIP, RKNEE, 0.070, BodyPart::RightLeg, 0, l1},
      {RKNEE, RANK, 0.055, BodyPart::RightLeg, l1, 1},
      {LANK, LTOE, 0.050, BodyPart::LeftFoot, 0, 1},
      {RANK, RTOE, 0.050, BodyPart::RightFoot, 0, 1},
  };

  const int S = spec.sectors;
  const double y_neck = joints[NECK].y();
  const double y_pelvis = joints[P].y();
  auto torso_coord = [&](double y) {
    return std::clamp((y_neck - y) / (y_neck - y_pelvis), 0.0, 1.1);
  };

  std::vector<double> weights_flat;  // per vertex: (joint, w) pairs handled below
  std::vector<std::pair<std::array<int, 2>, std::array<double, 2>>> vweights;
  std::array<int, kJointCount> regressor_ring_start;
  std::array<int, kJointCount> regressor_ring_count;
  regressor_ring_start.fill(-1);
  regressor_ring_count.fill(0);

  for (const TubeDef& t : tubes) {
    const Vec3 a = joints[t.ja], b = joints[t.jb];
    const Vec3 axis = (b - a).normalized();
    Vec3 ref = std::abs(axis.z()) > 0.9 ? Vec3(0, 1, 0) : Vec3(0, 0, 1);
    const Vec3 u = ref.cross(axis).normalized();
    const Vec3 w = axis.cross(u);
    const double len = (b - a).norm();
    const int nr = std::max(2, static_cast<int>(std::lround(len / spec.ring_spacing)) + 1);
    const double radius = t.radius * spec.girth * spec.stature;

    const int base = static_cast<int>(model.template_vertices.size());
    for (int i = 0; i < nr; ++i) {
      const double tt = static_cast<double>(i) / (nr - 1);
      const Vec3 c = a + tt * (b - a);
      // Proximal joint drives the tube; blend toward the distal joint at the end.
      double wb = tt <= 0.75 ? 0.0 : 0.5 * (tt - 0.75) / 0.25;
      for (int s = 0; s < S; ++s) {
        const double phi = 2.0 * M_PI * s / S;
        model.template_vertices.push_back(c + radius * (std::cos(phi) * u +
                                                        std::sin(phi) * w));
        model.part_ids.push_back(t.part);
        model.limb_coord.push_back(t.ca < 0 ? torso_coord(c.y())
                                            : t.ca + tt * (t.cb - t.ca));
        vweights.push_back({{t.ja, t.jb}, {1.0 - wb, wb}});
      }
      if (i == 0 && regressor_ring_start[t.ja] < 0) {
        regressor_ring_start[t.ja] = base;
        regressor_ring_count[t.ja] = S;
      }
      if (i == nr - 1 && regressor_ring_start[t.jb] < 0) {
        regressor_ring_start[t.jb] = base + (nr - 1) * S;
        regressor_ring_count[t.jb] = S;
      }
    }
    // Side walls.
    for (int i = 0; i + 1 < nr; ++i) {
      for (int s = 0; s < S; ++s) {
        const std::uint32_t v00 = base + i * S + s;
        const std::uint32_t v01 = base + i * S + (s + 1) % S;
        const std::uint32_t v10 = base + (i + 1) * S + s;
        const std::uint32_t v11 = base + (i + 1) * S + (s + 1) % S;
        model.faces.push_back({v00, v01, v11});
        model.faces.push_back({v00, v11, v10});
      }
    }
    // Flat end caps.
    auto add_cap = [&](int ring_base, const Vec3& center, double coordv,
                       std::array<int, 2> wj, std::array<double, 2> wv,
                       bool flip) {
      const std::uint32_t apex =
          static_cast<std::uint32_t>(model.template_vertices.size());
      model.template_vertices.push_back(center);
      model.part_ids.push_back(t.part);
      model.limb_coord.push_back(coordv);
      vweights.push_back({wj, wv});
      for (int s = 0; s < S; ++s) {
        const std::uint32_t va = ring_base + s;
        const std::uint32_t vb = ring_base + (s + 1) % S;
        if (flip)
          model.faces.push_back({apex, vb, va});
        else
          model.faces.push_back({apex, va, vb});
      }
    };
    add_cap(base, a, t.ca < 0 ? torso_coord(a.y()) : t.ca, {t.ja, t.jb},
            {1.0, 0.0}, true);
    add_cap(base + (nr - 1) * S, b, t.ca < 0 ? torso_coord(b.y()) : t.cb,
            {t.ja, t.jb}, {0.5, 0.5}, false);
  }

  const auto V = model.template_vertices.size();
  model.skin_weights = Eigen::MatrixXd::Zero(V, kJointCount);
  for (size_t i = 0; i < V; ++i) {
    model.skin_weights(i, vweights[i].first[0]) += vweights[i].second[0];
    model.skin_weights(i, vweights[i].first[1]) += vweights[i].second[1];
  }
  model.joint_regressor = Eigen::MatrixXd::Zero(kJointCount, V);
  for (int j = 0; j < kJointCount; ++j) {
    if (regressor_ring_start[j] < 0)
      throw std::logic_error("procedural body: joint without regressor ring");
    for (int s = 0; s < regressor_ring_count[j]; ++s)
      model.joint_regressor(j, regressor_ring_start[j] + s) =
          1.0 / regressor_ring_count[j];
  }

  model.shape_basis.assign(kShapeDims, std::vector<Vec3>(V, Vec3::Zero()));
  const Vec3 pelvis = joints[P];
  for (size_t i = 0; i < V; ++i) {
    const Vec3& v = model.template_vertices[i];
    model.shape_basis[0][i] = Vec3(0, 0.1 * (v.y() - pelvis.y()), 0);
    model.shape_basis[1][i] =
        Vec3(0.1 * (v.x() - pelvis.x()), 0, 0.1 * (v.z() - pelvis.z()));
  }

  model.validate();
  return model;
}

TPoseBody shape_body(const BodyModel& model, const ShapeParams& beta) {
  model.validate();
  beta.validate();
  TPoseBody out;
  out.model = &model;
  out.vertices = model.template_vertices;
  for (int k = 0; k < kShapeDims; ++k) {
    if (beta.beta[k] == 0.0) continue;
    for (size_t i = 0; i < out.vertices.size(); ++i)
      out.vertices[i] += beta.beta[k] * model.shape_basis[k][i];
  }
  for (int j = 0; j < kJointCount; ++j) {
    Vec3 p = Vec3::Zero();
    for (Eigen::Index i = 0; i < model.joint_regressor.cols(); ++i) {
      const double w = model.joint_regressor(j, i);
      if (w != 0.0) p += w * out.vertices[i];
    }
    out.joints[j] = p;
  }
  return out;
}

std::array<Eigen::Affine3d, kJointCount> joint_world_transforms(
    const TPoseBody& tpose, const PoseParams& theta) {
  std::array<Eigen::Affine3d, kJointCount> world;
  for (int j = 0; j < kJointCount; ++j) {
    const int p = tpose.model->joint_parents[j];
    Eigen::Affine3d local = Eigen::Affine3d::Identity();
    const Vec3 offset =
        p < 0 ? tpose.joints[j] : Vec3(tpose.joints[j] - tpose.joints[p]);
    local.translate(offset).rotate(rodrigues(theta.axis_angle(j)));
    world[j] = p < 0 ? local : world[p] * local;
  }
  return world;
}

std::array<Vec3, kJointCount> pose_joints(const TPoseBody& tpose,
                                          const PoseParams& theta) {
  const auto world = joint_world_transforms(tpose, theta);
  std::array<Vec3, kJointCount> out;
  for (int j = 0; j < kJointCount; ++j) out[j] = world[j].translation();
  return out;
}

std::vector<Eigen::Affine3d> vertex_skin_transforms(const TPoseBody& tpose,
                                                    const PoseParams& theta) {
  theta.validate();
  const auto world = joint_world_transforms(tpose, theta);
  std::array<Eigen::Matrix4d, kJointCount> skin;
  for (int j = 0; j < kJointCount; ++j) {
    Eigen::Affine3d rest_inv = Eigen::Affine3d::Identity();
    rest_inv.translate(Vec3(-tpose.joints[j]));
    skin[j] = (world[j] * rest_inv).matrix();
  }
  const auto& weights = tpose.model->skin_weights;
  std::vector<Eigen::Affine3d> out(tpose.vertices.size());
  for (size_t i = 0; i < tpose.vertices.size(); ++i) {
    Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
    for (int j = 0; j < kJointCount; ++j) {
      const double w = weights(static_cast<Eigen::Index>(i), j);
      if (w != 0.0) m += w * skin[j];
    }
    out[i].matrix() = m;
  }
  return out;
}

std::vector<Vec3> skin_vertices(const TPoseBody& tpose, const PoseParams& theta,
                                const std::vector<Vec3>& vertices) {
  if (vertices.size() != tpose.vertices.size())
    throw std::invalid_argument("skin_vertices: topology mismatch");
  const auto transforms = vertex_skin_transforms(tpose, theta);
  std::vector<Vec3> out(vertices.size());
  for (size_t i = 0; i < vertices.size(); ++i) out[i] = transforms[i] * vertices[i];
  return out;
}

Mesh pose_body(const TPoseBody& tpose, const PoseParams& theta) {
  Mesh mesh;
  mesh.vertices = skin_vertices(tpose, theta, tpose.vertices);
  mesh.faces = tpose.model->faces;
  return mesh;
}

void save_body(const BodyModel& model, const std::string& dir) {
  model.validate();
  const auto V = model.template_vertices.size();
  json manifest{
      {"format", "clothfit-body-1"},
      {"vertex_count", V},
      {"face_count", model.faces.size()},
      {"joint_count", kJointCount},
      {"joint_names", model.joint_names},
      {"joint_parents", model.joint_parents},
      {"gender", model.gender_variant},
      {"shape_dims", kShapeDims},
      {"blobs",
       {{"vertices", "body_vertices.bin"},
        {"faces", "body_faces.bin"},
        {"weights", "body_weights.bin"},
        {"regressor", "body_regressor.bin"},
        {"shape_basis", "body_shape_basis.bin"},
        {"part_ids", "body_parts.bin"},
        {"limb_coord", "body_limb.bin"}}},
  };
  std::ofstream out(dir + "/body.json");
  if (!out) throw std::runtime_error("cannot write body manifest in " + dir);
  out << manifest.dump(2) << "\n";

  write_blob(dir + "/body_vertices.bin", model.template_vertices.data(),
             V * 3 * sizeof(double));
  write_blob(dir + "/body_faces.bin", model.faces.data(),
             model.faces.size() * 3 * sizeof(std::uint32_t));
  // Row-major weights (V x 24) and regressor (24 x V).
  std::vector<double> tmp(V * kJointCount);
  for (size_t i = 0; i < V; ++i)
    for (int j = 0; j < kJointCount; ++j)
      tmp[i * kJointCount + j] = model.skin_weights(i, j);
  write_blob(dir + "/body_weights.bin", tmp.data(), tmp.size() * sizeof(double));
  for (int j = 0; j < kJointCount; ++j)
    for (size_t i = 0; i < V; ++i)
      tmp[static_cast<size_t>(j) * V + i] = model.joint_regressor(j, i);
  write_blob(dir + "/body_regressor.bin", tmp.data(), tmp.size() * sizeof(double));
  std::vector<double> basis(static_cast<size_t>(kShapeDims) * V * 3);
  for (int k = 0; k < kShapeDims; ++k)
    for (size_t i = 0; i < V; ++i)
      for (int c = 0; c < 3; ++c)
        basis[(static_cast<size_t>(k) * V + i) * 3 + c] =
            model.shape_basis[k][i][c];
  write_blob(dir + "/body_shape_basis.bin", basis.data(),
             basis.size() * sizeof(double));
  write_blob(dir + "/body_parts.bin", model.part_ids.data(),
             model.part_ids.size());
  write_blob(dir + "/body_limb.bin", model.limb_coord.data(),
             model.limb_coord.size() * sizeof(double));
}

BodyModel load_body(const std::string& dir) {
  std::ifstream in(dir + "/body.json");
  if (!in) throw std::runtime_error("cannot open body manifest in " + dir);
  json manifest = json::parse(in);
  if (manifest.value("format", "") != "clothfit-body-1")
    throw std::runtime_error("unsupported body format");

  BodyModel model;
  const size_t V = manifest.at("vertex_count").get<size_t>();
  const size_t F = manifest.at("face_count").get<size_t>();
  model.joint_names = manifest.at("joint_names").get<std::vector<std::string>>();
  model.joint_parents = manifest.at("joint_parents").get<std::vector<int>>();
  model.gender_variant = manifest.at("gender").get<std::string>();
  const auto& blobs = manifest.at("blobs");

  auto blob = [&](const char* key) {
    return read_blob(dir + "/" + blobs.at(key).get<std::string>());
  };
  auto vertices = blob("vertices");
  model.template_vertices.resize(V);
  std::memcpy(model.template_vertices.data(), vertices.data(),
              V * 3 * sizeof(double));
  auto faces = blob("faces");
  model.faces.resize(F);
  std::memcpy(model.faces.data(), faces.data(), F * 3 * sizeof(std::uint32_t));

  auto weights = blob("weights");
  const double* wp = reinterpret_cast<const double*>(weights.data());
  model.skin_weights.resize(V, kJointCount);
  for (size_t i = 0; i < V; ++i)
    for (int j = 0; j < kJointCount; ++j)
      model.skin_weights(i, j) = wp[i * kJointCount + j];
  auto regressor = blob("regressor");
  const double* rp = reinterpret_cast<const double*>(regressor.data());
  model.joint_regressor.resize(kJointCount, V);
  for (int j = 0; j < kJointCount; ++j)
    for (size_t i = 0; i < V; ++i)
      model.joint_regressor(j, i) = rp[static_cast<size_t>(j) * V + i];
  auto basis = blob("shape_basis");
  const double* bp = reinterpret_cast<const double*>(basis.data());
  model.shape_basis.assign(kShapeDims, std::vector<Vec3>(V));
  for (int k = 0; k < kShapeDims; ++k)
    for (size_t i = 0; i < V; ++i)
      model.shape_basis[k][i] =
          Vec3(bp[(static_cast<size_t>(k) * V + i) * 3],
               bp[(static_cast<size_t>(k) * V + i) * 3 + 1],
               bp[(static_cast<size_t>(k) * V + i) * 3 + 2]);
  auto parts = blob("part_ids");
  model.part_ids.resize(V);
  std::memcpy(model.part_ids.data(), parts.data(), V);
  auto limb = blob("limb_coord");
  model.limb_coord.resize(V);
  std::memcpy(model.limb_coord.data(), limb.data(), V * sizeof(double));

  model.validate();
  return model;
}

}  // namespace clothfit
