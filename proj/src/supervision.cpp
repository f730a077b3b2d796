#include "clothfit/supervision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

namespace clothfit {

namespace {

std::uint8_t label_of(ClothType cloth) {
  return static_cast<std::uint8_t>(static_cast<int>(cloth) + 1);
}

double clamp_prob(double p) { return std::clamp(p, 1e-7, 1.0 - 1e-7); }

std::array<Vec3, kJointCount> apose_joints(const TPoseBody& tpose,
                                           double abduction) {
  PoseParams theta;
  theta.set_axis_angle(tpose.model->joint_index("L_hip"),
                       Vec3(0, 0, abduction));
  theta.set_axis_angle(tpose.model->joint_index("R_hip"),
                       Vec3(0, 0, -abduction));
  return pose_joints(tpose, theta);
}

std::vector<Vec3> box_grid(const QueryBox& box) {
  std::vector<Vec3> points;
  points.reserve(kQueryGridResolution * kQueryGridResolution *
                 kQueryGridResolution);
  const int n = kQueryGridResolution;
  for (int iz = 0; iz < n; ++iz)
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        const Vec3 t(static_cast<double>(ix) / (n - 1),
                     static_cast<double>(iy) / (n - 1),
                     static_cast<double>(iz) / (n - 1));
        points.push_back(box.lo + t.cwiseProduct(box.hi - box.lo));
      }
  return points;
}

}  // namespace

void QueryBox::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!(lo[a] <= hi[a]))
      throw std::invalid_argument("query box: min must be <= max per axis");
  }
}

void LossWeights::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0; };
  if (!positive(lambda_dp) || !positive(lambda_reg) ||
      !positive(lambda_exist) || !positive(lambda_gender))
    throw std::invalid_argument("loss weights must be positive");
  for (int i = 0; i < kClothCount; ++i) {
    if (!positive(alpha[i]) || !positive(d_max[i]) || !positive(tau[i]))
      throw std::invalid_argument("loss weights must be positive");
  }
}

QueryBox cloth_query_box(const TPoseBody& tpose, ClothType cloth,
                         std::optional<Side> side,
                         double apose_abduction_rad) {
  QueryBox box;
  box.cloth_type = cloth;
  const double vz_min = tpose.z_min();
  const double vz_max = tpose.z_max();

  switch (cloth) {
    case ClothType::UpperCloth:
    case ClothType::Coat: {
      const Vec3 pelvis = tpose.joint("pelvis");
      const Vec3 chest = tpose.joint("chest");
      box.lo = Vec3(tpose.joint("R_hand").x(), 2 * pelvis.y() - chest.y(),
                    1.25 * vz_min - 0.25 * vz_max);
      box.hi = Vec3(tpose.joint("L_hand").x(), 3 * chest.y() - 2 * pelvis.y(),
                    1.25 * vz_max - 0.25 * vz_min);
      break;
    }
    case ClothType::Shoes: {
      if (!side)
        throw std::invalid_argument("shoe query box needs a side");
      const bool left = *side == Side::Left;
      const Vec3 ankle = tpose.joint(left ? "L_ankle" : "R_ankle");
      const Vec3 knee = tpose.joint(left ? "L_knee" : "R_knee");
      const Vec3 toe = tpose.joint(left ? "L_toe" : "R_toe");
      box.lo = Vec3(ankle.x() - 0.15, 1.75 * ankle.y() - 0.75 * knee.y(),
                    0.5 * ankle.z() + 0.5 * toe.z() - 0.25);
      box.hi = Vec3(ankle.x() + 0.15, 0.25 * ankle.y() + 0.75 * knee.y(),
                    0.5 * ankle.z() + 0.5 * toe.z() + 0.25);
      break;
    }
    case ClothType::Pants:
    case ClothType::Skirt: {
      const auto joints = apose_joints(tpose, apose_abduction_rad);
      const Vec3 pelvis = joints[static_cast<size_t>(tpose.model->joint_index("pelvis"))];
      const Vec3 r_ankle =
          joints[static_cast<size_t>(tpose.model->joint_index("R_ankle"))];
      const double c = cloth == ClothType::Pants ? 2.3 : 3.0;
      const double d = cloth == ClothType::Pants ? 3.3 : 4.0;
      box.lo = Vec3(c * r_ankle.x() - (c - 1.0) * pelvis.x(),
                    1.1 * r_ankle.y() - 0.1 * pelvis.y(),
                    1.25 * vz_min - 0.25 * vz_max);
      box.hi = Vec3(d * pelvis.x() - (d - 1.0) * r_ankle.x(),
                    1.1 * pelvis.y() - 0.1 * r_ankle.y(),
                    1.25 * vz_max - 0.25 * vz_min);
      break;
    }
  }
  box.validate();
  return box;
}

QuerySet select_query_points(const QueryBox& box,
                             const std::vector<MappedClothPoint>& mapped,
                             double tau) {
  box.validate();
  QuerySet out;
  out.cloth_type = box.cloth_type;
  if (mapped.empty()) return out;
  for (const Vec3& x : box_grid(box)) {
    double best = std::numeric_limits<double>::infinity();
    size_t best_idx = 0;
    for (size_t k = 0; k < mapped.size(); ++k) {
      const double d = (mapped[k].position - x).squaredNorm();
      if (d < best) {  // strict: ties keep the lowest mapped-point index
        best = d;
        best_idx = k;
      }
    }
    if (std::sqrt(best) <= tau) {
      out.points.push_back(x);
      out.nearest_label.push_back(mapped[best_idx].label);
    }
  }
  return out;
}

std::array<QuerySet, kClothCount> build_query_sets(
    const TPoseBody& tpose, const std::vector<MappedClothPoint>& mapped,
    const LossWeights& weights, double apose_abduction_rad) {
  std::array<QuerySet, kClothCount> out;
  for (int c = 0; c < kClothCount; ++c) {
    const ClothType cloth = static_cast<ClothType>(c);
    const double tau = weights.tau_of(cloth);
    if (cloth == ClothType::Shoes) {
      QuerySet left = select_query_points(
          cloth_query_box(tpose, cloth, Side::Left, apose_abduction_rad),
          mapped, tau);
      QuerySet right = select_query_points(
          cloth_query_box(tpose, cloth, Side::Right, apose_abduction_rad),
          mapped, tau);
      left.points.insert(left.points.end(), right.points.begin(),
                         right.points.end());
      left.nearest_label.insert(left.nearest_label.end(),
                                right.nearest_label.begin(),
                                right.nearest_label.end());
      out[c] = std::move(left);
    } else {
      out[c] = select_query_points(
          cloth_query_box(tpose, cloth, std::nullopt, apose_abduction_rad),
          mapped, tau);
    }
  }
  return out;
}

double densepose_loss_single(const QuerySet& queryset, ClothType cloth,
                             const ClothState& state,
                             const FieldBackend& backend,
                             const LossWeights& weights) {
  if (!existence_gate(state.existence[static_cast<int>(cloth)])) return 0.0;
  if (queryset.points.empty()) return 0.0;
  const double d_max = weights.d_max_of(cloth);
  const auto field = backend.instantiate(state, cloth);
  const std::uint8_t label = label_of(cloth);
  double sum = 0.0;
  for (size_t j = 0; j < queryset.points.size(); ++j) {
    const double c = field->eval(queryset.points[j]);
    if (queryset.nearest_label[j] == label) {
      sum += std::abs(c);
    } else {
      // Clamp to d_max first: far empty space is exactly "far enough".
      sum += std::abs(std::min(c, d_max) - d_max);
    }
  }
  return sum / (kClothCount * static_cast<double>(queryset.points.size()));
}

double densepose_loss(const std::array<QuerySet, kClothCount>& querysets,
                      const ClothState& state, const FieldBackend& backend,
                      const LossWeights& weights) {
  double total = 0.0;
  for (int c = 0; c < kClothCount; ++c) {
    total += densepose_loss_single(querysets[c], static_cast<ClothType>(c),
                                   state, backend, weights);
  }
  return total;
}

double reg_loss(const ClothState& state, const LossWeights& weights) {
  double total = 0.0;
  for (int c = 0; c < kClothCount; ++c) {
    if (!existence_gate(state.existence[c])) continue;
    total += weights.alpha[c] * state.latents[c].z.norm();
  }
  return total;
}

double existence_loss(const std::array<double, kClothCount>& scores,
                      const std::array<Tristate, kClothCount>& truth) {
  double total = 0.0;
  for (int c = 0; c < kClothCount; ++c) {
    if (truth[c] == Tristate::Unsupervised) continue;
    const double target = truth[c] == Tristate::True ? 1.0 : 0.0;
    const double p = clamp_prob(scores[c]);
    total -= target * std::log(p) + (1.0 - target) * std::log(1.0 - p);
  }
  return total / kClothCount;
}

double gender_loss(double g_male, double g_female, bool truth_male) {
  const double tm = truth_male ? 1.0 : 0.0;
  return -(tm * std::log(clamp_prob(g_male)) +
           (1.0 - tm) * std::log(clamp_prob(g_female)));
}

double silhouette_loss_single(ClothType cloth, const ClothState& state,
                              const FieldBackend& backend,
                              const TPoseBody& tpose,
                              const ObservationSet& obs, double iso,
                              double apose_abduction_rad) {
  const std::uint8_t label = label_of(cloth);
  std::vector<QueryBox> boxes;
  if (cloth == ClothType::Shoes) {
    boxes.push_back(cloth_query_box(tpose, cloth, Side::Left,
                                    apose_abduction_rad));
    boxes.push_back(cloth_query_box(tpose, cloth, Side::Right,
                                    apose_abduction_rad));
  } else {
    boxes.push_back(cloth_query_box(tpose, cloth, std::nullopt,
                                    apose_abduction_rad));
  }
  const auto field = backend.instantiate(state, cloth);
  const Camera& cam = obs.camera;
  std::vector<std::uint8_t> hit(static_cast<size_t>(cam.width) * cam.height, 0);
  size_t projected = 0, off_label = 0;
  for (const QueryBox& box : boxes) {
    for (const Vec3& x : box_grid(box)) {
      if (field->eval(x) >= iso) continue;
      double px, py;
      cam.project(x, px, py);
      const int ix = static_cast<int>(std::floor(px));
      const int iy = static_cast<int>(std::floor(py));
      ++projected;
      if (ix < 0 || iy < 0 || ix >= cam.width || iy >= cam.height ||
          obs.segmentation.at(ix, iy) != label) {
        ++off_label;
      }
      // Mark a 1-pixel neighborhood as covered.
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = ix + dx, ny = iy + dy;
          if (nx >= 0 && ny >= 0 && nx < cam.width && ny < cam.height)
            hit[static_cast<size_t>(ny) * cam.width + nx] = 1;
        }
    }
  }
  size_t labeled = 0, uncovered = 0;
  for (size_t i = 0; i < hit.size(); ++i) {
    if (obs.segmentation.labels[i] != label) continue;
    ++labeled;
    if (!hit[i]) ++uncovered;
  }
  if (projected == 0 && labeled == 0) return 0.0;
  const double term_p =
      projected == 0 ? 1.0 : static_cast<double>(off_label) / projected;
  const double term_q =
      labeled == 0 ? (projected == 0 ? 0.0 : 1.0)
                   : static_cast<double>(uncovered) / labeled;
  return 0.5 * (term_p + term_q);
}

double silhouette_loss(const ClothState& state, const FieldBackend& backend,
                       const TPoseBody& tpose, const ObservationSet& obs,
                       double iso, double apose_abduction_rad) {
  double total = 0.0;
  int gated = 0;
  for (int c = 0; c < kClothCount; ++c) {
    if (!existence_gate(state.existence[c])) continue;
    ++gated;
    total += silhouette_loss_single(static_cast<ClothType>(c), state, backend,
                                    tpose, obs, iso, apose_abduction_rad);
  }
  return gated == 0 ? 0.0 : total / gated;
}

LossBreakdown total_loss(LossBreakdown components, const LossWeights& weights,
                         bool silhouette_for_dp) {
  weights.validate();
  const double dp_term =
      silhouette_for_dp ? components.silhouette : components.dp;
  components.total = weights.lambda_dp * dp_term +
                     weights.lambda_reg * components.reg +
                     weights.lambda_exist * components.exist +
                     weights.lambda_gender * components.gender;
  return components;
}

std::string loss_breakdown_json(const LossBreakdown& b,
                                const LossWeights& weights) {
  nlohmann::json j{
      {"dp", b.dp},
      {"reg", b.reg},
      {"exist", b.exist},
      {"gender", b.gender},
      {"silhouette", b.silhouette},
      {"total", b.total},
      {"weights",
       {{"lambda_dp", weights.lambda_dp},
        {"lambda_reg", weights.lambda_reg},
        {"lambda_exist", weights.lambda_exist},
        {"lambda_gender", weights.lambda_gender},
        {"alpha", weights.alpha},
        {"d_max", weights.d_max},
        {"tau", weights.tau}}},
  };
  return j.dump();
}

}  // namespace clothfit
