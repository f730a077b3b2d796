#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "clothfit/clothfield.hpp"
#include "clothfit/densepose.hpp"

namespace clothfit {

enum class Side { Left, Right };

// Axis-aligned query box, corner representation
// [x_min, y_min, z_min, x_max, y_max, z_max].
struct QueryBox {
  ClothType cloth_type = ClothType::UpperCloth;
  Vec3 lo{0, 0, 0};
  Vec3 hi{0, 0, 0};
  void validate() const;
};

// Query points kept inside a box, each tagged with the label of its
// nearest mapped cloth point.
struct QuerySet {
  ClothType cloth_type = ClothType::UpperCloth;
  std::vector<Vec3> points;
  std::vector<std::uint8_t> nearest_label;
};

// All loss constants in one table.
struct LossWeights {
  double lambda_dp = 1.0;
  double lambda_reg = 0.1;
  double lambda_exist = 0.01;
  double lambda_gender = 0.01;
  std::array<double, kClothCount> alpha{1.0, 1.0, 1.0, 1.0, 0.1};
  std::array<double, kClothCount> d_max{0.1, 0.1, 0.1, 0.1, 0.01};
  std::array<double, kClothCount> tau{0.03, 0.10, 0.03, 0.03, 0.03};

  double alpha_of(ClothType c) const { return alpha[static_cast<int>(c)]; }
  double d_max_of(ClothType c) const { return d_max[static_cast<int>(c)]; }
  double tau_of(ClothType c) const { return tau[static_cast<int>(c)]; }
  void validate() const;
};

inline constexpr int kQueryGridResolution = 21;
inline constexpr int kMappedPointCount = 196;

// Query box from the T-pose joints; pants/skirt use joints of an A-pose
// variant with legs abducted by `apose_abduction_rad`. Shoes require a side.
QueryBox cloth_query_box(const TPoseBody& tpose, ClothType cloth,
                         std::optional<Side> side = std::nullopt,
                         double apose_abduction_rad = 10.0 * M_PI / 180.0);

// 21^3 uniform grid over the box (inclusive corners); keeps points within
// tau of the nearest mapped point; ties by lowest mapped-point index.
QuerySet select_query_points(const QueryBox& box,
                             const std::vector<MappedClothPoint>& mapped,
                             double tau);

// Both shoe boxes merged (left first); one QuerySet per cloth otherwise.
std::array<QuerySet, kClothCount> build_query_sets(
    const TPoseBody& tpose, const std::vector<MappedClothPoint>& mapped,
    const LossWeights& weights, double apose_abduction_rad = 10.0 * M_PI / 180.0);

// L_dp over existence-gated clothes; the field value is clamped to d_max
// before the non-matching term.
double densepose_loss(const std::array<QuerySet, kClothCount>& querysets,
                      const ClothState& state, const FieldBackend& backend,
                      const LossWeights& weights);
// Per-cloth contribution (already divided by N_c * N_q); used by the
// fitting loop's separable gradient.
double densepose_loss_single(const QuerySet& queryset, ClothType cloth,
                             const ClothState& state,
                             const FieldBackend& backend,
                             const LossWeights& weights);

double reg_loss(const ClothState& state, const LossWeights& weights);

double existence_loss(const std::array<double, kClothCount>& scores,
                      const std::array<Tristate, kClothCount>& truth);

double gender_loss(double g_male, double g_female, bool truth_male);

// Symmetric 2D coverage penalty (ablation baseline): query-grid points
// with C below `iso` projected against the cloth's segmentation labels.
double silhouette_loss(const ClothState& state, const FieldBackend& backend,
                       const TPoseBody& tpose, const ObservationSet& obs,
                       double iso,
                       double apose_abduction_rad = 10.0 * M_PI / 180.0);
double silhouette_loss_single(ClothType cloth, const ClothState& state,
                              const FieldBackend& backend,
                              const TPoseBody& tpose,
                              const ObservationSet& obs, double iso,
                              double apose_abduction_rad = 10.0 * M_PI / 180.0);

struct LossBreakdown {
  double dp = 0.0;
  double reg = 0.0;
  double exist = 0.0;
  double gender = 0.0;
  double silhouette = 0.0;  // reported, not part of the default total
  double total = 0.0;
};

// Weighted sum; `components` carries unweighted values, total is filled in.
LossBreakdown total_loss(LossBreakdown components, const LossWeights& weights,
                         bool silhouette_for_dp = false);

std::string loss_breakdown_json(const LossBreakdown& b,
                                const LossWeights& weights);

}  // namespace clothfit
