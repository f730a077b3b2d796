#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "clothfit/densepose.hpp"
#include "clothfit/supervision.hpp"

namespace clothfit {

struct SimilarityTransform {
  double scale = 1.0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation{0, 0, 0};

  Vec3 apply(const Vec3& p) const {
    return scale * (rotation * p) + translation;
  }
  void validate() const;  // scale > 0, R orthonormal det +1
};

enum class BccClass : int { UpperBody = 0, LowerBody = 1, NonCloth = 2 };

struct MetricReport {
  double cd_mm = -1.0;
  std::array<std::optional<double>, 3> bcc;  // indexed by BccClass
  double bcc_average = -1.0;
  int matched_pairs = 0;
  SimilarityTransform alignment;
};

// Skins an arbitrary vertex set registered to the body topology; with
// theta = 0 the input comes back unchanged.
Mesh build_gt_surface(const TPoseBody& tpose, const Mesh& registered,
                      const PoseParams& theta);

// Rasterizes both meshes; every pixel covered in both maps contributes the
// pair of face centroids. Duplicates kept (pixel-area weighting).
std::vector<std::pair<Vec3, Vec3>> match_vertex_pairs(const Mesh& recon,
                                                      const Mesh& gt,
                                                      const Camera& camera);

// Least-squares similarity a -> b over the pairs; needs 3+ non-degenerate
// pairs, throws otherwise.
SimilarityTransform estimate_similarity(
    const std::vector<std::pair<Vec3, Vec3>>& pairs);

// Symmetric mean vertex-to-nearest-triangle distance, in millimeters.
double chamfer_distance(const Mesh& a, const Mesh& b);

// Alignment then CD: match pairs, solve the similarity, transform recon.
struct CdResult {
  double cd_mm = 0.0;
  SimilarityTransform alignment;
  int matched_pairs = 0;
};
CdResult evaluate_cd(const Mesh& recon, const Mesh& gt, const Camera& camera);

// Correspondence score over segmentation points lifted to the T-pose
// surface. Classes: upper body {upper, coat}, lower body {pants, skirt},
// non-cloth; shoes excluded. A cloth point is correct when a reconstructed
// mesh of its class lies within `threshold`; a non-cloth point when no
// cloth mesh at all does.
struct BccResult {
  std::array<std::optional<double>, 3> per_class;
  double average = 0.0;  // mean of present classes
};
BccResult evaluate_bcc(const std::array<Mesh, kClothCount>& recon_cloths,
                       const ObservationSet& obs, const TPoseBody& tpose,
                       double threshold = 0.03);

std::string metric_report_json(const MetricReport& report);

}  // namespace clothfit
