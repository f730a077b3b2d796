#include "clothfit/evaluation.hpp"

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace clothfit {

void SimilarityTransform::validate() const {
  if (!(scale > 0.0) || !std::isfinite(scale))
    throw std::invalid_argument("similarity scale must be positive");
  if ((rotation * rotation.transpose() - Eigen::Matrix3d::Identity())
          .cwiseAbs()
          .maxCoeff() > 1e-6 ||
      rotation.determinant() < 0.0)
    throw std::invalid_argument("similarity rotation must be proper orthonormal");
  if (!translation.allFinite())
    throw std::invalid_argument("non-finite similarity translation");
}

Mesh build_gt_surface(const TPoseBody& tpose, const Mesh& registered,
                      const PoseParams& theta) {
  if (registered.vertices.size() != tpose.vertices.size())
    throw std::invalid_argument("registered mesh must share body topology");
  Mesh out = registered;
  out.vertices = skin_vertices(tpose, theta, registered.vertices);
  return out;
}

std::vector<std::pair<Vec3, Vec3>> match_vertex_pairs(const Mesh& recon,
                                                      const Mesh& gt,
                                                      const Camera& camera) {
  if (recon.empty() || gt.empty())
    throw std::invalid_argument("match_vertex_pairs needs non-empty meshes");
  FaceIndexMap ra = rasterize(recon, camera);
  FaceIndexMap rb = rasterize(gt, camera);

  auto centroid = [](const Mesh& m, int face) {
    const Tri& f = m.faces[face];
    return Vec3((m.vertices[f[0]] + m.vertices[f[1]] + m.vertices[f[2]]) / 3.0);
  };

  std::vector<std::pair<Vec3, Vec3>> pairs;
  for (int y = 0; y < camera.height; ++y)
    for (int x = 0; x < camera.width; ++x)
      if (ra.covered(x, y) && rb.covered(x, y))
        pairs.emplace_back(centroid(recon, ra.face[ra.idx(x, y)]),
                           centroid(gt, rb.face[rb.idx(x, y)]));
  return pairs;
}

SimilarityTransform estimate_similarity(
    const std::vector<std::pair<Vec3, Vec3>>& pairs) {
  if (pairs.size() < 3)
    throw std::invalid_argument("need at least 3 pairs for similarity fit");
  Eigen::Matrix3Xd src(3, pairs.size()), dst(3, pairs.size());
  for (size_t i = 0; i < pairs.size(); ++i) {
    src.col(i) = pairs[i].first;
    dst.col(i) = pairs[i].second;
  }
  Vec3 mean = src.rowwise().mean();
  Eigen::Matrix3Xd centered = src.colwise() - mean;
  Eigen::JacobiSVD<Eigen::Matrix3Xd> svd(centered);
  if (svd.singularValues()(1) < 1e-9)
    throw std::invalid_argument("degenerate (collinear) pair configuration");

  Eigen::Matrix4d T = Eigen::umeyama(src, dst, true);
  Eigen::Matrix3d linear = T.topLeftCorner<3, 3>();
  SimilarityTransform out;
  out.scale = std::cbrt(linear.determinant());
  out.rotation = linear / out.scale;
  out.translation = T.topRightCorner<3, 1>();
  out.validate();
  return out;
}

double chamfer_distance(const Mesh& a, const Mesh& b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("chamfer_distance needs non-empty meshes");
  MeshDistanceQuery qa(a), qb(b);
  double sum_ab = 0.0;
  for (const Vec3& v : a.vertices) sum_ab += qb.distance(v);
  double sum_ba = 0.0;
  for (const Vec3& v : b.vertices) sum_ba += qa.distance(v);
  double mean = 0.5 * (sum_ab / a.vertices.size() + sum_ba / b.vertices.size());
  return mean * 1000.0;
}

CdResult evaluate_cd(const Mesh& recon, const Mesh& gt, const Camera& camera) {
  // The centroid pairing is only approximate while the silhouettes are
  // offset, so the alignment is refined: once the meshes roughly coincide
  // the per-pixel face indices match and the pairs become exact
  // correspondences. Re-matching near the optimum introduces small biased
  // steps, so each iterate is scored and the best one kept.
  CdResult res;
  CdResult best;
  best.cd_mm = std::numeric_limits<double>::infinity();
  Mesh aligned = recon;
  for (int iter = 0; iter < 20; ++iter) {
    auto pairs = match_vertex_pairs(aligned, gt, camera);
    res.matched_pairs = static_cast<int>(pairs.size());
    SimilarityTransform step = estimate_similarity(pairs);
    for (Vec3& v : aligned.vertices) v = step.apply(v);
    res.alignment.scale *= step.scale;
    res.alignment.rotation = step.rotation * res.alignment.rotation;
    res.alignment.translation =
        step.scale * (step.rotation * res.alignment.translation) +
        step.translation;
    res.cd_mm = chamfer_distance(aligned, gt);
    if (res.cd_mm < best.cd_mm) best = res;
    const double drift = std::abs(step.scale - 1.0) +
                         (step.rotation - Eigen::Matrix3d::Identity()).norm() +
                         step.translation.norm();
    if (drift < 1e-12) break;
  }
  return best;
}

namespace {

// Class of a segmentation label under the metric protocol; shoes and
// background drop out.
std::optional<BccClass> bcc_class_of(std::uint8_t label) {
  switch (label) {
    case kLabelUpper:
    case kLabelCoat:
      return BccClass::UpperBody;
    case kLabelPants:
    case kLabelSkirt:
      return BccClass::LowerBody;
    case kLabelNonClothBody:
      return BccClass::NonCloth;
    default:
      return std::nullopt;
  }
}

}  // namespace

BccResult evaluate_bcc(const std::array<Mesh, kClothCount>& recon_cloths,
                       const ObservationSet& obs, const TPoseBody& tpose,
                       double threshold) {
  // All eligible pixels, deterministically (sample size >= pixel count).
  auto points = cloth_to_body_map(
      obs, tpose, obs.segmentation.width * obs.segmentation.height, 0);

  std::vector<MeshDistanceQuery> queries(kClothCount);
  std::array<bool, kClothCount> have{};
  for (int c = 0; c < kClothCount; ++c) {
    if (static_cast<ClothType>(c) == ClothType::Shoes) continue;
    if (recon_cloths[c].empty()) continue;
    queries[c] = MeshDistanceQuery(recon_cloths[c]);
    have[c] = true;
  }

  auto within = [&](int c, const Vec3& p) {
    return have[c] && queries[c].distance(p) < threshold;
  };

  std::array<int, 3> correct{}, total{};
  for (const MappedClothPoint& pt : points) {
    auto cls = bcc_class_of(pt.label);
    if (!cls) continue;
    int k = static_cast<int>(*cls);
    ++total[k];
    bool ok = false;
    switch (*cls) {
      case BccClass::UpperBody:
        ok = within(static_cast<int>(ClothType::UpperCloth), pt.position) ||
             within(static_cast<int>(ClothType::Coat), pt.position);
        break;
      case BccClass::LowerBody:
        ok = within(static_cast<int>(ClothType::Pants), pt.position) ||
             within(static_cast<int>(ClothType::Skirt), pt.position);
        break;
      case BccClass::NonCloth: {
        bool near_any = false;
        for (int c = 0; c < kClothCount; ++c)
          near_any = near_any || within(c, pt.position);
        ok = !near_any;
        break;
      }
    }
    if (ok) ++correct[k];
  }

  BccResult res;
  double sum = 0.0;
  int present = 0;
  for (int k = 0; k < 3; ++k) {
    if (total[k] == 0) continue;
    res.per_class[k] = double(correct[k]) / total[k];
    sum += *res.per_class[k];
    ++present;
  }
  res.average = present ? sum / present : 0.0;
  return res;
}

std::string metric_report_json(const MetricReport& report) {
  nlohmann::json j;
  j["format"] = "clothfit-report-1";
  j["cd_mm"] = report.cd_mm;
  const char* names[3] = {"upper_body", "lower_body", "non_cloth"};
  for (int k = 0; k < 3; ++k) {
    if (report.bcc[k])
      j["bcc"][names[k]] = *report.bcc[k];
    else
      j["bcc"][names[k]] = nullptr;
  }
  j["bcc"]["average"] = report.bcc_average;
  j["matched_pairs"] = report.matched_pairs;
  j["alignment"]["scale"] = report.alignment.scale;
  std::vector<double> rot(report.alignment.rotation.data(),
                          report.alignment.rotation.data() + 9);
  j["alignment"]["rotation_col_major"] = rot;
  j["alignment"]["translation"] = {report.alignment.translation.x(),
                                   report.alignment.translation.y(),
                                   report.alignment.translation.z()};
  return j.dump(2);
}

}  // namespace clothfit
