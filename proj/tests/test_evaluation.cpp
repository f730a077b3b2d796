#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "clothfit/evaluation.hpp"
#include "clothfit/meshing.hpp"

using namespace clothfit;

namespace {

struct Fixture {
  BodyModel model;
  TPoseBody body;
  Fixture()
      : model(make_procedural_body(ProceduralBodySpec{}, "male")),
        body(shape_body(model, ShapeParams{})) {}
};

Camera body_camera() {
  Camera cam;
  cam.width = 128;
  cam.height = 128;
  cam.scale = 0.018;
  cam.cx = 64.0;
  cam.cy = 124.0;
  return cam;
}

// n x n vertex grid over a unit square in the xy plane.
Mesh flat_quad(int n, double z = 0.0) {
  Mesh m;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      m.vertices.push_back(
          Vec3(double(j) / (n - 1), double(i) / (n - 1), z));
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      std::uint32_t a = i * n + j, b = a + 1, c = a + n, d = c + 1;
      m.faces.push_back({a, b, d});
      m.faces.push_back({a, d, c});
    }
  return m;
}

SimilarityTransform random_similarity(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> us(0.5, 2.0), u(-1.0, 1.0);
  SimilarityTransform t;
  t.scale = us(rng);
  Vec3 axis(u(rng), u(rng), u(rng));
  while (axis.norm() < 1e-6) axis = Vec3(u(rng), u(rng), u(rng));
  t.rotation =
      Eigen::AngleAxisd(u(rng) * M_PI, axis.normalized()).toRotationMatrix();
  t.translation = Vec3(u(rng), u(rng), u(rng));
  return t;
}

}  // namespace

TEST_CASE("chamfer distance of a mesh with itself is zero") {
  Mesh quad = flat_quad(5);
  CHECK(chamfer_distance(quad, quad) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("parallel planes 5 mm apart measure 5 mm") {
  Mesh a = flat_quad(9, 0.0);
  Mesh b = flat_quad(9, 0.005);
  CHECK(chamfer_distance(a, b) == doctest::Approx(5.0).epsilon(1e-6));
}

TEST_CASE("chamfer distance equals the all-triangles brute-force oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto soup = [&](int tris) {
    Mesh m;
    for (int i = 0; i < 3 * tris; ++i)
      m.vertices.push_back(Vec3(u(rng), u(rng), u(rng)));
    for (int i = 0; i < tris; ++i)
      m.faces.push_back({std::uint32_t(3 * i), std::uint32_t(3 * i + 1),
                         std::uint32_t(3 * i + 2)});
    return m;
  };
  auto one_sided = [](const Mesh& from, const Mesh& to) {
    double sum = 0;
    for (const Vec3& v : from.vertices) {
      double best = std::numeric_limits<double>::infinity();
      for (const Tri& f : to.faces)
        best = std::min(best, point_triangle_dist(v, to.vertices[f[0]],
                                                  to.vertices[f[1]],
                                                  to.vertices[f[2]]));
      sum += best;
    }
    return sum / from.vertices.size();
  };
  for (int rep = 0; rep < 5; ++rep) {
    Mesh a = soup(33), b = soup(34);  // ~100 vertices each
    double oracle = 500.0 * (one_sided(a, b) + one_sided(b, a));
    CHECK(std::abs(chamfer_distance(a, b) - oracle) < 1e-9);
  }
}

TEST_CASE("estimate_similarity recovers random ground-truth transforms") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 50; ++rep) {
    SimilarityTransform truth = random_similarity(rng);
    std::vector<std::pair<Vec3, Vec3>> pairs;
    for (int i = 0; i < 12; ++i) {
      Vec3 p(u(rng), u(rng), u(rng));
      pairs.push_back({p, truth.apply(p)});
    }
    SimilarityTransform est = estimate_similarity(pairs);
    CHECK(std::abs(est.scale - truth.scale) < 1e-9);
    CHECK((est.rotation - truth.rotation).norm() < 1e-9);
    CHECK((est.translation - truth.translation).norm() < 1e-9);
  }
}

TEST_CASE("identity and pure-translation correspondences") {
  std::vector<std::pair<Vec3, Vec3>> pairs;
  for (int i = 0; i < 6; ++i) {
    Vec3 p(0.1 * i, 0.03 * i * i, 1.0 - 0.2 * i);
    pairs.push_back({p, p});
  }
  SimilarityTransform id = estimate_similarity(pairs);
  CHECK(std::abs(id.scale - 1.0) < 1e-9);
  CHECK((id.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK(id.translation.norm() < 1e-9);

  const Vec3 shift(0.4, -0.2, 0.7);
  for (auto& [a, b] : pairs) b = a + shift;
  SimilarityTransform tr = estimate_similarity(pairs);
  CHECK(std::abs(tr.scale - 1.0) < 1e-9);
  CHECK((tr.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
  CHECK((tr.translation - shift).norm() < 1e-9);
}

TEST_CASE("degenerate correspondences throw") {
  std::vector<std::pair<Vec3, Vec3>> two = {{Vec3(0, 0, 0), Vec3(0, 0, 0)},
                                            {Vec3(1, 0, 0), Vec3(1, 0, 0)}};
  CHECK_THROWS(estimate_similarity(two));
  std::vector<std::pair<Vec3, Vec3>> collinear;
  for (int i = 0; i < 5; ++i)
    collinear.push_back({Vec3(i, 0, 0), Vec3(i, 0, 0)});
  CHECK_THROWS(estimate_similarity(collinear));
}

TEST_CASE("match_vertex_pairs: identical meshes pair with zero separation") {
  Fixture f;
  Mesh body = f.body.surface_mesh();
  auto pairs = match_vertex_pairs(body, body, body_camera());
  REQUIRE_FALSE(pairs.empty());
  for (const auto& [a, b] : pairs) CHECK((a - b).norm() < 1e-12);
}

TEST_CASE("depth translation offsets every pair uniformly") {
  // A pure depth shift leaves the projection unchanged, so the same faces
  // pair at every pixel and each pair differs by exactly the shift.
  Camera cam = body_camera();
  Mesh gt = flat_quad(21);
  Mesh recon = gt;
  const Vec3 offset(0, 0, 0.3);
  for (Vec3& v : recon.vertices) v += offset;
  auto pairs = match_vertex_pairs(recon, gt, cam);
  REQUIRE_FALSE(pairs.empty());
  for (const auto& [a, b] : pairs)
    CHECK((a - b - offset).norm() < 1e-9);
}

TEST_CASE("disjoint silhouettes produce no pairs") {
  Camera cam = body_camera();
  Mesh a = flat_quad(5);
  Mesh b = flat_quad(5);
  for (Vec3& v : b.vertices) v += Vec3(5.0, 0, 0);  // far off to the side
  CHECK(match_vertex_pairs(a, b, cam).empty());
}

TEST_CASE("evaluate_cd recovers an exact similarity alignment") {
  // A pure depth translation leaves the projected silhouette unchanged, so
  // the per-pixel vertex pairing is an exact correspondence and alignment
  // removes the transform completely.
  Fixture f;
  Mesh gt = f.body.surface_mesh();
  SimilarityTransform truth;
  truth.translation = Vec3(0, 0, 0.3);
  Mesh recon = gt;
  for (Vec3& v : recon.vertices) v = truth.apply(v);
  CdResult res = evaluate_cd(recon, gt, body_camera());
  CHECK(res.cd_mm <= 1e-6);

  CdResult self = evaluate_cd(gt, gt, body_camera());
  CHECK(self.cd_mm <= 1e-9);
  CHECK(std::abs(self.alignment.scale - 1.0) < 1e-9);
  CHECK((self.alignment.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-9);
}

TEST_CASE("build_gt_surface with identity pose returns the input") {
  Fixture f;
  Mesh registered = f.body.surface_mesh();
  for (Vec3& v : registered.vertices) v += Vec3(0.001, 0.002, -0.001);
  Mesh out = build_gt_surface(f.body, registered, PoseParams{});
  REQUIRE(out.vertices.size() == registered.vertices.size());
  CHECK(out.faces.size() == registered.faces.size());
  for (size_t i = 0; i < out.vertices.size(); ++i)
    CHECK((out.vertices[i] - registered.vertices[i]).norm() < 1e-9);
  for (const Vec3& v : out.vertices) CHECK(v.allFinite());
}

TEST_CASE("build_gt_surface of the body template matches pose_body") {
  Fixture f;
  PoseParams theta;
  theta.set_axis_angle(f.model.joint_index("L_shoulder"), Vec3(0, 0, -0.4));
  Mesh via_gt = build_gt_surface(f.body, f.body.surface_mesh(), theta);
  Mesh via_pose = pose_body(f.body, theta);
  REQUIRE(via_gt.vertices.size() == via_pose.vertices.size());
  for (size_t i = 0; i < via_gt.vertices.size(); ++i)
    CHECK((via_gt.vertices[i] - via_pose.vertices[i]).norm() < 1e-9);
}

TEST_CASE("bcc: exact reconstruction scores 1.0 per class, empty scores the rule") {
  Fixture f;
  ProceduralBackend backend(f.body);
  ClothState state = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) state.existence[c] = 0.0;
  state.existence[int(ClothType::UpperCloth)] = 1.0;
  state.existence[int(ClothType::Pants)] = 1.0;
  auto meshes = extract_cloth_meshes(state, backend, f.body, 48, 0.01);

  // Observation: body raster, labels painted from the cloth meshes.
  Camera cam = body_camera();
  ObservationSet obs;
  obs.camera = cam;
  obs.densepose = rasterize(f.body.surface_mesh(), cam);
  obs.segmentation.width = cam.width;
  obs.segmentation.height = cam.height;
  obs.segmentation.labels.assign(size_t(cam.width) * cam.height,
                                 kLabelBackground);
  MeshDistanceQuery upper_q(meshes[int(ClothType::UpperCloth)]);
  MeshDistanceQuery pants_q(meshes[int(ClothType::Pants)]);
  const Tri* faces = f.model.faces.data();
  for (int i = 0; i < cam.width * cam.height; ++i) {
    if (obs.densepose.face[i] < 0) continue;
    const Tri& t = faces[obs.densepose.face[i]];
    auto b = obs.densepose.bary[i];
    Vec3 p = double(b[0]) * f.body.vertices[t[0]] +
             double(b[1]) * f.body.vertices[t[1]] +
             double(b[2]) * f.body.vertices[t[2]];
    // Paint with the exact accuracy threshold so no non-cloth label ends up
    // inside the near-cloth band.
    if (upper_q.distance(p) < 0.03)
      obs.segmentation.labels[i] = kLabelUpper;
    else if (pants_q.distance(p) < 0.03)
      obs.segmentation.labels[i] = kLabelPants;
    else
      obs.segmentation.labels[i] = kLabelNonClothBody;
  }

  BccResult exact = evaluate_bcc(meshes, obs, f.body);
  for (int k = 0; k < 3; ++k) {
    REQUIRE(exact.per_class[k].has_value());
    CHECK(*exact.per_class[k] == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK(exact.average == doctest::Approx(1.0).epsilon(1e-12));

  std::array<Mesh, kClothCount> none{};
  BccResult empty = evaluate_bcc(none, obs, f.body);
  CHECK(*empty.per_class[int(BccClass::UpperBody)] == 0.0);
  CHECK(*empty.per_class[int(BccClass::LowerBody)] == 0.0);
  CHECK(*empty.per_class[int(BccClass::NonCloth)] == 1.0);
}
