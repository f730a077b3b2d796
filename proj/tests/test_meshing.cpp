#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>

#include "clothfit/meshing.hpp"
#include "clothfit/synth.hpp"

using namespace clothfit;

namespace {

struct Fixture {
  BodyModel model;
  TPoseBody body;
  ProceduralBackend backend;
  Fixture()
      : model(make_procedural_body(ProceduralBodySpec{}, "male")),
        body(shape_body(model, ShapeParams{})),
        backend(body) {}
};

// |dist(x, center)| - r: analytic sphere shell UDF.
struct SphereField : DistanceField {
  Vec3 center{0, 0, 0};
  double r = 0.3;
  double eval(const Vec3& x) const override {
    return std::abs((x - center).norm() - r);
  }
};

QueryBox cube_box(const Vec3& lo, const Vec3& hi) {
  QueryBox box;
  box.lo = lo;
  box.hi = hi;
  return box;
}

}  // namespace

TEST_CASE("2^3 sampling equals pointwise field evaluation") {
  SphereField field;
  QueryBox box = cube_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  ScalarGrid grid = sample_field(field, box, 2);
  REQUIRE(grid.samples.size() == 8);
  for (int iz = 0; iz < 2; ++iz)
    for (int iy = 0; iy < 2; ++iy)
      for (int ix = 0; ix < 2; ++ix)
        CHECK(grid.at(ix, iy, iz) ==
              doctest::Approx(field.eval(grid.node(ix, iy, iz))).epsilon(1e-15));
}

TEST_CASE("sphere center samples the radius") {
  SphereField field;
  QueryBox box = cube_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  ScalarGrid grid = sample_field(field, box, 3);  // odd: center is a node
  CHECK(grid.at(1, 1, 1) == doctest::Approx(field.r).epsilon(1e-15));
}

TEST_CASE("downsampled grid agrees with direct coarse sampling at shared nodes") {
  SphereField field;
  QueryBox box = cube_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  ScalarGrid fine = sample_field(field, box, 9);
  ScalarGrid coarse = sample_field(field, box, 5);
  for (int iz = 0; iz < 5; ++iz)
    for (int iy = 0; iy < 5; ++iy)
      for (int ix = 0; ix < 5; ++ix)
        CHECK(coarse.at(ix, iy, iz) ==
              doctest::Approx(fine.at(2 * ix, 2 * iy, 2 * iz)).epsilon(1e-15));
}

TEST_CASE("all samples above iso yield an empty mesh") {
  ScalarGrid grid;
  grid.nx = grid.ny = grid.nz = 4;
  grid.cell = Vec3(0.1, 0.1, 0.1);
  grid.samples.assign(64, 5.0);
  CHECK(marching_cubes(grid, 0.01).empty());
}

TEST_CASE("sphere shell extraction places vertices on the two shells") {
  SphereField field;
  field.r = 0.3;
  const double iso = 0.02;
  QueryBox box = cube_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  const int res = 64;
  ScalarGrid grid = sample_field(field, box, res);
  Mesh mesh = marching_cubes(grid, iso);
  REQUIRE_FALSE(mesh.empty());
  mesh.validate();
  const double cell = 1.0 / (res - 1);
  int inner = 0, outer = 0;
  for (const Vec3& v : mesh.vertices) {
    const double r = v.norm();
    const bool on_inner = std::abs(r - (field.r - iso)) <= cell;
    const bool on_outer = std::abs(r - (field.r + iso)) <= cell;
    CHECK((on_inner || on_outer));
    inner += on_inner;
    outer += on_outer;
  }
  CHECK(inner > 0);
  CHECK(outer > 0);
}

TEST_CASE("translating the grid origin translates the output exactly") {
  SphereField field;
  QueryBox box = cube_box(Vec3(-0.5, -0.5, -0.5), Vec3(0.5, 0.5, 0.5));
  ScalarGrid grid = sample_field(field, box, 16);
  Mesh base = marching_cubes(grid, 0.02);
  const Vec3 shift(1.5, -2.0, 0.25);
  grid.origin += shift;
  Mesh moved = marching_cubes(grid, 0.02);
  REQUIRE(moved.vertices.size() == base.vertices.size());
  REQUIRE(moved.faces == base.faces);
  for (size_t i = 0; i < base.vertices.size(); ++i)
    CHECK((moved.vertices[i] - (base.vertices[i] + shift)).norm() < 1e-12);
}

TEST_CASE("extraction is gated on existence") {
  Fixture f;
  ClothState none = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) none.existence[c] = 0.0;
  auto meshes = extract_cloth_meshes(none, f.backend, f.body, 24, 0.01);
  for (const Mesh& m : meshes) CHECK(m.empty());
}

TEST_CASE("mean-latent upper cloth extracts near its level set") {
  Fixture f;
  ClothState state = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) state.existence[c] = 0.0;
  state.existence[int(ClothType::UpperCloth)] = 1.0;
  const int res = 48;
  const double iso = 0.01;
  auto meshes = extract_cloth_meshes(state, f.backend, f.body, res, iso);
  const Mesh& upper = meshes[int(ClothType::UpperCloth)];
  REQUIRE_FALSE(upper.empty());
  LossWeights w;
  QueryBox region =
      extraction_region(f.body, ClothType::UpperCloth, std::nullopt, w);
  const double cell = (region.hi - region.lo).maxCoeff() / (res - 1);
  for (const Vec3& v : upper.vertices) {
    const double c = udf_eval(f.backend, v, state, ClothType::UpperCloth);
    CHECK(std::abs(c - iso) <= cell);  // Lipschitz bound within one cell
  }
}

TEST_CASE("gated clothes are extracted independently") {
  Fixture f;
  ClothState both = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) both.existence[c] = 0.0;
  both.existence[int(ClothType::UpperCloth)] = 1.0;
  both.existence[int(ClothType::Pants)] = 1.0;
  auto with_pants = extract_cloth_meshes(both, f.backend, f.body, 24, 0.01);

  ClothState solo = both;
  solo.existence[int(ClothType::Pants)] = 0.0;
  auto without = extract_cloth_meshes(solo, f.backend, f.body, 24, 0.01);
  REQUIRE_FALSE(with_pants[int(ClothType::UpperCloth)].empty());
  REQUIRE(with_pants[int(ClothType::UpperCloth)].vertices.size() ==
          without[int(ClothType::UpperCloth)].vertices.size());
  for (size_t i = 0; i < without[int(ClothType::UpperCloth)].vertices.size(); ++i)
    CHECK((with_pants[int(ClothType::UpperCloth)].vertices[i] -
           without[int(ClothType::UpperCloth)].vertices[i])
              .norm() == 0.0);
  CHECK(without[int(ClothType::Pants)].empty());
  CHECK_FALSE(with_pants[int(ClothType::Pants)].empty());
}

TEST_CASE("identity pose leaves body and cloth meshes unchanged") {
  Fixture f;
  ClothState state = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) state.existence[c] = 0.0;
  state.existence[int(ClothType::UpperCloth)] = 1.0;
  auto meshes = extract_cloth_meshes(state, f.backend, f.body, 24, 0.01);
  std::vector<Mesh> cloths = {meshes[int(ClothType::UpperCloth)]};
  PosedScene scene = pose_deform(f.body, cloths, PoseParams{});
  REQUIRE(scene.cloths.size() == 1);
  for (size_t i = 0; i < cloths[0].vertices.size(); ++i)
    CHECK((scene.cloths[0].vertices[i] - cloths[0].vertices[i]).norm() < 1e-9);
  for (size_t i = 0; i < f.body.vertices.size(); ++i)
    CHECK((scene.body.vertices[i] - f.body.vertices[i]).norm() < 1e-9);
}

TEST_CASE("a cloth vertex coincident with a body vertex moves with it") {
  Fixture f;
  Mesh cloth;
  const std::uint32_t target = 17;
  cloth.vertices = {f.body.vertices[target],
                    f.body.vertices[target] + Vec3(1e-4, 0, 0),
                    f.body.vertices[target] + Vec3(0, 1e-4, 0)};
  cloth.faces = {{0, 1, 2}};
  PoseParams theta;
  theta.set_axis_angle(f.model.joint_index("pelvis"), Vec3(0.2, 0.4, -0.1));
  theta.set_axis_angle(f.model.joint_index("L_shoulder"), Vec3(0, 0, 0.5));
  PosedScene scene = pose_deform(f.body, {cloth}, theta);
  Mesh posed_body = pose_body(f.body, theta);
  CHECK((scene.cloths[0].vertices[0] - posed_body.vertices[target]).norm() < 1e-9);
  CHECK(scene.cloths[0].attachment[0] == target);
}

TEST_CASE("global rotation rigidly rotates cloth meshes with the body") {
  Fixture f;
  ClothState state = ClothState::neutral();
  for (int c = 0; c < kClothCount; ++c) state.existence[c] = 0.0;
  state.existence[int(ClothType::Pants)] = 1.0;
  auto meshes = extract_cloth_meshes(state, f.backend, f.body, 24, 0.01);
  Mesh cloth = meshes[int(ClothType::Pants)];
  REQUIRE_FALSE(cloth.empty());

  PoseParams theta;
  const Vec3 aa(0.1, 0.7, -0.3);
  theta.set_axis_angle(f.model.joint_index("pelvis"), aa);
  PosedScene scene = pose_deform(f.body, {cloth}, theta);
  Eigen::Matrix3d R =
      Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
  const Vec3 pelvis = f.body.joint("pelvis");
  for (size_t i = 0; i < cloth.vertices.size(); ++i) {
    Vec3 expect = R * (cloth.vertices[i] - pelvis) + pelvis;
    CHECK((scene.cloths[0].vertices[i] - expect).norm() < 1e-9);
  }
}
