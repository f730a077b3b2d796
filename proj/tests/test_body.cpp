#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "clothfit/body.hpp"

using namespace clothfit;

namespace {

TPoseBody make_default_body(BodyModel& storage) {
  storage = make_procedural_body(ProceduralBodySpec{}, "male");
  return shape_body(storage, ShapeParams{});
}

}  // namespace

TEST_CASE("skin weights are a partition of unity") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  for (int i = 0; i < model.skin_weights.rows(); ++i) {
    CHECK(model.skin_weights.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(model.skin_weights.row(i).minCoeff() >= 0.0);
  }
  (void)body;
}

TEST_CASE("joints mirror left/right about the pelvis") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  const double px = body.joint("pelvis").x();
  CHECK(body.joint("L_ankle").x() - px ==
        doctest::Approx(-(body.joint("R_ankle").x() - px)).epsilon(1e-12));
  CHECK(body.joint("L_hand").x() - px ==
        doctest::Approx(-(body.joint("R_hand").x() - px)).epsilon(1e-12));
}

TEST_CASE("joint regressor reproduces stored joints") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  for (int j = 0; j < kJointCount; ++j) {
    Vec3 regressed = Vec3::Zero();
    for (int v = 0; v < int(body.vertices.size()); ++v)
      regressed += model.joint_regressor(j, v) * body.vertices[v];
    CHECK((regressed - body.joints[j]).norm() < 1e-9);
  }
}

TEST_CASE("zero shape equals the template, basis directions are linear") {
  BodyModel model;
  TPoseBody zero = make_default_body(model);
  for (size_t v = 0; v < zero.vertices.size(); ++v)
    CHECK((zero.vertices[v] - model.template_vertices[v]).norm() == 0.0);

  ShapeParams b1;
  b1.beta[0] = 1.0;
  TPoseBody one = shape_body(model, b1);
  for (size_t v = 0; v < one.vertices.size(); ++v)
    CHECK((one.vertices[v] -
           (model.template_vertices[v] + model.shape_basis[0][v]))
              .norm() < 1e-12);

  ShapeParams b2;
  b2.beta[0] = 2.0;
  TPoseBody two = shape_body(model, b2);
  for (size_t v = 0; v < two.vertices.size(); ++v) {
    Vec3 diff = (two.vertices[v] - one.vertices[v]) -
                (one.vertices[v] - zero.vertices[v]);
    CHECK(diff.norm() < 1e-12);
  }
}

TEST_CASE("identity pose returns the T-pose vertices") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  Mesh posed = pose_body(body, PoseParams{});
  REQUIRE(posed.vertices.size() == body.vertices.size());
  for (size_t v = 0; v < body.vertices.size(); ++v)
    CHECK((posed.vertices[v] - body.vertices[v]).norm() < 1e-9);
}

TEST_CASE("global root rotation is a rigid motion about the pelvis") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  PoseParams theta;
  const Vec3 aa(0.3, -0.5, 0.2);
  theta.set_axis_angle(model.joint_index("pelvis"), aa);
  Mesh posed = pose_body(body, theta);
  Eigen::Matrix3d R =
      Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
  const Vec3 pelvis = body.joint("pelvis");
  for (size_t v = 0; v < body.vertices.size(); ++v) {
    Vec3 expect = R * (body.vertices[v] - pelvis) + pelvis;
    CHECK((posed.vertices[v] - expect).norm() < 1e-9);
  }
}

TEST_CASE("a forearm-bound vertex follows a pure elbow rotation") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  const int elbow = model.joint_index("L_elbow");

  // Find a vertex skinned (almost) rigidly to a single elbow descendant.
  int chosen = -1;
  for (int v = 0; v < int(body.vertices.size()); ++v) {
    if (model.skin_weights(v, elbow) > 1.0 - 1e-12) {
      chosen = v;
      break;
    }
  }
  if (chosen < 0) {
    for (int v = 0; v < int(body.vertices.size()); ++v)
      if (model.skin_weights(v, model.joint_index("L_hand")) > 1.0 - 1e-12) {
        chosen = v;
        break;
      }
  }
  REQUIRE(chosen >= 0);

  PoseParams theta;
  const Vec3 aa(0, 0, M_PI / 2);
  theta.set_axis_angle(elbow, aa);
  Mesh posed = pose_body(body, theta);
  Eigen::Matrix3d R =
      Eigen::AngleAxisd(aa.norm(), aa.normalized()).toRotationMatrix();
  const Vec3 j = body.joints[elbow];
  Vec3 expect = R * (body.vertices[chosen] - j) + j;
  CHECK((posed.vertices[chosen] - expect).norm() < 1e-9);
}

TEST_CASE("pose_joints with identity equals stored joints") {
  BodyModel model;
  TPoseBody body = make_default_body(model);
  auto joints = pose_joints(body, PoseParams{});
  for (int j = 0; j < kJointCount; ++j)
    CHECK((joints[j] - body.joints[j]).norm() < 1e-9);
}

TEST_CASE("body save/load round trip is exact") {
  BodyModel model;
  make_default_body(model);
  const std::string dir = "body_roundtrip_tmp";
  std::filesystem::create_directories(dir);
  save_body(model, dir);
  BodyModel back = load_body(dir);
  REQUIRE(back.template_vertices.size() == model.template_vertices.size());
  REQUIRE(back.faces == model.faces);
  REQUIRE(back.joint_names == model.joint_names);
  REQUIRE(back.joint_parents == model.joint_parents);
  CHECK((back.joint_regressor - model.joint_regressor).norm() == 0.0);
  CHECK((back.skin_weights - model.skin_weights).norm() == 0.0);
  for (size_t v = 0; v < model.template_vertices.size(); ++v)
    CHECK((back.template_vertices[v] - model.template_vertices[v]).norm() == 0.0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("shape params validate rejects out-of-range coefficients") {
  ShapeParams beta;
  beta.beta[3] = 6.0;
  CHECK_THROWS_AS(beta.validate(), std::invalid_argument);
  PoseParams theta;
  theta.set_axis_angle(0, Vec3(4.0, 0, 0));
  CHECK_THROWS_AS(theta.validate(), std::invalid_argument);
}
