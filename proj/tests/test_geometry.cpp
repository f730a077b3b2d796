#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "clothfit/geometry.hpp"

using namespace clothfit;

namespace {

Mesh unit_quad() {
  Mesh m;
  m.vertices = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  return m;
}

Mesh random_soup(std::mt19937_64& rng, int n_tris) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mesh m;
  for (int i = 0; i < 3 * n_tris; ++i)
    m.vertices.push_back(Vec3(u(rng), u(rng), u(rng)));
  for (int i = 0; i < n_tris; ++i)
    m.faces.push_back({std::uint32_t(3 * i), std::uint32_t(3 * i + 1),
                       std::uint32_t(3 * i + 2)});
  return m;
}

}  // namespace

TEST_CASE("point_triangle_dist handles the closest-feature regions") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  CHECK(point_triangle_dist(Vec3(0.25, 0.25, 0.5), a, b, c) == doctest::Approx(0.5));
  CHECK(point_triangle_dist(Vec3(-1, 0, 0), a, b, c) == doctest::Approx(1.0));
  CHECK(point_triangle_dist(Vec3(0.5, -2, 0), a, b, c) == doctest::Approx(2.0));
  CHECK(point_triangle_dist(Vec3(1, 1, 0), a, b, c) ==
        doctest::Approx(std::sqrt(0.5)));
  CHECK(point_triangle_dist(a, a, b, c) == doctest::Approx(0.0));
}

TEST_CASE("MeshDistanceQuery matches brute force on random soups") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int rep = 0; rep < 10; ++rep) {
    Mesh m = random_soup(rng, 40);
    MeshDistanceQuery q(m);
    for (int k = 0; k < 50; ++k) {
      Vec3 p(u(rng), u(rng), u(rng));
      double best = std::numeric_limits<double>::infinity();
      for (const Tri& f : m.faces)
        best = std::min(best, point_triangle_dist(p, m.vertices[f[0]],
                                                  m.vertices[f[1]],
                                                  m.vertices[f[2]]));
      CHECK(q.distance(p) == doctest::Approx(best).epsilon(1e-12));
    }
  }
}

TEST_CASE("Aabb distance is zero inside, exact outside") {
  Aabb box;
  box.lo = Vec3(0, 0, 0);
  box.hi = Vec3(1, 1, 1);
  CHECK(box.sq_dist(Vec3(0.5, 0.5, 0.5)) == 0.0);
  CHECK(box.sq_dist(Vec3(2, 0.5, 0.5)) == doctest::Approx(1.0));
  CHECK(box.sq_dist(Vec3(2, 2, 0.5)) == doctest::Approx(2.0));
}

TEST_CASE("mesh validate rejects bad indices and NaN") {
  Mesh m = unit_quad();
  CHECK_NOTHROW(m.validate());
  m.faces.push_back({0, 1, 9});
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
  m = unit_quad();
  m.vertices[0].x() = std::nan("");
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("obj round trip preserves vertices, faces and attachments") {
  Mesh m = unit_quad();
  m.attachment = {4, 5, 6, 7};
  const std::string path = "roundtrip_quad.obj";
  save_obj(m, path);
  Mesh back = load_obj(path);
  REQUIRE(back.vertices.size() == m.vertices.size());
  REQUIRE(back.faces.size() == m.faces.size());
  REQUIRE(back.attachment == m.attachment);
  for (size_t i = 0; i < m.vertices.size(); ++i)
    CHECK((back.vertices[i] - m.vertices[i]).norm() < 1e-12);
  std::remove(path.c_str());
}

TEST_CASE("vertex normals of a flat quad point along +z") {
  Mesh m = unit_quad();
  auto n = vertex_normals(m);
  REQUIRE(n.size() == 4);
  for (const Vec3& v : n) CHECK((v - Vec3(0, 0, 1)).norm() < 1e-12);
}
