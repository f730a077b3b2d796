#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "clothfit/raster.hpp"

using namespace clothfit;

namespace {

Camera small_camera() {
  Camera cam;
  cam.width = 64;
  cam.height = 64;
  cam.scale = 0.01;
  cam.cx = 32.0;
  cam.cy = 32.0;
  return cam;
}

// Icosphere-free sphere: latitude/longitude grid.
Mesh uv_sphere(double r, int stacks, int slices) {
  Mesh m;
  for (int i = 0; i <= stacks; ++i) {
    double phi = M_PI * i / stacks;
    for (int j = 0; j < slices; ++j) {
      double theta = 2.0 * M_PI * j / slices;
      m.vertices.push_back(Vec3(r * std::sin(phi) * std::cos(theta),
                                r * std::cos(phi),
                                r * std::sin(phi) * std::sin(theta)));
    }
  }
  auto at = [&](int i, int j) {
    return std::uint32_t(i * slices + (j % slices));
  };
  for (int i = 0; i < stacks; ++i)
    for (int j = 0; j < slices; ++j) {
      m.faces.push_back({at(i, j), at(i + 1, j), at(i + 1, j + 1)});
      m.faces.push_back({at(i, j), at(i + 1, j + 1), at(i, j + 1)});
    }
  return m;
}

}  // namespace

TEST_CASE("screen-aligned triangle covers the center pixel with unit barycentrics") {
  Camera cam = small_camera();
  Mesh m;
  m.vertices = {{-0.1, -0.1, 0}, {0.1, -0.1, 0}, {0, 0.12, 0}};
  m.faces = {{0, 1, 2}};
  FaceIndexMap map = rasterize(m, cam);
  REQUIRE(map.covered(32, 32));
  CHECK(map.face[map.idx(32, 32)] == 0);
  auto b = map.bary[map.idx(32, 32)];
  CHECK(double(b[0]) + double(b[1]) + double(b[2]) == doctest::Approx(1.0).epsilon(1e-5));
  for (float w : b) CHECK(w >= 0.0f);
}

TEST_CASE("z-buffer keeps the nearer of two stacked triangles") {
  Camera cam = small_camera();
  Mesh m;
  // Same footprint; depth is -z, so face 1 at z=-1 is nearer than face 0.
  m.vertices = {{-0.1, -0.1, -2}, {0.1, -0.1, -2}, {0, 0.12, -2},
                {-0.1, -0.1, -1}, {0.1, -0.1, -1}, {0, 0.12, -1}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  FaceIndexMap map = rasterize(m, cam);
  int covered = 0;
  for (int y = 0; y < map.height; ++y)
    for (int x = 0; x < map.width; ++x)
      if (map.covered(x, y)) {
        ++covered;
        CHECK(map.face[map.idx(x, y)] == 1);
      }
  CHECK(covered > 0);
}

TEST_CASE("depth ties resolve to the lower face index") {
  Camera cam = small_camera();
  Mesh m;
  m.vertices = {{-0.1, -0.1, 0}, {0.1, -0.1, 0}, {0, 0.12, 0},
                {-0.1, -0.1, 0}, {0.1, -0.1, 0}, {0, 0.12, 0}};
  m.faces = {{0, 1, 2}, {3, 4, 5}};
  FaceIndexMap map = rasterize(m, cam);
  REQUIRE(map.covered(32, 32));
  CHECK(map.face[map.idx(32, 32)] == 0);
}

TEST_CASE("sphere silhouette area approximates the analytic disc") {
  Camera cam;
  cam.width = 256;
  cam.height = 256;
  cam.scale = 0.002;
  cam.cx = 128.0;
  cam.cy = 128.0;
  const double r = 0.2;
  Mesh sphere = uv_sphere(r, 48, 96);
  FaceIndexMap map = rasterize(sphere, cam);
  int covered = 0;
  for (int i = 0; i < map.width * map.height; ++i)
    if (map.face[i] >= 0) ++covered;
  const double expected = M_PI * (r / cam.scale) * (r / cam.scale);
  CHECK(std::abs(covered - expected) / expected < 0.03);
}

TEST_CASE("face index map save/load round trip") {
  Camera cam = small_camera();
  Mesh m;
  m.vertices = {{-0.1, -0.1, 0.3}, {0.1, -0.1, 0.3}, {0, 0.12, 0.3}};
  m.faces = {{0, 1, 2}};
  FaceIndexMap map = rasterize(m, cam);
  const std::string path = "raster_roundtrip.dpm";
  save_face_index_map(map, path);
  FaceIndexMap back = load_face_index_map(path);
  REQUIRE(back.width == map.width);
  REQUIRE(back.height == map.height);
  CHECK(back.face == map.face);
  CHECK(back.depth == map.depth);
  CHECK(back.bary == map.bary);
  std::remove(path.c_str());
}

TEST_CASE("degenerate triangles are skipped") {
  Camera cam = small_camera();
  Mesh m;
  m.vertices = {{-0.1, 0, 0}, {0.1, 0, 0}, {0.2, 0, 0}};  // collinear
  m.faces = {{0, 1, 2}};
  FaceIndexMap map = rasterize(m, cam);
  for (int i = 0; i < map.width * map.height; ++i) CHECK(map.face[i] == -1);
}
