#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "clothfit/geometry.hpp"

namespace clothfit {

// Orthographic camera looking along -z (z toward camera). A world point
// (x, y, z) lands at pixel center coordinates
//   px = cx + x / scale,  py = cy - y / scale
// with depth -z (smaller = nearer).
struct Camera {
  int width = 256;
  int height = 256;
  double scale = 0.008;  // world units per pixel
  double cx = 128.0;     // principal point (pixels)
  double cy = 248.0;

  void validate() const;
  // Continuous pixel coordinates of a world point.
  void project(const Vec3& p, double& px, double& py) const {
    px = cx + p.x() / scale;
    py = cy - p.y() / scale;
  }
};

// Per-pixel face index (-1 empty), barycentric triple and depth.
struct FaceIndexMap {
  int width = 0;
  int height = 0;
  std::vector<std::int32_t> face;       // row-major
  std::vector<std::array<float, 3>> bary;
  std::vector<float> depth;

  size_t idx(int x, int y) const { return static_cast<size_t>(y) * width + x; }
  bool covered(int x, int y) const { return face[idx(x, y)] >= 0; }
  void validate() const;
};

// Deterministic z-buffered rasterization: pixel-center sampling, no
// anti-aliasing, depth ties broken by lower face index, degenerate
// triangles skipped.
FaceIndexMap rasterize(const Mesh& mesh, const Camera& camera);

// "DPM1" little-endian binary format.
void save_face_index_map(const FaceIndexMap& map, const std::string& path);
FaceIndexMap load_face_index_map(const std::string& path);

}  // namespace clothfit
