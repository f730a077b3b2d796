#include "clothfit/raster.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace clothfit {

void Camera::validate() const {
  if (width <= 0 || height <= 0 || !(scale > 0))
    throw std::invalid_argument("camera: dims and scale must be positive");
}

void FaceIndexMap::validate() const {
  const size_t n = static_cast<size_t>(width) * height;
  if (face.size() != n || bary.size() != n || depth.size() != n)
    throw std::invalid_argument("face index map: buffer size mismatch");
  for (size_t i = 0; i < n; ++i) {
    if (face[i] < 0) continue;
    const auto& b = bary[i];
    if (b[0] < 0 || b[1] < 0 || b[2] < 0 ||
        std::abs(b[0] + b[1] + b[2] - 1.0f) > 1e-6f)
      throw std::invalid_argument("face index map: bad barycentrics");
    if (!std::isfinite(depth[i]))
      throw std::invalid_argument("face index map: non-finite depth");
  }
}

FaceIndexMap rasterize(const Mesh& mesh, const Camera& camera) {
  camera.validate();
  mesh.validate();
  if (mesh.empty()) throw std::invalid_argument("rasterize: empty mesh");

  FaceIndexMap map;
  map.width = camera.width;
  map.height = camera.height;
  const size_t n = static_cast<size_t>(map.width) * map.height;
  map.face.assign(n, -1);
  map.bary.assign(n, {0, 0, 0});
  map.depth.assign(n, std::numeric_limits<float>::infinity());
  std::vector<double> zbuf(n, std::numeric_limits<double>::infinity());

  for (std::int32_t f = 0; f < static_cast<std::int32_t>(mesh.faces.size());
       ++f) {
    const Tri& tri = mesh.faces[f];
    double px[3], py[3], pz[3];
    for (int k = 0; k < 3; ++k) {
      camera.project(mesh.vertices[tri[k]], px[k], py[k]);
      pz[k] = -mesh.vertices[tri[k]].z();  // depth, nearer = smaller
    }
    const double area = (px[1] - px[0]) * (py[2] - py[0]) -
                        (px[2] - px[0]) * (py[1] - py[0]);
    if (area == 0.0) continue;  // degenerate in screen space

    const int x0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({px[0], px[1], px[2]}) - 0.5)));
    const int x1 = std::min(map.width - 1,
                            static_cast<int>(std::ceil(
                                std::max({px[0], px[1], px[2]}) - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(
                                   std::min({py[0], py[1], py[2]}) - 0.5)));
    const int y1 = std::min(map.height - 1,
                            static_cast<int>(std::ceil(
                                std::max({py[0], py[1], py[2]}) - 0.5)));
    for (int y = y0; y <= y1; ++y) {
      const double sy = y + 0.5;
      for (int x = x0; x <= x1; ++x) {
        const double sx = x + 0.5;
        double w0 = (px[1] - sx) * (py[2] - sy) - (px[2] - sx) * (py[1] - sy);
        double w1 = (px[2] - sx) * (py[0] - sy) - (px[0] - sx) * (py[2] - sy);
        double w2 = (px[0] - sx) * (py[1] - sy) - (px[1] - sx) * (py[0] - sy);
        w0 /= area;
        w1 /= area;
        w2 /= area;
        if (w0 < 0 || w1 < 0 || w2 < 0) continue;
        const double d = w0 * pz[0] + w1 * pz[1] + w2 * pz[2];
        const size_t i = map.idx(x, y);
        if (d < zbuf[i]) {  // ties keep the earlier (lower) face index
          zbuf[i] = d;
          map.face[i] = f;
          map.bary[i] = {static_cast<float>(w0), static_cast<float>(w1),
                         static_cast<float>(w2)};
          map.depth[i] = static_cast<float>(d);
        }
      }
    }
  }
  return map;
}

void save_face_index_map(const FaceIndexMap& map, const std::string& path) {
  map.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out.write("DPM1", 4);
  const std::uint32_t w = map.width, h = map.height;
  out.write(reinterpret_cast<const char*>(&w), 4);
  out.write(reinterpret_cast<const char*>(&h), 4);
  const size_t n = static_cast<size_t>(map.width) * map.height;
  for (size_t i = 0; i < n; ++i) {
    out.write(reinterpret_cast<const char*>(&map.face[i]), 4);
    out.write(reinterpret_cast<const char*>(map.bary[i].data()), 12);
    out.write(reinterpret_cast<const char*>(&map.depth[i]), 4);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

FaceIndexMap load_face_index_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DPM1", 4) != 0)
    throw std::runtime_error("not a DPM1 file: " + path);
  std::uint32_t w = 0, h = 0;
  in.read(reinterpret_cast<char*>(&w), 4);
  in.read(reinterpret_cast<char*>(&h), 4);
  FaceIndexMap map;
  map.width = static_cast<int>(w);
  map.height = static_cast<int>(h);
  const size_t n = static_cast<size_t>(w) * h;
  map.face.resize(n);
  map.bary.resize(n);
  map.depth.resize(n);
  for (size_t i = 0; i < n; ++i) {
    in.read(reinterpret_cast<char*>(&map.face[i]), 4);
    in.read(reinterpret_cast<char*>(map.bary[i].data()), 12);
    in.read(reinterpret_cast<char*>(&map.depth[i]), 4);
  }
  if (!in) throw std::runtime_error("truncated DPM1 file: " + path);
  map.validate();
  return map;
}

}  // namespace clothfit
