#include "clothfit/meshing.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace clothfit {

#include "mc_tables.inl"

void ScalarGrid::validate() const {
  if (nx < 2 || ny < 2 || nz < 2)
    throw std::invalid_argument("grid needs at least 2 nodes per axis");
  if (samples.size() != static_cast<size_t>(nx) * ny * nz)
    throw std::invalid_argument("grid sample count mismatch");
  if (cell.minCoeff() <= 0.0)
    throw std::invalid_argument("grid cell size must be positive");
  for (double v : samples)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite grid sample");
}

ScalarGrid sample_field(const DistanceField& field, const QueryBox& region,
                        int resolution) {
  if (resolution < 2) throw std::invalid_argument("resolution must be >= 2");
  ScalarGrid g;
  g.nx = g.ny = g.nz = resolution;
  g.origin = region.lo;
  g.cell = (region.hi - region.lo) / double(resolution - 1);
  g.samples.resize(static_cast<size_t>(resolution) * resolution * resolution);
  size_t k = 0;
  for (int iz = 0; iz < resolution; ++iz)
    for (int iy = 0; iy < resolution; ++iy)
      for (int ix = 0; ix < resolution; ++ix)
        g.samples[k++] = field.eval(g.node(ix, iy, iz));
  return g;
}

ScalarGrid sample_field(const FieldBackend& backend, const ClothState& state,
                        ClothType cloth, const QueryBox& region,
                        int resolution) {
  auto field = backend.instantiate(state, cloth);
  return sample_field(*field, region, resolution);
}

QueryBox extraction_region(const TPoseBody& tpose, ClothType cloth,
                           std::optional<Side> side,
                           const LossWeights& weights) {
  QueryBox box = cloth_query_box(tpose, cloth, side);
  double pad = 2.0 * weights.d_max_of(cloth);
  box.lo -= Vec3::Constant(pad);
  box.hi += Vec3::Constant(pad);
  return box;
}

namespace {

// Cube vertex offsets matching the table layout.
constexpr int kCubeOffset[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                   {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdgeVerts[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                   {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                   {0, 4}, {1, 5}, {2, 6}, {3, 7}};

}  // namespace

Mesh marching_cubes(const ScalarGrid& grid, double iso) {
  grid.validate();
  Mesh out;
  // Weld key: (linear index of the lower grid node, axis 0..2).
  std::unordered_map<uint64_t, uint32_t> edge_vertex;

  auto node_index = [&](int ix, int iy, int iz) -> uint64_t {
    return (static_cast<uint64_t>(iz) * grid.ny + iy) * grid.nx + ix;
  };

  auto edge_key = [&](int ax, int ay, int az, int bx, int by, int bz,
                      uint64_t& key) {
    // Canonical form: key on the lexicographically lower endpoint.
    int axis = (bx != ax) ? 0 : (by != ay) ? 1 : 2;
    if (bx < ax || by < ay || bz < az) {
      std::swap(ax, bx);
      std::swap(ay, by);
      std::swap(az, bz);
    }
    key = node_index(ax, ay, az) * 3 + axis;
  };

  double corner[8];
  Vec3 cpos[8];
  int cx[8], cy[8], cz[8];

  for (int iz = 0; iz + 1 < grid.nz; ++iz) {
    for (int iy = 0; iy + 1 < grid.ny; ++iy) {
      for (int ix = 0; ix + 1 < grid.nx; ++ix) {
        int cube = 0;
        for (int c = 0; c < 8; ++c) {
          cx[c] = ix + kCubeOffset[c][0];
          cy[c] = iy + kCubeOffset[c][1];
          cz[c] = iz + kCubeOffset[c][2];
          corner[c] = grid.at(cx[c], cy[c], cz[c]);
          cpos[c] = grid.node(cx[c], cy[c], cz[c]);
          if (corner[c] < iso) cube |= 1 << c;
        }
        int edges = kEdgeTable[cube];
        if (edges == 0) continue;

        uint32_t ev[12];
        for (int e = 0; e < 12; ++e) {
          if (!(edges & (1 << e))) continue;
          int a = kEdgeVerts[e][0], b = kEdgeVerts[e][1];
          uint64_t key;
          edge_key(cx[a], cy[a], cz[a], cx[b], cy[b], cz[b], key);
          auto it = edge_vertex.find(key);
          if (it != edge_vertex.end()) {
            ev[e] = it->second;
            continue;
          }
          double va = corner[a], vb = corner[b];
          double t = (std::abs(vb - va) < 1e-12) ? 0.5 : (iso - va) / (vb - va);
          t = std::clamp(t, 0.0, 1.0);
          Vec3 p = cpos[a] + t * (cpos[b] - cpos[a]);
          ev[e] = static_cast<uint32_t>(out.vertices.size());
          out.vertices.push_back(p);
          edge_vertex.emplace(key, ev[e]);
        }

        const int* tri = kTriTable[cube];
        for (int t = 0; tri[t] != -1; t += 3) {
          uint32_t i0 = ev[tri[t]], i1 = ev[tri[t + 1]], i2 = ev[tri[t + 2]];
          if (i0 == i1 || i1 == i2 || i0 == i2) continue;
          out.faces.push_back({i0, i1, i2});
        }
      }
    }
  }
  return out;
}

std::array<Mesh, kClothCount> extract_cloth_meshes(
    const ClothState& state, const FieldBackend& backend,
    const TPoseBody& tpose, int resolution, double iso,
    const LossWeights& weights) {
  std::array<Mesh, kClothCount> out;
  for (int c = 0; c < kClothCount; ++c) {
    if (!existence_gate(state.existence[c])) continue;
    ClothType cloth = static_cast<ClothType>(c);
    auto field = backend.instantiate(state, cloth);
    if (cloth == ClothType::Shoes) {
      Mesh merged;
      for (Side side : {Side::Left, Side::Right}) {
        QueryBox box = extraction_region(tpose, cloth, side, weights);
        Mesh part = marching_cubes(sample_field(*field, box, resolution), iso);
        uint32_t base = static_cast<uint32_t>(merged.vertices.size());
        merged.vertices.insert(merged.vertices.end(), part.vertices.begin(),
                               part.vertices.end());
        for (const Tri& f : part.faces)
          merged.faces.push_back({f[0] + base, f[1] + base, f[2] + base});
      }
      out[c] = std::move(merged);
    } else {
      QueryBox box = extraction_region(tpose, cloth, std::nullopt, weights);
      out[c] = marching_cubes(sample_field(*field, box, resolution), iso);
    }
  }
  return out;
}

PosedScene pose_deform(const TPoseBody& tpose_body,
                       const std::vector<Mesh>& cloth_meshes,
                       const PoseParams& theta) {
  PosedScene scene;
  scene.body = pose_body(tpose_body, theta);
  auto transforms = vertex_skin_transforms(tpose_body, theta);
  const auto& body_verts = tpose_body.vertices;

  scene.cloths.reserve(cloth_meshes.size());
  for (const Mesh& cloth : cloth_meshes) {
    Mesh posed = cloth;
    posed.attachment.resize(cloth.vertices.size());
    for (size_t i = 0; i < cloth.vertices.size(); ++i) {
      const Vec3& p = cloth.vertices[i];
      uint32_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (size_t j = 0; j < body_verts.size(); ++j) {
        double d = (body_verts[j] - p).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = static_cast<uint32_t>(j);
        }
      }
      posed.attachment[i] = best;
      posed.vertices[i] = transforms[best] * p;
    }
    scene.cloths.push_back(std::move(posed));
  }
  return scene;
}

}  // namespace clothfit
