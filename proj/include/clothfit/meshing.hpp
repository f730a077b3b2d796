#pragma once

#include <vector>

#include "clothfit/clothfield.hpp"
#include "clothfit/supervision.hpp"

namespace clothfit {

struct ScalarGrid {
  Vec3 origin{0, 0, 0};
  Vec3 cell{1, 1, 1};
  int nx = 0, ny = 0, nz = 0;
  std::vector<double> samples;  // x-fastest

  double at(int ix, int iy, int iz) const {
    return samples[(static_cast<size_t>(iz) * ny + iy) * nx + ix];
  }
  double& at(int ix, int iy, int iz) {
    return samples[(static_cast<size_t>(iz) * ny + iy) * nx + ix];
  }
  Vec3 node(int ix, int iy, int iz) const {
    return origin + Vec3(ix * cell.x(), iy * cell.y(), iz * cell.z());
  }
  void validate() const;
};

// Dense field sampling over a region at `resolution` nodes per axis.
ScalarGrid sample_field(const DistanceField& field, const QueryBox& region,
                        int resolution);
ScalarGrid sample_field(const FieldBackend& backend, const ClothState& state,
                        ClothType cloth, const QueryBox& region,
                        int resolution);

// Cloth box inflated by 2 * d_max, the default extraction region.
QueryBox extraction_region(const TPoseBody& tpose, ClothType cloth,
                           std::optional<Side> side,
                           const LossWeights& weights);

// Standard 256-case table extraction of the level set `value = iso` with
// linear edge interpolation; shared vertices welded along cell edges,
// deterministic ordering by cell index. Empty mesh when nothing crosses iso.
Mesh marching_cubes(const ScalarGrid& grid, double iso);

// Per existence-gated cloth: sample + extract (shoes: left and right
// components merged into one mesh). Non-gated slots stay empty.
std::array<Mesh, kClothCount> extract_cloth_meshes(
    const ClothState& state, const FieldBackend& backend,
    const TPoseBody& tpose, int resolution, double iso,
    const LossWeights& weights = {});

struct PosedScene {
  Mesh body;
  std::vector<Mesh> cloths;
};

// Cloth vertices inherit the blended skinning transform of their nearest
// body vertex (ties by lowest body-vertex index); attachments recorded.
PosedScene pose_deform(const TPoseBody& tpose_body,
                       const std::vector<Mesh>& cloth_meshes,
                       const PoseParams& theta);

}  // namespace clothfit
