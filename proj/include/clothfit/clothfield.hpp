#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

#include "clothfit/body.hpp"
#include "clothfit/geometry.hpp"

namespace clothfit {

inline constexpr int kClothCount = 5;
inline constexpr double kExistenceThreshold = 0.25;

enum class ClothType : int {
  UpperCloth = 0,
  Coat = 1,
  Pants = 2,
  Skirt = 3,
  Shoes = 4,
};

int latent_dim(ClothType type);         // 18, shoes 4
int active_latent_dim(ClothType type);  // dims the decoder actually reads
const char* cloth_name(ClothType type);
ClothType cloth_from_name(const std::string& name);

struct ClothLatent {
  ClothType cloth_type = ClothType::UpperCloth;
  Eigen::VectorXd z;

  static ClothLatent zeros(ClothType type);
  void validate() const;
};

// Per-cloth existence scores, latent codes and gender one-hot.
struct ClothState {
  std::array<double, kClothCount> existence{};
  std::array<ClothLatent, kClothCount> latents;
  double gender_male = 0.5;
  double gender_female = 0.5;

  static ClothState neutral();  // zero latents, existence 0.5
  const ClothLatent& latent(ClothType type) const {
    return latents[static_cast<int>(type)];
  }
  ClothLatent& latent(ClothType type) {
    return latents[static_cast<int>(type)];
  }
  void validate() const;
};

// Strictly greater than the threshold.
bool existence_gate(double score);

// Decoded cloth surface parameters. coverage1 follows the limb axis
// (sleeves, legs, shoe extent), coverage2 the torso/length axis; thickness
// is the outward offset from the body surface.
struct ClothSurfaceParams {
  double coverage1 = 0.5;
  double coverage2 = 0.5;
  double thickness = 0.015;
};

ClothSurfaceParams decode_latent(const ClothLatent& latent);

// A realized unsigned distance field for one cloth configuration.
class DistanceField {
 public:
  virtual ~DistanceField() = default;
  virtual double eval(const Vec3& x) const = 0;
};

class FieldBackend {
 public:
  virtual ~FieldBackend() = default;
  virtual std::string kind() const = 0;
  virtual std::shared_ptr<const DistanceField> instantiate(
      const ClothState& state, ClothType cloth) const = 0;
};

double udf_eval(const FieldBackend& backend, const Vec3& x,
                const ClothState& state, ClothType cloth);

// Exact point-to-triangle distance field over the decoded offset surface.
class ProceduralClothField : public DistanceField {
 public:
  explicit ProceduralClothField(Mesh surface);
  double eval(const Vec3& x) const override;
  const Mesh& surface() const { return surface_; }
  const MeshDistanceQuery& query() const { return query_; }

 private:
  Mesh surface_;
  MeshDistanceQuery query_;
};

// Procedural backend: cloth surfaces are coverage-clipped body submeshes
// displaced outward along vertex normals (skirt: a lofted band around both
// legs). The gender input selects the body variant; with the single
// neutral template it is a pass-through.
class ProceduralBackend : public FieldBackend {
 public:
  explicit ProceduralBackend(const TPoseBody& body);
  std::string kind() const override { return "procedural"; }
  std::shared_ptr<const DistanceField> instantiate(
      const ClothState& state, ClothType cloth) const override;

  // The decoded offset surface itself (what instantiate() measures
  // distance to).
  Mesh cloth_surface(const ClothLatent& latent) const;

 private:
  std::vector<Vec3> vertices_;
  std::vector<Vec3> normals_;
  std::vector<Tri> faces_;
  std::vector<BodyPart> part_ids_;
  std::vector<double> limb_coord_;
  Vec3 pelvis_;
  double waist_radius_ = 0.0;
  double waist_y_ = 0.0;
  double ankle_y_ = 0.0;
};

// Axis-aligned grid of UDF samples, trilinear interpolation; queries
// outside the bounds are clamped to the boundary value.
class GridField : public DistanceField {
 public:
  Vec3 origin{0, 0, 0};
  Vec3 cell{1, 1, 1};
  int nx = 0, ny = 0, nz = 0;
  std::vector<float> samples;  // x-fastest order
  ClothType cloth_type = ClothType::UpperCloth;
  Eigen::VectorXd latent;

  double eval(const Vec3& x) const override;
  float& at(int ix, int iy, int iz) {
    return samples[(static_cast<size_t>(iz) * ny + iy) * nx + ix];
  }
  float at(int ix, int iy, int iz) const {
    return samples[(static_cast<size_t>(iz) * ny + iy) * nx + ix];
  }
  void validate() const;
};

class GridBackend : public FieldBackend {
 public:
  explicit GridBackend(std::shared_ptr<const GridField> field)
      : field_(std::move(field)) {}
  std::string kind() const override { return "grid"; }
  std::shared_ptr<const DistanceField> instantiate(
      const ClothState&, ClothType) const override {
    return field_;
  }

 private:
  std::shared_ptr<const GridField> field_;
};

// JSON header + float32 little-endian sample blob sidecar.
void save_grid_field(const GridField& field, const std::string& json_path);
GridField load_grid_field(const std::string& json_path);

}  // namespace clothfit
