#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>
#include <array>
#include <string>
#include <vector>

#include "clothfit/geometry.hpp"

namespace clothfit {

inline constexpr int kJointCount = 24;
inline constexpr int kShapeDims = 10;

// Body-part tag used by the cloth field to pick submeshes.
enum class BodyPart : std::uint8_t {
  Torso = 0,
  Head = 1,
  LeftArm = 2,
  RightArm = 3,
  LeftLeg = 4,
  RightLeg = 5,
  LeftFoot = 6,
  RightFoot = 7,
};

// Parametric T-posed body with shape blendshapes, joint regression and
// skinning weights. Axis convention: y up, x toward the subject's left,
// z toward the camera; meters.
struct BodyModel {
  std::vector<Vec3> template_vertices;
  std::vector<Tri> faces;
  std::vector<int> joint_parents;           // parent per joint, -1 at pelvis
  std::vector<std::string> joint_names;
  Eigen::MatrixXd joint_regressor;          // kJointCount x V
  Eigen::MatrixXd skin_weights;             // V x kJointCount
  std::vector<std::vector<Vec3>> shape_basis;  // kShapeDims x V displacements
  std::string gender_variant = "neutral";

  // Procedural annotations consumed by the procedural cloth backend:
  // per-vertex part tag and normalized coordinate along the part's bone
  // chain (0 proximal, 1 distal; torso: 0 neck, 1 pelvis).
  std::vector<BodyPart> part_ids;
  std::vector<double> limb_coord;

  int joint_index(const std::string& name) const;  // throws if missing
  void validate() const;
};

struct ShapeParams {
  std::array<double, kShapeDims> beta{};
  void validate() const;  // finite, |beta_k| <= 5
};

struct PoseParams {
  std::array<double, 3 * kJointCount> theta{};  // axis-angle per joint
  Vec3 axis_angle(int joint) const {
    return Vec3(theta[3 * joint], theta[3 * joint + 1], theta[3 * joint + 2]);
  }
  void set_axis_angle(int joint, const Vec3& aa) {
    theta[3 * joint] = aa.x();
    theta[3 * joint + 1] = aa.y();
    theta[3 * joint + 2] = aa.z();
  }
  void validate() const;  // finite, per-joint norm <= pi
};

// Shaped T-pose body: template + blendshape displacements, joints
// re-regressed from the shaped vertices.
struct TPoseBody {
  std::vector<Vec3> vertices;
  std::array<Vec3, kJointCount> joints;
  const BodyModel* model = nullptr;

  Vec3 joint(const std::string& name) const {
    return joints[static_cast<size_t>(model->joint_index(name))];
  }
  double z_min() const;
  double z_max() const;
  Mesh surface_mesh() const;  // vertices + model faces
};

struct ProceduralBodySpec {
  double stature = 1.0;       // overall height multiplier
  double girth = 1.0;         // limb/torso radius multiplier
  int sectors = 12;           // segments per capsule ring
  double ring_spacing = 0.06; // target distance between rings (meters)
  void validate() const;
};

BodyModel make_procedural_body(const ProceduralBodySpec& spec,
                               const std::string& gender);

TPoseBody shape_body(const BodyModel& model, const ShapeParams& beta);

// World transform per joint (axis-angle rotations composed down the
// hierarchy about the shaped joint locations).
std::array<Eigen::Affine3d, kJointCount> joint_world_transforms(
    const TPoseBody& tpose, const PoseParams& theta);

std::array<Vec3, kJointCount> pose_joints(const TPoseBody& tpose,
                                          const PoseParams& theta);

// Full blended skinning transform per body vertex.
std::vector<Eigen::Affine3d> vertex_skin_transforms(const TPoseBody& tpose,
                                                    const PoseParams& theta);

// Linear blend skinning of the shaped body.
Mesh pose_body(const TPoseBody& tpose, const PoseParams& theta);

// Skinning of an arbitrary vertex set sharing the body topology
// (same vertex count; per-vertex weights taken from the model).
std::vector<Vec3> skin_vertices(const TPoseBody& tpose,
                                const PoseParams& theta,
                                const std::vector<Vec3>& vertices);

// JSON manifest + little-endian binary sidecar blobs, written into `dir`.
void save_body(const BodyModel& model, const std::string& dir);
BodyModel load_body(const std::string& dir);

}  // namespace clothfit
