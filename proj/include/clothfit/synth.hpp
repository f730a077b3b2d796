#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "clothfit/evaluation.hpp"
#include "clothfit/meshing.hpp"

namespace clothfit {

// Synthetic scene: procedural body + sampled ground-truth cloth state,
// rendered to the observation files the fitting pipeline consumes.
struct SynthConfig {
  std::uint64_t seed = 0;
  ProceduralBodySpec body_spec;
  ShapeParams beta;
  PoseParams pose;              // observation pose (default: arms lowered)
  Camera camera;
  int resolution = 64;          // GT mesh extraction grid
  double iso = 0.01;            // GT mesh extraction level (meters)
  // Fit-view cropping, simulating partial-body photographs: Hips hides the
  // legs, Chest leaves only shoulders/arms/upper torso visible.
  enum class Truncation { None, Hips, Chest };
  Truncation truncation = Truncation::None;
  std::optional<ClothState> gt_state;  // sampled from seed when absent

  static SynthConfig with_defaults(std::uint64_t seed);
  void validate() const;
};

struct SceneManifest {
  std::string body_dir;
  std::string state_path;
  std::array<std::string, kClothCount> gt_mesh_paths;  // "" when absent
  std::string densepose_fit_path;
  std::string segmentation_fit_path;
  std::string densepose_eval_path;
  std::string segmentation_eval_path;
  Camera camera;
  bool gender_male = true;
  std::array<Tristate, kClothCount> existence_supervision{};
  std::array<double, kShapeDims> beta{};
  std::array<double, 3 * kJointCount> theta{};
  std::uint64_t seed = 0;
  int resolution = 64;
  double iso = 0.01;
};

void save_manifest(const SceneManifest& m, const std::string& path);
SceneManifest load_manifest(const std::string& path);

// Existence-present clothes drawn from the seed (upper always on, exactly
// one of pants/skirt); active latent dims gaussian, inert dims zero.
ClothState sample_gt_state(std::uint64_t seed);

// Writes body model, GT state, GT cloth meshes, DensePose maps and
// segmentations (fit view, optionally truncated, plus the full eval view)
// and the manifest into out_dir.
SceneManifest synthesize_scene(const SynthConfig& cfg,
                               const std::string& out_dir);

// Observation assembled from the manifest's fit-view (or eval-view) files.
ObservationSet load_observation(const SceneManifest& m, bool eval_view = false);

}  // namespace clothfit
