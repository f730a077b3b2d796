#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "clothfit/body.hpp"
#include "clothfit/raster.hpp"

namespace clothfit {

// Segmentation label codes (8-bit PGM payload).
enum : std::uint8_t {
  kLabelNonClothBody = 0,
  kLabelUpper = 1,
  kLabelCoat = 2,
  kLabelPants = 3,
  kLabelSkirt = 4,
  kLabelShoes = 5,
  kLabelBackground = 255,
};

struct ClothSegmentation {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;  // row-major

  std::uint8_t at(int x, int y) const {
    return labels[static_cast<size_t>(y) * width + x];
  }
  void validate() const;
};

void save_segmentation(const ClothSegmentation& seg, const std::string& path);
ClothSegmentation load_segmentation(const std::string& path);

// A segmentation pixel lifted to the T-pose body surface through the
// DensePose (face index, barycentric) correspondence.
struct MappedClothPoint {
  Vec3 position;
  std::uint8_t label = kLabelBackground;
  int pixel_x = 0;
  int pixel_y = 0;
};

enum class Tristate { False = 0, True = 1, Unsupervised = 2 };

// One observed image: cloth segmentation, DensePose raster over the posed
// body (carrying T-pose correspondence through the shared topology),
// camera, and per-image truths.
struct ObservationSet {
  ClothSegmentation segmentation;
  FaceIndexMap densepose;
  Camera camera;
  bool gender_male_truth = true;
  std::array<Tristate, 5> existence_truth{};

  void validate() const;
};

// Samples up to n_points eligible pixels (DensePose-covered, non-background
// label) uniformly without replacement and lifts them to the T-pose surface.
std::vector<MappedClothPoint> cloth_to_body_map(const ObservationSet& obs,
                                                const TPoseBody& tpose,
                                                int n_points,
                                                std::uint64_t seed);

// Per-cloth part visibility: a cloth's body parts count as included in the
// image when at least `min_pixels` of their pixels are DensePose-covered.
std::array<bool, 5> cloth_part_visibility(const FaceIndexMap& densepose,
                                          const BodyModel& model,
                                          int min_pixels = 50);

// Supervision rule: label present -> True; absent with parts visible ->
// False; parts not visible -> Unsupervised.
std::array<Tristate, 5> existence_labels(const ObservationSet& obs,
                                         const std::array<bool, 5>& visible);

}  // namespace clothfit
