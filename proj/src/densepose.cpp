#include "clothfit/densepose.hpp"

#include <algorithm>

#include "clothfit/clothfield.hpp"
#include <fstream>
#include <random>
#include <stdexcept>

namespace clothfit {

namespace {

bool valid_label(std::uint8_t label) {
  return label <= kLabelShoes || label == kLabelBackground;
}

// Body parts backing each cloth type (supervision correspondence).
bool part_belongs(ClothType cloth, BodyPart part) {
  switch (cloth) {
    case ClothType::UpperCloth:
    case ClothType::Coat:
      return part == BodyPart::Torso || part == BodyPart::LeftArm ||
             part == BodyPart::RightArm;
    case ClothType::Pants:
    case ClothType::Skirt:
      return part == BodyPart::LeftLeg || part == BodyPart::RightLeg;
    case ClothType::Shoes:
      return part == BodyPart::LeftFoot || part == BodyPart::RightFoot;
  }
  return false;
}

std::uint8_t cloth_label(ClothType cloth) {
  switch (cloth) {
    case ClothType::UpperCloth: return kLabelUpper;
    case ClothType::Coat: return kLabelCoat;
    case ClothType::Pants: return kLabelPants;
    case ClothType::Skirt: return kLabelSkirt;
    case ClothType::Shoes: return kLabelShoes;
  }
  return kLabelBackground;
}

}  // namespace

void ClothSegmentation::validate() const {
  if (labels.size() != static_cast<size_t>(width) * height)
    throw std::invalid_argument("segmentation: size mismatch");
  for (std::uint8_t l : labels) {
    if (!valid_label(l))
      throw std::invalid_argument("segmentation: unknown label code");
  }
}

void save_segmentation(const ClothSegmentation& seg, const std::string& path) {
  seg.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write: " + path);
  out << "P5\n" << seg.width << " " << seg.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(seg.labels.data()),
            static_cast<std::streamsize>(seg.labels.size()));
  if (!out) throw std::runtime_error("write failed: " + path);
}

ClothSegmentation load_segmentation(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path);
  std::string magic;
  in >> magic;
  if (magic != "P5") throw std::runtime_error("not a P5 PGM: " + path);
  int w = 0, h = 0, maxval = 0;
  in >> w >> h >> maxval;
  if (maxval != 255) throw std::runtime_error("expected 8-bit PGM: " + path);
  in.get();  // single whitespace after header
  ClothSegmentation seg;
  seg.width = w;
  seg.height = h;
  seg.labels.resize(static_cast<size_t>(w) * h);
  in.read(reinterpret_cast<char*>(seg.labels.data()),
          static_cast<std::streamsize>(seg.labels.size()));
  if (!in) throw std::runtime_error("truncated PGM: " + path);
  seg.validate();
  return seg;
}

void ObservationSet::validate() const {
  segmentation.validate();
  densepose.validate();
  camera.validate();
  if (segmentation.width != densepose.width ||
      segmentation.height != densepose.height)
    throw std::invalid_argument("observation: raster dimensions mismatch");
}

std::vector<MappedClothPoint> cloth_to_body_map(const ObservationSet& obs,
                                                const TPoseBody& tpose,
                                                int n_points,
                                                std::uint64_t seed) {
  obs.validate();
  if (n_points < 1) throw std::invalid_argument("n_points must be >= 1");

  std::vector<std::uint32_t> eligible;
  for (int y = 0; y < obs.segmentation.height; ++y) {
    for (int x = 0; x < obs.segmentation.width; ++x) {
      if (obs.densepose.covered(x, y) &&
          obs.segmentation.at(x, y) != kLabelBackground)
        eligible.push_back(static_cast<std::uint32_t>(
            y * obs.segmentation.width + x));
    }
  }
  const size_t take = std::min<size_t>(eligible.size(), n_points);
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `take` entries are a uniform
  // without-replacement sample.
  for (size_t i = 0; i < take; ++i) {
    const size_t j = i + rng() % (eligible.size() - i);
    std::swap(eligible[i], eligible[j]);
  }

  std::vector<MappedClothPoint> out;
  out.reserve(take);
  for (size_t i = 0; i < take; ++i) {
    const int x = eligible[i] % obs.segmentation.width;
    const int y = eligible[i] / obs.segmentation.width;
    const size_t pix = obs.densepose.idx(x, y);
    const Tri& f =
        tpose.model->faces[static_cast<size_t>(obs.densepose.face[pix])];
    const auto& b = obs.densepose.bary[pix];
    MappedClothPoint p;
    p.position = static_cast<double>(b[0]) * tpose.vertices[f[0]] +
                 static_cast<double>(b[1]) * tpose.vertices[f[1]] +
                 static_cast<double>(b[2]) * tpose.vertices[f[2]];
    p.label = obs.segmentation.at(x, y);
    p.pixel_x = x;
    p.pixel_y = y;
    out.push_back(p);
  }
  return out;
}

std::array<bool, 5> cloth_part_visibility(const FaceIndexMap& densepose,
                                          const BodyModel& model,
                                          int min_pixels) {
  // Face part = majority of its vertex tags; tubes never mix parts, so
  // any vertex works.
  std::array<int, 8> part_pixels{};
  const size_t n = static_cast<size_t>(densepose.width) * densepose.height;
  for (size_t i = 0; i < n; ++i) {
    if (densepose.face[i] < 0) continue;
    const Tri& f = model.faces[static_cast<size_t>(densepose.face[i])];
    ++part_pixels[static_cast<int>(model.part_ids[f[0]])];
  }
  std::array<bool, 5> visible{};
  for (int c = 0; c < kClothCount; ++c) {
    int count = 0;
    for (int p = 0; p < 8; ++p) {
      if (part_belongs(static_cast<ClothType>(c), static_cast<BodyPart>(p)))
        count += part_pixels[p];
    }
    visible[c] = count >= min_pixels;
  }
  return visible;
}

std::array<Tristate, 5> existence_labels(const ObservationSet& obs,
                                         const std::array<bool, 5>& visible) {
  std::array<bool, 5> present{};
  for (std::uint8_t l : obs.segmentation.labels) {
    if (l >= kLabelUpper && l <= kLabelShoes) present[l - kLabelUpper] = true;
  }
  std::array<Tristate, 5> out{};
  for (int c = 0; c < kClothCount; ++c) {
    const int slot = cloth_label(static_cast<ClothType>(c)) - kLabelUpper;
    if (present[slot])
      out[c] = Tristate::True;
    else if (visible[c])
      out[c] = Tristate::False;
    else
      out[c] = Tristate::Unsupervised;
  }
  return out;
}

}  // namespace clothfit
