#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sgad/dataset/sample.hpp"
#include "sgad/image.hpp"

namespace sgad::data {

enum class Dihedral { Identity, Rot90, Rot180, Rot270, FlipH, FlipV, FlipHRot90 };

inline constexpr std::array<Dihedral, 7> kAugmentations = {Dihedral::Identity, Dihedral::Rot90,  Dihedral::Rot180,
                                                           Dihedral::Rot270,   Dihedral::FlipH,  Dihedral::FlipV,
                                                           Dihedral::FlipHRot90};

inline const char* suffix(Dihedral d) {
  switch (d) {
    case Dihedral::Identity: return "";
    case Dihedral::Rot90: return "_r90";
    case Dihedral::Rot180: return "_r180";
    case Dihedral::Rot270: return "_r270";
    case Dihedral::FlipH: return "_fh";
    case Dihedral::FlipV: return "_fv";
    case Dihedral::FlipHRot90: return "_fhr90";
  }
  return "";
}

// Counter-clockwise quarter turn of a square image.
inline Image rot90(const Image& img) {
  SGAD_REQUIRE(img.height == img.width, ShapeError, "rot90: image must be square");
  const int n = img.height;
  Image out(n, n, img.channels);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int c = 0; c < img.channels; ++c) out.at(i, j, c) = img.at(j, n - 1 - i, c);
  return out;
}

inline Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j)
      for (int c = 0; c < img.channels; ++c) out.at(i, j, c) = img.at(i, img.width - 1 - j, c);
  return out;
}

inline Image flip_vertical(const Image& img) {
  Image out(img.height, img.width, img.channels);
  for (int i = 0; i < img.height; ++i)
    for (int j = 0; j < img.width; ++j)
      for (int c = 0; c < img.channels; ++c) out.at(i, j, c) = img.at(img.height - 1 - i, j, c);
  return out;
}

inline Image apply_dihedral(const Image& img, Dihedral d) {
  switch (d) {
    case Dihedral::Identity: return img;
    case Dihedral::Rot90: return rot90(img);
    case Dihedral::Rot180: return rot90(rot90(img));
    case Dihedral::Rot270: return rot90(rot90(rot90(img)));
    case Dihedral::FlipH: return flip_horizontal(img);
    case Dihedral::FlipV: return flip_vertical(img);
    case Dihedral::FlipHRot90: return flip_horizontal(rot90(img));
  }
  return img;
}

// Seven dihedral copies per input, in kAugmentations order, labels kept.
// Symmetric images are not deduplicated.
inline std::vector<Sample> augment(std::span<const Sample> samples) {
  std::vector<Sample> out;
  out.reserve(samples.size() * kAugmentations.size());
  for (const auto& s : samples) {
    SGAD_REQUIRE(s.image.height == s.image.width, ShapeError, "augment: image must be square (" + s.id + ")");
    for (Dihedral d : kAugmentations) out.push_back({apply_dihedral(s.image, d), s.label, s.id + suffix(d)});
  }
  return out;
}

}  // namespace sgad::data
