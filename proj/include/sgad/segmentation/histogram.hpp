#pragma once

#include <array>
#include <cmath>
#include <cstdint>

#include "sgad/image.hpp"

namespace sgad::seg {

inline int to_level(float v) { return static_cast<int>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)); }

// Per-channel equalization over 256 levels: each level maps to its cumulative
// frequency, so the output lies in (0,1] and a single-level channel maps to 1.
inline Image histogram_equalize(const Image& img) {
  SGAD_REQUIRE(!img.empty(), InvalidArgument, "histogram_equalize: empty image");
  SGAD_REQUIRE(img.channels == 1 || img.channels == 3, InvalidArgument,
               "histogram_equalize: channels must be 1 or 3");
  Image out = img;
  const std::size_t n = img.pixel_count();
  for (int c = 0; c < img.channels; ++c) {
    std::array<std::uint64_t, 256> hist{};
    for (std::size_t i = 0; i < n; ++i) ++hist[to_level(img.data[i * img.channels + c])];
    std::array<float, 256> lut{};
    std::uint64_t cum = 0;
    for (int l = 0; l < 256; ++l) {
      cum += hist[l];
      lut[l] = static_cast<float>(static_cast<double>(cum) / static_cast<double>(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      float& v = out.data[i * img.channels + c];
      v = lut[to_level(v)];
    }
  }
  return out;
}

}  // namespace sgad::seg
