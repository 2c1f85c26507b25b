#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sgad/error.hpp"

namespace sgad {

// Interleaved row-major H x W x C float image. Values live in [0,1] for
// pixel data, or in the model domain once a dataset has been standardized.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> data;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
    SGAD_REQUIRE(h >= 0 && w >= 0 && c >= 1, InvalidArgument, "Image: bad extent");
  }

  bool empty() const { return data.empty(); }
  std::size_t size() const { return data.size(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }

  float& at(int y, int x, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  float at(int y, int x, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }

  bool same_shape(const Image& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }

  bool operator==(const Image& o) const = default;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) throw ShapeError(std::string(what) + ": image shape mismatch");
}

inline bool all_finite(const Image& img) {
  return std::all_of(img.data.begin(), img.data.end(), [](float v) { return std::isfinite(v); });
}

// Snap every value to the nearest 8-bit level so that PNG/PPM storage is lossless.
inline void quantize_8bit(Image& img) {
  for (float& v : img.data) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
}

inline Image extract_channel(const Image& img, int c) {
  Image out(img.height, img.width, 1);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) out.data[i] = img.data[i * img.channels + c];
  return out;
}

inline Image gray_to_rgb(const Image& g) {
  Image out(g.height, g.width, 3);
  for (std::size_t i = 0; i < g.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c) out.data[i * 3 + c] = g.data[i * g.channels];
  return out;
}

}  // namespace sgad
