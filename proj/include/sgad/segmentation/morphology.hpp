#pragma once

#include "sgad/image.hpp"

namespace sgad::seg {

enum class MorphOp { Erode, Dilate, Open, Close };

namespace detail {

inline void require_binary_mask(const Image& m) {
  SGAD_REQUIRE(m.channels == 1, InvalidArgument, "morphology: mask must have one channel");
  for (float v : m.data)
    SGAD_REQUIRE(v == 0.0f || v == 1.0f, InvalidArgument, "morphology: mask values must be 0 or 1");
}

// Square structuring element; pixels outside the image count as background.
// Separable: a square min/max is a row pass followed by a column pass.
inline Image square_filter(const Image& m, int kernel, bool erode) {
  const int r = kernel / 2;
  const float outside = 0.0f;
  auto combine = [erode](float a, float b) { return erode ? std::min(a, b) : std::max(a, b); };
  Image rows(m.height, m.width, 1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      float acc = erode ? 1.0f : 0.0f;
      for (int dx = -r; dx <= r; ++dx) {
        const int xx = x + dx;
        acc = combine(acc, (xx < 0 || xx >= m.width) ? outside : m.at(y, xx));
      }
      rows.at(y, x) = acc;
    }
  Image out(m.height, m.width, 1);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      float acc = erode ? 1.0f : 0.0f;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        acc = combine(acc, (yy < 0 || yy >= m.height) ? outside : rows.at(yy, x));
      }
      out.at(y, x) = acc;
    }
  return out;
}

}  // namespace detail

// Binary morphology with an odd square kernel. Open = dilate(erode(m)),
// close = erode(dilate(m)).
inline Image morphology(const Image& mask, MorphOp op, int kernel = 3) {
  SGAD_REQUIRE(kernel >= 1 && kernel % 2 == 1, InvalidArgument, "morphology: kernel must be odd and >= 1");
  detail::require_binary_mask(mask);
  switch (op) {
    case MorphOp::Erode: return detail::square_filter(mask, kernel, true);
    case MorphOp::Dilate: return detail::square_filter(mask, kernel, false);
    case MorphOp::Open:
      return detail::square_filter(detail::square_filter(mask, kernel, true), kernel, false);
    case MorphOp::Close:
      return detail::square_filter(detail::square_filter(mask, kernel, false), kernel, true);
  }
  return mask;
}

}  // namespace sgad::seg
