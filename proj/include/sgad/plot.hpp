#pragma once

// Small bitmap renderings of the score histogram and ROC curve. No text; the
// CSV files next to them carry the numbers.

#include <algorithm>
#include <array>
#include <cmath>

#include "sgad/evaluation.hpp"
#include "sgad/image.hpp"

namespace sgad::plot {

using Color = std::array<float, 3>;

inline constexpr Color kWhite{1, 1, 1};
inline constexpr Color kAxis{0.2f, 0.2f, 0.2f};
inline constexpr Color kGrid{0.88f, 0.88f, 0.88f};
inline constexpr Color kNormal{0.2f, 0.45f, 0.85f};
inline constexpr Color kDiseased{0.85f, 0.25f, 0.2f};
inline constexpr Color kThreshold{0.1f, 0.6f, 0.2f};

class Canvas {
 public:
  Canvas(int height, int width) : img_(height, width, 3) { std::fill(img_.data.begin(), img_.data.end(), 1.0f); }

  void set(int y, int x, const Color& c, float alpha = 1.0f) {
    if (y < 0 || x < 0 || y >= img_.height || x >= img_.width) return;
    for (int k = 0; k < 3; ++k) img_.at(y, x, k) = (1 - alpha) * img_.at(y, x, k) + alpha * c[k];
  }

  void fill_rect(int x0, int y0, int x1, int y1, const Color& c, float alpha = 1.0f) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
      for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(y, x, c, alpha);
  }

  void line(int x0, int y0, int x1, int y1, const Color& c) {
    const int steps = std::max({std::abs(x1 - x0), std::abs(y1 - y0), 1});
    for (int i = 0; i <= steps; ++i) {
      const double t = static_cast<double>(i) / steps;
      set(static_cast<int>(std::lround(y0 + t * (y1 - y0))), static_cast<int>(std::lround(x0 + t * (x1 - x0))), c);
    }
  }

  const Image& image() const { return img_; }

 private:
  Image img_;
};

struct Frame {
  int left = 24, right = 8, top = 8, bottom = 24;
  int width = 0, height = 0;

  int px(double u) const { return left + static_cast<int>(std::lround(u * (width - left - right - 1))); }
  int py(double v) const { return height - bottom - 1 - static_cast<int>(std::lround(v * (height - top - bottom - 1))); }
};

inline void draw_axes(Canvas& c, const Frame& f) {
  for (int k = 1; k < 10; ++k) {
    c.line(f.px(k / 10.0), f.py(0), f.px(k / 10.0), f.py(1), kGrid);
    c.line(f.px(0), f.py(k / 10.0), f.px(1), f.py(k / 10.0), kGrid);
  }
  c.line(f.px(0), f.py(0), f.px(1), f.py(0), kAxis);
  c.line(f.px(0), f.py(0), f.px(0), f.py(1), kAxis);
  for (int k = 0; k <= 10; ++k) c.line(f.px(k / 10.0), f.py(0), f.px(k / 10.0), f.py(0) + 4, kAxis);
}

// Overlaid per-class bars; the threshold, when in [0,1], as a vertical line.
inline Image render_histogram(const ScoreHistogram& h, double tau = -1, int width = 640, int height = 320) {
  Canvas c(height, width);
  const Frame f{.width = width, .height = height};
  draw_axes(c, f);
  std::size_t peak = 1;
  for (int b = 0; b < h.bins; ++b) peak = std::max({peak, h.normal[b], h.diseased[b]});
  auto bars = [&](const std::vector<std::size_t>& counts, const Color& col) {
    for (int b = 0; b < h.bins; ++b) {
      if (counts[b] == 0) continue;
      c.fill_rect(f.px(h.bin_low(b)), f.py(0) - 1, f.px(h.bin_low(b + 1)) - 1,
                  f.py(static_cast<double>(counts[b]) / peak), col, 0.6f);
    }
  };
  bars(h.normal, kNormal);
  bars(h.diseased, kDiseased);
  if (tau >= 0 && tau <= 1) c.line(f.px(tau), f.py(0), f.px(tau), f.py(1), kThreshold);
  return c.image();
}

inline Image render_roc(const RocCurve& curve, int side = 360) {
  Canvas c(side, side);
  const Frame f{.width = side, .height = side};
  draw_axes(c, f);
  c.line(f.px(0), f.py(0), f.px(1), f.py(1), kGrid);
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto &a = curve.points[i - 1], &b = curve.points[i];
    c.line(f.px(a.fpr), f.py(a.tpr), f.px(b.fpr), f.py(b.tpr), kDiseased);
  }
  return c.image();
}

// Images side by side with a `gap` of white between them; all must share a shape.
inline Image hconcat(std::span<const Image> parts, int gap = 2) {
  SGAD_REQUIRE(!parts.empty(), InvalidArgument, "hconcat: nothing to join");
  const Image& first = parts.front();
  const int n = static_cast<int>(parts.size());
  Image out(first.height, n * first.width + (n - 1) * gap, first.channels);
  std::fill(out.data.begin(), out.data.end(), 1.0f);
  for (int i = 0; i < n; ++i) {
    require_same_shape(first, parts[i], "hconcat");
    for (int y = 0; y < first.height; ++y)
      for (int x = 0; x < first.width; ++x)
        for (int k = 0; k < first.channels; ++k) out.at(y, i * (first.width + gap) + x, k) = parts[i].at(y, x, k);
  }
  return out;
}

}  // namespace sgad::plot
