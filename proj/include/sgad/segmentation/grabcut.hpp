#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "sgad/image.hpp"
#include "sgad/segmentation/gmm.hpp"
#include "sgad/segmentation/maxflow.hpp"

namespace sgad::seg {

enum class TrimapLabel : std::uint8_t { SureBG = 0, SureFG = 1, ProbBG = 2, ProbFG = 3 };

inline bool is_foreground(TrimapLabel l) { return l == TrimapLabel::SureFG || l == TrimapLabel::ProbFG; }

struct TrimapMask {
  int height = 0;
  int width = 0;
  std::vector<TrimapLabel> labels;

  TrimapMask() = default;
  TrimapMask(int h, int w, TrimapLabel fill) : height(h), width(w), labels(static_cast<std::size_t>(h) * w, fill) {}

  TrimapLabel& at(int y, int x) { return labels[static_cast<std::size_t>(y) * width + x]; }
  TrimapLabel at(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }

  std::size_t foreground_count() const {
    std::size_t n = 0;
    for (auto l : labels) n += is_foreground(l);
    return n;
  }

  // Single-channel {0,1} mask.
  Image to_binary() const {
    Image m(height, width, 1);
    for (std::size_t i = 0; i < labels.size(); ++i) m.data[i] = is_foreground(labels[i]) ? 1.0f : 0.0f;
    return m;
  }
};

// Axis-aligned box in pixel units: columns [x, x+w), rows [y, y+h).
struct Box {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  long long area() const { return static_cast<long long>(w) * h; }
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
};

struct GrabCutParams {
  int iterations = 5;
  int components = 5;
  double gamma = 50.0;
  double cov_eps = 1e-6;
};

enum class GrabCutStatus { Ok, DegenerateRect };

struct GrabCutResult {
  TrimapMask mask;
  GrabCutStatus status = GrabCutStatus::Ok;
  int iterations_run = 0;
  std::string warning;
};

namespace detail {

inline Color pixel_color(const Image& img, std::size_t i) {
  const float* p = img.data.data() + 3 * i;
  return {p[0], p[1], p[2]};
}

// 8-neighbourhood offsets with each unordered pair visited once.
struct NeighborOffset {
  int dy, dx;
  double inv_dist;
};
inline constexpr NeighborOffset kHalfNeighbors[4] = {
    {0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0 / std::numbers::sqrt2}, {1, -1, 1.0 / std::numbers::sqrt2}};

inline double smoothness_beta(const Image& img) {
  double sum = 0;
  std::size_t count = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (const auto& o : kHalfNeighbors) {
        const int yy = y + o.dy, xx = x + o.dx;
        if (yy >= img.height || xx < 0 || xx >= img.width) continue;
        const std::size_t a = static_cast<std::size_t>(y) * img.width + x;
        const std::size_t b = static_cast<std::size_t>(yy) * img.width + xx;
        sum += (pixel_color(img, a) - pixel_color(img, b)).squaredNorm();
        ++count;
      }
  const double mean = count ? sum / static_cast<double>(count) : 0.0;
  return mean > 0 ? 1.0 / (2.0 * mean) : 0.0;
}

struct SideFit {
  GmmModel gmm;
  bool empty = true;
};

// Assign each pixel of one side to its most likely component (or k-means on the
// first pass) and refit. K shrinks when the side has fewer pixels than components.
inline SideFit fit_side(const std::vector<Color>& colors, const GmmModel* previous, int components,
                        double cov_eps) {
  SideFit s;
  if (colors.empty()) return s;
  s.empty = false;
  const int k = std::min<int>(components, static_cast<int>(colors.size()));
  std::vector<int> assign;
  if (previous == nullptr || previous->size() == 0) {
    assign = kmeans_labels(colors, k);
  } else {
    assign.resize(colors.size());
    for (std::size_t i = 0; i < colors.size(); ++i) assign[i] = previous->most_likely_component(colors[i]);
  }
  int used = 0;
  for (int a : assign) used = std::max(used, a + 1);
  s.gmm = fit_gmm(colors, assign, std::max(used, 1), cov_eps);
  return s;
}

}  // namespace detail

// Rect-initialised GrabCut without user interaction. Pixels outside `rect` are
// SureBG and never change; pixels inside start ProbFG and are relabelled by a
// min-cut each iteration (source side = foreground).
inline GrabCutResult grabcut(const Image& img, const Box& rect, const GrabCutParams& params = {}) {
  SGAD_REQUIRE(img.channels == 3 && !img.empty(), InvalidArgument, "grabcut: image must be non-empty RGB");
  SGAD_REQUIRE(rect.w > 0 && rect.h > 0, InvalidArgument, "grabcut: rect must have positive area");
  SGAD_REQUIRE(rect.x >= 0 && rect.y >= 0 && rect.x + rect.w <= img.width && rect.y + rect.h <= img.height,
               InvalidArgument, "grabcut: rect outside image bounds");
  SGAD_REQUIRE(params.iterations >= 1, InvalidArgument, "grabcut: iterations must be >= 1");
  SGAD_REQUIRE(params.components >= 1, InvalidArgument, "grabcut: components must be >= 1");
  SGAD_REQUIRE(all_finite(img), NumericError, "grabcut: image contains non-finite values");

  const int H = img.height, W = img.width;
  const std::size_t n = static_cast<std::size_t>(H) * W;
  GrabCutResult res;
  res.mask = TrimapMask(H, W, TrimapLabel::SureBG);
  for (int y = rect.y; y < rect.y + rect.h; ++y)
    for (int x = rect.x; x < rect.x + rect.w; ++x) res.mask.at(y, x) = TrimapLabel::ProbFG;

  if (static_cast<std::size_t>(rect.area()) == n) {
    res.status = GrabCutStatus::DegenerateRect;
    res.warning = "rect covers the whole image; no background samples, returning rect interior as foreground";
    return res;
  }

  std::vector<Color> colors(n);
  for (std::size_t i = 0; i < n; ++i) colors[i] = detail::pixel_color(img, i);

  const double beta = detail::smoothness_beta(img);
  const double gamma = params.gamma;
  // Hard links must dominate any sum of smoothness weights around a pixel.
  const double hard = 1.0 + 8.0 * gamma;

  // Smoothness edges depend only on the image, so build them once.
  std::vector<FlowEdge> nlinks;
  nlinks.reserve(4 * n);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x)
      for (const auto& o : detail::kHalfNeighbors) {
        const int yy = y + o.dy, xx = x + o.dx;
        if (yy >= H || xx < 0 || xx >= W) continue;
        const std::size_t a = static_cast<std::size_t>(y) * W + x;
        const std::size_t b = static_cast<std::size_t>(yy) * W + xx;
        const double w = gamma * o.inv_dist * std::exp(-beta * (colors[a] - colors[b]).squaredNorm());
        nlinks.push_back({static_cast<int>(a), static_cast<int>(b), w, w});
      }

  GmmModel fg_gmm, bg_gmm;
  bool first = true;
  std::vector<Color> fg_colors, bg_colors;
  for (int it = 0; it < params.iterations; ++it) {
    fg_colors.clear();
    bg_colors.clear();
    for (std::size_t i = 0; i < n; ++i) (is_foreground(res.mask.labels[i]) ? fg_colors : bg_colors).push_back(colors[i]);
    if (fg_colors.empty()) break;  // everything already cut to background
    auto fg = detail::fit_side(fg_colors, first ? nullptr : &fg_gmm, params.components, params.cov_eps);
    auto bg = detail::fit_side(bg_colors, first ? nullptr : &bg_gmm, params.components, params.cov_eps);
    fg_gmm = std::move(fg.gmm);
    bg_gmm = std::move(bg.gmm);
    first = false;

    const int source = static_cast<int>(n), sink = source + 1;
    FlowGraph g(static_cast<int>(n) + 2, source, sink);
    g.edges.reserve(nlinks.size() + n);
    g.edges.insert(g.edges.end(), nlinks.begin(), nlinks.end());
    for (std::size_t i = 0; i < n; ++i) {
      const auto l = res.mask.labels[i];
      double to_src = 0, to_sink = 0;
      if (l == TrimapLabel::SureBG) {
        to_sink = hard;
      } else if (l == TrimapLabel::SureFG) {
        to_src = hard;
      } else {
        // Cutting the source link labels the pixel BG and costs -log p_bg.
        to_src = -bg_gmm.log_likelihood(colors[i]);
        to_sink = -fg_gmm.log_likelihood(colors[i]);
        const double m = std::min(to_src, to_sink);
        to_src -= m;
        to_sink -= m;
      }
      if (to_src > 0) g.edges.push_back({source, static_cast<int>(i), to_src, 0.0});
      if (to_sink > 0) g.edges.push_back({static_cast<int>(i), sink, to_sink, 0.0});
    }
    const MinCut cut = max_flow_min_cut(g);

    std::size_t changed = 0;
    for (std::size_t i = 0; i < n; ++i) {
      auto& l = res.mask.labels[i];
      if (l == TrimapLabel::SureBG || l == TrimapLabel::SureFG) continue;
      const auto next = cut.source_side[i] ? TrimapLabel::ProbFG : TrimapLabel::ProbBG;
      if (next != l) ++changed;
      l = next;
    }
    res.iterations_run = it + 1;
    if (changed == 0) break;
  }
  return res;
}

}  // namespace sgad::seg
