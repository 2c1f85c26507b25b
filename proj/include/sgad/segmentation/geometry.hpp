#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "sgad/image.hpp"

namespace sgad::seg {

struct Point2 {
  double x = 0;
  double y = 0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

// Angle in degrees, measured from the +x axis towards +y (image rows grow
// downwards). `width` runs along the angle direction.
struct RotatedRect {
  double cx = 0;
  double cy = 0;
  double width = 0;
  double height = 0;
  double angle = 0;

  double area() const { return width * height; }

  // Corners in rect-local order: (-w,-h), (+w,-h), (+w,+h), (-w,+h) halves.
  std::array<Point2, 4> corners() const {
    const double a = angle * std::numbers::pi / 180.0;
    const double ux = std::cos(a), uy = std::sin(a);
    const double vx = -uy, vy = ux;
    const double hw = width / 2, hh = height / 2;
    auto at = [&](double s, double t) { return Point2{cx + s * hw * ux + t * hh * vx, cy + s * hw * uy + t * hh * vy}; };
    return {at(-1, -1), at(1, -1), at(1, 1), at(-1, 1)};
  }
};

// Unique form: width >= height and angle in [-90, 90). Squares are further
// reduced to angle in [-45, 45).
inline RotatedRect canonicalize(RotatedRect r) {
  if (r.width < r.height) {
    std::swap(r.width, r.height);
    r.angle += 90.0;
  }
  const bool square = std::abs(r.width - r.height) <= 1e-9 * std::max(1.0, r.width);
  const double period = square ? 90.0 : 180.0;
  const double lo = -period / 2;
  r.angle = std::fmod(r.angle - lo, period);
  if (r.angle < 0) r.angle += period;
  r.angle += lo;
  if (r.angle >= lo + period) r.angle = lo;
  return r;
}

namespace detail {

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

}  // namespace detail

// Andrew's monotone chain; counter-clockwise in a y-up frame, collinear points dropped.
inline std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end(), [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && detail::cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && detail::cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Minimum-area enclosing rectangle. One side of the optimum is collinear with a
// hull edge, so trying every edge direction is exact.
inline RotatedRect min_area_rect(const std::vector<Point2>& points) {
  SGAD_REQUIRE(points.size() >= 3, InvalidArgument, "min_area_rect: need at least 3 points");
  for (const auto& p : points)
    SGAD_REQUIRE(std::isfinite(p.x) && std::isfinite(p.y), NumericError, "min_area_rect: non-finite point");
  const auto hull = convex_hull(points);
  SGAD_REQUIRE(hull.size() >= 3, InvalidArgument, "min_area_rect: points are collinear");

  RotatedRect best;
  double best_area = std::numeric_limits<double>::infinity();
  const std::size_t m = hull.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Point2& a = hull[i];
    const Point2& b = hull[(i + 1) % m];
    const double len = std::hypot(b.x - a.x, b.y - a.y);
    const double ux = (b.x - a.x) / len, uy = (b.y - a.y) / len;
    const double vx = -uy, vy = ux;
    double smin = std::numeric_limits<double>::infinity(), smax = -smin, tmin = smin, tmax = -smin;
    for (const auto& p : hull) {
      const double s = p.x * ux + p.y * uy;
      const double t = p.x * vx + p.y * vy;
      smin = std::min(smin, s);
      smax = std::max(smax, s);
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
    const double area = (smax - smin) * (tmax - tmin);
    if (area < best_area) {
      best_area = area;
      const double sc = (smin + smax) / 2, tc = (tmin + tmax) / 2;
      best.cx = sc * ux + tc * vx;
      best.cy = sc * uy + tc * vy;
      best.width = smax - smin;
      best.height = tmax - tmin;
      best.angle = std::atan2(uy, ux) * 180.0 / std::numbers::pi;
    }
  }
  return canonicalize(best);
}

// Points covering every foreground pixel of a {0,1} mask: the four corners of
// each pixel square, in continuous coordinates where pixel (x, y) spans
// [x, x+1) x [y, y+1). Only boundary pixels matter for the hull.
inline std::vector<Point2> mask_points(const Image& mask) {
  SGAD_REQUIRE(mask.channels == 1, InvalidArgument, "mask_points: mask must have one channel");
  std::vector<Point2> pts;
  auto fg = [&](int y, int x) { return y >= 0 && x >= 0 && y < mask.height && x < mask.width && mask.at(y, x) > 0.5f; };
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x) {
      if (!fg(y, x)) continue;
      if (fg(y - 1, x) && fg(y + 1, x) && fg(y, x - 1) && fg(y, x + 1)) continue;
      pts.push_back({double(x), double(y)});
      pts.push_back({double(x + 1), double(y)});
      pts.push_back({double(x + 1), double(y + 1)});
      pts.push_back({double(x), double(y + 1)});
    }
  return pts;
}

}  // namespace sgad::seg
