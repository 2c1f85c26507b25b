#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>

#include "sgad/image.hpp"
#include "sgad/segmentation/geometry.hpp"

namespace sgad::seg {

using Homography = Eigen::Matrix3d;

// Direct linear solve for the homography taking src[i] to dst[i] (h33 = 1).
inline Homography homography_from_points(const std::array<Point2, 4>& src, const std::array<Point2, 4>& dst) {
  Eigen::Matrix<double, 8, 8> A;
  Eigen::Matrix<double, 8, 1> b;
  for (int i = 0; i < 4; ++i) {
    const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
    A.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
    A.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
    b(2 * i) = u;
    b(2 * i + 1) = v;
  }
  Eigen::FullPivLU<Eigen::Matrix<double, 8, 8>> lu(A);
  SGAD_REQUIRE(lu.isInvertible(), NumericError, "homography: degenerate point configuration");
  const Eigen::Matrix<double, 8, 1> h = lu.solve(b);
  Homography H;
  H << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), 1.0;
  return H;
}

inline Point2 apply(const Homography& H, Point2 p) {
  const Eigen::Vector3d q = H * Eigen::Vector3d(p.x, p.y, 1.0);
  return {q.x() / q.z(), q.y() / q.z()};
}

// Bilinear sample at continuous position (x, y), where pixel (i, j) has its
// centre at (j + 0.5, i + 0.5). Out-of-range taps replicate the border.
inline void sample_bilinear(const Image& img, double x, double y, float* out) {
  const double fx = x - 0.5, fy = y - 0.5;
  const double x0f = std::floor(fx), y0f = std::floor(fy);
  const double ax = fx - x0f, ay = fy - y0f;
  auto cx = [&](double v) { return std::clamp(static_cast<int>(v), 0, img.width - 1); };
  auto cy = [&](double v) { return std::clamp(static_cast<int>(v), 0, img.height - 1); };
  const int x0 = cx(x0f), x1 = cx(x0f + 1), y0 = cy(y0f), y1 = cy(y0f + 1);
  for (int c = 0; c < img.channels; ++c) {
    const double top = (1 - ax) * img.at(y0, x0, c) + ax * img.at(y0, x1, c);
    const double bot = (1 - ax) * img.at(y1, x0, c) + ax * img.at(y1, x1, c);
    out[c] = static_cast<float>((1 - ay) * top + ay * bot);
  }
}

// Warp the region under `rect` to an out_h x out_w image: the rect's corners
// (in corners() order) land on the output's outer corners. Coordinates are
// continuous, so a full-image rect at the input size is the identity.
// Corners outside the image are allowed; samples replicate the border and
// `clamped` (if given) reports it.
inline Image perspective_crop(const Image& img, const RotatedRect& rect, int out_h = 128, int out_w = 128,
                              bool* clamped = nullptr) {
  SGAD_REQUIRE(!img.empty(), InvalidArgument, "perspective_crop: empty image");
  SGAD_REQUIRE(out_h > 0 && out_w > 0, InvalidArgument, "perspective_crop: output size must be positive");
  SGAD_REQUIRE(std::isfinite(rect.area()) && rect.width > 1e-9 && rect.height > 1e-9, InvalidArgument,
               "perspective_crop: zero-area rect");
  const auto src = rect.corners();
  bool outside = false;
  const double tol = 1e-6;
  for (const auto& p : src)
    outside |= p.x < -tol || p.y < -tol || p.x > img.width + tol || p.y > img.height + tol;
  if (clamped) *clamped = outside;

  const std::array<Point2, 4> dst = {Point2{0, 0}, Point2{double(out_w), 0}, Point2{double(out_w), double(out_h)},
                                     Point2{0, double(out_h)}};
  const Homography H = homography_from_points(dst, src);
  Image out(out_h, out_w, img.channels);
  for (int i = 0; i < out_h; ++i)
    for (int j = 0; j < out_w; ++j) {
      const Point2 p = apply(H, {j + 0.5, i + 0.5});
      sample_bilinear(img, p.x, p.y, &out.at(i, j, 0));
    }
  return out;
}

// Bilinear resize with the same pixel-centre convention.
inline Image resize_bilinear(const Image& img, int out_h, int out_w) {
  RotatedRect full{img.width / 2.0, img.height / 2.0, double(img.width), double(img.height), 0.0};
  return perspective_crop(img, full, out_h, out_w);
}

}  // namespace sgad::seg
