#pragma once

#include <cmath>
#include <string>

#include "sgad/image.hpp"
#include "sgad/segmentation/geometry.hpp"
#include "sgad/segmentation/grabcut.hpp"
#include "sgad/segmentation/histogram.hpp"
#include "sgad/segmentation/morphology.hpp"
#include "sgad/segmentation/warp.hpp"

namespace sgad::seg {

struct PreprocessParams {
  GrabCutParams grabcut;
  double min_foreground_fraction = 0.01;  // of the rect area; below this the cut is treated as empty
  int morph_kernel = 3;
  int out_height = 128;
  int out_width = 128;
};

struct PreprocessResult {
  Image image;          // out_height x out_width x 3, background zeroed
  Image crop_mask;      // same extent, 1 where the output pixel is foreground
  Image mask;           // cleaned full-resolution foreground mask
  RotatedRect rect;
  bool equalized = false;  // the histogram-equalization retry was used
  bool degenerate_rect = false;
  bool clamped = false;

  double background_fraction() const {
    double bg = 0;
    for (float v : crop_mask.data) bg += v < 0.5f;
    return crop_mask.data.empty() ? 0.0 : bg / static_cast<double>(crop_mask.data.size());
  }
};

// GrabCut inside `rect`, retried on the equalized image when the foreground is
// too small, then open + close, minimum-area rotated rect, and a perspective
// crop of the background-zeroed image. Throws NoForegroundError when nothing
// survives.
inline PreprocessResult preprocess(const Image& img, const Box& rect, const PreprocessParams& params = {}) {
  SGAD_REQUIRE(img.channels == 3, InvalidArgument, "preprocess: image must be RGB");
  PreprocessResult out;
  const double floor = params.min_foreground_fraction * static_cast<double>(rect.area());

  GrabCutResult cut = grabcut(img, rect, params.grabcut);
  if (static_cast<double>(cut.mask.foreground_count()) < floor) {
    cut = grabcut(histogram_equalize(img), rect, params.grabcut);
    out.equalized = true;
  }
  if (static_cast<double>(cut.mask.foreground_count()) < floor) throw NoForegroundError();
  out.degenerate_rect = cut.status == GrabCutStatus::DegenerateRect;

  Image mask = cut.mask.to_binary();
  mask = morphology(mask, MorphOp::Open, params.morph_kernel);
  mask = morphology(mask, MorphOp::Close, params.morph_kernel);
  const auto pts = mask_points(mask);
  if (pts.empty()) throw NoForegroundError();
  out.rect = min_area_rect(pts);

  Image masked = img;
  for (std::size_t i = 0; i < mask.pixel_count(); ++i)
    if (mask.data[i] < 0.5f)
      for (int c = 0; c < 3; ++c) masked.data[3 * i + c] = 0.0f;
  out.image = perspective_crop(masked, out.rect, params.out_height, params.out_width, &out.clamped);
  out.crop_mask = perspective_crop(mask, out.rect, params.out_height, params.out_width);
  for (float& v : out.crop_mask.data) v = v >= 0.5f ? 1.0f : 0.0f;
  out.mask = std::move(mask);
  return out;
}

}  // namespace sgad::seg
