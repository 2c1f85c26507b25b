#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "sgad/dataset/sample.hpp"
#include "sgad/model.hpp"

namespace sgad::data {

inline constexpr double kStdFloor = 1e-6;

// Global scalar statistics over every pixel and channel of a training set.
struct StandardizationStats {
  double mean = 0;
  double stddev = 1;
  bool clamped = false;  // the population std fell below kStdFloor

  float apply(float v) const { return static_cast<float>((v - mean) / stddev); }
  float invert(float v) const { return static_cast<float>(v * stddev + mean); }
};

// Two-pass population statistics, accumulated in double.
inline StandardizationStats fit_standardization(std::span<const Sample> train) {
  SGAD_REQUIRE(!train.empty(), InvalidArgument, "fit_standardization: empty training set");
  double sum = 0;
  std::size_t n = 0;
  for (const auto& s : train) {
    for (float v : s.image.data) sum += v;
    n += s.image.data.size();
  }
  SGAD_REQUIRE(n > 0, InvalidArgument, "fit_standardization: training images are empty");
  StandardizationStats st;
  st.mean = sum / static_cast<double>(n);
  double sq = 0;
  for (const auto& s : train)
    for (float v : s.image.data) sq += (v - st.mean) * (v - st.mean);
  st.stddev = std::sqrt(sq / static_cast<double>(n));
  if (st.stddev < kStdFloor) {
    st.stddev = kStdFloor;
    st.clamped = true;
  }
  return st;
}

inline std::vector<Sample> apply_standardization(const StandardizationStats& st, std::span<const Sample> samples) {
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out)
    for (float& v : s.image.data) v = st.apply(v);
  return out;
}

inline std::vector<Sample> invert_standardization(const StandardizationStats& st, std::span<const Sample> samples) {
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out)
    for (float& v : s.image.data) v = st.invert(v);
  return out;
}

// Model input mapping: standardize with the training statistics, then stretch
// the standardized training range onto [-1, 1] to match the tanh decoders.
inline InputTransform fit_input_transform(std::span<const Sample> train) {
  const auto st = fit_standardization(train);
  InputTransform t;
  t.mean = static_cast<float>(st.mean);
  t.stddev = static_cast<float>(st.stddev);
  float lo = std::numeric_limits<float>::infinity(), hi = -lo;
  for (const auto& s : train)
    for (float v : s.image.data) {
      const float z = (v - t.mean) / t.stddev;
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  if (hi - lo < 1e-6f) {
    lo -= 1.0f;
    hi += 1.0f;
  }
  t.lo = lo;
  t.hi = hi;
  return t;
}

inline Image to_model_domain(const InputTransform& t, const Image& img) {
  Image out = img;
  for (float& v : out.data) v = t.forward(v);
  return out;
}

inline Image from_model_domain(const InputTransform& t, const Image& img) {
  Image out = img;
  for (float& v : out.data) v = t.inverse(v);
  return out;
}

inline std::vector<Sample> to_model_domain(const InputTransform& t, std::span<const Sample> samples) {
  std::vector<Sample> out(samples.begin(), samples.end());
  for (auto& s : out) s.image = to_model_domain(t, s.image);
  return out;
}

}  // namespace sgad::data
