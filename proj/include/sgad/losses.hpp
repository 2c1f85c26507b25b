#pragma once

// Training objectives. Every batch operand is sample-major: `batch` rows of
// equal length laid end to end. Gradients are optional and are written (not
// accumulated) into the supplied vectors, resized as needed.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sgad/error.hpp"

namespace sgad {

struct LossWeights {
  float adv = 1.0f;
  float rec = 50.0f;
  float lat = 1.0f;
};

// Optional per-term weights inside the reconstruction loss; {1,1,1} is the
// plain three-term average.
struct RecTermWeights {
  double x_g1 = 1.0;
  double x_g2 = 1.0;
  double g1_g2 = 1.0;
};

template <typename T>
struct LossGrads3 {
  std::vector<T> d0, d1, d2;
};

inline constexpr double kProbClamp = 1e-7;

namespace detail {

inline std::size_t row_len(std::size_t total, int batch, const char* what) {
  SGAD_REQUIRE(batch > 0, ShapeError, std::string(what) + ": empty batch");
  SGAD_REQUIRE(total % static_cast<std::size_t>(batch) == 0, ShapeError, std::string(what) + ": ragged batch");
  return total / static_cast<std::size_t>(batch);
}

template <typename T>
void require_equal(std::span<const T> a, std::span<const T> b, const char* what) {
  SGAD_REQUIRE(a.size() == b.size(), ShapeError, std::string(what) + ": shape mismatch");
}

// Adds scale * d/da,d/db of ||a_i - b_i||_2 for every row i; returns sum of norms.
template <typename T>
T pair_l2(std::span<const T> a, std::span<const T> b, int batch, T scale, std::vector<T>* da, std::vector<T>* db) {
  const std::size_t d = a.size() / batch;
  T total = 0;
  for (int i = 0; i < batch; ++i) {
    T sq = 0;
    for (std::size_t j = 0; j < d; ++j) {
      const T diff = a[i * d + j] - b[i * d + j];
      sq += diff * diff;
    }
    const T norm = std::sqrt(sq);
    total += norm;
    if ((da || db) && norm > T(0)) {
      for (std::size_t j = 0; j < d; ++j) {
        const T g = scale * (a[i * d + j] - b[i * d + j]) / norm;
        if (da) (*da)[i * d + j] += g;
        if (db) (*db)[i * d + j] -= g;
      }
    }
  }
  return total;
}

// Adds scale * d/da,d/db of mean_j |a_ij - b_ij| summed over rows; returns that sum.
template <typename T>
T pair_l1(std::span<const T> a, std::span<const T> b, int batch, T scale, std::vector<T>* da, std::vector<T>* db) {
  const std::size_t d = a.size() / batch;
  const T inv_d = T(1) / static_cast<T>(d);
  T total = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const T diff = a[k] - b[k];
    total += std::abs(diff) * inv_d;
    if (da || db) {
      const T g = diff > T(0) ? scale * inv_d : diff < T(0) ? -scale * inv_d : T(0);
      if (da) (*da)[k] += g;
      if (db) (*db)[k] -= g;
    }
  }
  return total;
}

template <typename T>
void prepare(LossGrads3<T>* g, std::size_t n) {
  if (!g) return;
  g->d0.assign(n, T(0));
  g->d1.assign(n, T(0));
  g->d2.assign(n, T(0));
}

}  // namespace detail

// Mean binary cross-entropy; probabilities clamped to [1e-7, 1 - 1e-7].
template <typename T>
T bce(std::span<const T> a, std::span<const T> b, std::vector<T>* da = nullptr) {
  detail::require_equal(a, b, "bce");
  SGAD_REQUIRE(!a.empty(), ShapeError, "bce: empty batch");
  const T lo = static_cast<T>(kProbClamp), hi = T(1) - static_cast<T>(kProbClamp);
  const T inv_n = T(1) / static_cast<T>(a.size());
  if (da) da->assign(a.size(), T(0));
  T total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T p = std::clamp(a[i], lo, hi);
    total -= b[i] * std::log(p) + (T(1) - b[i]) * std::log(T(1) - p);
    if (da && a[i] > lo && a[i] < hi) (*da)[i] = inv_n * (-b[i] / p + (T(1) - b[i]) / (T(1) - p));
  }
  return total * inv_n;
}

// Discriminator objective: real scored as 1, both reconstructions as 0.
template <typename T>
T adv_loss_discriminator(std::span<const T> d_x, std::span<const T> d_g1, std::span<const T> d_g2,
                         LossGrads3<T>* grad = nullptr) {
  detail::require_equal(d_x, d_g1, "adv_loss_discriminator");
  detail::require_equal(d_x, d_g2, "adv_loss_discriminator");
  const std::vector<T> ones(d_x.size(), T(1)), zeros(d_x.size(), T(0));
  return bce<T>(d_x, ones, grad ? &grad->d0 : nullptr) + bce<T>(d_g1, zeros, grad ? &grad->d1 : nullptr) +
         bce<T>(d_g2, zeros, grad ? &grad->d2 : nullptr);
}

// Feature matching: 1/2 * mean_i (||f_x - f_g1|| + ||f_x - f_g2||).
template <typename T>
T adv_loss_generator(std::span<const T> f_x, std::span<const T> f_g1, std::span<const T> f_g2, int batch,
                     LossGrads3<T>* grad = nullptr) {
  detail::require_equal(f_x, f_g1, "adv_loss_generator");
  detail::require_equal(f_x, f_g2, "adv_loss_generator");
  detail::row_len(f_x.size(), batch, "adv_loss_generator");
  detail::prepare(grad, f_x.size());
  const T scale = T(0.5) / static_cast<T>(batch);
  const T sum = detail::pair_l2(f_x, f_g1, batch, scale, grad ? &grad->d0 : nullptr, grad ? &grad->d1 : nullptr) +
                detail::pair_l2(f_x, f_g2, batch, scale, grad ? &grad->d0 : nullptr, grad ? &grad->d2 : nullptr);
  return sum * scale;
}

// 1/3 * mean_i (|x - g1|_1 + |x - g2|_1 + |g1 - g2|_1), each L1 term a mean over elements.
template <typename T>
T rec_loss(std::span<const T> x, std::span<const T> g1, std::span<const T> g2, int batch,
           LossGrads3<T>* grad = nullptr, const RecTermWeights& w = {}) {
  detail::require_equal(x, g1, "rec_loss");
  detail::require_equal(x, g2, "rec_loss");
  detail::row_len(x.size(), batch, "rec_loss");
  detail::prepare(grad, x.size());
  const T base = T(1) / (T(3) * static_cast<T>(batch));
  const T s0 = base * static_cast<T>(w.x_g1), s1 = base * static_cast<T>(w.x_g2), s2 = base * static_cast<T>(w.g1_g2);
  T total = 0;
  total += s0 * detail::pair_l1(x, g1, batch, s0, grad ? &grad->d0 : nullptr, grad ? &grad->d1 : nullptr);
  total += s1 * detail::pair_l1(x, g2, batch, s1, grad ? &grad->d0 : nullptr, grad ? &grad->d2 : nullptr);
  total += s2 * detail::pair_l1(g1, g2, batch, s2, grad ? &grad->d1 : nullptr, grad ? &grad->d2 : nullptr);
  return total;
}

// 1/3 * mean_i (||z - z'|| + ||z - z''|| + ||z' - z''||).
template <typename T>
T lat_loss(std::span<const T> z, std::span<const T> z1, std::span<const T> z2, int batch,
           LossGrads3<T>* grad = nullptr) {
  detail::require_equal(z, z1, "lat_loss");
  detail::require_equal(z, z2, "lat_loss");
  detail::row_len(z.size(), batch, "lat_loss");
  detail::prepare(grad, z.size());
  const T scale = T(1) / (T(3) * static_cast<T>(batch));
  const T sum = detail::pair_l2(z, z1, batch, scale, grad ? &grad->d0 : nullptr, grad ? &grad->d1 : nullptr) +
                detail::pair_l2(z, z2, batch, scale, grad ? &grad->d0 : nullptr, grad ? &grad->d2 : nullptr) +
                detail::pair_l2(z1, z2, batch, scale, grad ? &grad->d1 : nullptr, grad ? &grad->d2 : nullptr);
  return sum * scale;
}

template <typename T>
T total_loss(const LossWeights& w, T adv_g, T rec, T lat) {
  return static_cast<T>(w.adv) * adv_g + static_cast<T>(w.rec) * rec + static_cast<T>(w.lat) * lat;
}

}  // namespace sgad
