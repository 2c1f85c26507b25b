#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "sgad/nn/tensor.hpp"

namespace sgad::nn {

enum class Mode { Train, Eval };

template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;

  std::size_t size() const { return value.size(); }
};

template <typename T>
Param<T> make_param(std::string name, std::vector<int> shape, T fill = T(0)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return Param<T>{std::move(name), std::move(shape), std::vector<T>(n, fill)};
}

namespace detail {

// Output indices o in [lo, hi) whose input index o*s - p + kk lands in [0, n).
inline void valid_range(int n, int s, int p, int kk, int out, int& lo, int& hi) {
  const int off = kk - p;  // input index = o*s + off
  lo = off >= 0 ? 0 : (-off + s - 1) / s;
  hi = n - 1 - off < 0 ? 0 : (n - 1 - off) / s + 1;
  hi = std::min(hi, out);
  lo = std::min(lo, hi);
}

// img (C, N, H, W) -> col (C*k*k, N*Ho*Wo); zero padding.
template <typename T>
void im2col(const T* img, int C, int N, int H, int W, int k, int s, int p, int Ho, int Wo, T* col) {
  const std::size_t cols = static_cast<std::size_t>(N) * Ho * Wo;
  for (int ci = 0; ci < C; ++ci)
    for (int ky = 0; ky < k; ++ky) {
      int oy_lo, oy_hi;
      valid_range(H, s, p, ky, Ho, oy_lo, oy_hi);
      for (int kx = 0; kx < k; ++kx) {
        int ox_lo, ox_hi;
        valid_range(W, s, p, kx, Wo, ox_lo, ox_hi);
        T* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * cols;
        for (int ni = 0; ni < N; ++ni) {
          const T* plane = img + (static_cast<std::size_t>(ci) * N + ni) * H * W;
          T* base = row + static_cast<std::size_t>(ni) * Ho * Wo;
          std::fill(base, base + static_cast<std::size_t>(oy_lo) * Wo, T(0));
          std::fill(base + static_cast<std::size_t>(oy_hi) * Wo, base + static_cast<std::size_t>(Ho) * Wo, T(0));
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            T* dst = base + static_cast<std::size_t>(oy) * Wo;
            const T* src = plane + static_cast<std::size_t>(oy * s - p + ky) * W + (kx - p);
            for (int ox = 0; ox < ox_lo; ++ox) dst[ox] = T(0);
            if (s == 1) {
              std::copy(src + ox_lo, src + ox_hi, dst + ox_lo);
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox] = src[ox * s];
            }
            for (int ox = ox_hi; ox < Wo; ++ox) dst[ox] = T(0);
          }
        }
      }
    }
}

// Adjoint of im2col: accumulates col (C*k*k, N*Ho*Wo) into img (C, N, H, W).
template <typename T>
void col2im(const T* col, int C, int N, int H, int W, int k, int s, int p, int Ho, int Wo, T* img) {
  const std::size_t cols = static_cast<std::size_t>(N) * Ho * Wo;
  std::fill(img, img + static_cast<std::size_t>(C) * N * H * W, T(0));
  for (int ci = 0; ci < C; ++ci)
    for (int ky = 0; ky < k; ++ky) {
      int oy_lo, oy_hi;
      valid_range(H, s, p, ky, Ho, oy_lo, oy_hi);
      for (int kx = 0; kx < k; ++kx) {
        int ox_lo, ox_hi;
        valid_range(W, s, p, kx, Wo, ox_lo, ox_hi);
        const T* row = col + (static_cast<std::size_t>(ci * k + ky) * k + kx) * cols;
        for (int ni = 0; ni < N; ++ni) {
          T* plane = img + (static_cast<std::size_t>(ci) * N + ni) * H * W;
          for (int oy = oy_lo; oy < oy_hi; ++oy) {
            const T* src = row + (static_cast<std::size_t>(ni) * Ho + oy) * Wo;
            T* dst = plane + static_cast<std::size_t>(oy * s - p + ky) * W + (kx - p);
            for (int ox = ox_lo; ox < ox_hi; ++ox) dst[ox * s] += src[ox];
          }
        }
      }
    }
}

}  // namespace detail

// Bias-free 2D convolution; weight layout (out, in, k, k).
template <typename T>
struct Conv2d {
  int in_c = 0, out_c = 0, k = 4, stride = 2, pad = 1;
  Param<T> weight;

  Conv2d() = default;
  Conv2d(std::string name, int in, int out, int k_, int s, int p)
      : in_c(in), out_c(out), k(k_), stride(s), pad(p),
        weight(make_param<T>(std::move(name) + ".weight", {out, in, k_, k_})) {}

  int out_size(int n) const { return (n + 2 * pad - k) / stride + 1; }

  Tensor<T> forward(const Tensor<T>& x) const {
    SGAD_REQUIRE(x.c == in_c, ShapeError, "Conv2d: channel mismatch in " + weight.name);
    const int ho = out_size(x.h), wo = out_size(x.w);
    SGAD_REQUIRE(ho > 0 && wo > 0, ShapeError, "Conv2d: input too small for " + weight.name);
    const Eigen::Index kk = static_cast<Eigen::Index>(in_c) * k * k;
    const Eigen::Index cols = static_cast<Eigen::Index>(x.n) * ho * wo;
    std::vector<T> col(static_cast<std::size_t>(kk * cols));
    detail::im2col(x.data.data(), in_c, x.n, x.h, x.w, k, stride, pad, ho, wo, col.data());
    Tensor<T> y(out_c, x.n, ho, wo);
    ConstMatrixMap<T> wm(weight.value.data(), out_c, kk);
    ConstMatrixMap<T> cm(col.data(), kk, cols);
    y.matrix().noalias() = wm * cm;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, std::vector<T>* dweight, bool need_dx) const {
    const int ho = dy.h, wo = dy.w;
    const Eigen::Index kk = static_cast<Eigen::Index>(in_c) * k * k;
    const Eigen::Index cols = static_cast<Eigen::Index>(x.n) * ho * wo;
    Tensor<T> dx;
    std::vector<T> col(static_cast<std::size_t>(kk * cols));
    ConstMatrixMap<T> dym(dy.data.data(), out_c, cols);
    if (dweight) {
      detail::im2col(x.data.data(), in_c, x.n, x.h, x.w, k, stride, pad, ho, wo, col.data());
      ConstMatrixMap<T> cm(col.data(), kk, cols);
      MatrixMap<T> dw(dweight->data(), out_c, kk);
      dw.noalias() += dym * cm.transpose();
    }
    if (need_dx) {
      ConstMatrixMap<T> wm(weight.value.data(), out_c, kk);
      MatrixMap<T> dcol(col.data(), kk, cols);
      dcol.noalias() = wm.transpose() * dym;
      dx = Tensor<T>(in_c, x.n, x.h, x.w);
      detail::col2im(col.data(), in_c, x.n, x.h, x.w, k, stride, pad, ho, wo, dx.data.data());
    }
    return dx;
  }
};

// Bias-free transposed convolution; weight layout (in, out, k, k).
template <typename T>
struct ConvTranspose2d {
  int in_c = 0, out_c = 0, k = 4, stride = 2, pad = 1;
  Param<T> weight;

  ConvTranspose2d() = default;
  ConvTranspose2d(std::string name, int in, int out, int k_, int s, int p)
      : in_c(in), out_c(out), k(k_), stride(s), pad(p),
        weight(make_param<T>(std::move(name) + ".weight", {in, out, k_, k_})) {}

  int out_size(int n) const { return (n - 1) * stride - 2 * pad + k; }

  Tensor<T> forward(const Tensor<T>& x) const {
    SGAD_REQUIRE(x.c == in_c, ShapeError, "ConvTranspose2d: channel mismatch in " + weight.name);
    const int ho = out_size(x.h), wo = out_size(x.w);
    const Eigen::Index kk = static_cast<Eigen::Index>(out_c) * k * k;
    const Eigen::Index cols = static_cast<Eigen::Index>(x.n) * x.h * x.w;
    std::vector<T> col(static_cast<std::size_t>(kk * cols));
    ConstMatrixMap<T> wm(weight.value.data(), in_c, kk);
    MatrixMap<T> cm(col.data(), kk, cols);
    cm.noalias() = wm.transpose() * x.matrix();
    Tensor<T> y(out_c, x.n, ho, wo);
    detail::col2im(col.data(), out_c, x.n, ho, wo, k, stride, pad, x.h, x.w, y.data.data());
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& dy, std::vector<T>* dweight, bool need_dx) const {
    const Eigen::Index kk = static_cast<Eigen::Index>(out_c) * k * k;
    const Eigen::Index cols = static_cast<Eigen::Index>(x.n) * x.h * x.w;
    std::vector<T> col(static_cast<std::size_t>(kk * cols));
    detail::im2col(dy.data.data(), out_c, x.n, dy.h, dy.w, k, stride, pad, x.h, x.w, col.data());
    ConstMatrixMap<T> cm(col.data(), kk, cols);
    if (dweight) {
      MatrixMap<T> dw(dweight->data(), in_c, kk);
      dw.noalias() += x.matrix() * cm.transpose();
    }
    Tensor<T> dx;
    if (need_dx) {
      ConstMatrixMap<T> wm(weight.value.data(), in_c, kk);
      dx = Tensor<T>(in_c, x.n, x.h, x.w);
      dx.matrix().noalias() = wm * cm;
    }
    return dx;
  }
};

template <typename T>
struct BatchNormCache {
  std::vector<T> mean;     // batch mean per channel
  std::vector<T> var;      // biased batch variance per channel
  std::vector<T> inv_std;  // 1/sqrt(var + eps) of whichever statistics were used
  Tensor<T> xhat;
};

// Per-channel normalisation. Train mode uses batch statistics; eval mode uses
// the running estimates, so eval outputs do not depend on batch composition.
template <typename T>
struct BatchNorm2d {
  int channels = 0;
  T eps = T(1e-5);
  Param<T> gamma, beta;
  std::vector<T> running_mean, running_var;

  BatchNorm2d() = default;
  BatchNorm2d(const std::string& name, int ch)
      : channels(ch),
        gamma(make_param<T>(name + ".gamma", {ch}, T(1))),
        beta(make_param<T>(name + ".beta", {ch}, T(0))),
        running_mean(ch, T(0)),
        running_var(ch, T(1)) {}

  Tensor<T> forward(const Tensor<T>& x, Mode mode, BatchNormCache<T>* cache) const {
    SGAD_REQUIRE(x.c == channels, ShapeError, "BatchNorm2d: channel mismatch in " + gamma.name);
    const std::size_t m = x.plane();
    BatchNormCache<T> local;
    BatchNormCache<T>& c = cache ? *cache : local;
    c.mean.assign(channels, T(0));
    c.var.assign(channels, T(0));
    c.inv_std.assign(channels, T(0));
    c.xhat = Tensor<T>(x.c, x.n, x.h, x.w);
    Tensor<T> y(x.c, x.n, x.h, x.w);
    for (int ci = 0; ci < channels; ++ci) {
      const T* src = &x.data[ci * m];
      T mu, var;
      if (mode == Mode::Train) {
        T acc = 0;
        for (std::size_t i = 0; i < m; ++i) acc += src[i];
        mu = acc / static_cast<T>(m);
        T acc2 = 0;
        for (std::size_t i = 0; i < m; ++i) acc2 += (src[i] - mu) * (src[i] - mu);
        var = acc2 / static_cast<T>(m);
      } else {
        mu = running_mean[ci];
        var = running_var[ci];
      }
      const T inv = T(1) / std::sqrt(var + eps);
      c.mean[ci] = mu;
      c.var[ci] = var;
      c.inv_std[ci] = inv;
      T* xh = &c.xhat.data[ci * m];
      T* dst = &y.data[ci * m];
      const T g = gamma.value[ci], b = beta.value[ci];
      for (std::size_t i = 0; i < m; ++i) {
        xh[i] = (src[i] - mu) * inv;
        dst[i] = g * xh[i] + b;
      }
    }
    return y;
  }

  Tensor<T> backward(const BatchNormCache<T>& c, Mode mode, const Tensor<T>& dy, std::vector<T>* dgamma,
                     std::vector<T>* dbeta, bool need_dx) const {
    const std::size_t m = dy.plane();
    Tensor<T> dx;
    if (need_dx) dx = Tensor<T>(dy.c, dy.n, dy.h, dy.w);
    for (int ci = 0; ci < channels; ++ci) {
      const T* g = &dy.data[ci * m];
      const T* xh = &c.xhat.data[ci * m];
      T sum_dy = 0, sum_dy_xh = 0;
      for (std::size_t i = 0; i < m; ++i) {
        sum_dy += g[i];
        sum_dy_xh += g[i] * xh[i];
      }
      if (dgamma) (*dgamma)[ci] += sum_dy_xh;
      if (dbeta) (*dbeta)[ci] += sum_dy;
      if (!need_dx) continue;
      T* d = &dx.data[ci * m];
      const T scale = gamma.value[ci] * c.inv_std[ci];
      if (mode == Mode::Train) {
        const T inv_m = T(1) / static_cast<T>(m);
        for (std::size_t i = 0; i < m; ++i) d[i] = scale * (g[i] - inv_m * sum_dy - xh[i] * inv_m * sum_dy_xh);
      } else {
        for (std::size_t i = 0; i < m; ++i) d[i] = scale * g[i];
      }
    }
    return dx;
  }

  // Exponential moving average with unbiased variance.
  void update_running(const BatchNormCache<T>& c, std::size_t m, T momentum) {
    const T unbias = m > 1 ? static_cast<T>(m) / static_cast<T>(m - 1) : T(1);
    for (int ci = 0; ci < channels; ++ci) {
      running_mean[ci] = (T(1) - momentum) * running_mean[ci] + momentum * c.mean[ci];
      running_var[ci] = (T(1) - momentum) * running_var[ci] + momentum * c.var[ci] * unbias;
    }
  }
};

enum class ActKind { ReLU, LeakyReLU, Tanh, Sigmoid };

template <typename T>
struct Activation {
  ActKind kind = ActKind::ReLU;
  T slope = T(0.2);

  T apply(T v) const {
    switch (kind) {
      case ActKind::ReLU: return v > T(0) ? v : T(0);
      case ActKind::LeakyReLU: return v > T(0) ? v : slope * v;
      case ActKind::Tanh: return std::tanh(v);
      case ActKind::Sigmoid: return T(1) / (T(1) + std::exp(-v));
    }
    return v;
  }

  // Derivative expressed through input v and output y.
  T derivative(T v, T y) const {
    switch (kind) {
      case ActKind::ReLU: return v > T(0) ? T(1) : T(0);
      case ActKind::LeakyReLU: return v > T(0) ? T(1) : slope;
      case ActKind::Tanh: return T(1) - y * y;
      case ActKind::Sigmoid: return y * (T(1) - y);
    }
    return T(1);
  }

  Tensor<T> forward(const Tensor<T>& x) const {
    Tensor<T> y = x;
    auto each = [&](auto f) {
      for (T& v : y.data) v = f(v);
    };
    switch (kind) {
      case ActKind::ReLU: each([](T v) { return v > T(0) ? v : T(0); }); break;
      case ActKind::LeakyReLU: each([a = slope](T v) { return v > T(0) ? v : a * v; }); break;
      case ActKind::Tanh: each([](T v) { return std::tanh(v); }); break;
      case ActKind::Sigmoid: each([](T v) { return T(1) / (T(1) + std::exp(-v)); }); break;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& x, const Tensor<T>& y, const Tensor<T>& dy) const {
    Tensor<T> dx = dy;
    const std::size_t n = dx.data.size();
    T* d = dx.data.data();
    const T* xi = x.data.data();
    const T* yo = y.data.data();
    switch (kind) {
      case ActKind::ReLU:
        for (std::size_t i = 0; i < n; ++i) d[i] = xi[i] > T(0) ? d[i] : T(0);
        break;
      case ActKind::LeakyReLU:
        for (std::size_t i = 0; i < n; ++i) d[i] = xi[i] > T(0) ? d[i] : slope * d[i];
        break;
      case ActKind::Tanh:
        for (std::size_t i = 0; i < n; ++i) d[i] *= T(1) - yo[i] * yo[i];
        break;
      case ActKind::Sigmoid:
        for (std::size_t i = 0; i < n; ++i) d[i] *= yo[i] * (T(1) - yo[i]);
        break;
    }
    return dx;
  }
};

}  // namespace sgad::nn
