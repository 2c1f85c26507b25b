#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "sgad/error.hpp"
#include "sgad/image.hpp"

namespace sgad::nn {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixMap = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixMap = Eigen::Map<const RowMatrix<T>>;

// Activation tensor in channel-major layout: C x N x H x W.
// Viewed as a (C, N*H*W) row-major matrix, convolutions become a single GEMM.
template <typename T>
struct Tensor {
  int c = 0, n = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int c_, int n_, int h_, int w_, T fill = T(0))
      : c(c_), n(n_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * n_ * h_ * w_, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return static_cast<std::size_t>(n) * h * w; }
  std::size_t spatial() const { return static_cast<std::size_t>(h) * w; }

  T& at(int ci, int ni, int y, int x) { return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x]; }
  T at(int ci, int ni, int y, int x) const {
    return data[((static_cast<std::size_t>(ci) * n + ni) * h + y) * w + x];
  }

  MatrixMap<T> matrix() { return MatrixMap<T>(data.data(), c, static_cast<Eigen::Index>(plane())); }
  ConstMatrixMap<T> matrix() const {
    return ConstMatrixMap<T>(data.data(), c, static_cast<Eigen::Index>(plane()));
  }

  bool same_shape(const Tensor& o) const { return c == o.c && n == o.n && h == o.h && w == o.w; }

  Tensor& operator+=(const Tensor& o) {
    SGAD_REQUIRE(same_shape(o), ShapeError, "Tensor += shape mismatch");
    for (std::size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
};

// Per-sample rows: sample i occupies [i*dim, (i+1)*dim), element order (c, y, x).
template <typename T>
struct SampleMajor {
  int batch = 0;
  int dim = 0;
  std::vector<T> data;

  std::span<const T> row(int i) const { return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  std::span<T> row(int i) { return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
};

template <typename T>
SampleMajor<T> to_sample_major(const Tensor<T>& t) {
  SampleMajor<T> out{t.n, static_cast<int>(t.c * t.spatial()), std::vector<T>(t.size())};
  const std::size_t sp = t.spatial();
  for (int ci = 0; ci < t.c; ++ci)
    for (int ni = 0; ni < t.n; ++ni) {
      const T* src = &t.data[(static_cast<std::size_t>(ci) * t.n + ni) * sp];
      T* dst = &out.data[static_cast<std::size_t>(ni) * out.dim + ci * sp];
      std::copy(src, src + sp, dst);
    }
  return out;
}

template <typename T>
Tensor<T> from_sample_major(const SampleMajor<T>& s, int c, int h, int w) {
  SGAD_REQUIRE(s.dim == c * h * w, ShapeError, "from_sample_major: dim mismatch");
  Tensor<T> t(c, s.batch, h, w);
  const std::size_t sp = t.spatial();
  for (int ci = 0; ci < c; ++ci)
    for (int ni = 0; ni < s.batch; ++ni) {
      const T* src = &s.data[static_cast<std::size_t>(ni) * s.dim + ci * sp];
      std::copy(src, src + sp, &t.data[(static_cast<std::size_t>(ci) * s.batch + ni) * sp]);
    }
  return t;
}

template <typename T>
Tensor<T> images_to_tensor(std::span<const Image> batch) {
  SGAD_REQUIRE(!batch.empty(), ShapeError, "images_to_tensor: empty batch");
  const Image& first = batch.front();
  Tensor<T> t(first.channels, static_cast<int>(batch.size()), first.height, first.width);
  for (int ni = 0; ni < t.n; ++ni) {
    const Image& img = batch[ni];
    SGAD_REQUIRE(img.same_shape(first), ShapeError, "images_to_tensor: ragged batch");
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x)
        for (int ci = 0; ci < t.c; ++ci) t.at(ci, ni, y, x) = static_cast<T>(img.at(y, x, ci));
  }
  return t;
}

template <typename T>
std::vector<Image> tensor_to_images(const Tensor<T>& t) {
  std::vector<Image> out;
  out.reserve(t.n);
  for (int ni = 0; ni < t.n; ++ni) {
    Image img(t.h, t.w, t.c);
    for (int y = 0; y < t.h; ++y)
      for (int x = 0; x < t.w; ++x)
        for (int ci = 0; ci < t.c; ++ci) img.at(y, x, ci) = static_cast<float>(t.at(ci, ni, y, x));
    out.push_back(std::move(img));
  }
  return out;
}

template <typename To, typename From>
Tensor<To> cast(const Tensor<From>& t) {
  Tensor<To> out(t.c, t.n, t.h, t.w);
  std::transform(t.data.begin(), t.data.end(), out.data.begin(), [](From v) { return static_cast<To>(v); });
  return out;
}

}  // namespace sgad::nn
