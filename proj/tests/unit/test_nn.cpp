#include <gtest/gtest.h>

#include <random>

#include "../support/gradcheck.hpp"
#include "sgad/nn/network.hpp"

using namespace sgad;
using namespace sgad::nn;
using sgad::testing::check_network;
using sgad::testing::random_tensor;
using sgad::testing::random_values;

namespace {

template <typename T>
struct Tol;
template <>
struct Tol<float> {
  static constexpr double value = 1e-2;
};
template <>
struct Tol<double> {
  static constexpr double value = 1e-4;
};

// Direct six-loop convolution.
Tensor<double> direct_conv(const Conv2d<double>& c, const Tensor<double>& x) {
  const int ho = c.out_size(x.h), wo = c.out_size(x.w);
  Tensor<double> y(c.out_c, x.n, ho, wo);
  for (int o = 0; o < c.out_c; ++o)
    for (int n = 0; n < x.n; ++n)
      for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
          double s = 0;
          for (int i = 0; i < c.in_c; ++i)
            for (int ky = 0; ky < c.k; ++ky)
              for (int kx = 0; kx < c.k; ++kx) {
                const int iy = oy * c.stride - c.pad + ky, ix = ox * c.stride - c.pad + kx;
                if (iy < 0 || ix < 0 || iy >= x.h || ix >= x.w) continue;
                s += c.weight.value[((o * c.in_c + i) * c.k + ky) * c.k + kx] * x.at(i, n, iy, ix);
              }
          y.at(o, n, oy, ox) = s;
        }
  return y;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

template <typename T>
void expect_checks_pass(const std::vector<sgad::testing::GradCheck>& checks) {
  for (const auto& c : checks) EXPECT_LT(c.error, Tol<T>::value) << c.what;
}

template <typename T>
class LayerGradient : public ::testing::Test {};
using Precisions = ::testing::Types<float, double>;
TYPED_TEST_SUITE(LayerGradient, Precisions);

}  // namespace

TEST(Conv, MatchesDirectConvolution) {
  std::mt19937_64 rng(1);
  for (auto [k, s, p] : {std::tuple{4, 2, 1}, std::tuple{4, 1, 0}, std::tuple{3, 1, 1}}) {
    Conv2d<double> c("c", 3, 5, k, s, p);
    c.weight.value = random_values<double>(c.weight.size(), rng);
    const auto x = random_tensor<double>(3, 2, 8, 8, rng);
    const auto fast = c.forward(x), slow = direct_conv(c, x);
    ASSERT_TRUE(fast.same_shape(slow));
    for (std::size_t i = 0; i < fast.size(); ++i) EXPECT_NEAR(fast.data[i], slow.data[i], 1e-12);
  }
}

// A transposed convolution is the adjoint of the convolution sharing its
// weights: <conv(x), y> = <x, convT(y)>.
TEST(ConvTranspose, IsAdjointOfConv) {
  std::mt19937_64 rng(2);
  for (auto [k, s, p, n_in] : {std::tuple{4, 2, 1, 8}, std::tuple{4, 1, 0, 4}}) {
    Conv2d<double> c("c", 3, 5, k, s, p);
    c.weight.value = random_values<double>(c.weight.size(), rng);
    ConvTranspose2d<double> t("t", 5, 3, k, s, p);
    t.weight.value = c.weight.value;  // (out,in,k,k) of c is (in,out,k,k) of t
    const auto x = random_tensor<double>(3, 2, n_in, n_in, rng);
    const auto cx = c.forward(x);
    const auto y = random_tensor<double>(cx.c, cx.n, cx.h, cx.w, rng);
    const auto ty = t.forward(y);
    ASSERT_TRUE(ty.same_shape(x));
    EXPECT_NEAR(dot(cx, y), dot(x, ty), 1e-9 * std::abs(dot(cx, y)) + 1e-12);
  }
}

TEST(ConvTranspose, OutputSizes) {
  ConvTranspose2d<float> a("a", 4, 2, 4, 1, 0), b("b", 4, 2, 4, 2, 1);
  EXPECT_EQ(a.out_size(1), 4);
  EXPECT_EQ(b.out_size(4), 8);
  Conv2d<float> c("c", 2, 4, 4, 2, 1), d("d", 2, 4, 4, 1, 0);
  EXPECT_EQ(c.out_size(8), 4);
  EXPECT_EQ(d.out_size(4), 1);
}

TEST(BatchNorm, TrainModeNormalisesEachChannel) {
  std::mt19937_64 rng(3);
  BatchNorm2d<double> bn("bn", 2);
  auto x = random_tensor<double>(2, 3, 4, 4, rng, 5.0);
  for (auto& v : x.data) v += 7.0;
  const auto y = bn.forward(x, Mode::Train, nullptr);
  for (int c = 0; c < 2; ++c) {
    double s = 0, s2 = 0;
    const std::size_t m = y.plane();
    for (std::size_t i = 0; i < m; ++i) {
      const double v = y.data[c * m + i];
      s += v;
      s2 += v * v;
    }
    EXPECT_NEAR(s / m, 0.0, 1e-12);
    EXPECT_NEAR(s2 / m, 1.0, 1e-3);  // eps keeps it slightly below 1
  }
}

TEST(BatchNorm, EvalModeIsBatchIndependent) {
  std::mt19937_64 rng(4);
  BatchNorm2d<float> bn("bn", 2);
  bn.running_mean = {0.5f, -1.0f};
  bn.running_var = {4.0f, 0.25f};
  const auto x = random_tensor<float>(2, 3, 2, 2, rng);
  const auto full = bn.forward(x, Mode::Eval, nullptr);
  Tensor<float> first(2, 1, 2, 2);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i) first.data[c * 4 + i] = x.data[c * 12 + i];
  const auto single = bn.forward(first, Mode::Eval, nullptr);
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < 4; ++i) EXPECT_FLOAT_EQ(single.data[c * 4 + i], full.data[c * 12 + i]);
  EXPECT_NEAR(full.data[0], (x.data[0] - 0.5f) / std::sqrt(4.0f + bn.eps), 1e-6);
}

TEST(BatchNorm, RunningStatsMoveTowardBatchStats) {
  std::mt19937_64 rng(5);
  Sequential<float> net;
  net.add(BatchNorm2d<float>("bn", 1));
  Tensor<float> x(1, 2, 2, 2);
  x.data = {1, 2, 3, 4, 5, 6, 7, 8};
  Tape<float> tape;
  net.forward(x, Mode::Train, &tape);
  net.update_running_stats(tape, 0.1f);
  const auto& bn = std::get<BatchNorm2d<float>>(net.layers[0]);
  EXPECT_NEAR(bn.running_mean[0], 0.45f, 1e-6);
  // Running variance tracks the unbiased estimate (42/7 = 6).
  EXPECT_NEAR(bn.running_var[0], 0.9f + 0.1f * 6.0f, 1e-5);
}

TEST(Activation, ValuesAndRanges) {
  Activation<double> relu{ActKind::ReLU, 0}, leaky{ActKind::LeakyReLU, 0.2}, th{ActKind::Tanh, 0},
      sig{ActKind::Sigmoid, 0};
  EXPECT_EQ(relu.apply(-2.0), 0.0);
  EXPECT_EQ(relu.apply(3.0), 3.0);
  EXPECT_DOUBLE_EQ(leaky.apply(-2.0), -0.4);
  EXPECT_DOUBLE_EQ(sig.apply(0.0), 0.5);
  EXPECT_LT(th.apply(40.0), 1.0 + 1e-15);
  EXPECT_GT(sig.apply(-5.0), 0.0);
}

TYPED_TEST(LayerGradient, Conv2dStrided) {
  using T = TypeParam;
  std::mt19937_64 rng(10);
  Sequential<T> net;
  Conv2d<T> c("conv", 3, 4, 4, 2, 1);
  c.weight.value = random_values<T>(c.weight.size(), rng, 0.5);
  net.add(c);
  expect_checks_pass<T>(check_network(net, random_tensor<T>(3, 2, 8, 8, rng), Mode::Train, 11));
}

TYPED_TEST(LayerGradient, Conv2dValid) {
  using T = TypeParam;
  std::mt19937_64 rng(12);
  Sequential<T> net;
  Conv2d<T> c("conv", 4, 4, 4, 1, 0);
  c.weight.value = random_values<T>(c.weight.size(), rng, 0.5);
  net.add(c);
  expect_checks_pass<T>(check_network(net, random_tensor<T>(4, 2, 4, 4, rng), Mode::Train, 13));
}

TYPED_TEST(LayerGradient, ConvTranspose2dStrided) {
  using T = TypeParam;
  std::mt19937_64 rng(14);
  Sequential<T> net;
  ConvTranspose2d<T> c("deconv", 4, 3, 4, 2, 1);
  c.weight.value = random_values<T>(c.weight.size(), rng, 0.5);
  net.add(c);
  expect_checks_pass<T>(check_network(net, random_tensor<T>(4, 2, 4, 4, rng), Mode::Train, 15));
}

TYPED_TEST(LayerGradient, ConvTranspose2dFromLatent) {
  using T = TypeParam;
  std::mt19937_64 rng(16);
  Sequential<T> net;
  ConvTranspose2d<T> c("deconv", 4, 4, 4, 1, 0);
  c.weight.value = random_values<T>(c.weight.size(), rng, 0.5);
  net.add(c);
  expect_checks_pass<T>(check_network(net, random_tensor<T>(4, 2, 1, 1, rng), Mode::Train, 17));
}

TYPED_TEST(LayerGradient, BatchNormTrainAndEval) {
  using T = TypeParam;
  std::mt19937_64 rng(18);
  Sequential<T> net;
  BatchNorm2d<T> bn("bn", 3);
  bn.gamma.value = random_values<T>(3, rng);
  bn.beta.value = random_values<T>(3, rng);
  bn.running_mean = random_values<T>(3, rng);
  bn.running_var = {T(0.5), T(1.5), T(2.0)};
  net.add(bn);
  const auto x = random_tensor<T>(3, 2, 4, 4, rng);
  expect_checks_pass<T>(check_network(net, x, Mode::Train, 19));
  expect_checks_pass<T>(check_network(net, x, Mode::Eval, 20));
}

TYPED_TEST(LayerGradient, Activations) {
  using T = TypeParam;
  for (ActKind kind : {ActKind::ReLU, ActKind::LeakyReLU, ActKind::Tanh, ActKind::Sigmoid}) {
    std::mt19937_64 rng(21);
    Sequential<T> net;
    net.add(Activation<T>{kind, T(0.2)});
    expect_checks_pass<T>(check_network(net, random_tensor<T>(2, 2, 3, 3, rng), Mode::Train, 22));
  }
}

TYPED_TEST(LayerGradient, StackedEncoderBlock) {
  using T = TypeParam;
  std::mt19937_64 rng(23);
  Sequential<T> net;
  Conv2d<T> c0("c0", 3, 4, 4, 2, 1), c1("c1", 4, 6, 4, 2, 1);
  c0.weight.value = random_values<T>(c0.weight.size(), rng, 0.4);
  c1.weight.value = random_values<T>(c1.weight.size(), rng, 0.4);
  net.add(c0).add(Activation<T>{ActKind::LeakyReLU, T(0.2)}).add(c1).add(BatchNorm2d<T>("bn", 6));
  net.add(Activation<T>{ActKind::Tanh, T(0)});
  expect_checks_pass<T>(check_network(net, random_tensor<T>(3, 2, 8, 8, rng), Mode::Train, 24));
}

TEST(Tensor, SampleMajorRoundTrip) {
  std::mt19937_64 rng(25);
  const auto t = random_tensor<float>(3, 2, 2, 5, rng);
  const auto sm = to_sample_major(t);
  EXPECT_EQ(sm.batch, 2);
  EXPECT_EQ(sm.dim, 30);
  EXPECT_EQ(sm.row(1)[0], t.at(0, 1, 0, 0));
  EXPECT_EQ(sm.row(1)[10], t.at(1, 1, 0, 0));
  const auto back = from_sample_major(sm, 3, 2, 5);
  EXPECT_EQ(back.data, t.data);
  EXPECT_THROW(from_sample_major(sm, 3, 2, 4), ShapeError);
}

TEST(Tensor, ImagesRoundTrip) {
  std::vector<Image> imgs(2, Image(3, 4, 3));
  for (std::size_t i = 0; i < imgs[0].data.size(); ++i) {
    imgs[0].data[i] = static_cast<float>(i);
    imgs[1].data[i] = -static_cast<float>(i);
  }
  const auto t = images_to_tensor<float>(imgs);
  EXPECT_EQ(t.at(2, 0, 1, 3), imgs[0].at(1, 3, 2));
  const auto back = tensor_to_images(t);
  EXPECT_EQ(back[0].data, imgs[0].data);
  EXPECT_EQ(back[1].data, imgs[1].data);
  imgs[1] = Image(3, 3, 3);
  EXPECT_THROW(images_to_tensor<float>(imgs), ShapeError);
}

TEST(Conv, RejectsChannelMismatch) {
  Conv2d<float> c("c", 3, 4, 4, 2, 1);
  EXPECT_THROW(c.forward(Tensor<float>(2, 1, 8, 8)), ShapeError);
}
