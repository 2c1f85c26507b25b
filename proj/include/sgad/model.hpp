#pragma once

// Serial dual-autoencoder GAN: G1 = D1∘E1 and G2 = D2∘E2 chained in series,
// an auxiliary encoder E3 on the second reconstruction, and a discriminator
// that exposes its penultimate feature map.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sgad/image.hpp"
#include "sgad/nn/network.hpp"

namespace sgad {

struct ModelConfig {
  int side = 64;
  int channels = 3;
  int latent_dim = 100;
  int base_width = 16;
  std::uint64_t seed = 0;

  // Number of stride-2 stages; side must equal 4 * 2^stages.
  int stages() const {
    int s = 0;
    for (int v = side; v > 4; v /= 2) ++s;
    return s;
  }

  void validate() const {
    SGAD_REQUIRE(latent_dim >= 1, InvalidArgument, "ModelConfig: latent_dim must be >= 1");
    SGAD_REQUIRE(base_width >= 1, InvalidArgument, "ModelConfig: base_width must be >= 1");
    SGAD_REQUIRE(channels >= 1, InvalidArgument, "ModelConfig: channels must be >= 1");
    SGAD_REQUIRE(side >= 8 && (4 << stages()) == side, InvalidArgument,
                 "ModelConfig: side must be 4 * 2^k with k >= 1 (got " + std::to_string(side) + ")");
  }

  // Channel count of the 4x4 map at the bottom of the encoder.
  int top_width() const { return base_width << (stages() - 1); }
  int feature_length() const { return top_width() * 16; }

  bool operator==(const ModelConfig&) const = default;
};

// Affine map from [0,1] pixels into the model domain: standardize with the
// training mean/std, then rescale the standardized training range onto [-1,1].
struct InputTransform {
  float mean = 0.5f;
  float stddev = 0.5f;
  float lo = -1.0f;  // min of standardized training pixels
  float hi = 1.0f;   // max of standardized training pixels

  float forward(float v) const {
    const float s = (v - mean) / stddev;
    return 2.0f * (s - lo) / (hi - lo) - 1.0f;
  }
  float inverse(float m) const {
    const float s = (m + 1.0f) * 0.5f * (hi - lo) + lo;
    return s * stddev + mean;
  }
  bool operator==(const InputTransform&) const = default;
};

struct AdamMoments {
  std::vector<std::vector<float>> m, v;
  std::int64_t step = 0;
};

enum class EncoderId { E1, E2, E3 };
enum class DecoderId { D1, D2 };

struct LatentVector {
  std::vector<float> values;
  bool operator==(const LatentVector&) const = default;
};

struct DiscOutput {
  float prob = 0.5f;
  std::vector<float> features;
};

namespace arch {

template <typename T>
nn::Sequential<T> encoder_trunk(const std::string& name, const ModelConfig& cfg) {
  nn::Sequential<T> net;
  int width = cfg.base_width;
  net.add(nn::Conv2d<T>(name + ".conv0", cfg.channels, width, 4, 2, 1));
  net.add(nn::Activation<T>{nn::ActKind::LeakyReLU, T(0.2)});
  for (int s = 1; s < cfg.stages(); ++s) {
    net.add(nn::Conv2d<T>(name + ".conv" + std::to_string(s), width, width * 2, 4, 2, 1));
    net.add(nn::BatchNorm2d<T>(name + ".bn" + std::to_string(s), width * 2));
    net.add(nn::Activation<T>{nn::ActKind::LeakyReLU, T(0.2)});
    width *= 2;
  }
  return net;
}

template <typename T>
nn::Sequential<T> encoder(const std::string& name, const ModelConfig& cfg) {
  nn::Sequential<T> net = encoder_trunk<T>(name, cfg);
  net.add(nn::Conv2d<T>(name + ".latent", cfg.top_width(), cfg.latent_dim, 4, 1, 0));
  return net;
}

template <typename T>
nn::Sequential<T> decoder(const std::string& name, const ModelConfig& cfg) {
  nn::Sequential<T> net;
  int width = cfg.top_width();
  net.add(nn::ConvTranspose2d<T>(name + ".deconv0", cfg.latent_dim, width, 4, 1, 0));
  net.add(nn::BatchNorm2d<T>(name + ".bn0", width));
  net.add(nn::Activation<T>{nn::ActKind::ReLU, T(0)});
  for (int s = 1; s < cfg.stages(); ++s) {
    net.add(nn::ConvTranspose2d<T>(name + ".deconv" + std::to_string(s), width, width / 2, 4, 2, 1));
    net.add(nn::BatchNorm2d<T>(name + ".bn" + std::to_string(s), width / 2));
    net.add(nn::Activation<T>{nn::ActKind::ReLU, T(0)});
    width /= 2;
  }
  net.add(nn::ConvTranspose2d<T>(name + ".out", width, cfg.channels, 4, 2, 1));
  net.add(nn::Activation<T>{nn::ActKind::Tanh, T(0)});
  return net;
}

template <typename T>
nn::Sequential<T> disc_head(const std::string& name, const ModelConfig& cfg) {
  nn::Sequential<T> net;
  net.add(nn::Conv2d<T>(name + ".classifier", cfg.top_width(), 1, 4, 1, 0));
  net.add(nn::Activation<T>{nn::ActKind::Sigmoid, T(0)});
  return net;
}

}  // namespace arch

template <typename T>
struct GanModel {
  ModelConfig config;
  InputTransform transform;
  nn::Sequential<T> e1, d1, e2, d2, e3;
  nn::Sequential<T> disc_features, disc_head;

  AdamMoments gen_opt, disc_opt;
  std::int64_t epoch = 0;

  // Fixed order used for optimizer moments and checkpoints.
  std::vector<nn::Sequential<T>*> generator_nets() { return {&e1, &d1, &e2, &d2, &e3}; }
  std::vector<nn::Sequential<T>*> discriminator_nets() { return {&disc_features, &disc_head}; }
  std::vector<const nn::Sequential<T>*> generator_nets() const { return {&e1, &d1, &e2, &d2, &e3}; }
  std::vector<const nn::Sequential<T>*> discriminator_nets() const { return {&disc_features, &disc_head}; }

  std::vector<nn::Sequential<T>*> all_nets() {
    auto g = generator_nets();
    for (auto* d : discriminator_nets()) g.push_back(d);
    return g;
  }
  std::vector<const nn::Sequential<T>*> all_nets() const {
    auto g = generator_nets();
    for (auto* d : discriminator_nets()) g.push_back(d);
    return g;
  }

  const nn::Sequential<T>& encoder(EncoderId id) const {
    return id == EncoderId::E1 ? e1 : id == EncoderId::E2 ? e2 : e3;
  }
  const nn::Sequential<T>& decoder(DecoderId id) const { return id == DecoderId::D1 ? d1 : d2; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* net : all_nets()) n += net->parameter_count();
    return n;
  }
};

using ModelState = GanModel<float>;

template <typename T = float>
GanModel<T> build_model(const ModelConfig& cfg) {
  cfg.validate();
  GanModel<T> m;
  m.config = cfg;
  m.e1 = arch::encoder<T>("e1", cfg);
  m.d1 = arch::decoder<T>("d1", cfg);
  m.e2 = arch::encoder<T>("e2", cfg);
  m.d2 = arch::decoder<T>("d2", cfg);
  m.e3 = arch::encoder<T>("e3", cfg);
  m.disc_features = arch::encoder_trunk<T>("disc", cfg);
  m.disc_head = arch::disc_head<T>("disc", cfg);
  return m;
}

inline void reset_moments(AdamMoments& opt, const std::vector<const nn::Sequential<float>*>& nets) {
  opt.m.clear();
  opt.v.clear();
  opt.step = 0;
  for (const auto* net : nets)
    for (const auto* p : net->params()) {
      opt.m.emplace_back(p->size(), 0.0f);
      opt.v.emplace_back(p->size(), 0.0f);
    }
}

// Fresh model with N(0, 0.02) weights drawn from a single seeded stream.
inline ModelState init_model(const ModelConfig& cfg) {
  ModelState m = build_model<float>(cfg);
  std::mt19937_64 rng(cfg.seed);
  for (auto* net : m.all_nets()) net->init_weights(rng);
  reset_moments(m.gen_opt, std::as_const(m).generator_nets());
  reset_moments(m.disc_opt, std::as_const(m).discriminator_nets());
  return m;
}

template <typename To, typename From>
GanModel<To> cast_model(const GanModel<From>& src) {
  GanModel<To> m;
  m.config = src.config;
  m.transform = src.transform;
  m.e1 = nn::cast_network<To>(src.e1);
  m.d1 = nn::cast_network<To>(src.d1);
  m.e2 = nn::cast_network<To>(src.e2);
  m.d2 = nn::cast_network<To>(src.d2);
  m.e3 = nn::cast_network<To>(src.e3);
  m.disc_features = nn::cast_network<To>(src.disc_features);
  m.disc_head = nn::cast_network<To>(src.disc_head);
  m.epoch = src.epoch;
  return m;
}

// Tensor-level generator pass, with tapes when gradients are needed.
template <typename T>
struct GeneratorPass {
  nn::Tensor<T> x, x1, x2;  // x, x' = G1(x), x'' = G2(x')
  nn::Tensor<T> z, z1, z2;  // z = E1(x), z' = E2(x'), z'' = E3(x'')
  nn::Tape<T> t_e1, t_d1, t_e2, t_d2, t_e3;
};

template <typename T>
GeneratorPass<T> run_generator(const GanModel<T>& m, const nn::Tensor<T>& x, nn::Mode mode, bool record) {
  SGAD_REQUIRE(x.c == m.config.channels && x.h == m.config.side && x.w == m.config.side, ShapeError,
               "generator: input does not match model side/channels");
  GeneratorPass<T> p;
  p.x = x;
  p.z = m.e1.forward(x, mode, record ? &p.t_e1 : nullptr);
  p.x1 = m.d1.forward(p.z, mode, record ? &p.t_d1 : nullptr);
  p.z1 = m.e2.forward(p.x1, mode, record ? &p.t_e2 : nullptr);
  p.x2 = m.d2.forward(p.z1, mode, record ? &p.t_d2 : nullptr);
  p.z2 = m.e3.forward(p.x2, mode, record ? &p.t_e3 : nullptr);
  return p;
}

template <typename T>
struct DiscPass {
  nn::Tensor<T> features, prob;
  nn::Tape<T> t_features, t_head;
};

template <typename T>
DiscPass<T> run_discriminator(const GanModel<T>& m, const nn::Tensor<T>& x, nn::Mode mode, bool record) {
  SGAD_REQUIRE(x.c == m.config.channels && x.h == m.config.side && x.w == m.config.side, ShapeError,
               "discriminator: input does not match model side/channels");
  DiscPass<T> p;
  p.features = m.disc_features.forward(x, mode, record ? &p.t_features : nullptr);
  p.prob = m.disc_head.forward(p.features, mode, record ? &p.t_head : nullptr);
  return p;
}

namespace detail {

inline std::vector<LatentVector> to_latents(const nn::Tensor<float>& z) {
  const auto sm = nn::to_sample_major(z);
  std::vector<LatentVector> out(sm.batch);
  for (int i = 0; i < sm.batch; ++i) out[i].values.assign(sm.row(i).begin(), sm.row(i).end());
  return out;
}

inline nn::Tensor<float> from_latents(std::span<const LatentVector> z, int dim) {
  SGAD_REQUIRE(!z.empty(), ShapeError, "decode: empty latent batch");
  nn::SampleMajor<float> sm{static_cast<int>(z.size()), dim, {}};
  for (const auto& v : z) {
    SGAD_REQUIRE(static_cast<int>(v.values.size()) == dim, ShapeError, "decode: latent length mismatch");
    sm.data.insert(sm.data.end(), v.values.begin(), v.values.end());
  }
  return nn::from_sample_major(sm, dim, 1, 1);
}

}  // namespace detail

inline std::vector<LatentVector> encode(const ModelState& m, EncoderId which, std::span<const Image> x,
                                        nn::Mode mode = nn::Mode::Eval) {
  const auto t = nn::images_to_tensor<float>(x);
  SGAD_REQUIRE(t.c == m.config.channels && t.h == m.config.side && t.w == m.config.side, ShapeError,
               "encode: input does not match model side/channels");
  return detail::to_latents(m.encoder(which).forward(t, mode));
}

inline std::vector<Image> decode(const ModelState& m, DecoderId which, std::span<const LatentVector> z,
                                 nn::Mode mode = nn::Mode::Eval) {
  return nn::tensor_to_images(m.decoder(which).forward(detail::from_latents(z, m.config.latent_dim), mode));
}

struct GeneratorOutputs {
  std::vector<Image> x1, x2;            // x', x''
  std::vector<LatentVector> z, z1, z2;  // z, z', z''
};

inline GeneratorOutputs generator_forward(const ModelState& m, std::span<const Image> x,
                                          nn::Mode mode = nn::Mode::Eval) {
  const auto p = run_generator(m, nn::images_to_tensor<float>(x), mode, false);
  return {nn::tensor_to_images(p.x1), nn::tensor_to_images(p.x2), detail::to_latents(p.z),
          detail::to_latents(p.z1), detail::to_latents(p.z2)};
}

inline std::vector<DiscOutput> discriminate(const ModelState& m, std::span<const Image> x,
                                            nn::Mode mode = nn::Mode::Eval) {
  const auto p = run_discriminator(m, nn::images_to_tensor<float>(x), mode, false);
  const auto feats = nn::to_sample_major(p.features);
  std::vector<DiscOutput> out(feats.batch);
  for (int i = 0; i < feats.batch; ++i) {
    out[i].prob = p.prob.data[i];
    out[i].features.assign(feats.row(i).begin(), feats.row(i).end());
  }
  return out;
}

}  // namespace sgad
