#pragma once

// Alternating adversarial optimisation over normal-only data: one
// discriminator step on detached reconstructions, then one generator step
// (E1, D1, E2, D2, E3) against the frozen discriminator, per batch.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sgad/dataset/sample.hpp"
#include "sgad/losses.hpp"
#include "sgad/model.hpp"

namespace sgad {

struct ObjectiveConfig {
  LossWeights weights;
  RecTermWeights rec_terms;
  // Generator adversarial term on discriminator features (true) or on its
  // scalar probability (false).
  bool feature_matching = true;
};

struct TrainConfig {
  int batch_size = 32;
  int epochs = 50;
  float lr = 2e-4f;
  float beta1 = 0.5f;
  float beta2 = 0.999f;
  float bn_momentum = 0.1f;
  ObjectiveConfig objective;
  std::uint64_t seed = 0;

  void validate() const {
    SGAD_REQUIRE(batch_size >= 1, InvalidArgument, "TrainConfig: batch_size must be >= 1");
    SGAD_REQUIRE(epochs >= 0, InvalidArgument, "TrainConfig: epochs must be >= 0");
    SGAD_REQUIRE(lr > 0.0f, InvalidArgument, "TrainConfig: lr must be > 0");
    SGAD_REQUIRE(beta1 >= 0.0f && beta1 < 1.0f && beta2 >= 0.0f && beta2 < 1.0f, InvalidArgument,
                 "TrainConfig: betas must lie in [0,1)");
    const auto& w = objective.weights;
    SGAD_REQUIRE(w.adv >= 0 && w.rec >= 0 && w.lat >= 0, InvalidArgument, "TrainConfig: loss weights must be >= 0");
  }
};

struct EpochRecord {
  int epoch = 0;  // 1-based
  double adv_d = 0, adv_g = 0, rec = 0, lat = 0, total = 0;
  double seconds = 0;
};

using TrainLog = std::vector<EpochRecord>;

// Adaptive-moment update with bias correction. `step` is the 1-based index of
// this update.
template <typename T>
void update_step(std::span<T> params, std::span<const T> grads, std::span<T> m, std::span<T> v, std::int64_t step,
                 T lr, T beta1, T beta2, T eps = T(1e-8)) {
  SGAD_REQUIRE(params.size() == grads.size() && params.size() == m.size() && params.size() == v.size(), ShapeError,
               "update_step: shape mismatch");
  SGAD_REQUIRE(step >= 1, InvalidArgument, "update_step: step must be >= 1");
  const T bc1 = T(1) - std::pow(beta1, static_cast<T>(step));
  const T bc2 = T(1) - std::pow(beta2, static_cast<T>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    if (!std::isfinite(g)) throw NumericError("update_step: non-finite gradient");
    m[i] = beta1 * m[i] + (T(1) - beta1) * g;
    v[i] = beta2 * v[i] + (T(1) - beta2) * g * g;
    const T mhat = m[i] / bc1;
    const T vhat = v[i] / bc2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

template <typename T>
struct GeneratorLosses {
  T adv = 0, rec = 0, lat = 0, total = 0;
};

// Gradients for (e1, d1, e2, d2, e3) in that order.
template <typename T>
using GroupGrads = std::vector<nn::Grads<T>>;

template <typename T>
GroupGrads<T> zero_group_grads(const std::vector<const nn::Sequential<T>*>& nets) {
  GroupGrads<T> g;
  for (const auto* n : nets) g.push_back(n->zero_grads());
  return g;
}

// Generator objective at the current parameters. With `grads`, also
// back-propagates into the five generator-side networks; the discriminator is
// only differentiated w.r.t. its input.
// `p` must come from run_generator(..., Mode::Train, record = grads != nullptr)
// at the current generator parameters.
template <typename T>
GeneratorLosses<T> generator_objective(const GanModel<T>& m, const GeneratorPass<T>& p, const ObjectiveConfig& obj,
                                       GroupGrads<T>* grads = nullptr) {
  const bool need_grad = grads != nullptr;
  const nn::Tensor<T>& x = p.x;
  const int batch = x.n;

  // Adversarial (feature matching) term.
  DiscPass<T> dx = run_discriminator(m, x, nn::Mode::Train, false);
  DiscPass<T> d1 = run_discriminator(m, p.x1, nn::Mode::Train, need_grad);
  DiscPass<T> d2 = run_discriminator(m, p.x2, nn::Mode::Train, need_grad);
  const nn::Tensor<T>& fx = obj.feature_matching ? dx.features : dx.prob;
  const nn::Tensor<T>& f1 = obj.feature_matching ? d1.features : d1.prob;
  const nn::Tensor<T>& f2 = obj.feature_matching ? d2.features : d2.prob;
  const auto sfx = nn::to_sample_major(fx), sf1 = nn::to_sample_major(f1), sf2 = nn::to_sample_major(f2);
  LossGrads3<T> g_adv;
  GeneratorLosses<T> out;
  out.adv = adv_loss_generator<T>(sfx.data, sf1.data, sf2.data, batch, need_grad ? &g_adv : nullptr);

  LossGrads3<T> g_rec;
  out.rec = rec_loss<T>(p.x.data, p.x1.data, p.x2.data, batch, need_grad ? &g_rec : nullptr, obj.rec_terms);

  const auto sz = nn::to_sample_major(p.z), sz1 = nn::to_sample_major(p.z1), sz2 = nn::to_sample_major(p.z2);
  LossGrads3<T> g_lat;
  out.lat = lat_loss<T>(sz.data, sz1.data, sz2.data, batch, need_grad ? &g_lat : nullptr);
  out.total = total_loss(obj.weights, out.adv, out.rec, out.lat);

  if (need_grad) {
    const T w_adv = static_cast<T>(obj.weights.adv);
    const T w_rec = static_cast<T>(obj.weights.rec);
    const T w_lat = static_cast<T>(obj.weights.lat);
    const int P = m.config.latent_dim;
    auto scaled = [](std::vector<T> v, T s) {
      for (T& e : v) e *= s;
      return v;
    };
    auto latent_grad = [&](const std::vector<T>& g) {
      return nn::from_sample_major(nn::SampleMajor<T>{batch, P, scaled(g, w_lat)}, P, 1, 1);
    };
    auto image_grad = [&](const std::vector<T>& g) {
      nn::Tensor<T> t(p.x.c, p.x.n, p.x.h, p.x.w);
      for (std::size_t i = 0; i < t.data.size(); ++i) t.data[i] = w_rec * g[i];
      return t;
    };
    // d(adv)/d(x'), d(adv)/d(x'') through the frozen discriminator.
    auto adv_input_grad = [&](const DiscPass<T>& d, const std::vector<T>& g) {
      nn::Tensor<T> gf = nn::from_sample_major(nn::SampleMajor<T>{batch, static_cast<int>(g.size()) / batch, scaled(g, w_adv)},
                                               obj.feature_matching ? d.features.c : 1,
                                               obj.feature_matching ? d.features.h : 1,
                                               obj.feature_matching ? d.features.w : 1);
      if (!obj.feature_matching) gf = m.disc_head.backward(d.t_head, gf, nullptr, true);
      return m.disc_features.backward(d.t_features, gf, nullptr, true);
    };

    GroupGrads<T>& G = *grads;
    // z'' = E3(x'')
    nn::Tensor<T> dx2 = m.e3.backward(p.t_e3, latent_grad(g_lat.d2), &G[4], true);
    dx2 += image_grad(g_rec.d2);
    if (w_adv != T(0)) dx2 += adv_input_grad(d2, g_adv.d2);
    // x'' = D2(z')
    nn::Tensor<T> dz1 = m.d2.backward(p.t_d2, dx2, &G[3], true);
    dz1 += latent_grad(g_lat.d1);
    // z' = E2(x')
    nn::Tensor<T> dx1 = m.e2.backward(p.t_e2, dz1, &G[2], true);
    dx1 += image_grad(g_rec.d1);
    if (w_adv != T(0)) dx1 += adv_input_grad(d1, g_adv.d1);
    // x' = D1(z)
    nn::Tensor<T> dz = m.d1.backward(p.t_d1, dx1, &G[1], true);
    dz += latent_grad(g_lat.d0);
    // z = E1(x)
    m.e1.backward(p.t_e1, dz, &G[0], false);
  }
  return out;
}

template <typename T>
GeneratorLosses<T> generator_objective(const GanModel<T>& m, const nn::Tensor<T>& x, const ObjectiveConfig& obj,
                                       GroupGrads<T>* grads = nullptr) {
  return generator_objective(m, run_generator(m, x, nn::Mode::Train, grads != nullptr), obj, grads);
}

// Discriminator objective on detached reconstructions. Grads are for
// (disc_features, disc_head).
template <typename T>
T discriminator_objective(const GanModel<T>& m, const nn::Tensor<T>& x, const nn::Tensor<T>& x1,
                          const nn::Tensor<T>& x2, GroupGrads<T>* grads = nullptr,
                          std::vector<DiscPass<T>>* passes_out = nullptr) {
  const bool need_grad = grads != nullptr;
  std::vector<DiscPass<T>> passes;
  passes.push_back(run_discriminator(m, x, nn::Mode::Train, true));
  passes.push_back(run_discriminator(m, x1, nn::Mode::Train, true));
  passes.push_back(run_discriminator(m, x2, nn::Mode::Train, true));
  LossGrads3<T> g;
  const T loss = adv_loss_discriminator<T>(passes[0].prob.data, passes[1].prob.data, passes[2].prob.data,
                                           need_grad ? &g : nullptr);
  if (need_grad) {
    const std::vector<T>* dp[3] = {&g.d0, &g.d1, &g.d2};
    for (int k = 0; k < 3; ++k) {
      const DiscPass<T>& d = passes[k];
      nn::Tensor<T> gp(1, d.prob.n, 1, 1);
      gp.data = *dp[k];
      nn::Tensor<T> gf = m.disc_head.backward(d.t_head, gp, &(*grads)[1], true);
      m.disc_features.backward(d.t_features, gf, &(*grads)[0], false);
    }
  }
  if (passes_out) *passes_out = std::move(passes);
  return loss;
}

namespace detail {

inline void apply_adam(std::vector<nn::Sequential<float>*> nets, const GroupGrads<float>& grads, AdamMoments& opt,
                       const TrainConfig& cfg) {
  ++opt.step;
  std::size_t slot = 0;
  for (std::size_t k = 0; k < nets.size(); ++k) {
    auto params = nets[k]->params();
    for (std::size_t j = 0; j < params.size(); ++j, ++slot) {
      update_step<float>(params[j]->value, grads[k][j], opt.m[slot], opt.v[slot], opt.step, cfg.lr, cfg.beta1,
                         cfg.beta2);
    }
  }
}

inline std::uint64_t epoch_seed(std::uint64_t seed, std::int64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), 0x5eedu};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace detail

// One optimisation step on a batch already in the model domain.
inline std::pair<float, GeneratorLosses<float>> train_batch(ModelState& m, const nn::Tensor<float>& x,
                                                            const TrainConfig& cfg) {
  // (1) generator forward; reused by the discriminator step as detached input.
  GeneratorPass<float> pass = run_generator(m, x, nn::Mode::Train, true);

  // (2) discriminator step.
  GroupGrads<float> dgrads = zero_group_grads(std::as_const(m).discriminator_nets());
  std::vector<DiscPass<float>> dpasses;
  const float adv_d = discriminator_objective(m, x, pass.x1, pass.x2, &dgrads, &dpasses);
  detail::apply_adam(m.discriminator_nets(), dgrads, m.disc_opt, cfg);
  for (const auto& d : dpasses) {
    m.disc_features.update_running_stats(d.t_features, cfg.bn_momentum);
    m.disc_head.update_running_stats(d.t_head, cfg.bn_momentum);
  }

  // (3) generator step against the updated, frozen discriminator.
  // Generator parameters are untouched by (2), so the recorded pass is reused.
  GroupGrads<float> ggrads = zero_group_grads(std::as_const(m).generator_nets());
  const GeneratorLosses<float> gl = generator_objective(std::as_const(m), pass, cfg.objective, &ggrads);
  detail::apply_adam(m.generator_nets(), ggrads, m.gen_opt, cfg);
  m.e1.update_running_stats(pass.t_e1, cfg.bn_momentum);
  m.d1.update_running_stats(pass.t_d1, cfg.bn_momentum);
  m.e2.update_running_stats(pass.t_e2, cfg.bn_momentum);
  m.d2.update_running_stats(pass.t_d2, cfg.bn_momentum);
  m.e3.update_running_stats(pass.t_e3, cfg.bn_momentum);
  return {adv_d, gl};
}

using EpochCallback = std::function<void(const ModelState&, const EpochRecord&)>;

// Trains from m.epoch up to cfg.epochs. Samples must already be in the model
// domain (see dataset::to_model_domain) and all labelled normal.
inline TrainLog train(ModelState& m, std::span<const Sample> data, const TrainConfig& cfg,
                      const EpochCallback& on_epoch = {}) {
  cfg.validate();
  SGAD_REQUIRE(!data.empty(), InvalidArgument, "train: empty dataset");
  for (const auto& s : data)
    SGAD_REQUIRE(s.label == 0, InvalidArgument, "train: diseased sample in training data: " + s.id);
  SGAD_REQUIRE(static_cast<std::size_t>(cfg.batch_size) <= data.size(), InvalidArgument,
               "train: batch size exceeds dataset size");

  const std::size_t batches = data.size() / cfg.batch_size;  // drop last
  TrainLog log;
  std::vector<std::size_t> order(data.size());
  for (std::int64_t epoch = m.epoch; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(detail::epoch_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);

    EpochRecord rec;
    rec.epoch = static_cast<int>(epoch + 1);
    for (std::size_t b = 0; b < batches; ++b) {
      std::vector<Image> batch;
      batch.reserve(cfg.batch_size);
      for (int i = 0; i < cfg.batch_size; ++i) batch.push_back(data[order[b * cfg.batch_size + i]].image);
      const auto x = nn::images_to_tensor<float>(batch);
      const auto [adv_d, gl] = train_batch(m, x, cfg);
      if (!std::isfinite(adv_d) || !std::isfinite(gl.total)) {
        std::ostringstream msg;
        msg << "train: non-finite loss at epoch " << rec.epoch << " batch " << b << " (adv_d=" << adv_d
            << " adv_g=" << gl.adv << " rec=" << gl.rec << " lat=" << gl.lat << ")";
        throw NumericError(msg.str());
      }
      rec.adv_d += adv_d;
      rec.adv_g += gl.adv;
      rec.rec += gl.rec;
      rec.lat += gl.lat;
      rec.total += gl.total;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    rec.adv_d *= inv;
    rec.adv_g *= inv;
    rec.rec *= inv;
    rec.lat *= inv;
    rec.total *= inv;
    rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    m.epoch = epoch + 1;
    log.push_back(rec);
    if (on_epoch) on_epoch(m, rec);
  }
  return log;
}

}  // namespace sgad
