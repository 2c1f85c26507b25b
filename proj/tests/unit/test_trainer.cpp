#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "sgad/trainer.hpp"

using namespace sgad;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.side = 8;
  c.latent_dim = 4;
  c.base_width = 4;
  c.seed = 3;
  return c;
}

std::vector<Sample> random_dataset(int count, int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    Sample s{Image(side, side, 3), 0, "s" + std::to_string(i)};
    for (auto& v : s.image.data) v = u(rng);
    out.push_back(std::move(s));
  }
  return out;
}

TrainConfig tiny_train(int epochs) {
  TrainConfig t;
  t.batch_size = 4;
  t.epochs = epochs;
  t.seed = 9;
  return t;
}

std::vector<std::vector<float>> snapshot(const std::vector<const nn::Sequential<float>*>& nets) {
  std::vector<std::vector<float>> out;
  for (const auto* n : nets)
    for (const auto* p : n->params()) out.push_back(p->value);
  return out;
}

}  // namespace

TEST(UpdateStep, FirstStepMovesByLearningRate) {
  std::vector<double> p{0.0}, g{1.0}, m{0.0}, v{0.0};
  update_step<double>(p, g, m, v, 1, 0.1, 0.5, 0.999);
  // m_hat = v_hat = 1, so the step is lr / (1 + eps).
  EXPECT_NEAR(p[0], -0.1, 1e-8);
  EXPECT_DOUBLE_EQ(m[0], 0.5);
  EXPECT_NEAR(v[0], 0.001, 1e-15);
}

TEST(UpdateStep, ZeroGradientLeavesParametersUnchanged) {
  std::vector<float> p{1.5f, -2.0f, 0.0f}, g(3, 0.0f), m(3, 0.0f), v(3, 0.0f);
  const auto before = p;
  for (int step = 1; step <= 5; ++step) update_step<float>(p, g, m, v, step, 0.1f, 0.5f, 0.999f);
  EXPECT_EQ(p, before);
}

TEST(UpdateStep, DescendsOnParabola) {
  std::vector<double> p{1.0}, g(1), m{0.0}, v{0.0};
  for (int step = 1; step <= 10; ++step) {
    g[0] = 2 * p[0];
    update_step<double>(p, g, m, v, step, 0.05, 0.5, 0.999);
  }
  EXPECT_LT(std::abs(p[0]), 1.0);
  EXPECT_GT(p[0], 0.0);  // ten steps of at most ~lr each cannot overshoot from 1
}

TEST(UpdateStep, RejectsNanAndShapeMismatch) {
  std::vector<float> p{1.0f}, g{std::numeric_limits<float>::quiet_NaN()}, m{0.0f}, v{0.0f};
  EXPECT_THROW(update_step<float>(p, g, m, v, 1, 0.1f, 0.5f, 0.999f), NumericError);
  std::vector<float> g2{1.0f, 2.0f};
  EXPECT_THROW(update_step<float>(p, g2, m, v, 1, 0.1f, 0.5f, 0.999f), ShapeError);
  std::vector<float> g3{1.0f};
  EXPECT_THROW(update_step<float>(p, g3, m, v, 0, 0.1f, 0.5f, 0.999f), InvalidArgument);
}

TEST(Train, DeterministicUnderSeed) {
  const auto data = random_dataset(10, 8, 1);
  ModelState a = init_model(tiny_config()), b = init_model(tiny_config());
  const auto la = train(a, data, tiny_train(2));
  const auto lb = train(b, data, tiny_train(2));
  ASSERT_EQ(la.size(), 2u);
  ASSERT_EQ(lb.size(), 2u);
  for (std::size_t i = 0; i < la.size(); ++i) {
    EXPECT_EQ(la[i].epoch, static_cast<int>(i + 1));
    EXPECT_EQ(la[i].adv_d, lb[i].adv_d);
    EXPECT_EQ(la[i].adv_g, lb[i].adv_g);
    EXPECT_EQ(la[i].rec, lb[i].rec);
    EXPECT_EQ(la[i].lat, lb[i].lat);
    EXPECT_EQ(la[i].total, lb[i].total);
  }
  EXPECT_EQ(snapshot(std::as_const(a).all_nets()), snapshot(std::as_const(b).all_nets()));
  EXPECT_EQ(a.epoch, 2);
  EXPECT_EQ(a.gen_opt.step, 4);  // 10 samples, batch 4, last partial batch dropped
}

TEST(Train, ResumingContinuesTheSameTrajectory) {
  const auto data = random_dataset(8, 8, 2);
  ModelState straight = init_model(tiny_config()), resumed = init_model(tiny_config());
  train(straight, data, tiny_train(3));
  train(resumed, data, tiny_train(1));
  train(resumed, data, tiny_train(3));
  EXPECT_EQ(resumed.epoch, 3);
  EXPECT_EQ(snapshot(std::as_const(straight).all_nets()), snapshot(std::as_const(resumed).all_nets()));
}

TEST(Train, EachStepLeavesTheOtherSideFrozen) {
  ModelState m = init_model(tiny_config());
  const auto data = random_dataset(4, 8, 3);
  std::vector<Image> imgs;
  for (const auto& s : data) imgs.push_back(s.image);
  const auto x = nn::images_to_tensor<float>(imgs);
  const TrainConfig cfg = tiny_train(1);

  const auto pass = run_generator(std::as_const(m), x, nn::Mode::Train, true);
  const auto gen_before = snapshot(std::as_const(m).generator_nets());
  const auto disc_before = snapshot(std::as_const(m).discriminator_nets());

  GroupGrads<float> dg = zero_group_grads(std::as_const(m).discriminator_nets());
  discriminator_objective(std::as_const(m), x, pass.x1, pass.x2, &dg);
  detail::apply_adam(m.discriminator_nets(), dg, m.disc_opt, cfg);
  EXPECT_EQ(snapshot(std::as_const(m).generator_nets()), gen_before);
  const auto disc_after = snapshot(std::as_const(m).discriminator_nets());
  EXPECT_NE(disc_after, disc_before);

  GroupGrads<float> gg = zero_group_grads(std::as_const(m).generator_nets());
  generator_objective(std::as_const(m), pass, cfg.objective, &gg);
  detail::apply_adam(m.generator_nets(), gg, m.gen_opt, cfg);
  EXPECT_EQ(snapshot(std::as_const(m).discriminator_nets()), disc_after);
  EXPECT_NE(snapshot(std::as_const(m).generator_nets()), gen_before);
}

TEST(Train, ZeroLossWeightsFreezeTheGenerators) {
  ModelState m = init_model(tiny_config());
  const auto before = snapshot(std::as_const(m).generator_nets());
  TrainConfig cfg = tiny_train(1);
  cfg.objective.weights = {0.0f, 0.0f, 0.0f};
  const auto log = train(m, random_dataset(8, 8, 4), cfg);
  EXPECT_EQ(snapshot(std::as_const(m).generator_nets()), before);
  EXPECT_EQ(log[0].total, 0.0);
}

TEST(Train, RejectsBadInputs) {
  ModelState m = init_model(tiny_config());
  EXPECT_THROW(train(m, std::vector<Sample>{}, tiny_train(1)), InvalidArgument);
  auto data = random_dataset(8, 8, 5);
  data[3].label = 1;
  EXPECT_THROW(train(m, data, tiny_train(1)), InvalidArgument);
  data[3].label = 0;
  TrainConfig big = tiny_train(1);
  big.batch_size = 9;
  EXPECT_THROW(train(m, data, big), InvalidArgument);
  TrainConfig bad_lr = tiny_train(1);
  bad_lr.lr = 0.0f;
  EXPECT_THROW(train(m, data, bad_lr), InvalidArgument);
  data[0].image.data[5] = std::numeric_limits<float>::quiet_NaN();
  EXPECT_THROW(train(m, data, tiny_train(1)), NumericError);
}

TEST(Train, CallbackSeesEveryEpoch) {
  ModelState m = init_model(tiny_config());
  std::vector<int> seen;
  train(m, random_dataset(8, 8, 6), tiny_train(3), [&](const ModelState& s, const EpochRecord& r) {
    seen.push_back(r.epoch);
    EXPECT_EQ(s.epoch, r.epoch);
  });
  EXPECT_EQ(seen, (std::vector<int>{1, 2, 3}));
}

// Structured data (smooth blobs) that a small model can learn to reconstruct.
TEST(Train, ReconstructionLossDecreases) {
  ModelConfig mc;
  mc.side = 16;
  mc.latent_dim = 16;
  mc.base_width = 8;
  mc.seed = 1;
  ModelState m = init_model(mc);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.2f, 0.8f);
  std::vector<Sample> data;
  for (int i = 0; i < 64; ++i) {
    Sample s{Image(16, 16, 3), 0, std::to_string(i)};
    const float cx = 16 * u(rng), cy = 16 * u(rng), tone = u(rng);
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        const float d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const float v = 2.0f * tone * std::exp(-d2 / 20.0f) - 1.0f;
        for (int c = 0; c < 3; ++c) s.image.at(y, x, c) = v * (0.6f + 0.2f * c);
      }
    data.push_back(std::move(s));
  }
  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.epochs = 15;
  cfg.seed = 2;
  const auto log = train(m, data, cfg);
  EXPECT_LT(log.back().rec, log.front().rec);
  for (const auto& r : log) EXPECT_TRUE(std::isfinite(r.total));
}
