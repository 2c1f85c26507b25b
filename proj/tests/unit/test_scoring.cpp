#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>

#include "../support/oracles.hpp"
#include "sgad/scoring.hpp"

using namespace sgad;
namespace fs = std::filesystem;

namespace {

std::vector<Sample> random_samples(int count, int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<Sample> out;
  for (int i = 0; i < count; ++i) {
    Sample s{Image(side, side, 3), i % 2, "s" + std::to_string(i)};
    for (auto& v : s.image.data) v = u(rng);
    out.push_back(std::move(s));
  }
  return out;
}

// Both generators reproduce the input; latents are a fixed function of it.
GeneratorOutputs identity_generator(std::span<const Image> x) {
  GeneratorOutputs g;
  for (const auto& img : x) {
    g.x1.push_back(img);
    g.x2.push_back(img);
    LatentVector z{{img.data[0], img.data[1]}};
    g.z.push_back(z);
    g.z1.push_back(z);
    z.values[0] += 1.0f;
    g.z2.push_back(z);
  }
  return g;
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("sgad_scoring_" + std::to_string(::getpid()) + "_" + name);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

}  // namespace

TEST(Errors, ImageErrorIsMeanSquare) {
  Image a(1, 1, 1), b(1, 1, 1);
  a.data = {1.0f};
  b.data = {0.0f};
  EXPECT_FLOAT_EQ(image_error(a, b), 1.0f);

  std::mt19937 rng(3);
  std::normal_distribution<float> n;
  Image c(5, 7, 3), d(5, 7, 3);
  for (auto& v : c.data) v = n(rng);
  for (auto& v : d.data) v = n(rng);
  double s = 0;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x)
      for (int ch = 0; ch < 3; ++ch) {
        const double diff = double(c.at(y, x, ch)) - d.at(y, x, ch);
        s += diff * diff;
      }
  EXPECT_NEAR(image_error(c, d), s / 105.0, 1e-6 * s / 105.0);
  EXPECT_THROW(image_error(c, Image(5, 7, 1)), ShapeError);
}

TEST(Errors, LatentErrorIsMeanSquare) {
  EXPECT_FLOAT_EQ(latent_error({{1.0f, 0.0f}}, {{0.0f, 0.0f}}), 0.5f);
  EXPECT_THROW(latent_error({{1.0f}}, {{0.0f, 0.0f}}), ShapeError);
}

TEST(Errors, IdentityGeneratorGivesZeroImageErrors) {
  const auto samples = random_samples(5, 4, 1);
  const auto all = raw_errors_all(identity_generator, samples, 2);
  for (ScoreVariant v : kAllVariants) ASSERT_EQ(all[static_cast<int>(v)].size(), samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_EQ(all[static_cast<int>(ScoreVariant::SG1G2)][i], 0.0f);
    EXPECT_EQ(all[static_cast<int>(ScoreVariant::SxG1)][i], 0.0f);
    EXPECT_EQ(all[static_cast<int>(ScoreVariant::SxG2)][i], 0.0f);
    EXPECT_EQ(all[static_cast<int>(ScoreVariant::Szz1)][i], 0.0f);
    EXPECT_FLOAT_EQ(all[static_cast<int>(ScoreVariant::Szz2)][i], 0.5f);
    EXPECT_FLOAT_EQ(all[static_cast<int>(ScoreVariant::Sz1z2)][i], 0.5f);
  }
  EXPECT_EQ(raw_errors(identity_generator, samples, ScoreVariant::SxG2), all[4]);
}

TEST(Errors, SampleOrderIsPreservedAcrossBatches) {
  const auto samples = random_samples(7, 4, 2);
  // x1 = 0, so SxG1 is the mean square of each input.
  auto zero_x1 = [](std::span<const Image> x) {
    auto g = identity_generator(x);
    for (auto& img : g.x1) std::fill(img.data.begin(), img.data.end(), 0.0f);
    return g;
  };
  const auto e = raw_errors_all(zero_x1, samples, 3)[static_cast<int>(ScoreVariant::SxG1)];
  for (std::size_t i = 0; i < samples.size(); ++i)
    EXPECT_FLOAT_EQ(e[i], image_error(samples[i].image, Image(4, 4, 3)));
}

TEST(Errors, ModelGeneratorScoresAllVariants) {
  ModelConfig c;
  c.side = 8;
  c.latent_dim = 4;
  c.base_width = 4;
  const ModelState m = init_model(c);
  const auto samples = random_samples(3, 8, 4);
  const auto all = raw_errors_all(m, samples);
  for (const auto& e : all) {
    ASSERT_EQ(e.size(), 3u);
    for (float v : e) EXPECT_GE(v, 0.0f);
  }
  ModelState broken = m;
  broken.e1.params()[0]->value[0] = std::numeric_limits<float>::infinity();
  EXPECT_THROW(raw_errors_all(broken, samples), NumericError);
}

TEST(Variants, NamesRoundTrip) {
  for (ScoreVariant v : kAllVariants) EXPECT_EQ(parse_variant(variant_name(v)), v);
  EXPECT_EQ(parse_variant("g1g2"), ScoreVariant::SG1G2);
  EXPECT_EQ(parse_variant("zz1"), ScoreVariant::Szz1);
  EXPECT_THROW(parse_variant("nope"), ConfigError);
  EXPECT_EQ(kProposedVariant, ScoreVariant::SG1G2);
}

TEST(Normalize, MapsToUnitInterval) {
  const std::vector<float> e{2, 4, 6};
  const auto n = normalize_scores(e);
  EXPECT_EQ(n.scores, (std::vector<float>{0.0f, 0.5f, 1.0f}));
  EXPECT_FALSE(n.degenerate);
  EXPECT_EQ(n.calibration.min, 2.0f);
  EXPECT_EQ(n.calibration.max, 6.0f);
  EXPECT_FLOAT_EQ(n.calibration.apply(5.0f), 0.75f);
  EXPECT_EQ(n.calibration.apply(9.0f), 1.0f);
}

TEST(Normalize, ConstantInputIsFlagged) {
  const std::vector<float> e{5, 5, 5};
  const auto n = normalize_scores(e);
  EXPECT_TRUE(n.degenerate);
  EXPECT_EQ(n.scores, (std::vector<float>{0, 0, 0}));
  EXPECT_THROW(normalize_scores(std::vector<float>{}), InvalidArgument);
}

TEST(Normalize, InvariantUnderPositiveAffineMaps) {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 3.0f);
  std::vector<float> e(50), f(50);
  for (std::size_t i = 0; i < e.size(); ++i) {
    e[i] = u(rng);
    f[i] = 4.0f * e[i] + 1.5f;
  }
  const auto a = normalize_scores(e), b = normalize_scores(f);
  for (std::size_t i = 0; i < e.size(); ++i) {
    EXPECT_NEAR(a.scores[i], b.scores[i], 1e-5);
    EXPECT_GE(a.scores[i], 0.0f);
    EXPECT_LE(a.scores[i], 1.0f);
    for (std::size_t j = 0; j < e.size(); ++j)
      if (e[i] < e[j]) {
        EXPECT_LE(a.scores[i], a.scores[j]);
      }
  }
}

TEST(Threshold, SeparableScores) {
  const std::vector<float> s{0.1f, 0.2f, 0.7f, 0.9f};
  const std::vector<int> l{0, 0, 1, 1};
  const auto t = select_threshold(s, l);
  EXPECT_EQ(t.tau, 0.7f);
  EXPECT_DOUBLE_EQ(t.youden_j, 1.0);
  EXPECT_DOUBLE_EQ(t.tpr, 1.0);
  EXPECT_DOUBLE_EQ(t.fpr, 0.0);
}

TEST(Threshold, UninformativeScoresPickSmallestThreshold) {
  const std::vector<float> s{0.3f, 0.3f, 0.6f, 0.6f};
  const std::vector<int> l{0, 1, 0, 1};
  const auto t = select_threshold(s, l);
  EXPECT_DOUBLE_EQ(t.youden_j, 0.0);
  EXPECT_EQ(t.tau, 0.3f);
}

TEST(Threshold, MatchesGridSearch) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 4 + rng() % 30;
    std::vector<float> s(n);
    std::vector<int> l(n);
    for (int i = 0; i < n; ++i) {
      l[i] = i % 2;
      s[i] = (rng() % 1001) / 1000.0f;  // on the grid, so the grid search is exact
    }
    const auto t = select_threshold(s, l);
    EXPECT_NEAR(t.youden_j, sgad::testing::grid_youden(s, l), 1e-12) << trial;
    EXPECT_GE(t.youden_j, 0.0);
    const auto r = sgad::testing::rates_at(s, l, t.tau);
    EXPECT_DOUBLE_EQ(r.tpr - r.fpr, t.youden_j);
  }
}

TEST(Threshold, NeedsBothClasses) {
  const std::vector<float> s{0.1f, 0.2f};
  EXPECT_THROW(select_threshold(s, std::vector<int>{1, 1}), InvalidArgument);
  EXPECT_THROW(select_threshold(s, std::vector<int>{0, 2}), InvalidArgument);
  EXPECT_THROW(select_threshold(s, std::vector<int>{0}), ShapeError);
}

TEST(Classify, ThresholdIsInclusive) {
  EXPECT_EQ(classify(0.1f, 0.14f), 0);
  EXPECT_EQ(classify(0.14f, 0.14f), 1);
  EXPECT_EQ(classify(0.9f, 0.14f), 1);
}

TEST(Persistence, CalibrationRoundTrip) {
  const auto p = temp_file("calib.kv");
  save_calibration({{0.0123f, 0.75f}, ScoreVariant::Sz1z2, 0.1402f}, p);
  const auto c = load_calibration(p);
  EXPECT_EQ(c.calibration.min, 0.0123f);
  EXPECT_EQ(c.calibration.max, 0.75f);
  EXPECT_EQ(c.variant, ScoreVariant::Sz1z2);
  EXPECT_EQ(c.tau, 0.1402f);
  fs::remove(p);
  EXPECT_THROW(load_calibration(p), IoError);
}

TEST(Persistence, ScoresCsv) {
  const auto samples = random_samples(2, 4, 6);
  const std::vector<float> raw{0.5f, 0.25f}, score{1.0f, 0.0f};
  const auto rec = make_records(samples, ScoreVariant::SG1G2, raw, score, 0.5f);
  const auto p = temp_file("scores.csv");
  write_scores_csv(p, rec);
  EXPECT_EQ(slurp(p), "id,variant,raw_e,score,label,predicted\ns0,SG1G2,0.5,1,0,1\ns1,SG1G2,0.25,0,1,0\n");
  fs::remove(p);
}
