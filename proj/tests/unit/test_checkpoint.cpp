#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <functional>
#include <random>

#include "sgad/checkpoint.hpp"
#include "sgad/trainer.hpp"

using namespace sgad;
namespace fs = std::filesystem;

namespace {

using Kind = CheckpointError::Kind;

ModelConfig small_config() {
  ModelConfig c;
  c.side = 16;
  c.latent_dim = 6;
  c.base_width = 4;
  c.seed = 21;
  return c;
}

std::vector<Image> random_images(int count, int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<Image> out(count, Image(side, side, 3));
  for (auto& img : out)
    for (auto& v : img.data) v = u(rng);
  return out;
}

// A model that has taken a few optimiser steps, so running statistics and
// moments are non-trivial.
ModelState trained_model() {
  ModelState m = init_model(small_config());
  m.transform = InputTransform{0.41f, 0.23f, -1.7f, 2.6f};
  std::vector<Sample> data;
  for (auto& img : random_images(8, 16, 4)) data.push_back({std::move(img), 0, "x"});
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 1;
  train(m, data, cfg);
  return m;
}

class CheckpointFile : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("sgad_ckpt_" + std::to_string(::getpid()) + "_" +
                                        ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path path(const std::string& name) const { return dir_ / name; }

  static Kind kind_of(const std::function<void()>& f) {
    try {
      f();
    } catch (const CheckpointError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no CheckpointError";
    return Kind::Io;
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CheckpointFile, RoundTripGivesIdenticalOutputs) {
  const ModelState m = trained_model();
  save_checkpoint(m, path("m.ckpt"));
  const ModelState back = load_checkpoint(path("m.ckpt"), m.config);

  EXPECT_EQ(back.config, m.config);
  EXPECT_EQ(back.transform, m.transform);
  EXPECT_EQ(back.epoch, m.epoch);
  EXPECT_EQ(back.gen_opt.step, m.gen_opt.step);
  EXPECT_EQ(back.gen_opt.m, m.gen_opt.m);
  EXPECT_EQ(back.disc_opt.v, m.disc_opt.v);

  const auto x = random_images(3, 16, 5);
  const auto a = generator_forward(m, x), b = generator_forward(back, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(a.x1[i].data, b.x1[i].data);
    EXPECT_EQ(a.x2[i].data, b.x2[i].data);
  }
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.z1, b.z1);
  EXPECT_EQ(a.z2, b.z2);
  const auto da = discriminate(m, x), db = discriminate(back, x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    EXPECT_EQ(da[i].prob, db[i].prob);
    EXPECT_EQ(da[i].features, db[i].features);
  }
}

TEST_F(CheckpointFile, LayoutStartsWithMagicAndVersion) {
  save_checkpoint(init_model(small_config()), path("m.ckpt"));
  const auto bytes = read_file_bytes(path("m.ckpt"));
  ASSERT_GT(bytes.size(), 12u);
  EXPECT_EQ(std::string(bytes.data(), 8), "SGADCKPT");
  EXPECT_EQ(bytes[8], 1);
  EXPECT_EQ(bytes[9], 0);
  EXPECT_EQ(bytes[10], 0);
  EXPECT_EQ(bytes[11], 0);
  const auto contents = decode_checkpoint(bytes);
  EXPECT_EQ(contents.config.at("model.side"), "16");
  EXPECT_EQ(contents.tensors.front().name, "e1.conv0.weight");
  EXPECT_EQ(contents.tensors.front().shape, (std::vector<std::uint32_t>{4, 3, 4, 4}));
}

TEST_F(CheckpointFile, DamagedFilesGiveDistinctErrors) {
  save_checkpoint(init_model(small_config()), path("m.ckpt"));
  const auto good = read_file_bytes(path("m.ckpt"));

  for (std::size_t cut : {std::size_t{4}, std::size_t{10}, good.size() / 2, good.size() - 2}) {
    std::vector<char> b(good.begin(), good.begin() + cut);
    EXPECT_EQ(kind_of([&] { decode_checkpoint(b); }), Kind::Truncated) << cut;
  }

  auto bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bad_magic); }), Kind::Format);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(std::vector<char>{'P', 'K'}); }), Kind::Format);

  auto bad_version = good;
  bad_version[8] = 2;
  EXPECT_EQ(kind_of([&] { decode_checkpoint(bad_version); }), Kind::Version);

  auto flipped = good;
  flipped[good.size() - 100] ^= 0x10;
  EXPECT_EQ(kind_of([&] { decode_checkpoint(flipped); }), Kind::Corrupt);

  auto trailing = good;
  trailing.push_back(0);
  EXPECT_EQ(kind_of([&] { decode_checkpoint(trailing); }), Kind::Corrupt);

  EXPECT_EQ(kind_of([&] { load_checkpoint(path("missing.ckpt")); }), Kind::Io);
}

TEST_F(CheckpointFile, ArchitectureMismatchIsReported) {
  save_checkpoint(init_model(small_config()), path("m.ckpt"));
  ModelConfig other = small_config();
  other.latent_dim = 7;
  EXPECT_EQ(kind_of([&] { load_checkpoint(path("m.ckpt"), other); }), Kind::ShapeMismatch);

  // A tensor whose stored shape disagrees with the configured architecture.
  auto contents = to_checkpoint(init_model(small_config()));
  contents.tensors[0].shape = {4, 3, 2, 8};
  EXPECT_EQ(kind_of([&] { from_checkpoint(contents); }), Kind::ShapeMismatch);
  contents = to_checkpoint(init_model(small_config()));
  contents.tensors.erase(contents.tensors.begin() + 1);
  EXPECT_EQ(kind_of([&] { from_checkpoint(contents); }), Kind::ShapeMismatch);
}

TEST_F(CheckpointFile, CheckpointAtCadenceResumesExactly) {
  std::vector<Sample> data;
  for (auto& img : random_images(8, 16, 6)) data.push_back({std::move(img), 0, "x"});
  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.epochs = 4;
  cfg.seed = 8;

  ModelState straight = init_model(small_config());
  train(straight, data, cfg, [&](const ModelState& s, const EpochRecord& r) {
    if (r.epoch % 2 == 0) save_checkpoint(s, path("epoch" + std::to_string(r.epoch) + ".ckpt"));
  });

  ModelState resumed = load_checkpoint(path("epoch2.ckpt"));
  EXPECT_EQ(resumed.epoch, 2);
  train(resumed, data, cfg);
  const ModelState at4 = load_checkpoint(path("epoch4.ckpt"));
  for (const ModelState* s : std::vector<const ModelState*>{&resumed, &at4}) {
    const auto x = random_images(2, 16, 7);
    const auto a = generator_forward(straight, x), b = generator_forward(*s, x);
    EXPECT_EQ(a.x2[0].data, b.x2[0].data);
    EXPECT_EQ(a.z2, b.z2);
  }
}
