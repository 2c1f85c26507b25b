#include <gtest/gtest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "../support/rundir.hpp"
#include "sgad/app/commands.hpp"

using namespace sgad;
using namespace sgad::app;
namespace fs = std::filesystem;

namespace {

std::optional<std::string> no_env(const std::string&) { return std::nullopt; }

// A configuration small enough to train in a few seconds.
const char* kTinyConfig = R"(format_version = 1
seed = 3
synth.side = 16
synth.train_count = 14
synth.test_normal = 4
synth.test_diseased = 4
model.side = 16
model.latent_dim = 8
model.base_width = 4
train.batch_size = 4
train.epochs = 2
eval.gallery_per_class = 1
)";

class CliDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("sgad_cli_" + std::to_string(::getpid()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  fs::path write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
    return path(name);
  }

  static RunConfig tiny() { return parse_run_config(kTinyConfig, no_env); }

  fs::path dir_;
};

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SGAD_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const fs::path& p) {
  std::ifstream f(p);
  std::size_t n = 0;
  for (std::string line; std::getline(f, line);) ++n;
  return n;
}

std::string first_line(const fs::path& p) {
  std::ifstream f(p);
  std::string line;
  std::getline(f, line);
  return line;
}

}  // namespace

TEST(RunConfigFile, DefaultsApplyToMissingKeys) {
  const RunConfig c = parse_run_config("format_version = 1\n", no_env);
  EXPECT_EQ(c.model.side, 64);
  EXPECT_EQ(c.model.latent_dim, 100);
  EXPECT_EQ(c.train.epochs, 50);
  EXPECT_EQ(c.train.objective.weights.rec, 50.0f);
  EXPECT_EQ(c.variant, ScoreVariant::SG1G2);
  EXPECT_EQ(c.preprocess.out_width, 128);
}

TEST(RunConfigFile, RejectsBadFiles) {
  EXPECT_THROW(parse_run_config("seed = 1\n", no_env), ConfigError);
  EXPECT_THROW(parse_run_config("format_version = 2\n", no_env), ConfigError);
  EXPECT_THROW(parse_run_config("format_version = 1\nmodel.sid = 64\n", no_env), ConfigError);
  EXPECT_THROW(parse_run_config("format_version = 1\ntrain.epochs = many\n", no_env), ConfigError);
  EXPECT_THROW(parse_run_config("format_version = 1\neval.variant = best\n", no_env), ConfigError);
  EXPECT_THROW(parse_run_config("format_version = 1\nmodel.side = 48\n", no_env), InvalidArgument);
  EXPECT_THROW(load_run_config("/nonexistent/run.kv", no_env), ConfigError);
}

TEST(RunConfigFile, SeedDrivesModelAndTraining) {
  const RunConfig c = parse_run_config("format_version = 1\nseed = 17\n", no_env);
  EXPECT_EQ(c.model.seed, 17u);
  EXPECT_EQ(c.train.seed, 17u);
}

TEST(RunConfigFile, EnvironmentOverridesFile) {
  EXPECT_EQ(env_name("train.epochs"), "SGAD_TRAIN_EPOCHS");
  EXPECT_EQ(env_name("loss.rec.g1_g2"), "SGAD_LOSS_REC_G1_G2");
  auto env = [](const std::string& k) -> std::optional<std::string> {
    if (k == "SGAD_TRAIN_EPOCHS") return "7";
    if (k == "SGAD_EVAL_VARIANT") return "xg1";
    return std::nullopt;
  };
  const RunConfig c = parse_run_config("format_version = 1\ntrain.epochs = 3\n", env);
  EXPECT_EQ(c.train.epochs, 7);
  EXPECT_EQ(c.variant, ScoreVariant::SxG1);
}

TEST(RunConfigFile, ResolvedEchoParsesBack) {
  const RunConfig c = parse_run_config(kTinyConfig, no_env);
  const RunConfig back = parse_run_config(format_kv(to_kv(c)), no_env);
  EXPECT_EQ(to_kv(back), to_kv(c));
  EXPECT_EQ(config_hash(back), config_hash(c));
  RunConfig other = c;
  other.train.lr = 1e-3f;
  EXPECT_NE(config_hash(other), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 8u);
}

TEST(RunConfigFile, DefaultOutputDirectoryNamesCommandAndHash) {
  const RunConfig c = parse_run_config(kTinyConfig, no_env);
  const auto p = resolve_out_dir(c, "train", std::nullopt);
  EXPECT_EQ(p.parent_path(), fs::path("runs"));
  const std::string name = p.filename().string();
  EXPECT_NE(name.find("-train-" + config_hash(c)), std::string::npos);
  EXPECT_EQ(resolve_out_dir(c, "train", fs::path("x/y")), fs::path("x/y"));
}

TEST_F(CliDir, RectsFileParsing) {
  const auto p = write("rects.csv", "image_id,x,y,w,h\na,1,2,30,40\nb, 0, 0, 5, 6\n");
  const auto r = read_rects(p);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r.at("a").x, 1);
  EXPECT_EQ(r.at("a").h, 40);
  EXPECT_EQ(r.at("b").w, 5);
  EXPECT_THROW(read_rects(write("bad.csv", "image_id,x,y,w,h\na,1,2\n")), ConfigError);
  EXPECT_THROW(read_rects(write("dup.csv", "a,1,2,3,4\na,1,2,3,4\n")), ConfigError);
  EXPECT_THROW(read_rects(path("missing.csv")), IoError);
}

TEST_F(CliDir, SynthIsByteIdenticalUnderSeed) {
  const RunConfig c = tiny();
  const auto s = cmd_synth(c, path("a"));
  cmd_synth(c, path("b"));
  EXPECT_EQ(s.train, 14u);
  EXPECT_EQ(s.test_normal, 4u);
  EXPECT_EQ(s.test_diseased, 4u);
  EXPECT_EQ(sgad::testing::first_difference(path("a"), path("b")), "");
  EXPECT_EQ(line_count(path("a") / "manifest.csv"), 1u + 14 + 8);
}

TEST_F(CliDir, PreprocessScenesAndReportFailures) {
  RunConfig c = tiny();
  c.scenes.count = 4;
  c.preprocess.out_height = c.preprocess.out_width = 32;
  cmd_scenes(c, path("scenes"));
  // One image without a rect, one that is not a valid PNG.
  fs::copy_file(path("scenes") / "images" / "scene_00000.png", path("scenes") / "images" / "orphan.png");
  write("scenes/images/zz_corrupt.png", "not a png");
  {
    std::ofstream f(path("scenes") / "rects.csv", std::ios::app);
    f << "zz_corrupt,0,0,10,10\n";
  }
  const auto s = cmd_preprocess(c, path("scenes") / "images", path("scenes") / "rects.csv", path("out"));
  EXPECT_EQ(s.succeeded, 4u);
  ASSERT_EQ(s.failures.size(), 2u);
  EXPECT_EQ(s.failures[0].image_id, "orphan");
  EXPECT_EQ(s.failures[0].reason, "missing rect");
  EXPECT_EQ(s.failures[1].image_id, "zz_corrupt");
  EXPECT_EQ(line_count(path("out") / "failures.csv"), 3u);
  const Image img = read_image(path("out") / "scene_00000.png");
  EXPECT_EQ(img.height, 32);
  EXPECT_EQ(img.width, 32);

  fs::create_directories(path("empty"));
  EXPECT_THROW(cmd_preprocess(c, path("empty"), path("scenes") / "rects.csv", path("out2")), IoError);
  write("none.csv", "image_id,x,y,w,h\n");
  EXPECT_THROW(cmd_preprocess(c, path("scenes") / "images", path("none.csv"), path("out3")), Error);
}

TEST_F(CliDir, TrainAndEvalAreBitReproducible) {
  const RunConfig c = tiny();
  cmd_synth(c, path("data"));
  for (const char* run : {"r1", "r2"}) {
    const fs::path out = path(run);
    cmd_train(c, path("data"), out / "train");
    cmd_eval(c, out / "train" / "model.ckpt", path("data"), out / "eval");
  }
  EXPECT_EQ(sgad::testing::first_difference(path("r1"), path("r2")), "");

  const fs::path e = path("r1") / "eval";
  for (const char* f : {"scores.csv", "metrics.csv", "metrics.txt", "histogram.csv", "histogram.png", "roc.csv",
                        "roc.png", "calibration.kv"})
    EXPECT_TRUE(fs::exists(e / f)) << f;
  EXPECT_EQ(first_line(e / "scores.csv"), "id,variant,raw_e,score,label,predicted");
  EXPECT_EQ(line_count(e / "scores.csv"), 9u);
  EXPECT_EQ(first_line(e / "histogram.csv"), "bin_low,normal_count,diseased_count");
  EXPECT_EQ(line_count(e / "histogram.csv"), 201u);
  EXPECT_EQ(first_line(e / "roc.csv"), "fpr,tpr,threshold");
  EXPECT_EQ(first_line(path("r1") / "train" / "train_log.csv"), "epoch,adv_d,adv_g,rec,lat,total,seconds");
  EXPECT_EQ(line_count(path("r1") / "train" / "train_log.csv"), 3u);
  EXPECT_EQ(std::distance(fs::directory_iterator(e / "gallery"), fs::directory_iterator{}), 2);
  const Image panel = read_image(e / "gallery" / "normal_00000.png");
  EXPECT_EQ(panel.height, 16);
  EXPECT_EQ(panel.width, 6 * 16 + 5 * 2);
}

TEST_F(CliDir, ResumedTrainingMatchesStraightRun) {
  RunConfig c = tiny();
  c.checkpoint_every = 1;
  cmd_synth(c, path("data"));
  cmd_train(c, path("data"), path("straight"));
  RunConfig one = c;
  one.train.epochs = 1;
  cmd_train(one, path("data"), path("resumed"));
  cmd_train(c, path("data"), path("resumed"), path("resumed") / "model.ckpt");
  EXPECT_EQ(sgad::testing::read_bytes(path("straight") / "model.ckpt"),
            sgad::testing::read_bytes(path("resumed") / "model.ckpt"));
  EXPECT_EQ(sgad::testing::drop_last_column(sgad::testing::read_bytes(path("straight") / "train_log.csv")),
            sgad::testing::drop_last_column(sgad::testing::read_bytes(path("resumed") / "train_log.csv")));
  EXPECT_TRUE(fs::exists(path("straight") / "checkpoints" / "epoch_0002.ckpt"));
}

TEST_F(CliDir, TrainRejectsDiseasedTrainingData) {
  const RunConfig c = tiny();
  cmd_synth(c, path("data"));
  fs::create_directories(path("data") / "train" / "diseased");
  fs::copy_file(path("data") / "test" / "diseased" / "diseased_00000.png",
                path("data") / "train" / "diseased" / "d.png");
  EXPECT_THROW(cmd_train(c, path("data"), path("out")), InvalidArgument);
}

TEST_F(CliDir, EvalNeedsBothClassesAndAblateFlagsProposed) {
  const RunConfig c = tiny();
  cmd_synth(c, path("data"));
  cmd_train(c, path("data"), path("train"));
  const auto ckpt = path("train") / "model.ckpt";

  const auto r = cmd_ablate(ckpt, path("data"), path("ablate"));
  EXPECT_EQ(r.variants.size(), 6u);
  EXPECT_EQ(line_count(path("ablate") / "ablation.csv"), 7u);
  EXPECT_EQ(first_line(path("ablate") / "ablation.csv"), "variant,auc,eer,ap,macro_f1,tau,youden_j,proposed,degenerate");
  EXPECT_NE(sgad::testing::read_bytes(path("ablate") / "ablation.csv").find("SG1G2,"), std::string::npos);
  EXPECT_NE(sgad::testing::read_bytes(path("ablate") / "ablation.txt").find("SG1G2 *"), std::string::npos);
  EXPECT_THROW(cmd_ablate(path("nope.ckpt"), path("data"), path("ablate2")), IoError);

  fs::remove_all(path("data") / "test" / "diseased");
  EXPECT_THROW(cmd_eval(c, ckpt, path("data"), path("eval")), IoError);
}

TEST_F(CliDir, ScoreUsesStoredCalibration) {
  const RunConfig c = tiny();
  cmd_synth(c, path("data"));
  cmd_train(c, path("data"), path("train"));
  cmd_eval(c, path("train") / "model.ckpt", path("data"), path("eval"));
  const auto cal = load_calibration(path("eval") / "calibration.kv");
  const std::vector<fs::path> imgs{path("data") / "test" / "normal" / "normal_00000.png"};
  const auto s = cmd_score(path("train") / "model.ckpt", path("eval") / "calibration.kv", imgs);
  ASSERT_EQ(s.size(), 1u);
  // Same score as the batch evaluation produced for this image.
  std::ifstream f(path("eval") / "scores.csv");
  std::string header, row;
  std::getline(f, header);
  std::getline(f, row);
  EXPECT_EQ(row.rfind("normal_00000,SG1G2," + format_float(s[0].raw) + ",", 0), 0u) << row;
  EXPECT_EQ(s[0].predicted, classify(s[0].score, cal.tau));
}

TEST_F(CliDir, ExitCodes) {
  EXPECT_EQ(run_cli(""), 2);
  EXPECT_EQ(run_cli("synth"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--help"), 0);
  const auto bad = write("bad.kv", "format_version = 1\nmystery = 4\n");
  EXPECT_EQ(run_cli("synth --config " + bad.string() + " --out " + path("o").string()), 2);
  EXPECT_EQ(run_cli("synth --config " + path("missing.kv").string()), 2);
  const auto good = write("good.kv", kTinyConfig);
  EXPECT_EQ(run_cli("synth --config " + good.string() + " --out " + path("d").string()), 0);
  EXPECT_TRUE(fs::exists(path("d") / "config.input.kv"));
  EXPECT_EQ(sgad::testing::read_bytes(path("d") / "config.input.kv"), kTinyConfig);
  EXPECT_EQ(run_cli("ablate --checkpoint " + path("none.ckpt").string() + " --data " + path("d").string() +
                    " --out " + path("a").string()),
            1);
  EXPECT_EQ(run_cli("eval --variant nope --checkpoint x --data " + path("d").string()), 2);
}
