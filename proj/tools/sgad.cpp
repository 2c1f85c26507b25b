// sgad: synthetic data, preprocessing, training and evaluation from one tool.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "sgad/app/commands.hpp"

namespace {

using namespace sgad;
using namespace sgad::app;
namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& o, bool config_required) {
  auto* c = cmd->add_option("--config", o.config, "run configuration file (key = value)");
  if (config_required) c->required();
  cmd->add_option("--seed", o.seed, "seed override");
  cmd->add_option("--out", o.out, "output directory (default: <out_dir>/<time>-<command>-<hash>)");
}

std::optional<fs::path> config_path(const Common& o) {
  if (o.config.empty()) return std::nullopt;
  return fs::path(o.config);
}

RunConfig resolve(const Common& o, const std::string& seed_key) {
  RunConfig c = o.config.empty() ? default_run_config() : load_run_config(o.config);
  if (o.seed) {
    apply_kv(c, {{seed_key, std::to_string(*o.seed)}});
    c.validate();
  }
  return c;
}

fs::path out_dir(const Common& o, const RunConfig& c, const std::string& command) {
  return resolve_out_dir(c, command, o.out.empty() ? std::nullopt : std::optional<fs::path>(o.out));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Serial-generator anomaly detection: synth, preprocess, train, eval, ablate, score"};
  app.require_subcommand(1);

  Common synth_o, scenes_o, pre_o, train_o, eval_o, ablate_o;
  std::string pre_input, pre_rects, train_data, train_resume, eval_data, eval_ckpt, eval_variant, ablate_data,
      ablate_ckpt, score_ckpt, score_cal;
  std::vector<std::string> score_images;

  auto* synth = app.add_subcommand("synth", "write the synthetic pepper dataset");
  add_common(synth, synth_o, true);

  auto* scenes = app.add_subcommand("scenes", "write synthetic field scenes with rects for preprocess");
  add_common(scenes, scenes_o, true);

  auto* pre = app.add_subcommand("preprocess", "segment, align and crop images inside their rects");
  add_common(pre, pre_o, false);
  pre->add_option("--input", pre_input, "directory of images")->required();
  pre->add_option("--rects", pre_rects, "CSV image_id,x,y,w,h")->required();

  auto* train = app.add_subcommand("train", "train on <data>/train/normal");
  add_common(train, train_o, true);
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--checkpoint", train_resume, "resume from this checkpoint");

  auto* eval = app.add_subcommand("eval", "score the test split with one variant");
  add_common(eval, eval_o, false);
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--checkpoint", eval_ckpt, "trained model")->required();
  eval->add_option("--variant", eval_variant, "score variant (default SG1G2)");

  auto* ablate = app.add_subcommand("ablate", "metrics of all six score variants");
  add_common(ablate, ablate_o, false);
  ablate->add_option("--data", ablate_data, "dataset directory")->required();
  ablate->add_option("--checkpoint", ablate_ckpt, "trained model")->required();

  auto* score = app.add_subcommand("score", "score single images with a stored calibration");
  score->add_option("--checkpoint", score_ckpt, "trained model")->required();
  score->add_option("--calibration", score_cal, "calibration.kv written by eval")->required();
  score->add_option("images", score_images, "image files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      const RunConfig c = resolve(synth_o, "synth.seed");
      const auto out = out_dir(synth_o, c, "synth");
      const auto s = cmd_synth(c, out);
      echo_config(out, c, config_path(synth_o));
      std::cout << "wrote " << s.train << " train, " << s.test_normal << " normal and " << s.test_diseased
                << " diseased test images to " << out.string() << "\n";
    } else if (*scenes) {
      const RunConfig c = resolve(scenes_o, "scenes.seed");
      const auto out = out_dir(scenes_o, c, "scenes");
      const auto n = cmd_scenes(c, out);
      echo_config(out, c, config_path(scenes_o));
      std::cout << "wrote " << n << " scenes to " << out.string() << "\n";
    } else if (*pre) {
      const RunConfig c = resolve(pre_o, "seed");
      const auto out = out_dir(pre_o, c, "preprocess");
      const auto s = cmd_preprocess(c, pre_input, pre_rects, out);
      echo_config(out, c, config_path(pre_o));
      std::cout << s.succeeded << " processed, " << s.failures.size() << " failed (see "
                << (out / "failures.csv").string() << ")\n";
    } else if (*train) {
      const RunConfig c = resolve(train_o, "seed");
      const auto out = out_dir(train_o, c, "train");
      std::optional<fs::path> resume;
      if (!train_resume.empty()) resume = train_resume;
      prepare_out_dir(out);
      echo_config(out, c, config_path(train_o));
      const auto s = cmd_train(c, train_data, out, resume, &std::cout);
      std::cout << "checkpoint at epoch " << s.final_epoch << ": " << s.checkpoint.string() << "\n";
    } else if (*eval) {
      RunConfig c = resolve(eval_o, "seed");
      if (!eval_variant.empty()) c.variant = parse_variant(eval_variant);
      const auto out = out_dir(eval_o, c, "eval");
      cmd_eval(c, eval_ckpt, eval_data, out);
      echo_config(out, c, config_path(eval_o));
      std::cout << std::ifstream(out / "metrics.txt").rdbuf() << "results in " << out.string() << "\n";
    } else if (*ablate) {
      const RunConfig c = resolve(ablate_o, "seed");
      const auto out = out_dir(ablate_o, c, "ablate");
      const auto r = cmd_ablate(ablate_ckpt, ablate_data, out);
      echo_config(out, c, config_path(ablate_o));
      std::cout << format_metrics_table(r) << "results in " << out.string() << "\n";
    } else if (*score) {
      std::vector<fs::path> paths(score_images.begin(), score_images.end());
      std::cout << "id,raw_e,score,predicted\n";
      for (const auto& s : cmd_score(score_ckpt, score_cal, paths))
        std::cout << s.id << ',' << format_float(s.raw) << ',' << format_float(s.score) << ',' << s.predicted << "\n";
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
