#pragma once

// The command implementations behind the `sgad` tool. Each writes its data
// files into one output directory and returns a short summary.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sgad/app/config.hpp"
#include "sgad/checkpoint.hpp"
#include "sgad/dataset/directory.hpp"
#include "sgad/dataset/standardize.hpp"
#include "sgad/dataset/synth.hpp"
#include "sgad/evaluation.hpp"
#include "sgad/image_io.hpp"
#include "sgad/plot.hpp"
#include "sgad/segmentation/pipeline.hpp"
#include "sgad/trainer.hpp"

namespace sgad::app {

namespace fs = std::filesystem;

// `explicit_out` when given, otherwise <out_dir>/<UTC time>-<command>-<config hash>.
inline fs::path resolve_out_dir(const RunConfig& c, const std::string& command,
                                const std::optional<fs::path>& explicit_out) {
  if (explicit_out) return *explicit_out;
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
  return fs::path(c.out_dir) / (std::string(stamp) + "-" + command + "-" + config_hash(c));
}

inline void prepare_out_dir(const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  SGAD_REQUIRE(!ec && fs::is_directory(out), IoError, "cannot create output directory " + out.string());
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  SGAD_REQUIRE(f.good(), IoError, "cannot write " + path.string());
  f << text;
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

// Resolved configuration, and the input file byte for byte when there is one.
inline void echo_config(const fs::path& out, const RunConfig& c, const std::optional<fs::path>& source) {
  write_text(out / "config.kv", format_kv(to_kv(c)));
  if (source) write_text(out / "config.input.kv", read_text_file(*source));
}

// ---- synth ------------------------------------------------------------------

struct SynthSummary {
  std::size_t train = 0, test_normal = 0, test_diseased = 0;
};

inline SynthSummary cmd_synth(const RunConfig& c, const fs::path& out) {
  prepare_out_dir(out);
  const auto set = data::generate_synthetic(c.synth);
  data::write_directory(out, {set.train, set.test});
  SynthSummary s{set.train.size(), 0, 0};
  for (const auto& t : set.test) (t.label == 1 ? s.test_diseased : s.test_normal) += 1;
  return s;
}

// Scenes for the preprocess command: images/, masks/ (ground-truth fruit
// silhouettes), rects.csv and labels.csv.
inline std::size_t cmd_scenes(const RunConfig& c, const fs::path& out) {
  prepare_out_dir(out);
  fs::create_directories(out / "images");
  fs::create_directories(out / "masks");
  std::ostringstream rects, labels;
  rects << "image_id,x,y,w,h\n";
  labels << "image_id,label\n";
  for (int i = 0; i < c.scenes.count; ++i) {
    const auto sc = data::render_scene(c.scenes, i);
    write_png(sc.sample.image, out / "images" / (sc.sample.id + ".png"));
    write_png(sc.truth_mask, out / "masks" / (sc.sample.id + ".png"));
    rects << sc.sample.id << ',' << sc.rect.x << ',' << sc.rect.y << ',' << sc.rect.w << ',' << sc.rect.h << '\n';
    labels << sc.sample.id << ',' << sc.sample.label << '\n';
  }
  write_text(out / "rects.csv", rects.str());
  write_text(out / "labels.csv", labels.str());
  return static_cast<std::size_t>(c.scenes.count);
}

// ---- preprocess -------------------------------------------------------------

// image_id,x,y,w,h with a header line.
inline std::map<std::string, seg::Box> read_rects(const fs::path& path) {
  std::ifstream f(path);
  SGAD_REQUIRE(f.good(), IoError, "cannot read rects file " + path.string());
  std::map<std::string, seg::Box> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (const auto t = trim(line); t.empty() || (line_no == 1 && t.starts_with("image_id"))) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) cols.emplace_back(trim(col));
    if (cols.size() != 5)
      throw ConfigError(path.string() + " line " + std::to_string(line_no) + ": expected image_id,x,y,w,h");
    const std::string where = path.string() + " line " + std::to_string(line_no);
    seg::Box b{parse_number<int>(where, cols[1]), parse_number<int>(where, cols[2]),
               parse_number<int>(where, cols[3]), parse_number<int>(where, cols[4])};
    if (!out.emplace(cols[0], b).second) throw ConfigError(where + ": duplicate image_id " + cols[0]);
  }
  return out;
}

struct PreprocessFailure {
  std::string image_id;
  std::string reason;
};

struct PreprocessSummary {
  std::size_t succeeded = 0;
  std::vector<PreprocessFailure> failures;
};

// Every image in `input` is segmented inside its rect and written to `out`
// under the same stem. Failures are listed in failures.csv; the command fails
// only when nothing succeeds.
inline PreprocessSummary cmd_preprocess(const RunConfig& c, const fs::path& input, const fs::path& rects_file,
                                        const fs::path& out) {
  const auto files = data::list_images(input);
  SGAD_REQUIRE(!files.empty(), IoError, "no images in " + input.string());
  const auto rects = read_rects(rects_file);
  prepare_out_dir(out);
  PreprocessSummary s;
  for (const auto& file : files) {
    const std::string id = file.stem().string();
    const auto r = rects.find(id);
    if (r == rects.end()) {
      s.failures.push_back({id, "missing rect"});
      continue;
    }
    Image img;
    try {
      img = read_image(file);
    } catch (const Error& e) {
      s.failures.push_back({id, std::string("unreadable image: ") + e.what()});
      continue;
    }
    try {
      const auto res = seg::preprocess(img, r->second, c.preprocess);
      write_png(res.image, out / (id + ".png"));
      ++s.succeeded;
    } catch (const NoForegroundError&) {
      s.failures.push_back({id, "no foreground"});
    } catch (const InvalidArgument& e) {
      s.failures.push_back({id, e.what()});
    }
  }
  std::ostringstream report;
  report << "image_id,reason\n";
  for (const auto& f : s.failures) report << f.image_id << ',' << f.reason << '\n';
  write_text(out / "failures.csv", report.str());
  if (s.succeeded == 0) throw Error("preprocess: every image failed, see " + (out / "failures.csv").string());
  return s;
}

// ---- train ------------------------------------------------------------------

inline std::string train_log_header() { return "epoch,adv_d,adv_g,rec,lat,total,seconds\n"; }

inline std::string train_log_row(const EpochRecord& r) {
  std::ostringstream s;
  s << r.epoch << ',' << format_double(r.adv_d) << ',' << format_double(r.adv_g) << ',' << format_double(r.rec)
    << ',' << format_double(r.lat) << ',' << format_double(r.total) << ',' << ::sgad::detail::fixed(r.seconds, 3) << '\n';
  return s.str();
}

inline void require_side(const ModelConfig& mc, std::span<const Sample> samples, const std::string& what) {
  for (const auto& s : samples)
    SGAD_REQUIRE(s.image.height == mc.side && s.image.width == mc.side && s.image.channels == mc.channels,
                 InvalidArgument,
                 what + " image " + s.id + " is " + std::to_string(s.image.height) + "x" +
                     std::to_string(s.image.width) + "x" + std::to_string(s.image.channels) + ", model expects " +
                     std::to_string(mc.side) + "x" + std::to_string(mc.side) + "x" + std::to_string(mc.channels));
}

struct TrainSummary {
  TrainLog log;
  fs::path checkpoint;
  int final_epoch = 0;
};

// Trains on <data>/train/normal. With `resume`, continues the stored model up
// to train.epochs and appends to an existing train_log.csv in `out`.
inline TrainSummary cmd_train(const RunConfig& c, const fs::path& data_dir, const fs::path& out,
                              const std::optional<fs::path>& resume = std::nullopt,
                              std::ostream* progress = nullptr) {
  const auto split = data::load_directory(data_dir);
  ModelState m;
  if (resume) {
    m = load_checkpoint(*resume, c.model);
  } else {
    m = init_model(c.model);
    m.transform = data::fit_input_transform(split.train);
  }
  require_side(m.config, split.train, "training");
  const auto train_set = data::to_model_domain(m.transform, split.train);

  prepare_out_dir(out);
  const fs::path log_path = out / "train_log.csv";
  if (!resume || !fs::exists(log_path)) write_text(log_path, train_log_header());
  if (c.checkpoint_every > 0) fs::create_directories(out / "checkpoints");

  TrainSummary s;
  s.log = train(m, train_set, c.train, [&](const ModelState& st, const EpochRecord& r) {
    std::ofstream f(log_path, std::ios::binary | std::ios::app);
    f << train_log_row(r);
    SGAD_REQUIRE(f.good(), IoError, "write failed: " + log_path.string());
    if (c.checkpoint_every > 0 && r.epoch % c.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "epoch_%04d.ckpt", r.epoch);
      save_checkpoint(st, out / "checkpoints" / name);
    }
    if (progress)
      *progress << "epoch " << r.epoch << "/" << c.train.epochs << "  adv_d " << ::sgad::detail::fixed(r.adv_d)
                << "  adv_g " << ::sgad::detail::fixed(r.adv_g) << "  rec " << ::sgad::detail::fixed(r.rec) << "  lat "
                << ::sgad::detail::fixed(r.lat) << "  total " << ::sgad::detail::fixed(r.total) << "  " << ::sgad::detail::fixed(r.seconds, 1)
                << "s" << std::endl;
  });
  s.checkpoint = out / "model.ckpt";
  save_checkpoint(m, s.checkpoint);
  s.final_epoch = m.epoch;
  return s;
}

// ---- eval / ablate ----------------------------------------------------------

struct LoadedTest {
  ModelState model;
  std::vector<Sample> samples;  // model domain
};

inline LoadedTest load_for_scoring(const fs::path& checkpoint, const fs::path& data_dir) {
  SGAD_REQUIRE(fs::exists(checkpoint), IoError, "checkpoint not found: " + checkpoint.string());
  LoadedTest t;
  t.model = load_checkpoint(checkpoint);
  const auto test = data::load_test_directory(data_dir);
  require_side(t.model.config, test, "test");
  t.samples = data::to_model_domain(t.model.transform, test);
  return t;
}

// x, x', x'' and the three difference images |x - x'|, |x - x''| and
// alpha |x' - x''|, back in pixel range.
inline Image difference_panel(const ModelState& m, const Sample& s, float alpha) {
  const std::vector<Image> x{s.image};
  const auto g = generator_forward(m, x, nn::Mode::Eval);
  auto pixel = [&](const Image& img) {
    Image p = data::from_model_domain(m.transform, img);
    for (float& v : p.data) v = std::clamp(v, 0.0f, 1.0f);
    return p;
  };
  const Image px = pixel(s.image), p1 = pixel(g.x1[0]), p2 = pixel(g.x2[0]);
  const std::vector<Image> parts{px,
                                 p1,
                                 p2,
                                 difference_image(px, p1, 1.0f),
                                 difference_image(px, p2, 1.0f),
                                 difference_image(p1, p2, alpha)};
  return plot::hconcat(parts);
}

struct EvalSummary {
  VariantMetrics metrics;
  std::size_t samples = 0;
};

// Files: scores.csv, metrics.csv, metrics.txt, histogram.csv/png, roc.csv/png,
// calibration.kv and gallery/<id>.png difference panels.
inline EvalSummary cmd_eval(const RunConfig& c, const fs::path& checkpoint, const fs::path& data_dir,
                            const fs::path& out) {
  const auto t = load_for_scoring(checkpoint, data_dir);
  const auto raw = raw_errors(t.model, t.samples, c.variant);
  const auto e = evaluate_variant(c.variant, t.samples, raw);

  prepare_out_dir(out);
  write_scores_csv(out / "scores.csv", e.records);
  AblationReport single;
  single.variants.push_back(e);
  write_metrics_csv(out / "metrics.csv", single);
  write_text(out / "metrics.txt", format_metrics_table(single) + "\n" + format_class_report(e.metrics));
  std::vector<int> labels;
  for (const auto& s : t.samples) labels.push_back(s.label);
  const auto hist = score_histogram(e.normalized.scores, labels, c.histogram_bins);
  write_histogram_csv(out / "histogram.csv", hist);
  write_png(plot::render_histogram(hist, e.metrics.threshold.tau), out / "histogram.png");
  write_roc_csv(out / "roc.csv", e.roc.curve);
  write_png(plot::render_roc(e.roc.curve), out / "roc.png");
  save_calibration({e.normalized.calibration, c.variant, e.metrics.threshold.tau}, out / "calibration.kv");

  if (c.gallery_per_class > 0) {
    fs::create_directories(out / "gallery");
    int taken[2] = {0, 0};
    for (const auto& s : t.samples) {
      if (taken[s.label] >= c.gallery_per_class) continue;
      ++taken[s.label];
      write_png(difference_panel(t.model, s, c.difference_alpha), out / "gallery" / (s.id + ".png"));
    }
  }
  return {e.metrics, t.samples.size()};
}

// All six variants, each at its own threshold: ablation.csv and ablation.txt.
inline AblationReport cmd_ablate(const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out) {
  const auto t = load_for_scoring(checkpoint, data_dir);
  auto report = ablation_report(t.model, t.samples);
  prepare_out_dir(out);
  write_metrics_csv(out / "ablation.csv", report);
  write_text(out / "ablation.txt", format_metrics_table(report));
  return report;
}

// ---- score ------------------------------------------------------------------

struct ImageScore {
  std::string id;
  float raw = 0, score = 0;
  int predicted = 0;
};

// Scores single images against a stored calibration from an earlier eval.
inline std::vector<ImageScore> cmd_score(const fs::path& checkpoint, const fs::path& calibration,
                                         const std::vector<fs::path>& images) {
  const ModelState m = load_checkpoint(checkpoint);
  const auto cal = load_calibration(calibration);
  std::vector<Sample> samples;
  for (const auto& p : images) samples.push_back({data::to_model_domain(m.transform, read_image(p)), 0, p.stem().string()});
  require_side(m.config, samples, "input");
  const auto raw = raw_errors(m, samples, cal.variant);
  std::vector<ImageScore> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const float s = cal.calibration.apply(raw[i]);
    out.push_back({samples[i].id, raw[i], s, classify(s, cal.tau)});
  }
  return out;
}

}  // namespace sgad::app
