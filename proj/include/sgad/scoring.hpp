#pragma once

// Anomaly scores: per-sample reconstruction or latent errors for six variants,
// min-max normalisation over an evaluation set, and the Youden threshold.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sgad/dataset/sample.hpp"
#include "sgad/kv.hpp"
#include "sgad/model.hpp"

namespace sgad {

enum class ScoreVariant { Szz1, Szz2, Sz1z2, SxG1, SxG2, SG1G2 };

inline constexpr std::array<ScoreVariant, 6> kAllVariants = {ScoreVariant::Szz1, ScoreVariant::Szz2,
                                                             ScoreVariant::Sz1z2, ScoreVariant::SxG1,
                                                             ScoreVariant::SxG2, ScoreVariant::SG1G2};

// The variant scored by default: the difference between the two generators.
inline constexpr ScoreVariant kProposedVariant = ScoreVariant::SG1G2;

inline const char* variant_name(ScoreVariant v) {
  switch (v) {
    case ScoreVariant::Szz1: return "Szz'";
    case ScoreVariant::Szz2: return "Szz''";
    case ScoreVariant::Sz1z2: return "Sz'z''";
    case ScoreVariant::SxG1: return "SxG1";
    case ScoreVariant::SxG2: return "SxG2";
    case ScoreVariant::SG1G2: return "SG1G2";
  }
  return "?";
}

// Accepts the display names and quote-free aliases (zz1, zz2, z1z2, xg1, xg2, g1g2).
inline ScoreVariant parse_variant(std::string_view s) {
  std::string lower;
  for (char c : s)
    if (c != 'S' && c != 's') lower.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  static const std::pair<const char*, ScoreVariant> table[] = {
      {"zz'", ScoreVariant::Szz1},    {"zz1", ScoreVariant::Szz1},   {"zz''", ScoreVariant::Szz2},
      {"zz2", ScoreVariant::Szz2},    {"z'z''", ScoreVariant::Sz1z2}, {"z1z2", ScoreVariant::Sz1z2},
      {"xg1", ScoreVariant::SxG1},    {"xg2", ScoreVariant::SxG2},   {"g1g2", ScoreVariant::SG1G2}};
  for (const auto& [name, v] : table)
    if (lower == name) return v;
  throw ConfigError("unknown score variant: " + std::string(s));
}

inline bool is_latent_variant(ScoreVariant v) {
  return v == ScoreVariant::Szz1 || v == ScoreVariant::Szz2 || v == ScoreVariant::Sz1z2;
}

// Mean squared difference over pixels and channels.
inline float image_error(const Image& a, const Image& b) {
  SGAD_REQUIRE(a.same_shape(b), ShapeError, "image_error: shape mismatch");
  SGAD_REQUIRE(!a.data.empty(), ShapeError, "image_error: empty image");
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = static_cast<double>(a.data[i]) - b.data[i];
    s += d * d;
  }
  return static_cast<float>(s / static_cast<double>(a.data.size()));
}

inline float latent_error(const LatentVector& a, const LatentVector& b) {
  SGAD_REQUIRE(a.values.size() == b.values.size(), ShapeError, "latent_error: length mismatch");
  SGAD_REQUIRE(!a.values.empty(), ShapeError, "latent_error: empty vector");
  double s = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = static_cast<double>(a.values[i]) - b.values[i];
    s += d * d;
  }
  return static_cast<float>(s / static_cast<double>(a.values.size()));
}

// Anything that maps an image batch to the five generator outputs; the
// trained model or a test double.
using GeneratorFn = std::function<GeneratorOutputs(std::span<const Image>)>;

inline float variant_error(ScoreVariant v, const Image& x, const GeneratorOutputs& g, std::size_t i) {
  switch (v) {
    case ScoreVariant::Szz1: return latent_error(g.z[i], g.z1[i]);
    case ScoreVariant::Szz2: return latent_error(g.z[i], g.z2[i]);
    case ScoreVariant::Sz1z2: return latent_error(g.z1[i], g.z2[i]);
    case ScoreVariant::SxG1: return image_error(x, g.x1[i]);
    case ScoreVariant::SxG2: return image_error(x, g.x2[i]);
    case ScoreVariant::SG1G2: return image_error(g.x1[i], g.x2[i]);
  }
  return 0.0f;
}

using VariantErrors = std::array<std::vector<float>, kAllVariants.size()>;

// Raw errors of every variant from one generator pass per batch, in sample order.
inline VariantErrors raw_errors_all(const GeneratorFn& gen, std::span<const Sample> samples, int batch_size = 64) {
  SGAD_REQUIRE(batch_size >= 1, InvalidArgument, "raw_errors: batch size must be >= 1");
  VariantErrors out;
  for (auto& e : out) e.reserve(samples.size());
  std::vector<Image> batch;
  for (std::size_t start = 0; start < samples.size(); start += batch_size) {
    const std::size_t end = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
    batch.clear();
    for (std::size_t i = start; i < end; ++i) batch.push_back(samples[i].image);
    const GeneratorOutputs g = gen(batch);
    SGAD_REQUIRE(g.x1.size() == batch.size() && g.x2.size() == batch.size() && g.z.size() == batch.size() &&
                     g.z1.size() == batch.size() && g.z2.size() == batch.size(),
                 ShapeError, "raw_errors: generator returned the wrong batch size");
    for (std::size_t i = 0; i < batch.size(); ++i)
      for (std::size_t k = 0; k < kAllVariants.size(); ++k) {
        const float e = variant_error(kAllVariants[k], batch[i], g, i);
        if (!std::isfinite(e)) throw NumericError("raw_errors: non-finite error for " + samples[start + i].id);
        out[k].push_back(e);
      }
  }
  return out;
}

inline std::vector<float> raw_errors(const GeneratorFn& gen, std::span<const Sample> samples, ScoreVariant v) {
  auto all = raw_errors_all(gen, samples);
  return std::move(all[static_cast<std::size_t>(v)]);
}

// Rejects states that cannot have come from training: non-finite weights.
inline void require_usable(const ModelState& m) {
  for (const auto* net : m.all_nets())
    for (const auto* p : net->params())
      for (float v : p->value)
        if (!std::isfinite(v)) throw NumericError("model parameter " + p->name + " is not finite");
}

// Generator of a trained model in eval mode. Samples must be in the model domain.
inline GeneratorFn model_generator(const ModelState& m) {
  require_usable(m);
  return [&m](std::span<const Image> x) { return generator_forward(m, x, nn::Mode::Eval); };
}

inline VariantErrors raw_errors_all(const ModelState& m, std::span<const Sample> samples) {
  return raw_errors_all(model_generator(m), samples);
}

inline std::vector<float> raw_errors(const ModelState& m, std::span<const Sample> samples, ScoreVariant v) {
  return raw_errors(model_generator(m), samples, v);
}

// Min and max of the errors a normalisation was fitted on; kept so that
// later single images can be scored on the same scale.
struct Calibration {
  float min = 0.0f;
  float max = 0.0f;

  bool degenerate() const { return !(max > min); }
  float apply(float e) const {
    if (degenerate()) return 0.0f;
    return std::clamp((e - min) / (max - min), 0.0f, 1.0f);
  }
};

struct NormalizedScores {
  std::vector<float> scores;
  Calibration calibration;
  bool degenerate = false;  // all errors equal; every score is 0
};

inline NormalizedScores normalize_scores(std::span<const float> errors) {
  SGAD_REQUIRE(!errors.empty(), InvalidArgument, "normalize_scores: empty list");
  const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
  NormalizedScores out;
  out.calibration = {*lo, *hi};
  out.degenerate = out.calibration.degenerate();
  out.scores.reserve(errors.size());
  const double range = static_cast<double>(*hi) - *lo;
  for (float e : errors)
    out.scores.push_back(out.degenerate ? 0.0f : static_cast<float>((static_cast<double>(e) - *lo) / range));
  return out;
}

// Everything needed to score and classify a single new image later.
struct CalibrationFile {
  Calibration calibration;
  ScoreVariant variant = kProposedVariant;
  float tau = 0.0f;
};

inline void save_calibration(const CalibrationFile& c, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  SGAD_REQUIRE(f.good(), IoError, "cannot write " + path.string());
  f << format_kv({{"variant", variant_name(c.variant)},
                  {"min", format_float(c.calibration.min)},
                  {"max", format_float(c.calibration.max)},
                  {"tau", format_float(c.tau)}});
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

inline CalibrationFile load_calibration(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  SGAD_REQUIRE(f.good(), IoError, "cannot read " + path.string());
  const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  const KeyValues kv = parse_kv(text);
  auto get = [&](const char* k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw ConfigError(path.string() + ": missing key " + k);
    return it->second;
  };
  return {Calibration{parse_number<float>("min", get("min")), parse_number<float>("max", get("max"))},
          parse_variant(get("variant")), parse_number<float>("tau", get("tau"))};
}

// score >= tau is diseased.
inline int classify(float score, float tau) { return score < tau ? 0 : 1; }

struct Threshold {
  float tau = 0.0f;
  double youden_j = 0.0;  // TPR - FPR at tau
  double tpr = 0.0;
  double fpr = 0.0;
};

inline void require_both_classes(std::span<const float> scores, std::span<const int> labels, const char* what) {
  SGAD_REQUIRE(scores.size() == labels.size(), ShapeError, std::string(what) + ": scores and labels differ in length");
  std::size_t pos = 0;
  for (int l : labels) {
    SGAD_REQUIRE(l == 0 || l == 1, InvalidArgument, std::string(what) + ": labels must be 0 or 1");
    pos += l == 1;
  }
  SGAD_REQUIRE(pos > 0 && pos < labels.size(), InvalidArgument,
               std::string(what) + ": both classes must be present");
}

// Maximises TPR - FPR over the observed scores as candidate thresholds;
// ties go to the smallest threshold.
inline Threshold select_threshold(std::span<const float> scores, std::span<const int> labels) {
  require_both_classes(scores, labels, "select_threshold");
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(labels.size()) - pos;

  // Walking down the sorted scores, each distinct value t admits every sample
  // with score >= t.
  Threshold best;
  bool have = false;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const float t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const double tpr = tp / pos, fpr = fp / neg, j = tpr - fpr;
    if (!have || j >= best.youden_j) {  // later candidates are smaller, so >= keeps the smallest tie
      best = {t, j, tpr, fpr};
      have = true;
    }
  }
  return best;
}

struct ScoreRecord {
  std::string id;
  ScoreVariant variant = kProposedVariant;
  float raw = 0.0f;
  float score = 0.0f;
  int label = 0;
  int predicted = 0;
};

inline std::vector<ScoreRecord> make_records(std::span<const Sample> samples, ScoreVariant v,
                                             std::span<const float> raw, std::span<const float> scores, float tau) {
  SGAD_REQUIRE(samples.size() == raw.size() && raw.size() == scores.size(), ShapeError,
               "make_records: length mismatch");
  std::vector<ScoreRecord> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i)
    out.push_back({samples[i].id, v, raw[i], scores[i], samples[i].label, classify(scores[i], tau)});
  return out;
}

inline void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreRecord> records) {
  std::ofstream f(path, std::ios::binary);
  SGAD_REQUIRE(f.good(), IoError, "cannot write " + path.string());
  f << "id,variant,raw_e,score,label,predicted\n";
  for (const auto& r : records)
    f << r.id << ',' << variant_name(r.variant) << ',' << format_float(r.raw) << ',' << format_float(r.score) << ','
      << r.label << ',' << r.predicted << '\n';
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

}  // namespace sgad
