#pragma once

// Classification metrics over normalised scores (diseased = positive class),
// score histograms, difference images and the six-variant ablation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "sgad/scoring.hpp"

namespace sgad {

struct ConfusionCounts {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

inline ConfusionCounts confusion(std::span<const int> labels, std::span<const int> preds) {
  SGAD_REQUIRE(labels.size() == preds.size(), ShapeError, "confusion: length mismatch");
  SGAD_REQUIRE(!labels.empty(), InvalidArgument, "confusion: empty input");
  ConfusionCounts c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SGAD_REQUIRE((labels[i] == 0 || labels[i] == 1) && (preds[i] == 0 || preds[i] == 1), InvalidArgument,
                 "confusion: values must be 0 or 1");
    if (labels[i] == 1) (preds[i] == 1 ? c.tp : c.fn) += 1;
    else (preds[i] == 1 ? c.fp : c.tn) += 1;
  }
  return c;
}

struct Prf1 {
  double precision = 0, recall = 0, f1 = 0;
  bool degenerate = false;  // some ratio was 0/0 and was set to 0
};

// Harmonic mean; 0 when both are 0.
inline double f1_score(double precision, double recall) {
  return precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
}

// Precision, recall and F1 for `positive_class` (1 = diseased, 0 = normal).
inline Prf1 prf1(const ConfusionCounts& c, int positive_class = 1) {
  SGAD_REQUIRE(positive_class == 0 || positive_class == 1, InvalidArgument, "prf1: class must be 0 or 1");
  const double tp = positive_class == 1 ? c.tp : c.tn;
  const double fp = positive_class == 1 ? c.fp : c.fn;
  const double fn = positive_class == 1 ? c.fn : c.fp;
  Prf1 r;
  auto ratio = [&](double num, double den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return num / den;
  };
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

inline double macro_f1(double f1_normal, double f1_diseased) { return 0.5 * (f1_normal + f1_diseased); }

struct RocPoint {
  double fpr = 0, tpr = 0;
  double threshold = 0;  // score >= threshold is positive; +inf for the origin
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
};

struct RocResult {
  RocCurve curve;
  double auc = 0;
};

// Thresholds at every distinct score, tied scores entering together; the
// area is the trapezoid sum along the resulting polyline.
inline RocResult roc_auc(std::span<const float> scores, std::span<const int> labels) {
  require_both_classes(scores, labels, "roc_auc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double neg = static_cast<double>(labels.size()) - pos;

  RocResult r;
  r.curve.points.push_back({0, 0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const float t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    const RocPoint p{fp / neg, tp / pos, t};
    const RocPoint& prev = r.curve.points.back();
    r.auc += (p.fpr - prev.fpr) * (p.tpr + prev.tpr) / 2;
    r.curve.points.push_back(p);
  }
  return r;
}

// The rate at which FPR equals FNR = 1 - TPR, interpolated linearly along the
// ROC polyline.
inline double eer(const RocCurve& curve) {
  SGAD_REQUIRE(curve.points.size() >= 2, InvalidArgument, "eer: curve needs at least two points");
  // g = FPR - FNR rises from -1 at (0,0) to +1 at (1,1) and is monotone.
  auto g = [](const RocPoint& p) { return p.fpr - (1 - p.tpr); };
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const RocPoint &a = curve.points[i - 1], &b = curve.points[i];
    const double ga = g(a), gb = g(b);
    if (ga <= 0 && gb >= 0) {
      const double t = gb == ga ? 0.0 : -ga / (gb - ga);
      return a.fpr + t * (b.fpr - a.fpr);
    }
  }
  return 0.5;  // unreachable for a curve from (0,0) to (1,1)
}

// Step-wise average precision, sum over thresholds of (R_k - R_{k-1}) P_k,
// thresholds taken at distinct scores in descending order.
inline double average_precision(std::span<const float> scores, std::span<const int> labels) {
  require_both_classes(scores, labels, "average_precision");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const double pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  double ap = 0, prev_recall = 0;
  std::size_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    const float t = scores[order[i]];
    while (i < order.size() && scores[order[i]] == t) {
      tp += labels[order[i]] == 1;
      ++seen;
      ++i;
    }
    const double recall = tp / pos, precision = static_cast<double>(tp) / seen;
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return ap;
}

struct ScoreHistogram {
  int bins = 200;
  std::vector<std::size_t> normal, diseased;
  double bin_low(int b) const { return static_cast<double>(b) / bins; }
};

// Equal-width bins over [0,1]; bin b holds [b/n, (b+1)/n), the last bin also 1.
inline ScoreHistogram score_histogram(std::span<const float> scores, std::span<const int> labels, int bins = 200) {
  SGAD_REQUIRE(bins >= 1, InvalidArgument, "score_histogram: bins must be >= 1");
  SGAD_REQUIRE(scores.size() == labels.size(), ShapeError, "score_histogram: length mismatch");
  ScoreHistogram h;
  h.bins = bins;
  h.normal.assign(bins, 0);
  h.diseased.assign(bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const float s = scores[i];
    SGAD_REQUIRE(s >= 0.0f && s <= 1.0f, InvalidArgument, "score_histogram: score outside [0,1]");
    const int b = std::min(bins - 1, static_cast<int>(std::floor(static_cast<double>(s) * bins)));
    (labels[i] == 1 ? h.diseased : h.normal)[b] += 1;
  }
  return h;
}

// alpha * |a - b| per value, clamped to [0,1].
inline Image difference_image(const Image& a, const Image& b, float alpha = 1.0f) {
  require_same_shape(a, b, "difference_image");
  Image out(a.height, a.width, a.channels);
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = std::clamp(alpha * std::abs(a.data[i] - b.data[i]), 0.0f, 1.0f);
  return out;
}

struct VariantMetrics {
  ScoreVariant variant = kProposedVariant;
  double auc = 0, eer = 0, ap = 0, macro_f1 = 0;
  Threshold threshold;
  Prf1 normal, diseased;
  ConfusionCounts counts;
  bool degenerate_scores = false;
};

struct VariantEvaluation {
  VariantMetrics metrics;
  NormalizedScores normalized;
  RocResult roc;
  std::vector<ScoreRecord> records;
};

// Normalise, pick the variant's own Youden threshold, and compute every metric.
inline VariantEvaluation evaluate_variant(ScoreVariant v, std::span<const Sample> samples,
                                          std::span<const float> raw) {
  SGAD_REQUIRE(samples.size() == raw.size(), ShapeError, "evaluate_variant: length mismatch");
  std::vector<int> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);

  VariantEvaluation e;
  e.normalized = normalize_scores(raw);
  const auto& scores = e.normalized.scores;
  VariantMetrics& m = e.metrics;
  m.variant = v;
  m.degenerate_scores = e.normalized.degenerate;
  m.threshold = select_threshold(scores, labels);
  e.records = make_records(samples, v, raw, scores, m.threshold.tau);
  std::vector<int> preds;
  for (const auto& r : e.records) preds.push_back(r.predicted);
  m.counts = confusion(labels, preds);
  m.normal = prf1(m.counts, 0);
  m.diseased = prf1(m.counts, 1);
  m.macro_f1 = macro_f1(m.normal.f1, m.diseased.f1);
  e.roc = roc_auc(scores, labels);
  m.auc = e.roc.auc;
  m.eer = eer(e.roc.curve);
  m.ap = average_precision(scores, labels);
  return e;
}

struct AblationReport {
  std::vector<VariantEvaluation> variants;  // kAllVariants order

  const VariantEvaluation& of(ScoreVariant v) const { return variants.at(static_cast<std::size_t>(v)); }
};

inline AblationReport ablation_report(const VariantErrors& errors, std::span<const Sample> samples) {
  AblationReport r;
  for (std::size_t k = 0; k < kAllVariants.size(); ++k)
    r.variants.push_back(evaluate_variant(kAllVariants[k], samples, errors[k]));
  return r;
}

inline AblationReport ablation_report(const GeneratorFn& gen, std::span<const Sample> samples) {
  return ablation_report(raw_errors_all(gen, samples), samples);
}

inline AblationReport ablation_report(const ModelState& m, std::span<const Sample> samples) {
  return ablation_report(raw_errors_all(m, samples), samples);
}

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  SGAD_REQUIRE(f.good(), IoError, "cannot write " + path.string());
  return f;
}

}  // namespace detail

inline void write_metrics_csv(const std::filesystem::path& path, const AblationReport& r) {
  auto f = detail::open_out(path);
  f << "variant,auc,eer,ap,macro_f1,tau,youden_j,proposed,degenerate\n";
  for (const auto& v : r.variants) {
    const auto& m = v.metrics;
    f << variant_name(m.variant) << ',' << format_double(m.auc) << ',' << format_double(m.eer) << ','
      << format_double(m.ap) << ',' << format_double(m.macro_f1) << ',' << format_float(m.threshold.tau) << ','
      << format_double(m.threshold.youden_j) << ',' << (m.variant == kProposedVariant ? 1 : 0) << ','
      << (m.degenerate_scores ? 1 : 0) << '\n';
  }
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

// Aligned plaintext table, one row per variant, the proposed one marked.
inline std::string format_metrics_table(const AblationReport& r) {
  std::ostringstream s;
  s << std::left << std::setw(10) << "variant" << std::right << std::setw(8) << "AUC" << std::setw(8) << "EER"
    << std::setw(8) << "AP" << std::setw(10) << "MacroF1" << std::setw(9) << "tau" << "\n";
  for (const auto& v : r.variants) {
    const auto& m = v.metrics;
    std::string name = variant_name(m.variant);
    if (m.variant == kProposedVariant) name += " *";
    s << std::left << std::setw(10) << name << std::right << std::setw(8) << detail::fixed(m.auc, 3) << std::setw(8)
      << detail::fixed(m.eer, 3) << std::setw(8) << detail::fixed(m.ap, 3) << std::setw(10)
      << detail::fixed(m.macro_f1, 3) << std::setw(9) << detail::fixed(m.threshold.tau, 4)
      << (m.degenerate_scores ? "  (degenerate)" : "") << "\n";
  }
  s << "* proposed score\n";
  return s.str();
}

// Per-class precision/recall/F1 of one variant.
inline std::string format_class_report(const VariantMetrics& m) {
  std::ostringstream s;
  s << std::left << std::setw(10) << "class" << std::right << std::setw(11) << "precision" << std::setw(8) << "recall"
    << std::setw(8) << "F1" << "\n";
  auto row = [&](const char* name, const Prf1& p) {
    s << std::left << std::setw(10) << name << std::right << std::setw(11) << detail::fixed(p.precision, 3)
      << std::setw(8) << detail::fixed(p.recall, 3) << std::setw(8) << detail::fixed(p.f1, 3)
      << (p.degenerate ? "  (0/0)" : "") << "\n";
  };
  row("normal", m.normal);
  row("diseased", m.diseased);
  return s.str();
}

inline void write_histogram_csv(const std::filesystem::path& path, const ScoreHistogram& h) {
  auto f = detail::open_out(path);
  f << "bin_low,normal_count,diseased_count\n";
  for (int b = 0; b < h.bins; ++b) f << format_double(h.bin_low(b)) << ',' << h.normal[b] << ',' << h.diseased[b] << '\n';
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

inline void write_roc_csv(const std::filesystem::path& path, const RocCurve& c) {
  auto f = detail::open_out(path);
  f << "fpr,tpr,threshold\n";
  for (const auto& p : c.points)
    f << format_double(p.fpr) << ',' << format_double(p.tpr) << ','
      << (std::isinf(p.threshold) ? std::string("inf") : format_double(p.threshold)) << '\n';
  SGAD_REQUIRE(f.good(), IoError, "write failed: " + path.string());
}

}  // namespace sgad
