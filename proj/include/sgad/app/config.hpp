#pragma once

// Run configuration: one `key = value` file covering every module, with
// environment overrides (SGAD_<KEY>, dots as underscores, upper case).

#include <cctype>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "sgad/checkpoint.hpp"
#include "sgad/dataset/synth.hpp"
#include "sgad/kv.hpp"
#include "sgad/scoring.hpp"
#include "sgad/segmentation/pipeline.hpp"
#include "sgad/trainer.hpp"

namespace sgad::app {

inline constexpr int kFormatVersion = 1;

struct RunConfig {
  int format_version = kFormatVersion;
  std::uint64_t seed = 0;  // model initialisation and training order
  std::string out_dir = "runs";

  data::SynthConfig synth;
  data::SceneConfig scenes;
  seg::PreprocessParams preprocess;
  ModelConfig model;
  TrainConfig train;
  int checkpoint_every = 0;  // epochs; 0 keeps only the final checkpoint

  ScoreVariant variant = kProposedVariant;
  float difference_alpha = 20.0f;
  int gallery_per_class = 4;
  int histogram_bins = 200;

  void validate() const {
    SGAD_REQUIRE(format_version == kFormatVersion, ConfigError,
                 "unsupported format_version " + std::to_string(format_version));
    synth.validate();
    scenes.validate();
    model.validate();
    train.validate();
    SGAD_REQUIRE(preprocess.out_height >= 8 && preprocess.out_width >= 8, ConfigError,
                 "preprocess.side must be >= 8");
    SGAD_REQUIRE(preprocess.morph_kernel >= 1 && preprocess.morph_kernel % 2 == 1, ConfigError,
                 "preprocess.morph_kernel must be odd and positive");
    SGAD_REQUIRE(checkpoint_every >= 0, ConfigError, "train.checkpoint_every must be >= 0");
    SGAD_REQUIRE(difference_alpha > 0, ConfigError, "eval.difference_alpha must be > 0");
    SGAD_REQUIRE(gallery_per_class >= 0, ConfigError, "eval.gallery_per_class must be >= 0");
    SGAD_REQUIRE(histogram_bins >= 1, ConfigError, "eval.histogram_bins must be >= 1");
  }
};

namespace detail {

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
std::string to_text(const T& v) {
  if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
  else if constexpr (std::is_same_v<T, float>) return format_float(v);
  else if constexpr (std::is_same_v<T, double>) return format_double(v);
  else if constexpr (std::is_same_v<T, std::string>) return v;
  else if constexpr (std::is_same_v<T, ScoreVariant>) return variant_name(v);
  else return std::to_string(v);
}

template <typename T>
T from_text(const std::string& key, const std::string& s) {
  if constexpr (std::is_same_v<T, bool>) return parse_bool(key, s);
  else if constexpr (std::is_same_v<T, std::string>) return s;
  else if constexpr (std::is_same_v<T, ScoreVariant>) return parse_variant(s);
  else return parse_number<T>(key, s);
}

// `access` is a generic lambda returning a reference to the member.
template <typename Access>
Field field(std::string key, Access access) {
  using T = std::remove_cvref_t<decltype(access(std::declval<RunConfig&>()))>;
  return {key, [access](const RunConfig& c) { return to_text<T>(access(c)); },
          [access, key](RunConfig& c, const std::string& s) { access(c) = from_text<T>(key, s); }};
}

#define SGAD_FIELD(key, expr) field(key, [](auto& c) -> auto& { return c.expr; })

inline const std::vector<Field>& fields() {
  static const std::vector<Field> f = {
      SGAD_FIELD("format_version", format_version),
      SGAD_FIELD("seed", seed),
      SGAD_FIELD("out_dir", out_dir),
      SGAD_FIELD("synth.side", synth.side),
      SGAD_FIELD("synth.train_count", synth.train_count),
      SGAD_FIELD("synth.test_normal", synth.test_normal),
      SGAD_FIELD("synth.test_diseased", synth.test_diseased),
      SGAD_FIELD("synth.augment", synth.augment_train),
      SGAD_FIELD("synth.texture", synth.texture),
      SGAD_FIELD("synth.shape_exponent", synth.shape_exponent),
      SGAD_FIELD("synth.seed", synth.seed),
      SGAD_FIELD("synth.lesion.min_count", synth.lesion.min_count),
      SGAD_FIELD("synth.lesion.max_count", synth.lesion.max_count),
      SGAD_FIELD("synth.lesion.min_radius", synth.lesion.min_radius),
      SGAD_FIELD("synth.lesion.max_radius", synth.lesion.max_radius),
      SGAD_FIELD("synth.lesion.min_fraction", synth.lesion.min_fraction),
      SGAD_FIELD("synth.lesion.max_fraction", synth.lesion.max_fraction),
      SGAD_FIELD("scenes.side", scenes.side),
      SGAD_FIELD("scenes.count", scenes.count),
      SGAD_FIELD("scenes.diseased_fraction", scenes.diseased_fraction),
      SGAD_FIELD("scenes.seed", scenes.seed),
      SGAD_FIELD("preprocess.side", preprocess.out_height),
      SGAD_FIELD("preprocess.iterations", preprocess.grabcut.iterations),
      SGAD_FIELD("preprocess.components", preprocess.grabcut.components),
      SGAD_FIELD("preprocess.gamma", preprocess.grabcut.gamma),
      SGAD_FIELD("preprocess.min_foreground_fraction", preprocess.min_foreground_fraction),
      SGAD_FIELD("preprocess.morph_kernel", preprocess.morph_kernel),
      SGAD_FIELD("model.side", model.side),
      SGAD_FIELD("model.latent_dim", model.latent_dim),
      SGAD_FIELD("model.base_width", model.base_width),
      SGAD_FIELD("train.batch_size", train.batch_size),
      SGAD_FIELD("train.epochs", train.epochs),
      SGAD_FIELD("train.lr", train.lr),
      SGAD_FIELD("train.beta1", train.beta1),
      SGAD_FIELD("train.beta2", train.beta2),
      SGAD_FIELD("train.bn_momentum", train.bn_momentum),
      SGAD_FIELD("train.checkpoint_every", checkpoint_every),
      SGAD_FIELD("train.feature_matching", train.objective.feature_matching),
      SGAD_FIELD("loss.adv", train.objective.weights.adv),
      SGAD_FIELD("loss.rec", train.objective.weights.rec),
      SGAD_FIELD("loss.lat", train.objective.weights.lat),
      SGAD_FIELD("loss.rec.x_g1", train.objective.rec_terms.x_g1),
      SGAD_FIELD("loss.rec.x_g2", train.objective.rec_terms.x_g2),
      SGAD_FIELD("loss.rec.g1_g2", train.objective.rec_terms.g1_g2),
      SGAD_FIELD("eval.variant", variant),
      SGAD_FIELD("eval.difference_alpha", difference_alpha),
      SGAD_FIELD("eval.gallery_per_class", gallery_per_class),
      SGAD_FIELD("eval.histogram_bins", histogram_bins),
  };
  return f;
}

#undef SGAD_FIELD

inline const Field* find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return &f;
  return nullptr;
}

// Values that follow from others: one seed drives model and training, and
// the square preprocess output shares one side.
inline void derive(RunConfig& c) {
  c.model.seed = c.seed;
  c.train.seed = c.seed;
  c.preprocess.out_width = c.preprocess.out_height;
}

}  // namespace detail

inline std::string env_name(const std::string& key) {
  std::string s = "SGAD_";
  for (char ch : key) s += ch == '.' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return s;
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str())) return std::string(v);
  return std::nullopt;
}

inline void apply_kv(RunConfig& c, const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    const auto* f = detail::find_field(k);
    if (!f) throw ConfigError("unknown config key: " + k);
    f->set(c, v);
  }
  detail::derive(c);
}

// Every known key whose SGAD_ variable is set takes that value.
inline void apply_env(RunConfig& c, const EnvLookup& env) {
  for (const auto& f : detail::fields())
    if (auto v = env(env_name(f.key))) f.set(c, *v);
  detail::derive(c);
}

// Defaults, then the file, then the environment. format_version is required.
inline RunConfig parse_run_config(std::string_view text, const EnvLookup& env = process_env) {
  const KeyValues kv = parse_kv(text);
  SGAD_REQUIRE(kv.contains("format_version"), ConfigError, "config is missing format_version");
  RunConfig c;
  apply_kv(c, kv);
  apply_env(c, env);
  c.validate();
  return c;
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f.good()) throw ConfigError("cannot read config " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline RunConfig load_run_config(const std::filesystem::path& path, const EnvLookup& env = process_env) {
  try {
    return parse_run_config(read_text_file(path), env);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// Defaults plus environment, for commands run without a config file.
inline RunConfig default_run_config(const EnvLookup& env = process_env) {
  RunConfig c;
  detail::derive(c);
  apply_env(c, env);
  c.validate();
  return c;
}

// Every key with its resolved value.
inline KeyValues to_kv(const RunConfig& c) {
  KeyValues kv;
  for (const auto& f : detail::fields()) kv[f.key] = f.get(c);
  return kv;
}

inline std::string config_hash(const RunConfig& c) {
  const std::string text = format_kv(to_kv(c));
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", ::sgad::detail::crc32_of(text.data(), text.size()));
  return buf;
}

}  // namespace sgad::app
