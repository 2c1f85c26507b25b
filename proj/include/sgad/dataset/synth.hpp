#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "sgad/dataset/augment.hpp"
#include "sgad/dataset/sample.hpp"
#include "sgad/image.hpp"
#include "sgad/segmentation/grabcut.hpp"

namespace sgad::data {

struct LesionParams {
  int min_count = 1;
  int max_count = 5;
  double min_radius = 0.025;  // fraction of the image side
  double max_radius = 0.08;
  double min_fraction = 0.005;  // lesion pixels / body pixels
  double max_fraction = 0.15;
  std::array<float, 3> color{0.30f, 0.17f, 0.07f};

  void validate() const {
    SGAD_REQUIRE(min_count >= 1 && max_count >= min_count, InvalidArgument, "lesion count range invalid");
    SGAD_REQUIRE(min_radius > 0 && max_radius >= min_radius, InvalidArgument, "lesion radius range invalid");
    SGAD_REQUIRE(min_fraction >= 0 && max_fraction > min_fraction && max_fraction <= 1, InvalidArgument,
                 "lesion fraction range invalid");
  }
};

struct SynthConfig {
  int side = 64;
  int train_count = 512;  // after augmentation
  int test_normal = 128;
  int test_diseased = 128;
  bool augment_train = true;
  double texture = 0.04;         // per-pixel multiplicative brightness noise on the fruit
  double shape_exponent = 2.5;   // 2 is an ellipse, larger is boxier
  LesionParams lesion;
  std::uint64_t seed = 42;

  void validate() const {
    SGAD_REQUIRE(side >= 8, InvalidArgument, "synth: side must be >= 8");
    SGAD_REQUIRE(train_count > 0 && test_normal > 0 && test_diseased > 0, InvalidArgument,
                 "synth: sample counts must be positive");
    SGAD_REQUIRE(texture >= 0 && texture < 0.5, InvalidArgument, "synth: texture must be in [0, 0.5)");
    SGAD_REQUIRE(shape_exponent >= 1.5 && shape_exponent <= 8, InvalidArgument,
                 "synth: shape exponent must be in [1.5, 8]");
    lesion.validate();
  }
};

// Fruit silhouette: superellipse |u/a|^n + |v/b|^n <= 1 in a frame rotated by `angle`.
struct PepperGeometry {
  double cx = 0, cy = 0;
  double a = 1, b = 1;  // semi-axes in pixels, a >= b
  double angle = 0;     // radians
  double exponent = 2;

  // Local coordinates of pixel centre (x + 0.5, y + 0.5).
  std::array<double, 2> local(int x, int y) const {
    const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
    const double c = std::cos(angle), s = std::sin(angle);
    return {dx * c + dy * s, -dx * s + dy * c};
  }
  // 1 on the boundary, < 1 inside.
  double radius(double u, double v) const {
    return std::pow(std::pow(std::abs(u / a), exponent) + std::pow(std::abs(v / b), exponent), 1.0 / exponent);
  }
};

struct PepperStyle {
  double hue = 0;  // 0 green .. 1 red
  double hue_wave = 0.08;
  double phase = 0;
  double highlight = 0.2;
  double brightness = 1.0;
};

struct Lesion {
  double x = 0, y = 0, r = 0;  // centre in pixel coordinates, radius in pixels
  std::array<float, 3> color{};
  float opacity = 1.0f;
};

struct PepperRender {
  Image normal;       // fruit without lesions
  Image image;        // fruit with lesions (equals `normal` for healthy samples)
  Image body_mask;    // 1 where the pixel centre lies inside the silhouette
  Image lesion_mask;  // 1 where a lesion touches the pixel
  PepperGeometry geometry;
  std::vector<Lesion> lesions;

  double lesion_fraction() const {
    double body = 0, les = 0;
    for (std::size_t i = 0; i < body_mask.data.size(); ++i) {
      body += body_mask.data[i];
      les += lesion_mask.data[i];
    }
    return body > 0 ? les / body : 0.0;
  }
};

// Per-sample stream keyed by (seed, split, index), so any subset can be
// regenerated independently of the others.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint32_t split, std::uint32_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), split, index};
  return std::mt19937_64(seq);
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double fruit_shade(double v_norm) { return 0.62 + 0.38 * std::sqrt(std::max(0.0, 1.0 - v_norm * v_norm)); }

inline std::array<double, 3> fruit_color(const PepperStyle& st, double u_norm, double v_norm) {
  static constexpr std::array<double, 3> green{0.18, 0.52, 0.12}, red{0.74, 0.12, 0.08};
  const double t = std::clamp(st.hue + st.hue_wave * std::sin(std::numbers::pi * u_norm + st.phase), 0.0, 1.0);
  const double shade = fruit_shade(v_norm);
  const double spec = st.highlight * std::exp(-std::pow((v_norm + 0.45) / 0.18, 2)) *
                      std::max(0.0, 1.0 - u_norm * u_norm);
  std::array<double, 3> c{};
  for (int k = 0; k < 3; ++k) c[k] = st.brightness * shade * ((1 - t) * green[k] + t * red[k]) + spec;
  return c;
}

}  // namespace detail

inline PepperGeometry random_geometry(std::mt19937_64& rng, int height, int width, double exponent,
                                      bool any_orientation, double scale = 1.0) {
  const double side = std::min(height, width) * scale;
  PepperGeometry g;
  g.exponent = exponent;
  g.a = detail::uniform(rng, 0.36, 0.44) * side;
  g.b = detail::uniform(rng, 0.16, 0.21) * side;
  g.angle = any_orientation ? detail::uniform(rng, 0, std::numbers::pi)
                            : detail::uniform(rng, -15.0, 15.0) * std::numbers::pi / 180.0;
  g.cx = width / 2.0 + detail::uniform(rng, -0.04, 0.04) * side;
  g.cy = height / 2.0 + detail::uniform(rng, -0.04, 0.04) * side;
  return g;
}

inline PepperStyle random_style(std::mt19937_64& rng) {
  PepperStyle st;
  const bool red = detail::uniform(rng, 0, 1) < 0.5;
  st.hue = red ? detail::uniform(rng, 0.75, 1.0) : detail::uniform(rng, 0.0, 0.25);
  st.hue_wave = detail::uniform(rng, 0.03, 0.12);
  st.phase = detail::uniform(rng, 0, 2 * std::numbers::pi);
  st.highlight = detail::uniform(rng, 0.10, 0.25);
  st.brightness = detail::uniform(rng, 0.85, 1.1);
  return st;
}

// Lesion disks fully inside the silhouette, resampled until the covered share
// of the body falls inside the configured range.
inline std::vector<Lesion> random_lesions(std::mt19937_64& rng, const PepperGeometry& g, int side,
                                          const LesionParams& p, const Image& body_mask) {
  const double c = std::cos(g.angle), s = std::sin(g.angle);
  auto disk_inside = [&](double u, double v, double r) {
    for (int k = 0; k < 24; ++k) {
      const double t = 2 * std::numbers::pi * k / 24;
      if (g.radius(u + r * std::cos(t), v + r * std::sin(t)) > 1.0) return false;
    }
    return true;
  };
  double body = 0;
  for (float v : body_mask.data) body += v;
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int count = std::uniform_int_distribution<int>(p.min_count, p.max_count)(rng);
    std::vector<Lesion> out;
    for (int k = 0; k < count; ++k) {
      Lesion l;
      l.r = detail::uniform(rng, p.min_radius, p.max_radius) * side;
      for (int tries = 0; tries < 200; ++tries) {
        const double u = detail::uniform(rng, -g.a, g.a), v = detail::uniform(rng, -g.b, g.b);
        if (!disk_inside(u, v, l.r)) continue;
        l.x = g.cx + u * c - v * s;
        l.y = g.cy + u * s + v * c;
        const double tone = detail::uniform(rng, 0.6, 1.1);
        for (int ch = 0; ch < 3; ++ch) l.color[ch] = static_cast<float>(p.color[ch] * tone);
        l.opacity = static_cast<float>(detail::uniform(rng, 0.85, 1.0));
        out.push_back(l);
        break;
      }
    }
    if (out.empty()) continue;
    double covered = 0;
    for (int y = 0; y < body_mask.height; ++y)
      for (int x = 0; x < body_mask.width; ++x) {
        if (body_mask.at(y, x) < 0.5f) continue;
        for (const auto& l : out)
          if (std::hypot(x + 0.5 - l.x, y + 0.5 - l.y) < l.r) {
            covered += 1;
            break;
          }
      }
    const double frac = body > 0 ? covered / body : 0.0;
    if (frac >= p.min_fraction && frac <= p.max_fraction) return out;
  }
  throw Error("synth: could not place lesions inside the fruit");
}

// Draw the fruit, then any lesions, over `background`. Pixel values are
// snapped to 8-bit levels so that files written as PNG reload exactly.
inline PepperRender render_pepper(const Image& background, const PepperGeometry& g, const PepperStyle& st,
                                  double texture, std::mt19937_64& rng, const std::vector<Lesion>& lesions = {}) {
  SGAD_REQUIRE(background.channels == 3, InvalidArgument, "render_pepper: background must be RGB");
  const int H = background.height, W = background.width;
  PepperRender r;
  r.geometry = g;
  r.lesions = lesions;
  r.normal = background;
  r.body_mask = Image(H, W, 1);
  r.lesion_mask = Image(H, W, 1);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> grain(static_cast<std::size_t>(H) * W);
  for (double& v : grain) v = 1.0 + texture * noise(rng);

  std::vector<double> body_alpha(grain.size(), 0.0), shade(grain.size(), 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const auto [u, v] = g.local(x, y);
      const double rad = g.radius(u, v);
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      // Roughly one pixel of anti-aliasing along the short axis.
      const double alpha = std::clamp((1.0 - rad) * g.b + 0.5, 0.0, 1.0);
      if (rad <= 1.0) r.body_mask.data[i] = 1.0f;
      body_alpha[i] = alpha;
      if (alpha <= 0) continue;
      const double un = std::clamp(u / g.a, -1.0, 1.0), vn = std::clamp(v / g.b, -1.0, 1.0);
      shade[i] = detail::fruit_shade(vn);
      const auto col = detail::fruit_color(st, un, vn);
      for (int k = 0; k < 3; ++k) {
        float& px = r.normal.at(y, x, k);
        px = static_cast<float>((1 - alpha) * px + alpha * std::clamp(grain[i] * col[k], 0.0, 1.0));
      }
    }
  quantize_8bit(r.normal);
  r.image = r.normal;
  for (const auto& l : lesions) {
    const int x0 = std::max(0, static_cast<int>(std::floor(l.x - l.r))), x1 = std::min(W - 1, static_cast<int>(l.x + l.r));
    const int y0 = std::max(0, static_cast<int>(std::floor(l.y - l.r))), y1 = std::min(H - 1, static_cast<int>(l.y + l.r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double d = std::hypot(x + 0.5 - l.x, y + 0.5 - l.y);
        if (d >= l.r) continue;
        const std::size_t i = static_cast<std::size_t>(y) * W + x;
        const double a = l.opacity * std::clamp(l.r - d, 0.0, 1.0) * body_alpha[i];
        if (a <= 0) continue;
        r.lesion_mask.data[i] = 1.0f;
        for (int k = 0; k < 3; ++k) {
          float& px = r.image.at(y, x, k);
          const double target = std::clamp(grain[i] * (0.5 + 0.5 * shade[i]) * l.color[k], 0.0, 1.0);
          px = static_cast<float>((1 - a) * px + a * target);
        }
      }
  }
  quantize_8bit(r.image);
  return r;
}

enum class Split : std::uint32_t { Train = 0, TestNormal = 1, TestDiseased = 2, Scene = 3 };

// Pixels whose centre lies inside the silhouette.
inline Image silhouette_mask(int height, int width, const PepperGeometry& g) {
  Image m(height, width, 1);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto [u, v] = g.local(x, y);
      if (g.radius(u, v) <= 1.0) m.at(y, x) = 1.0f;
    }
  return m;
}

// One centred fruit on a black square canvas; diseased samples add lesions.
inline PepperRender render_sample(const SynthConfig& cfg, Split split, int index) {
  auto rng = sample_rng(cfg.seed, static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(index));
  const auto geom = random_geometry(rng, cfg.side, cfg.side, cfg.shape_exponent, false);
  const auto style = random_style(rng);
  std::vector<Lesion> lesions;
  if (split == Split::TestDiseased)
    lesions = random_lesions(rng, geom, cfg.side, cfg.lesion, silhouette_mask(cfg.side, cfg.side, geom));
  return render_pepper(Image(cfg.side, cfg.side, 3), geom, style, cfg.texture, rng, lesions);
}

inline std::string sample_id(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05d", prefix, index);
  return buf;
}

struct SyntheticSet {
  std::vector<Sample> train;
  std::vector<Sample> test;  // normals first, then diseased
};

// Train: ceil(N/7) healthy bases, each expanded by the seven dihedral copies,
// truncated to N. Test sets are not augmented.
inline SyntheticSet generate_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  SyntheticSet out;
  const int bases = cfg.augment_train ? (cfg.train_count + 6) / 7 : cfg.train_count;
  std::vector<Sample> train;
  for (int i = 0; i < bases; ++i)
    train.push_back({render_sample(cfg, Split::Train, i).image, 0, sample_id("train", i)});
  if (cfg.augment_train) {
    train = augment(train);
    train.resize(cfg.train_count);
  }
  out.train = std::move(train);
  for (int i = 0; i < cfg.test_normal; ++i)
    out.test.push_back({render_sample(cfg, Split::TestNormal, i).image, 0, sample_id("normal", i)});
  for (int i = 0; i < cfg.test_diseased; ++i)
    out.test.push_back({render_sample(cfg, Split::TestDiseased, i).image, 1, sample_id("diseased", i)});
  return out;
}

struct SceneConfig {
  int side = 128;
  int count = 50;
  double diseased_fraction = 0.5;
  double texture = 0.04;
  double shape_exponent = 2.5;
  LesionParams lesion;
  std::uint64_t seed = 42;

  void validate() const {
    SGAD_REQUIRE(side >= 32, InvalidArgument, "scenes: side must be >= 32");
    SGAD_REQUIRE(count > 0, InvalidArgument, "scenes: count must be positive");
    SGAD_REQUIRE(diseased_fraction >= 0 && diseased_fraction <= 1, InvalidArgument,
                 "scenes: diseased fraction must be in [0, 1]");
    lesion.validate();
  }
};

struct Scene {
  Sample sample;
  seg::Box rect;
  Image truth_mask;  // fruit silhouette
};

// Soil-like backdrop: a base colour, a few low-frequency waves and pixel noise.
inline Image soil_background(std::mt19937_64& rng, int side) {
  Image bg(side, side, 3);
  const double base[3] = {detail::uniform(rng, 0.33, 0.42), detail::uniform(rng, 0.25, 0.31),
                          detail::uniform(rng, 0.15, 0.20)};
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves;
  for (int k = 0; k < 3; ++k)
    waves.push_back({detail::uniform(rng, -0.15, 0.15), detail::uniform(rng, -0.15, 0.15),
                     detail::uniform(rng, 0, 2 * std::numbers::pi), detail::uniform(rng, 0.01, 0.04)});
  std::normal_distribution<double> noise(0.0, 0.03);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      double w = 0;
      for (const auto& wv : waves) w += wv.amp * std::sin(wv.kx * x + wv.ky * y + wv.phase);
      const double n = noise(rng);
      for (int c = 0; c < 3; ++c) bg.at(y, x, c) = static_cast<float>(std::clamp(base[c] + w + n, 0.0, 1.0));
    }
  return bg;
}

// A fruit at a random position and orientation on soil, with a padded
// axis-aligned box around it.
inline Scene render_scene(const SceneConfig& cfg, int index) {
  auto rng = sample_rng(cfg.seed, static_cast<std::uint32_t>(Split::Scene), static_cast<std::uint32_t>(index));
  const bool diseased = detail::uniform(rng, 0, 1) < cfg.diseased_fraction;
  const Image bg = soil_background(rng, cfg.side);
  auto geom = random_geometry(rng, cfg.side, cfg.side, cfg.shape_exponent, true, 0.55);
  const double margin = geom.a + 10;
  geom.cx = detail::uniform(rng, margin, cfg.side - margin);
  geom.cy = detail::uniform(rng, margin, cfg.side - margin);
  const auto style = random_style(rng);
  const int pad = std::uniform_int_distribution<int>(4, 8)(rng);
  std::vector<Lesion> lesions;
  if (diseased)
    lesions = random_lesions(rng, geom, static_cast<int>(cfg.side * 0.55), cfg.lesion,
                             silhouette_mask(cfg.side, cfg.side, geom));
  const auto r = render_pepper(bg, geom, style, cfg.texture, rng, lesions);
  Scene sc;
  sc.truth_mask = r.body_mask;
  int x0 = cfg.side, y0 = cfg.side, x1 = -1, y1 = -1;
  for (int y = 0; y < cfg.side; ++y)
    for (int x = 0; x < cfg.side; ++x)
      if (r.body_mask.at(y, x) > 0.5f) {
        x0 = std::min(x0, x), x1 = std::max(x1, x), y0 = std::min(y0, y), y1 = std::max(y1, y);
      }
  x0 = std::max(0, x0 - pad), y0 = std::max(0, y0 - pad);
  x1 = std::min(cfg.side - 1, x1 + pad), y1 = std::min(cfg.side - 1, y1 + pad);
  sc.rect = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
  sc.sample = {r.image, diseased ? 1 : 0, sample_id("scene", index)};
  return sc;
}

}  // namespace sgad::data
