#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include "sgad/error.hpp"

namespace sgad::seg {

using Color = Eigen::Vector3d;

struct GaussianComponent {
  double weight = 0;
  Color mean = Color::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Identity();
  Eigen::Matrix3d inv_cov = Eigen::Matrix3d::Identity();
  double log_norm = 0;  // log of the Gaussian normalising constant
};

// Mixture of full-covariance RGB Gaussians.
struct GmmModel {
  std::vector<GaussianComponent> components;

  int size() const { return static_cast<int>(components.size()); }

  double component_log_density(int k, const Color& c) const {
    const auto& g = components[k];
    const Color d = c - g.mean;
    return g.log_norm - 0.5 * d.dot(g.inv_cov * d);
  }

  // log sum_k pi_k N(c | k)
  double log_likelihood(const Color& c) const {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> terms;
    terms.reserve(components.size());
    for (int k = 0; k < size(); ++k) {
      if (components[k].weight <= 0) continue;
      terms.push_back(std::log(components[k].weight) + component_log_density(k, c));
      best = std::max(best, terms.back());
    }
    if (terms.empty()) return -std::numeric_limits<double>::infinity();
    double s = 0;
    for (double t : terms) s += std::exp(t - best);
    return best + std::log(s);
  }

  int most_likely_component(const Color& c) const {
    int arg = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < size(); ++k) {
      if (components[k].weight <= 0) continue;
      const double v = std::log(components[k].weight) + component_log_density(k, c);
      if (v > best) {
        best = v;
        arg = k;
      }
    }
    return arg;
  }
};

// Hard-assignment fit: one Gaussian per label in [0, k). Covariances get
// `cov_eps` added to the diagonal so every component stays positive definite.
inline GmmModel fit_gmm(const std::vector<Color>& samples, const std::vector<int>& assignment, int k,
                        double cov_eps = 1e-6) {
  SGAD_REQUIRE(samples.size() == assignment.size(), ShapeError, "fit_gmm: assignment size mismatch");
  SGAD_REQUIRE(!samples.empty() && k >= 1, InvalidArgument, "fit_gmm: no samples");
  std::vector<double> count(k, 0);
  std::vector<Color> sum(k, Color::Zero());
  std::vector<Eigen::Matrix3d> outer(k, Eigen::Matrix3d::Zero());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const int a = assignment[i];
    count[a] += 1;
    sum[a] += samples[i];
    outer[a] += samples[i] * samples[i].transpose();
  }
  GmmModel g;
  g.components.resize(k);
  const double total = static_cast<double>(samples.size());
  for (int j = 0; j < k; ++j) {
    auto& c = g.components[j];
    if (count[j] == 0) {
      c.weight = 0;
      continue;
    }
    c.weight = count[j] / total;
    c.mean = sum[j] / count[j];
    c.cov = outer[j] / count[j] - c.mean * c.mean.transpose();
    c.cov = 0.5 * (c.cov + c.cov.transpose());
    c.cov.diagonal().array() += cov_eps;
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(c.cov);
    double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < cov_eps) {
      c.cov.diagonal().array() += cov_eps - min_eig;
      es.compute(c.cov);
    }
    c.inv_cov = c.cov.inverse();
    const double log_det = es.eigenvalues().array().log().sum();
    c.log_norm = -0.5 * (3.0 * std::log(2.0 * std::numbers::pi) + log_det);
  }
  return g;
}

// Deterministic k-means (k-means++ seeding from a fixed stream, then Lloyd
// iterations). Returns labels in [0, min(k, n)).
inline std::vector<int> kmeans_labels(const std::vector<Color>& samples, int k, int iterations = 10,
                                      std::uint64_t seed = 0x6772616263757431ull) {
  SGAD_REQUIRE(!samples.empty(), InvalidArgument, "kmeans: no samples");
  k = std::min<int>(k, static_cast<int>(samples.size()));
  std::mt19937_64 rng(seed);
  std::vector<Color> centers;
  centers.push_back(samples[std::uniform_int_distribution<std::size_t>(0, samples.size() - 1)(rng)]);
  std::vector<double> d2(samples.size(), std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      d2[i] = std::min(d2[i], (samples[i] - centers.back()).squaredNorm());
      total += d2[i];
    }
    if (total <= 0) break;  // fewer distinct colours than k
    double r = std::uniform_real_distribution<double>(0, total)(rng);
    std::size_t pick = samples.size() - 1;
    for (std::size_t i = 0; i < samples.size(); ++i) {
      r -= d2[i];
      if (r <= 0) {
        pick = i;
        break;
      }
    }
    centers.push_back(samples[pick]);
  }
  std::vector<int> label(samples.size(), 0);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = (samples[i] - centers[c]).squaredNorm();
        if (d < best) {
          best = d;
          label[i] = static_cast<int>(c);
        }
      }
    }
    std::vector<Color> acc(centers.size(), Color::Zero());
    std::vector<double> cnt(centers.size(), 0);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      acc[label[i]] += samples[i];
      cnt[label[i]] += 1;
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (cnt[c] > 0) centers[c] = acc[c] / cnt[c];
  }
  return label;
}

}  // namespace sgad::seg
