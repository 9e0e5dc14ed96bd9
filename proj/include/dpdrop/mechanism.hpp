// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Per-step randomization primitives: L2 gradient clipping, Gaussian update
// noise, and the bookkeeping that reads the additive noise back as an
// effective multiplicative (Gaussian-dropout) rate per weight.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dpdrop/errors.hpp"

namespace dpdrop {

// Noise configuration for one training step: per-layer L2 clip threshold C
// and noise multiplier sigma. The per-coordinate noise is N(0, 4 C^2 sigma^2),
// i.e. standard deviation 2 C sigma, calibrated to the sensitivity 2C of a
// clipped gradient sum.
struct NoiseSpec {
  double clip_threshold = 1.0;  // C
  double sigma = 1.0;           // noise multiplier

  double sensitivity() const { return 2.0 * clip_threshold; }
  double noise_std() const { return 2.0 * clip_threshold * sigma; }
  double noise_variance() const { return noise_std() * noise_std(); }
};

// Scales a gradient so its L2 norm is at most clip_threshold:
//   g / max(1, ||g||_2 / C).
// The zero vector maps to itself; a vector within the bound is returned
// unchanged (bit-exact), otherwise the result has norm exactly C up to
// rounding.
inline Eigen::VectorXd clip_by_l2(const Eigen::VectorXd& gradient,
                                  double clip_threshold) {
  if (!(clip_threshold > 0.0))
    throw DomainError("clip_by_l2: clip_threshold must be positive");
  const double norm = gradient.norm();
  if (norm <= clip_threshold) return gradient;
  return gradient * (clip_threshold / norm);
}

// The scale factor clip_by_l2 applies: min(1, C / ||g||).
inline double clip_scale(double norm, double clip_threshold) {
  if (!(clip_threshold > 0.0))
    throw DomainError("clip_scale: clip_threshold must be positive");
  if (norm <= clip_threshold) return 1.0;
  return clip_threshold / norm;
}

// Draws `dimension` i.i.d. N(0, 4 C^2 sigma^2) coordinates from the caller's
// rng. Deterministic given the rng state; the rng advances.
inline Eigen::VectorXd sample_update_noise(Eigen::Index dimension,
                                           const NoiseSpec& spec,
                                           std::mt19937_64& rng) {
  if (dimension < 1)
    throw DomainError("sample_update_noise: dimension must be >= 1");
  if (!(spec.clip_threshold > 0.0) || !(spec.sigma >= 0.0))
    throw DomainError(
        "sample_update_noise: clip_threshold must be positive and sigma "
        "non-negative");
  std::normal_distribution<double> normal(0.0, spec.noise_std());
  Eigen::VectorXd out(dimension);
  for (Eigen::Index i = 0; i < dimension; ++i) out[i] = normal(rng);
  return out;
}

// Per-parameter effective dropout rates. Entries are defined only where the
// weight magnitude reaches the floor (the recovery alpha = 4 C^2 sigma^2 /
// theta^2 is singular at zero); undefined entries hold zeros, never NaN.
struct DropoutRateMap {
  Eigen::ArrayXd alpha;      // variance ratio of the equivalent N(1, alpha)
  Eigen::ArrayXd drop_prob;  // equivalent Bernoulli rate p = alpha/(1+alpha)
  std::vector<bool> defined;
};

// Reads the additive noise spec back as a per-weight multiplicative rate:
// alpha_j = 4 C^2 sigma^2 / theta_j^2 wherever |theta_j| >= floor.
inline DropoutRateMap dropout_alpha_from_noise(const NoiseSpec& spec,
                                               const Eigen::VectorXd& theta,
                                               double floor = 1e-8) {
  if (!(floor > 0.0))
    throw DomainError("dropout_alpha_from_noise: floor must be positive");
  const double variance = spec.noise_variance();
  DropoutRateMap map;
  map.alpha = Eigen::ArrayXd::Zero(theta.size());
  map.drop_prob = Eigen::ArrayXd::Zero(theta.size());
  map.defined.assign(static_cast<size_t>(theta.size()), false);
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    if (std::abs(theta[i]) < floor) continue;
    const double alpha = variance / (theta[i] * theta[i]);
    map.alpha[i] = alpha;
    map.drop_prob[i] = alpha / (1.0 + alpha);
    map.defined[static_cast<size_t>(i)] = true;
  }
  return map;
}

// p -> alpha = p / (1 - p); inverse of alpha -> alpha / (1 + alpha).
inline double drop_prob_to_alpha(double p) {
  if (!(p >= 0.0 && p < 1.0))
    throw DomainError("drop_prob_to_alpha: p must lie in [0, 1)");
  return p / (1.0 - p);
}

// Summary statistics over the defined entries of a DropoutRateMap, as
// serialized into privacy reports.
struct DropoutSummary {
  long defined_count = 0;
  long total_count = 0;
  double alpha_min = 0.0;
  double alpha_median = 0.0;
  double alpha_max = 0.0;
  double p_min = 0.0;
  double p_median = 0.0;
  double p_max = 0.0;
};

inline DropoutSummary summarize(const DropoutRateMap& map) {
  DropoutSummary s;
  s.total_count = static_cast<long>(map.alpha.size());
  std::vector<double> alphas;
  alphas.reserve(static_cast<size_t>(map.alpha.size()));
  for (Eigen::Index i = 0; i < map.alpha.size(); ++i)
    if (map.defined[static_cast<size_t>(i)]) alphas.push_back(map.alpha[i]);
  s.defined_count = static_cast<long>(alphas.size());
  if (alphas.empty()) return s;
  std::sort(alphas.begin(), alphas.end());
  const size_t n = alphas.size();
  const auto to_p = [](double a) { return a / (1.0 + a); };
  s.alpha_min = alphas.front();
  s.alpha_max = alphas.back();
  s.p_min = to_p(s.alpha_min);
  s.p_max = to_p(s.alpha_max);
  if (n % 2 == 1) {
    s.alpha_median = alphas[n / 2];
    s.p_median = to_p(alphas[n / 2]);
  } else {
    s.alpha_median = 0.5 * (alphas[n / 2 - 1] + alphas[n / 2]);
    // p is a monotone transform of alpha, so the sorted order carries over;
    // the even-count median averages the transformed middle pair.
    s.p_median = 0.5 * (to_p(alphas[n / 2 - 1]) + to_p(alphas[n / 2]));
  }
  return s;
}

}  // namespace dpdrop