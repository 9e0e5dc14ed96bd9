// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Privacy accountant: Gaussian-mechanism calibration, advanced composition,
// subsampling amplification, zCDP composition/conversion, and the two
// inverse pipelines that recover a noise multiplier from a total budget.
//
// Pipeline layout (shared by both accounting methods):
//   * the total failure probability delta_tot is split into a composition
//     slack delta_slack = delta_split * delta_tot and a per-iteration
//     delta_iter = (delta_tot - delta_slack) / (T * nu);
//   * one training iteration is a Gaussian mechanism at (eps_iter,
//     delta_iter) with eps_iter = sqrt(2 ln(1.25/delta_iter)) / sigma,
//     amplified by the subsampling ratio nu;
//   * a run is accounted as one composition unit per expected participation
//     of a record, i.e. round(T * nu) units (with T * nu = epochs). The
//     advanced-composition path composes the amplified budget with the
//     slack; the zCDP path converts the amplified budget to rho, adds, and
//     converts back at delta_tot.
// All logarithms are natural.

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dpdrop/errors.hpp"

namespace dpdrop {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// An (eps, delta) differential-privacy guarantee.
struct PrivacyBudget {
  double eps = 0.0;
  double delta = 0.0;
};

// A zero-concentrated differential-privacy guarantee.
struct ZcdpBudget {
  double rho = 0.0;
};

enum class AccountingMethod {
  kNone,
  kAdvancedComposition,
  kZcdp,
};

inline const char* to_string(AccountingMethod m) {
  switch (m) {
    case AccountingMethod::kNone:
      return "none";
    case AccountingMethod::kAdvancedComposition:
      return "ac";
    case AccountingMethod::kZcdp:
      return "zcdp";
  }
  return "unknown";
}

// Accounting-relevant shape of a training run.
struct AccountantConfig {
  long iterations = 1;          // T, total gradient steps
  double sampling_ratio = 1.0;  // nu = S/N
  double delta_split = 0.5;     // fraction of delta_tot reserved as slack
  AccountingMethod method = AccountingMethod::kZcdp;
};

namespace detail {

inline void check_delta(double delta, const char* who) {
  if (!(delta > 0.0 && delta < 1.0))
    throw DomainError(std::string(who) + ": delta must lie in (0, 1), got " +
                      std::to_string(delta));
}

inline void check_positive(double v, const char* who, const char* name) {
  if (!(v > 0.0))
    throw DomainError(std::string(who) + ": " + name +
                      " must be positive, got " + std::to_string(v));
}

inline void check_config(const AccountantConfig& cfg, const char* who) {
  if (cfg.iterations < 1)
    throw DomainError(std::string(who) + ": iterations must be >= 1");
  if (!(cfg.sampling_ratio > 0.0 && cfg.sampling_ratio <= 1.0))
    throw DomainError(std::string(who) +
                      ": sampling_ratio must lie in (0, 1]");
  if (!(cfg.delta_split > 0.0 && cfg.delta_split < 1.0))
    throw DomainError(std::string(who) + ": delta_split must lie in (0, 1)");
}

// How delta_tot is divided and how many composition units a run spends.
struct IterationPlan {
  double delta_slack = 0.0;
  double delta_iter = 0.0;
  long compositions = 1;
};

inline IterationPlan plan_iterations(double delta_tot,
                                     const AccountantConfig& cfg) {
  IterationPlan plan;
  plan.delta_slack = cfg.delta_split * delta_tot;
  plan.delta_iter = (delta_tot - plan.delta_slack) /
                    (static_cast<double>(cfg.iterations) * cfg.sampling_ratio);
  plan.compositions = std::max<long>(
      1, std::lround(static_cast<double>(cfg.iterations) * cfg.sampling_ratio));
  return plan;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Gaussian mechanism
// ---------------------------------------------------------------------------

// Smallest noise standard deviation making one release (eps, delta)-DP.
inline double gaussian_sigma_for(double eps, double delta, double sensitivity) {
  detail::check_positive(eps, "gaussian_sigma_for", "eps");
  detail::check_delta(delta, "gaussian_sigma_for");
  detail::check_positive(sensitivity, "gaussian_sigma_for", "sensitivity");
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / eps;
}

// Exact algebraic inverse of gaussian_sigma_for.
inline double gaussian_eps_for(double sigma, double delta, double sensitivity) {
  detail::check_positive(sigma, "gaussian_eps_for", "sigma");
  detail::check_delta(delta, "gaussian_eps_for");
  detail::check_positive(sensitivity, "gaussian_eps_for", "sensitivity");
  return sensitivity * std::sqrt(2.0 * std::log(1.25 / delta)) / sigma;
}

// ---------------------------------------------------------------------------
// Composition and amplification
// ---------------------------------------------------------------------------

// k-fold adaptive composition of identical (eps_iter, delta_iter) mechanisms
// with slack delta_slack:
//   eps_tot = sqrt(2 k ln(1/delta_slack)) eps + k eps (e^eps - 1)
//   delta_tot = k delta_iter + delta_slack
inline PrivacyBudget advanced_compose(double eps_iter, double delta_iter,
                                      long k, double delta_slack) {
  if (k < 1) throw DomainError("advanced_compose: k must be >= 1");
  if (eps_iter < 0.0)
    throw DomainError("advanced_compose: eps_iter must be non-negative");
  if (delta_iter < 0.0 || delta_iter >= 1.0)
    throw DomainError("advanced_compose: delta_iter must lie in [0, 1)");
  detail::check_delta(delta_slack, "advanced_compose");
  const double kd = static_cast<double>(k);
  const double eps = std::sqrt(2.0 * kd * std::log(1.0 / delta_slack)) *
                         eps_iter +
                     kd * eps_iter * std::expm1(eps_iter);
  return {eps, kd * delta_iter + delta_slack};
}

// Running an (eps, delta)-DP mechanism on a uniformly subsampled nu-fraction
// yields (ln(1 + nu(e^eps - 1)), nu delta)-DP, valid when nu > delta.
inline PrivacyBudget amplify_by_subsampling(PrivacyBudget budget, double nu) {
  if (!(nu > 0.0 && nu <= 1.0))
    throw DomainError("amplify_by_subsampling: nu must lie in (0, 1]");
  if (budget.eps < 0.0)
    throw DomainError("amplify_by_subsampling: eps must be non-negative");
  if (!(nu > budget.delta))
    throw DomainError(
        "amplify_by_subsampling: requires nu > delta (the amplification "
        "guarantee does not apply); got nu = " +
        std::to_string(nu) + ", delta = " + std::to_string(budget.delta));
  double amplified;
  if (budget.eps > 30.0) {
    // ln(1 + nu(e^e - 1)) = e + ln nu + ln(1 + (1-nu) e^{-e} / nu),
    // stable when e^eps would overflow.
    amplified = budget.eps + std::log(nu) +
                std::log1p((1.0 - nu) * std::exp(-budget.eps) / nu);
  } else {
    amplified = std::log1p(nu * std::expm1(budget.eps));
  }
  return {amplified, nu * budget.delta};
}

// Algebraic inverse of amplify_by_subsampling.
inline PrivacyBudget deamplify(PrivacyBudget amplified, double nu) {
  if (!(nu > 0.0 && nu <= 1.0))
    throw DomainError("deamplify: nu must lie in (0, 1]");
  if (amplified.eps < 0.0)
    throw DomainError("deamplify: eps must be non-negative");
  if (amplified.delta / nu >= 1.0)
    throw DomainError("deamplify: delta/nu must be < 1");
  double eps;
  if (amplified.eps > 30.0) {
    // ln(1 + (e^e - 1)/nu) = e - ln nu + ln(1 - (1-nu) e^{-e}).
    eps = amplified.eps - std::log(nu) +
          std::log1p(-(1.0 - nu) * std::exp(-amplified.eps));
  } else {
    eps = std::log1p(std::expm1(amplified.eps) / nu);
  }
  return {eps, amplified.delta / nu};
}

// ---------------------------------------------------------------------------
// zCDP
// ---------------------------------------------------------------------------

// A Gaussian release with the given L2 sensitivity and per-coordinate noise
// variance satisfies rho-zCDP with rho = sensitivity^2 / (2 variance).
inline ZcdpBudget zcdp_of_gaussian(double sensitivity, double noise_variance) {
  detail::check_positive(sensitivity, "zcdp_of_gaussian", "sensitivity");
  detail::check_positive(noise_variance, "zcdp_of_gaussian", "noise_variance");
  return {sensitivity * sensitivity / (2.0 * noise_variance)};
}

// zCDP composes additively.
inline ZcdpBudget zcdp_compose(const std::vector<ZcdpBudget>& budgets) {
  if (budgets.empty())
    throw DomainError("zcdp_compose: budget list must be non-empty");
  double rho = 0.0;
  for (const ZcdpBudget& b : budgets) {
    if (b.rho < 0.0)
      throw DomainError("zcdp_compose: rho must be non-negative");
    rho += b.rho;
  }
  return {rho};
}

// rho-zCDP implies (rho + 2 sqrt(rho ln(1/delta)), delta)-DP.
inline PrivacyBudget zcdp_to_dp(ZcdpBudget budget, double delta) {
  if (budget.rho < 0.0)
    throw DomainError("zcdp_to_dp: rho must be non-negative");
  detail::check_delta(delta, "zcdp_to_dp");
  return {budget.rho +
              2.0 * std::sqrt(budget.rho * std::log(1.0 / delta)),
          delta};
}

// zCDP cost of one Gaussian step calibrated to a per-iteration (eps, delta):
// rho = eps^2 / (4 ln(1.25/delta)).
inline ZcdpBudget dp_per_iter_to_rho(PrivacyBudget per_iter) {
  detail::check_positive(per_iter.eps, "dp_per_iter_to_rho", "eps");
  detail::check_delta(per_iter.delta, "dp_per_iter_to_rho");
  return {per_iter.eps * per_iter.eps /
          (4.0 * std::log(1.25 / per_iter.delta))};
}

// ---------------------------------------------------------------------------
// Forward accountants (sigma -> total budget)
// ---------------------------------------------------------------------------

// Advanced-composition path.
inline PrivacyBudget total_budget_ac(double sigma, double delta_tot,
                                     const AccountantConfig& cfg) {
  detail::check_positive(sigma, "total_budget_ac", "sigma");
  detail::check_delta(delta_tot, "total_budget_ac");
  detail::check_config(cfg, "total_budget_ac");
  const auto plan = detail::plan_iterations(delta_tot, cfg);
  const double eps_iter =
      std::sqrt(2.0 * std::log(1.25 / plan.delta_iter)) / sigma;
  const PrivacyBudget amplified =
      amplify_by_subsampling({eps_iter, plan.delta_iter}, cfg.sampling_ratio);
  const PrivacyBudget composed = advanced_compose(
      amplified.eps, amplified.delta, plan.compositions, plan.delta_slack);
  return {composed.eps, delta_tot};
}

// zCDP path.
inline PrivacyBudget total_budget_zcdp(double sigma, double delta_tot,
                                       const AccountantConfig& cfg) {
  detail::check_positive(sigma, "total_budget_zcdp", "sigma");
  detail::check_delta(delta_tot, "total_budget_zcdp");
  detail::check_config(cfg, "total_budget_zcdp");
  const auto plan = detail::plan_iterations(delta_tot, cfg);
  const double eps_iter =
      std::sqrt(2.0 * std::log(1.25 / plan.delta_iter)) / sigma;
  const PrivacyBudget amplified =
      amplify_by_subsampling({eps_iter, plan.delta_iter}, cfg.sampling_ratio);
  const double rho_step = dp_per_iter_to_rho(amplified).rho;
  const double rho_tot = static_cast<double>(plan.compositions) * rho_step;
  return {zcdp_to_dp({rho_tot}, delta_tot).eps, delta_tot};
}

// ---------------------------------------------------------------------------
// Inverse pipelines (total budget -> sigma)
// ---------------------------------------------------------------------------

namespace detail {

template <typename EpsOfSigma>
double bisect_sigma(double eps_tot, EpsOfSigma&& eps_of_sigma,
                    const char* who) {
  constexpr double kSigmaLo = 1e-3;
  constexpr double kSigmaHi = 1e4;
  const double eps_at_hi = eps_of_sigma(kSigmaHi);  // smallest achievable
  const double eps_at_lo = eps_of_sigma(kSigmaLo);  // largest achievable
  const auto num = [](double v) {
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), v);
    return std::string(buffer, result.ptr);
  };
  if (eps_tot < eps_at_hi || eps_tot > eps_at_lo)
    throw CalibrationError(
        std::string(who) + ": target eps " + num(eps_tot) +
            " outside the achievable range [" + num(eps_at_hi) + ", " +
            num(eps_at_lo) + "] for sigma in [1e-3, 1e4]",
        eps_at_hi, eps_at_lo);
  double lo = kSigmaLo, hi = kSigmaHi;
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double eps_mid = eps_of_sigma(mid);
    if (std::abs(eps_mid - eps_tot) <= 1e-12 * eps_tot) return mid;
    if (eps_mid > eps_tot)
      lo = mid;  // eps decreases in sigma
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

// Noise multiplier whose advanced-composition total equals eps_tot.
inline double calibrate_sigma_ac(double eps_tot, double delta_tot,
                                 const AccountantConfig& cfg) {
  detail::check_positive(eps_tot, "calibrate_sigma_ac", "eps_tot");
  detail::check_delta(delta_tot, "calibrate_sigma_ac");
  detail::check_config(cfg, "calibrate_sigma_ac");
  return detail::bisect_sigma(
      eps_tot,
      [&](double sigma) { return total_budget_ac(sigma, delta_tot, cfg).eps; },
      "calibrate_sigma_ac");
}

// Noise multiplier whose zCDP total equals eps_tot; closed-form chain.
inline double calibrate_sigma_zcdp(double eps_tot, double delta_tot,
                                   const AccountantConfig& cfg) {
  detail::check_positive(eps_tot, "calibrate_sigma_zcdp", "eps_tot");
  detail::check_delta(delta_tot, "calibrate_sigma_zcdp");
  detail::check_config(cfg, "calibrate_sigma_zcdp");
  const auto plan = detail::plan_iterations(delta_tot, cfg);
  // Invert eps = rho + 2 sqrt(rho L): sqrt(rho) = eps / (sqrt(L+eps)+sqrt(L)).
  const double L = std::log(1.0 / delta_tot);
  const double sqrt_rho =
      eps_tot / (std::sqrt(L + eps_tot) + std::sqrt(L));
  const double rho_tot = sqrt_rho * sqrt_rho;
  const double rho_step = rho_tot / static_cast<double>(plan.compositions);
  const double delta_amp = cfg.sampling_ratio * plan.delta_iter;
  const double eps_amp =
      2.0 * std::sqrt(rho_step * std::log(1.25 / delta_amp));
  const double eps_iter = deamplify({eps_amp, delta_amp},
                                    cfg.sampling_ratio).eps;
  return std::sqrt(2.0 * std::log(1.25 / plan.delta_iter)) / eps_iter;
}

// ---------------------------------------------------------------------------
// Full budget breakdown (for reports and the CLI)
// ---------------------------------------------------------------------------

struct BudgetBreakdown {
  AccountingMethod method = AccountingMethod::kNone;
  double sigma = 0.0;
  PrivacyBudget per_iteration;          // (eps_iter, delta_iter)
  PrivacyBudget amplified;              // after subsampling
  PrivacyBudget total;                  // (eps_tot, delta_tot)
  std::optional<double> rho_total;      // zCDP path only
  long iterations = 0;                  // T
  long compositions = 0;                // round(T nu)
  double sampling_ratio = 1.0;          // nu
  double delta_split = 0.5;
};

inline BudgetBreakdown budget_breakdown(double sigma, double delta_tot,
                                        const AccountantConfig& cfg) {
  detail::check_positive(sigma, "budget_breakdown", "sigma");
  detail::check_delta(delta_tot, "budget_breakdown");
  detail::check_config(cfg, "budget_breakdown");
  if (cfg.method == AccountingMethod::kNone)
    throw DomainError("budget_breakdown: method must be ac or zcdp");
  const auto plan = detail::plan_iterations(delta_tot, cfg);
  BudgetBreakdown out;
  out.method = cfg.method;
  out.sigma = sigma;
  out.iterations = cfg.iterations;
  out.compositions = plan.compositions;
  out.sampling_ratio = cfg.sampling_ratio;
  out.delta_split = cfg.delta_split;
  out.per_iteration = {
      std::sqrt(2.0 * std::log(1.25 / plan.delta_iter)) / sigma,
      plan.delta_iter};
  out.amplified =
      amplify_by_subsampling(out.per_iteration, cfg.sampling_ratio);
  if (cfg.method == AccountingMethod::kAdvancedComposition) {
    out.total = total_budget_ac(sigma, delta_tot, cfg);
  } else {
    const double rho_step = dp_per_iter_to_rho(out.amplified).rho;
    out.rho_total = static_cast<double>(plan.compositions) * rho_step;
    out.total = total_budget_zcdp(sigma, delta_tot, cfg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Renyi divergence between equal-variance Gaussians
// ---------------------------------------------------------------------------

// D_alpha(N(0, v) || N(shift, v)) = alpha shift^2 / (2 v).
inline double renyi_divergence_gaussian(double alpha, double mean_shift,
                                        double variance) {
  if (!(alpha > 1.0))
    throw DomainError("renyi_divergence_gaussian: alpha must be > 1");
  detail::check_positive(variance, "renyi_divergence_gaussian", "variance");
  return alpha * mean_shift * mean_shift / (2.0 * variance);
}

struct RenyiMcEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo evaluation of D_alpha via
//   (1/(alpha-1)) ln E_{x ~ N(0,v)} [ (p0(x)/p1(x))^{alpha-1} ],
// with the density ratio evaluated in closed form. The reported standard
// error propagates the sample error of the inner mean through the log.
inline RenyiMcEstimate estimate_renyi_mc(double alpha, double mean_shift,
                                         double variance, long samples,
                                         uint64_t seed) {
  if (!(alpha > 1.0))
    throw DomainError("estimate_renyi_mc: alpha must be > 1");
  detail::check_positive(variance, "estimate_renyi_mc", "variance");
  if (samples < 1000)
    throw DomainError("estimate_renyi_mc: need at least 1000 samples");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(variance));
  const double a1 = alpha - 1.0;
  double mean = 0.0, m2 = 0.0;  // Welford accumulation of the weights
  for (long i = 1; i <= samples; ++i) {
    const double x = normal(rng);
    // ln(p0(x)/p1(x)) for p0 = N(0,v), p1 = N(shift,v).
    const double log_ratio =
        (mean_shift * mean_shift - 2.0 * mean_shift * x) / (2.0 * variance);
    const double w = std::exp(a1 * log_ratio);
    const double delta = w - mean;
    mean += delta / static_cast<double>(i);
    m2 += delta * (w - mean);
  }
  const double var_w = m2 / static_cast<double>(samples - 1);
  const double se_mean =
      std::sqrt(var_w / static_cast<double>(samples));
  RenyiMcEstimate out;
  out.estimate = std::log(mean) / a1;
  out.std_error = se_mean / (mean * a1);  // delta method through ln
  return out;
}

}  // namespace dpdrop