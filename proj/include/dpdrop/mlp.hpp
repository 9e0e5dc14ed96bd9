// Copyright 2026 The DPDrop Authors
// SPDX-License-Identifier: Apache-2.0
//
// Single-hidden-layer ReLU + softmax classifier with the log-posterior
// gradient used by the SGLD training loop, per-example clipped gradient
// sums for the private path, the SGLD update rule, and evaluation helpers.
//
// Conventions: feature batches are row-major (one example per row, S x D);
// hidden_weights is D x H, output_weights H x K. The log posterior is
//   log p(theta) + (N/S) * sum_i log p(y_i | x_i, theta)
// with an isotropic Gaussian prior log p(theta) = -(lambda/2)||theta||^2.
// Updates ascend this objective.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <vector>

#include "dpdrop/errors.hpp"

namespace dpdrop {

// ---------------------------------------------------------------------------
// Types
// ---------------------------------------------------------------------------

struct ModelParams {
  Eigen::MatrixXd hidden_weights;  // D x H
  Eigen::VectorXd hidden_bias;     // H
  Eigen::MatrixXd output_weights;  // H x K
  Eigen::VectorXd output_bias;     // K

  Eigen::Index d_in() const { return hidden_weights.rows(); }
  Eigen::Index hidden() const { return hidden_weights.cols(); }
  Eigen::Index classes() const { return output_weights.cols(); }
};

// Gradients are shape-matched to the parameters they differentiate.
using Gradients = ModelParams;

// eta_t = eta0 / t^gamma.
struct StepSchedule {
  double eta0 = 0.1;
  double gamma = 1.0;
};

namespace detail {

inline void check_shapes(const ModelParams& a, const ModelParams& b,
                         const char* who) {
  if (a.hidden_weights.rows() != b.hidden_weights.rows() ||
      a.hidden_weights.cols() != b.hidden_weights.cols() ||
      a.hidden_bias.size() != b.hidden_bias.size() ||
      a.output_weights.rows() != b.output_weights.rows() ||
      a.output_weights.cols() != b.output_weights.cols() ||
      a.output_bias.size() != b.output_bias.size())
    throw ShapeError(std::string(who) + ": parameter shapes do not match");
}

inline void check_batch(const ModelParams& p, const Eigen::MatrixXd& x,
                        const char* who) {
  if (x.cols() != p.d_in())
    throw ShapeError(std::string(who) + ": feature dimension " +
                     std::to_string(x.cols()) + " does not match model D=" +
                     std::to_string(p.d_in()));
}

// Hidden activations and stabilized softmax probabilities for a batch.
struct ForwardPass {
  Eigen::MatrixXd hidden;  // S x H, post-ReLU
  Eigen::MatrixXd probs;   // S x K
};

inline ForwardPass run_forward(const ModelParams& p, const Eigen::MatrixXd& x,
                               const char* who) {
  check_batch(p, x, who);
  ForwardPass f;
  f.hidden = ((x * p.hidden_weights).rowwise() + p.hidden_bias.transpose())
                 .cwiseMax(0.0);
  Eigen::MatrixXd logits =
      (f.hidden * p.output_weights).rowwise() + p.output_bias.transpose();
  const Eigen::VectorXd row_max = logits.rowwise().maxCoeff();
  logits.colwise() -= row_max;
  f.probs = logits.array().exp();
  const Eigen::VectorXd row_sum = f.probs.rowwise().sum();
  f.probs.array().colwise() /= row_sum.array();
  return f;
}

inline void check_labels(const Eigen::VectorXi& y, Eigen::Index classes,
                         const char* who) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y[i] < 0 || y[i] >= classes)
      throw DomainError(std::string(who) + ": label " + std::to_string(y[i]) +
                        " out of range [0, " + std::to_string(classes) + ")");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

inline Gradients zero_like(const ModelParams& p) {
  Gradients g;
  g.hidden_weights = Eigen::MatrixXd::Zero(p.hidden_weights.rows(),
                                           p.hidden_weights.cols());
  g.hidden_bias = Eigen::VectorXd::Zero(p.hidden_bias.size());
  g.output_weights = Eigen::MatrixXd::Zero(p.output_weights.rows(),
                                           p.output_weights.cols());
  g.output_bias = Eigen::VectorXd::Zero(p.output_bias.size());
  return g;
}

// Fan-in-scaled Gaussian weights (std sqrt(2/fan_in), the ReLU-appropriate
// scale), zero biases; fully determined by the seed.
inline ModelParams init_params(Eigen::Index d_in, Eigen::Index hidden,
                               Eigen::Index classes, uint64_t seed) {
  if (d_in < 1 || hidden < 1 || classes < 1)
    throw DomainError("init_params: dimensions must be >= 1");
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.hidden_weights.resize(d_in, hidden);
  p.hidden_bias = Eigen::VectorXd::Zero(hidden);
  p.output_weights.resize(hidden, classes);
  p.output_bias = Eigen::VectorXd::Zero(classes);
  {
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(d_in)));
    for (Eigen::Index i = 0; i < d_in; ++i)
      for (Eigen::Index j = 0; j < hidden; ++j)
        p.hidden_weights(i, j) = normal(rng);
  }
  {
    std::normal_distribution<double> normal(
        0.0, std::sqrt(2.0 / static_cast<double>(hidden)));
    for (Eigen::Index i = 0; i < hidden; ++i)
      for (Eigen::Index j = 0; j < classes; ++j)
        p.output_weights(i, j) = normal(rng);
  }
  return p;
}

// ---------------------------------------------------------------------------
// Forward pass and objective
// ---------------------------------------------------------------------------

// Class probabilities for a batch: softmax(relu(x W1 + b1) W2 + b2) with
// per-row max subtraction. Rows sum to 1 within 1e-12.
inline Eigen::MatrixXd forward(const ModelParams& p, const Eigen::MatrixXd& x) {
  return detail::run_forward(p, x, "forward").probs;
}

// The gradient of the Gaussian prior alone: -prior_precision * theta.
inline Gradients prior_grad(const ModelParams& p, double prior_precision) {
  if (prior_precision < 0.0)
    throw DomainError("prior_grad: prior_precision must be non-negative");
  Gradients g;
  g.hidden_weights = -prior_precision * p.hidden_weights;
  g.hidden_bias = -prior_precision * p.hidden_bias;
  g.output_weights = -prior_precision * p.output_weights;
  g.output_bias = -prior_precision * p.output_bias;
  return g;
}

// Value of log p(theta) + (N/S) sum_i log p(y_i | x_i, theta), computed via
// log-sum-exp. Used by the finite-difference tests and diagnostics.
inline double log_posterior_value(const ModelParams& p,
                                  const Eigen::MatrixXd& x,
                                  const Eigen::VectorXi& y, long dataset_size,
                                  double prior_precision) {
  if (x.rows() < 1) throw DomainError("log_posterior_value: empty batch");
  if (x.rows() != y.size())
    throw ShapeError("log_posterior_value: features/labels row mismatch");
  if (dataset_size < x.rows())
    throw DomainError("log_posterior_value: dataset_size < batch size");
  if (prior_precision < 0.0)
    throw DomainError("log_posterior_value: prior_precision must be >= 0");
  detail::check_batch(p, x, "log_posterior_value");
  detail::check_labels(y, p.classes(), "log_posterior_value");
  const Eigen::MatrixXd hidden =
      ((x * p.hidden_weights).rowwise() + p.hidden_bias.transpose())
          .cwiseMax(0.0);
  const Eigen::MatrixXd logits =
      (hidden * p.output_weights).rowwise() + p.output_bias.transpose();
  double log_lik = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse =
        m + std::log((logits.row(i).array() - m).exp().sum());
    log_lik += logits(i, y[i]) - lse;
  }
  const double scale =
      static_cast<double>(dataset_size) / static_cast<double>(x.rows());
  const double sq_norm = p.hidden_weights.squaredNorm() +
                         p.hidden_bias.squaredNorm() +
                         p.output_weights.squaredNorm() +
                         p.output_bias.squaredNorm();
  return scale * log_lik - 0.5 * prior_precision * sq_norm;
}

// Gradient of the log posterior: -prior_precision*theta plus (N/S) times the
// summed cross-entropy backprop over the batch.
inline Gradients log_posterior_grad(const ModelParams& p,
                                    const Eigen::MatrixXd& x,
                                    const Eigen::VectorXi& y,
                                    long dataset_size, double prior_precision) {
  if (x.rows() < 1) throw DomainError("log_posterior_grad: empty batch");
  if (x.rows() != y.size())
    throw ShapeError("log_posterior_grad: features/labels row mismatch");
  if (dataset_size < x.rows())
    throw DomainError("log_posterior_grad: dataset_size < batch size");
  detail::check_batch(p, x, "log_posterior_grad");
  detail::check_labels(y, p.classes(), "log_posterior_grad");
  const detail::ForwardPass f = detail::run_forward(p, x, "log_posterior_grad");
  // dL/dlogits for the log-likelihood of example i is (onehot(y_i) - probs_i).
  Eigen::MatrixXd g_logits = -f.probs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) g_logits(i, y[i]) += 1.0;
  const Eigen::MatrixXd d_hidden =
      (g_logits * p.output_weights.transpose()).array() *
      (f.hidden.array() > 0.0).cast<double>();
  const double scale =
      static_cast<double>(dataset_size) / static_cast<double>(x.rows());
  Gradients g = prior_grad(p, prior_precision);
  g.hidden_weights += scale * (x.transpose() * d_hidden);
  g.hidden_bias += scale * d_hidden.colwise().sum().transpose();
  g.output_weights += scale * (f.hidden.transpose() * g_logits);
  g.output_bias += scale * g_logits.colwise().sum().transpose();
  return g;
}

// ---------------------------------------------------------------------------
// Per-example clipped gradient sums (the private path's workhorse)
// ---------------------------------------------------------------------------

// Diagnostics accumulated while clipping: the mean per-example gradient norm
// before clipping (across all four layer blocks) and the fraction of
// (example, layer-block) pairs whose norm exceeded the threshold.
struct ClipStats {
  double mean_grad_norm = 0.0;
  double clipped_fraction = 0.0;
};

// Sum over the batch of per-example likelihood gradients, each layer block
// clipped to L2 norm at most `clip_threshold` before summing. Exploits the
// rank-1 structure of per-example gradients (the W1 block of example i is
// x_i d_i^T, so its Frobenius norm is ||x_i|| ||d_i||; similarly h_i g_i^T
// for W2), which lets the clipped sums assemble as row-scaled matrix
// products without materializing per-example blocks.
//
// Excludes the prior term and the N/S scaling — callers assemble the full
// update direction. With clip_threshold empty, returns the plain sums (the
// non-private path) while still reporting mean_grad_norm.
inline Gradients clipped_grad_sums(const ModelParams& p,
                                   const Eigen::MatrixXd& x,
                                   const Eigen::VectorXi& y,
                                   std::optional<double> clip_threshold,
                                   ClipStats* stats = nullptr) {
  if (x.rows() < 1) throw DomainError("clipped_grad_sums: empty batch");
  if (x.rows() != y.size())
    throw ShapeError("clipped_grad_sums: features/labels row mismatch");
  if (clip_threshold && !(*clip_threshold > 0.0))
    throw DomainError("clipped_grad_sums: clip_threshold must be positive");
  detail::check_batch(p, x, "clipped_grad_sums");
  detail::check_labels(y, p.classes(), "clipped_grad_sums");
  const detail::ForwardPass f = detail::run_forward(p, x, "clipped_grad_sums");
  Eigen::MatrixXd g_logits = -f.probs;
  for (Eigen::Index i = 0; i < x.rows(); ++i) g_logits(i, y[i]) += 1.0;
  const Eigen::MatrixXd d_hidden =
      (g_logits * p.output_weights.transpose()).array() *
      (f.hidden.array() > 0.0).cast<double>();

  const Eigen::VectorXd x_norm = x.rowwise().norm();
  const Eigen::VectorXd h_norm = f.hidden.rowwise().norm();
  const Eigen::VectorXd g_norm = g_logits.rowwise().norm();
  const Eigen::VectorXd d_norm = d_hidden.rowwise().norm();

  const Eigen::Index s = x.rows();
  if (stats != nullptr) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < s; ++i) {
      const double w1 = x_norm[i] * d_norm[i];
      const double w2 = h_norm[i] * g_norm[i];
      total += std::sqrt(w1 * w1 + d_norm[i] * d_norm[i] + w2 * w2 +
                         g_norm[i] * g_norm[i]);
    }
    stats->mean_grad_norm = total / static_cast<double>(s);
    stats->clipped_fraction = 0.0;
  }

  Gradients sums;
  if (!clip_threshold) {
    sums.hidden_weights = x.transpose() * d_hidden;
    sums.hidden_bias = d_hidden.colwise().sum().transpose();
    sums.output_weights = f.hidden.transpose() * g_logits;
    sums.output_bias = g_logits.colwise().sum().transpose();
    return sums;
  }

  const double c = *clip_threshold;
  Eigen::VectorXd scale_w1(s), scale_b1(s), scale_w2(s), scale_b2(s);
  long clipped = 0;
  for (Eigen::Index i = 0; i < s; ++i) {
    const double n_w1 = x_norm[i] * d_norm[i];
    const double n_b1 = d_norm[i];
    const double n_w2 = h_norm[i] * g_norm[i];
    const double n_b2 = g_norm[i];
    scale_w1[i] = (n_w1 <= c) ? 1.0 : c / n_w1;
    scale_b1[i] = (n_b1 <= c) ? 1.0 : c / n_b1;
    scale_w2[i] = (n_w2 <= c) ? 1.0 : c / n_w2;
    scale_b2[i] = (n_b2 <= c) ? 1.0 : c / n_b2;
    clipped += (n_w1 > c) + (n_b1 > c) + (n_w2 > c) + (n_b2 > c);
  }
  if (stats != nullptr)
    stats->clipped_fraction =
        static_cast<double>(clipped) / static_cast<double>(4 * s);

  sums.hidden_weights =
      x.transpose() * (d_hidden.array().colwise() * scale_w1.array()).matrix();
  sums.hidden_bias = (d_hidden.array().colwise() * scale_b1.array())
                         .matrix()
                         .colwise()
                         .sum()
                         .transpose();
  sums.output_weights =
      f.hidden.transpose() *
      (g_logits.array().colwise() * scale_w2.array()).matrix();
  sums.output_bias = (g_logits.array().colwise() * scale_b2.array())
                         .matrix()
                         .colwise()
                         .sum()
                         .transpose();
  return sums;
}

// ---------------------------------------------------------------------------
// Update rule and schedule
// ---------------------------------------------------------------------------

// theta + (eta/2) * (grad + noise), exactly the half-step ascent form.
inline ModelParams sgld_update(const ModelParams& p, const Gradients& grads,
                               const Gradients& noise, double eta) {
  if (!(eta > 0.0)) throw DomainError("sgld_update: eta must be positive");
  detail::check_shapes(p, grads, "sgld_update");
  detail::check_shapes(p, noise, "sgld_update");
  const double half = 0.5 * eta;
  ModelParams next;
  next.hidden_weights =
      p.hidden_weights + half * (grads.hidden_weights + noise.hidden_weights);
  next.hidden_bias =
      p.hidden_bias + half * (grads.hidden_bias + noise.hidden_bias);
  next.output_weights =
      p.output_weights + half * (grads.output_weights + noise.output_weights);
  next.output_bias =
      p.output_bias + half * (grads.output_bias + noise.output_bias);
  return next;
}

inline double step_size(const StepSchedule& schedule, long t) {
  if (t < 1) throw DomainError("step_size: t must be >= 1");
  if (!(schedule.eta0 > 0.0))
    throw DomainError("step_size: eta0 must be positive");
  if (!(schedule.gamma > 0.0))
    throw DomainError("step_size: gamma must be positive");
  return schedule.eta0 / std::pow(static_cast<double>(t), schedule.gamma);
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

// Fraction of examples whose argmax class equals the label; probability ties
// break to the lowest class index.
inline double evaluate_accuracy(const ModelParams& p, const Eigen::MatrixXd& x,
                                const Eigen::VectorXi& y) {
  if (x.rows() < 1) throw DomainError("evaluate_accuracy: empty dataset");
  if (x.rows() != y.size())
    throw ShapeError("evaluate_accuracy: features/labels row mismatch");
  const Eigen::MatrixXd probs = forward(p, x);
  long correct = 0;
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index arg = 0;
    for (Eigen::Index j = 1; j < probs.cols(); ++j)
      if (probs(i, j) > probs(i, arg)) arg = j;
    if (arg == y[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(probs.rows());
}

// Arithmetic mean of forward passes across parameter samples.
inline Eigen::MatrixXd posterior_predictive(
    const std::vector<ModelParams>& samples, const Eigen::MatrixXd& x) {
  if (samples.empty())
    throw DomainError("posterior_predictive: empty sample list");
  Eigen::MatrixXd mean = forward(samples.front(), x);
  for (size_t i = 1; i < samples.size(); ++i) mean += forward(samples[i], x);
  return mean / static_cast<double>(samples.size());
}

}  // namespace dpdrop