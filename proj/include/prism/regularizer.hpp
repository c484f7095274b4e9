#pragma once

// Shape penalty 1 - Omega(Z_0, Z_t) on a fixed reference batch, its
// closed-form gradient, and a small end-to-end drift experiment.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "prism/error.hpp"
#include "prism/geometry.hpp"
#include "prism/oracle.hpp"
#include "prism/rng.hpp"
#include "prism/types.hpp"

namespace prism::regularizer {

struct PenaltyGradient {
  double value = 0.0;
  /// d(1 - Omega) / dZ_t, same shape as Z_t.
  Matrix grad;
};

inline double shape_penalty(const Matrix& z0, const Matrix& zt) {
  prism::detail::require_same_shape(z0, zt, "Z_0", "Z_t");
  prism::detail::require(z0.size() > 0 && z0.norm() > 0.0, ErrorCode::kZeroNorm, "reference features are zero");
  return 1.0 - geometry::omega_trace(z0, zt);
}

/// With a = ||Z_0||, b = ||Z_t||, T = Tr(Z_0^T Z_t):
///   dOmega/dZ_t = Z_0 / (a b) - T Z_t / (a b^3)
/// and the penalty gradient is its negation.
inline PenaltyGradient shape_penalty_grad(const Matrix& z0, const Matrix& zt) {
  prism::detail::require_same_shape(z0, zt, "Z_0", "Z_t");
  prism::detail::require_finite(z0, "Z_0");
  prism::detail::require_finite(zt, "Z_t");
  const double a = z0.norm(), b = zt.norm();
  prism::detail::require(a > 0.0 && b > 0.0, ErrorCode::kZeroNorm, "penalty gradient needs nonzero Z_0 and Z_t");
  const double trace = z0.cwiseProduct(zt).sum();
  PenaltyGradient out;
  out.value = 1.0 - trace / (a * b);
  out.grad = -(z0 / (a * b) - (trace / (a * b * b * b)) * zt);
  return out;
}

struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
};

/// Central differences of the penalty at `coords` sampled entries, step
/// h = 1e-5 (1 + |entry|). Relative error is |a - f| / max(|a|, |f|, 1e-8).
inline GradCheck finite_difference_check(const Matrix& z0, const Matrix& zt, std::size_t coords, std::uint64_t seed) {
  const PenaltyGradient pg = shape_penalty_grad(z0, zt);
  auto gen = rng::Xoshiro256::stream(seed, 7);
  GradCheck out;
  Matrix probe = zt;
  for (std::size_t k = 0; k < coords; ++k) {
    const auto i = static_cast<Eigen::Index>(gen.below(static_cast<std::uint64_t>(zt.rows())));
    const auto j = static_cast<Eigen::Index>(gen.below(static_cast<std::uint64_t>(zt.cols())));
    const double x = zt(i, j);
    const double h = 1e-5 * (1.0 + std::abs(x));
    probe(i, j) = x + h;
    const double up = shape_penalty(z0, probe);
    probe(i, j) = x - h;
    const double down = shape_penalty(z0, probe);
    probe(i, j) = x;
    const double fd = (up - down) / (2.0 * h);
    const double an = pg.grad(i, j);
    const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-8});
    out.max_rel_error = std::max(out.max_rel_error, rel);
    ++out.coordinates;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Drift demo

struct DemoConfig {
  Eigen::Index input_dim = 12;
  Eigen::Index feature_dim = 8;
  Eigen::Index vocab = 6;
  Eigen::Index task_samples = 128;
  Eigen::Index reference_samples = 32;
  Eigen::Index downstream_samples = 128;
};

struct DemoResult {
  double lambda = 0.0;
  std::size_t steps = 0;
  std::vector<double> omega_trajectory;
  std::vector<double> task_loss_trajectory;
  std::vector<double> downstream_gap_trajectory;
  /// Set when the objective went non-finite; trajectories stop at the last finite step.
  bool diverged = false;
};

inline const std::vector<double>& default_lambda_grid() {
  static const std::vector<double> grid{0.0, 0.01, 0.05, 0.1, 0.5, 1.0};
  return grid;
}

inline const std::vector<std::uint64_t>& default_seed_family() {
  static const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8};
  return seeds;
}

namespace detail {

/// Softmax probabilities minus one-hot labels, divided by n: dCE/dlogits.
inline Matrix ce_logit_grad(const Matrix& logits, const oracle::Labels& labels) {
  Matrix g(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const RowVector e = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    g.row(i) = e / e.sum();
    g(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
  }
  return g / static_cast<double>(logits.rows());
}

inline oracle::Labels sample_labels(const Matrix& logits, rng::Xoshiro256& gen) {
  oracle::Labels out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const RowVector p = (logits.row(i).array() - logits.row(i).maxCoeff()).exp();
    double u = gen.uniform() * p.sum();
    Eigen::Index y = 0;
    while (y + 1 < p.size() && u >= p(y)) u -= p(y++);
    out[static_cast<std::size_t>(i)] = y;
  }
  return out;
}

inline oracle::Labels argmax_labels(const Matrix& logits) {
  oracle::Labels out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index y = 0;
    logits.row(i).maxCoeff(&y);
    out[static_cast<std::size_t>(i)] = y;
  }
  return out;
}

}  // namespace detail

/// Fine-tunes a linear backbone A (features X A, fixed head H) on a new task
/// whose labels come from an unrelated teacher, minimizing
///
///   CE_task(A) + lambda * (1 - Omega(X_ref A_0, X_ref A))
///
/// by full-batch gradient descent. X_ref is a fixed random reference batch and
/// A_0 the frozen initial backbone. The downstream gap is the absolute change
/// in empirical risk on data labelled by the original model. The scale of the
/// reference features is tracked implicitly but never penalized.
inline DemoResult drift_demo(std::uint64_t seed, double lambda, std::size_t steps, double lr,
                             const DemoConfig& cfg = {}) {
  using prism::detail::require;
  require(steps >= 1, ErrorCode::kInvalidArgument, "steps must be >= 1");
  require(lr > 0.0 && std::isfinite(lr), ErrorCode::kInvalidArgument, "lr must be > 0");
  require(lambda >= 0.0 && std::isfinite(lambda), ErrorCode::kInvalidArgument, "lambda must be >= 0");

  const double in_scale = 1.0 / std::sqrt(static_cast<double>(cfg.input_dim));
  const double head_scale = 2.0 / std::sqrt(static_cast<double>(cfg.feature_dim));
  auto g_backbone = rng::Xoshiro256::stream(seed, 0);
  auto g_head = rng::Xoshiro256::stream(seed, 1);
  auto g_teacher = rng::Xoshiro256::stream(seed, 2);
  auto g_data = rng::Xoshiro256::stream(seed, 3);
  auto g_labels = rng::Xoshiro256::stream(seed, 4);

  const Matrix a0 = rng::normal_matrix(g_backbone, cfg.input_dim, cfg.feature_dim, in_scale);
  const Matrix head = rng::normal_matrix(g_head, cfg.feature_dim, cfg.vocab, head_scale);
  const Matrix teacher = rng::normal_matrix(g_teacher, cfg.input_dim, cfg.feature_dim, in_scale);

  const Matrix x_task = rng::normal_matrix(g_data, cfg.task_samples, cfg.input_dim);
  const Matrix x_ref = rng::normal_matrix(g_data, cfg.reference_samples, cfg.input_dim);
  const Matrix x_down = rng::normal_matrix(g_data, cfg.downstream_samples, cfg.input_dim);
  const oracle::Labels y_task = detail::argmax_labels(x_task * teacher * head);
  const oracle::Labels y_down = detail::sample_labels(x_down * a0 * head, g_labels);

  const Matrix z_ref0 = x_ref * a0;
  const double down_risk0 = oracle::empirical_risk(x_down * a0, head, y_down);

  DemoResult out;
  out.lambda = lambda;
  Matrix a = a0;
  auto record = [&](const Matrix& backbone) {
    const double omega = geometry::omega_trace(z_ref0, x_ref * backbone);
    const double loss = oracle::empirical_risk(x_task * backbone, head, y_task);
    const double gap = std::abs(oracle::empirical_risk(x_down * backbone, head, y_down) - down_risk0);
    out.omega_trajectory.push_back(omega);
    out.task_loss_trajectory.push_back(loss);
    out.downstream_gap_trajectory.push_back(gap);
  };
  record(a);

  for (std::size_t step = 0; step < steps; ++step) {
    Matrix grad = x_task.transpose() * detail::ce_logit_grad(x_task * a * head, y_task) * head.transpose();
    if (lambda > 0.0) grad += lambda * x_ref.transpose() * shape_penalty_grad(z_ref0, x_ref * a).grad;
    Matrix next = a - lr * grad;
    if (!next.allFinite()) {
      out.diverged = true;
      break;
    }
    const double loss = oracle::empirical_risk(x_task * next, head, y_task);
    if (!std::isfinite(loss)) {
      out.diverged = true;
      break;
    }
    a = std::move(next);
    record(a);
    ++out.steps;
  }
  return out;
}

}  // namespace prism::regularizer
