#pragma once

// Brute-force side of the library: exact empirical cross-entropy, seeded
// synthetic (target, proxy) instances, bound verification and the rank
// correlation protocol used to compare bounds against observed risk gaps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "prism/bound.hpp"
#include "prism/error.hpp"
#include "prism/rng.hpp"
#include "prism/types.hpp"

namespace prism::oracle {

using Labels = std::vector<std::int64_t>;

enum class Perturbation { kGaussianNoise, kScaleShrink, kRotationMix, kHeadNoise, kCombined };

inline constexpr std::array<Perturbation, 5> kAllPerturbations{
    Perturbation::kGaussianNoise, Perturbation::kScaleShrink, Perturbation::kRotationMix, Perturbation::kHeadNoise,
    Perturbation::kCombined};

inline std::string to_string(Perturbation p) {
  switch (p) {
    case Perturbation::kGaussianNoise: return "gaussian_noise";
    case Perturbation::kScaleShrink: return "scale_shrink";
    case Perturbation::kRotationMix: return "rotation_mix";
    case Perturbation::kHeadNoise: return "head_noise";
    case Perturbation::kCombined: return "combined";
  }
  return "unknown";
}

inline Perturbation parse_perturbation(const std::string& s) {
  for (auto p : kAllPerturbations)
    if (to_string(p) == s) return p;
  prism::detail::fail(ErrorCode::kInvalidArgument, "unknown perturbation kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Risk

/// Mean log-sum-exp cross-entropy of the logits Z H against `labels`.
inline double empirical_risk(const Matrix& z, const Matrix& h, std::span<const std::int64_t> labels) {
  using prism::detail::require;
  require(z.rows() >= 1, ErrorCode::kEmptyInput, "empirical_risk needs n >= 1");
  require(z.cols() == h.rows(), ErrorCode::kShapeMismatch,
          "Z is " + prism::detail::shape_str(z) + " but H is " + prism::detail::shape_str(h));
  require(static_cast<Eigen::Index>(labels.size()) == z.rows(), ErrorCode::kShapeMismatch,
          "got " + std::to_string(labels.size()) + " labels for " + std::to_string(z.rows()) + " rows");
  prism::detail::require_finite(z, "Z");
  prism::detail::require_finite(h, "H");
  for (auto y : labels) {
    require(y >= 0 && y < h.cols(), ErrorCode::kOutOfRange,
            "label " + std::to_string(y) + " outside [0, " + std::to_string(h.cols()) + ")");
  }
  const Matrix logits = z * h;
  double total = 0.0;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i);
    const double top = row.maxCoeff();
    const double lse = top + std::log((row.array() - top).exp().sum());
    total += lse - row(labels[static_cast<std::size_t>(i)]);
  }
  return total / static_cast<double>(logits.rows());
}

// ---------------------------------------------------------------------------
// Synthetic instances

struct SyntheticInstance {
  Matrix z_t;
  Matrix z_p;
  Matrix h_t;
  Matrix h_p;
  Labels labels;
  std::uint64_t seed = 0;
  Perturbation perturbation = Perturbation::kGaussianNoise;
  double magnitude = 0.0;
};

/// Stream ids; one per independently drawn object.
enum Stream : std::uint64_t { kTargetFeatures = 0, kTargetHead, kLabels, kFeatureNoise, kRotation, kHeadNoiseStream };

/// Target features are standard normal, the target head N(0, 4/d) so logits
/// are O(1) per unit of feature scale, and labels are sampled from the
/// target's own softmax. The proxy is derived from the target:
///
///   gaussian_noise  Z_P = Z_T + m N
///   scale_shrink    Z_P = (1 - m) Z_T
///   rotation_mix    Z_P = (1 - m) Z_T + m Z_T R
///   head_noise      H_P = H_T + m N(0, 4/d)
///   combined        rotation_mix, then scale_shrink, then gaussian_noise, plus head_noise
///
/// Noise draws are fixed per seed, so a magnitude grid on one seed moves the
/// proxy along a single ray. Magnitude 0 reproduces the target bitwise.
inline SyntheticInstance gen_instance(std::uint64_t seed, Eigen::Index n, Eigen::Index d, Eigen::Index v,
                                      Perturbation kind, double magnitude) {
  using prism::detail::require;
  require(n >= 1 && d >= 1 && v >= 1, ErrorCode::kInvalidArgument, "n, d, V must all be >= 1");
  require(magnitude >= 0.0 && std::isfinite(magnitude), ErrorCode::kInvalidArgument, "magnitude must be >= 0");

  SyntheticInstance inst;
  inst.seed = seed;
  inst.perturbation = kind;
  inst.magnitude = magnitude;
  const double head_std = 2.0 / std::sqrt(static_cast<double>(d));
  {
    auto g = rng::Xoshiro256::stream(seed, kTargetFeatures);
    inst.z_t = rng::normal_matrix(g, n, d);
  }
  {
    auto g = rng::Xoshiro256::stream(seed, kTargetHead);
    inst.h_t = rng::normal_matrix(g, d, v, head_std);
  }
  {
    auto g = rng::Xoshiro256::stream(seed, kLabels);
    const Matrix logits = inst.z_t * inst.h_t;
    inst.labels.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto row = logits.row(i);
      const Vector p = (row.array() - row.maxCoeff()).exp().transpose();
      double u = g.uniform() * p.sum();
      Eigen::Index y = 0;
      while (y + 1 < v && u >= p(y)) u -= p(y++);
      inst.labels[static_cast<std::size_t>(i)] = y;
    }
  }
  inst.z_p = inst.z_t;
  inst.h_p = inst.h_t;
  if (magnitude == 0.0) return inst;

  const bool all = kind == Perturbation::kCombined;
  if (all || kind == Perturbation::kRotationMix) {
    auto g = rng::Xoshiro256::stream(seed, kRotation);
    const Matrix r = rng::random_orthogonal(g, d);
    inst.z_p = (1.0 - magnitude) * inst.z_p + magnitude * (inst.z_p * r);
  }
  if (all || kind == Perturbation::kScaleShrink) inst.z_p *= (1.0 - magnitude);
  if (all || kind == Perturbation::kGaussianNoise) {
    auto g = rng::Xoshiro256::stream(seed, kFeatureNoise);
    inst.z_p += magnitude * rng::normal_matrix(g, n, d);
  }
  if (all || kind == Perturbation::kHeadNoise) {
    auto g = rng::Xoshiro256::stream(seed, kHeadNoiseStream);
    inst.h_p += magnitude * rng::normal_matrix(g, d, v, head_std);
  }
  return inst;
}

// ---------------------------------------------------------------------------
// Verification

inline constexpr double kBoundTolerance = 1e-9;

struct VerificationRecord {
  double risk_t = 0.0;
  double risk_p = 0.0;
  double gap = 0.0;
  double bound = 0.0;
  bool holds = true;
  /// gap / bound; 0 when both are 0.
  double slack_ratio = 0.0;
  bound::BoundReport report;
  std::uint64_t seed = 0;
  Perturbation perturbation = Perturbation::kGaussianNoise;
  double magnitude = 0.0;
  Eigen::Index n = 0, d = 0, v = 0;
};

inline VerificationRecord verify_bound(const SyntheticInstance& inst, AlignmentKind alignment,
                                       KFeatMode mode = KFeatMode::kExact) {
  VerificationRecord rec;
  rec.seed = inst.seed;
  rec.perturbation = inst.perturbation;
  rec.magnitude = inst.magnitude;
  rec.n = inst.z_t.rows();
  rec.d = inst.z_t.cols();
  rec.v = inst.h_t.cols();
  rec.risk_t = empirical_risk(inst.z_t, inst.h_t, inst.labels);
  rec.risk_p = empirical_risk(inst.z_p, inst.h_p, inst.labels);
  rec.gap = std::abs(rec.risk_t - rec.risk_p);
  bound::BoundOptions opts;
  opts.k_feat_mode = mode;
  rec.report = bound::prism_bound(inst.z_t, inst.z_p, inst.h_t, inst.h_p, alignment, opts);
  rec.report.empirical_gap = rec.gap;
  rec.bound = rec.report.bound;
  rec.holds = rec.gap <= rec.bound + kBoundTolerance;
  if (rec.bound > 0.0) {
    rec.slack_ratio = rec.gap / rec.bound;
  } else {
    rec.slack_ratio = rec.gap == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  }
  return rec;
}

struct SweepConfig {
  std::uint64_t seed = 0;
  std::size_t trials = 200;
  Eigen::Index n = 64, d = 16, v = 32;
  /// When set, each trial draws n, d, V uniformly from [1, n] x [1, d] x [1, V].
  bool randomize_sizes = false;
  std::vector<Perturbation> kinds{kAllPerturbations.begin(), kAllPerturbations.end()};
  std::vector<double> magnitudes{0.1, 0.25, 0.5, 0.75, 1.0};
  std::vector<AlignmentKind> alignments{AlignmentKind::kIdentity, AlignmentKind::kProcrustes};
  KFeatMode k_feat_mode = KFeatMode::kExact;
};

struct SweepSummary {
  std::vector<VerificationRecord> records;
  std::size_t violations = 0;
  double max_slack_ratio = 0.0;
};

/// Trial i uses kind kinds[i % K] and magnitude magnitudes[(i / K) % M]; each
/// instance is checked under every configured alignment.
inline SweepSummary run_sweep(const SweepConfig& cfg) {
  using prism::detail::require;
  require(cfg.trials >= 1, ErrorCode::kInvalidArgument, "trials must be >= 1");
  require(!cfg.kinds.empty() && !cfg.magnitudes.empty() && !cfg.alignments.empty(), ErrorCode::kInvalidArgument,
          "sweep needs at least one kind, magnitude and alignment");
  SweepSummary out;
  for (std::size_t i = 0; i < cfg.trials; ++i) {
    std::uint64_t mix = cfg.seed + i;
    const std::uint64_t trial_seed = rng::splitmix64(mix);
    Eigen::Index n = cfg.n, d = cfg.d, v = cfg.v;
    if (cfg.randomize_sizes) {
      auto g = rng::Xoshiro256::stream(trial_seed, 99);
      n = 1 + static_cast<Eigen::Index>(g.below(static_cast<std::uint64_t>(cfg.n)));
      d = 1 + static_cast<Eigen::Index>(g.below(static_cast<std::uint64_t>(cfg.d)));
      v = 1 + static_cast<Eigen::Index>(g.below(static_cast<std::uint64_t>(cfg.v)));
    }
    const Perturbation kind = cfg.kinds[i % cfg.kinds.size()];
    const double mag = cfg.magnitudes[(i / cfg.kinds.size()) % cfg.magnitudes.size()];
    const SyntheticInstance inst = gen_instance(trial_seed, n, d, v, kind, mag);
    for (auto a : cfg.alignments) {
      auto rec = verify_bound(inst, a, cfg.k_feat_mode);
      if (!rec.holds) ++out.violations;
      out.max_slack_ratio = std::max(out.max_slack_ratio, rec.slack_ratio);
      out.records.push_back(std::move(rec));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Rank statistics

/// 1-based ranks; tied values share the mean of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && xs[order[j + 1]] == xs[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman's r_s: Pearson correlation of average ranks.
inline double spearman(std::span<const double> xs, std::span<const double> ys) {
  using prism::detail::require;
  require(xs.size() == ys.size(), ErrorCode::kShapeMismatch,
          "spearman inputs differ in length (" + std::to_string(xs.size()) + " vs " + std::to_string(ys.size()) + ")");
  require(xs.size() >= 2, ErrorCode::kEmptyInput, "spearman needs at least two points");
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require(std::isfinite(xs[i]) && std::isfinite(ys[i]), ErrorCode::kNonFinite, "spearman input is not finite");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  require(sxx > 0.0 && syy > 0.0, ErrorCode::kDegenerate, "spearman input is constant");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct AxisRank {
  Perturbation kind;
  double r_s = 0.0;
  std::vector<VerificationRecord> records;
};

struct RankSummary {
  std::vector<AxisRank> axes;
  /// Unweighted mean of r_s over axes.
  double mean_r_s = 0.0;
};

/// Rank protocol defaults. n is larger than the sweep default so the observed
/// gap is not dominated by finite-sample sign flips at small magnitudes.
inline constexpr Eigen::Index kRankSamples = 256;
inline constexpr Eigen::Index kRankDim = 16;
inline constexpr Eigen::Index kRankVocab = 32;

inline const std::vector<double>& default_rank_grid() {
  static const std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
  return grid;
}

/// For every perturbation kind, walks the magnitude grid on one seed and
/// correlates the bound with the observed risk gap.
inline RankSummary rank_experiment(std::uint64_t seed, std::span<const double> grid, Eigen::Index n, Eigen::Index d,
                                   Eigen::Index v, AlignmentKind alignment = AlignmentKind::kIdentity,
                                   std::span<const Perturbation> kinds = kAllPerturbations) {
  using prism::detail::require;
  require(grid.size() >= 3, ErrorCode::kDegenerate, "rank grid needs at least 3 magnitudes");
  require(std::set<double>(grid.begin(), grid.end()).size() == grid.size(), ErrorCode::kDegenerate,
          "rank grid magnitudes must be distinct");
  RankSummary out;
  for (auto kind : kinds) {
    AxisRank axis{kind, 0.0, {}};
    std::vector<double> bounds, gaps;
    for (double m : grid) {
      axis.records.push_back(verify_bound(gen_instance(seed, n, d, v, kind, m), alignment));
      bounds.push_back(axis.records.back().bound);
      gaps.push_back(axis.records.back().gap);
    }
    axis.r_s = spearman(bounds, gaps);
    out.mean_r_s += axis.r_s;
    out.axes.push_back(std::move(axis));
  }
  out.mean_r_s /= static_cast<double>(out.axes.size());
  return out;
}

}  // namespace prism::oracle
