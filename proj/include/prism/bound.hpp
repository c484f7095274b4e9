#pragma once

// Assembly of the full bound B = delta + gamma.
//
// The certificate is with respect to the empirical measure of the supplied
// rows: if R_M is the mean cross-entropy of Z_M H_M over those rows, then
// |R_T - R_P| <= B holds exactly, with no sampling error term.

#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prism/error.hpp"
#include "prism/geometry.hpp"
#include "prism/headterm.hpp"
#include "prism/lipschitz.hpp"
#include "prism/types.hpp"

namespace prism::bound {

using geometry::ScaleShapeDecomposition;

struct BoundReport {
  double k_feat = 0.0;
  KFeatMode k_feat_mode = KFeatMode::kExact;
  double k_pred = lipschitz::kpred();
  ScaleShapeDecomposition decomposition;
  double delta = 0.0;
  double gamma = 0.0;
  double bound = 0.0;
  AlignmentKind alignment = AlignmentKind::kIdentity;
  std::string variant_id;
  std::optional<double> empirical_gap;
  /// Set when no proxy head was supplied and gamma was taken as 0.
  bool frozen_head = false;
};

struct BoundOptions {
  KFeatMode k_feat_mode = KFeatMode::kExact;
  lipschitz::ExactOptions exact;
  headterm::GammaPath gamma_path = headterm::GammaPath::kMatmul;
  /// Overrides the K_feat computation, e.g. when it is shared across variants.
  std::optional<double> k_feat;
};

/// B = delta + gamma for externally supplied terms, e.g. values reported elsewhere.
inline double combine(double delta, double gamma) {
  prism::detail::require(delta >= 0.0 && gamma >= 0.0, ErrorCode::kInvalidArgument, "delta and gamma must be >= 0");
  return delta + gamma;
}

/// Materializes the alignment for a kind: identity, or Procrustes fitted on (Z_T, Z_P).
inline OrthogonalAlignment resolve_alignment(const Matrix& zt, const Matrix& zp, AlignmentKind kind) {
  switch (kind) {
    case AlignmentKind::kIdentity: return OrthogonalAlignment::identity();
    case AlignmentKind::kProcrustes: return geometry::procrustes_align(zt, zp);
    case AlignmentKind::kExplicit: break;
  }
  prism::detail::fail(ErrorCode::kInvalidArgument, "explicit alignment needs a matrix");
}

inline double resolve_kfeat(const Matrix& head_t, const BoundOptions& opts) {
  if (opts.k_feat) {
    prism::detail::require(*opts.k_feat >= 0.0, ErrorCode::kInvalidArgument, "k_feat must be >= 0");
    return *opts.k_feat;
  }
  return opts.k_feat_mode == KFeatMode::kExact ? lipschitz::kfeat_exact(head_t, opts.exact)
                                               : lipschitz::kfeat_spectral(head_t);
}

/// Full report for one (target, proxy) pair. K_feat is always taken from H_T,
/// and gamma uses the same alignment as delta.
inline BoundReport prism_bound(const Matrix& zt, const Matrix& zp, const Matrix& head_t, const Matrix& head_p,
                               const OrthogonalAlignment& w, const BoundOptions& opts = {}) {
  prism::detail::require(zt.cols() == head_t.rows(), ErrorCode::kShapeMismatch,
                         "features are " + prism::detail::shape_str(zt) + " but H_T is " +
                             prism::detail::shape_str(head_t));
  BoundReport r;
  r.k_feat_mode = opts.k_feat_mode;
  r.k_feat = resolve_kfeat(head_t, opts);
  r.decomposition = geometry::decompose(zt, zp, w);
  r.alignment = w.kind;
  r.delta = geometry::feature_delta(r.decomposition, r.k_feat);
  r.gamma = headterm::gamma(zp, head_t, head_p, w, opts.gamma_path);
  r.bound = r.delta + r.gamma;
  return r;
}

inline BoundReport prism_bound(const Matrix& zt, const Matrix& zp, const Matrix& head_t, const Matrix& head_p,
                               AlignmentKind kind, const BoundOptions& opts = {}) {
  return prism_bound(zt, zp, head_t, head_p, resolve_alignment(zt, zp, kind), opts);
}

/// Bound for a proxy that shares the target head: gamma is 0 by construction.
inline BoundReport frozen_head_bound(const Matrix& zt, const Matrix& zp, double k_feat, const OrthogonalAlignment& w,
                                     KFeatMode mode = KFeatMode::kExact) {
  prism::detail::require(k_feat >= 0.0, ErrorCode::kInvalidArgument, "k_feat must be >= 0");
  BoundReport r;
  r.k_feat = k_feat;
  r.k_feat_mode = mode;
  r.decomposition = geometry::decompose(zt, zp, w);
  r.alignment = w.kind;
  r.delta = geometry::feature_delta(r.decomposition, k_feat);
  r.gamma = 0.0;
  r.bound = r.delta;
  r.frozen_head = true;
  return r;
}

/// Backbone drift bound for a fine-tune with a frozen head (identity alignment).
inline BoundReport lora_bound(const Matrix& z0, const Matrix& zt, double k_feat) {
  return frozen_head_bound(z0, zt, k_feat, OrthogonalAlignment::identity());
}

/// Stacks per-sequence token features vertically, in order. Individual
/// sequences may be empty; the stack must not be.
inline Matrix ar_stack(std::span<const Matrix> sequences) {
  prism::detail::require(!sequences.empty(), ErrorCode::kEmptyInput, "no sequences to stack");
  const Eigen::Index d = sequences.front().cols();
  Eigen::Index rows = 0;
  for (const auto& s : sequences) {
    prism::detail::require(s.cols() == d, ErrorCode::kShapeMismatch,
                           "sequence width " + std::to_string(s.cols()) + " differs from " + std::to_string(d));
    rows += s.rows();
  }
  prism::detail::require(rows >= 1, ErrorCode::kEmptyInput, "stacked sequences have no rows");
  Matrix out(rows, d);
  Eigen::Index at = 0;
  for (const auto& s : sequences) {
    out.middleRows(at, s.rows()) = s;
    at += s.rows();
  }
  return out;
}

struct SequenceBounds {
  /// One report per non-empty sequence, in input order.
  std::vector<BoundReport> per_sequence;
  /// Unweighted mean of per-sequence bounds; bounds the mean of per-sequence gaps.
  double sequence_mean_bound = 0.0;
};

/// Sequence-mean convention: every sequence gets its own report. The
/// alignment is fitted once on the stacked pair and shared by all sequences.
inline SequenceBounds ar_sequence_bounds(std::span<const Matrix> seq_t, std::span<const Matrix> seq_p,
                                         const Matrix& head_t, const Matrix& head_p, AlignmentKind kind,
                                         const BoundOptions& opts = {}) {
  prism::detail::require(seq_t.size() == seq_p.size(), ErrorCode::kShapeMismatch,
                         "target and proxy sequence counts differ");
  const Matrix zt = ar_stack(seq_t);
  const Matrix zp = ar_stack(seq_p);
  const OrthogonalAlignment w = resolve_alignment(zt, zp, kind);
  BoundOptions shared = opts;
  shared.k_feat = resolve_kfeat(head_t, opts);

  SequenceBounds out;
  for (std::size_t i = 0; i < seq_t.size(); ++i) {
    prism::detail::require_same_shape(seq_t[i], seq_p[i], "target sequence", "proxy sequence");
    if (seq_t[i].rows() == 0) continue;
    out.per_sequence.push_back(prism_bound(seq_t[i], seq_p[i], head_t, head_p, w, shared));
    out.per_sequence.back().variant_id = "seq" + std::to_string(i);
  }
  double sum = 0.0;
  for (const auto& r : out.per_sequence) sum += r.bound;
  out.sequence_mean_bound = sum / static_cast<double>(out.per_sequence.size());
  return out;
}

}  // namespace prism::bound
