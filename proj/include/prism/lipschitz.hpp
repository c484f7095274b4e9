#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "prism/error.hpp"
#include "prism/types.hpp"

namespace prism::lipschitz {

struct LipschitzConstants {
  double k_feat = 0.0;
  KFeatMode k_feat_mode = KFeatMode::kExact;
  double k_pred = std::numbers::sqrt2;
};

struct ExactOptions {
  /// Largest vocabulary accepted by the exact O(V^2) scan.
  Eigen::Index vocab_ceiling = 65536;
  Eigen::Index block_size = 1024;
};

namespace detail {

inline void check_head(const Matrix& h) {
  prism::detail::require(h.cols() >= 1, ErrorCode::kEmptyInput, "head must have at least one column");
  prism::detail::require_finite(h, "head");
}

}  // namespace detail

/// Maximum pairwise distance between head columns, max_{j,k} ||h_j - h_k||_2.
///
/// Column pairs are scanned in blocks through the Gram expansion
/// ||h_j - h_k||^2 = ||h_j||^2 + ||h_k||^2 - 2 h_j.h_k. Every block is
/// visited once, so the result does not depend on the block size.
inline double kfeat_exact(const Matrix& h, const ExactOptions& opts = {}) {
  detail::check_head(h);
  const Eigen::Index v = h.cols();
  prism::detail::require(v <= opts.vocab_ceiling, ErrorCode::kCeilingExceeded,
                         "V = " + std::to_string(v) + " exceeds exact-mode ceiling " +
                             std::to_string(opts.vocab_ceiling) + "; select spectral mode");
  prism::detail::require(opts.block_size >= 1, ErrorCode::kInvalidArgument, "block_size must be >= 1");

  const RowVector sq = h.colwise().squaredNorm();
  double best = 0.0;
  for (Eigen::Index j0 = 0; j0 < v; j0 += opts.block_size) {
    const Eigen::Index bj = std::min(opts.block_size, v - j0);
    for (Eigen::Index k0 = j0; k0 < v; k0 += opts.block_size) {
      const Eigen::Index bk = std::min(opts.block_size, v - k0);
      const Matrix gram = h.middleCols(j0, bj).transpose() * h.middleCols(k0, bk);
      for (Eigen::Index k = 0; k < bk; ++k) {
        for (Eigen::Index j = 0; j < bj; ++j) {
          best = std::max(best, sq(j0 + j) + sq(k0 + k) - 2.0 * gram(j, k));
        }
      }
    }
  }
  return std::sqrt(best);
}

/// sqrt(2) * sigma_max(H), the looser operator-norm constant.
inline double kfeat_spectral(const Matrix& h) {
  detail::check_head(h);
  if (h.rows() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(h);
  const Vector s = svd.singularValues();
  prism::detail::require(s.allFinite(), ErrorCode::kDecompositionFailed, "SVD produced non-finite values");
  return std::numbers::sqrt2 * (s.size() ? s(0) : 0.0);
}

/// Lipschitz constant of cross-entropy in the logits: ||softmax(v) - e_y|| <= sqrt(2).
constexpr double kpred() { return std::numbers::sqrt2; }

inline LipschitzConstants constants(const Matrix& head_t, KFeatMode mode, const ExactOptions& opts = {}) {
  return {mode == KFeatMode::kExact ? kfeat_exact(head_t, opts) : kfeat_spectral(head_t), mode, kpred()};
}

}  // namespace prism::lipschitz
