#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "prism/error.hpp"
#include "prism/lipschitz.hpp"
#include "prism/types.hpp"

namespace prism::headterm {

/// Uncentered second-moment matrix Z^T Z / n of the (unaligned) proxy features.
struct Covariance {
  Matrix values;
  Eigen::Index n_source = 0;
};

enum class GammaPath { kMatmul, kEigen };

inline Covariance covariance(const Matrix& zp) {
  prism::detail::require(zp.rows() >= 1, ErrorCode::kEmptyInput, "covariance needs n >= 1");
  prism::detail::require_finite(zp, "Z_P");
  const Matrix a = zp.transpose() * zp / static_cast<double>(zp.rows());
  return {Matrix((a + a.transpose()) / 2.0), zp.rows()};
}

/// Symmetric square root with eigenvalue clamping. Eigenvalues in
/// [-1e-8 * lambda_max, 0) are treated as roundoff and clamped to zero.
inline Matrix sqrt_psd(const Matrix& sigma) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
  prism::detail::require(eig.info() == Eigen::Success, ErrorCode::kDecompositionFailed,
                         "eigendecomposition of covariance failed");
  Vector lambda = eig.eigenvalues();
  const double lmax = lambda.size() ? std::max(0.0, lambda.maxCoeff()) : 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    prism::detail::require(lambda(i) >= -1e-8 * lmax, ErrorCode::kDecompositionFailed,
                           "covariance eigenvalue " + std::to_string(lambda(i)) + " is too negative");
    lambda(i) = std::sqrt(std::max(lambda(i), 0.0));
  }
  return eig.eigenvectors() * lambda.asDiagonal() * eig.eigenvectors().transpose();
}

/// Head discrepancy K_pred * ||Sigma_P^{1/2} (W H_T - H_P)||_F.
///
/// The matmul path uses ||Sigma^{1/2} dH||_F^2 = ||Z_P dH||_F^2 / n and never
/// forms Sigma; the eigen path builds Sigma^{1/2} explicitly and is kept as
/// a cross-check.
inline double gamma(const Matrix& zp, const Matrix& head_t, const Matrix& head_p, const OrthogonalAlignment& w,
                    GammaPath path = GammaPath::kMatmul) {
  using prism::detail::require;
  require(zp.rows() >= 1, ErrorCode::kEmptyInput, "gamma needs n >= 1");
  prism::detail::require_same_shape(head_t, head_p, "H_T", "H_P");
  require(zp.cols() == head_t.rows(), ErrorCode::kShapeMismatch,
          "Z_P is " + prism::detail::shape_str(zp) + " but heads are " + prism::detail::shape_str(head_t));
  if (w.matrix) {
    require(w.matrix->rows() == head_t.rows() && w.matrix->cols() == head_t.rows(), ErrorCode::kShapeMismatch,
            "alignment is " + prism::detail::shape_str(*w.matrix));
  }
  prism::detail::require_finite(zp, "Z_P");
  prism::detail::require_finite(head_t, "H_T");
  prism::detail::require_finite(head_p, "H_P");

  const Matrix dh = w.apply_left(head_t) - head_p;
  if (path == GammaPath::kMatmul) {
    return lipschitz::kpred() * (zp * dh).norm() / std::sqrt(static_cast<double>(zp.rows()));
  }
  return lipschitz::kpred() * (sqrt_psd(covariance(zp).values) * dh).norm();
}

}  // namespace prism::headterm
