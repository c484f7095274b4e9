#pragma once

// Feature-side geometry: RMS scale, the trace/nuclear/Frobenius similarity
// family, linear CKA, orthogonal Procrustes alignment and the exact
// scale-shape split of the alignment residual.
//
// All similarities are uncentered. Feature matrices are n x d with one row
// per sample; the proxy side is aligned on the right, Z_P * W.

#include <algorithm>
#include <cmath>
#include <string>

#include "prism/error.hpp"
#include "prism/types.hpp"

namespace prism::geometry {

struct ScaleShapeDecomposition {
  double rho_t = 0.0;
  double rho_p = 0.0;
  double omega = 1.0;
  double scale_term = 0.0;
  double shape_term = 0.0;
  /// (1/n) ||Z_T - Z_P W||_F^2, evaluated directly.
  double residual = 0.0;
  AlignmentKind alignment = AlignmentKind::kIdentity;
};

namespace detail {

using prism::detail::require;

inline void check_features(const Matrix& z, const char* name) {
  require(z.cols() > 0, ErrorCode::kEmptyInput, std::string(name) + " has zero columns");
  require(z.rows() > 0, ErrorCode::kEmptyInput, std::string(name) + " has zero rows");
  prism::detail::require_finite(z, name);
}

inline void check_pair(const Matrix& zt, const Matrix& zp) {
  prism::detail::require_same_shape(zt, zp, "Z_T", "Z_P");
  check_features(zt, "Z_T");
  check_features(zp, "Z_P");
}

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

inline Vector singular_values(const Matrix& m) {
  Eigen::JacobiSVD<Matrix> svd(m);
  Vector s = svd.singularValues();
  require(s.allFinite(), ErrorCode::kDecompositionFailed, "SVD produced non-finite singular values");
  return s;
}

/// Normalized trace from squared norms, with the zero-norm convention: one
/// zero side gives 0, both zero gives 1. sqrt(s * s) == s in IEEE arithmetic,
/// so identical inputs give exactly 1.
inline double normalized_trace(double trace, double sq_t, double sq_p) {
  if (sq_t == 0.0 && sq_p == 0.0) return 1.0;
  if (sq_t == 0.0 || sq_p == 0.0) return 0.0;
  double denom = std::sqrt(sq_t * sq_p);
  if (!std::isfinite(denom) || denom == 0.0) denom = std::sqrt(sq_t) * std::sqrt(sq_p);
  return clamp_unit(trace / denom);
}

inline void require_nonzero(double norm_t, double norm_p) {
  require(norm_t > 0.0 && norm_p > 0.0, ErrorCode::kZeroNorm, "feature matrix has zero Frobenius norm");
}

}  // namespace detail

/// ||Z||_F / sqrt(n).
inline double rms_scale(const Matrix& z) {
  detail::check_features(z, "Z");
  return z.norm() / std::sqrt(static_cast<double>(z.rows()));
}

/// Tr(Z_T^T Z_P) / (||Z_T|| ||Z_P||), the identity-alignment similarity.
inline double omega_trace(const Matrix& zt, const Matrix& zp) {
  detail::check_pair(zt, zp);
  return detail::normalized_trace(zt.cwiseProduct(zp).sum(), zt.squaredNorm(), zp.squaredNorm());
}

/// Trace similarity at a given alignment, Tr(Z_T^T Z_P W) / (||Z_T|| ||Z_P||).
inline double omega_aligned(const Matrix& zt, const Matrix& zp, const OrthogonalAlignment& w) {
  detail::check_pair(zt, zp);
  const Matrix aligned = w.apply_right(zp);
  return detail::normalized_trace(zt.cwiseProduct(aligned).sum(), zt.squaredNorm(), aligned.squaredNorm());
}

/// ||Z_T^T Z_P||_* / (||Z_T|| ||Z_P||): the maximum of the trace similarity
/// over all orthogonal alignments.
inline double omega_nuclear(const Matrix& zt, const Matrix& zp) {
  detail::check_pair(zt, zp);
  const double nt = zt.norm(), np = zp.norm();
  detail::require_nonzero(nt, np);
  return detail::clamp_unit(detail::singular_values(zt.transpose() * zp).sum() / (nt * np));
}

/// ||Z_T^T Z_P||_F / (||Z_T|| ||Z_P||).
inline double omega_frobenius(const Matrix& zt, const Matrix& zp) {
  detail::check_pair(zt, zp);
  const double nt = zt.norm(), np = zp.norm();
  detail::require_nonzero(nt, np);
  return (zt.transpose() * zp).norm() / (nt * np);
}

/// Uncentered linear CKA, ||Z_T^T Z_P||_F^2 / (||Z_T^T Z_T||_F ||Z_P^T Z_P||_F).
inline double cka(const Matrix& zt, const Matrix& zp) {
  detail::check_pair(zt, zp);
  const double gt = (zt.transpose() * zt).norm();
  const double gp = (zp.transpose() * zp).norm();
  prism::detail::require(gt > 0.0 && gp > 0.0, ErrorCode::kZeroNorm, "Gram matrix has zero norm");
  return (zt.transpose() * zp).squaredNorm() / (gt * gp);
}

/// W_N = V U^T from the SVD Z_T^T Z_P = U S V^T; minimizes ||Z_T - Z_P W||_F
/// over orthogonal W. Ties in S make W_N non-unique; any minimizer is valid.
inline OrthogonalAlignment procrustes_align(const Matrix& zt, const Matrix& zp) {
  detail::check_pair(zt, zp);
  Eigen::JacobiSVD<Matrix> svd(zt.transpose() * zp, Eigen::ComputeFullU | Eigen::ComputeFullV);
  prism::detail::require(svd.singularValues().allFinite(), ErrorCode::kDecompositionFailed,
                         "Procrustes SVD produced non-finite values");
  return {AlignmentKind::kProcrustes, Matrix(svd.matrixV() * svd.matrixU().transpose())};
}

/// (1/n) ||Z_T - Z_P W||_F^2.
inline double alignment_residual(const Matrix& zt, const Matrix& zp, const OrthogonalAlignment& w) {
  detail::check_pair(zt, zp);
  return (zt - w.apply_right(zp)).squaredNorm() / static_cast<double>(zt.rows());
}

inline ScaleShapeDecomposition decompose(const Matrix& zt, const Matrix& zp, const OrthogonalAlignment& w) {
  detail::check_pair(zt, zp);
  if (w.matrix) {
    prism::detail::require(w.matrix->rows() == zt.cols() && w.matrix->cols() == zt.cols(),
                           ErrorCode::kShapeMismatch,
                           "alignment is " + prism::detail::shape_str(*w.matrix) + " but d = " +
                               std::to_string(zt.cols()));
    if (w.kind == AlignmentKind::kExplicit) OrthogonalAlignment::explicit_matrix(*w.matrix);
  }
  const double n = static_cast<double>(zt.rows());
  const Matrix aligned = w.apply_right(zp);
  const double sq_t = zt.squaredNorm(), sq_p = aligned.squaredNorm();

  ScaleShapeDecomposition d;
  d.alignment = w.kind;
  d.rho_t = std::sqrt(sq_t / n);
  d.rho_p = std::sqrt(sq_p / n);
  d.omega = detail::normalized_trace(zt.cwiseProduct(aligned).sum(), sq_t, sq_p);
  d.scale_term = (d.rho_t - d.rho_p) * (d.rho_t - d.rho_p);
  d.shape_term = 2.0 * d.rho_t * d.rho_p * (1.0 - d.omega);
  d.residual = (zt - aligned).squaredNorm() / n;
  return d;
}

/// K_feat * sqrt(scale + shape).
inline double feature_delta(const ScaleShapeDecomposition& d, double k_feat) {
  prism::detail::require(k_feat >= 0.0 && std::isfinite(k_feat), ErrorCode::kInvalidArgument,
                         "k_feat must be finite and >= 0");
  return k_feat * std::sqrt(std::max(0.0, d.scale_term + d.shape_term));
}

/// Builds the decomposition from summary statistics alone (no residual).
inline ScaleShapeDecomposition decomposition_from_summary(double rho_t, double rho_p, double omega) {
  ScaleShapeDecomposition d;
  d.rho_t = rho_t;
  d.rho_p = rho_p;
  d.omega = omega;
  d.scale_term = (rho_t - rho_p) * (rho_t - rho_p);
  d.shape_term = 2.0 * rho_t * rho_p * (1.0 - omega);
  d.residual = d.scale_term + d.shape_term;
  return d;
}

}  // namespace prism::geometry
