#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "prism/error.hpp"

namespace prism {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

enum class AlignmentKind { kIdentity, kProcrustes, kExplicit };
enum class KFeatMode { kExact, kSpectral };

inline std::string to_string(AlignmentKind kind) {
  switch (kind) {
    case AlignmentKind::kIdentity: return "identity";
    case AlignmentKind::kProcrustes: return "procrustes";
    case AlignmentKind::kExplicit: return "explicit";
  }
  return "unknown";
}

inline std::string to_string(KFeatMode mode) {
  return mode == KFeatMode::kExact ? "exact" : "spectral";
}

inline AlignmentKind parse_alignment(const std::string& s) {
  if (s == "identity") return AlignmentKind::kIdentity;
  if (s == "procrustes") return AlignmentKind::kProcrustes;
  if (s == "explicit") return AlignmentKind::kExplicit;
  detail::fail(ErrorCode::kInvalidArgument, "unknown alignment '" + s + "'");
}

inline KFeatMode parse_kfeat_mode(const std::string& s) {
  if (s == "exact") return KFeatMode::kExact;
  if (s == "spectral") return KFeatMode::kSpectral;
  detail::fail(ErrorCode::kInvalidArgument, "unknown k_feat mode '" + s + "'");
}

namespace detail {

inline void require_finite(const Matrix& m, const char* name) {
  require(m.allFinite(), ErrorCode::kNonFinite, std::string(name) + " has a non-finite entry");
}

inline std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* an, const char* bn) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), ErrorCode::kShapeMismatch,
          std::string(an) + " is " + shape_str(a) + " but " + bn + " is " + shape_str(b));
}

}  // namespace detail

/// Orthogonal map applied on the proxy side, Z_P * W. Identity carries no matrix.
struct OrthogonalAlignment {
  AlignmentKind kind = AlignmentKind::kIdentity;
  std::optional<Matrix> matrix;

  static OrthogonalAlignment identity() { return {}; }

  /// Throws kNotOrthogonal when max|W^T W - I| exceeds `tol`.
  static OrthogonalAlignment explicit_matrix(Matrix w, double tol = 1e-8) {
    detail::require(w.rows() == w.cols(), ErrorCode::kShapeMismatch,
                    "alignment must be square, got " + detail::shape_str(w));
    detail::require_finite(w, "alignment");
    const double err =
        (w.transpose() * w - Matrix::Identity(w.rows(), w.cols())).cwiseAbs().maxCoeff();
    detail::require(w.size() == 0 || err <= tol, ErrorCode::kNotOrthogonal,
                    "max|W^T W - I| = " + std::to_string(err));
    return {AlignmentKind::kExplicit, std::move(w)};
  }

  /// Z * W, or Z itself for the identity.
  Matrix apply_right(const Matrix& z) const { return matrix ? Matrix(z * *matrix) : z; }
  /// W * H, or H itself for the identity.
  Matrix apply_left(const Matrix& h) const { return matrix ? Matrix(*matrix * h) : h; }
};

}  // namespace prism
