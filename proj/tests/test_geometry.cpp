#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "prism/geometry.hpp"
#include "test_helpers.hpp"

using namespace prism;
using prism::testkit::gaussian;
using prism::testkit::orthogonal;

namespace {

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected prism::Error";
  return ErrorCode::kIo;
}

}  // namespace

TEST(RmsScale, ThreeFourFive) {
  Matrix z(1, 2);
  z << 3, 4;
  EXPECT_DOUBLE_EQ(geometry::rms_scale(z), 5.0);
}

TEST(RmsScale, ZerosAndOracle) {
  EXPECT_EQ(geometry::rms_scale(Matrix::Zero(4, 8)), 0.0);
  std::mt19937_64 gen(3);
  const Matrix z = gaussian(gen, 16, 5);
  const double oracle = std::sqrt(testkit::sum_squares(z) / 16.0);
  EXPECT_NEAR(geometry::rms_scale(z), oracle, 1e-12 * oracle);
}

TEST(RmsScale, Errors) {
  EXPECT_EQ(code_of([] { geometry::rms_scale(Matrix(0, 3)); }), ErrorCode::kEmptyInput);
  Matrix z = Matrix::Ones(2, 2);
  z(1, 1) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_EQ(code_of([&] { geometry::rms_scale(z); }), ErrorCode::kNonFinite);
}

TEST(OmegaTrace, IdentityAndNegation) {
  std::mt19937_64 gen(5);
  const Matrix z = gaussian(gen, 7, 3);
  EXPECT_NEAR(geometry::omega_trace(z, z), 1.0, 1e-15);
  EXPECT_NEAR(geometry::omega_trace(z, -z), -1.0, 1e-15);
}

TEST(OmegaTrace, MatchesDoubleLoopOracle) {
  std::mt19937_64 gen(11);
  for (int i = 0; i < 20; ++i) {
    const Matrix a = gaussian(gen, 10, 4), b = gaussian(gen, 10, 4);
    EXPECT_NEAR(geometry::omega_trace(a, b), testkit::omega_trace_oracle(a, b), 1e-12);
  }
}

TEST(OmegaTrace, ScaleInvariance) {
  std::mt19937_64 gen(13);
  for (int i = 0; i < 50; ++i) {
    const Matrix a = gaussian(gen, 9, 5), b = gaussian(gen, 9, 5);
    const double sa = std::exp(gaussian(gen, 1, 1)(0, 0) * 3), sb = std::exp(gaussian(gen, 1, 1)(0, 0) * 3);
    EXPECT_NEAR(geometry::omega_trace(sa * a, sb * b), geometry::omega_trace(a, b), 1e-12);
  }
}

TEST(OmegaTrace, ZeroNormConvention) {
  const Matrix z = Matrix::Ones(3, 2);
  const Matrix zero = Matrix::Zero(3, 2);
  EXPECT_EQ(geometry::omega_trace(z, zero), 0.0);
  EXPECT_EQ(geometry::omega_trace(zero, z), 0.0);
  EXPECT_EQ(geometry::omega_trace(zero, zero), 1.0);

  // The decomposition identity survives the degenerate case.
  const auto d = geometry::decompose(z, zero, OrthogonalAlignment::identity());
  EXPECT_EQ(d.shape_term, 0.0);
  EXPECT_NEAR(d.residual, d.scale_term + d.shape_term, 1e-12);
}

TEST(OmegaTrace, ShapeMismatchNamesBothShapes) {
  try {
    geometry::omega_trace(Matrix::Ones(3, 4), Matrix::Ones(3, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShapeMismatch);
    EXPECT_NE(std::string(e.what()).find("3x4"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("3x5"), std::string::npos);
  }
}

TEST(OmegaNuclear, IdentityAndRotation) {
  std::mt19937_64 gen(17);
  const Matrix z = gaussian(gen, 12, 4);
  EXPECT_NEAR(geometry::omega_nuclear(z, z), 1.0, 1e-12);
  const Matrix r = orthogonal(gen, 4);
  EXPECT_NEAR(geometry::omega_nuclear(z, z * r), 1.0, 1e-9);
}

TEST(OmegaNuclear, DominatesSampledOrthogonalMaps) {
  std::mt19937_64 gen(19);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = gaussian(gen, 10, 4), b = gaussian(gen, 10, 4);
    const double nuclear = geometry::omega_nuclear(a, b);
    double sampled = testkit::omega_trace_oracle(a, b);
    for (int k = 0; k < 50; ++k) sampled = std::max(sampled, testkit::omega_trace_oracle(a, b * orthogonal(gen, 4)));
    EXPECT_GE(nuclear, sampled - 1e-9);
  }
}

TEST(OmegaNuclear, ZeroNormIsAnError) {
  EXPECT_EQ(code_of([] { geometry::omega_nuclear(Matrix::Zero(2, 2), Matrix::Ones(2, 2)); }), ErrorCode::kZeroNorm);
  EXPECT_EQ(code_of([] { geometry::omega_frobenius(Matrix::Ones(2, 2), Matrix::Zero(2, 2)); }), ErrorCode::kZeroNorm);
  EXPECT_EQ(code_of([] { geometry::cka(Matrix::Zero(2, 2), Matrix::Ones(2, 2)); }), ErrorCode::kZeroNorm);
}

TEST(OmegaFrobenius, RankOneEquality) {
  Matrix z = Matrix::Zero(4, 3);
  z.row(2) << 1.0, -2.0, 0.5;
  EXPECT_NEAR(geometry::omega_frobenius(z, z), 1.0, 1e-15);
  EXPECT_NEAR(geometry::cka(z, z), 1.0, 1e-15);
  EXPECT_NEAR(geometry::omega_frobenius(z, z) * geometry::omega_frobenius(z, z), geometry::cka(z, z), 1e-15);
}

TEST(OmegaFrobenius, TwoEqualSingularValues) {
  // Orthogonal columns of equal norm: Z^T Z = c I with d = 2, so
  // ||Z^T Z||_F / ||Z||_F^2 = c sqrt(2) / (2c).
  Matrix z(3, 2);
  z << 1, 1, 1, -1, 0, 0;
  EXPECT_NEAR(geometry::omega_frobenius(z, z), 1.0 / std::sqrt(2.0), 1e-15);
}

TEST(OmegaFrobenius, BelowNuclear) {
  std::mt19937_64 gen(23);
  for (int i = 0; i < 50; ++i) {
    const Matrix a = gaussian(gen, 8, 3), b = gaussian(gen, 8, 3);
    EXPECT_LE(geometry::omega_frobenius(a, b), geometry::omega_nuclear(a, b) + 1e-12);
  }
}

TEST(Cka, IdentityAndBound) {
  std::mt19937_64 gen(29);
  const Matrix z = gaussian(gen, 6, 3);
  EXPECT_NEAR(geometry::cka(z, z), 1.0, 1e-14);
  for (int i = 0; i < 50; ++i) {
    const Matrix a = gaussian(gen, 8, 3), b = gaussian(gen, 8, 3);
    const double f = geometry::omega_frobenius(a, b);
    EXPECT_GE(geometry::cka(a, b), f * f - 1e-12);
  }
}

TEST(Procrustes, IdenticalInputsGiveIdentity) {
  std::mt19937_64 gen(31);
  const Matrix z = gaussian(gen, 20, 5);
  const auto w = geometry::procrustes_align(z, z);
  ASSERT_TRUE(w.matrix.has_value());
  EXPECT_EQ(w.kind, AlignmentKind::kProcrustes);
  EXPECT_LE((*w.matrix - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Procrustes, RecoversRotation) {
  std::mt19937_64 gen(37);
  const Matrix z = gaussian(gen, 20, 5);
  const Matrix r = orthogonal(gen, 5);
  const auto w = geometry::procrustes_align(z, z * r);
  EXPECT_LE((*w.matrix - r.transpose()).cwiseAbs().maxCoeff(), 1e-8);
  EXPECT_LE((w.matrix->transpose() * *w.matrix - Matrix::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Procrustes, SampledOptimality) {
  std::mt19937_64 gen(41);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = gaussian(gen, 15, 4), b = gaussian(gen, 15, 4);
    const double best = geometry::alignment_residual(a, b, geometry::procrustes_align(a, b));
    EXPECT_LE(best, geometry::alignment_residual(a, b, OrthogonalAlignment::identity()) + 1e-12);
    for (int k = 0; k < 20; ++k) {
      const auto w = OrthogonalAlignment::explicit_matrix(orthogonal(gen, 4));
      EXPECT_LE(best, geometry::alignment_residual(a, b, w) + 1e-12);
    }
  }
}

TEST(Decompose, IdenticalInputs) {
  std::mt19937_64 gen(43);
  const Matrix z = gaussian(gen, 9, 4);
  const auto d = geometry::decompose(z, z, OrthogonalAlignment::identity());
  EXPECT_EQ(d.residual, 0.0);
  EXPECT_NEAR(d.omega, 1.0, 1e-15);
  EXPECT_EQ(d.scale_term, 0.0);
  EXPECT_NEAR(d.shape_term, 0.0, 1e-12);
}

TEST(Decompose, PureScaling) {
  std::mt19937_64 gen(47);
  const Matrix z = gaussian(gen, 9, 4);
  const auto d = geometry::decompose(z, 2.0 * z, OrthogonalAlignment::identity());
  const double rho2 = testkit::sum_squares(z) / 9.0;
  EXPECT_NEAR(d.omega, 1.0, 1e-15);
  EXPECT_NEAR(d.shape_term, 0.0, 1e-12);
  EXPECT_NEAR(d.scale_term, rho2, 1e-12 * rho2);
  EXPECT_NEAR(d.residual, rho2, 1e-12 * rho2);
}

TEST(Decompose, IdentityHoldsAtEveryAlignment) {
  std::mt19937_64 gen(53);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index n = 1 + trial % 13, d = 1 + trial % 6;
    const Matrix a = gaussian(gen, n, d, 0.5 + trial % 4), b = gaussian(gen, n, d, 0.2 + trial % 3);
    const OrthogonalAlignment ws[] = {OrthogonalAlignment::identity(), geometry::procrustes_align(a, b),
                                      OrthogonalAlignment::explicit_matrix(orthogonal(gen, d))};
    for (const auto& w : ws) {
      const auto dec = geometry::decompose(a, b, w);
      // Oracle residual from an explicit loop over (Z_T - Z_P W).
      const Matrix aligned = w.matrix ? Matrix(b * *w.matrix) : b;
      const double direct = testkit::sum_squares(a - aligned) / static_cast<double>(n);
      EXPECT_NEAR(dec.residual, direct, 1e-12 * std::max(1.0, direct));
      EXPECT_LE(std::abs(dec.residual - dec.scale_term - dec.shape_term), 1e-9 * std::max(1.0, dec.residual));
      EXPECT_EQ(dec.alignment, w.kind);
    }
  }
}

TEST(Decompose, RejectsNonOrthogonalExplicit) {
  Matrix w = Matrix::Identity(3, 3);
  w(0, 1) = 0.1;
  EXPECT_EQ(code_of([&] { OrthogonalAlignment::explicit_matrix(w); }), ErrorCode::kNotOrthogonal);
  OrthogonalAlignment forged{AlignmentKind::kExplicit, w};
  EXPECT_EQ(code_of([&] { geometry::decompose(Matrix::Ones(4, 3), Matrix::Ones(4, 3), forged); }),
            ErrorCode::kNotOrthogonal);
}

TEST(FeatureDelta, ReferenceQ2KRow) {
  // rho_T = 138.96, rho_P = 143.86, Omega = 0.7750, K_feat = 2.61; reference delta 248.2226.
  const auto d = geometry::decomposition_from_summary(138.96, 143.86, 0.7750);
  const double delta = geometry::feature_delta(d, 2.61);
  EXPECT_NEAR(delta, 248.2226, 0.005 * 248.2226);
}

TEST(FeatureDelta, ZeroAndUnitConstant) {
  EXPECT_EQ(geometry::feature_delta(geometry::ScaleShapeDecomposition{}, 3.0), 0.0);
  std::mt19937_64 gen(59);
  const Matrix a = gaussian(gen, 11, 3), b = gaussian(gen, 11, 3);
  const auto d = geometry::decompose(a, b, OrthogonalAlignment::identity());
  EXPECT_NEAR(geometry::feature_delta(d, 1.0), std::sqrt(d.residual), 1e-9);
  EXPECT_EQ(code_of([&] { geometry::feature_delta(d, -1.0); }), ErrorCode::kInvalidArgument);
}

TEST(Similarity, OrderingChainAndEquality) {
  std::mt19937_64 gen(61);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index n = 2 + trial % 17, d = 1 + trial % 7;
    const Matrix a = gaussian(gen, n, d), b = gaussian(gen, n, d);
    const double t = geometry::omega_trace(a, b), nuc = geometry::omega_nuclear(a, b);
    const double f = geometry::omega_frobenius(a, b);
    EXPECT_LE(t, nuc + 1e-12);
    EXPECT_LE(f, nuc + 1e-12);
    EXPECT_GE(geometry::cka(a, b), f * f - 1e-12);
    // Symmetric PSD cross-moment: the identity already attains the maximum.
    EXPECT_NEAR(geometry::omega_trace(a, a), geometry::omega_nuclear(a, a), 1e-9);
  }
}
