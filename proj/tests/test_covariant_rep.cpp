#include <gtest/gtest.h>

#include <random>

#include "ncindex/covariant_rep.hpp"

using namespace ncindex;

TEST(Truncation, ModeIndexRoundTrip) {
  CliffordRep rep = build_gammas(3);
  TruncationSpec s = make_spec(3, 2, 2, rep);
  EXPECT_EQ(s.num_modes(), 125);
  EXPECT_EQ(s.dim(), 125 * 2 * 2);
  for (long q = 0; q < s.num_modes(); ++q) EXPECT_EQ(s.index_of(s.mode_at(q)), q);
  EXPECT_EQ(s.index_of({3, 0, 0}), -1);
  EXPECT_THROW(make_spec(2, 2, 0, build_gammas(2)), std::invalid_argument);
}

TEST(Dirac, SquaresToLaplacianPerMode) {
  for (int n = 1; n <= 3; ++n) {
    CliffordRep rep = build_gammas(n);
    TruncationSpec s = make_spec(n, 2, 1, rep);
    MatC d = build_dirac(s, rep).matrix;
    MatC lap = MatC::Zero(s.dim(), s.dim());
    for (int k = 1; k <= n; ++k) {
      MatC dk = build_Dk(s, k).matrix;
      lap += dk * dk;
    }
    EXPECT_LT((d * d - lap).cwiseAbs().maxCoeff(), 1e-13);
    EXPECT_LT(hermitian_residual(d), 1e-15);
  }
}

TEST(Dirac, MassiveOperatorSquaresToShiftedLaplacian) {
  CliffordRep rep = build_gammas(2);
  TruncationSpec s = make_spec(2, 2, 1, rep, true, 0.7);
  MatC d = build_massive(s, rep).matrix;
  MatC sq = d * d;
  for (long i = 0; i < s.dim(); ++i) {
    const Mode r = s.mode_at((i % s.half_dim()) / s.block());
    EXPECT_NEAR(sq(i, i).real(), r[0] * r[0] + r[1] * r[1] + 0.49, 1e-13);
  }
  EXPECT_LT((sq - MatC(sq.diagonal().asDiagonal())).cwiseAbs().maxCoeff(), 1e-13);
  MatC G = build_grading(s, rep).matrix;
  EXPECT_LT((G * d + d * G).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_THROW(build_dirac(s, rep), std::invalid_argument);
}

TEST(Dirac, SpectralFunctionsOfMassiveOperator) {
  CliffordRep rep = build_gammas(1);
  TruncationSpec s = make_spec(1, 3, 1, rep, true);
  DenseOperator d = build_massive(s, rep);
  MatC P = spectral_projection(d).matrix;
  EXPECT_LT((P * P - P).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_NEAR(P.trace().real(), static_cast<double>(s.half_dim()), 1e-12);
  MatC R = phase(d).matrix;
  EXPECT_LT((R * R - MatC::Identity(s.dim(), s.dim())).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT((R - (2.0 * P - MatC::Identity(s.dim(), s.dim()))).cwiseAbs().maxCoeff(), 1e-13);
  MatC F = bounded_transform(d).matrix;
  EXPECT_LT(opnorm(F), 1.0);
  // F = D (1 + D^2)^{-1/2} with D^2 = r^2 + 1 per mode
  MatC sq = d.matrix * d.matrix;
  for (long i = 0; i < s.dim(); ++i)
    for (long j = 0; j < s.dim(); ++j)
      EXPECT_NEAR(std::abs(F(i, j) - d.matrix(i, j) / std::sqrt(1.0 + sq(j, j).real())), 0.0, 1e-13);
}

TEST(Representation, HomomorphismOnInteriorModes) {
  std::mt19937_64 rng(77);
  for (int n : {1, 2, 3}) {
    CliffordRep rep = build_gammas(n);
    TruncationSpec s = make_spec(n, n == 3 ? 3 : 5, 2, rep);
    SkewMatrix t = n == 1 ? SkewMatrix::zero(1) : SkewMatrix::planar(n, 0.29);
    for (int trial = 0; trial < 5; ++trial) {
      ModeElement a = random_element(n, 2, 1, rng), b = random_element(n, 2, 1, rng);
      MatC lhs = represent(a, t, s).matrix * represent(b, t, s).matrix;
      MatC rhs = represent(star_multiply(a, b, t), t, s).matrix;
      EXPECT_LT(interior_residual(lhs, rhs, s, 2), 1e-12);
    }
  }
}

TEST(Representation, AdjointAndUnit) {
  std::mt19937_64 rng(4);
  CliffordRep rep = build_gammas(2);
  TruncationSpec s = make_spec(2, 3, 1, rep);
  SkewMatrix t = SkewMatrix::planar(2, 0.6);
  ModeElement a = random_element(2, 1, 2, rng) + ModeElement::unit(2, 1, 0.5);
  EXPECT_LT((represent(adjoint(a), t, s).matrix - represent(a, t, s).matrix.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
  MatC one = represent(ModeElement::unit(2, 1), t, s).matrix;
  EXPECT_EQ((one - MatC::Identity(s.dim(), s.dim())).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(represent(random_element(2, 1, 4, rng), t, s), std::domain_error);
}

TEST(Representation, WarpingTheUndeformedRepresentation) {
  // the warped convolution of pi(a) is pi^Theta(a)
  std::mt19937_64 rng(21);
  CliffordRep rep = build_gammas(2);
  TruncationSpec s = make_spec(2, 3, 2, rep);
  SkewMatrix t = SkewMatrix::planar(2, 0.37);
  ModeElement a = random_element(2, 2, 2, rng);
  MatC warped = warp_operator(represent(a, SkewMatrix::zero(2), s), t).matrix;
  EXPECT_LT((warped - represent(a, t, s).matrix).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Representation, DiracCommutatorIdentity) {
  std::mt19937_64 rng(8);
  for (int n : {1, 2}) {
    CliffordRep rep = build_gammas(n);
    TruncationSpec s = make_spec(n, n == 1 ? 10 : 5, 2, rep);
    SkewMatrix t = n == 1 ? SkewMatrix::zero(1) : SkewMatrix::planar(2, 0.21);
    for (int trial = 0; trial < 3; ++trial)
      EXPECT_LT(commutator_identity_residual(random_element(n, 2, 1, rng), t, s, rep, 1), 1e-12);
  }
}

TEST(Representation, WarpedGeneratorsAssembly) {
  CliffordRep rep = build_gammas(3);
  TruncationSpec s = make_spec(3, 1, 1, rep);
  SkewMatrix t(3);
  t.set(0, 1, 0.2);
  t.set(0, 2, -0.1);
  t.set(1, 2, 0.35);
  std::vector<DenseOperator> X;
  for (int k = 1; k <= 3; ++k) X.push_back({s, 3.0 * MatC::Identity(s.dim(), s.dim()) * static_cast<double>(k)});
  std::vector<DenseOperator> Y = warped_generators(s, t, X);
  ASSERT_EQ(Y.size(), 3u);
  for (int j = 0; j < 3; ++j) {
    MatC expect = X[j].matrix;
    for (int k = 0; k < 3; ++k) expect += 2.0 * kPi * t(j, k) * build_Dk(s, k + 1).matrix;
    EXPECT_EQ((Y[j].matrix - expect).cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Representation, OperatorNormOfUnitaryAndShift) {
  ModeElement u = ModeElement::basis({1, 0});
  EXPECT_NEAR(operator_norm(u, SkewMatrix::planar(2, 0.3), 4), 1.0, 1e-12);
  ModeElement a = ModeElement::basis({0, 0}) + ModeElement::basis({1, 0});
  // |1 + z| on the circle has sup 2; the truncated shift approaches it from below
  const double v = operator_norm(a, SkewMatrix::zero(2), 12);
  EXPECT_LT(v, 2.0);
  EXPECT_GT(v, 1.98);
}
