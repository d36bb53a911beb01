#include <gtest/gtest.h>

#include "ncindex/clifford.hpp"

using namespace ncindex;

TEST(Clifford, GeneratorsAnticommute) {
  for (int n = 1; n <= 6; ++n) {
    CliffordRep rep = build_gammas(n);
    EXPECT_EQ(rep.N, 1 << (n / 2)) << "n=" << n;
    ASSERT_EQ(static_cast<int>(rep.gammas.size()), n);
    EXPECT_LT(clifford_residual(rep.gammas, 1.0), 1e-14) << "n=" << n;
    for (const auto& g : rep.gammas) EXPECT_LT(hermitian_residual(g), 1e-15);
  }
}

TEST(Clifford, CircleGeneratorIsPlusOne) {
  CliffordRep rep = build_gammas(1);
  EXPECT_EQ(rep.gammas[0](0, 0), cplx(1.0, 0.0));
  EXPECT_FALSE(rep.has_grading());
  EXPECT_THROW(grading(rep), std::domain_error);
}

TEST(Clifford, GradingSquaresToOneAndAnticommutes) {
  for (int n : {2, 4, 6}) {
    CliffordRep rep = build_gammas(n);
    ASSERT_TRUE(rep.has_grading());
    const MatC& G = rep.grading;
    EXPECT_LT((G * G - MatC::Identity(rep.N, rep.N)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(hermitian_residual(G), 1e-14);
    for (const auto& g : rep.gammas) EXPECT_LT((G * g + g * G).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_NEAR(std::abs(G.trace()), 0.0, 1e-14);
  }
}

TEST(Clifford, PlaneGradedTraceOfTopWord) {
  // Gamma = -i g1 g2, so Gamma g1 g2 = -i (g1 g2)^2 = i on C^2
  CliffordRep rep = build_gammas(2);
  cplx t = graded_trace(rep, {1, 2});
  EXPECT_NEAR(t.real(), 0.0, 1e-14);
  EXPECT_NEAR(t.imag(), 2.0, 1e-14);
  EXPECT_NEAR(std::abs(graded_trace(rep, {2, 1}) + t), 0.0, 1e-14);
}

TEST(Clifford, GradedTraceVanishesOnIncompleteWords) {
  for (int n : {2, 4}) {
    CliffordRep rep = build_gammas(n);
    for (int k = 1; k <= n; ++k) {
      EXPECT_NEAR(std::abs(graded_trace(rep, {k})), 0.0, 1e-14);
      EXPECT_NEAR(std::abs(graded_trace(rep, {k, k})), 0.0, 1e-14);
    }
    if (n == 4) EXPECT_NEAR(std::abs(graded_trace(rep, {1, 2, 3})), 0.0, 1e-14);
  }
  EXPECT_THROW(graded_trace(build_gammas(2), {3}), std::out_of_range);
}

TEST(Clifford, DoubledPairAnticommutes) {
  for (int n = 1; n <= 3; ++n) {
    DoubledPair p = doubled_pair(n);
    std::vector<MatC> all = p.gamma;
    for (const auto& h : p.gamma_hat) {
      EXPECT_LT((h + h.adjoint()).cwiseAbs().maxCoeff(), 1e-15);
      all.push_back(-kI * h);
    }
    EXPECT_EQ(all[0].rows(), 1 << n);
    EXPECT_LT(clifford_residual(all, 1.0), 1e-14);
    EXPECT_LT(clifford_residual(p.gamma_hat, -1.0), 1e-14);
  }
}

TEST(Clifford, RejectsNonPositiveDimension) {
  EXPECT_THROW(build_gammas(0), std::invalid_argument);
  EXPECT_THROW(doubled_pair(0), std::invalid_argument);
}
