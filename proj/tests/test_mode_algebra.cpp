#include <gtest/gtest.h>

#include <random>

#include "ncindex/mode_algebra.hpp"

using namespace ncindex;

namespace {

double distance(const ModeElement& a, const ModeElement& b) { return coeff_norm(absorb_unit(a - b)); }

SkewMatrix random_theta(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  SkewMatrix t(n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) t.set(i, j, u(rng));
  return t;
}

}  // namespace

TEST(SkewMatrix, StorageAndPairing) {
  SkewMatrix t(3);
  t.set(0, 1, 0.25);
  t.set(2, 1, 0.5);
  EXPECT_EQ(t(1, 0), -0.25);
  EXPECT_EQ(t(1, 2), -0.5);
  EXPECT_EQ(t(2, 2), 0.0);
  const Mode r{1, 2, 3}, s{-1, 0, 2};
  const VecR rv = VecR::Map(std::vector<double>{1, 2, 3}.data(), 3);
  const VecR sv = VecR::Map(std::vector<double>{-1, 0, 2}.data(), 3);
  EXPECT_NEAR(t.pair(r, s), rv.dot(t.matrix() * sv), 1e-15);
  EXPECT_NEAR(t.pair(r, s), -t.pair(s, r), 1e-15);
  EXPECT_THROW(t.set(1, 1, 0.1), std::invalid_argument);
  MatR bad = MatR::Zero(2, 2);
  bad(0, 1) = 1.0;
  EXPECT_THROW(SkewMatrix::from_matrix(bad), std::invalid_argument);
}

TEST(StarProduct, BasisElementsPickUpCocycle) {
  SkewMatrix t = SkewMatrix::planar(2, 0.3);
  const Mode p{2, -1}, q{1, 3};
  ModeElement c = star_multiply(ModeElement::basis(p), ModeElement::basis(q), t);
  ASSERT_EQ(c.coeffs.size(), 1u);
  const double phase = 2.0 * kPi * 0.3 * (2 * 3 - (-1) * 1);
  EXPECT_NEAR(std::abs(c.coeff({3, 2})(0, 0) - std::polar(1.0, phase)), 0.0, 1e-14);
  // U_p U_q = sigma(p, q)^2 U_q U_p
  ModeElement d = star_multiply(ModeElement::basis(q), ModeElement::basis(p), t);
  EXPECT_NEAR(std::abs(c.coeff({3, 2})(0, 0) - std::polar(1.0, 2.0 * phase) * d.coeff({3, 2})(0, 0)), 0.0, 1e-13);
}

TEST(StarProduct, UndeformedProductIsConvolution) {
  std::mt19937_64 rng(11);
  ModeElement a = random_element(2, 2, 1, rng), b = random_element(2, 2, 1, rng);
  ModeElement c = star_multiply(a, b, SkewMatrix::zero(2));
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y) {
      MatC acc = MatC::Zero(2, 2);
      for (const auto& kv : a.coeffs) {
        Mode s{x - kv.first[0], y - kv.first[1]};
        acc += kv.second * b.coeff(s);
      }
      EXPECT_LT((c.coeff({x, y}) - acc).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(StarProduct, AlgebraIdentitiesOnRandomElements) {
  std::mt19937_64 rng(2024);
  for (int n : {2, 3}) {
    for (int trial = 0; trial < 10; ++trial) {
      SkewMatrix t = random_theta(n, rng);
      ModeElement a = random_element(n, 2, 1, rng), b = random_element(n, 2, 1, rng), c = random_element(n, 2, 1, rng);
      const double scale = coeff_norm(a) * coeff_norm(b) * coeff_norm(c);
      EXPECT_LT(distance(star_multiply(star_multiply(a, b, t), c, t), star_multiply(a, star_multiply(b, c, t), t)),
                1e-12 * scale);
      EXPECT_LT(distance(adjoint(star_multiply(a, b, t)), star_multiply(adjoint(b), adjoint(a), t)), 1e-13 * scale);
      const cplx tab = trace(star_multiply(a, b, t));
      EXPECT_LT(std::abs(tab - trace(star_multiply(a, b, SkewMatrix::zero(n)))), 1e-12 * scale);
      EXPECT_LT(std::abs(tab - trace(star_multiply(b, a, t))), 1e-12 * scale);
      EXPECT_LT(std::abs(tab - trace_of_product(a, b)), 1e-12 * scale);
    }
  }
}

TEST(StarProduct, DerivationsAreLeibniz) {
  std::mt19937_64 rng(5);
  SkewMatrix t = SkewMatrix::planar(3, 0.17);
  ModeElement a = random_element(3, 1, 1, rng), b = random_element(3, 1, 1, rng);
  for (int k = 1; k <= 3; ++k) {
    ModeElement lhs = derivation(star_multiply(a, b, t), k);
    ModeElement rhs = star_multiply(derivation(a, k), b, t) + star_multiply(a, derivation(b, k), t);
    EXPECT_LT(distance(lhs, rhs), 1e-11);
  }
  EXPECT_THROW(derivation(a, 0), std::out_of_range);
  EXPECT_THROW(derivation(a, 4), std::out_of_range);
}

TEST(StarProduct, UnitComponentActsAsIdentity) {
  std::mt19937_64 rng(3);
  SkewMatrix t = SkewMatrix::planar(2, 0.4);
  ModeElement a = random_element(2, 2, 2, rng);
  ModeElement one = ModeElement::unit(2, 2);
  EXPECT_LT(distance(star_multiply(one, a, t), a), 1e-15);
  EXPECT_LT(distance(star_multiply(a, one, t), a), 1e-15);
  ModeElement shifted = a + ModeElement::unit(2, 2, cplx(0.0, 2.0));
  EXPECT_NEAR(std::abs(trace(shifted) - trace(a) - cplx(0.0, 4.0)), 0.0, 1e-14);
  EXPECT_LT(distance(absorb_unit(shifted), shifted), 1e-15);
}

TEST(StarProduct, RadiusDiscardsOuterModes) {
  std::mt19937_64 rng(9);
  ModeElement a = random_element(2, 1, 2, rng), b = random_element(2, 1, 2, rng);
  SkewMatrix t = SkewMatrix::planar(2, 0.2);
  ModeElement full = star_multiply(a, b, t), cut = star_multiply(a, b, t, 1);
  EXPECT_EQ(full.support_radius(), 4);
  EXPECT_EQ(cut.support_radius(), 1);
  EXPECT_LT(distance(truncate(full, 1), cut), 1e-14);
}

TEST(ModeElement, RandomElementFillsBox) {
  std::mt19937_64 rng(1);
  ModeElement a = random_element(3, 2, 1, rng);
  EXPECT_EQ(a.coeffs.size(), 27u);
  EXPECT_EQ(a.support_radius(), 1);
  std::mt19937_64 rng2(1);
  EXPECT_EQ(distance(a, random_element(3, 2, 1, rng2)), 0.0);
}

TEST(ModeElement, UnitaryAndProjectionDefects) {
  SkewMatrix t = SkewMatrix::planar(2, 0.3);
  ModeElement u = ModeElement::basis({1, -2});
  EXPECT_LT(unitarity_defect(u, t), 1e-15);
  ModeElement e(2, 2);
  MatC p = MatC::Zero(2, 2);
  p(0, 0) = 1.0;
  e.coeffs[{0, 0}] = p;
  EXPECT_LT(idempotency_defect(e, t), 1e-15);
  EXPECT_LT(selfadjointness_defect(e), 1e-15);
  EXPECT_GT(idempotency_defect(2.0 * e, t), 1.0);
}

TEST(ModeElement, MismatchedShapesThrow) {
  ModeElement a(2, 1), b(2, 2);
  EXPECT_THROW(a += b, std::invalid_argument);
  EXPECT_THROW(star_multiply(a, ModeElement(3, 1), SkewMatrix::zero(2)), std::invalid_argument);
  EXPECT_THROW(star_multiply(a, a, SkewMatrix::zero(3)), std::invalid_argument);
}
