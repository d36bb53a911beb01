#include <gtest/gtest.h>

#include <random>

#include "ncindex/local_formula.hpp"
#include "ncindex/models.hpp"

using namespace ncindex;

TEST(Constants, DisplayedOddConstant) {
  // -1/(2 pi i) on the circle, i/(3 (2 pi)^3) in dimension three
  const cplx l1 = literal_constant_odd(1);
  EXPECT_NEAR(std::abs(l1 - (-1.0 / (2.0 * kPi * kI))), 0.0, 1e-16);
  const cplx l3 = literal_constant_odd(3);
  EXPECT_NEAR(std::abs(l3 - kI / (3.0 * std::pow(2.0 * kPi, 3))), 0.0, 1e-18);
  EXPECT_NEAR(std::abs(constant_odd(1) - l1), 0.0, 1e-16);
  EXPECT_THROW(literal_constant_odd(2), std::domain_error);
  EXPECT_THROW(constant_even(3), std::domain_error);
}

TEST(Constants, ChernCharacterNormalization) {
  EXPECT_NEAR(std::abs(constant_odd(3) - 1.0 / (6.0 * std::pow(2.0 * kPi, 2))), 0.0, 1e-18);
  EXPECT_NEAR(std::abs(constant_even(2) - (-1.0 / (2.0 * kPi * kI))), 0.0, 1e-16);
  EXPECT_NEAR(std::abs(literal_constant_even(2) - (-4.0 / std::pow(2.0 * kPi * kI, 2))), 0.0, 1e-16);
}

TEST(OddFormula, WindingNumberOnTheCircle) {
  for (int w = -3; w <= 3; ++w) {
    const cplx v = odd_local_index(winding_unitary(w), SkewMatrix::zero(1));
    EXPECT_NEAR(v.real(), -w, 1e-12);
    EXPECT_NEAR(v.imag(), 0.0, 1e-12);
  }
  EXPECT_THROW(odd_local_index(ModeElement::unit(1, 1, 2.0), SkewMatrix::zero(1)), std::domain_error);
}

TEST(OddFormula, ConstantAndSeparableUnitariesHaveZeroDegree) {
  // u(x) depending on x_1 only has zero degree on T^3
  ModeElement u(3, 2);
  MatC a = MatC::Zero(2, 2), b = MatC::Zero(2, 2);
  a(0, 0) = 1.0;
  b(1, 1) = 1.0;
  u.coeffs[{1, 0, 0}] = a;
  u.coeffs[{0, 0, 0}] = b;
  EXPECT_NEAR(std::abs(odd_local_index(u, SkewMatrix::zero(3))), 0.0, 1e-12);
}

TEST(OddFormula, DegreeOneUnitaryOnTheThreeTorus) {
  CorrectionReport u = degree_one_unitary();
  const cplx v = odd_local_index(u.element, SkewMatrix::zero(3), 0.5);
  EXPECT_NEAR(std::abs(v.real()), 1.0, 1e-4);
  EXPECT_NEAR(v.imag(), 0.0, 1e-4);
}

TEST(EvenFormula, ClutchingProjectionHasChernNumberOne) {
  CorrectionReport e = clutching_projection();
  EXPECT_LT(e.residual, 1e-3);
  const cplx v = even_local_index(e.element, SkewMatrix::zero(2), 1e-2);
  EXPECT_NEAR(v.real(), 1.0, 1e-6);
  EXPECT_NEAR(v.imag(), 0.0, 1e-6);
}

TEST(EvenFormula, ConstantProjectionHasChernNumberZero) {
  ModeElement e(2, 2);
  e.coeffs[{0, 0}] = 0.5 * MatC::Identity(2, 2) + 0.5 * detail::pauli(1);
  EXPECT_NEAR(std::abs(even_local_index(e, SkewMatrix::planar(2, 0.3))), 0.0, 1e-14);
}

TEST(DeformedFormula, ParityMustMatchDimension) {
  EXPECT_THROW(deformed_local_index(winding_unitary(1), SkewMatrix::zero(1), Parity::even), std::domain_error);
  const cplx v = deformed_local_index(winding_unitary(2), SkewMatrix::zero(1), Parity::odd);
  EXPECT_NEAR(v.real(), -2.0, 1e-12);
}

TEST(DeformedFormula, BasisUnitaryOfNoncommutativeThreeTorusHasZeroDegree) {
  SkewMatrix t(3);
  t.set(0, 1, 0.3);
  t.set(1, 2, 0.2);
  EXPECT_NEAR(std::abs(deformed_local_index(ModeElement::basis({1, 1, 0}), t, Parity::odd)), 0.0, 1e-12);
}

TEST(Residue, ClosedFormSphereAreas) {
  EXPECT_NEAR(residue_volume(1), 2.0, 1e-15);
  EXPECT_NEAR(residue_volume(2), 2.0 * kPi, 1e-14);
  EXPECT_NEAR(residue_volume(3), 4.0 * kPi, 1e-14);
  for (int n : {1, 2, 3}) {
    ResidueEstimate r = residue_volume_numeric(n);
    EXPECT_NEAR(r.value, residue_volume(n), 1e-4) << "n=" << n;
  }
}
