#include <gtest/gtest.h>

#include "ncindex/experiments.hpp"
#include "ncindex/models.hpp"

using namespace ncindex;

TEST(HallDisplay, CircleFormsAgreeWithFlow) {
  for (int w : {-2, 1, 3}) {
    HallDisplay h = hall_flow_display(winding_unitary(w), SkewMatrix::zero(1), 0.0, 8, 16);
    EXPECT_NEAR(h.trace_form.real(), -w, 1e-12);
    EXPECT_NEAR(std::abs(h.literal_trace_form - h.trace_form), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(h.product_form - h.trace_form), 0.0, 1e-12);
    ASSERT_TRUE(h.flow.has_value());
    EXPECT_EQ(*h.flow, -w);
  }
}

TEST(HallDisplay, ProductOfIntegralsVanishesInHigherDimension) {
  CorrectionReport u = degree_one_unitary();
  HallDisplay h = hall_flow_display(u.element, SkewMatrix::zero(3), 0.0, 8, 0, 0.5);
  EXPECT_NEAR(std::abs(h.trace_form.real()), 1.0, 1e-4);
  EXPECT_NEAR(std::abs(h.product_form), 0.0, 1e-14);
  // the displayed constant is a fixed multiple (i / pi) of the integer normalization
  EXPECT_NEAR(std::abs(h.literal_trace_form / h.trace_form - literal_constant_odd(3) / constant_odd(3)), 0.0, 1e-12);
  EXPECT_FALSE(h.flow.has_value());
}

TEST(HallDisplay, DeformedUnitaryKeepsItsDegree) {
  ModeElement u = 0.9 * ModeElement::basis({1, 0, 0}) + 0.1 * ModeElement::basis({0, 1, 0});
  SkewMatrix t(3);
  t.set(0, 1, 0.1);
  HallDisplay h = hall_flow_display(u, t, 0.1, 10, 0, 1e-3);
  EXPECT_LT(h.residual, 1e-9);
  EXPECT_NEAR(std::abs(h.trace_form), 0.0, 1e-8);
}

TEST(HallDisplay, SuspendedProjectionCarriesItsChernNumber) {
  CorrectionReport e = clutching_projection();
  ModeElement u = suspension_unitary(e.element);
  // u* u - 1 = (e^2 - e)(2 - U_3 - U_3*) for self-adjoint e
  const double bound = 4.0 * (idempotency_defect(e.element, SkewMatrix::zero(2)) + selfadjointness_defect(e.element));
  EXPECT_LE(unitarity_defect(u, SkewMatrix::zero(3)), bound + 1e-12);
  HallDisplay h = hall_flow_display(u, SkewMatrix::zero(3), 0.0, 8, 0, 1e-2, false);
  EXPECT_TRUE(h.converged);
  EXPECT_NEAR(h.trace_form.real(), -1.0, 1e-6);
}

TEST(Sweep, SmallPlanarSweepIsInvariant) {
  CorrectionReport e = clutching_projection(1.2, 4, 32);
  SweepOptions o;
  o.window = 24;
  o.index_radius = 6;
  o.cutoff = 10;
  DeformedSweep s = deformed_index_experiment(e.element, {0.0, 0.02}, o);
  ASSERT_EQ(s.entries.size(), 2u);
  EXPECT_TRUE(s.invariant);
  for (const auto& en : s.entries) {
    EXPECT_EQ(en.report.numerical_index, 1);
    EXPECT_LT(en.residual, 1e-10);
    EXPECT_NEAR(en.trace, 1.0 + 2.0 * en.theta, 1e-8);
  }
  EXPECT_THROW(deformed_index_experiment(winding_unitary(1), {0.0}, o), std::invalid_argument);
}
