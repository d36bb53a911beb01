#include <gtest/gtest.h>

#include <random>

#include "ncindex/deformation.hpp"
#include "ncindex/experiments.hpp"
#include "ncindex/models.hpp"

using namespace ncindex;

namespace {

double distance(const ModeElement& a, const ModeElement& b) { return coeff_norm(absorb_unit(a - b)); }

}  // namespace

TEST(BoxStar, AgreesWithSparseStarProduct) {
  std::mt19937_64 rng(31);
  for (int n : {1, 2, 3}) {
    SkewMatrix t = n == 1 ? SkewMatrix::zero(1) : SkewMatrix::planar(n, 0.23);
    ModeElement a = random_element(n, 2, 2, rng), b = random_element(n, 2, 1, rng);
    ModeElement box = from_box(box_star(to_box(a, 2), to_box(b, 2), t, 3));
    EXPECT_LT(distance(box, star_multiply(a, b, t)), 1e-14 * coeff_norm(a) * coeff_norm(b)) << "n=" << n;
  }
}

TEST(BoxStar, AdjointNormAndIdentity) {
  std::mt19937_64 rng(32);
  ModeElement a = random_element(2, 2, 2, rng);
  EXPECT_LT(distance(from_box(box_adjoint(to_box(a, 3))), adjoint(a)), 1e-15);
  BoxElement one = box_identity(2, 2, 3);
  EXPECT_LT(distance(from_box(box_star(one, to_box(a, 3), SkewMatrix::planar(2, 0.4))), a), 1e-15);
  double l1 = 0.0;
  for (const auto& kv : a.coeffs) l1 += kv.second.norm();
  EXPECT_NEAR(box_norm(to_box(a, 2)), l1, 1e-12);
}

TEST(Purification, ProjectionCorrectedInDeformedAlgebra) {
  CorrectionReport e = clutching_projection(1.2, 4, 32);
  SkewMatrix t = SkewMatrix::planar(2, 0.02);
  CorrectionReport p = purify_projection(e.element, t, {24, 1e-10, 60});
  ASSERT_TRUE(p.converged);
  EXPECT_LT(projection_residual(p.element, t), 1e-10);
  EXPECT_LT(selfadjointness_defect(p.element), 1e-9);
  EXPECT_NEAR(trace(p.element).real(), 1.0 + 2.0 * 0.02, 1e-6);
}

TEST(Purification, UnitaryCorrectedInDeformedAlgebra) {
  ModeElement u = 0.9 * ModeElement::basis({1, 0}) + 0.1 * ModeElement::basis({0, 1});
  SkewMatrix t = SkewMatrix::planar(2, 0.15);
  ModeElement v = deform_unitary(u, t, {12, 1e-10, 60});
  EXPECT_LT(unitarity_defect(v, t), 1e-9);
}

TEST(ParityTwist, IntertwinesHalfShiftedProducts) {
  std::mt19937_64 rng(33);
  const double th = 0.21;
  SkewMatrix t0 = SkewMatrix::planar(2, th), t1 = SkewMatrix::planar(2, th + 0.5);
  for (int trial = 0; trial < 5; ++trial) {
    ModeElement a = random_element(2, 2, 2, rng), b = random_element(2, 2, 2, rng);
    ModeElement lhs = parity_twist(star_multiply(a, b, t0), 0, 1);
    ModeElement rhs = star_multiply(parity_twist(a, 0, 1), parity_twist(b, 0, 1), t1);
    EXPECT_LT(distance(lhs, rhs), 1e-11);
    EXPECT_LT(distance(parity_twist(adjoint(a), 0, 1), adjoint(parity_twist(a, 0, 1))), 1e-15);
    EXPECT_EQ(trace(parity_twist(a, 0, 1)), trace(a));
  }
}

TEST(DirectSumUnit, AddsTraceAndKeepsIdempotency) {
  ModeElement e(2, 1);
  e.coeffs[{0, 0}] = MatC::Identity(1, 1);
  ModeElement f = direct_sum_unit(e, 2);
  EXPECT_EQ(f.m, 3);
  EXPECT_NEAR(trace(f).real(), 3.0, 1e-15);
  EXPECT_LT(idempotency_defect(f, SkewMatrix::planar(2, 0.3)), 1e-15);
}

TEST(DeformedTrace, IsTheSymbolTrace) {
  std::mt19937_64 rng(34);
  ModeElement a = random_element(3, 2, 1, rng);
  EXPECT_EQ(deformed_trace(a), trace(a));
}

TEST(Neshveyev, InverseAndShiftOnGaussianCoefficients) {
  GridSpec g{2, 8.0, 64};
  SkewMatrix t = SkewMatrix::planar(2, 0.05);
  auto gauss = [](double cx, double cy, double w) {
    return [=](const std::vector<double>& x) {
      return cplx(std::exp(-w * ((x[0] - cx) * (x[0] - cx) + (x[1] - cy) * (x[1] - cy))), 0.0);
    };
  };
  SampledMap f;
  f.emplace(Mode{1, 0}, sample(g, gauss(0.2, -0.1, 0.5)));
  SampledMap z = neshveyev_transform(g, f, SkewMatrix::zero(2));
  EXPECT_LT((z.at({1, 0}) - f.at({1, 0})).cwiseAbs().maxCoeff(), 1e-12);
  SampledMap d = neshveyev_transform(g, f, t);
  SampledMap back = neshveyev_transform(g, d, -t);
  EXPECT_LT((back.at({1, 0}) - f.at({1, 0})).cwiseAbs().maxCoeff(), 1e-12);
  // mode (1,0) shifts its coefficient by -Theta_12 along t_2
  const auto shifted = sample(g, gauss(0.2, -0.1 - 0.05, 0.5));
  EXPECT_LT((d.at({1, 0}) - shifted).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(ClassDeformation, TwistAndUnitsAtLargeTheta) {
  CorrectionReport e = clutching_projection(1.2, 4, 32);
  const int chern = static_cast<int>(std::lround(even_local_index(e.element, SkewMatrix::zero(2), 1e-2).real()));
  ASSERT_EQ(chern, 1);
  const SkewMatrix t = SkewMatrix::planar(2, 0.55);
  ClassDeformation cd = deform_projection_class(e.element, t, chern, {24, 1e-10, 60});
  EXPECT_EQ(cd.half_turns, 1);
  EXPECT_NEAR(cd.base_theta, 0.05, 1e-12);
  EXPECT_EQ(cd.units, 1);
  EXPECT_EQ(cd.report.element.m, 3);
  EXPECT_LT(projection_residual(cd.report.element, t), 1e-10);
  EXPECT_NEAR(trace(cd.report.element).real(), 1.0 + 2.0 * 0.55, 1e-8);
  EXPECT_THROW(deform_projection_class(e.element, t, -1, {24, 1e-10, 60}), std::domain_error);
}
