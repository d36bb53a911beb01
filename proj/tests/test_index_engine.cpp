#include <gtest/gtest.h>

#include <random>

#include "ncindex/index_engine.hpp"
#include "ncindex/local_formula.hpp"
#include "ncindex/models.hpp"

using namespace ncindex;

TEST(ToeplitzIndex, WindingUnitariesOnTheCircle) {
  CliffordRep rep = build_gammas(1);
  for (int w = -2; w <= 2; ++w) {
    ModeElement u = winding_unitary(w);
    auto build = [&](int M) { return toeplitz_compress(u, SkewMatrix::zero(1), make_spec(1, M, 1, rep), rep); };
    IndexReport r = numerical_index(build, 24);
    EXPECT_EQ(r.numerical_index, -w) << "w=" << w;
    EXPECT_TRUE(r.reliable) << "w=" << w;
    EXPECT_TRUE(r.cutoffs_agree);
    EXPECT_NEAR(r.tau_index, -w, 1e-10);
    EXPECT_EQ(r.kernel_dim, w < 0 ? -w : 0);
    EXPECT_EQ(r.cokernel_dim, w > 0 ? w : 0);
  }
}

TEST(ToeplitzIndex, MatrixValuedWindingAddsUp) {
  // diag(z, z^2, 1) has total winding 3
  CliffordRep rep = build_gammas(1);
  ModeElement u(1, 3);
  MatC c1 = MatC::Zero(3, 3), c2 = MatC::Zero(3, 3), c0 = MatC::Zero(3, 3);
  c1(0, 0) = 1.0;
  c2(1, 1) = 1.0;
  c0(2, 2) = 1.0;
  u.coeffs[{1}] = c1;
  u.coeffs[{2}] = c2;
  u.coeffs[{0}] = c0;
  IndexReport r = numerical_index(toeplitz_compress(u, SkewMatrix::zero(1), make_spec(1, 16, 3, rep), rep));
  EXPECT_EQ(r.numerical_index, -3);
  EXPECT_NEAR(odd_local_index(u, SkewMatrix::zero(1)).real(), -3.0, 1e-12);
}

TEST(ToeplitzIndex, InvertibleCompressionHasIndexZero) {
  CliffordRep rep = build_gammas(2);
  // 2 + U_(1,0) is invertible with winding zero along every axis
  ModeElement a = ModeElement::unit(2, 1, 2.0) + ModeElement::basis({1, 0});
  Compression c = toeplitz_compress(a, SkewMatrix::planar(2, 0.3), make_spec(2, 6, 1, rep), rep);
  IndexReport r = numerical_index(c);
  EXPECT_EQ(r.numerical_index, 0);
  EXPECT_EQ(r.kernel_dim, 0);
  EXPECT_GT(r.smallest_sv, 0.5);
}

TEST(ToeplitzIndex, RejectsMismatchedInputs) {
  CliffordRep rep = build_gammas(1);
  EXPECT_THROW(toeplitz_compress(winding_unitary(5), SkewMatrix::zero(1), make_spec(1, 3, 1, rep), rep),
               std::domain_error);
  EXPECT_THROW(toeplitz_compress(ModeElement::unit(1, 2), SkewMatrix::zero(1), make_spec(1, 3, 1, rep), rep),
               std::invalid_argument);
}

TEST(ChernPairing, OddPairingMatchesWindingForEveryPower) {
  CliffordRep rep = build_gammas(1);
  TruncationSpec s = make_spec(1, 32, 1, rep);
  for (int w : {-2, 1, 3})
    for (int pairs : {1, 2, 3}) {
      cplx v = chern_pairing_odd(winding_unitary(w), SkewMatrix::zero(1), s, rep, pairs);
      EXPECT_NEAR(v.real(), -w, 1e-10) << "w=" << w << " pairs=" << pairs;
      EXPECT_NEAR(v.imag(), 0.0, 1e-10);
    }
  EXPECT_THROW(chern_pairing_odd(ModeElement::unit(1, 1, 2.0), SkewMatrix::zero(1), s, rep), std::domain_error);
}

TEST(ChernPairing, EvenPairingOfConstantProjectionVanishes) {
  CliffordRep rep = build_gammas(2);
  ModeElement e(2, 2);
  MatC p = MatC::Zero(2, 2);
  p(0, 0) = 1.0;
  e.coeffs[{0, 0}] = p;
  cplx v = chern_pairing_even(e, SkewMatrix::zero(2), make_spec(2, 4, 2, rep, true), rep);
  EXPECT_NEAR(std::abs(v), 0.0, 1e-12);
}

TEST(EvenIndex, ClutchingProjectionMatchesChernNumber) {
  CliffordRep rep = build_gammas(2);
  CorrectionReport e = clutching_projection(1.2, 4, 32);
  const cplx local = even_local_index(e.element, SkewMatrix::zero(2), 1e-2);
  const long expected = std::lround(local.real());
  EXPECT_EQ(std::abs(expected), 1);
  TruncationSpec s = make_spec(2, 10, 2, rep, true);
  IndexOptions o;
  o.recheck = false;
  IndexReport r = numerical_index(even_compress(e.element, SkewMatrix::zero(2), s, rep), o);
  EXPECT_EQ(r.numerical_index, expected);
  EXPECT_EQ(r.numerical_index, 1);
  cplx pairing = chern_pairing_even(e.element, SkewMatrix::zero(2), make_spec(2, 7, 2, rep, true), rep);
  EXPECT_EQ(std::lround(pairing.real()), expected);
}

TEST(SpectralFlow, SingleEigenvalueCrossing) {
  MatC d0 = MatC::Zero(2, 2), d1 = MatC::Zero(2, 2);
  d0(0, 0) = -1.0;
  d0(1, 1) = 2.0;
  d1(0, 0) = 1.0;
  d1(1, 1) = 2.0;
  FlowReport up = spectral_flow(d0, d1, 4);
  EXPECT_EQ(up.flow, -1);
  EXPECT_EQ(up.crossings, 1);
  EXPECT_EQ(spectral_flow(d1, d0, 4).flow, 1);
  EXPECT_EQ(spectral_flow(d0, d0, 4).flow, 0);
}

TEST(SpectralFlow, RotatedPathCountsNetCrossings) {
  // eigenvalues -1 -> 1 and 1 -> -1 inside a rotating basis: net flow zero
  MatC d0(2, 2), d1(2, 2);
  d0 << -1.0, 0.3, 0.3, 1.0;
  d1 << 1.0, 0.3, 0.3, -1.0;
  EXPECT_EQ(spectral_flow(d0, d1, 8).flow, 0);
  EXPECT_THROW(spectral_flow(d0, MatC::Zero(3, 3), 8), std::invalid_argument);
  EXPECT_THROW(spectral_flow(d0, d1, 0), std::invalid_argument);
}

TEST(SpectralFlow, DiracConjugationByWinding) {
  CliffordRep rep = build_gammas(1);
  TruncationSpec s = make_spec(1, 16, 1, rep);
  for (int w : {-2, -1, 0, 1, 2}) {
    FlowReport f = dirac_conjugation_flow(winding_unitary(w), SkewMatrix::zero(1), s, rep, 16);
    EXPECT_EQ(f.flow, -w) << "w=" << w;
    EXPECT_NEAR(f.weighted, -w, 1e-6);
  }
}

TEST(DualTrace, HilbertSchmidtTraceOfWeightedElement) {
  std::mt19937_64 rng(12);
  CliffordRep rep = build_gammas(2);
  TruncationSpec s = make_spec(2, 5, 2, rep);
  auto h = [](const Mode& r) { return cplx(std::exp(-0.2 * (r[0] * r[0] + r[1] * r[1])), 0.1 * r[1]); };
  ModeElement a = random_element(2, 2, 1, rng);
  // tau-hat(x* x) = sum_{s, r+s in window} ||a_r||_F^2 |h(s)|^2
  double expect = 0.0;
  for (long q = 0; q < s.num_modes(); ++q) {
    const Mode sm = s.mode_at(q);
    for (const auto& kv : a.coeffs)
      if (s.index_of(mode_add(kv.first, sm)) >= 0) expect += kv.second.squaredNorm() * std::norm(h(sm));
  }
  const cplx got = hilbert_schmidt_trace(a, SkewMatrix::planar(2, 0.4), s, h);
  EXPECT_NEAR(got.real(), expect, 1e-12 * expect);
  EXPECT_NEAR(got.imag(), 0.0, 1e-12 * expect);
}

TEST(DualTrace, ZetaTraceIsProportionalToTrace) {
  std::mt19937_64 rng(13);
  for (int n : {1, 2, 3}) {
    CliffordRep rep = build_gammas(n);
    TruncationSpec s = make_spec(n, n == 3 ? 2 : 4, 2, rep);
    ModeElement a = random_element(n, 2, 1, rng);
    for (double sexp : {1.5, n + 1.0}) {
      const cplx z = zeta_trace(a, SkewMatrix::zero(n), s, rep, sexp);
      const cplx p = zeta_trace_prediction(a, s, sexp);
      EXPECT_LT(std::abs(z - p), 1e-12 * std::abs(p)) << "n=" << n;
    }
  }
}

TEST(DualTrace, InteriorTraceRestrictsDiagonal) {
  MatC t = MatC::Identity(4, 4);
  t(3, 3) = 5.0;
  EXPECT_EQ(dual_trace(t), cplx(8.0, 0.0));
  EXPECT_EQ(dual_trace_interior(t, {0, 1, 2, 3}, 2), cplx(3.0, 0.0));
}

TEST(Bott, SeparableOscillatorHasIndexOne) {
  for (int n : {1, 2}) {
    BottReport b = bott_normalization(n, GridSpec{n, 8.0, 128});
    EXPECT_EQ(b.index.numerical_index, 1) << "n=" << n;
    EXPECT_EQ(b.index.kernel_dim, 1);
    EXPECT_EQ(b.index.cokernel_dim, 0);
    EXPECT_GE(b.gaussian_overlap, 0.999);
    EXPECT_TRUE(b.index.reliable);
    EXPECT_NEAR(b.lowest_nonzero, 2.0, 1e-3);
  }
  EXPECT_THROW(bott_normalization(2, GridSpec{1, 8.0, 64}), std::invalid_argument);
}

TEST(Bott, DenseOperatorAgreesWithSeparablePath) {
  BottReport b = bott_normalization_dense(GridSpec{1, 8.0, 128});
  EXPECT_EQ(b.index.numerical_index, 1);
  EXPECT_GE(b.gaussian_overlap, 0.999);
  EXPECT_LT(b.clifford_residual, 1e-9);
}
