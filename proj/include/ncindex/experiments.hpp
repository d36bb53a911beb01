#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ncindex/deformation.hpp"
#include "ncindex/index_engine.hpp"
#include "ncindex/local_formula.hpp"

namespace ncindex {

// ||e x e - e|| on the full product support (coefficient 2-norm).
inline double projection_residual(const ModeElement& e, const SkewMatrix& theta) {
  const int W = std::max(1, e.support_radius());
  BoxElement b = to_box(e, W);
  BoxElement d = box_star(b, b, theta, 2 * W);
  BoxElement neg = box_resize(b, 2 * W);
  neg *= -1.0;
  d += neg;
  return box_norm(d);
}

struct DeformedEntry {
  double theta = 0.0;
  IndexReport report;
  double residual = 0.0;
  double trace = 0.0;
  double base_theta = 0.0;
  int units = 0;
};

struct DeformedSweep {
  std::vector<DeformedEntry> entries;
  bool invariant = false;
};

struct SweepOptions {
  int window = 32;        // support window of the corrected projection
  double tol = 1e-10;     // purification target
  int index_radius = 12;  // support kept for the compression
  int cutoff = 16;
  bool chern = false;     // dense Chern pairing (expensive)
  int chern_cutoff = 8;
};

// Even-dimensional (planar) sweep: correct e to a projection of each Theta-algebra, then compute
// the index of its even compression in pi^Theta, the deformed local formula and optionally
// the Chern pairing. Invariant when every integer output agrees across the sweep.
inline DeformedSweep deformed_index_experiment(const ModeElement& e, const std::vector<double>& thetas,
                                               const SweepOptions& opt = {}) {
  if (e.n != 2) throw std::invalid_argument("deformed_index_experiment: planar sweep requires n = 2");
  const CliffordRep rep = build_gammas(2);
  const long chern = std::lround(even_local_index(e, SkewMatrix::zero(2), 1e-2).real());
  DeformedSweep out;
  std::optional<long> ref;
  out.invariant = true;
  for (double th : thetas) {
    const auto t0 = std::chrono::steady_clock::now();
    const SkewMatrix theta = SkewMatrix::planar(2, th);
    ClassDeformation cd = deform_projection_class(e, theta, static_cast<int>(chern), {opt.window, opt.tol, 60});
    DeformedEntry entry;
    entry.theta = th;
    entry.base_theta = cd.base_theta;
    entry.units = cd.units;
    const ModeElement& p = cd.report.element;
    entry.residual = projection_residual(p, theta);
    entry.trace = trace(p).real();
    const ModeElement pt = truncate(p, opt.index_radius);
    const CliffordRep& r = rep;
    auto build = [&](int M) { return even_compress(pt, theta, make_spec(2, M, pt.m, r, true), r); };
    IndexOptions io;
    io.recheck = false;
    entry.report = numerical_index(build, opt.cutoff, io);
    entry.report.label = "deformed-even";
    entry.report.local_value = deformed_local_index(p, theta, Parity::even, 1e-2);
    if (opt.chern)
      entry.report.tau_index = chern_pairing_even(pt, theta, make_spec(2, opt.chern_cutoff, pt.m, rep, true), rep).real();
    entry.report.reliable = entry.report.reliable && entry.residual < opt.tol;
    entry.report.runtime_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
    const long idx = entry.report.numerical_index;
    if (!ref) ref = idx;
    out.invariant = out.invariant && idx == *ref && std::lround(entry.report.local_value.real()) == *ref;
    out.entries.push_back(std::move(entry));
  }
  return out;
}

struct HallDisplay {
  double theta = 0.0;
  cplx trace_form;           // constant_odd(n) * sum_eps (-1)^eps tau(prod_k u* x delta_eps(k)(u))
  cplx literal_trace_form;   // same chain with the displayed lambda_n
  cplx product_form;         // lambda_n * sum_eps (-1)^eps prod_k tau(u* x delta_eps(k)(u))
  double residual = 0.0;     // unitarity residual of u in the Theta-algebra
  bool converged = true;     // polar correction reached its tolerance (or was not run)
  std::optional<long> flow;  // numerical spectral flow (when a cutoff is given)
};

namespace detail {

inline cplx product_of_traces(const ModeElement& u, const SkewMatrix& theta) {
  const ModeElement us = adjoint(u);
  std::vector<cplx> f;
  for (int k = 1; k <= u.n; ++k) f.push_back(trace(star_multiply(us, derivation(u, k), theta)));
  std::vector<int> perm(u.n);
  std::iota(perm.begin(), perm.end(), 0);
  cplx total = 0.0;
  do {
    cplx p = 1.0;
    for (int k : perm) p *= f[k];
    total += static_cast<double>(permutation_sign(perm)) * p;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

}  // namespace detail

// Spectral-flow displays for a unitary, with u first corrected to a Theta-unitary when
// Theta is nonzero and correct is set. X_k = 2 pi D_k, so i[X_k, u] is the derivation delta_k(u).
inline HallDisplay hall_flow_display(const ModeElement& u, const SkewMatrix& theta, double theta_value = 0.0,
                                     int window = 8, int cutoff = 0, double tol = 1e-3, bool correct = true) {
  if (u.n % 2 == 0) throw std::domain_error("hall_flow_display: n must be odd");
  HallDisplay out;
  out.theta = theta_value;
  ModeElement v = u;
  if (correct && !theta.is_zero()) {
    CorrectionReport r = purify_unitary(u, theta, {window, 1e-10, 60});
    v = r.element;
    out.converged = r.converged;
  }
  out.residual = unitarity_defect(v, theta);
  const cplx chain = antisym_odd_chain(v, theta, tol);
  out.trace_form = constant_odd(u.n) * chain;
  out.literal_trace_form = literal_constant_odd(u.n) * chain;
  out.product_form = literal_constant_odd(u.n) * detail::product_of_traces(v, theta);
  if (cutoff > 0) {
    const CliffordRep rep = build_gammas(u.n);
    out.flow = dirac_conjugation_flow(v, theta, make_spec(u.n, cutoff, u.m, rep), rep, 16).flow;
  }
  return out;
}

}  // namespace ncindex
