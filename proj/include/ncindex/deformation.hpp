#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncindex/linalg.hpp"
#include "ncindex/mode_algebra.hpp"
#include "ncindex/moyal_continuum.hpp"

namespace ncindex {

// Coefficients on the box [-W, W]^n stored densely, row-major m x m blocks per mode
// (first axis slowest). Used for iterations where the map representation is too slow.
struct BoxElement {
  int n = 1, m = 1, W = 0;
  std::vector<cplx> data;

  BoxElement() = default;
  BoxElement(int n_, int m_, int W_) : n(n_), m(m_), W(W_) {
    data.assign(static_cast<size_t>(modes()) * m * m, 0.0);
  }
  long side() const { return 2L * W + 1; }
  long modes() const {
    long s = 1;
    for (int i = 0; i < n; ++i) s *= side();
    return s;
  }
  long index(const Mode& r) const {
    long q = 0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(r[i]) > W) return -1;
      q = q * side() + (r[i] + W);
    }
    return q;
  }
  Mode mode(long q) const {
    Mode r(n);
    for (int i = n - 1; i >= 0; --i) {
      r[i] = static_cast<int>(q % side()) - W;
      q /= side();
    }
    return r;
  }
  cplx* block(long q) { return data.data() + q * m * m; }
  const cplx* block(long q) const { return data.data() + q * m * m; }

  BoxElement& operator+=(const BoxElement& b) {
    for (size_t i = 0; i < data.size(); ++i) data[i] += b.data[i];
    return *this;
  }
  BoxElement& operator*=(cplx s) {
    for (auto& v : data) v *= s;
    return *this;
  }
};

inline BoxElement to_box(const ModeElement& a, int W) {
  if (a.support_radius() > W) throw std::domain_error("to_box: support exceeds box");
  BoxElement b(a.n, a.m, W);
  for (const auto& kv : a.coeffs) {
    cplx* p = b.block(b.index(kv.first));
    for (int i = 0; i < a.m; ++i)
      for (int j = 0; j < a.m; ++j) p[i * a.m + j] = kv.second(i, j);
  }
  if (a.scalar_unit != 0.0) {
    cplx* p = b.block(b.index(Mode(a.n, 0)));
    for (int i = 0; i < a.m; ++i) p[i * a.m + i] += a.scalar_unit;
  }
  return b;
}

inline ModeElement from_box(const BoxElement& b, double drop = 0.0) {
  ModeElement a(b.n, b.m);
  for (long q = 0; q < b.modes(); ++q) {
    const cplx* p = b.block(q);
    double mx = 0.0;
    for (int i = 0; i < b.m * b.m; ++i) mx = std::max(mx, std::abs(p[i]));
    if (mx <= drop || mx == 0.0) continue;
    MatC c(b.m, b.m);
    for (int i = 0; i < b.m; ++i)
      for (int j = 0; j < b.m; ++j) c(i, j) = p[i * b.m + j];
    a.coeffs.emplace(b.mode(q), std::move(c));
  }
  return a;
}

// Product on the box of radius out_radius (default: the radius of a).
inline BoxElement box_star(const BoxElement& a, const BoxElement& b, const SkewMatrix& theta, int out_radius = -1) {
  if (a.n != b.n || a.m != b.m) throw std::invalid_argument("box_star: shape mismatch");
  const int n = a.n, m = a.m, Wb = b.W;
  const int Wc = out_radius >= 0 ? out_radius : a.W;
  BoxElement c(n, m, Wc);
  const long side_b = b.side(), side_c = c.side(), nm = a.modes();
  const bool deformed = theta.n() != 0 && !theta.is_zero();
  const MatR th = deformed ? theta.matrix() : MatR();
  std::vector<cplx> axis_phase(static_cast<size_t>(n * side_c));
  std::vector<long> stride_b(n, 1), stride_c(n, 1);
  for (int i = n - 2; i >= 0; --i) {
    stride_b[i] = stride_b[i + 1] * side_b;
    stride_c[i] = stride_c[i + 1] * side_c;
  }
  std::vector<int> lo(n), hi(n), t(n);
  for (long q = 0; q < nm; ++q) {
    const cplx* ar = a.block(q);
    bool nonzero = false;
    for (int i = 0; i < m * m && !nonzero; ++i) nonzero = ar[i] != 0.0;
    if (!nonzero) continue;
    const Mode r = a.mode(q);
    bool empty = false;
    for (int k = 0; k < n; ++k) {
      lo[k] = std::max(-Wc, r[k] - Wb);
      hi[k] = std::min(Wc, r[k] + Wb);
      empty = empty || lo[k] > hi[k];
      t[k] = lo[k];
    }
    if (empty) continue;
    // phase <r, Theta t> = sum_k (Theta^T r)_k t_k
    if (deformed)
      for (int k = 0; k < n; ++k) {
        double v = 0.0;
        for (int j = 0; j < n; ++j) v += r[j] * th(j, k);
        for (long x = 0; x < side_c; ++x) axis_phase[k * side_c + x] = std::polar(1.0, 2.0 * kPi * v * static_cast<double>(x - Wc));
      }
    while (true) {
      long tq = 0, sq = 0;
      cplx ph = 1.0;
      for (int k = 0; k < n; ++k) {
        tq += (t[k] + Wc) * stride_c[k];
        sq += (t[k] - r[k] + Wb) * stride_b[k];
        if (deformed) ph *= axis_phase[k * side_c + (t[k] + Wc)];
      }
      const cplx* bs = b.block(sq);
      cplx* ct = c.block(tq);
      for (int i = 0; i < m; ++i)
        for (int l = 0; l < m; ++l) {
          const cplx x = ph * ar[i * m + l];
          if (x == 0.0) continue;
          for (int j = 0; j < m; ++j) ct[i * m + j] += x * bs[l * m + j];
        }
      int k = n - 1;
      while (k >= 0 && t[k] == hi[k]) {
        t[k] = lo[k];
        --k;
      }
      if (k < 0) break;
      ++t[k];
    }
  }
  return c;
}

// Restriction (or zero extension) to the box of radius W.
inline BoxElement box_resize(const BoxElement& a, int W) {
  BoxElement b(a.n, a.m, W);
  for (long q = 0; q < b.modes(); ++q) {
    const long src = a.index(b.mode(q));
    if (src < 0) continue;
    std::copy(a.block(src), a.block(src) + a.m * a.m, b.block(q));
  }
  return b;
}

inline BoxElement box_adjoint(const BoxElement& a) {
  BoxElement b(a.n, a.m, a.W);
  const long nm = a.modes();
  for (long q = 0; q < nm; ++q) {
    const cplx* p = a.block(nm - 1 - q);  // mode -r sits at the mirrored index
    cplx* d = b.block(q);
    for (int i = 0; i < a.m; ++i)
      for (int j = 0; j < a.m; ++j) d[i * a.m + j] = std::conj(p[j * a.m + i]);
  }
  return b;
}

// sum over modes of the Frobenius norm of the coefficient
inline double box_norm(const BoxElement& a) {
  double s = 0.0;
  for (long q = 0; q < a.modes(); ++q) {
    double f = 0.0;
    const cplx* p = a.block(q);
    for (int i = 0; i < a.m * a.m; ++i) f += std::norm(p[i]);
    s += std::sqrt(f);
  }
  return s;
}

// same norm restricted to the outermost shell ||r||_inf = W
inline double box_tail(const BoxElement& a) {
  double s = 0.0;
  for (long q = 0; q < a.modes(); ++q) {
    if (linf(a.mode(q)) < a.W) continue;
    double f = 0.0;
    const cplx* p = a.block(q);
    for (int i = 0; i < a.m * a.m; ++i) f += std::norm(p[i]);
    s += std::sqrt(f);
  }
  return s;
}

inline BoxElement box_identity(int n, int m, int W) {
  BoxElement b(n, m, W);
  cplx* p = b.block(b.index(Mode(n, 0)));
  for (int i = 0; i < m; ++i) p[i * m + i] = 1.0;
  return b;
}

struct CorrectionReport {
  ModeElement element;
  double residual = 0.0;  // coefficient norm of e x e - e, or of v* x v - 1
  double tail = 0.0;      // coefficient norm on the outermost shell of the window
  int iterations = 0;
  bool converged = false;
};

struct CorrectionOptions {
  int radius = 16;  // support window
  double tol = 1e-10;
  int max_iter = 60;
};

// Cubic smoothing e <- 3 e^2 - 2 e^3 in the deformed algebra, truncated to the window
// after each step; the residual is that of the untruncated square.
inline CorrectionReport purify_projection(const ModeElement& a, const SkewMatrix& theta, const CorrectionOptions& opt = {}) {
  const int W = opt.radius;
  BoxElement e = to_box(a, W);
  e += box_adjoint(e);
  e *= 0.5;
  CorrectionReport rep;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    BoxElement e2 = box_star(e, e, theta, 2 * W);
    BoxElement diff = box_resize(e, 2 * W);
    diff *= -1.0;
    diff += e2;
    rep.residual = box_norm(diff);
    rep.iterations = it;
    if (rep.residual < opt.tol) {
      rep.converged = true;
      break;
    }
    if (it >= opt.max_iter) break;
    if (rep.residual > 1e3 || rep.residual > 1e6 * last) throw std::domain_error("purify_projection: iteration diverged (no spectral gap at 1/2)");
    last = rep.residual;
    BoxElement e3 = box_star(e2, e, theta, W);
    e = box_resize(e2, W);
    e *= 3.0;
    e3 *= -2.0;
    e += e3;
    BoxElement ea = box_adjoint(e);
    e += ea;
    e *= 0.5;
  }
  rep.tail = box_tail(e);
  rep.element = from_box(e);
  return rep;
}

inline ModeElement deform_projection(const ModeElement& a, const SkewMatrix& theta, const CorrectionOptions& opt = {}) {
  CorrectionReport r = purify_projection(a, theta, opt);
  if (!r.converged)
    throw std::domain_error("deform_projection: residual " + std::to_string(r.residual) + " above tolerance");
  return r.element;
}

// Follows the projection along s * Theta, s from 0 to 1, re-purifying at each step to a
// loose tolerance; the step halves on failure and grows after quick convergence. The end
// point is purified to opt.tol. `steps` sets the initial step 1/steps.
inline CorrectionReport continue_projection(const ModeElement& e, const SkewMatrix& theta, int steps,
                                            const CorrectionOptions& opt = {}, int* taken = nullptr) {
  if (steps < 1) throw std::invalid_argument("continue_projection: steps must be positive");
  const CorrectionOptions loose{opt.radius, std::max(opt.tol, 1e-6), 10};
  CorrectionReport rep = purify_projection(e, SkewMatrix::zero(e.n), loose);
  double s = 0.0, h = 1.0 / steps;
  int count = 0;
  while (s < 1.0 && !theta.is_zero()) {
    const double next = std::min(1.0, s + h);
    SkewMatrix t = theta;
    t.scale(next);
    bool ok = false;
    CorrectionReport trial;
    try {
      trial = purify_projection(rep.element, t, loose);
      ok = trial.converged;
    } catch (const std::domain_error&) {
    }
    if (!ok) {
      h *= 0.5;
      if (h < 1e-4) throw std::domain_error("continue_projection: step size underflow");
      continue;
    }
    rep = trial;
    s = next;
    ++count;
    if (trial.iterations <= 5) h *= 1.5;
  }
  if (taken) *taken = count;
  return purify_projection(rep.element, theta, opt);
}

// U_r -> (-1)^{r_j r_k} U_r: a *-isomorphism from the Theta-algebra onto the one with
// Theta_jk shifted by 1/2, commuting with the trace and the derivations.
inline ModeElement parity_twist(const ModeElement& a, int j, int k) {
  ModeElement b = a;
  for (auto& kv : b.coeffs)
    if ((kv.first[j] * kv.first[k]) % 2 != 0) kv.second = -kv.second;
  return b;
}

// a (+) 1_extra
inline ModeElement direct_sum_unit(const ModeElement& a, int extra) {
  ModeElement b(a.n, a.m + extra);
  b.scalar_unit = 0.0;
  for (const auto& kv : a.coeffs) {
    MatC c = MatC::Zero(b.m, b.m);
    c.topLeftCorner(a.m, a.m) = kv.second;
    b.coeffs.emplace(kv.first, c);
  }
  MatC c0 = b.coeff(Mode(a.n, 0));
  if (a.scalar_unit != 0.0) c0.topLeftCorner(a.m, a.m) += a.scalar_unit * MatC::Identity(a.m, a.m);
  c0.bottomRightCorner(extra, extra) += MatC::Identity(extra, extra);
  b.coeffs[Mode(a.n, 0)] = c0;
  return b;
}

struct ClassDeformation {
  CorrectionReport report;
  double base_theta = 0.0;  // theta_0 reached by continuation
  int half_turns = 0;       // k in theta = theta_0 + k/2
  int units = 0;            // unit blocks appended
  int steps = 0;
};

// Planar n = 2: the image of [e] in K_0 of the Theta-algebra has trace rank + 2 theta c
// (c the Chern number). The continuation runs only to theta_0 = theta - k/2 with |theta_0| <= 1/4,
// where the spectral gap stays open; the parity twist carries the result to theta and
// k c unit blocks restore the trace. Other dimensions use plain continuation.
inline ClassDeformation deform_projection_class(const ModeElement& e, const SkewMatrix& theta, int chern,
                                                const CorrectionOptions& opt = {}, int steps = 4) {
  ClassDeformation out;
  if (theta.n() == 0 || theta.is_zero()) {
    out.report = purify_projection(e, SkewMatrix::zero(e.n), opt);
    return out;
  }
  if (e.n != 2) {
    out.report = continue_projection(e, theta, steps, opt, &out.steps);
    out.base_theta = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  const double th = theta(0, 1);
  out.half_turns = static_cast<int>(std::lround(2.0 * th));
  out.base_theta = th - 0.5 * out.half_turns;
  out.units = out.half_turns * chern;
  if (out.units < 0) throw std::domain_error("deform_projection_class: deformed class has no projection representative of this size");
  SkewMatrix base = SkewMatrix::planar(2, out.base_theta);
  out.report = std::abs(out.base_theta) > 0.0 ? continue_projection(e, base, steps, opt, &out.steps)
                                              : purify_projection(e, base, opt);
  ModeElement p = out.report.element;
  if (out.half_turns % 2 != 0) p = parity_twist(p, 0, 1);
  if (out.units > 0) p = direct_sum_unit(p, out.units);
  out.report.element = p;
  return out;
}

// Polar correction by Newton-Schulz, v <- v (3 - v* v) / 2, truncated to the window after
// each step; the residual is that of the untruncated v* v - 1.
inline CorrectionReport purify_unitary(const ModeElement& u, const SkewMatrix& theta, const CorrectionOptions& opt = {}) {
  const int W = opt.radius;
  BoxElement v = to_box(u, W);
  const BoxElement one = box_identity(u.n, u.m, 2 * W);
  CorrectionReport rep;
  double last = std::numeric_limits<double>::infinity();
  for (int it = 0;; ++it) {
    BoxElement g = box_star(box_adjoint(v), v, theta, 2 * W);
    BoxElement diff = one;
    diff *= -1.0;
    diff += g;
    rep.residual = box_norm(diff);
    rep.iterations = it;
    if (rep.residual < opt.tol) {
      rep.converged = true;
      break;
    }
    if (it >= opt.max_iter) break;
    if (rep.residual > 1e3 || rep.residual > 1e6 * last) throw std::domain_error("purify_unitary: iteration diverged");
    last = rep.residual;
    g *= -1.0;
    BoxElement h = one;
    h *= 3.0;
    h += g;
    v = box_star(v, h, theta, W);
    v *= 0.5;
  }
  rep.tail = box_tail(v);
  rep.element = from_box(v);
  return rep;
}

inline ModeElement deform_unitary(const ModeElement& u, const SkewMatrix& theta, const CorrectionOptions& opt = {}) {
  CorrectionReport r = purify_unitary(u, theta, opt);
  if (!r.converged) {
    std::ostringstream os;
    os << "deform_unitary: residual " << std::scientific << r.residual << " above tolerance";
    throw std::domain_error(os.str());
  }
  return r.element;
}

// Extended trace of a mode element: the trace of its symbol.
inline cplx deformed_trace(const ModeElement& a) { return trace(a); }

// Mode-coefficient functions on a grid over R^n: f(t) = sum_r U_r f_r(t).
using SampledMap = std::map<Mode, GridSamples>;

// f^Theta(t) = int alpha_{Theta s}(fhat(s)) e^{2 pi i t.s} ds: coefficient r picks up
// e^{2 pi i <r, Theta s>} at frequency s, applied on the grid spectrum.
inline SampledMap neshveyev_transform(const GridSpec& g, const SampledMap& f, const SkewMatrix& theta,
                                      double alias_tol = 1e-10) {
  g.validate();
  if (!theta.is_zero() && theta.n() != g.n) throw std::invalid_argument("neshveyev_transform: Theta dimension mismatch");
  SampledMap out;
  const long total = g.total();
  const MatR th = theta.is_zero() ? MatR::Zero(g.n, g.n) : theta.matrix();
  for (const auto& kv : f) {
    if (kv.second.size() != total) throw std::invalid_argument("neshveyev_transform: sample count mismatch");
    VecC c = grid_coefficients(g, kv.second);
    double edge = 0.0, peak = 0.0;
    for (long q = 0; q < total; ++q) {
      const std::vector<int> k = g.unflatten(q);
      double phase = 0.0;
      bool at_nyquist = false;
      for (int a = 0; a < g.n; ++a) {
        double v = 0.0;
        for (int b = 0; b < g.n; ++b) v += kv.first[b] * th(b, a);
        phase += v * g.freq(k[a]);
        at_nyquist = at_nyquist || k[a] == g.points / 2;
      }
      peak = std::max(peak, std::abs(c(q)));
      if (at_nyquist) edge = std::max(edge, std::abs(c(q)));
      c(q) *= std::polar(1.0, 2.0 * kPi * phase);
    }
    if (edge > alias_tol * std::max(peak, 1e-300)) throw std::domain_error("neshveyev_transform: spectrum reaches the Nyquist band");
    out.emplace(kv.first, grid_synthesize(g, c));
  }
  return out;
}

}  // namespace ncindex
