#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "ncindex/linalg.hpp"
#include "ncindex/mode_algebra.hpp"

namespace ncindex {

// Uniform periodic grid on [-L, L)^n with `points` samples per axis.
struct GridSpec {
  int n = 1;
  double L = 8.0;
  int points = 256;

  double spacing() const { return 2.0 * L / points; }
  long total() const {
    long t = 1;
    for (int k = 0; k < n; ++k) t *= points;
    return t;
  }
  double coord(int j) const { return -L + j * spacing(); }
  // signed physical frequency of DFT index k (cycles per unit length)
  double freq(int k) const { return (k < (points + 1) / 2 ? k : k - points) / (2.0 * L); }
  double nyquist() const { return points / (4.0 * L); }

  void validate() const {
    if (n < 1 || n > 3) throw std::invalid_argument("GridSpec: n must be 1, 2 or 3");
    if (points < 2 || (points & (points - 1)) != 0) throw std::invalid_argument("GridSpec: points must be a power of two");
    if (!(L > 0.0)) throw std::invalid_argument("GridSpec: half-width must be positive");
  }

  // multi-index (row-major, first axis slowest)
  std::vector<int> unflatten(long idx) const {
    std::vector<int> j(n);
    for (int k = n - 1; k >= 0; --k) {
      j[k] = static_cast<int>(idx % points);
      idx /= points;
    }
    return j;
  }
};

using GridSamples = VecC;

inline GridSamples sample(const GridSpec& g, const std::function<cplx(const std::vector<double>&)>& f) {
  g.validate();
  GridSamples v(g.total());
  std::vector<double> t(g.n);
  for (long i = 0; i < g.total(); ++i) {
    auto j = g.unflatten(i);
    for (int k = 0; k < g.n; ++k) t[k] = g.coord(j[k]);
    v(i) = f(t);
  }
  return v;
}

namespace detail {

// In-place DFT along every axis of a row-major n-dimensional array.
inline void fft_nd(const GridSpec& g, VecC& data, bool inverse) {
  Eigen::FFT<double> fft;
  const int P = g.points;
  std::vector<cplx> in(P), out(P);
  long stride = 1;
  for (int axis = g.n - 1; axis >= 0; --axis) {
    const long block = stride * P;
    for (long base = 0; base < g.total(); base += block)
      for (long off = 0; off < stride; ++off) {
        for (int j = 0; j < P; ++j) in[j] = data(base + off + j * stride);
        if (inverse)
          fft.inv(out, in);
        else
          fft.fwd(out, in);
        for (int j = 0; j < P; ++j) data(base + off + j * stride) = out[j];
      }
    stride *= P;
  }
}

}  // namespace detail

// Coefficients c_k with f(t) = sum_k c_k exp(2 pi i p_k . (t + L)).
inline VecC grid_coefficients(const GridSpec& g, const GridSamples& f) {
  VecC c = f;
  detail::fft_nd(g, c, false);
  c /= static_cast<double>(g.total());
  return c;
}

inline GridSamples grid_synthesize(const GridSpec& g, const VecC& c) {
  VecC f = c * static_cast<double>(g.total());
  detail::fft_nd(g, f, true);
  return f;
}

inline double boundary_max(const GridSpec& g, const GridSamples& f) {
  double worst = 0.0;
  for (long i = 0; i < g.total(); ++i) {
    auto j = g.unflatten(i);
    for (int k = 0; k < g.n; ++k)
      if (j[k] == 0 || j[k] == g.points - 1) worst = std::max(worst, std::abs(f(i)));
  }
  return worst;
}

// Twisted convolution of Fourier coefficients with sigma_Theta on physical frequencies.
inline GridSamples moyal_multiply(const GridSpec& g, const GridSamples& f, const GridSamples& h, const SkewMatrix& theta,
                                  double decay_tol = 1e-12) {
  g.validate();
  if (f.size() != g.total() || h.size() != g.total()) throw std::invalid_argument("moyal_multiply: grid mismatch");
  if (boundary_max(g, f) > decay_tol || boundary_max(g, h) > decay_tol)
    throw std::domain_error("moyal_multiply: inputs do not decay at the grid boundary");
  if (theta.n() == 0 || theta.is_zero()) return f.cwiseProduct(h);
  VecC cf = grid_coefficients(g, f), ch = grid_coefficients(g, h);
  const long T = g.total();
  std::vector<std::vector<int>> idx(static_cast<size_t>(T));
  std::vector<std::vector<double>> fr(static_cast<size_t>(T), std::vector<double>(g.n));
  for (long i = 0; i < T; ++i) {
    idx[i] = g.unflatten(i);
    for (int k = 0; k < g.n; ++k) fr[i][k] = g.freq(idx[i][k]);
  }
  MatR th = theta.matrix();
  std::vector<std::vector<double>> th_q(static_cast<size_t>(T), std::vector<double>(g.n, 0.0));
  for (long i = 0; i < T; ++i)
    for (int a = 0; a < g.n; ++a)
      for (int b = 0; b < g.n; ++b) th_q[i][a] += th(a, b) * fr[i][b];
  VecC out = VecC::Zero(T);
  for (long p = 0; p < T; ++p) {
    if (cf(p) == 0.0) continue;
    for (long q = 0; q < T; ++q) {
      double ph = 0.0;
      for (int a = 0; a < g.n; ++a) ph += fr[p][a] * th_q[q][a];
      long t = 0;
      for (int a = 0; a < g.n; ++a) t = t * g.points + (idx[p][a] + idx[q][a]) % g.points;
      out(t) += cf(p) * ch(q) * std::polar(1.0, 2.0 * kPi * ph);
    }
  }
  return grid_synthesize(g, out);
}

// Dense unitary DFT matrix F (position -> momentum), F_{kj} = exp(-2 pi i k j / P) / sqrt(P), tensored over axes.
inline MatC dft_matrix(const GridSpec& g) {
  const int P = g.points;
  MatC f1(P, P);
  for (int k = 0; k < P; ++k)
    for (int j = 0; j < P; ++j) f1(k, j) = std::polar(1.0 / std::sqrt(static_cast<double>(P)), -2.0 * kPi * k * j / P);
  MatC f = f1;
  for (int k = 1; k < g.n; ++k) f = kron(f, f1);
  return f;
}

struct GridOperators {
  std::vector<MatC> X;
  std::vector<MatC> D;
};

// X_k multiplication by t_k; D_k = -i d/dt_k by spectral differentiation, so [X_j, D_k] = i delta_jk on smooth vectors.
inline MatC axis_position(const GridSpec& g) {
  MatC x = MatC::Zero(g.points, g.points);
  for (int j = 0; j < g.points; ++j) x(j, j) = g.coord(j);
  return x;
}

inline MatC axis_momentum(const GridSpec& g) {
  GridSpec g1{1, g.L, g.points};
  MatC f = dft_matrix(g1);
  VecC k(g.points);
  for (int j = 0; j < g.points; ++j) k(j) = 2.0 * kPi * g.freq(j);
  return f.adjoint() * k.asDiagonal() * f;
}

inline GridOperators grid_operators(const GridSpec& g) {
  g.validate();
  GridOperators ops;
  const MatC x1 = axis_position(g), d1 = axis_momentum(g);
  for (int axis = 0; axis < g.n; ++axis) {
    MatC x = MatC::Identity(1, 1), d = MatC::Identity(1, 1);
    for (int k = 0; k < g.n; ++k) {
      const MatC id = MatC::Identity(g.points, g.points);
      x = kron(x, k == axis ? x1 : id);
      d = kron(d, k == axis ? d1 : id);
    }
    ops.X.push_back(x);
    ops.D.push_back(d);
  }
  return ops;
}

// Warped convolution of the multiplication operator by f, assembled in the momentum
// basis (<p|M_f|q> = c_{p-q}, twisted by exp(2 pi i <p, Theta q>)) and returned in the position basis.
inline MatC warp_multiplication_operator(const GridSpec& g, const GridSamples& f, const SkewMatrix& theta) {
  g.validate();
  if ((g.n == 1 && g.points > 128) || (g.n >= 2 && g.points > 32))
    throw std::domain_error("warp_multiplication_operator: grid too large for a dense operator");
  const long T = g.total();
  VecC c = grid_coefficients(g, f);
  std::vector<std::vector<int>> idx(static_cast<size_t>(T));
  for (long i = 0; i < T; ++i) idx[i] = g.unflatten(i);
  // Momentum basis vectors exp(2 pi i p (t + L)) / sqrt(T) diagonalize the grid shift, matching the DFT.
  MatC mom(T, T);
  for (long p = 0; p < T; ++p)
    for (long q = 0; q < T; ++q) {
      long d = 0;
      std::vector<double> fp(g.n), fq(g.n);
      for (int a = 0; a < g.n; ++a) {
        d = d * g.points + ((idx[p][a] - idx[q][a]) % g.points + g.points) % g.points;
        fp[a] = g.freq(idx[p][a]);
        fq[a] = g.freq(idx[q][a]);
      }
      mom(p, q) = c(d);
      if (theta.n() != 0 && !theta.is_zero()) {
        double ph = 0.0;
        for (int a = 0; a < g.n; ++a)
          for (int b = 0; b < g.n; ++b) ph += fp[a] * theta(a, b) * fq[b];
        mom(p, q) *= std::polar(1.0, 2.0 * kPi * ph);
      }
    }
  MatC F = dft_matrix(g);
  return F.adjoint() * mom * F;
}

struct OracleOptions {
  double half_width = 6.0;  // quadrature box [-W, W]^n for both z and s
  int nodes = 96;           // trapezoid nodes per axis
  double eps0 = 1e-2;       // Gaussian regularization, extrapolated over eps0, eps0/2, eps0/4
};

struct OracleValue {
  cplx value;
  cplx spread;  // difference between the two highest Richardson levels
};

// Direct quadrature of  int int f(t - Theta z) g(t + s) exp(2 pi i z.s) dz ds  (regularized by
// exp(-eps(|z|^2+|s|^2)), eps -> 0 by Richardson). The -Theta argument makes plane waves
// multiply with sigma_Theta(p, q) = exp(2 pi i <p, Theta q>).
inline std::vector<OracleValue> oracle_multiply(const std::function<cplx(const std::vector<double>&)>& f,
                                                const std::function<cplx(const std::vector<double>&)>& g, int n,
                                                const SkewMatrix& theta, const std::vector<std::vector<double>>& points,
                                                const OracleOptions& opt = {}) {
  if (n < 1 || n > 2) throw std::invalid_argument("oracle_multiply: n must be 1 or 2");
  const int Q = opt.nodes;
  const double h = 2.0 * opt.half_width / Q;
  std::vector<double> nodes(Q);
  for (int j = 0; j < Q; ++j) nodes[j] = -opt.half_width + (j + 0.5) * h;
  MatC E(Q, Q);  // E(z, s) = exp(2 pi i z s)
  for (int a = 0; a < Q; ++a)
    for (int b = 0; b < Q; ++b) E(a, b) = std::polar(1.0, 2.0 * kPi * nodes[a] * nodes[b]);
  MatR th = theta.n() ? theta.matrix() : MatR::Zero(n, n);

  auto evaluate = [&](const std::vector<double>& t, double eps) -> cplx {
    std::vector<double> damp(Q);
    for (int j = 0; j < Q; ++j) damp[j] = std::exp(-eps * nodes[j] * nodes[j]);
    if (n == 1) {
      VecC gs(Q);
      for (int b = 0; b < Q; ++b) gs(b) = g({t[0] + nodes[b]}) * damp[b];
      VecC inner = E * gs * h;  // G(z)
      cplx acc = 0.0;
      for (int a = 0; a < Q; ++a) acc += f({t[0] - th(0, 0) * nodes[a]}) * inner(a) * damp[a];
      return acc * h;
    }
    MatC gs(Q, Q);
    for (int b1 = 0; b1 < Q; ++b1)
      for (int b2 = 0; b2 < Q; ++b2) gs(b1, b2) = g({t[0] + nodes[b1], t[1] + nodes[b2]}) * damp[b1] * damp[b2];
    MatC inner = E * gs * E.transpose() * (h * h);  // G(z1, z2)
    cplx acc = 0.0;
    for (int a1 = 0; a1 < Q; ++a1)
      for (int a2 = 0; a2 < Q; ++a2) {
        const double z1 = nodes[a1], z2 = nodes[a2];
        acc += f({t[0] - (th(0, 0) * z1 + th(0, 1) * z2), t[1] - (th(1, 0) * z1 + th(1, 1) * z2)}) * inner(a1, a2) *
               damp[a1] * damp[a2];
      }
    return acc * (h * h);
  };

  std::vector<OracleValue> out;
  for (const auto& t : points) {
    if (static_cast<int>(t.size()) != n) throw std::invalid_argument("oracle_multiply: point dimension mismatch");
    const cplx a1 = evaluate(t, opt.eps0), a2 = evaluate(t, opt.eps0 / 2), a4 = evaluate(t, opt.eps0 / 4);
    const cplx r12 = 2.0 * a2 - a1, r24 = 2.0 * a4 - a2;
    const cplx r = (4.0 * r24 - r12) / 3.0;
    out.push_back({r, r - r24});
  }
  return out;
}

}  // namespace ncindex
