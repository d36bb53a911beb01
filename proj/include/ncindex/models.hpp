#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ncindex/clifford.hpp"
#include "ncindex/deformation.hpp"
#include "ncindex/mode_algebra.hpp"
#include "ncindex/moyal_continuum.hpp"

namespace ncindex {

// Fourier coefficients of a matrix-valued function on the torus [0,1)^n sampled on
// grid^n points, keeping modes with ||r||_inf <= radius.
inline ModeElement torus_fourier(int n, int m, int grid, int radius,
                                 const std::function<MatC(const std::vector<double>&)>& f) {
  if (2 * radius >= grid) throw std::invalid_argument("torus_fourier: radius must be below the Nyquist mode");
  GridSpec g{n, 0.5, grid};
  g.validate();
  const long total = g.total();
  std::vector<VecC> entries(static_cast<size_t>(m * m), VecC(total));
  std::vector<double> x(n);
  for (long q = 0; q < total; ++q) {
    const std::vector<int> j = g.unflatten(q);
    for (int k = 0; k < n; ++k) x[k] = static_cast<double>(j[k]) / grid;
    const MatC v = f(x);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) entries[a * m + b](q) = v(a, b);
  }
  for (auto& e : entries) e = grid_coefficients(g, e);
  ModeElement out(n, m);
  for (long q = 0; q < total; ++q) {
    std::vector<int> j = g.unflatten(q);
    Mode r(n);
    bool keep = true;
    for (int k = 0; k < n; ++k) {
      r[k] = j[k] < (grid + 1) / 2 ? j[k] : j[k] - grid;
      keep = keep && std::abs(r[k]) <= radius;
    }
    if (!keep) continue;
    MatC c(m, m);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b) c(a, b) = entries[a * m + b](q);
    if (c.cwiseAbs().maxCoeff() > 1e-15) out.coeffs.emplace(r, c);
  }
  return out;
}

// U_1^w on the circle.
inline ModeElement winding_unitary(int w) {
  if (w == 0) return ModeElement::unit(1, 1);
  return ModeElement::basis(Mode{w}, 1);
}

// (d0 + i sum_k d_k sigma_k)/|d| with d = (mu + sum cos 2 pi x_k, sin 2 pi x_1, sin 2 pi x_2, sin 2 pi x_3),
// a degree-one map T^3 -> SU(2) for 1 < mu < 3; truncated and polar-corrected.
inline CorrectionReport degree_one_unitary(double mu = 2.4, int radius = 4, int grid = 32, int max_iter = 40) {
  auto f = [mu](const std::vector<double>& x) {
    double d[4] = {mu, 0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
      d[0] += std::cos(2.0 * kPi * x[k]);
      d[k + 1] = std::sin(2.0 * kPi * x[k]);
    }
    const double nr = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2] + d[3] * d[3]);
    MatC u = d[0] / nr * MatC::Identity(2, 2);
    for (int k = 0; k < 3; ++k) u += kI * (d[k + 1] / nr) * detail::pauli(k + 1);
    return u;
  };
  ModeElement u = torus_fourier(3, 2, grid, radius, f);
  return purify_unitary(u, SkewMatrix::zero(3), {radius, 1e-14, max_iter});
}

// (1 + n.sigma)/2 with n = (sin 2 pi x_1, sin 2 pi x_2, mass + cos 2 pi x_1 + cos 2 pi x_2)/|.|,
// Chern number one in magnitude for 0 < mass < 2; truncated and purified.
inline CorrectionReport clutching_projection(double mass = 1.2, int radius = 8, int grid = 64, int max_iter = 20) {
  auto f = [mass](const std::vector<double>& x) {
    const double v[3] = {std::sin(2.0 * kPi * x[0]), std::sin(2.0 * kPi * x[1]),
                         mass + std::cos(2.0 * kPi * x[0]) + std::cos(2.0 * kPi * x[1])};
    const double nr = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    MatC e = 0.5 * MatC::Identity(2, 2);
    for (int k = 0; k < 3; ++k) e += 0.5 * (v[k] / nr) * detail::pauli(k + 1);
    return e;
  };
  ModeElement e = torus_fourier(2, 2, grid, radius, f);
  return purify_projection(e, SkewMatrix::zero(2), {radius, 1e-14, max_iter});
}

// e U_3 + (1 - e) on T^3 from a projection e on T^2. U_3 is central for Theta coupling
// only the first two axes, so this is a Theta-unitary whenever e is a Theta-projection.
inline ModeElement suspension_unitary(const ModeElement& e) {
  if (e.n != 2) throw std::invalid_argument("suspension_unitary: need a projection on T^2");
  const ModeElement ea = absorb_unit(e);
  ModeElement u(3, e.m);
  u.coeffs[Mode{0, 0, 0}] = MatC::Identity(e.m, e.m);
  for (const auto& kv : ea.coeffs) {
    const Mode lo{kv.first[0], kv.first[1], 0};
    u.coeffs[Mode{kv.first[0], kv.first[1], 1}] = kv.second;
    u.coeffs[lo] = u.coeff(lo) - kv.second;
  }
  return u;
}

// a (+) 0 in M_{m + extra}
inline ModeElement pad(const ModeElement& a, int extra) {
  ModeElement b(a.n, a.m + extra);
  for (const auto& kv : a.coeffs) {
    MatC c = MatC::Zero(b.m, b.m);
    c.topLeftCorner(a.m, a.m) = kv.second;
    b.coeffs.emplace(kv.first, c);
  }
  if (a.scalar_unit != 0.0) {
    MatC c = b.coeff(Mode(a.n, 0));
    c.topLeftCorner(a.m, a.m) += a.scalar_unit * MatC::Identity(a.m, a.m);
    b.coeffs[Mode(a.n, 0)] = c;
  }
  return b;
}

}  // namespace ncindex
