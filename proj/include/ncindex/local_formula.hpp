#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ncindex/linalg.hpp"
#include "ncindex/mode_algebra.hpp"

namespace ncindex {

namespace detail {

inline double factorial(int k) {
  double f = 1.0;
  for (int i = 2; i <= k; ++i) f *= i;
  return f;
}

// (2 pi i)^p with the power of i reduced exactly
inline cplx two_pi_i_power(int p) {
  static const cplx ipow[4] = {1.0, kI, -1.0, -kI};
  return std::pow(2.0 * kPi, p) * ipow[((p % 4) + 4) % 4];
}

}  // namespace detail

// Constants as displayed for the odd and even local formulas.
inline cplx literal_constant_odd(int n) {
  if (n < 1 || n % 2 == 0) throw std::domain_error("literal_constant_odd: n must be odd");
  const int k = (n - 1) / 2;
  const double sign = k % 2 == 0 ? 1.0 : -1.0;
  return -std::pow(2.0, k) * sign * detail::factorial(k) / (detail::two_pi_i_power(n) * detail::factorial(n));
}

inline cplx literal_constant_even(int n) {
  if (n < 2 || n % 2 != 0) throw std::domain_error("literal_constant_even: n must be even");
  const int k = n / 2;
  const double sign = k % 2 == 0 ? 1.0 : -1.0;
  return sign / detail::factorial(k) * std::pow(2.0, n) / detail::two_pi_i_power(n);
}

// Normalizations that turn the antisymmetrized chains into integer indices.
inline cplx constant_odd(int n) {
  if (n < 1 || n % 2 == 0) throw std::domain_error("constant_odd: n must be odd");
  const int k = (n - 1) / 2;
  return -detail::factorial(k) / (detail::factorial(n) * detail::two_pi_i_power(k + 1));
}

inline cplx constant_even(int n) {
  if (n < 2 || n % 2 != 0) throw std::domain_error("constant_even: n must be even");
  const int k = n / 2;
  const double sign = k % 2 == 0 ? 1.0 : -1.0;
  return sign / (detail::factorial(k) * detail::two_pi_i_power(k));
}

inline cplx odd_local_index(const ModeElement& u, const SkewMatrix& theta, double tol = 1e-3) {
  return constant_odd(u.n) * antisym_odd_chain(u, theta, tol);
}

inline cplx even_local_index(const ModeElement& e, const SkewMatrix& theta, double tol = 1e-3) {
  return constant_even(e.n) * antisym_even_chain(e, theta, tol);
}

enum class Parity { odd, even };

// Same evaluators with every product in the deformed algebra; the extended trace of a
// mode element is the trace of its symbol.
inline cplx deformed_local_index(const ModeElement& a, const SkewMatrix& theta, Parity parity, double tol = 1e-3) {
  if ((parity == Parity::odd) != (a.n % 2 == 1)) throw std::domain_error("deformed_local_index: parity does not match n");
  return parity == Parity::odd ? odd_local_index(a, theta, tol) : even_local_index(a, theta, tol);
}

// Residue at s = n of the integral of (1 + |t|^2)^(-s/2) over R^n.
inline double residue_volume(int n) {
  if (n < 1) throw std::domain_error("residue_volume: n must be positive");
  return 2.0 * std::pow(kPi, 0.5 * n) / std::tgamma(0.5 * n);
}

struct ResidueEstimate {
  double value = 0.0;
  std::vector<double> eps;
  std::vector<double> scaled;  // eps * I(n + eps)
};

namespace detail {

// Gauss-Legendre nodes and weights on [0, 1].
inline void gauss_legendre(int count, std::vector<double>& x, std::vector<double>& w) {
  x.assign(count, 0.0);
  w.assign(count, 0.0);
  for (int i = 0; i < count; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (count + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= count; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = count * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

// Surface measure of the unit sphere in R^n by quadrature over hyperspherical angles.
inline double sphere_measure(int n, int nodes) {
  if (n == 1) return 2.0;
  std::vector<double> x, w;
  gauss_legendre(nodes, x, w);
  double total = 2.0 * kPi;  // azimuth
  for (int j = 1; j <= n - 2; ++j) {  // polar angles with weight sin^j
    double s = 0.0;
    for (int i = 0; i < nodes; ++i) s += kPi * w[i] * std::pow(std::sin(kPi * x[i]), j);
    total *= s;
  }
  return total;
}

}  // namespace detail

// eps * I(n + eps) for eps in {0.1, 0.05, 0.025}, extrapolated to eps = 0.
inline ResidueEstimate residue_volume_numeric(int n, int nodes = 200) {
  if (n < 1) throw std::domain_error("residue_volume_numeric: n must be positive");
  std::vector<double> x, w;
  detail::gauss_legendre(nodes, x, w);
  const double sphere = detail::sphere_measure(n, nodes);
  ResidueEstimate est;
  est.eps = {0.1, 0.05, 0.025};
  for (double eps : est.eps) {
    const double s = n + eps;
    double inner = 0.0, outer = 0.0;
    for (int i = 0; i < nodes; ++i) {
      const double r = x[i];
      inner += w[i] * std::pow(r, n - 1) * std::pow(1.0 + r * r, -0.5 * s);
      // rho = 1/r on [1, inf): r^(eps-1) (1+r^2)^(-s/2), minus r^(eps-1) integrated exactly
      outer += w[i] * std::pow(r, eps - 1.0) * (std::pow(1.0 + r * r, -0.5 * s) - 1.0);
    }
    est.scaled.push_back(sphere * (eps * (inner + outer) + 1.0));
  }
  // quadratic through the three points, evaluated at 0
  const double e0 = est.eps[0], e1 = est.eps[1], e2 = est.eps[2];
  const double f0 = est.scaled[0], f1 = est.scaled[1], f2 = est.scaled[2];
  est.value = f0 * (e1 * e2) / ((e0 - e1) * (e0 - e2)) + f1 * (e0 * e2) / ((e1 - e0) * (e1 - e2)) +
              f2 * (e0 * e1) / ((e2 - e0) * (e2 - e1));
  return est;
}

}  // namespace ncindex
