#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "ncindex/linalg.hpp"

namespace ncindex {

using Mode = std::vector<int>;

inline int linf(const Mode& r) {
  int v = 0;
  for (int x : r) v = std::max(v, std::abs(x));
  return v;
}

inline Mode mode_add(const Mode& a, const Mode& b) {
  Mode c(a.size());
  for (size_t k = 0; k < a.size(); ++k) c[k] = a[k] + b[k];
  return c;
}

inline Mode mode_neg(const Mode& a) {
  Mode c(a.size());
  for (size_t k = 0; k < a.size(); ++k) c[k] = -a[k];
  return c;
}

// Real skew-symmetric deformation matrix; only the strict upper triangle is stored.
class SkewMatrix {
 public:
  SkewMatrix() = default;
  explicit SkewMatrix(int n) : n_(n), upper_(static_cast<size_t>(n * (n - 1) / 2), 0.0) {}

  static SkewMatrix zero(int n) { return SkewMatrix(n); }

  // theta * [[0,1],[-1,0]] in the (0,1) plane, the standard noncommutative-torus parameter.
  static SkewMatrix planar(int n, double theta) {
    SkewMatrix s(n);
    if (n >= 2) s.set(0, 1, theta);
    return s;
  }

  static SkewMatrix from_matrix(const MatR& m, double tol = 0.0) {
    if (m.rows() != m.cols()) throw std::invalid_argument("SkewMatrix: not square");
    SkewMatrix s(static_cast<int>(m.rows()));
    for (int i = 0; i < s.n_; ++i) {
      if (m(i, i) != 0.0) throw std::invalid_argument("SkewMatrix: nonzero diagonal");
      for (int j = i + 1; j < s.n_; ++j) {
        if (std::abs(m(i, j) + m(j, i)) > tol) throw std::invalid_argument("SkewMatrix: not skew-symmetric");
        s.set(i, j, m(i, j));
      }
    }
    return s;
  }

  int n() const { return n_; }

  void set(int i, int j, double v) {
    if (i == j) throw std::invalid_argument("SkewMatrix: diagonal is zero");
    if (i > j) {
      std::swap(i, j);
      v = -v;
    }
    upper_[index(i, j)] = v;
  }

  double operator()(int i, int j) const {
    if (i == j) return 0.0;
    if (i < j) return upper_[index(i, j)];
    return -upper_[index(j, i)];
  }

  MatR matrix() const {
    MatR m = MatR::Zero(n_, n_);
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  bool is_zero() const {
    return std::all_of(upper_.begin(), upper_.end(), [](double v) { return v == 0.0; });
  }

  void scale(double f) {
    for (auto& v : upper_) v *= f;
  }

  SkewMatrix operator-() const {
    SkewMatrix s = *this;
    for (auto& v : s.upper_) v = -v;
    return s;
  }

  // <r, Theta s>
  double pair(const Mode& r, const Mode& s) const {
    double acc = 0.0;
    for (int i = 0; i < n_; ++i)
      for (int j = i + 1; j < n_; ++j) {
        const double t = upper_[index(i, j)];
        if (t != 0.0) acc += t * (r[i] * s[j] - r[j] * s[i]);
      }
    return acc;
  }

 private:
  size_t index(int i, int j) const { return static_cast<size_t>(i * n_ - i * (i + 1) / 2 + (j - i - 1)); }

  int n_ = 0;
  std::vector<double> upper_;
};

// sigma_Theta(r, s) = exp(2 pi i <r, Theta s>)
inline cplx cocycle(const SkewMatrix& theta, const Mode& r, const Mode& s) {
  if (theta.n() == 0) return 1.0;
  return std::polar(1.0, 2.0 * kPi * theta.pair(r, s));
}

// Finitely supported map Z^n -> C^{m x m}, plus a scalar multiple of the unit.
struct ModeElement {
  int n = 1;
  int m = 1;
  std::map<Mode, MatC> coeffs;
  cplx scalar_unit = 0.0;

  ModeElement() = default;
  ModeElement(int n_, int m_) : n(n_), m(m_) {}

  static ModeElement zero(int n, int m) { return ModeElement(n, m); }

  static ModeElement unit(int n, int m, cplx lambda = 1.0) {
    ModeElement e(n, m);
    e.scalar_unit = lambda;
    return e;
  }

  // U_r tensor c (c an m x m matrix; identity if omitted)
  static ModeElement basis(const Mode& r, int m = 1, const MatC& c = MatC()) {
    ModeElement e(static_cast<int>(r.size()), m);
    e.coeffs[r] = c.size() ? c : MatC::Identity(m, m);
    return e;
  }

  MatC coeff(const Mode& r) const {
    auto it = coeffs.find(r);
    return it == coeffs.end() ? MatC::Zero(m, m) : it->second;
  }

  int support_radius() const {
    int s = 0;
    for (const auto& kv : coeffs) s = std::max(s, linf(kv.first));
    return s;
  }

  void prune(double tol = 0.0) {
    for (auto it = coeffs.begin(); it != coeffs.end();) {
      if (it->second.cwiseAbs().maxCoeff() <= tol)
        it = coeffs.erase(it);
      else
        ++it;
    }
  }

  ModeElement& operator+=(const ModeElement& b) {
    check_compatible(b);
    for (const auto& kv : b.coeffs) {
      auto it = coeffs.find(kv.first);
      if (it == coeffs.end())
        coeffs.emplace(kv.first, kv.second);
      else
        it->second += kv.second;
    }
    scalar_unit += b.scalar_unit;
    prune();
    return *this;
  }

  ModeElement& operator*=(cplx s) {
    for (auto& kv : coeffs) kv.second *= s;
    scalar_unit *= s;
    prune();
    return *this;
  }

  void check_compatible(const ModeElement& b) const {
    if (n != b.n || m != b.m) throw std::invalid_argument("ModeElement: dimension mismatch");
  }
};

inline ModeElement operator+(ModeElement a, const ModeElement& b) { return a += b; }
inline ModeElement operator-(ModeElement a, const ModeElement& b) {
  ModeElement nb = b;
  nb *= -1.0;
  return a += nb;
}
inline ModeElement operator*(cplx s, ModeElement a) { return a *= s; }

// Coefficient l1 norm, sum_r ||a_r||_F + |unit| * sqrt(m); dominates the operator norm of the symbol.
inline double coeff_norm(const ModeElement& a) {
  double s = std::abs(a.scalar_unit) * std::sqrt(static_cast<double>(a.m));
  for (const auto& kv : a.coeffs) s += kv.second.norm();
  return s;
}

// Largest entry modulus, with the unit folded into mode 0.
inline double coeff_max(const ModeElement& a) {
  double s = 0.0;
  bool zero_seen = false;
  for (const auto& kv : a.coeffs) {
    MatC c = kv.second;
    if (linf(kv.first) == 0) {
      c += a.scalar_unit * MatC::Identity(a.m, a.m);
      zero_seen = true;
    }
    s = std::max(s, c.cwiseAbs().maxCoeff());
  }
  if (!zero_seen) s = std::max(s, std::abs(a.scalar_unit));
  return s;
}

// Moves the unit component into mode 0 (same element of the unitized algebra).
inline ModeElement absorb_unit(ModeElement a) {
  if (a.scalar_unit != 0.0) {
    Mode z(a.n, 0);
    auto it = a.coeffs.find(z);
    MatC add = a.scalar_unit * MatC::Identity(a.m, a.m);
    if (it == a.coeffs.end())
      a.coeffs.emplace(z, add);
    else
      it->second += add;
    a.scalar_unit = 0.0;
    a.prune();
  }
  return a;
}

// Gaussian coefficients on every mode of the box ||r||_inf <= radius.
inline ModeElement random_element(int n, int m, int radius, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  ModeElement a(n, m);
  Mode r(n, -radius);
  while (true) {
    MatC c(m, m);
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j) c(i, j) = cplx(g(rng), g(rng));
    a.coeffs.emplace(r, c);
    int k = n - 1;
    while (k >= 0 && r[k] == radius) r[k--] = -radius;
    if (k < 0) break;
    ++r[k];
  }
  return a;
}

inline ModeElement truncate(const ModeElement& a, int radius) {
  ModeElement b(a.n, a.m);
  b.scalar_unit = a.scalar_unit;
  for (const auto& kv : a.coeffs)
    if (linf(kv.first) <= radius) b.coeffs.emplace(kv.first, kv.second);
  return b;
}

namespace detail {

struct FlatElement {
  std::vector<Mode> modes;
  std::vector<MatC> mats;
};

inline FlatElement flatten(const ModeElement& a) {
  FlatElement f;
  f.modes.reserve(a.coeffs.size());
  f.mats.reserve(a.coeffs.size());
  for (const auto& kv : a.coeffs) {
    f.modes.push_back(kv.first);
    f.mats.push_back(kv.second);
  }
  return f;
}

class ModeKey {
 public:
  explicit ModeKey(int n) : n_(n), bits_(n > 0 ? std::min(63 / n, 31) : 31), offset_(int64_t{1} << (bits_ - 1)) {}
  uint64_t encode(const Mode& r) const {
    uint64_t k = 0;
    for (int i = 0; i < n_; ++i) {
      int64_t v = r[i] + offset_;
      if (v < 0 || v >= 2 * offset_) throw std::overflow_error("mode out of encodable range");
      k = (k << bits_) | static_cast<uint64_t>(v);
    }
    return k;
  }

 private:
  int n_;
  int bits_;
  int64_t offset_;
};

}  // namespace detail

// (a x_Theta b)_t = sum_{r+s=t} a_r b_s sigma_Theta(r, s). A nonnegative radius
// discards output modes outside the l-infinity ball of that radius.
inline ModeElement star_multiply(const ModeElement& a, const ModeElement& b, const SkewMatrix& theta, int radius = -1) {
  a.check_compatible(b);
  if (theta.n() != 0 && theta.n() != a.n) throw std::invalid_argument("star_multiply: Theta dimension mismatch");
  const int n = a.n, m = a.m;
  detail::FlatElement fa = detail::flatten(a), fb = detail::flatten(b);
  const bool deformed = theta.n() != 0 && !theta.is_zero();

  std::vector<std::vector<double>> theta_s;
  if (deformed) {
    MatR th = theta.matrix();
    theta_s.resize(fb.modes.size(), std::vector<double>(n));
    for (size_t j = 0; j < fb.modes.size(); ++j)
      for (int p = 0; p < n; ++p) {
        double acc = 0.0;
        for (int q = 0; q < n; ++q) acc += th(p, q) * fb.modes[j][q];
        theta_s[j][p] = acc;
      }
  }

  detail::ModeKey key(n);
  std::unordered_map<uint64_t, size_t> slot;
  std::vector<Mode> out_modes;
  std::vector<MatC> out_mats;
  Mode t(n);
  MatC prod(m, m);
  for (size_t i = 0; i < fa.modes.size(); ++i) {
    const Mode& r = fa.modes[i];
    for (size_t j = 0; j < fb.modes.size(); ++j) {
      const Mode& s = fb.modes[j];
      bool inside = true;
      for (int p = 0; p < n; ++p) {
        t[p] = r[p] + s[p];
        if (radius >= 0 && std::abs(t[p]) > radius) inside = false;
      }
      if (!inside) continue;
      cplx phase = 1.0;
      if (deformed) {
        double acc = 0.0;
        for (int p = 0; p < n; ++p) acc += r[p] * theta_s[j][p];
        phase = std::polar(1.0, 2.0 * kPi * acc);
      }
      prod.noalias() = fa.mats[i] * fb.mats[j];
      const uint64_t k = key.encode(t);
      auto it = slot.find(k);
      if (it == slot.end()) {
        slot.emplace(k, out_mats.size());
        out_modes.push_back(t);
        out_mats.push_back(phase * prod);
      } else {
        out_mats[it->second] += phase * prod;
      }
    }
  }

  ModeElement c(n, m);
  for (size_t q = 0; q < out_modes.size(); ++q) c.coeffs.emplace(out_modes[q], std::move(out_mats[q]));
  if (a.scalar_unit != 0.0)
    for (const auto& kv : b.coeffs)
      if (radius < 0 || linf(kv.first) <= radius) {
        auto it = c.coeffs.find(kv.first);
        if (it == c.coeffs.end())
          c.coeffs.emplace(kv.first, a.scalar_unit * kv.second);
        else
          it->second += a.scalar_unit * kv.second;
      }
  if (b.scalar_unit != 0.0)
    for (const auto& kv : a.coeffs)
      if (radius < 0 || linf(kv.first) <= radius) {
        auto it = c.coeffs.find(kv.first);
        if (it == c.coeffs.end())
          c.coeffs.emplace(kv.first, b.scalar_unit * kv.second);
        else
          it->second += b.scalar_unit * kv.second;
      }
  c.scalar_unit = a.scalar_unit * b.scalar_unit;
  c.prune();
  return c;
}

inline ModeElement adjoint(const ModeElement& a) {
  ModeElement b(a.n, a.m);
  for (const auto& kv : a.coeffs) b.coeffs.emplace(mode_neg(kv.first), kv.second.adjoint());
  b.scalar_unit = std::conj(a.scalar_unit);
  return b;
}

// (delta_k a)_r = 2 pi i r_k a_r, k is 1-based.
inline ModeElement derivation(const ModeElement& a, int k) {
  if (k < 1 || k > a.n) throw std::out_of_range("derivation: axis out of range");
  ModeElement b(a.n, a.m);
  for (const auto& kv : a.coeffs) {
    const int rk = kv.first[k - 1];
    if (rk != 0) b.coeffs.emplace(kv.first, (2.0 * kPi * kI * static_cast<double>(rk)) * kv.second);
  }
  return b;
}

// tau(a) = Tr(a_0) + m * unit
inline cplx trace(const ModeElement& a) {
  cplx t = static_cast<double>(a.m) * a.scalar_unit;
  auto it = a.coeffs.find(Mode(a.n, 0));
  if (it != a.coeffs.end()) t += it->second.trace();
  return t;
}

// tau(a x_Theta b) without forming the product (sigma_Theta(r, -r) = 1).
inline cplx trace_of_product(const ModeElement& a, const ModeElement& b) {
  a.check_compatible(b);
  cplx t = static_cast<double>(a.m) * a.scalar_unit * b.scalar_unit;
  for (const auto& kv : a.coeffs) {
    auto it = b.coeffs.find(mode_neg(kv.first));
    if (it != b.coeffs.end()) t += (kv.second * it->second).trace();
  }
  const Mode zero(a.n, 0);
  if (auto it = b.coeffs.find(zero); it != b.coeffs.end()) t += a.scalar_unit * it->second.trace();
  if (auto it = a.coeffs.find(zero); it != a.coeffs.end()) t += b.scalar_unit * it->second.trace();
  return t;
}

inline double unitarity_defect(const ModeElement& u, const SkewMatrix& theta) {
  ModeElement d = star_multiply(adjoint(u), u, theta) - ModeElement::unit(u.n, u.m);
  ModeElement d2 = star_multiply(u, adjoint(u), theta) - ModeElement::unit(u.n, u.m);
  return std::max(coeff_norm(absorb_unit(d)), coeff_norm(absorb_unit(d2)));
}

inline double idempotency_defect(const ModeElement& e, const SkewMatrix& theta) {
  return coeff_norm(absorb_unit(star_multiply(e, e, theta) - e));
}

inline double selfadjointness_defect(const ModeElement& a) { return coeff_norm(absorb_unit(a - adjoint(a))); }

namespace detail {

inline int permutation_sign(const std::vector<int>& p) {
  int sign = 1;
  for (size_t i = 0; i < p.size(); ++i)
    for (size_t j = i + 1; j < p.size(); ++j)
      if (p[i] > p[j]) sign = -sign;
  return sign;
}

// sum over permutations eps of sign(eps) tau(head x f_{eps(1)} x ... x f_{eps(n)}),
// where head is optional (empty => omitted). Prefix products are memoized and
// truncated to the radius needed for the final trace pairing.
inline cplx signed_chain(const ModeElement* head, const std::vector<ModeElement>& factors, const SkewMatrix& theta) {
  const int n = static_cast<int>(factors.size());
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  int max_r = 0;
  for (const auto& f : factors) max_r = std::max(max_r, f.support_radius());
  std::map<std::vector<int>, ModeElement> memo;
  std::function<const ModeElement&(const std::vector<int>&)> prefix = [&](const std::vector<int>& key) -> const ModeElement& {
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;
    const int remaining = n - static_cast<int>(key.size());
    const int radius = remaining * max_r;
    ModeElement val;
    if (key.size() == 1 && head == nullptr) {
      val = truncate(factors[key[0]], radius);
    } else if (key.size() == 1) {
      val = star_multiply(*head, factors[key[0]], theta, radius);
    } else {
      std::vector<int> shorter(key.begin(), key.end() - 1);
      val = star_multiply(prefix(shorter), factors[key.back()], theta, radius);
    }
    return memo.emplace(key, std::move(val)).first->second;
  };
  cplx total = 0.0;
  do {
    std::vector<int> head_key(perm.begin(), perm.end() - 1);
    cplx v;
    if (n == 1 && head == nullptr)
      v = trace(factors[perm[0]]);
    else if (n == 1)
      v = trace_of_product(*head, factors[perm[0]]);
    else
      v = trace_of_product(prefix(head_key), factors[perm.back()]);
    total += static_cast<double>(permutation_sign(perm)) * v;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return total;
}

}  // namespace detail

// tau( sum_eps (-1)^eps prod_k u* x delta_{eps(k)}(u) )
inline cplx antisym_odd_chain(const ModeElement& u, const SkewMatrix& theta, double tol = 1e-3) {
  if (u.n % 2 == 0) throw std::domain_error("antisym_odd_chain: n must be odd");
  if (unitarity_defect(u, theta) > tol) throw std::domain_error("antisym_odd_chain: input is not unitary to tolerance");
  ModeElement us = adjoint(u);
  std::vector<ModeElement> factors;
  for (int k = 1; k <= u.n; ++k) factors.push_back(star_multiply(us, derivation(u, k), theta));
  return detail::signed_chain(nullptr, factors, theta);
}

// tau( sum_eps (-1)^eps e x delta_{eps(1)}(e) x ... x delta_{eps(n)}(e) )
inline cplx antisym_even_chain(const ModeElement& e, const SkewMatrix& theta, double tol = 1e-3) {
  if (e.n % 2 != 0) throw std::domain_error("antisym_even_chain: n must be even");
  if (idempotency_defect(e, theta) > tol) throw std::domain_error("antisym_even_chain: input is not idempotent to tolerance");
  std::vector<ModeElement> factors;
  for (int k = 1; k <= e.n; ++k) factors.push_back(derivation(e, k));
  return detail::signed_chain(&e, factors, theta);
}

}  // namespace ncindex
