#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "ncindex/linalg.hpp"

namespace ncindex {

struct CliffordRep {
  int n = 0;
  int N = 0;
  std::vector<MatC> gammas;
  MatC grading;  // empty for odd n

  bool has_grading() const { return grading.size() > 0; }
};

namespace detail {

inline MatC pauli(int k) {
  MatC s(2, 2);
  switch (k) {
    case 1: s << 0, 1, 1, 0; break;
    case 2: s << 0, -kI, kI, 0; break;
    case 3: s << 1, 0, 0, -1; break;
    default: s = MatC::Identity(2, 2);
  }
  return s;
}

inline cplx minus_i_power(int k) {
  static const cplx p[4] = {1.0, -kI, -1.0, kI};
  return p[((k % 4) + 4) % 4];
}

inline MatC ordered_product(const std::vector<MatC>& gs, int N) {
  MatC p = MatC::Identity(N, N);
  for (const auto& g : gs) p = p * g;
  return p;
}

}  // namespace detail

// Recursive tensor doubling. n=1 gives the 1x1 generator +1; even n appends
// sigma^1 to the previous generators and adds 1 (x) sigma^2; odd n > 1 appends
// the grading of n-1.
inline CliffordRep build_gammas(int n) {
  if (n < 1) throw std::invalid_argument("build_gammas: n must be positive");
  CliffordRep rep;
  rep.n = 1;
  rep.N = 1;
  rep.gammas = {MatC::Identity(1, 1)};
  for (int d = 2; d <= n; ++d) {
    if (d % 2 == 0) {
      std::vector<MatC> next;
      for (const auto& g : rep.gammas) next.push_back(kron(g, detail::pauli(1)));
      next.push_back(kron(MatC::Identity(rep.N, rep.N), detail::pauli(2)));
      rep.N *= 2;
      rep.gammas = std::move(next);
    } else {
      rep.gammas.push_back(detail::minus_i_power((d - 1) / 2) * detail::ordered_product(rep.gammas, rep.N));
    }
    rep.n = d;
  }
  if (n % 2 == 0) rep.grading = detail::minus_i_power(n / 2) * detail::ordered_product(rep.gammas, rep.N);
  return rep;
}

inline MatC grading(const CliffordRep& rep) {
  if (rep.n % 2 != 0) throw std::domain_error("grading: odd dimension has no grading");
  return detail::minus_i_power(rep.n / 2) * detail::ordered_product(rep.gammas, rep.N);
}

struct DoubledPair {
  std::vector<MatC> gamma;      // Hermitian, square +1
  std::vector<MatC> gamma_hat;  // skew-Hermitian, square -1
};

// 2n mutually anticommuting generators on C^{2^n}: the first n generators of
// the rank-2n representation, and i times the remaining n.
inline DoubledPair doubled_pair(int n) {
  if (n < 1) throw std::invalid_argument("doubled_pair: n must be positive");
  CliffordRep big = build_gammas(2 * n);
  DoubledPair p;
  for (int k = 0; k < n; ++k) {
    p.gamma.push_back(big.gammas[k]);
    p.gamma_hat.push_back(kI * big.gammas[n + k]);
  }
  return p;
}

// Tr(Gamma gamma^{k_1} ... gamma^{k_m}); Gamma = 1 for odd n. Indices are 1-based.
inline cplx graded_trace(const CliffordRep& rep, const std::vector<int>& word) {
  MatC p = rep.has_grading() ? rep.grading : MatC::Identity(rep.N, rep.N);
  for (int k : word) {
    if (k < 1 || k > rep.n) throw std::out_of_range("graded_trace: generator index out of range");
    p = p * rep.gammas[k - 1];
  }
  return p.trace();
}

inline double clifford_residual(const std::vector<MatC>& gs, double square) {
  double worst = 0.0;
  for (size_t j = 0; j < gs.size(); ++j)
    for (size_t k = 0; k < gs.size(); ++k) {
      const Eigen::Index N = gs[j].rows();
      MatC target = (j == k ? 2.0 * square : 0.0) * MatC::Identity(N, N);
      worst = std::max(worst, (gs[j] * gs[k] + gs[k] * gs[j] - target).cwiseAbs().maxCoeff());
    }
  return worst;
}

}  // namespace ncindex
