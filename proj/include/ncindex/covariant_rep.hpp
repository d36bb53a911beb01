#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Sparse>

#include "ncindex/clifford.hpp"
#include "ncindex/linalg.hpp"
#include "ncindex/mode_algebra.hpp"

namespace ncindex {

using SpMatC = Eigen::SparseMatrix<cplx, Eigen::ColMajor, long>;

// Hilbert space: [C^2 (doubled, outermost)] x modes{||r||_inf <= M} x C^N x C^m.
struct TruncationSpec {
  int n = 1;
  int M = 1;
  int m = 1;
  int N = 1;
  bool doubled = false;
  double mass = 1.0;

  long side() const { return 2L * M + 1; }
  long num_modes() const {
    long c = 1;
    for (int k = 0; k < n; ++k) c *= side();
    return c;
  }
  long block() const { return static_cast<long>(N) * m; }
  long half_dim() const { return num_modes() * block(); }
  long dim() const { return half_dim() * (doubled ? 2 : 1); }

  void validate() const {
    if (n < 1 || M < 0 || m < 1 || N < 1) throw std::invalid_argument("TruncationSpec: invalid sizes");
    if (doubled && !(mass > 0.0)) throw std::invalid_argument("TruncationSpec: mass must be positive");
  }

  Mode mode_at(long idx) const {
    Mode r(n);
    for (int k = n - 1; k >= 0; --k) {
      r[k] = static_cast<int>(idx % side()) - M;
      idx /= side();
    }
    return r;
  }

  // -1 when outside the window
  long index_of(const Mode& r) const {
    long idx = 0;
    for (int k = 0; k < n; ++k) {
      if (std::abs(r[k]) > M) return -1;
      idx = idx * side() + (r[k] + M);
    }
    return idx;
  }
};

inline TruncationSpec make_spec(int n, int M, int m, const CliffordRep& rep, bool doubled = false, double mass = 1.0) {
  TruncationSpec s{n, M, m, rep.N, doubled, mass};
  s.validate();
  return s;
}

struct DenseOperator {
  TruncationSpec spec;
  MatC matrix;
};

// l-infinity radius of the mode carrying each basis vector of the (undoubled or doubled) space.
inline std::vector<int> basis_radius(const TruncationSpec& s) {
  std::vector<int> rad(static_cast<size_t>(s.dim()));
  for (long i = 0; i < s.dim(); ++i) rad[i] = linf(s.mode_at((i % s.half_dim()) / s.block()));
  return rad;
}

// Diagonal mask of basis vectors on modes with ||r||_inf <= M - band.
inline VecR interior_mask(const TruncationSpec& s, int band) {
  std::vector<int> rad = basis_radius(s);
  VecR w(s.dim());
  for (long i = 0; i < s.dim(); ++i) w(i) = rad[i] <= s.M - band ? 1.0 : 0.0;
  return w;
}

inline DenseOperator build_Dk(const TruncationSpec& s, int k) {
  if (k < 1 || k > s.n) throw std::out_of_range("build_Dk: axis out of range");
  DenseOperator op{s, MatC::Zero(s.dim(), s.dim())};
  for (long i = 0; i < s.dim(); ++i) op.matrix(i, i) = s.mode_at((i % s.half_dim()) / s.block())[k - 1];
  return op;
}

// Per-mode block of the Dirac operator sum_k gamma^k r_k (x) 1_m.
inline MatC dirac_symbol(const CliffordRep& rep, const Mode& r, int m) {
  MatC g = MatC::Zero(rep.N, rep.N);
  for (int k = 0; k < rep.n; ++k) g += static_cast<double>(r[k]) * rep.gammas[k];
  return kron(g, MatC::Identity(m, m));
}

inline MatC massless_dirac_matrix(const TruncationSpec& s, const CliffordRep& rep) {
  if (rep.n != s.n || rep.N != s.N) throw std::invalid_argument("build_dirac: Clifford rep does not match spec");
  const long b = s.block();
  MatC d = MatC::Zero(s.half_dim(), s.half_dim());
  for (long q = 0; q < s.num_modes(); ++q) d.block(q * b, q * b, b, b) = dirac_symbol(rep, s.mode_at(q), s.m);
  return d;
}

inline DenseOperator build_dirac(const TruncationSpec& s, const CliffordRep& rep) {
  if (s.doubled) throw std::invalid_argument("build_dirac: use build_massive for doubled specs");
  return {s, massless_dirac_matrix(s, rep)};
}

// diag(D, -D) + mass * offdiag(1, 1)
inline DenseOperator build_massive(const TruncationSpec& s, const CliffordRep& rep) {
  if (!s.doubled) throw std::invalid_argument("build_massive: spec must be doubled");
  if (!(s.mass > 0.0)) throw std::invalid_argument("build_massive: mass must be positive");
  const long h = s.half_dim();
  MatC d = massless_dirac_matrix(s, rep);
  DenseOperator op{s, MatC::Zero(2 * h, 2 * h)};
  op.matrix.topLeftCorner(h, h) = d;
  op.matrix.bottomRightCorner(h, h) = -d;
  op.matrix.topRightCorner(h, h) = s.mass * MatC::Identity(h, h);
  op.matrix.bottomLeftCorner(h, h) = s.mass * MatC::Identity(h, h);
  return op;
}

// Gamma on each mode block; diag(Gamma, -Gamma) when doubled.
inline DenseOperator build_grading(const TruncationSpec& s, const CliffordRep& rep) {
  if (!rep.has_grading()) throw std::domain_error("build_grading: odd dimension has no grading");
  const long b = s.block();
  MatC g = kron(rep.grading, MatC::Identity(s.m, s.m));
  DenseOperator op{s, MatC::Zero(s.dim(), s.dim())};
  for (long q = 0; q < s.num_modes() * (s.doubled ? 2 : 1); ++q) {
    const double sign = (s.doubled && q >= s.num_modes()) ? -1.0 : 1.0;
    op.matrix.block(q * b, q * b, b, b) = sign * g;
  }
  return op;
}

// Projection onto eigenvalues >= 0 (zero modes included).
inline MatC nonnegative_projection(const MatC& h, double zero_tol = 1e-12) {
  if (hermitian_residual(h) > 1e-10 * std::max(1.0, h.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("spectral_projection: operator is not Hermitian");
  EigenPairs e = eigh(0.5 * (h + h.adjoint()));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < e.values.size(); ++i)
    if (e.values(i) >= -zero_tol) keep.push_back(i);
  MatC v(h.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t j = 0; j < keep.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = e.vectors.col(keep[j]);
  return v * v.adjoint();
}

inline DenseOperator spectral_projection(const DenseOperator& op) { return {op.spec, nonnegative_projection(op.matrix)}; }

inline DenseOperator phase(const DenseOperator& op) {
  if (hermitian_residual(op.matrix) > 1e-10 * std::max(1.0, op.matrix.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("phase: operator is not Hermitian");
  EigenPairs e = eigh(0.5 * (op.matrix + op.matrix.adjoint()));
  if (e.values.size() && e.values.cwiseAbs().minCoeff() < 1e-10) throw std::domain_error("phase: operator is not invertible");
  VecR sgn = e.values.unaryExpr([](double x) { return x > 0 ? 1.0 : -1.0; });
  return {op.spec, e.vectors * sgn.cast<cplx>().asDiagonal() * e.vectors.adjoint()};
}

inline DenseOperator bounded_transform(const DenseOperator& op) {
  EigenPairs e = eigh(0.5 * (op.matrix + op.matrix.adjoint()));
  VecR f = e.values.unaryExpr([](double x) { return x / std::sqrt(1.0 + x * x); });
  return {op.spec, e.vectors * f.cast<cplx>().asDiagonal() * e.vectors.adjoint()};
}

// Per-mode nonnegative spectral projection of the Dirac operator (massless: N x N
// blocks tensored with 1_m; massive: 2N x 2N blocks acting on the doubled pair).
inline std::vector<MatC> mode_projections(const TruncationSpec& s, const CliffordRep& rep, bool massive) {
  std::vector<MatC> out(static_cast<size_t>(s.num_modes()));
  for (long q = 0; q < s.num_modes(); ++q) {
    MatC g = dirac_symbol(rep, s.mode_at(q), 1);
    MatC h = g;
    if (massive) {
      h = MatC::Zero(2 * s.N, 2 * s.N);
      h.topLeftCorner(s.N, s.N) = g;
      h.bottomRightCorner(s.N, s.N) = -g;
      h.topRightCorner(s.N, s.N) = s.mass * MatC::Identity(s.N, s.N);
      h.bottomLeftCorner(s.N, s.N) = s.mass * MatC::Identity(s.N, s.N);
    }
    Eigen::SelfAdjointEigenSolver<MatC> es(h);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < h.rows(); ++i)
      if (es.eigenvalues()(i) >= -1e-12) keep.push_back(i);
    MatC v(h.rows(), static_cast<Eigen::Index>(keep.size()));
    for (size_t j = 0; j < keep.size(); ++j) v.col(static_cast<Eigen::Index>(j)) = es.eigenvectors().col(keep[j]);
    out[q] = v;  // orthonormal basis of the range
  }
  return out;
}

// pi^Theta(a) on modes x C^m only (no Clifford factor), as a sparse matrix.
// W_r e_s = exp(2 pi i <r, Theta s>) e_{r+s}; modes leaving the window are dropped.
inline SpMatC represent_reduced(const ModeElement& a, const SkewMatrix& theta, const TruncationSpec& s) {
  if (a.m != s.m || a.n != s.n) throw std::invalid_argument("represent: element does not match spec");
  if (a.support_radius() > s.M) throw std::domain_error("represent: support exceeds window");
  const long nm = s.num_modes();
  const long dim = nm * s.m;
  std::vector<Eigen::Triplet<cplx, long>> trip;
  trip.reserve(static_cast<size_t>(nm) * a.coeffs.size() * s.m * s.m + static_cast<size_t>(dim));
  const bool deformed = theta.n() != 0 && !theta.is_zero();
  for (long col = 0; col < nm; ++col) {
    const Mode sm = s.mode_at(col);
    for (const auto& kv : a.coeffs) {
      const long row = s.index_of(mode_add(kv.first, sm));
      if (row < 0) continue;
      const cplx ph = deformed ? cocycle(theta, kv.first, sm) : cplx(1.0);
      for (int i = 0; i < s.m; ++i)
        for (int j = 0; j < s.m; ++j) {
          const cplx v = ph * kv.second(i, j);
          if (v != 0.0) trip.emplace_back(row * s.m + i, col * s.m + j, v);
        }
    }
  }
  if (a.scalar_unit != 0.0)
    for (long i = 0; i < dim; ++i) trip.emplace_back(i, i, a.scalar_unit);
  SpMatC out(dim, dim);
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// Full representation on the spec's space; in the doubled case the unitization
// representation diag(pi(a) + lambda, lambda).
inline DenseOperator represent(const ModeElement& a, const SkewMatrix& theta, const TruncationSpec& s) {
  ModeElement body = a;
  body.scalar_unit = 0.0;
  MatC red = MatC(represent_reduced(body, theta, s));
  const long nm = s.num_modes();
  const long b = s.block();
  MatC full = MatC::Zero(s.dim(), s.dim());
  for (long r = 0; r < nm; ++r)
    for (long c = 0; c < nm; ++c) {
      auto blk = red.block(r * s.m, c * s.m, s.m, s.m);
      if (blk.cwiseAbs().maxCoeff() == 0.0) continue;
      for (int sp = 0; sp < s.N; ++sp) full.block(r * b + sp * s.m, c * b + sp * s.m, s.m, s.m) = blk;
    }
  const long h = s.half_dim();
  full.topLeftCorner(h, h) += a.scalar_unit * MatC::Identity(h, h);
  if (s.doubled) full.bottomRightCorner(h, h) += a.scalar_unit * MatC::Identity(h, h);
  return {s, full};
}

// <r|T^Theta|s> = exp(2 pi i <r, Theta s>) <r|T|s>
inline DenseOperator warp_operator(const DenseOperator& t, const SkewMatrix& theta) {
  if (t.spec.doubled) throw std::invalid_argument("warp_operator: doubled specs are warped blockwise");
  DenseOperator out = t;
  if (theta.n() == 0 || theta.is_zero()) return out;
  const TruncationSpec& s = t.spec;
  const long b = s.block();
  for (long c = 0; c < s.num_modes(); ++c) {
    const Mode sc = s.mode_at(c);
    for (long r = 0; r < s.num_modes(); ++r)
      out.matrix.block(r * b, c * b, b, b) *= cocycle(theta, s.mode_at(r), sc);
  }
  return out;
}

// X_j + 2 pi sum_k Theta_{jk} D_k
inline std::vector<MatC> warped_generators(const SkewMatrix& theta, const std::vector<MatC>& X, const std::vector<MatC>& D) {
  if (X.size() != D.size()) throw std::invalid_argument("warped_generators: dimension mismatch");
  std::vector<MatC> out;
  for (size_t j = 0; j < X.size(); ++j) {
    MatC y = X[j];
    for (size_t k = 0; k < D.size(); ++k) {
      if (D[k].rows() != y.rows()) throw std::invalid_argument("warped_generators: dimension mismatch");
      const double t = theta(static_cast<int>(j), static_cast<int>(k));
      if (t != 0.0) y += (2.0 * kPi * t) * D[k];
    }
    out.push_back(std::move(y));
  }
  return out;
}

inline std::vector<DenseOperator> warped_generators(const TruncationSpec& s, const SkewMatrix& theta,
                                                    const std::vector<DenseOperator>& X) {
  std::vector<MatC> xs, ds;
  for (int k = 0; k < s.n; ++k) {
    xs.push_back(X.at(k).matrix);
    ds.push_back(build_Dk(s, k + 1).matrix);
  }
  std::vector<DenseOperator> out;
  for (auto& y : warped_generators(theta, xs, ds)) out.push_back({s, std::move(y)});
  return out;
}

inline double operator_norm(const ModeElement& a, const SkewMatrix& theta, int cutoff) {
  if (cutoff < a.support_radius() + 1) throw std::domain_error("operator_norm: cutoff too small for support");
  TruncationSpec s{a.n, cutoff, a.m, 1, false, 1.0};
  return opnorm(MatC(represent_reduced(a, theta, s)));
}

// Largest entry of (A - B) over columns on interior modes (||r||_inf <= M - band).
inline double interior_residual(const MatC& a, const MatC& b, const TruncationSpec& s, int band) {
  VecR w = interior_mask(s, band);
  double worst = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c)
    if (w(c) != 0.0) worst = std::max(worst, (a.col(c) - b.col(c)).cwiseAbs().maxCoeff());
  return worst;
}

// [D, pi(a)] against (1/2 pi i) sum_k gamma^k pi(delta_k a): largest entry of the difference
// over interior columns of an undoubled spec.
inline double commutator_identity_residual(const ModeElement& a, const SkewMatrix& theta, const TruncationSpec& s,
                                           const CliffordRep& rep, int band) {
  const MatC d = build_dirac(s, rep).matrix;
  const MatC pa = represent(a, theta, s).matrix;
  const long b = s.block();
  MatC rhs = MatC::Zero(s.dim(), s.dim());
  for (int k = 0; k < s.n; ++k) {
    const MatC pk = represent(derivation(a, k + 1), theta, s).matrix / (2.0 * kPi * kI);
    const MatC gk = kron(rep.gammas[k], MatC::Identity(s.m, s.m));
    for (long q = 0; q < s.num_modes(); ++q) rhs.middleRows(q * b, b) += gk * pk.middleRows(q * b, b);
  }
  return interior_residual(MatC(d * pa - pa * d), rhs, s, band);
}

}  // namespace ncindex
