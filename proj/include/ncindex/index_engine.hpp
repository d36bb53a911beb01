#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ncindex/clifford.hpp"
#include "ncindex/covariant_rep.hpp"
#include "ncindex/iterative.hpp"
#include "ncindex/linalg.hpp"
#include "ncindex/mode_algebra.hpp"
#include "ncindex/moyal_continuum.hpp"

namespace ncindex {

struct IndexReport {
  std::string label;
  int cutoff = 0;
  long numerical_index = 0;
  double tau_index = 0.0;
  cplx local_value = std::numeric_limits<double>::quiet_NaN();
  std::optional<long> spectral_flow;
  long kernel_dim = 0;
  long cokernel_dim = 0;
  double kernel_weight = 0.0;
  double cokernel_weight = 0.0;
  double sv_gap = 0.0;
  double sv_max = 0.0;
  double smallest_sv = 0.0;
  bool cutoffs_agree = true;
  bool reliable = false;
  long runtime_ms = 0;
};

// A compressed operator whose row and column basis vectors each live on a
// single lattice mode; the radius vectors record ||r||_inf of that mode.
struct Compression {
  MatC T;
  SpMatC sparse;  // used instead of T when T is empty
  // matrix-free form, used when both T and sparse are empty
  long dim = 0;
  std::function<void(const VecC&, VecC&)> apply, apply_adjoint;
  std::vector<int> row_radius;
  std::vector<int> col_radius;
  int cutoff = 0;

  bool matrix_free() const { return T.size() == 0 && sparse.size() == 0; }
  long size() const { return T.size() ? T.rows() : (sparse.size() ? sparse.rows() : dim); }
  MatC dense() const {
    if (T.size()) return T;
    if (sparse.size()) return MatC(sparse);
    MatC out(dim, dim);
    VecC e = VecC::Zero(dim), y(dim);
    for (long j = 0; j < dim; ++j) {
      e(j) = 1.0;
      apply(e, y);
      out.col(j) = y;
      e(j) = 0.0;
    }
    return out;
  }
  void multiply(const VecC& x, VecC& y) const {
    if (T.size())
      y.noalias() = T * x;
    else if (sparse.size())
      y = sparse * x;
    else
      apply(x, y);
  }
  void multiply_adjoint(const VecC& x, VecC& y) const {
    if (T.size())
      y.noalias() = T.adjoint() * x;
    else if (sparse.size())
      y = sparse.adjoint() * x;
    else
      apply_adjoint(x, y);
  }
};

enum class ToeplitzVariant { massless, doubled };

// P pi^Theta(u) P on the range of P (massless Dirac, or the doubled massive
// operator with the unitization representation diag(pi(a) + lambda, lambda)).
inline Compression toeplitz_compress(const ModeElement& u, const SkewMatrix& theta, const TruncationSpec& spec,
                                     const CliffordRep& rep, ToeplitzVariant variant = ToeplitzVariant::massless) {
  if (u.n != spec.n || u.m != spec.m) throw std::invalid_argument("toeplitz_compress: element does not match spec");
  if (u.support_radius() > spec.M) throw std::domain_error("toeplitz_compress: support exceeds window");
  const bool massive = variant == ToeplitzVariant::doubled;
  const std::vector<MatC> basis = mode_projections(spec, rep, massive);
  const long nm = spec.num_modes();
  const int m = spec.m;
  std::vector<long> offset(static_cast<size_t>(nm) + 1, 0);
  for (long q = 0; q < nm; ++q) offset[q + 1] = offset[q] + basis[q].cols() * m;
  Compression c;
  c.cutoff = spec.M;
  c.T = MatC::Zero(offset[nm], offset[nm]);
  c.row_radius.resize(static_cast<size_t>(offset[nm]));
  for (long q = 0; q < nm; ++q)
    for (long i = offset[q]; i < offset[q + 1]; ++i) c.row_radius[i] = linf(spec.mode_at(q));
  c.col_radius = c.row_radius;

  MatC upper_sel;  // selects the first doubled component
  if (massive) {
    upper_sel = MatC::Zero(2 * spec.N, 2 * spec.N);
    upper_sel.topLeftCorner(spec.N, spec.N).setIdentity();
  }
  const bool deformed = theta.n() != 0 && !theta.is_zero();
  for (long s = 0; s < nm; ++s) {
    const Mode sm = spec.mode_at(s);
    const long ks = basis[s].cols();
    if (ks == 0) continue;
    for (const auto& kv : u.coeffs) {
      const long r = spec.index_of(mode_add(kv.first, sm));
      if (r < 0) continue;
      const long kr = basis[r].cols();
      if (kr == 0) continue;
      MatC overlap = massive ? MatC(basis[r].adjoint() * upper_sel * basis[s]) : MatC(basis[r].adjoint() * basis[s]);
      const cplx ph = deformed ? cocycle(theta, kv.first, sm) : cplx(1.0);
      c.T.block(offset[r], offset[s], kr * m, ks * m) += kron(overlap, ph * kv.second);
    }
  }
  if (u.scalar_unit != 0.0) c.T.diagonal().array() += u.scalar_unit;
  return c;
}

// e R_+ e from the +graded to the -graded part of the range of pi(e), completed by the
// identity on the complement of the range (index unchanged). For a projection without
// unit part the doubled structure reduces to pi(e) S pi(e) + 1 - pi(e) on
// Gamma-spinors x modes x C^m, with S(r) the -+ block of the phase in the upper component.
inline Compression even_compress(const ModeElement& e, const SkewMatrix& theta, const TruncationSpec& spec,
                                 const CliffordRep& rep) {
  if (!rep.has_grading()) throw std::domain_error("even_compress: grading required (n even)");
  if (!spec.doubled) throw std::invalid_argument("even_compress: doubled spec required");
  if (e.n != spec.n || e.m != spec.m) throw std::invalid_argument("even_compress: element does not match spec");
  if (e.support_radius() > spec.M) throw std::domain_error("even_compress: support exceeds window");
  Eigen::SelfAdjointEigenSolver<MatC> gs(rep.grading);
  const int half = spec.N / 2;
  MatC bminus = gs.eigenvectors().leftCols(half), bplus = gs.eigenvectors().rightCols(half);
  const long nm = spec.num_modes();
  const int m = spec.m;
  const long blk = static_cast<long>(half) * m;
  Compression c;
  c.cutoff = spec.M;
  c.row_radius.resize(static_cast<size_t>(nm * blk));
  for (long q = 0; q < nm; ++q)
    for (long i = 0; i < blk; ++i) c.row_radius[q * blk + i] = linf(spec.mode_at(q));
  c.col_radius = c.row_radius;

  auto mode_block = [&](long q) -> MatC {  // -+ block of the massive phase, upper component
    const Mode r = spec.mode_at(q);
    double r2 = 0.0;
    for (int x : r) r2 += static_cast<double>(x) * x;
    MatC g = dirac_symbol(rep, r, 1) / std::sqrt(r2 + spec.mass * spec.mass);
    return bminus.adjoint() * g * bplus;
  };

  if (e.scalar_unit != 0.0) {
    if (!e.coeffs.empty() || std::abs(e.scalar_unit - 1.0) > 1e-14)
      throw std::domain_error("even_compress: unitized inputs other than the unit are not supported");
    // e = 1: the full R_+ between the graded halves of the doubled space (invertible, mode-diagonal).
    c.T = MatC::Zero(nm * 2 * blk, nm * 2 * blk);
    c.row_radius.assign(static_cast<size_t>(nm * 2 * blk), 0);
    for (long q = 0; q < nm; ++q) {
      const Mode r = spec.mode_at(q);
      double r2 = 0.0;
      for (int x : r) r2 += static_cast<double>(x) * x;
      MatC g = dirac_symbol(rep, r, 1);
      MatC D = MatC::Zero(2 * spec.N, 2 * spec.N);
      D.topLeftCorner(spec.N, spec.N) = g;
      D.bottomRightCorner(spec.N, spec.N) = -g;
      D.topRightCorner(spec.N, spec.N).setIdentity();
      D.bottomLeftCorner(spec.N, spec.N).setIdentity();
      D.topRightCorner(spec.N, spec.N) *= spec.mass;
      D.bottomLeftCorner(spec.N, spec.N) *= spec.mass;
      D /= std::sqrt(r2 + spec.mass * spec.mass);
      MatC Pp = MatC::Zero(2 * spec.N, spec.N), Pm = MatC::Zero(2 * spec.N, spec.N);
      Pp.topRows(spec.N).leftCols(half) = bplus;
      Pp.bottomRows(spec.N).rightCols(half) = bminus;
      Pm.topRows(spec.N).leftCols(half) = bminus;
      Pm.bottomRows(spec.N).rightCols(half) = bplus;
      c.T.block(q * 2 * blk, q * 2 * blk, 2 * blk, 2 * blk) = kron(Pm.adjoint() * D * Pp, MatC::Identity(m, m));
      for (long i = 0; i < 2 * blk; ++i) c.row_radius[q * 2 * blk + i] = linf(r);
    }
    c.col_radius = c.row_radius;
    return c;
  }

  SpMatC pe = represent_reduced(e, theta, spec);  // modes x C^m
  // Spinor-expanded pi(e) and the mode-diagonal S, layout (mode, spinor, internal).
  auto expand_index = [&](long red, int sp) { return (red / m) * blk + static_cast<long>(sp) * m + red % m; };
  std::vector<Eigen::Triplet<cplx, long>> trip;
  trip.reserve(static_cast<size_t>(pe.nonZeros()) * half);
  for (long col = 0; col < pe.outerSize(); ++col)
    for (SpMatC::InnerIterator it(pe, col); it; ++it)
      for (int sp = 0; sp < half; ++sp) trip.emplace_back(expand_index(it.row(), sp), expand_index(col, sp), it.value());
  const long dim = nm * blk;
  SpMatC PE(dim, dim);
  PE.setFromTriplets(trip.begin(), trip.end());
  trip.clear();
  for (long q = 0; q < nm; ++q) {
    MatC b = kron(mode_block(q), MatC::Identity(m, m));
    for (long j = 0; j < blk; ++j)
      for (long i = 0; i < blk; ++i)
        if (b(i, j) != 0.0) trip.emplace_back(q * blk + i, q * blk + j, b(i, j));
  }
  auto S = std::make_shared<SpMatC>(dim, dim);
  S->setFromTriplets(trip.begin(), trip.end());
  auto P = std::make_shared<SpMatC>(std::move(PE));
  c.dim = dim;
  c.apply = [P, S](const VecC& x, VecC& y) {
    VecC px = *P * x;
    VecC spx = *S * px;
    y = *P * spx;
    y += x - px;
  };
  c.apply_adjoint = [P, S](const VecC& x, VecC& y) {  // pi(e) is self-adjoint
    VecC px = *P * x;
    VecC spx = S->adjoint() * px;
    y = *P * spx;
    y += x - px;
  };
  return c;
}

struct IndexOptions {
  double tol = 1e-5;       // relative singular-value threshold
  int band = -1;           // interior band width; default max(1, cutoff / 3)
  bool recheck = true;     // recompute at cutoff - 2
  long dense_limit = 500;  // larger compressions use Arnoldi on T*T and TT*
  int nev = 12;
};

namespace detail {

struct NullData {
  VecR small_values;  // singular values below threshold
  MatC right;         // right singular vectors (columns), matching small_values
  MatC left;
  double smallest_retained = std::numeric_limits<double>::infinity();
  double largest_discarded = 0.0;
  double smax = 0.0;
  double smin = 0.0;
};

inline NullData near_null(const Compression& c, double tol, long dense_limit, int nev) {
  NullData d;
  const long n = c.size();
  if (n == 0) return d;
  if (n <= dense_limit || (c.T.size() && c.T.rows() != c.T.cols())) {
    const MatC T = c.dense();
    SvdResult s = svd(T, true);
    d.smax = s.values(0);
    d.smin = s.values(s.values.size() - 1);
    d.largest_discarded = 1e-15 * d.smax;  // resolution floor
    const double thr = tol * d.smax;
    std::vector<Eigen::Index> small;
    for (Eigen::Index i = 0; i < s.values.size(); ++i) {
      if (s.values(i) < thr) {
        small.push_back(i);
        d.largest_discarded = std::max(d.largest_discarded, s.values(i));
      } else {
        d.smallest_retained = std::min(d.smallest_retained, s.values(i));
      }
    }
    // a non-square T has extra null directions on the larger side
    const Eigen::Index k = s.values.size();
    d.small_values.resize(static_cast<Eigen::Index>(small.size()));
    d.right.resize(T.cols(), static_cast<Eigen::Index>(small.size()) + (T.cols() - k));
    d.left.resize(T.rows(), static_cast<Eigen::Index>(small.size()) + (T.rows() - k));
    MatC v = s.vt.adjoint();
    for (size_t j = 0; j < small.size(); ++j) {
      d.small_values(static_cast<Eigen::Index>(j)) = s.values(small[j]);
      d.right.col(static_cast<Eigen::Index>(j)) = v.col(small[j]);
      d.left.col(static_cast<Eigen::Index>(j)) = s.u.col(small[j]);
    }
    for (Eigen::Index j = k; j < T.cols(); ++j) d.right.col(static_cast<Eigen::Index>(small.size()) + j - k) = v.col(j);
    for (Eigen::Index j = k; j < T.rows(); ++j) d.left.col(static_cast<Eigen::Index>(small.size()) + j - k) = s.u.col(j);
    return d;
  }
  VecC xin(n), z(n), yout(n);
  MatVec tt = [&](const cplx* in, cplx* out) {
    xin = Eigen::Map<const VecC>(in, n);
    c.multiply(xin, z);
    c.multiply_adjoint(z, yout);
    Eigen::Map<VecC>(out, n) = yout;
  };
  MatVec ttstar = [&](const cplx* in, cplx* out) {
    xin = Eigen::Map<const VecC>(in, n);
    c.multiply_adjoint(xin, z);
    c.multiply(z, yout);
    Eigen::Map<VecC>(out, n) = yout;
  };
  const double lmax = largest_eigenvalue(tt, n, 1e-4);
  d.smax = std::sqrt(std::max(lmax, 0.0));
  // Krylov runs resolve an exactly degenerate null space only partially: found null vectors
  // are shifted to lmax and the run repeated until nothing new appears.
  const double upper = 2.1 * lmax;
  const double resolution = std::sqrt(1e-13 * upper);
  const double thr = std::max(tol * d.smax, 10.0 * resolution);
  d.largest_discarded = resolution;
  auto null_space = [&](const MatVec& base, VecR& values, double& retained, double& lowest) {
    MatC V(n, 0);
    std::vector<double> vals;
    lowest = std::numeric_limits<double>::infinity();
    for (int round = 0; round < 64; ++round) {
      MatVec op = [&](const cplx* in, cplx* out) {
        base(in, out);
        if (V.cols() == 0) return;
        Eigen::Map<const VecC> x(in, n);
        Eigen::Map<VecC>(out, n) += lmax * (V * (V.adjoint() * x));
      };
      EigenPairs r = lowest_psd(op, n, nev, upper, 1e-13);
      if (r.values.size() == 0) throw std::runtime_error("near_null: Arnoldi did not converge");
      int added = 0;
      for (Eigen::Index i = 0; i < r.values.size(); ++i) {
        const double sv = std::sqrt(std::max(0.0, r.values(i)));
        if (round == 0) lowest = std::min(lowest, sv);
        if (sv >= thr) {
          retained = std::min(retained, sv);
          continue;
        }
        VecC v = r.vectors.col(i);
        if (V.cols()) v -= V * (V.adjoint() * v);
        const double nv = v.norm();
        if (nv < 1e-6) continue;
        V.conservativeResize(n, V.cols() + 1);
        V.col(V.cols() - 1) = v / nv;
        vals.push_back(sv);
        ++added;
      }
      if (added == 0) break;
      if (V.cols() > n / 4) throw std::runtime_error("near_null: null space too large for the iterative path");
    }
    values = Eigen::Map<const VecR>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    return V;
  };
  double lowest_r = 0.0, lowest_l = 0.0, retained_l = std::numeric_limits<double>::infinity();
  VecR lvals;
  d.right = null_space(tt, d.small_values, d.smallest_retained, lowest_r);
  d.left = null_space(ttstar, lvals, retained_l, lowest_l);
  d.smin = lowest_r;
  return d;
}

inline double interior_weight(const MatC& vecs, const std::vector<int>& radius, int limit) {
  double w = 0.0;
  for (Eigen::Index j = 0; j < vecs.cols(); ++j)
    for (Eigen::Index i = 0; i < vecs.rows(); ++i)
      if (radius[i] <= limit) w += std::norm(vecs(i, j));
  return w;
}

inline int default_band(int cutoff) { return std::max(1, cutoff / 3); }

}  // namespace detail

// Kernel and cokernel counted by the interior mass of near-null singular vectors;
// `build` regenerates the compression at another cutoff for the stability re-run.
inline IndexReport numerical_index(const std::function<Compression(int)>& build, int cutoff, const IndexOptions& opt = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  Compression c = build(cutoff);
  const int band = opt.band >= 0 ? opt.band : detail::default_band(cutoff);
  detail::NullData d = detail::near_null(c, opt.tol, opt.dense_limit, opt.nev);
  IndexReport rep;
  rep.cutoff = cutoff;
  rep.kernel_weight = detail::interior_weight(d.right, c.col_radius, cutoff - band);
  rep.cokernel_weight = detail::interior_weight(d.left, c.row_radius, cutoff - band);
  rep.kernel_dim = std::lround(rep.kernel_weight);
  rep.cokernel_dim = std::lround(rep.cokernel_weight);
  rep.numerical_index = rep.kernel_dim - rep.cokernel_dim;
  rep.tau_index = rep.kernel_weight - rep.cokernel_weight;
  rep.sv_max = d.smax;
  rep.smallest_sv = d.smin;
  // with nothing discarded the denominator is the resolution floor of the solver
  rep.sv_gap = d.smallest_retained / d.largest_discarded;
  if (opt.recheck && cutoff - 2 >= 1) {
    IndexOptions o2 = opt;
    o2.recheck = false;
    o2.band = opt.band >= 0 ? opt.band : detail::default_band(cutoff - 2);
    try {
      IndexReport r2 = numerical_index(build, cutoff - 2, o2);
      rep.cutoffs_agree = r2.numerical_index == rep.numerical_index;
    } catch (const std::domain_error&) {
      rep.cutoffs_agree = false;  // the smaller window cannot hold the support
    }
  }
  const double defect = std::max(std::abs(rep.kernel_weight - rep.kernel_dim), std::abs(rep.cokernel_weight - rep.cokernel_dim));
  rep.reliable = rep.sv_gap >= 10.0 && rep.cutoffs_agree && defect < 0.25;
  rep.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

inline IndexReport numerical_index(const Compression& c, const IndexOptions& opt = {}) {
  IndexOptions o = opt;
  o.recheck = false;
  return numerical_index([&](int) { return c; }, c.cutoff, o);
}

// Lattice counting trace: sum of the diagonal.
inline cplx dual_trace(const MatC& t) { return t.trace(); }
inline cplx dual_trace(const DenseOperator& t) { return t.matrix.trace(); }

// tau-hat(x-hat* x-hat) for x_r = a h(r), with x-hat = pi(a) h(D) on modes x C^m.
inline cplx hilbert_schmidt_trace(const ModeElement& a, const SkewMatrix& theta, const TruncationSpec& s,
                                  const std::function<cplx(const Mode&)>& h) {
  const MatC pa = MatC(represent_reduced(a, theta, s));
  VecC hd(pa.cols());
  for (long i = 0; i < hd.size(); ++i) hd(i) = h(s.mode_at(i / s.m));
  const MatC x = pa * hd.asDiagonal();
  return dual_trace(MatC(x.adjoint() * x));
}

// tau-hat((1 + D^2)^{-s/2} pi(a)) on an undoubled spec, with (1 + D^2)^{-s/2} by spectral calculus.
inline cplx zeta_trace(const ModeElement& a, const SkewMatrix& theta, const TruncationSpec& s, const CliffordRep& rep,
                       double sexp) {
  const MatC d = build_dirac(s, rep).matrix;
  EigenPairs ev = eigh(d);
  VecC w(ev.values.size());
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = std::pow(1.0 + ev.values(i) * ev.values(i), -0.5 * sexp);
  const MatC f = ev.vectors * w.asDiagonal() * ev.vectors.adjoint();
  return dual_trace(MatC(f * represent(a, theta, s).matrix));
}

// N tau(a) sum_r (1 + |r|^2)^{-s/2} over the window
inline cplx zeta_trace_prediction(const ModeElement& a, const TruncationSpec& s, double sexp) {
  double sum = 0.0;
  for (long q = 0; q < s.num_modes(); ++q) {
    double r2 = 0.0;
    for (int x : s.mode_at(q)) r2 += static_cast<double>(x) * x;
    sum += std::pow(1.0 + r2, -0.5 * sexp);
  }
  return static_cast<double>(s.N) * trace(a) * sum;
}

// Interior-restricted dual trace, sum over basis vectors with radius <= limit.
inline cplx dual_trace_interior(const MatC& t, const std::vector<int>& radius, int limit) {
  cplx s = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i)
    if (radius[i] <= limit) s += t(i, i);
  return s;
}

inline double tau_index(const Compression& c, const IndexOptions& opt = {}) { return numerical_index(c, opt).tau_index; }

// Two-term pairing Tr((P - P u* P u P)^k) - Tr((P - P u P u* P)^k), k = pairs, traced over interior modes.
// Both terms equal -P[P,u*][P,u]P and -P[P,u][P,u*]P respectively.
inline cplx chern_pairing_odd(const ModeElement& u, const SkewMatrix& theta, const TruncationSpec& spec,
                              const CliffordRep& rep, int pairs = -1, int band = -1, double tol = 1e-3) {
  if (spec.n % 2 == 0) throw std::domain_error("chern_pairing_odd: n must be odd");
  if (pairs < 0) pairs = (spec.n + 1) / 2;
  if (2 * pairs < spec.n + 1) throw std::invalid_argument("chern_pairing_odd: too few commutator pairs");
  if (unitarity_defect(u, theta) > tol) throw std::domain_error("chern_pairing_odd: input not invertible to tolerance");
  Compression c = toeplitz_compress(u, theta, spec, rep);
  const long d = c.T.rows();
  MatC A = MatC::Identity(d, d) - c.T.adjoint() * c.T;
  MatC B = MatC::Identity(d, d) - c.T * c.T.adjoint();
  MatC Ak = A, Bk = B;
  for (int k = 1; k < pairs; ++k) {
    Ak = Ak * A;
    Bk = Bk * B;
  }
  const int lim = spec.M - (band >= 0 ? band : detail::default_band(spec.M));
  return dual_trace_interior(Ak, c.col_radius, lim) - dual_trace_interior(Bk, c.row_radius, lim);
}

// (1/2) Tr(R Gamma [R, pi(e)]^count) over interior modes of the doubled massive model.
// Even counts vanish identically (Gamma anticommutes with R and the commutator); odd counts
// 2j+1 are multiplied by (-1)^(j+1) so every count returns the index of e R_+ e.
inline cplx chern_pairing_even(const ModeElement& e, const SkewMatrix& theta, const TruncationSpec& spec,
                               const CliffordRep& rep, int count = -1, int band = -1) {
  if (!rep.has_grading()) throw std::domain_error("chern_pairing_even: n must be even");
  if (!spec.doubled) throw std::invalid_argument("chern_pairing_even: doubled spec required");
  if (count < 0) count = spec.n + 1;
  if (count < 1) throw std::invalid_argument("chern_pairing_even: count must be positive");
  ModeElement body = e;
  body.scalar_unit = 0.0;  // the unit commutes with R
  MatC pe = MatC(represent_reduced(body, theta, spec));
  const long nm = spec.num_modes();
  const int m = spec.m, N = spec.N;
  const long blk = 2L * N * m;  // layout (mode, doubled, spinor, internal)
  const long dim = nm * blk;
  MatC R = MatC::Zero(dim, dim), PE = MatC::Zero(dim, dim);
  VecR G(dim);
  std::vector<int> radius(static_cast<size_t>(dim));
  MatC gm = kron(rep.grading, MatC::Identity(m, m));
  for (long q = 0; q < nm; ++q) {
    const Mode r = spec.mode_at(q);
    double r2 = 0.0;
    for (int x : r) r2 += static_cast<double>(x) * x;
    MatC g = dirac_symbol(rep, r, m);
    const long h = static_cast<long>(N) * m;
    MatC D = MatC::Zero(blk, blk);
    D.topLeftCorner(h, h) = g;
    D.bottomRightCorner(h, h) = -g;
    D.topRightCorner(h, h) = spec.mass * MatC::Identity(h, h);
    D.bottomLeftCorner(h, h) = spec.mass * MatC::Identity(h, h);
    R.block(q * blk, q * blk, blk, blk) = D / std::sqrt(r2 + spec.mass * spec.mass);
    for (long i = 0; i < h; ++i) {
      G(q * blk + i) = gm(i, i).real();
      G(q * blk + h + i) = -gm(i, i).real();
    }
    for (long i = 0; i < blk; ++i) radius[q * blk + i] = linf(r);
  }
  if ((gm - MatC(gm.diagonal().asDiagonal())).cwiseAbs().maxCoeff() > 1e-14)
    throw std::logic_error("chern_pairing_even: grading expected diagonal");
  for (long col = 0; col < nm * m; ++col)
    for (long row = 0; row < nm * m; ++row) {
      const cplx v = pe(row, col);
      if (v == 0.0) continue;
      const long rq = row / m, ri = row % m, cq = col / m, ci = col % m;
      for (int sp = 0; sp < N; ++sp) PE(rq * blk + sp * m + ri, cq * blk + sp * m + ci) = v;
    }
  MatC C = R * PE - PE * R;
  MatC half = C;
  for (int k = 1; k < count / 2; ++k) half = half * C;
  MatC left = R * G.cast<cplx>().asDiagonal();
  if (count / 2 > 0) left = left * half;
  if (count % 2 == 1) left = left * C;
  if (count / 2 == 0) half = MatC::Identity(dim, dim);
  const int lim = spec.M - (band >= 0 ? band : detail::default_band(spec.M));
  cplx s = 0.0;
  for (long i = 0; i < dim; ++i)
    if (radius[i] <= lim) s += left.row(i).dot(half.col(i).conjugate());
  const double sign = count % 2 == 0 ? 1.0 : (((count - 1) / 2) % 2 == 0 ? -1.0 : 1.0);
  return 0.5 * sign * s;
}

struct FlowOptions {
  std::vector<int> radius;  // per basis vector ||r||_inf; empty means every vector counts fully
  int limit = 0;            // interior: radius <= limit
  double zero_tol = 1e-8;   // eigenvalues this close to 0 at a grid point trigger refinement
  int max_depth = 14;
  double mass_tol = 0.15;   // allowed deviation of the unweighted crossing mass from an integer
};

struct FlowReport {
  long flow = 0;
  double weighted = 0.0;  // sum of interior-weighted crossings before rounding
  int crossings = 0;      // unweighted crossings (both directions)
  int intervals = 0;
  int refinements = 0;
};

// Signed count of eigenvalue crossings through 0 along (1 - t) D0 + t D1. Crossings from
// negative to nonnegative count -1, the reverse +1; each crossing is weighted by the interior
// mass of its eigenvector so that truncation-edge states drop out.
inline FlowReport spectral_flow(const MatC& D0, const MatC& D1, int steps, const FlowOptions& opt = {}) {
  if (D0.rows() != D1.rows() || D0.rows() != D0.cols() || D1.rows() != D1.cols())
    throw std::invalid_argument("spectral_flow: shape mismatch");
  if (steps < 1) throw std::invalid_argument("spectral_flow: steps must be positive");
  if (hermitian_residual(D0) > 1e-10 || hermitian_residual(D1) > 1e-10)
    throw std::invalid_argument("spectral_flow: endpoints must be Hermitian");
  const long dim = D0.rows();
  if (!opt.radius.empty() && static_cast<long>(opt.radius.size()) != dim)
    throw std::invalid_argument("spectral_flow: radius vector has wrong length");
  const MatC delta = D1 - D0;
  FlowReport rep;
  if (delta.cwiseAbs().maxCoeff() == 0.0) return rep;
  double speed = 0.0;
  if (dim <= 400) {
    speed = opnorm(delta);
  } else {
    MatVec dd = [&](const cplx* in, cplx* out) {
      Eigen::Map<const VecC> x(in, dim);
      VecC y = delta * x;
      Eigen::Map<VecC>(out, dim).noalias() = delta.adjoint() * y;
    };
    speed = 1.01 * std::sqrt(largest_eigenvalue(dd, dim, 1e-4));
  }

  auto weight = [&](const VecC& v) {
    if (opt.radius.empty()) return 1.0;
    double w = 0.0;
    for (long i = 0; i < dim; ++i)
      if (opt.radius[i] <= opt.limit) w += std::norm(v(i));
    return w;
  };
  struct Sample {
    double t = 0.0;
    double w = 0.0;  // half-width of the eigenvalue window
    EigenPairs eig;
  };
  auto sample_at = [&](double t, double w) {
    Sample smp;
    smp.t = t;
    smp.w = w;
    MatC h = D0 + t * delta;
    smp.eig = eigh_window(h, -w, w);
    return smp;
  };
  auto near_zero = [&](const Sample& smp) {
    for (Eigen::Index j = 0; j < smp.eig.values.size(); ++j)
      if (std::abs(smp.eig.values(j)) < opt.zero_tol) return true;
    return false;
  };

  const double dt = 1.0 / steps;
  Sample a = sample_at(0.0, 4.0 * speed * dt);
  if (near_zero(a)) throw std::domain_error("spectral_flow: D0 has an eigenvalue at 0");
  double total = 0.0;
  while (a.t < 1.0) {
    double h = std::min(dt, 1.0 - a.t);
    int depth = 0;
    while (true) {
      const double w = 4.0 * speed * h;
      if (a.w < w) a = sample_at(a.t, w);
      const bool last = a.t + h >= 1.0 - 1e-15;
      Sample b = sample_at(last ? 1.0 : a.t + h, w);
      bool retry = false;
      if (!last && near_zero(b)) {
        // move the grid point off the crossing (0 at t = 1 counts as nonnegative)
        h *= 0.618;
        retry = true;
      }
      double signed_w = 0.0, mass = 0.0;
      if (!retry && a.eig.values.size() > 0 && b.eig.values.size() > 0) {
        MatC ov = a.eig.vectors.adjoint() * b.eig.vectors;
        for (Eigen::Index i = 0; i < a.eig.values.size(); ++i) {
          const double la = a.eig.values(i);
          if (std::abs(la) >= 0.5 * w) continue;
          const double wa = weight(a.eig.vectors.col(i));
          for (Eigen::Index j = 0; j < b.eig.values.size(); ++j) {
            const double lb = last && std::abs(b.eig.values(j)) < opt.zero_tol ? 0.0 : b.eig.values(j);
            if ((la < 0.0) == (lb < 0.0)) continue;
            const double o = std::norm(ov(i, j));
            mass += o;
            signed_w += (la < 0.0 ? -1.0 : 1.0) * o * 0.5 * (wa + weight(b.eig.vectors.col(j)));
          }
        }
        if (std::abs(mass - std::round(mass)) > opt.mass_tol) {
          h *= 0.5;
          retry = true;
        }
      }
      if (retry) {
        ++rep.refinements;
        if (++depth > opt.max_depth) throw std::runtime_error("spectral_flow: unresolved crossing after maximal refinement");
        continue;
      }
      ++rep.intervals;
      rep.crossings += static_cast<int>(std::lround(mass));
      total += signed_w;
      a = std::move(b);
      break;
    }
  }
  rep.weighted = total;
  rep.flow = std::lround(total);
  return rep;
}

// Flow from D to pi(u)* D pi(u) for the massless Dirac operator on the truncation.
inline FlowReport dirac_conjugation_flow(const ModeElement& u, const SkewMatrix& theta, const TruncationSpec& spec,
                                         const CliffordRep& rep, int steps, int band = -1) {
  const MatC D = build_dirac(spec, rep).matrix;
  const MatC U = represent(u, theta, spec).matrix;
  // shift away from the zero mode of D so that both endpoints are invertible
  const MatC shift = 0.5 * MatC::Identity(D.rows(), D.cols());
  MatC D1 = U.adjoint() * (D + shift) * U;
  D1 = 0.5 * (D1 + D1.adjoint());
  FlowOptions o;
  o.radius = basis_radius(spec);
  o.limit = spec.M - (band >= 0 ? band : detail::default_band(spec.M));
  return spectral_flow(D + shift, D1, steps, o);
}

struct BottReport {
  IndexReport index;
  double gaussian_overlap = 0.0;
  double lowest_nonzero = 0.0;
  double clifford_residual = 0.0;  // dense path only: || K^2 - (D^2 + X^2 + Clifford cross terms) ||
};

namespace detail {

inline MatC bott_grading(const DoubledPair& p) {
  MatC g = MatC::Identity(p.gamma[0].rows(), p.gamma[0].cols());
  for (size_t k = 0; k < p.gamma.size(); ++k) g = g * p.gamma_hat[k] * p.gamma[k];
  return g;
}

inline VecC gaussian_vector(const GridSpec& g) {
  VecC v = sample(g, [](const std::vector<double>& t) {
    double r2 = 0.0;
    for (double x : t) r2 += x * x;
    return cplx(std::exp(-0.5 * r2), 0.0);
  });
  return v / v.norm();
}

}  // namespace detail

// K = sum_k gamma^k D_k + i sum_k gamma-hat^k X_k on grid (x) C^{2^n}, layout spinor outermost.
inline MatC bott_operator(const GridSpec& g, const std::vector<MatC>& X, const std::vector<MatC>& D) {
  const DoubledPair p = doubled_pair(g.n);
  const long T = g.total();
  MatC K = MatC::Zero(p.gamma[0].rows() * T, p.gamma[0].rows() * T);
  for (int k = 0; k < g.n; ++k) K += kron(p.gamma[k], D[k]) + kron(kI * p.gamma_hat[k], X[k]);
  return K;
}

// Indicator of grid points with |t_k| <= L/2 on every axis, repeated over the spinor
// factor (outermost). The periodic grid forces an opposite-graded partner zero mode at
// the wrap point t = +-L, which this mask excludes.
inline Eigen::VectorXd bott_interior_mask(const GridSpec& g, long dim) {
  const long T = g.total();
  Eigen::VectorXd m(dim);
  for (long q = 0; q < dim; ++q) {
    const std::vector<int> j = g.unflatten(q % T);
    bool inside = true;
    for (int k = 0; k < g.n; ++k) inside = inside && std::abs(g.coord(j[k])) <= 0.5 * g.L;
    m(q) = inside ? 1.0 : 0.0;
  }
  return m;
}

inline double bott_interior_weight(const GridSpec& g, const VecC& v) {
  return bott_interior_mask(g, v.size()).dot(v.cwiseAbs2());
}

// Dense path: lowest eigenpairs of K^2, kernel graded by prod gamma-hat^k gamma^k and
// weighted by interior mass. A nonzero Theta replaces X by the warped generators.
inline BottReport bott_normalization_dense(const GridSpec& g, const SkewMatrix& theta = SkewMatrix(), double tol = 1e-4) {
  g.validate();
  const auto t0 = std::chrono::steady_clock::now();
  GridOperators ops = grid_operators(g);
  std::vector<MatC> X = ops.X;
  if (theta.n() != 0 && !theta.is_zero()) X = warped_generators(theta, ops.X, ops.D);
  const MatC K = bott_operator(g, X, ops.D);
  const long dim = K.rows();
  const int nev = static_cast<int>(std::min<long>(8, dim - 2));
  EigenPairs low;
  if (dim <= 1500) {
    low = eigh_lowest(K * K, nev);
  } else {
    MatVec sq = [&](const cplx* in, cplx* out) {
      Eigen::Map<const VecC> x(in, dim);
      VecC y = K * x;
      Eigen::Map<VecC>(out, dim).noalias() = K * y;
    };
    const double top = largest_eigenvalue(sq, dim, 1e-4);
    low = lowest_psd(sq, dim, nev, 1.05 * top, 1e-12);
  }
  const DoubledPair p = doubled_pair(g.n);
  const MatC G = kron(detail::bott_grading(p), MatC::Identity(g.total(), g.total()));
  std::vector<Eigen::Index> ker;
  BottReport rep;
  rep.lowest_nonzero = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < low.values.size(); ++j) {
    if (low.values(j) < tol)
      ker.push_back(j);
    else
      rep.lowest_nonzero = std::min(rep.lowest_nonzero, low.values(j));
  }
  MatC kv(dim, static_cast<Eigen::Index>(ker.size()));
  for (size_t j = 0; j < ker.size(); ++j) kv.col(static_cast<Eigen::Index>(j)) = low.vectors.col(ker[j]);
  double wplus = 0.0, wminus = 0.0;
  if (kv.cols() > 0) {
    // split the kernel by grading, then diagonalize the interior-mass form in each block
    EigenPairs gs = eigh(MatC(kv.adjoint() * G * kv));
    const VecC gauss = detail::gaussian_vector(g);
    const long T = g.total();
    const long S = dim / T;
    const VecC mask = bott_interior_mask(g, dim).cast<cplx>();
    double best = -1.0;
    for (int side = 0; side < 2; ++side) {
      std::vector<Eigen::Index> cols;
      for (Eigen::Index j = 0; j < gs.values.size(); ++j)
        if ((gs.values(j) > 0) == (side == 0)) cols.push_back(j);
      if (cols.empty()) continue;
      MatC block(dim, static_cast<Eigen::Index>(cols.size()));
      for (size_t j = 0; j < cols.size(); ++j) block.col(static_cast<Eigen::Index>(j)) = kv * gs.vectors.col(cols[j]);
      const EigenPairs ms = eigh(MatC(block.adjoint() * mask.asDiagonal() * block));
      (side == 0 ? wplus : wminus) += ms.values.sum();
      const Eigen::Index top = ms.values.size() - 1;
      if (ms.values(top) > best) {
        best = ms.values(top);
        const VecC v = block * ms.vectors.col(top);
        double ov = 0.0;
        for (long sp = 0; sp < S; ++sp) ov += std::norm(gauss.dot(v.segment(sp * T, T)));
        rep.gaussian_overlap = ov;
      }
    }
  }
  rep.index.label = "bott";
  rep.index.kernel_weight = wplus;
  rep.index.cokernel_weight = wminus;
  rep.index.kernel_dim = std::lround(wplus);
  rep.index.cokernel_dim = std::lround(wminus);
  rep.index.numerical_index = rep.index.kernel_dim - rep.index.cokernel_dim;
  rep.index.tau_index = wplus - wminus;
  rep.index.sv_gap = rep.lowest_nonzero / std::max(low.values.size() ? std::abs(low.values(0)) : 0.0, 1e-300);
  rep.index.reliable = rep.lowest_nonzero > 100.0 * tol && std::abs(wplus + wminus - std::lround(wplus + wminus)) < 0.05;
  rep.clifford_residual = std::numeric_limits<double>::quiet_NaN();
  if (dim <= 1024 && (theta.n() == 0 || theta.is_zero())) {
    // K^2 minus the oscillator part: what remains is the bounded Clifford term
    MatC osc = MatC::Zero(dim, dim);
    const MatC idS = MatC::Identity(p.gamma[0].rows(), p.gamma[0].rows());
    for (int k = 0; k < g.n; ++k) {
      osc += kron(idS, MatC(ops.D[k] * ops.D[k] + X[k] * X[k]));
      for (int l = 0; l < g.n; ++l)
        osc += kron(MatC(kI * p.gamma[k] * p.gamma_hat[l]), MatC(ops.D[k] * X[l])) +
               kron(MatC(kI * p.gamma_hat[l] * p.gamma[k]), MatC(X[l] * ops.D[k]));
    }
    for (int k = 0; k < g.n; ++k)
      for (int l = k + 1; l < g.n; ++l) {
        osc += kron(MatC(p.gamma[k] * p.gamma[l] + p.gamma[l] * p.gamma[k]), MatC(ops.D[k] * ops.D[l]));
        osc -= kron(MatC(p.gamma_hat[k] * p.gamma_hat[l] + p.gamma_hat[l] * p.gamma_hat[k]), MatC(X[k] * X[l]));
      }
    rep.clifford_residual = (K * K - osc).cwiseAbs().maxCoeff();
  }
  rep.index.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

// Separable path: on each joint eigenspace of the commuting involutions gamma^k gamma-hat^k
// (signs s_k), K^2 is the Kronecker sum of the one-dimensional operators D^2 + X^2 + i s_k [D, X].
inline BottReport bott_normalization(int n, const GridSpec& g, double tol = 1e-4) {
  if (g.n != n) throw std::invalid_argument("bott_normalization: grid dimension mismatch");
  g.validate();
  const auto t0 = std::chrono::steady_clock::now();
  GridSpec g1{1, g.L, g.points};
  const MatC x = axis_position(g1), d = axis_momentum(g1);
  const MatC h = d * d + x * x, c = d * x - x * d;
  const EigenPairs branch[2] = {eigh(MatC(h - kI * c)), eigh(MatC(h + kI * c))};  // s = -1, +1
  const DoubledPair p = doubled_pair(n);
  const MatC G = detail::bott_grading(p);
  const MatC idS = MatC::Identity(G.rows(), G.cols());
  const VecC gauss1 = detail::gaussian_vector(g1);
  BottReport rep;
  rep.lowest_nonzero = std::numeric_limits<double>::infinity();
  double wplus = 0.0, wminus = 0.0, best = -1.0;
  for (int pattern = 0; pattern < (1 << n); ++pattern) {
    MatC proj = idS;
    for (int k = 0; k < n; ++k) {
      const double s = (pattern >> k) & 1 ? 1.0 : -1.0;
      proj = proj * (0.5 * (idS + s * p.gamma[k] * p.gamma_hat[k]));
    }
    const EigenPairs sub = eigh(proj);
    if (sub.values(sub.values.size() - 1) < 0.5) continue;
    const VecC chi = sub.vectors.col(sub.vectors.cols() - 1);
    const double grade = (chi.adjoint() * G * chi)(0, 0).real();
    // enumerate products of one-dimensional levels below the kernel threshold and the first excited level
    std::vector<int> level(n, 0);
    while (true) {
      double lam = 0.0, w = 1.0, ov = 1.0;
      for (int k = 0; k < n; ++k) {
        const EigenPairs& b = branch[(pattern >> k) & 1];
        lam += b.values(level[k]);
        const VecC v = b.vectors.col(level[k]);
        w *= bott_interior_weight(g1, v);
        ov *= std::norm(gauss1.dot(v));
      }
      if (lam < tol) {
        (grade > 0 ? wplus : wminus) += w;
        if (w > best) {
          best = w;
          rep.gaussian_overlap = ov;
        }
      } else {
        rep.lowest_nonzero = std::min(rep.lowest_nonzero, lam);
      }
      int k = 0;
      while (k < n && level[k] == 2) level[k++] = 0;
      if (k == n) break;
      ++level[k];
    }
  }
  rep.index.label = "bott";
  rep.index.kernel_weight = wplus;
  rep.index.cokernel_weight = wminus;
  rep.index.kernel_dim = std::lround(wplus);
  rep.index.cokernel_dim = std::lround(wminus);
  rep.index.numerical_index = rep.index.kernel_dim - rep.index.cokernel_dim;
  rep.index.tau_index = wplus - wminus;
  rep.index.reliable = rep.lowest_nonzero > 100.0 * tol && std::abs(wplus + wminus - std::lround(wplus + wminus)) < 0.05;
  rep.clifford_residual = std::numeric_limits<double>::quiet_NaN();
  rep.index.runtime_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - t0).count();
  return rep;
}

}  // namespace ncindex
