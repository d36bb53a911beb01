#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include <Eigen/Dense>

namespace ncindex {

using cplx = std::complex<double>;
using MatC = Eigen::MatrixXcd;
using VecC = Eigen::VectorXcd;
using MatR = Eigen::MatrixXd;
using VecR = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

struct EigenPairs {
  VecR values;  // ascending
  MatC vectors;
};

struct SvdResult {
  VecR values;  // descending
  MatC u;
  MatC vt;
};

namespace detail {
inline void check_info(lapack_int info, const char* what) {
  if (info != 0) throw std::runtime_error(std::string(what) + " failed, info=" + std::to_string(info));
}
}  // namespace detail

// Full Hermitian eigendecomposition (divide and conquer).
inline EigenPairs eigh(const MatC& a, bool vectors = true) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  if (a.cols() != a.rows()) throw std::invalid_argument("eigh: matrix not square");
  EigenPairs r;
  r.values.resize(n);
  if (n == 0) return r;
  MatC w = a;
  lapack_int info = LAPACKE_zheevd(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'U', n, w.data(), n, r.values.data());
  detail::check_info(info, "zheevd");
  if (vectors) r.vectors = std::move(w);
  return r;
}

inline VecR eigvalsh(const MatC& a) { return eigh(a, false).values; }

// Eigenpairs with eigenvalues in the half-open interval (lo, hi].
inline EigenPairs eigh_window(const MatC& a, double lo, double hi, bool vectors = true) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  EigenPairs r;
  if (n == 0) return r;
  MatC w = a;
  VecR vals(n);
  MatC z(vectors ? n : 1, vectors ? n : 1);
  std::vector<lapack_int> isuppz(2 * static_cast<size_t>(n));
  lapack_int found = 0;
  lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'V', 'U', n, w.data(), n, lo, hi, 0, 0,
                                   0.0, &found, vals.data(), z.data(), vectors ? n : 1, isuppz.data());
  detail::check_info(info, "zheevr");
  r.values = vals.head(found);
  if (vectors) r.vectors = z.leftCols(found);
  return r;
}

// Eigenpairs with indices il..iu (0-based, inclusive) in ascending order.
inline EigenPairs eigh_lowest(const MatC& a, int count, bool vectors = true) {
  const lapack_int n = static_cast<lapack_int>(a.rows());
  EigenPairs r;
  if (n == 0 || count <= 0) return r;
  if (count > n) count = static_cast<int>(n);
  MatC w = a;
  VecR vals(n);
  MatC z(vectors ? n : 1, vectors ? count : 1);
  std::vector<lapack_int> isuppz(2 * static_cast<size_t>(n));
  lapack_int found = 0;
  lapack_int info = LAPACKE_zheevr(LAPACK_COL_MAJOR, vectors ? 'V' : 'N', 'I', 'U', n, w.data(), n, 0.0, 0.0, 1,
                                   count, 0.0, &found, vals.data(), z.data(), vectors ? n : 1, isuppz.data());
  detail::check_info(info, "zheevr");
  r.values = vals.head(found);
  if (vectors) r.vectors = z.leftCols(found);
  return r;
}

inline SvdResult svd(const MatC& a, bool vectors = true) {
  const lapack_int m = static_cast<lapack_int>(a.rows());
  const lapack_int n = static_cast<lapack_int>(a.cols());
  const lapack_int k = std::min(m, n);
  SvdResult r;
  r.values.resize(k);
  if (k == 0) {
    r.u = MatC::Identity(m, m);
    r.vt = MatC::Identity(n, n);
    return r;
  }
  MatC w = a;
  if (vectors) {
    r.u.resize(m, m);
    r.vt.resize(n, n);
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'A', m, n, w.data(), m, r.values.data(), r.u.data(), m,
                                     r.vt.data(), n);
    detail::check_info(info, "zgesdd");
  } else {
    cplx du, dv;
    lapack_int info = LAPACKE_zgesdd(LAPACK_COL_MAJOR, 'N', m, n, w.data(), m, r.values.data(), &du, 1, &dv, 1);
    detail::check_info(info, "zgesdd");
  }
  return r;
}

inline VecR singular_values(const MatC& a) { return svd(a, false).values; }

inline double opnorm(const MatC& a) {
  if (a.size() == 0) return 0.0;
  return singular_values(a)(0);
}

inline double hermitian_residual(const MatC& a) { return (a - a.adjoint()).cwiseAbs().maxCoeff(); }

inline MatC kron(const MatC& a, const MatC& b) {
  MatC r(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) r.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return r;
}

}  // namespace ncindex
