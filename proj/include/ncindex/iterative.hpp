#pragma once

#include <algorithm>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include <arpack/arpack.hpp>

#include "ncindex/linalg.hpp"

namespace ncindex {

using MatVec = std::function<void(const cplx* in, cplx* out)>;

// Implicitly restarted Arnoldi (ARPACK) for a Hermitian operator given by its
// action. which: "LR" (largest real part), "SR", "LM", "SM". Returns Ritz
// values (real parts, ascending) and vectors.
inline EigenPairs arnoldi_hermitian(const MatVec& op, long n, int nev, const char* which, double tol = 1e-12,
                                    int max_iter = 20000) {
  if (nev >= n - 1) throw std::invalid_argument("arnoldi_hermitian: too many eigenvalues requested for dimension");
  // ARPACK keeps its iteration state in static storage
  static std::mutex arpack_lock;
  std::lock_guard<std::mutex> guard(arpack_lock);
  a_int ido = 0, info = 0;
  const a_int N = static_cast<a_int>(n);
  const a_int ncv = static_cast<a_int>(std::min<long>(n, std::max(2 * nev + 1, nev + 20)));
  std::vector<cplx> resid(static_cast<size_t>(n)), v(static_cast<size_t>(n * ncv)), workd(3 * static_cast<size_t>(n));
  const a_int lworkl = 3 * ncv * ncv + 5 * ncv;
  std::vector<cplx> workl(static_cast<size_t>(lworkl));
  std::vector<double> rwork(static_cast<size_t>(ncv));
  a_int iparam[11] = {0}, ipntr[14] = {0};
  iparam[0] = 1;
  iparam[2] = max_iter;
  iparam[6] = 1;
  // deterministic start vector
  for (long i = 0; i < n; ++i) resid[i] = cplx(1.0 + 0.37 * std::sin(0.7 * i), 0.23 * std::cos(1.3 * i));
  info = 1;
  auto C = [](cplx* p) { return reinterpret_cast<_Complex double*>(p); };
  while (true) {
    arpack::internal::znaupd_c(&ido, "I", N, which, nev, tol, C(resid.data()), ncv, C(v.data()), N, iparam, ipntr,
                               C(workd.data()), C(workl.data()), lworkl, rwork.data(), &info);
    if (ido == -1 || ido == 1)
      op(&workd[ipntr[0] - 1], &workd[ipntr[1] - 1]);
    else
      break;
  }
  if (info < 0) throw std::runtime_error("znaupd failed, info=" + std::to_string(info));
  std::vector<a_int> select(static_cast<size_t>(ncv));
  std::vector<cplx> d(static_cast<size_t>(nev + 1)), z(static_cast<size_t>(n * nev)), workev(2 * static_cast<size_t>(ncv));
  cplx sigma = 0.0;
  a_int ierr = 0;
  arpack::internal::zneupd_c(1, "A", select.data(), C(d.data()), C(z.data()), N, *reinterpret_cast<_Complex double*>(&sigma),
                             C(workev.data()), "I", N, which, nev, tol, C(resid.data()), ncv, C(v.data()), N, iparam,
                             ipntr, C(workd.data()), C(workl.data()), lworkl, rwork.data(), &ierr);
  if (ierr != 0) throw std::runtime_error("zneupd failed, info=" + std::to_string(ierr));
  const int nconv = static_cast<int>(iparam[4]);
  std::vector<int> order(static_cast<size_t>(nconv));
  for (int i = 0; i < nconv; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) { return d[a].real() < d[b].real(); });
  EigenPairs out;
  out.values.resize(nconv);
  out.vectors.resize(n, nconv);
  for (int j = 0; j < nconv; ++j) {
    out.values(j) = d[order[j]].real();
    out.vectors.col(j) = Eigen::Map<const VecC>(&z[static_cast<size_t>(order[j]) * n], n);
  }
  return out;
}

// nev smallest eigenpairs of a positive semidefinite operator with spectrum in
// [0, upper]: run on upper - A and map back.
inline EigenPairs lowest_psd(const MatVec& op, long n, int nev, double upper, double tol = 1e-12) {
  MatVec shifted = [&](const cplx* in, cplx* out) {
    op(in, out);
    for (long i = 0; i < n; ++i) out[i] = upper * in[i] - out[i];
  };
  EigenPairs e = arnoldi_hermitian(shifted, n, nev, "LR", tol);
  EigenPairs r;
  const int k = static_cast<int>(e.values.size());
  r.values.resize(k);
  r.vectors.resize(n, k);
  for (int j = 0; j < k; ++j) {
    r.values(j) = upper - e.values(k - 1 - j);
    r.vectors.col(j) = e.vectors.col(k - 1 - j);
  }
  return r;
}

inline double largest_eigenvalue(const MatVec& op, long n, double tol = 1e-10) {
  EigenPairs e = arnoldi_hermitian(op, n, 1, "LR", tol);
  return e.values(e.values.size() - 1);
}

}  // namespace ncindex
