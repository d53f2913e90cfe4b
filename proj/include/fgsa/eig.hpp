#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

namespace fgsa {

/** Eigenpairs of a real symmetric matrix, eigenvalues sorted descending. */
struct SymEig {
  Eigen::VectorXd values;
  Eigen::MatrixXd vectors;  // column i pairs with values(i)
};

/** Full symmetric eigendecomposition (LAPACK dsyevd), descending order. */
inline SymEig sym_eig_descending(Eigen::MatrixXd A) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (n == 0 || A.cols() != A.rows()) throw std::invalid_argument("sym_eig: matrix must be square");
  Eigen::VectorXd w(n);
  const lapack_int info =
      LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, A.data(), n, w.data());
  if (info != 0)
    throw std::runtime_error("sym_eig: dsyevd failed with info=" + std::to_string(info));
  SymEig out;
  out.values = w.reverse();
  out.vectors.resize(n, n);
  for (lapack_int i = 0; i < n; ++i) out.vectors.col(i) = A.col(n - 1 - i);
  return out;
}

/** Largest m eigenpairs (LAPACK dsyevr by index range), descending order. */
inline SymEig sym_eig_top(Eigen::MatrixXd A, int m) {
  const lapack_int n = static_cast<lapack_int>(A.rows());
  if (n == 0 || A.cols() != A.rows()) throw std::invalid_argument("sym_eig: matrix must be square");
  if (m < 1 || m > n) throw std::invalid_argument("sym_eig_top: m out of range");
  Eigen::VectorXd w(n);
  Eigen::MatrixXd z(n, m);
  std::vector<lapack_int> isuppz(2 * static_cast<std::size_t>(m));
  lapack_int found = 0;
  const lapack_int info = LAPACKE_dsyevr(
      LAPACK_COL_MAJOR, 'V', 'I', 'L', n, A.data(), n, 0.0, 0.0,
      static_cast<lapack_int>(n - m + 1), n, 0.0, &found, w.data(), z.data(), n, isuppz.data());
  if (info != 0)
    throw std::runtime_error("sym_eig_top: dsyevr failed with info=" + std::to_string(info));
  if (found != m) throw std::runtime_error("sym_eig_top: eigensolver returned fewer pairs than requested");
  SymEig out;
  out.values = w.head(m).reverse();
  out.vectors.resize(n, m);
  for (int i = 0; i < m; ++i) out.vectors.col(i) = z.col(m - 1 - i);
  return out;
}

}  // namespace fgsa
