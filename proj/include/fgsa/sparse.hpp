#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

namespace fgsa {

/** Compressed sparse row matrix (square, assembled from summed triplets). */
struct CsrMatrix {
  int n = 0;
  std::vector<int> row_ptr;  // size n + 1
  std::vector<int> col_idx;  // sorted within each row
  std::vector<double> values;

  Eigen::VectorXd multiply(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = row_ptr[static_cast<std::size_t>(i)];
           k < row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
        acc += values[static_cast<std::size_t>(k)] * x(col_idx[static_cast<std::size_t>(k)]);
      y(i) = acc;
    }
    return y;
  }
};

struct Triplet {
  int row, col;
  double value;
};

/** Build CSR from triplets; duplicate entries are summed. */
inline CsrMatrix csr_from_triplets(int n, std::vector<Triplet> triplets) {
  if (n <= 0) throw std::invalid_argument("csr_from_triplets: need n > 0");
  for (const auto& t : triplets)
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
      throw std::invalid_argument("csr_from_triplets: index out of range");
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return std::pair(a.row, a.col) < std::pair(b.row, b.col);
  });

  CsrMatrix m;
  m.n = n;
  m.row_ptr.assign(static_cast<std::size_t>(n) + 1, 0);
  for (std::size_t k = 0; k < triplets.size();) {
    std::size_t e = k + 1;
    double acc = triplets[k].value;
    while (e < triplets.size() && triplets[e].row == triplets[k].row &&
           triplets[e].col == triplets[k].col) {
      acc += triplets[e].value;
      ++e;
    }
    m.col_idx.push_back(triplets[k].col);
    m.values.push_back(acc);
    ++m.row_ptr[static_cast<std::size_t>(triplets[k].row) + 1];
    k = e;
  }
  for (int i = 0; i < n; ++i)
    m.row_ptr[static_cast<std::size_t>(i) + 1] += m.row_ptr[static_cast<std::size_t>(i)];
  return m;
}

/**
 * Zero-fill incomplete Cholesky factor of a symmetric positive definite CSR
 * matrix (lower-triangle pattern of A). If a pivot fails, the factorization
 * restarts with a progressively larger diagonal shift; the factor then
 * preconditions the unshifted matrix.
 */
class IncompleteCholesky {
 public:
  explicit IncompleteCholesky(const CsrMatrix& a) {
    n_ = a.n;
    // Lower-triangle pattern (column-sorted within rows, diagonal last).
    row_ptr_.assign(static_cast<std::size_t>(n_) + 1, 0);
    for (int i = 0; i < n_; ++i) {
      for (int k = a.row_ptr[static_cast<std::size_t>(i)];
           k < a.row_ptr[static_cast<std::size_t>(i) + 1]; ++k)
        if (a.col_idx[static_cast<std::size_t>(k)] <= i) {
          col_idx_.push_back(a.col_idx[static_cast<std::size_t>(k)]);
          base_.push_back(a.values[static_cast<std::size_t>(k)]);
        }
      row_ptr_[static_cast<std::size_t>(i) + 1] = static_cast<int>(col_idx_.size());
    }
    diag_pos_.resize(static_cast<std::size_t>(n_));
    for (int i = 0; i < n_; ++i) {
      const int last = row_ptr_[static_cast<std::size_t>(i) + 1] - 1;
      if (last < row_ptr_[static_cast<std::size_t>(i)] ||
          col_idx_[static_cast<std::size_t>(last)] != i)
        throw std::invalid_argument("IncompleteCholesky: missing diagonal entry");
      diag_pos_[static_cast<std::size_t>(i)] = last;
    }

    double shift = 0.0;
    for (int attempt = 0; attempt < 12; ++attempt) {
      if (factorize(shift)) return;
      shift = shift == 0.0 ? 1e-3 : shift * 4.0;
    }
    throw std::runtime_error("IncompleteCholesky: factorization failed after diagonal shifts");
  }

  /** z = (L L^T)^{-1} r. */
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& r) const {
    Eigen::VectorXd z(n_);
    for (int i = 0; i < n_; ++i) {  // forward substitution
      double acc = r(i);
      int k = row_ptr_[static_cast<std::size_t>(i)];
      for (; col_idx_[static_cast<std::size_t>(k)] < i; ++k)
        acc -= vals_[static_cast<std::size_t>(k)] * z(col_idx_[static_cast<std::size_t>(k)]);
      z(i) = acc / vals_[static_cast<std::size_t>(k)];
    }
    for (int i = n_ - 1; i >= 0; --i) {  // transpose solve, column-oriented
      z(i) /= vals_[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(i)])];
      const double zi = z(i);
      for (int k = row_ptr_[static_cast<std::size_t>(i)];
           k < diag_pos_[static_cast<std::size_t>(i)]; ++k)
        z(col_idx_[static_cast<std::size_t>(k)]) -= vals_[static_cast<std::size_t>(k)] * zi;
    }
    return z;
  }

 private:
  bool factorize(double shift) {
    vals_ = base_;
    if (shift > 0.0)
      for (int i = 0; i < n_; ++i)
        vals_[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(i)])] *= 1.0 + shift;
    for (int i = 0; i < n_; ++i) {
      for (int ki = row_ptr_[static_cast<std::size_t>(i)];
           ki < row_ptr_[static_cast<std::size_t>(i) + 1]; ++ki) {
        const int j = col_idx_[static_cast<std::size_t>(ki)];
        // Dot of the sparse rows i and j over columns < j.
        double acc = vals_[static_cast<std::size_t>(ki)];
        int pi = row_ptr_[static_cast<std::size_t>(i)];
        int pj = row_ptr_[static_cast<std::size_t>(j)];
        while (pi < row_ptr_[static_cast<std::size_t>(i) + 1] &&
               pj < row_ptr_[static_cast<std::size_t>(j) + 1]) {
          const int ci = col_idx_[static_cast<std::size_t>(pi)];
          const int cj = col_idx_[static_cast<std::size_t>(pj)];
          if (ci >= j || cj >= j) break;
          if (ci == cj) {
            acc -= vals_[static_cast<std::size_t>(pi)] * vals_[static_cast<std::size_t>(pj)];
            ++pi;
            ++pj;
          } else if (ci < cj) {
            ++pi;
          } else {
            ++pj;
          }
        }
        if (j < i) {
          vals_[static_cast<std::size_t>(ki)] =
              acc / vals_[static_cast<std::size_t>(diag_pos_[static_cast<std::size_t>(j)])];
        } else {
          if (!(acc > 0.0)) return false;
          vals_[static_cast<std::size_t>(ki)] = std::sqrt(acc);
        }
      }
    }
    return true;
  }

  int n_ = 0;
  std::vector<int> row_ptr_, col_idx_, diag_pos_;
  std::vector<double> base_, vals_;
};

struct PcgResult {
  Eigen::VectorXd x;
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

/**
 * Preconditioned conjugate gradients for SPD systems, stopping at
 * ||b - A x|| <= rel_tol ||b||. Deterministic for fixed inputs.
 */
inline PcgResult pcg_solve(const CsrMatrix& a, const IncompleteCholesky& precond,
                           const Eigen::Ref<const Eigen::VectorXd>& b, double rel_tol = 1e-10,
                           int max_iter = 0) {
  if (b.size() != a.n) throw std::invalid_argument("pcg_solve: dimension mismatch");
  if (max_iter <= 0) max_iter = 20 * a.n + 100;

  PcgResult out;
  out.x = Eigen::VectorXd::Zero(a.n);
  const double b_norm = b.norm();
  if (b_norm == 0.0) {
    out.converged = true;
    return out;
  }

  Eigen::VectorXd r = b;
  Eigen::VectorXd z = precond.apply(r);
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 0; it < max_iter; ++it) {
    const Eigen::VectorXd ap = a.multiply(p);
    const double pap = p.dot(ap);
    if (!(pap > 0.0)) break;  // loss of positive definiteness
    const double alpha = rz / pap;
    out.x += alpha * p;
    r -= alpha * ap;
    out.iterations = it + 1;
    out.relative_residual = r.norm() / b_norm;
    if (out.relative_residual <= rel_tol) {
      out.converged = true;
      return out;
    }
    z = precond.apply(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  out.relative_residual = (b - a.multiply(out.x)).norm() / b_norm;
  out.converged = out.relative_residual <= rel_tol;
  return out;
}

}  // namespace fgsa
