#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>

#include "fgsa/eig.hpp"
#include "fgsa/sparse.hpp"

TEST_CASE("sym_eig_descending solves a matrix with known spectrum") {
  // A = Q diag(5,2,-1) Q^T with a fixed rotation.
  Eigen::MatrixXd q(3, 3);
  q << 2.0 / 3.0, -2.0 / 3.0, 1.0 / 3.0,  //
      2.0 / 3.0, 1.0 / 3.0, -2.0 / 3.0,   //
      1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0;
  Eigen::VectorXd lam(3);
  lam << 5.0, 2.0, -1.0;
  const Eigen::MatrixXd a = q * lam.asDiagonal() * q.transpose();

  const fgsa::SymEig e = fgsa::sym_eig_descending(a);
  CHECK(e.values(0) == doctest::Approx(5.0).epsilon(1e-13));
  CHECK(e.values(1) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(e.values(2) == doctest::Approx(-1.0).epsilon(1e-13));
  for (int i = 0; i < 3; ++i) {
    const Eigen::VectorXd r = a * e.vectors.col(i) - e.values(i) * e.vectors.col(i);
    CHECK(r.norm() < 1e-12);
    CHECK(std::abs(e.vectors.col(i).norm() - 1.0) < 1e-13);
  }
  CHECK_THROWS_AS(fgsa::sym_eig_descending(Eigen::MatrixXd::Zero(2, 3)),
                  std::invalid_argument);
}

TEST_CASE("sym_eig_top returns the largest pairs of the full decomposition") {
  const int n = 40;
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    a(i, i) = 2.0;
    if (i + 1 < n) a(i, i + 1) = a(i + 1, i) = -1.0;
  }
  const fgsa::SymEig full = fgsa::sym_eig_descending(a);
  const fgsa::SymEig top = fgsa::sym_eig_top(a, 5);
  REQUIRE(top.values.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(top.values(i) == doctest::Approx(full.values(i)).epsilon(1e-12));
    // 1D Laplacian eigenvalues: 2 - 2 cos(k pi / (n+1)), largest at k = n.
    const double exact =
        2.0 - 2.0 * std::cos((n - i) * std::numbers::pi / (n + 1));
    CHECK(top.values(i) == doctest::Approx(exact).epsilon(1e-12));
    CHECK((a * top.vectors.col(i) - top.values(i) * top.vectors.col(i)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(fgsa::sym_eig_top(a, 0), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::sym_eig_top(a, n + 1), std::invalid_argument);
}

TEST_CASE("csr_from_triplets sums duplicates and validates indices") {
  const fgsa::CsrMatrix m = fgsa::csr_from_triplets(
      3, {{0, 0, 1.0}, {0, 0, 2.0}, {2, 1, -1.0}, {1, 1, 4.0}, {0, 2, 0.5}});
  Eigen::VectorXd x(3);
  x << 1.0, 2.0, 3.0;
  const Eigen::VectorXd y = m.multiply(x);
  CHECK(y(0) == doctest::Approx(3.0 * 1.0 + 0.5 * 3.0));
  CHECK(y(1) == doctest::Approx(8.0));
  CHECK(y(2) == doctest::Approx(-2.0));
  CHECK_THROWS_AS(fgsa::csr_from_triplets(2, {{0, 2, 1.0}}), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::csr_from_triplets(0, {}), std::invalid_argument);
}

namespace {

fgsa::CsrMatrix laplacian_1d(int n) {
  std::vector<fgsa::Triplet> trip;
  for (int i = 0; i < n; ++i) {
    trip.push_back({i, i, 2.0});
    if (i + 1 < n) {
      trip.push_back({i, i + 1, -1.0});
      trip.push_back({i + 1, i, -1.0});
    }
  }
  return fgsa::csr_from_triplets(n, std::move(trip));
}

}  // namespace

TEST_CASE("pcg with incomplete cholesky matches a dense solve") {
  const int n = 120;
  const fgsa::CsrMatrix a = laplacian_1d(n);
  const fgsa::IncompleteCholesky ic(a);

  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) b(i) = std::sin(0.1 * i) + 0.3;
  const fgsa::PcgResult res = fgsa::pcg_solve(a, ic, b, 1e-12);
  REQUIRE(res.converged);
  CHECK(res.relative_residual <= 1e-12);

  Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    dense(i, i) = 2.0;
    if (i + 1 < n) dense(i, i + 1) = dense(i + 1, i) = -1.0;
  }
  const Eigen::VectorXd x_ref = dense.ldlt().solve(b);
  CHECK((res.x - x_ref).norm() / x_ref.norm() < 1e-10);
}

TEST_CASE("incomplete cholesky is exact on tridiagonal patterns") {
  // Zero fill-in equals the true factor here, so one apply() solves exactly.
  const fgsa::CsrMatrix a = laplacian_1d(30);
  const fgsa::IncompleteCholesky ic(a);
  Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(30, -1.0, 1.0);
  const Eigen::VectorXd z = ic.apply(b);
  CHECK((a.multiply(z) - b).norm() < 1e-12);
}

TEST_CASE("pcg handles the zero right-hand side without iterating") {
  const fgsa::CsrMatrix a = laplacian_1d(10);
  const fgsa::IncompleteCholesky ic(a);
  const fgsa::PcgResult res = fgsa::pcg_solve(a, ic, Eigen::VectorXd::Zero(10));
  CHECK(res.converged);
  CHECK(res.iterations == 0);
  CHECK(res.x.norm() == 0.0);
  CHECK_THROWS_AS(fgsa::pcg_solve(a, ic, Eigen::VectorXd::Zero(11)), std::invalid_argument);
}

TEST_CASE("incomplete cholesky requires a stored diagonal") {
  // Pattern without (1,1): constructor must reject it.
  CHECK_THROWS_AS(fgsa::IncompleteCholesky(fgsa::csr_from_triplets(2, {{0, 0, 1.0}})),
                  std::invalid_argument);
}

TEST_CASE("negative diagonal defeats every shift and is reported") {
  // Multiplicative shifts cannot repair a negative pivot, so the constructor
  // must give up rather than hand back a NaN factor.
  const fgsa::CsrMatrix a = fgsa::csr_from_triplets(2, {{0, 0, 1.0}, {1, 1, -2.0}});
  CHECK_THROWS_AS(fgsa::IncompleteCholesky{a}, std::runtime_error);
}
