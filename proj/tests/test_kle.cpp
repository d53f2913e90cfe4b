#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <vector>

#include "fgsa/distributions.hpp"
#include "fgsa/kle.hpp"

namespace {

// Continuous-spectrum oracle for the kernel exp(-|x-y|/l) on [-a, a], c = 1/l:
// eigenvalues are 2c/(w^2 + c^2) where w solves tan(wa) = c/w (even modes) or
// tan(wa) = -w/c (odd modes), one root per branch of the tangent.
double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((flo < 0.0) == (fm < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> exponential_kernel_eigenvalues(double a, double c, int count) {
  const double pi = std::numbers::pi;
  std::vector<double> omegas;
  const double eps = 1e-9;
  for (int k = 0; static_cast<int>(omegas.size()) < count + 2; ++k) {
    if (k >= 1) {  // odd root in ((k-1/2) pi / a, k pi / a)
      omegas.push_back(bisect([&](double w) { return std::tan(w * a) + w / c; },
                              (k - 0.5) * pi / a + eps, k * pi / a - eps));
    }
    // even root in (k pi / a, (k+1/2) pi / a)
    omegas.push_back(bisect([&](double w) { return std::tan(w * a) - c / w; },
                            k * pi / a + eps, (k + 0.5) * pi / a - eps));
  }
  std::sort(omegas.begin(), omegas.end());
  std::vector<double> lambdas;
  for (int i = 0; i < count; ++i)
    lambdas.push_back(2.0 * c / (omegas[static_cast<std::size_t>(i)] * omegas[static_cast<std::size_t>(i)] + c * c));
  return lambdas;
}

}  // namespace

TEST_CASE("kernel route reproduces the exponential-kernel spectrum") {
  const auto exact = exponential_kernel_eigenvalues(1.0, 1.0, 6);
  const fgsa::SpatialGrid grid = fgsa::make_midpoint_grid(-1.0, 1.0, 400);
  const fgsa::KLExpansion kle = fgsa::kle_from_kernel(
      grid,
      [](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
        return std::exp(-std::abs(x(0) - y(0)));
      },
      8);

  CHECK(kle.trace == doctest::Approx(2.0).epsilon(1e-13));  // k(x,x) = 1 on |domain| = 2
  for (int i = 0; i < 6; ++i)
    CHECK(kle.eigenvalues(i) ==
          doctest::Approx(exact[static_cast<std::size_t>(i)]).epsilon(0.01));

  // Modes are orthonormal in the weighted inner product.
  for (int i = 0; i < 8; ++i)
    for (int j = i; j < 8; ++j) {
      const double ip = fgsa::inner_product(kle.modes.col(i), kle.modes.col(j), grid);
      CHECK(ip == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-10).scale(1.0));
    }
  CHECK_THROWS_AS(fgsa::kle_from_kernel(
                      grid, [](const Eigen::RowVectorXd&, const Eigen::RowVectorXd&) { return 1.0; }, 0),
                  std::invalid_argument);
}

TEST_CASE("sampled expansion of a rank-2 process is exact") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(0.0, 1.0, 51);
  const auto space = fgsa::ParameterSpace::uniform_cube(2);
  const Eigen::MatrixXd thetas = fgsa::sample(space, 300, 11, 2);

  fgsa::ProcessEnsemble ens;
  ens.grid = grid;
  ens.values.resize(300, 51);
  for (int m = 0; m < 300; ++m)
    for (int k = 0; k < 51; ++k) {
      const double s = grid.points(k, 0);
      ens.values(m, k) =
          thetas(m, 0) * std::sin(std::numbers::pi * s) + 0.5 * thetas(m, 1) * s;
    }

  const fgsa::KLExpansion lead = fgsa::kle_from_samples(ens, 2);
  // Unbiased covariance trace equals the weighted diagonal sum.
  Eigen::MatrixXd centered = ens.values.rowwise() - lead.mean.transpose();
  const Eigen::VectorXd pointwise_var = centered.array().square().colwise().sum() / 299.0;
  CHECK(lead.trace == doctest::Approx(grid.weights.dot(pointwise_var)).epsilon(1e-13));

  // KL coordinates have unit sample variance by construction.
  const Eigen::MatrixXd coords = fgsa::kle_modes_evaluate_ensemble(lead, ens);
  for (int i = 0; i < 2; ++i) {
    const double mu = coords.col(i).mean();
    const double var = (coords.col(i).array() - mu).square().sum() / 299.0;
    CHECK(var == doctest::Approx(1.0).epsilon(1e-10));
  }

  // Every realization reconstructs exactly: the process never leaves the span
  // of two modes.
  for (int m = 0; m < 300; m += 37) {
    const Eigen::VectorXd row_m = ens.values.row(m).transpose();
    const Eigen::VectorXd coord = fgsa::kle_modes_evaluate(lead, row_m);
    const Eigen::VectorXd rec = fgsa::kle_reconstruct(lead, coord);
    CHECK((rec - row_m).cwiseAbs().maxCoeff() < 1e-10);
  }

  // Retaining more modes than the rank pads with zero eigenvalues, which then
  // have no coordinate.
  const fgsa::KLExpansion wide = fgsa::kle_from_samples(ens, 4);
  CHECK(wide.eigenvalues(2) <= 1e-12);
  CHECK(wide.eigenvalues(3) <= 1e-12);
  CHECK(wide.eigenvalues(3) >= 0.0);

  // A retained mode whose eigenvalue is exactly zero has no coordinate.
  fgsa::KLExpansion flat = lead;
  flat.eigenvalues(1) = 0.0;
  const Eigen::VectorXd row0 = ens.values.row(0).transpose();
  CHECK_THROWS_AS(fgsa::kle_modes_evaluate(flat, row0), std::invalid_argument);

  CHECK_THROWS_AS(fgsa::kle_from_samples(ens, 0), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::kle_from_samples(ens, 52), std::invalid_argument);
  fgsa::ProcessEnsemble one;
  one.grid = grid;
  one.values = ens.values.topRows(1);
  CHECK_THROWS_AS(fgsa::kle_from_samples(one, 1), std::invalid_argument);
}

TEST_CASE("separable route equals the dense route on the tensor grid") {
  const fgsa::SpatialGrid gx = fgsa::make_midpoint_grid(0.0, 1.0, 7);
  const fgsa::SpatialGrid gy = fgsa::make_midpoint_grid(0.0, 2.0, 5);
  auto kx = [](double a, double b) { return std::exp(-std::abs(a - b) / 0.7); };
  auto ky = [](double a, double b) { return std::exp(-std::abs(a - b) / 0.3); };

  const int n_all = 35;
  const fgsa::KLExpansion sep = fgsa::kle_from_separable_kernel(gx, gy, kx, ky, n_all);
  const fgsa::SpatialGrid g2 = fgsa::make_tensor_grid(gx, gy);
  const fgsa::KLExpansion dense = fgsa::kle_from_kernel(
      g2,
      [&](const Eigen::RowVectorXd& p, const Eigen::RowVectorXd& q) {
        return kx(p(0), q(0)) * ky(p(1), q(1));
      },
      n_all);

  CHECK(sep.trace == doctest::Approx(dense.trace).epsilon(1e-12));
  for (int i = 0; i < n_all; ++i)
    CHECK(sep.eigenvalues(i) == doctest::Approx(dense.eigenvalues(i)).epsilon(1e-10));

  // With the full mode set, sum_m lambda_m phi_m phi_m^T recovers the kernel
  // matrix exactly for both routes (basis-independent comparison).
  Eigen::MatrixXd k_exact(n_all, n_all);
  for (int i = 0; i < n_all; ++i)
    for (int j = 0; j < n_all; ++j)
      k_exact(i, j) = kx(g2.points(i, 0), g2.points(j, 0)) * ky(g2.points(i, 1), g2.points(j, 1));
  const Eigen::MatrixXd rec_sep =
      sep.modes * sep.eigenvalues.asDiagonal() * sep.modes.transpose();
  const Eigen::MatrixXd rec_dense =
      dense.modes * dense.eigenvalues.asDiagonal() * dense.modes.transpose();
  CHECK((rec_sep - k_exact).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((rec_dense - k_exact).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("indefinite kernels are clipped to a nonnegative spectrum") {
  const fgsa::SpatialGrid grid = fgsa::make_midpoint_grid(0.0, 1.0, 5);
  const fgsa::KLExpansion kle = fgsa::kle_from_kernel(
      grid,
      [](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) { return x(0) + y(0); },
      5);
  CHECK(kle.clipped_magnitude > 0.0);
  CHECK(kle.eigenvalues.minCoeff() >= 0.0);
  CHECK(kle.trace == doctest::Approx(1.0).epsilon(1e-13));  // 2 integral of x on [0,1]
}

TEST_CASE("field synthesis applies mean and scaled modes") {
  const fgsa::SpatialGrid gx = fgsa::make_midpoint_grid(0.0, 1.0, 4);
  fgsa::InputFieldKLE field;
  field.kle = fgsa::kle_from_kernel(
      gx,
      [](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
        return std::exp(-std::abs(x(0) - y(0)));
      },
      3);
  field.kle.mean = Eigen::VectorXd::Constant(4, 2.5);

  Eigen::VectorXd theta(3);
  theta << 1.0, -2.0, 0.5;
  const Eigen::VectorXd f = fgsa::synthesize_field(field, theta);
  const Eigen::VectorXd expect =
      field.kle.mean +
      field.kle.modes * theta.cwiseProduct(field.kle.eigenvalues.cwiseSqrt());
  CHECK((f - expect).norm() == 0.0);
  CHECK_THROWS_AS(fgsa::synthesize_field(field, Eigen::VectorXd::Zero(2)),
                  std::invalid_argument);
}

TEST_CASE("spectrum bookkeeping: ratio cutoff and energy fraction") {
  Eigen::VectorXd ev(4);
  ev << 4.0, 2.0, 1.0, 0.5;
  CHECK(fgsa::truncation_index(ev, 0.2) == 4);     // 0.125 is the first ratio below
  CHECK(fgsa::truncation_index(ev, 0.6) == 2);     // 0.5 < 0.6
  CHECK(fgsa::truncation_index(ev, 1e-6) == 0);    // never drops that far
  CHECK(fgsa::truncation_index(Eigen::VectorXd(), 0.5) == 0);

  fgsa::KLExpansion kle;
  kle.eigenvalues = ev;
  kle.trace = 10.0;
  CHECK(fgsa::first_index_reaching(kle, 0.35) == 1);  // 4 > 3.5
  CHECK(fgsa::first_index_reaching(kle, 0.6) == 3);   // 4, 6 not > 6, 7 > 6
  CHECK(fgsa::first_index_reaching(kle, 0.9) == 0);   // retained energy tops out at 7.5
}

TEST_CASE("saved expansions round-trip bit for bit") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(-1.0, 2.0, 9);
  fgsa::ProcessEnsemble ens;
  ens.grid = grid;
  ens.values.resize(20, 9);
  fgsa::rng::Stream s(3, 0);
  for (int m = 0; m < 20; ++m)
    for (int k = 0; k < 9; ++k) ens.values(m, k) = s.next_open01() - 0.5;
  const fgsa::KLExpansion kle = fgsa::kle_from_samples(ens, 5);

  const std::string dir = (std::filesystem::temp_directory_path() / "fgsa_kle_rt").string();
  fgsa::save_kle(kle, dir, "proc");
  const fgsa::KLExpansion back = fgsa::load_kle(dir, "proc");

  CHECK(back.eigenvalues == kle.eigenvalues);
  CHECK(back.modes == kle.modes);
  CHECK(back.mean == kle.mean);
  CHECK(back.grid.points == kle.grid.points);
  CHECK(back.grid.weights == kle.grid.weights);
  CHECK(back.trace == kle.trace);
  CHECK(back.clipped_magnitude == kle.clipped_magnitude);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(fgsa::load_kle(dir, "proc"), std::runtime_error);
}
