#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fgsa/grid.hpp"

using fgsa::SpatialGrid;

TEST_CASE("interval grid: trapezoid weights, endpoints, measure") {
  const SpatialGrid g = fgsa::make_interval_grid(0.0, 1.0, 5);
  CHECK(g.size() == 5);
  CHECK(g.dim() == 1);
  CHECK(g.points(0, 0) == 0.0);
  CHECK(g.points(4, 0) == 1.0);
  CHECK(g.weights(0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(g.weights(2) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(g.measure == doctest::Approx(1.0).epsilon(1e-15));

  const SpatialGrid two = fgsa::make_interval_grid(-2.0, 3.0, 2);
  CHECK(two.weights(0) == doctest::Approx(2.5).epsilon(1e-15));
  CHECK(two.weights(1) == doctest::Approx(2.5).epsilon(1e-15));

  CHECK_THROWS_AS(fgsa::make_interval_grid(0.0, 1.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::make_interval_grid(1.0, 1.0, 5), std::invalid_argument);
}

TEST_CASE("interval grid: trapezoid error scales as h^2 for smooth integrands") {
  const SpatialGrid g = fgsa::make_interval_grid(0.0, 1.0, 2001);
  Eigen::VectorXd s2(g.size());
  for (int k = 0; k < g.size(); ++k) s2(k) = g.points(k, 0) * g.points(k, 0);
  // composite trapezoid error for f'' = 2: (b-a) h^2 f'' / 12 = h^2/6
  const double h = 1.0 / 2000.0;
  CHECK(std::abs(fgsa::integrate(s2, g) - 1.0 / 3.0) <= h * h / 6.0 * 1.01);
}

TEST_CASE("interval grid: periodic integrands integrate exactly") {
  const SpatialGrid g = fgsa::make_interval_grid(0.0, 1.0, 11);
  Eigen::VectorXd f(g.size());
  for (int k = 0; k < g.size(); ++k) {
    const double s = g.points(k, 0);
    f(k) = std::sin(std::numbers::pi * s) * std::sin(std::numbers::pi * s);
  }
  CHECK(fgsa::integrate(f, g) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("midpoint grid: linear functions integrate exactly") {
  const SpatialGrid g = fgsa::make_midpoint_grid(0.0, 2.0, 7);
  CHECK(g.size() == 7);
  CHECK(g.points(0, 0) == doctest::Approx(1.0 / 7.0).epsilon(1e-14));
  CHECK(g.weights(3) == doctest::Approx(2.0 / 7.0).epsilon(1e-14));
  CHECK(fgsa::integrate(g.points.col(0), g) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK_THROWS_AS(fgsa::make_midpoint_grid(0.0, 1.0, 0), std::invalid_argument);
}

TEST_CASE("tensor grid: x-fastest ordering and product weights") {
  const SpatialGrid gx = fgsa::make_midpoint_grid(0.0, 1.0, 3);
  const SpatialGrid gy = fgsa::make_midpoint_grid(0.0, 1.0, 2);
  const SpatialGrid g = fgsa::make_tensor_grid(gx, gy);
  CHECK(g.size() == 6);
  CHECK(g.dim() == 2);
  // flat index j*nx + i
  CHECK(g.points(1, 0) == doctest::Approx(gx.points(1, 0)));
  CHECK(g.points(1, 1) == doctest::Approx(gy.points(0, 0)));
  CHECK(g.points(3, 0) == doctest::Approx(gx.points(0, 0)));
  CHECK(g.points(3, 1) == doctest::Approx(gy.points(1, 0)));
  CHECK(g.weights(4) == doctest::Approx(gx.weights(1) * gy.weights(1)).epsilon(1e-15));

  // midpoint tensor integrates bilinear x*y exactly
  Eigen::VectorXd xy = g.points.col(0).cwiseProduct(g.points.col(1));
  CHECK(fgsa::integrate(xy, g) == doctest::Approx(0.25).epsilon(1e-14));
  CHECK_THROWS_AS(fgsa::make_tensor_grid(g, gx), std::invalid_argument);
}

TEST_CASE("annulus grid: weights sum to the exact annulus area") {
  const double r_in = 0.25, r_out = 5.0;
  const SpatialGrid g = fgsa::make_polar_annulus_grid(r_in, r_out, 17, 24);
  const double area = std::numbers::pi * (r_out * r_out - r_in * r_in);
  CHECK(g.measure == doctest::Approx(area).epsilon(1e-13));
  // first point lies on the inner rim at angle 0
  CHECK(g.points(0, 0) == doctest::Approx(r_in));
  CHECK(g.points(0, 1) == doctest::Approx(0.0));
  // flat index ir*nphi + iphi
  const double dphi = 2.0 * std::numbers::pi / 24;
  CHECK(g.points(1, 0) == doctest::Approx(r_in * std::cos(dphi)));
  CHECK(g.points(1, 1) == doctest::Approx(r_in * std::sin(dphi)));
  CHECK_THROWS_AS(fgsa::make_polar_annulus_grid(0.0, 1.0, 8, 8), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::make_polar_annulus_grid(0.5, 1.0, 1, 8), std::invalid_argument);
}

TEST_CASE("restrict_grid keeps points, weights, and order") {
  const SpatialGrid g = fgsa::make_interval_grid(0.0, 1.0, 5);
  const SpatialGrid sub = fgsa::restrict_grid(g, {4, 0, 2});
  CHECK(sub.size() == 3);
  CHECK(sub.points(0, 0) == 1.0);
  CHECK(sub.points(1, 0) == 0.0);
  CHECK(sub.points(2, 0) == 0.5);
  CHECK(sub.weights(0) == g.weights(4));
  CHECK(sub.measure == doctest::Approx(g.weights(4) + g.weights(0) + g.weights(2)));
  CHECK_THROWS_AS(fgsa::restrict_grid(g, {}), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::restrict_grid(g, {5}), std::invalid_argument);
}

TEST_CASE("integrate and inner_product validate lengths") {
  const SpatialGrid g = fgsa::make_interval_grid(0.0, 1.0, 4);
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(4);
  CHECK(fgsa::integrate(ones, g) == doctest::Approx(1.0));
  CHECK(fgsa::inner_product(ones, ones, g) == doctest::Approx(1.0));
  CHECK_THROWS_AS(fgsa::integrate(Eigen::VectorXd::Ones(3), g), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::inner_product(ones, Eigen::VectorXd::Ones(5), g),
                  std::invalid_argument);
}
