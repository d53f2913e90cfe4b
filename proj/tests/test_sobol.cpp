#include <doctest.h>

#include <cmath>
#include <numbers>

#include "fgsa/sobol.hpp"

namespace {

// f(s, theta) = theta_1 sin(pi s) + 0.5 theta_2 s on [0,1], theta ~ U(-1,1)^2.
// Var f(s) = sin^2(pi s)/3 + s^2/12; functional totals are 6/7 and 1/7.
fgsa::FieldFunction toy_process(const fgsa::SpatialGrid& grid) {
  return [&grid](const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
    Eigen::VectorXd out(grid.size());
    for (int k = 0; k < grid.size(); ++k) {
      const double s = grid.points(k, 0);
      out(k) = theta(0) * std::sin(std::numbers::pi * s) + 0.5 * theta(1) * s;
    }
    return out;
  };
}

}  // namespace

TEST_CASE("pick-freeze recovers the additive process indices") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(0.0, 1.0, 101);
  const auto space = fgsa::ParameterSpace::uniform_cube(2);
  const fgsa::FieldFunction model = toy_process(grid);

  const fgsa::SobolResult s1 = fgsa::pick_freeze_total(model, space, grid, {0}, 4000, 7, 2);
  const fgsa::SobolResult s2 = fgsa::pick_freeze_total(model, space, grid, {1}, 4000, 7, 2);

  CHECK(s1.functional_total_stderr > 0.0);
  CHECK(s2.functional_total_stderr > 0.0);
  CHECK(std::abs(s1.functional_total - 6.0 / 7.0) <= 3.0 * s1.functional_total_stderr + 5e-3);
  CHECK(std::abs(s2.functional_total - 1.0 / 7.0) <= 3.0 * s2.functional_total_stderr + 5e-3);

  // Additive process: first order equals total order, and the two parameters
  // partition the variance.
  CHECK(std::abs(s1.functional_first - s1.functional_total) < 0.03);
  CHECK(std::abs(s2.functional_first - s2.functional_total) < 0.03);
  CHECK(std::abs(s1.functional_first + s2.functional_total - 1.0) < 0.03);

  // The whole-group total is the full variance ratio.
  const fgsa::SobolResult all = fgsa::pick_freeze_total(model, space, grid, {0, 1}, 2000, 7, 2);
  CHECK(std::abs(all.functional_total - 1.0) < 0.05);
  CHECK(all.functional_total_clamped <= 1.0);
  CHECK(all.functional_total_clamped >= 0.0);
}

TEST_CASE("functional index equals the variance-weighted pointwise average") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(0.0, 1.0, 51);
  const auto space = fgsa::ParameterSpace::uniform_cube(2);
  const fgsa::SobolResult res =
      fgsa::pick_freeze_total(toy_process(grid), space, grid, {0}, 600, 3, 1);
  const double recomputed =
      fgsa::functional_total(res.pointwise_total, res.pointwise_variance, grid);
  CHECK(recomputed == doctest::Approx(res.functional_total).epsilon(1e-12));
  CHECK(res.pointwise_numerator_stderr.size() == grid.size());
  CHECK(res.pointwise_numerator_stderr.minCoeff() >= 0.0);
}

TEST_CASE("pick-freeze is invariant to the worker count and seeded") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(0.0, 1.0, 21);
  const auto space = fgsa::ParameterSpace::uniform_cube(2);
  const fgsa::FieldFunction model = toy_process(grid);

  const fgsa::SobolResult a = fgsa::pick_freeze_total(model, space, grid, {0}, 500, 17, 1);
  const fgsa::SobolResult b = fgsa::pick_freeze_total(model, space, grid, {0}, 500, 17, 4);
  CHECK(a.functional_total == b.functional_total);  // bitwise
  CHECK(a.functional_first == b.functional_first);
  CHECK(a.functional_total_stderr == b.functional_total_stderr);
  CHECK(a.pointwise_total == b.pointwise_total);
  CHECK(a.pointwise_variance == b.pointwise_variance);
  CHECK(a.pointwise_numerator_stderr == b.pointwise_numerator_stderr);

  const fgsa::SobolResult c = fgsa::pick_freeze_total(model, space, grid, {0}, 500, 18, 1);
  CHECK(c.functional_total != a.functional_total);

  // The single-parameter overload is the singleton group.
  const fgsa::SobolResult d = fgsa::pick_freeze_total(model, space, grid, 0, 500, 17, 1);
  CHECK(d.functional_total == a.functional_total);
  CHECK(d.pointwise_total == a.pointwise_total);

  const auto every = fgsa::sobol_all_totals(model, space, grid, 500, 17, 1);
  REQUIRE(every.size() == 2);
  CHECK(every[0].functional_total == a.functional_total);
}

TEST_CASE("zero-variance points are reported as zero index, not NaN") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(0.0, 1.0, 41);
  const auto space = fgsa::ParameterSpace::uniform_cube(1);
  const fgsa::FieldFunction ramp = [&grid](const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
    Eigen::VectorXd out(grid.size());
    for (int k = 0; k < grid.size(); ++k)
      out(k) = theta(0) * std::max(grid.points(k, 0) - 0.5, 0.0);
    return out;
  };
  const fgsa::SobolResult res = fgsa::pick_freeze_total(ramp, space, grid, {0}, 400, 5, 2);
  CHECK(res.pointwise_total.allFinite());
  CHECK(res.pointwise_first.allFinite());
  CHECK(res.pointwise_total(4) == 0.0);  // s = 0.1: the output never moves there
  CHECK(std::abs(res.functional_total - 1.0) < 0.05);
}

TEST_CASE("pick-freeze validates its inputs") {
  const fgsa::SpatialGrid grid = fgsa::make_interval_grid(0.0, 1.0, 11);
  const auto space = fgsa::ParameterSpace::uniform_cube(2);
  const fgsa::FieldFunction model = toy_process(grid);
  CHECK_THROWS_AS(fgsa::pick_freeze_total(model, space, grid, {0}, 1, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(fgsa::pick_freeze_total(model, space, grid, std::vector<int>{}, 100, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(fgsa::pick_freeze_total(model, space, grid, {2}, 100, 0),
                  std::invalid_argument);
  const fgsa::FieldFunction bad = [](const Eigen::Ref<const Eigen::RowVectorXd>&) {
    return Eigen::VectorXd::Zero(3).eval();
  };
  CHECK_THROWS_AS(fgsa::pick_freeze_total(bad, space, grid, {0}, 100, 0),
                  std::invalid_argument);
}
