#include <doctest.h>

#include <cmath>
#include <string>

#include "fgsa/cholera.hpp"
#include "fgsa/ode.hpp"

TEST_CASE("adaptive integrator: exponential decay with dense output") {
  fgsa::OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& g) { g = -y; };
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(11, 0.0, 5.0);
  const fgsa::OdeSolution sol = fgsa::integrate_dp45(rhs, Eigen::VectorXd::Ones(1), times);
  for (int i = 0; i < 11; ++i)
    CHECK(std::abs(sol.states(i, 0) - std::exp(-times(i))) < 1e-7);
  CHECK(sol.n_steps > 0);
  // First-same-as-last: two startup evaluations plus six per attempted step.
  CHECK(sol.n_rhs >= 2 + 6 * sol.n_steps);
  CHECK(sol.n_rhs <= 2 + 12 * sol.n_steps + 60);
}

TEST_CASE("adaptive integrator: oscillator accuracy tracks the tolerance") {
  fgsa::OdeRhs rhs = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    g.resize(2);
    g(0) = y(1);
    g(1) = -y(0);
  };
  Eigen::VectorXd y0(2);
  y0 << 0.0, 1.0;  // y = sin t
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(21, 0.0, 20.0);

  auto max_err = [&](double rtol) {
    fgsa::OdeOptions opt;
    opt.rtol = rtol;
    opt.atol = rtol * 1e-2;
    const fgsa::OdeSolution sol = fgsa::integrate_dp45(rhs, y0, times, opt);
    double err = 0.0;
    for (int i = 0; i < times.size(); ++i)
      err = std::max(err, std::abs(sol.states(i, 0) - std::sin(times(i))));
    return err;
  };
  const double loose = max_err(1e-5);
  const double tight = max_err(1e-10);
  CHECK(tight < loose);
  CHECK(tight < 1e-8);
  CHECK(loose < 1e-3);
}

TEST_CASE("adaptive integrator rejects bad requests and singular problems") {
  fgsa::OdeRhs decay = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& g) { g = -y; };
  Eigen::VectorXd bad_times(3);
  bad_times << 0.0, 1.0, 1.0;
  CHECK_THROWS_AS(fgsa::integrate_dp45(decay, Eigen::VectorXd::Ones(1), bad_times),
                  std::invalid_argument);
  CHECK_THROWS_AS(fgsa::integrate_dp45(decay, Eigen::VectorXd::Ones(1), Eigen::VectorXd()),
                  std::invalid_argument);
  fgsa::OdeOptions neg;
  neg.rtol = -1.0;
  CHECK_THROWS_AS(fgsa::integrate_dp45(decay, Eigen::VectorXd::Ones(1),
                                       Eigen::VectorXd::LinSpaced(2, 0.0, 1.0), neg),
                  std::invalid_argument);

  // One output time: the initial condition comes straight back.
  const fgsa::OdeSolution trivial =
      fgsa::integrate_dp45(decay, Eigen::VectorXd::Constant(1, 3.0), Eigen::VectorXd::Zero(1));
  CHECK(trivial.states(0, 0) == 3.0);
  CHECK(trivial.n_steps == 0);

  // y' = y^2 from y(0) = 1 blows up at t = 1; the step size underflows.
  fgsa::OdeRhs blowup = [](double, const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    g = y.cwiseProduct(y);
  };
  try {
    fgsa::integrate_dp45(blowup, Eigen::VectorXd::Ones(1), Eigen::VectorXd::LinSpaced(2, 0.0, 2.0));
    FAIL("expected an underflow failure");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("underflow") != std::string::npos);
    CHECK(std::string(e.what()).find("t=") != std::string::npos);
  }

  fgsa::OdeOptions capped;
  capped.max_steps = 3;
  CHECK_THROWS_AS(fgsa::integrate_dp45(decay, Eigen::VectorXd::Ones(1),
                                       Eigen::VectorXd::LinSpaced(2, 0.0, 1e6), capped),
                  std::runtime_error);
}

TEST_CASE("outbreak model conserves hosts and produces an epidemic wave") {
  fgsa::CholeraConfig cfg;
  cfg.ranges = fgsa::CholeraRanges::nominal_plus_minus(0.1);
  const fgsa::OdeSolution sol = fgsa::solve_forward(fgsa::CholeraParams::nominal(), cfg);

  double worst = 0.0;
  for (int i = 0; i < sol.states.rows(); ++i)
    worst = std::max(worst, std::abs(sol.states(i, 0) + sol.states(i, 1) + sol.states(i, 2) -
                                     cfg.n_pop));
  CHECK(worst / cfg.n_pop < 1e-6);
  CHECK(sol.states.minCoeff() > -1e-6);

  const double peak = sol.states.col(1).maxCoeff();
  CHECK(peak > 50.0);                                  // a real outbreak
  CHECK(sol.states(sol.states.rows() - 1, 1) < peak);  // and it recedes
  CHECK(sol.states(sol.states.rows() - 1, 0) < cfg.s0);
}

TEST_CASE("no shedding means clean water and pure decay of the infected") {
  fgsa::CholeraParams p = fgsa::CholeraParams::nominal();
  p.xi = 0.0;  // nothing enters the bacterial pools
  p.validate();
  fgsa::CholeraConfig cfg;
  cfg.ranges = fgsa::CholeraRanges::nominal_plus_minus(0.1);
  cfg.t_final = 10.0;
  cfg.n_out = 101;
  const fgsa::OdeSolution sol = fgsa::solve_forward(p, cfg);
  CHECK(sol.states.col(3).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sol.states.col(4).cwiseAbs().maxCoeff() == 0.0);
  // I(t) = exp(-(gamma + b) t).
  const double expect = std::exp(-(p.gamma + p.b) * 10.0);
  CHECK(sol.states(100, 1) == doctest::Approx(expect).epsilon(1e-6));
}

TEST_CASE("affine parameter map hits the endpoints and rejects outsiders") {
  const auto ranges = fgsa::CholeraRanges::nominal_plus_minus(0.2);
  const auto nominal = fgsa::CholeraParams::nominal().as_vector();

  const auto mid = fgsa::map_theta_to_params(Eigen::RowVectorXd::Zero(8), ranges).as_vector();
  const auto top = fgsa::map_theta_to_params(Eigen::RowVectorXd::Ones(8), ranges).as_vector();
  const auto bot =
      fgsa::map_theta_to_params(Eigen::RowVectorXd::Constant(8, -1.0), ranges).as_vector();
  for (int j = 0; j < 8; ++j) {
    CHECK(mid(j) == doctest::Approx(nominal(j)).epsilon(1e-14));
    CHECK(top(j) == doctest::Approx(1.2 * nominal(j)).epsilon(1e-14));
    CHECK(bot(j) == doctest::Approx(0.8 * nominal(j)).epsilon(1e-14));
  }

  CHECK_THROWS_AS(fgsa::map_theta_to_params(Eigen::RowVectorXd::Constant(8, 1.01), ranges),
                  std::invalid_argument);
  CHECK_THROWS_AS(fgsa::map_theta_to_params(Eigen::RowVectorXd::Zero(7), ranges),
                  std::invalid_argument);
  CHECK_THROWS_AS(fgsa::CholeraRanges::nominal_plus_minus(0.0), std::invalid_argument);
  CHECK_THROWS_AS(fgsa::CholeraRanges::nominal_plus_minus(1.0), std::invalid_argument);

  fgsa::CholeraRanges flipped = ranges;
  flipped.hi(2) = flipped.lo(2) / 2.0;
  CHECK_THROWS_AS(flipped.validate(), std::invalid_argument);
  fgsa::CholeraRanges nonpos = ranges;
  nonpos.lo(4) = 0.0;
  CHECK_THROWS_AS(nonpos.validate(), std::invalid_argument);

  fgsa::CholeraParams neg = fgsa::CholeraParams::nominal();
  neg.delta = -0.1;
  CHECK_THROWS_AS(neg.validate(), std::invalid_argument);
  fgsa::CholeraParams zk = fgsa::CholeraParams::nominal();
  zk.kappa_L = 0.0;
  CHECK_THROWS_AS(zk.validate(), std::invalid_argument);
  CHECK(fgsa::CholeraParams::nominal().kappa_H() ==
        doctest::Approx(1e6 / 700.0).epsilon(1e-15));
}

TEST_CASE("augmented sensitivities match central differences") {
  fgsa::CholeraConfig cfg;
  cfg.ranges = fgsa::CholeraRanges::nominal_plus_minus(0.1);
  cfg.t_final = 50.0;
  cfg.n_out = 51;
  cfg.rtol = 1e-10;
  cfg.atol = 1e-12;

  Eigen::RowVectorXd theta(8);
  theta << 0.2, -0.3, 0.1, 0.4, -0.2, 0.25, -0.15, 0.05;
  const auto sens = fgsa::solve_with_sensitivities(theta, cfg);

  // Augmented state block agrees with the plain forward solve.
  const auto plain = fgsa::solve_forward(fgsa::map_theta_to_params(theta, cfg.ranges), cfg);
  CHECK((sens.states - plain.states).cwiseAbs().maxCoeff() /
            plain.states.cwiseAbs().maxCoeff() <
        1e-8);

  const double h = 1e-4;
  const int t_probe = 50;  // final time
  double grad_scale = 0.0;
  for (int j = 0; j < 8; ++j)
    grad_scale = std::max(grad_scale, std::abs(sens.qoi_grads(t_probe, j)));
  REQUIRE(grad_scale > 0.0);

  for (int j = 0; j < 8; ++j) {
    Eigen::RowVectorXd up = theta, dn = theta;
    up(j) += h;
    dn(j) -= h;
    const auto sol_up = fgsa::solve_forward(fgsa::map_theta_to_params(up, cfg.ranges), cfg);
    const auto sol_dn = fgsa::solve_forward(fgsa::map_theta_to_params(dn, cfg.ranges), cfg);
    const double fd = (sol_up.states(t_probe, 1) - sol_dn.states(t_probe, 1)) / (2.0 * h);
    const double err = std::abs(fd - sens.qoi_grads(t_probe, j));
    CHECK(err <= 1e-4 * std::max(std::abs(fd), 0.01 * grad_scale));
  }
}

TEST_CASE("trajectory model serves both screening interfaces consistently") {
  fgsa::CholeraConfig cfg;
  cfg.ranges = fgsa::CholeraRanges::nominal_plus_minus(0.1);
  cfg.t_final = 30.0;
  cfg.n_out = 61;
  const fgsa::CholeraModel model(cfg);
  CHECK(model.n_par() == 8);
  CHECK(model.output_grid().size() == 61);
  CHECK(model.output_grid().measure == doctest::Approx(30.0).epsilon(1e-14));

  Eigen::RowVectorXd theta = Eigen::RowVectorXd::Constant(8, 0.1);
  Eigen::VectorXd qoi;
  Eigen::MatrixXd grads;
  model.evaluate(theta, qoi, grads);
  CHECK(qoi.size() == 61);
  CHECK(grads.rows() == 61);
  CHECK(grads.cols() == 8);

  const auto fwd = model.solve_forward(theta);
  CHECK((fwd.qoi - qoi).cwiseAbs().maxCoeff() == 0.0);

  // The output-only path follows the same trajectory.
  const Eigen::VectorXd plain = model.field_function()(theta);
  CHECK((plain - qoi).cwiseAbs().maxCoeff() / qoi.cwiseAbs().maxCoeff() < 1e-6);

  // Mode gradients need the stored sensitivity state.
  fgsa::FunctionalModel::Forward empty;
  empty.qoi = qoi;
  fgsa::KLExpansion dummy;
  CHECK_THROWS_AS(model.mode_gradients(theta, empty, dummy, 1), std::invalid_argument);
}
