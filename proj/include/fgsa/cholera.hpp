#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>

#include "fgsa/dgsm.hpp"
#include "fgsa/grid.hpp"
#include "fgsa/ode.hpp"

namespace fgsa {

/**
 * Waterborne-disease compartment model with two bacterial pools:
 * susceptible/infected/recovered hosts plus hyperinfectious and
 * lower-infectivity vibrio concentrations. Rates are per week; the
 * half-saturation of the hyperinfectious pool is tied to the lower pool's
 * by kappa_H = kappa_L / 700.
 */
struct CholeraParams {
  double beta_L;   // ingestion rate of the lower-infectivity pool
  double beta_H;   // ingestion rate of the hyperinfectious pool
  double kappa_L;  // half-saturation density, lower pool (cells/ml)
  double b;        // host birth/death rate
  double chi;      // decay hyperinfectious -> lower pool
  double xi;       // shedding rate into the hyperinfectious pool
  double delta;    // removal rate of the lower pool
  double gamma;    // host recovery rate

  double kappa_H() const { return kappa_L / 700.0; }

  static CholeraParams nominal() {
    return {1.5, 7.5, 1e6, 1.0 / 1560.0, 168.0 / 5.0, 70.0, 7.0 / 30.0, 7.0 / 5.0};
  }

  Eigen::Matrix<double, 8, 1> as_vector() const {
    Eigen::Matrix<double, 8, 1> v;
    v << beta_L, beta_H, kappa_L, b, chi, xi, delta, gamma;
    return v;
  }
  static CholeraParams from_vector(const Eigen::Ref<const Eigen::Matrix<double, 8, 1>>& v) {
    return {v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7)};
  }

  void validate() const {
    const auto v = as_vector();
    for (int i = 0; i < 8; ++i)
      if (!(v(i) >= 0.0)) throw std::invalid_argument("CholeraParams: rates must be nonnegative");
    if (!(kappa_L > 0.0))
      throw std::invalid_argument("CholeraParams: half-saturation must be positive");
  }
};

/** Component ranges [lo, hi] for the affine map from theta in [-1, 1]^8. */
struct CholeraRanges {
  Eigen::Matrix<double, 8, 1> lo, hi;

  static CholeraRanges nominal_plus_minus(double fraction) {
    if (!(fraction > 0.0) || fraction >= 1.0)
      throw std::invalid_argument("CholeraRanges: fraction must be in (0, 1)");
    CholeraRanges r;
    const auto nom = CholeraParams::nominal().as_vector();
    r.lo = nom * (1.0 - fraction);
    r.hi = nom * (1.0 + fraction);
    return r;
  }

  void validate() const {
    for (int i = 0; i < 8; ++i) {
      if (!(lo(i) < hi(i))) throw std::invalid_argument("CholeraRanges: need lo < hi");
      if (!(lo(i) > 0.0)) throw std::invalid_argument("CholeraRanges: bounds must be positive");
    }
  }

  /** dc_j / dtheta_j of the affine map. */
  Eigen::Matrix<double, 8, 1> theta_scale() const { return (hi - lo) / 2.0; }
};

/** Affine parameter map c_j = (lo_j + hi_j)/2 + theta_j (hi_j - lo_j)/2. */
inline CholeraParams map_theta_to_params(const Eigen::Ref<const Eigen::RowVectorXd>& theta,
                                         const CholeraRanges& ranges) {
  if (theta.size() != 8) throw std::invalid_argument("map_theta_to_params: need 8 parameters");
  for (int j = 0; j < 8; ++j)
    if (std::abs(theta(j)) > 1.0 + 1e-12)
      throw std::invalid_argument("map_theta_to_params: theta outside the unit cube");
  ranges.validate();
  const Eigen::Matrix<double, 8, 1> mid = (ranges.lo + ranges.hi) / 2.0;
  const Eigen::Matrix<double, 8, 1> half = ranges.theta_scale();
  Eigen::Matrix<double, 8, 1> c = mid + half.cwiseProduct(theta.transpose());
  auto p = CholeraParams::from_vector(c);
  p.validate();
  return p;
}

struct CholeraConfig {
  CholeraRanges ranges;
  double t_final = 150.0;  // weeks
  int n_out = 601;
  double rtol = 1e-8;
  double atol = 1e-10;
  double n_pop = 1e4;
  double s0 = 9999.0;
  double i0 = 1.0;
};

namespace detail {

/** State derivative g(y; c) with y = (S, I, R, B_H, B_L). */
inline void cholera_state_rhs(const CholeraParams& p, double n_pop, const double* y, double* g) {
  const double S = y[0], I = y[1], R = y[2], BH = y[3], BL = y[4];
  const double kH = p.kappa_H();
  const double FL = BL / (p.kappa_L + BL);
  const double FH = BH / (kH + BH);
  const double lam = p.beta_L * FL + p.beta_H * FH;
  g[0] = p.b * (n_pop - S) - lam * S;
  g[1] = lam * S - (p.gamma + p.b) * I;
  g[2] = p.gamma * I - p.b * R;
  g[3] = p.xi * I - p.chi * BH;
  g[4] = p.chi * BH - p.delta * BL;
}

}  // namespace detail

/** Integrate the five-state system; output rows are (S, I, R, B_H, B_L). */
inline OdeSolution solve_forward(const CholeraParams& params, const CholeraConfig& cfg) {
  params.validate();
  Eigen::VectorXd y0(5);
  y0 << cfg.s0, cfg.i0, cfg.n_pop - cfg.s0 - cfg.i0, 0.0, 0.0;
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(cfg.n_out, 0.0, cfg.t_final);
  OdeRhs rhs = [&params, &cfg](double, const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    detail::cholera_state_rhs(params, cfg.n_pop, y.data(), g.data());
  };
  OdeOptions opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  return integrate_dp45(rhs, y0, times, opt);
}

struct CholeraSensitivitySolution {
  Eigen::VectorXd times;
  Eigen::MatrixXd states;     // n_out x 5
  Eigen::MatrixXd qoi;        // n_out x 1: infected hosts I(t)
  Eigen::MatrixXd qoi_grads;  // n_out x 8: d I(t) / d theta_j
  long n_steps = 0;
};

/**
 * Forward solve augmented with the eight sensitivity blocks
 * s_j' = (dg/dy) s_j + (dg/dc_j)(dc_j/dtheta_j), s_j(0) = 0 — a 45-state
 * system integrated once per theta. The QoI is the infected compartment.
 */
inline CholeraSensitivitySolution solve_with_sensitivities(
    const Eigen::Ref<const Eigen::RowVectorXd>& theta, const CholeraConfig& cfg) {
  const CholeraParams p = map_theta_to_params(theta, cfg.ranges);
  const Eigen::Matrix<double, 8, 1> scale = cfg.ranges.theta_scale();
  const double n_pop = cfg.n_pop;

  OdeRhs rhs = [p, scale, n_pop](double, const Eigen::VectorXd& y, Eigen::VectorXd& g) {
    const double S = y(0), I = y(1), R = y(2), BH = y(3), BL = y(4);
    const double kH = p.kappa_H();
    const double denL = p.kappa_L + BL;
    const double denH = kH + BH;
    const double FL = BL / denL;
    const double FH = BH / denH;
    const double dFL = p.kappa_L / (denL * denL);  // dF_L/dB_L
    const double dFH = kH / (denH * denH);         // dF_H/dB_H
    const double lam = p.beta_L * FL + p.beta_H * FH;

    detail::cholera_state_rhs(p, n_pop, y.data(), g.data());

    // Jacobian dg/dy (rows: equations, cols: states).
    Eigen::Matrix<double, 5, 5> J = Eigen::Matrix<double, 5, 5>::Zero();
    J(0, 0) = -p.b - lam;
    J(0, 3) = -p.beta_H * dFH * S;
    J(0, 4) = -p.beta_L * dFL * S;
    J(1, 0) = lam;
    J(1, 1) = -(p.gamma + p.b);
    J(1, 3) = p.beta_H * dFH * S;
    J(1, 4) = p.beta_L * dFL * S;
    J(2, 1) = p.gamma;
    J(2, 2) = -p.b;
    J(3, 1) = p.xi;
    J(3, 3) = -p.chi;
    J(4, 3) = p.chi;
    J(4, 4) = -p.delta;

    // dg/dc_j columns; the kappa_L column carries the tied kappa_H chain.
    Eigen::Matrix<double, 5, 8> P = Eigen::Matrix<double, 5, 8>::Zero();
    P(0, 0) = -FL * S;
    P(1, 0) = FL * S;
    P(0, 1) = -FH * S;
    P(1, 1) = FH * S;
    const double dlam_dkL =
        -p.beta_L * BL / (denL * denL) - p.beta_H / 700.0 * BH / (denH * denH);
    P(0, 2) = -dlam_dkL * S;
    P(1, 2) = dlam_dkL * S;
    P(0, 3) = n_pop - S;
    P(1, 3) = -I;
    P(2, 3) = -R;
    P(3, 4) = -BH;
    P(4, 4) = BH;
    P(3, 5) = I;
    P(4, 6) = -BL;
    P(1, 7) = -I;
    P(2, 7) = I;

    for (int j = 0; j < 8; ++j) {
      const auto sj = y.segment<5>(5 + 5 * j);
      g.segment<5>(5 + 5 * j) = J * sj + P.col(j) * scale(j);
    }
  };

  Eigen::VectorXd y0 = Eigen::VectorXd::Zero(45);
  y0(0) = cfg.s0;
  y0(1) = cfg.i0;
  y0(2) = cfg.n_pop - cfg.s0 - cfg.i0;
  const Eigen::VectorXd times = Eigen::VectorXd::LinSpaced(cfg.n_out, 0.0, cfg.t_final);
  OdeOptions opt;
  opt.rtol = cfg.rtol;
  opt.atol = cfg.atol;
  const OdeSolution sol = integrate_dp45(rhs, y0, times, opt);

  CholeraSensitivitySolution out;
  out.times = sol.times;
  out.states = sol.states.leftCols<5>();
  out.qoi = sol.states.col(1);
  out.qoi_grads.resize(cfg.n_out, 8);
  for (int j = 0; j < 8; ++j) out.qoi_grads.col(j) = sol.states.col(5 + 5 * j + 1);
  out.n_steps = sol.n_steps;
  return out;
}

/**
 * Infected-trajectory model over [0, t_final] with trapezoid time weights.
 * One augmented solve yields the output and its parametric derivatives, so
 * the model serves both screening pathways; the mode-projection pathway
 * projects the stored derivative fields onto the retained modes.
 */
class CholeraModel : public FunctionalModel, public GradientModel {
 public:
  explicit CholeraModel(CholeraConfig cfg)
      : cfg_(std::move(cfg)), grid_(make_interval_grid(0.0, cfg_.t_final, cfg_.n_out)) {
    cfg_.ranges.validate();
  }

  const CholeraConfig& config() const { return cfg_; }
  const SpatialGrid& output_grid() const override { return grid_; }
  int n_par() const override { return 8; }

  void evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::VectorXd& qoi,
                Eigen::MatrixXd& grads) const override {
    const auto sol = solve_with_sensitivities(theta, cfg_);
    qoi = sol.qoi.col(0);
    grads = sol.qoi_grads;
  }

  Forward solve_forward(const Eigen::Ref<const Eigen::RowVectorXd>& theta) const override {
    auto sol = std::make_shared<CholeraSensitivitySolution>(solve_with_sensitivities(theta, cfg_));
    Forward fwd;
    fwd.qoi = sol->qoi.col(0);
    fwd.state = std::move(sol);
    return fwd;
  }

  Eigen::MatrixXd mode_gradients(const Eigen::Ref<const Eigen::RowVectorXd>&,
                                 const Forward& forward, const KLExpansion& kle,
                                 int n_qoi) const override {
    const auto* sol = static_cast<const CholeraSensitivitySolution*>(forward.state.get());
    if (!sol) throw std::invalid_argument("CholeraModel: forward state missing");
    Eigen::MatrixXd out(n_qoi, 8);
    for (int i = 0; i < n_qoi; ++i) {
      const double sigma = std::sqrt(kle.eigenvalues(i));
      for (int j = 0; j < 8; ++j)
        out(i, j) = inner_product(sol->qoi_grads.col(j), kle.modes.col(i), grid_) / sigma;
    }
    return out;
  }

  /** Plain five-state solve for estimators that only need outputs. */
  FieldFunction field_function() const {
    const CholeraConfig cfg = cfg_;
    return [cfg](const Eigen::Ref<const Eigen::RowVectorXd>& theta) -> Eigen::VectorXd {
      const CholeraParams p = map_theta_to_params(theta, cfg.ranges);
      return fgsa::solve_forward(p, cfg).states.col(1);
    };
  }

 private:
  CholeraConfig cfg_;
  SpatialGrid grid_;
};

}  // namespace fgsa
