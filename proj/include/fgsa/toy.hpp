#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <utility>

#include "fgsa/dgsm.hpp"
#include "fgsa/distributions.hpp"
#include "fgsa/grid.hpp"
#include "fgsa/sobol.hpp"

namespace fgsa {

/**
 * Closed-form two-parameter process on [0, 1],
 *   f(s; theta) = theta_1 sin(pi s) + 0.5 theta_2 s,  theta ~ U(-1, 1)^2,
 * used as a fixture: every screening and sensitivity quantity below has an
 * exact value, so estimators can be checked end to end.
 */
struct ToyProcess {
  static constexpr double pi = std::numbers::pi;

  static double evaluate(double s, double theta1, double theta2) {
    return theta1 * std::sin(pi * s) + 0.5 * theta2 * s;
  }

  static Eigen::VectorXd evaluate_on_grid(const SpatialGrid& grid,
                                          const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
    Eigen::VectorXd out(grid.size());
    for (int k = 0; k < grid.size(); ++k) out(k) = evaluate(grid.points(k, 0), theta(0), theta(1));
    return out;
  }

  /** d f / d theta_1 = sin(pi s): independent of theta. */
  static Eigen::VectorXd d_theta1_on_grid(const SpatialGrid& grid) {
    Eigen::VectorXd out(grid.size());
    for (int k = 0; k < grid.size(); ++k) out(k) = std::sin(pi * grid.points(k, 0));
    return out;
  }

  /** d f / d theta_2 = 0.5 s. */
  static Eigen::VectorXd d_theta2_on_grid(const SpatialGrid& grid) {
    return 0.5 * grid.points.col(0);
  }

  static FieldFunction field_function(const SpatialGrid& grid) {
    return [grid](const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
      return evaluate_on_grid(grid, theta);
    };
  }

  static ParameterSpace parameter_space() { return ParameterSpace::uniform_cube(2); }

  /** Covariance kernel (1/3) sin(pi s) sin(pi t) + (1/12) s t. */
  static double covariance(double s, double t) {
    return std::sin(pi * s) * std::sin(pi * t) / 3.0 + s * t / 12.0;
  }

  // Exact sensitivity quantities.
  static constexpr double functional_dgsm_1 = 0.5;         // integral of sin^2
  static constexpr double functional_dgsm_2 = 1.0 / 12.0;  // integral of (s/2)^2
  static constexpr double trace = 7.0 / 36.0;              // integral of c(s, s)
  static constexpr double sobol_total_1 = 6.0 / 7.0;
  static constexpr double sobol_total_2 = 1.0 / 7.0;
  static double bound_1() { return 72.0 / (7.0 * pi * pi); }
  static double bound_2() { return 12.0 / (7.0 * pi * pi); }

  /** Pointwise total index of theta_1 (theta_2's is the complement). */
  static double pointwise_total_1(double s) {
    const double a = std::sin(pi * s) * std::sin(pi * s);
    const double denom = a + 0.25 * s * s;
    return denom > 0.0 ? a / denom : 0.0;
  }

  /**
   * The covariance has rank two; its nonzero eigenvalues solve the 2x2
   * reduced problem diag(1/3, 1/12) * Gram on span{sin(pi s), s}.
   */
  static std::pair<double, double> kle_eigenvalues() {
    const double tr = 7.0 / 36.0;
    const double det = 1.0 / 216.0 - 1.0 / (36.0 * pi * pi);
    const double disc = std::sqrt(tr * tr - 4.0 * det);
    return {(tr + disc) / 2.0, (tr - disc) / 2.0};
  }
};

/** Mode-projection pipeline adapter for the toy process. */
class ToyModel : public FunctionalModel {
 public:
  explicit ToyModel(SpatialGrid grid) : grid_(std::move(grid)) {}

  const SpatialGrid& output_grid() const override { return grid_; }
  int n_par() const override { return 2; }

  Forward solve_forward(const Eigen::Ref<const Eigen::RowVectorXd>& theta) const override {
    return {ToyProcess::evaluate_on_grid(grid_, theta), nullptr};
  }

  Eigen::MatrixXd mode_gradients(const Eigen::Ref<const Eigen::RowVectorXd>&, const Forward&,
                                 const KLExpansion& kle, int n_qoi) const override {
    // Exact parametric derivative fields projected onto the retained modes:
    // d f_i / d theta_j = <d f / d theta_j, phi_i> / sigma_i.
    Eigen::MatrixXd fields(grid_.size(), 2);
    fields.col(0) = ToyProcess::d_theta1_on_grid(grid_);
    fields.col(1) = ToyProcess::d_theta2_on_grid(grid_);
    Eigen::MatrixXd out(n_qoi, 2);
    for (int i = 0; i < n_qoi; ++i) {
      const double sigma = std::sqrt(kle.eigenvalues(i));
      for (int j = 0; j < 2; ++j)
        out(i, j) = inner_product(fields.col(j), kle.modes.col(i), grid_) / sigma;
    }
    return out;
  }

 private:
  SpatialGrid grid_;
};

/** Direct-screening adapter: exact derivative fields with every solve. */
class ToyGradientModel : public GradientModel {
 public:
  explicit ToyGradientModel(SpatialGrid grid)
      : grid_(std::move(grid)),
        d1_(ToyProcess::d_theta1_on_grid(grid_)),
        d2_(ToyProcess::d_theta2_on_grid(grid_)) {}

  const SpatialGrid& output_grid() const override { return grid_; }
  int n_par() const override { return 2; }

  void evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::VectorXd& qoi,
                Eigen::MatrixXd& grads) const override {
    qoi = ToyProcess::evaluate_on_grid(grid_, theta);
    grads.resize(grid_.size(), 2);
    grads.col(0) = d1_;
    grads.col(1) = d2_;
  }

 private:
  SpatialGrid grid_;
  Eigen::VectorXd d1_, d2_;
};

}  // namespace fgsa
