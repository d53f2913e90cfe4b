#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>

namespace fgsa {

using OdeRhs = std::function<void(double, const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct OdeOptions {
  double rtol = 1e-8;
  double atol = 1e-10;
  long max_steps = 2'000'000;
};

struct OdeSolution {
  Eigen::VectorXd times;   // requested output times
  Eigen::MatrixXd states;  // one row per output time
  long n_steps = 0;        // accepted steps
  long n_rhs = 0;          // RHS evaluations
};

/**
 * Dormand-Prince 5(4) with PI-free standard step control, FSAL reuse and the
 * classic quartic dense-output polynomial: integrates from times(0) to the
 * final entry and fills every requested time by interpolation within the
 * accepted step that covers it. Throws on step-size underflow (with the time
 * at which it occurred) and when max_steps is exceeded.
 */
inline OdeSolution integrate_dp45(const OdeRhs& rhs, const Eigen::VectorXd& y0,
                                  const Eigen::VectorXd& times, const OdeOptions& opt = {}) {
  const Eigen::Index n = y0.size();
  const Eigen::Index n_out = times.size();
  if (n_out < 1) throw std::invalid_argument("integrate_dp45: need at least one output time");
  for (Eigen::Index i = 1; i < n_out; ++i)
    if (times(i) <= times(i - 1))
      throw std::invalid_argument("integrate_dp45: output times must be strictly increasing");
  if (!(opt.rtol > 0.0) || !(opt.atol > 0.0))
    throw std::invalid_argument("integrate_dp45: tolerances must be positive");

  // Butcher tableau (stage coefficients, 5th-order weights, error weights).
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                          a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                          b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                          e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
  // Dense-output weights for the internal quartic interpolant.
  static constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                          d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                          d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

  OdeSolution sol;
  sol.times = times;
  sol.states.resize(n_out, n);
  sol.states.row(0) = y0.transpose();
  if (n_out == 1) return sol;

  const double t_end = times(n_out - 1);
  double t = times(0);
  Eigen::VectorXd y = y0;
  Eigen::VectorXd k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), ytmp(n), ynew(n), yerr(n);
  rhs(t, y, k1);
  ++sol.n_rhs;

  auto scaled_rms = [&](const Eigen::VectorXd& v, const Eigen::VectorXd& y_a,
                        const Eigen::VectorXd& y_b) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double sc = opt.atol + opt.rtol * std::max(std::abs(y_a(i)), std::abs(y_b(i)));
      const double q = v(i) / sc;
      acc += q * q;
    }
    return std::sqrt(acc / static_cast<double>(n));
  };

  // Starting step size from the standard two-evaluation heuristic.
  double h;
  {
    const double d0 = scaled_rms(y, y, y);
    const double dd1 = scaled_rms(k1, y, y);
    double h0 = (d0 < 1e-5 || dd1 < 1e-5) ? 1e-6 : 0.01 * d0 / dd1;
    h0 = std::min(h0, t_end - t);
    ytmp = y + h0 * k1;
    rhs(t + h0, ytmp, k2);
    ++sol.n_rhs;
    const double dd2 = scaled_rms(k2 - k1, y, y) / h0;
    double h1;
    if (std::max(dd1, dd2) <= 1e-15)
      h1 = std::max(1e-6, h0 * 1e-3);
    else
      h1 = std::pow(0.01 / std::max(dd1, dd2), 0.2);
    h = std::min({100.0 * h0, h1, t_end - t});
  }

  Eigen::Index next_out = 1;
  long steps = 0;
  while (t < t_end) {
    if (++steps > opt.max_steps) throw std::runtime_error("integrate_dp45: max_steps exceeded");
    h = std::min(h, t_end - t);
    if (h < 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(t), 1.0)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "integrate_dp45: step size underflow at t=%.12g", t);
      throw std::runtime_error(buf);
    }

    ytmp = y + h * (a21 * k1);
    rhs(t + c2 * h, ytmp, k2);
    ytmp = y + h * (a31 * k1 + a32 * k2);
    rhs(t + c3 * h, ytmp, k3);
    ytmp = y + h * (a41 * k1 + a42 * k2 + a43 * k3);
    rhs(t + c4 * h, ytmp, k4);
    ytmp = y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
    rhs(t + c5 * h, ytmp, k5);
    ytmp = y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
    rhs(t + h, ytmp, k6);
    ynew = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
    rhs(t + h, ynew, k7);
    sol.n_rhs += 6;

    yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double err = scaled_rms(yerr, y, ynew);

    if (err <= 1.0) {
      ++sol.n_steps;
      // Fill requested outputs inside (t, t+h] via the dense interpolant.
      if (next_out < n_out && times(next_out) <= t + h) {
        const Eigen::VectorXd dy = ynew - y;
        const Eigen::VectorXd r3 = h * k1 - dy;
        const Eigen::VectorXd r4 = dy - h * k7 - r3;
        const Eigen::VectorXd r5 =
            h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
        while (next_out < n_out && times(next_out) <= t + h) {
          const double sigma = (times(next_out) - t) / h;
          sol.states.row(next_out) =
              (y + sigma * (dy + (1.0 - sigma) * (r3 + sigma * (r4 + (1.0 - sigma) * r5))))
                  .transpose();
          ++next_out;
        }
      }
      t += h;
      y.swap(ynew);
      k1.swap(k7);  // first-same-as-last
      const double factor =
          err == 0.0 ? 5.0 : std::min(5.0, std::max(0.2, 0.9 * std::pow(err, -0.2)));
      h *= factor;
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
  }
  // The final time is covered by the last accepted step's interpolant, but
  // guard against it landing exactly on t_end with roundoff left over.
  if (next_out == n_out - 1 && std::abs(times(next_out) - t) <=
                                   8.0 * std::numeric_limits<double>::epsilon() * std::abs(t)) {
    sol.states.row(next_out) = y.transpose();
    ++next_out;
  }
  if (next_out != n_out) throw std::runtime_error("integrate_dp45: internal output bookkeeping");
  return sol;
}

}  // namespace fgsa
