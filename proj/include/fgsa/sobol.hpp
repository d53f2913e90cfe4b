#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "fgsa/distributions.hpp"
#include "fgsa/grid.hpp"
#include "fgsa/parallel.hpp"

namespace fgsa {

/**
 * Pick-freeze estimates for one parameter (or parameter group). Pointwise
 * indices use the convention index = 0 wherever the variance estimate is
 * zero; functional indices are variance-weighted averages, algebraically
 * integral(numerator)/integral(variance). `functional_*` is reported raw
 * (small negative excursions are sampling noise); `*_clamped` is the same
 * value clipped to [0, 1].
 */
struct SobolResult {
  Eigen::VectorXd pointwise_total;        // Jansen total-effect index per point
  Eigen::VectorXd pointwise_first;        // first-order (closed, for groups)
  Eigen::VectorXd pointwise_numerator;    // total-effect numerator D_tot(s)
  Eigen::VectorXd pointwise_variance;     // pooled variance D(s) over both blocks
  double functional_total = 0.0;
  double functional_total_clamped = 0.0;
  double functional_first = 0.0;
  double functional_first_clamped = 0.0;
  double functional_total_stderr = 0.0;   // batch-means standard error
  double functional_first_stderr = 0.0;
  Eigen::VectorXd pointwise_numerator_stderr;  // batch-means, per point
  int n = 0;
};

namespace detail {

struct SobolBlockAcc {
  Eigen::VectorXd num_total;  // sum (f_A - f_AB)^2
  Eigen::VectorXd num_first;  // sum f_B (f_AB - f_A)
  Eigen::VectorXd s1;         // sum of shifted values over both blocks
  Eigen::VectorXd s2;         // sum of squared shifted values
  long count = 0;
};

/** Variance-weighted functional index from block sums over `count` pairs. */
inline double functional_from_sums(const SobolBlockAcc& acc, const Eigen::VectorXd& numerator,
                                   double per_pair_scale, const SpatialGrid& grid) {
  const double two_n = 2.0 * static_cast<double>(acc.count);
  const Eigen::VectorXd variance =
      (acc.s2 - acc.s1.cwiseAbs2() / two_n) / (two_n - 1.0);
  const double denom = grid.weights.dot(variance);
  if (denom <= 0.0) return 0.0;
  return grid.weights.dot(numerator) * per_pair_scale / denom;
}

}  // namespace detail

/**
 * Both-block pick-freeze estimator for the parameter group `group`: takes
 * 2n base solves plus n hybrid solves (hybrid rows copy the group's columns
 * from the second block). Total effect is Jansen's estimator, first order is
 * the f_B (f_AB - f_A) form; the variance pools both base blocks. The batch
 * standard error splits the pairs into 10 contiguous batches and takes the
 * spread of per-batch functional indices. Sampling is tied to (seed, row)
 * so results are independent of `jobs`.
 */
inline SobolResult pick_freeze_total(const FieldFunction& model, const ParameterSpace& space,
                                     const SpatialGrid& grid, const std::vector<int>& group,
                                     int n, std::uint64_t seed, int jobs = 1) {
  if (n < 2) throw std::invalid_argument("pick_freeze_total: need n >= 2");
  if (group.empty()) throw std::invalid_argument("pick_freeze_total: empty group");
  for (int j : group)
    if (j < 0 || j >= space.n_par())
      throw std::invalid_argument("pick_freeze_total: group index out of range");

  const Eigen::MatrixXd A = sample(space, n, seed, jobs, 0);
  const Eigen::MatrixXd B = sample(space, n, seed, jobs, n);
  const int n_grid = grid.size();

  // Fixed shift field stabilizes the pooled variance sums.
  const Eigen::VectorXd shift = model(A.row(0));
  if (shift.size() != n_grid)
    throw std::invalid_argument("pick_freeze_total: model output/grid size mismatch");

  const int n_batches = std::min(10, n / 2);
  const int block = (n + n_batches - 1) / n_batches;

  std::vector<detail::SobolBlockAcc> batches;
  detail::SobolBlockAcc total;
  total.num_total = Eigen::VectorXd::Zero(n_grid);
  total.num_first = Eigen::VectorXd::Zero(n_grid);
  total.s1 = Eigen::VectorXd::Zero(n_grid);
  total.s2 = Eigen::VectorXd::Zero(n_grid);

  block_map_reduce<detail::SobolBlockAcc>(
      n, jobs, block,
      [&](int begin, int end) {
        detail::SobolBlockAcc acc;
        acc.num_total = Eigen::VectorXd::Zero(n_grid);
        acc.num_first = Eigen::VectorXd::Zero(n_grid);
        acc.s1 = Eigen::VectorXd::Zero(n_grid);
        acc.s2 = Eigen::VectorXd::Zero(n_grid);
        Eigen::RowVectorXd hybrid(space.n_par());
        for (int m = begin; m < end; ++m) {
          const Eigen::VectorXd fa = model(A.row(m));
          const Eigen::VectorXd fb = model(B.row(m));
          hybrid = A.row(m);
          for (int j : group) hybrid(j) = B(m, j);
          const Eigen::VectorXd fab = model(hybrid);
          if (fa.size() != n_grid || fb.size() != n_grid || fab.size() != n_grid)
            throw std::invalid_argument("pick_freeze_total: model output/grid size mismatch");
          acc.num_total += (fa - fab).cwiseAbs2();
          acc.num_first += fb.cwiseProduct(fab - fa);
          acc.s1 += (fa - shift) + (fb - shift);
          acc.s2 += (fa - shift).cwiseAbs2() + (fb - shift).cwiseAbs2();
          ++acc.count;
        }
        return acc;
      },
      [&](int, detail::SobolBlockAcc&& acc) {
        total.num_total += acc.num_total;
        total.num_first += acc.num_first;
        total.s1 += acc.s1;
        total.s2 += acc.s2;
        total.count += acc.count;
        batches.push_back(std::move(acc));
      });

  SobolResult out;
  out.n = n;
  const double two_n = 2.0 * n;
  out.pointwise_numerator = total.num_total / two_n;
  out.pointwise_variance = (total.s2 - total.s1.cwiseAbs2() / two_n) / (two_n - 1.0);
  out.pointwise_total.resize(n_grid);
  out.pointwise_first.resize(n_grid);
  for (int k = 0; k < n_grid; ++k) {
    const double d = out.pointwise_variance(k);
    out.pointwise_total(k) = d > 0.0 ? out.pointwise_numerator(k) / d : 0.0;
    out.pointwise_first(k) = d > 0.0 ? total.num_first(k) / n / d : 0.0;
  }

  out.functional_total = detail::functional_from_sums(total, total.num_total, 1.0 / two_n, grid);
  out.functional_first = detail::functional_from_sums(total, total.num_first, 1.0 / n, grid);
  out.functional_total_clamped = std::clamp(out.functional_total, 0.0, 1.0);
  out.functional_first_clamped = std::clamp(out.functional_first, 0.0, 1.0);

  if (static_cast<int>(batches.size()) >= 2) {
    auto batch_stderr = [&](bool first_order) {
      std::vector<double> vals;
      vals.reserve(batches.size());
      for (const auto& b : batches)
        vals.push_back(detail::functional_from_sums(
            b, first_order ? b.num_first : b.num_total,
            first_order ? 1.0 / static_cast<double>(b.count)
                        : 1.0 / (2.0 * static_cast<double>(b.count)),
            grid));
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= static_cast<double>(vals.size());
      double ss = 0.0;
      for (double v : vals) ss += (v - mean) * (v - mean);
      const double var = ss / static_cast<double>(vals.size() - 1);
      return std::sqrt(var / static_cast<double>(vals.size()));
    };
    out.functional_total_stderr = batch_stderr(false);
    out.functional_first_stderr = batch_stderr(true);

    const auto nb = static_cast<double>(batches.size());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_grid), ss = Eigen::VectorXd::Zero(n_grid);
    for (const auto& b : batches) mean += b.num_total / (2.0 * static_cast<double>(b.count));
    mean /= nb;
    for (const auto& b : batches)
      ss += (b.num_total / (2.0 * static_cast<double>(b.count)) - mean).cwiseAbs2();
    out.pointwise_numerator_stderr = (ss / (nb - 1.0) / nb).cwiseSqrt();
  } else {
    out.pointwise_numerator_stderr = Eigen::VectorXd::Zero(n_grid);
  }
  return out;
}

/** Single-parameter convenience overload. */
inline SobolResult pick_freeze_total(const FieldFunction& model, const ParameterSpace& space,
                                     const SpatialGrid& grid, int j, int n, std::uint64_t seed,
                                     int jobs = 1) {
  return pick_freeze_total(model, space, grid, std::vector<int>{j}, n, seed, jobs);
}

/**
 * Functional index from pointwise index and variance fields: the average of
 * the index under the normalized variance weight D(s)/integral(D).
 */
inline double functional_total(const Eigen::Ref<const Eigen::VectorXd>& pointwise_index,
                               const Eigen::Ref<const Eigen::VectorXd>& pointwise_variance,
                               const SpatialGrid& grid) {
  if (pointwise_index.size() != grid.size() || pointwise_variance.size() != grid.size())
    throw std::invalid_argument("functional_total: field/grid size mismatch");
  const double denom = grid.weights.dot(pointwise_variance);
  if (denom <= 0.0) return 0.0;
  return grid.weights.dot(pointwise_index.cwiseProduct(pointwise_variance)) / denom;
}

/** All singleton totals against the same (seed-tied) pair of base blocks. */
inline std::vector<SobolResult> sobol_all_totals(const FieldFunction& model,
                                                 const ParameterSpace& space,
                                                 const SpatialGrid& grid, int n,
                                                 std::uint64_t seed, int jobs = 1) {
  std::vector<SobolResult> out;
  out.reserve(static_cast<std::size_t>(space.n_par()));
  for (int j = 0; j < space.n_par(); ++j)
    out.push_back(pick_freeze_total(model, space, grid, j, n, seed, jobs));
  return out;
}

}  // namespace fgsa
