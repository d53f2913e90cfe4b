#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fgsa/distributions.hpp"
#include "fgsa/grid.hpp"
#include "fgsa/parallel.hpp"
#include "fgsa/sobol.hpp"

namespace fgsa {

/**
 * Reduced model f^(eta)(s, theta_U) = f(s, theta_U, eta): the retained
 * coordinates pass through, the complement is frozen at eta. Operates on
 * full-length theta rows so full and reduced models can share samples.
 */
class ReducedModel {
 public:
  ReducedModel(FieldFunction base, int n_par, std::vector<int> retained,
               Eigen::VectorXd frozen_values)
      : base_(std::move(base)),
        n_par_(n_par),
        retained_(std::move(retained)),
        frozen_(std::move(frozen_values)) {
    if (!base_) throw std::invalid_argument("ReducedModel: null base model");
    if (retained_.empty()) throw std::invalid_argument("ReducedModel: empty retained set");
    std::sort(retained_.begin(), retained_.end());
    if (std::adjacent_find(retained_.begin(), retained_.end()) != retained_.end())
      throw std::invalid_argument("ReducedModel: duplicate retained index");
    if (retained_.front() < 0 || retained_.back() >= n_par_)
      throw std::invalid_argument("ReducedModel: retained index out of range");
    complement_.reserve(static_cast<std::size_t>(n_par_) - retained_.size());
    for (int j = 0, k = 0; j < n_par_; ++j) {
      if (k < static_cast<int>(retained_.size()) && retained_[static_cast<std::size_t>(k)] == j)
        ++k;
      else
        complement_.push_back(j);
    }
    if (frozen_.size() != static_cast<Eigen::Index>(complement_.size()))
      throw std::invalid_argument("ReducedModel: frozen values/complement size mismatch");
  }

  /** Freeze the complement at zero (the nominal for all parameterizations here). */
  ReducedModel(FieldFunction base, int n_par, const std::vector<int>& retained)
      : ReducedModel(std::move(base), n_par, retained,
                     Eigen::VectorXd::Zero(
                         std::max(n_par - static_cast<int>(retained.size()), 0))) {}

  int n_par() const { return n_par_; }
  const std::vector<int>& retained() const { return retained_; }
  const std::vector<int>& complement() const { return complement_; }

  /** Replace the complement coordinates of a full-length row with eta. */
  Eigen::RowVectorXd lift(const Eigen::Ref<const Eigen::RowVectorXd>& theta) const {
    if (theta.size() != n_par_) throw std::invalid_argument("ReducedModel: theta length mismatch");
    Eigen::RowVectorXd full = theta;
    for (std::size_t k = 0; k < complement_.size(); ++k)
      full(complement_[k]) = frozen_(static_cast<Eigen::Index>(k));
    return full;
  }

  Eigen::VectorXd evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& theta) const {
    return base_(lift(theta));
  }

  FieldFunction as_field_function() const {
    ReducedModel copy = *this;
    return [copy](const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
      return copy.evaluate(theta);
    };
  }

 private:
  FieldFunction base_;
  int n_par_;
  std::vector<int> retained_;
  std::vector<int> complement_;
  Eigen::VectorXd frozen_;
};

/**
 * Relative mean-square reduction error ∫∫(f - f_red)² / ∫∫f², both integrals
 * over the same theta sample and the same output grid (the denominator is
 * the un-centered second moment).
 */
inline double relative_mse(const FieldFunction& full, const FieldFunction& reduced,
                           const ParameterSpace& space, const SpatialGrid& grid, int n,
                           std::uint64_t seed, int jobs = 1) {
  if (n < 2) throw std::invalid_argument("relative_mse: need n >= 2");
  const Eigen::MatrixXd thetas = sample(space, n, seed, jobs);
  std::vector<double> num(static_cast<std::size_t>(n)), den(static_cast<std::size_t>(n));
  parallel_for(n, jobs, [&](int m) {
    const Eigen::VectorXd f = full(thetas.row(m));
    const Eigen::VectorXd g = reduced(thetas.row(m));
    if (f.size() != grid.size() || g.size() != grid.size())
      throw std::invalid_argument("relative_mse: model output/grid size mismatch");
    num[static_cast<std::size_t>(m)] = integrate((f - g).cwiseAbs2(), grid);
    den[static_cast<std::size_t>(m)] = integrate(f.cwiseAbs2(), grid);
  });
  double num_sum = 0.0, den_sum = 0.0;  // serial, index order: result independent of jobs
  for (int m = 0; m < n; ++m) {
    num_sum += num[static_cast<std::size_t>(m)];
    den_sum += den[static_cast<std::size_t>(m)];
  }
  if (!(den_sum > 0.0)) throw std::runtime_error("relative_mse: identically-zero process");
  return num_sum / den_sum;
}

struct Prop22Result {
  double lhs = 0.0;         // E_eta{ E_theta ||f - f_eta||² } / total variance
  double lhs_stderr = 0.0;  // over the outer (eta) sample
  double rhs = 0.0;         // 2 * functional total index of the frozen group
  double rhs_stderr = 0.0;
  bool holds = false;  // lhs <= rhs + 3 * combined stderr
  Eigen::VectorXd pointwise_lhs;         // E_{eta,theta}(f - f_eta)²(s), un-normalized
  Eigen::VectorXd pointwise_lhs_stderr;  // over the outer sample
  Eigen::VectorXd pointwise_rhs;         // 2 * D_tot(s) of the frozen group
  Eigen::VectorXd pointwise_rhs_stderr;
};

/**
 * Nested-MC check of the reduction-error bound: the eta-averaged relative
 * error of freezing the complement of `retained` is at most twice the
 * functional total Sobol' index of the frozen group. The un-normalized
 * pointwise average equals 2 D_tot(s) exactly in expectation, so the
 * pointwise fields let callers verify the equality behind the bound.
 *
 * Streams: outer eta draws and inner theta draws live at offsets >= 2^20,
 * the pick-freeze pass and the variance normalizer below 2^20, so the two
 * estimates are independent for any n below ~half a million.
 */
inline Prop22Result check_prop_2_2(const FieldFunction& full, const std::vector<int>& retained,
                                   const ParameterSpace& space, const SpatialGrid& grid,
                                   int n_outer = 64, int n_inner = 256, std::uint64_t seed = 0,
                                   int jobs = 1) {
  const int d = space.n_par();
  if (n_outer < 2 || n_inner < 2)
    throw std::invalid_argument("check_prop_2_2: need n_outer, n_inner >= 2");
  std::vector<int> frozen;
  {
    std::vector<int> keep = retained;
    std::sort(keep.begin(), keep.end());
    for (int j = 0, k = 0; j < d; ++j) {
      if (k < static_cast<int>(keep.size()) && keep[static_cast<std::size_t>(k)] == j)
        ++k;
      else
        frozen.push_back(j);
    }
    if (static_cast<int>(keep.size() + frozen.size()) != d ||
        (!keep.empty() && (keep.front() < 0 || keep.back() >= d)))
      throw std::invalid_argument("check_prop_2_2: retained set invalid");
  }

  Prop22Result out;
  const int n_grid = grid.size();
  out.pointwise_lhs = Eigen::VectorXd::Zero(n_grid);
  out.pointwise_lhs_stderr = Eigen::VectorXd::Zero(n_grid);
  out.pointwise_rhs = Eigen::VectorXd::Zero(n_grid);
  out.pointwise_rhs_stderr = Eigen::VectorXd::Zero(n_grid);
  if (frozen.empty()) {  // nothing frozen: error is identically zero
    out.holds = true;
    return out;
  }

  constexpr std::uint64_t kNestedBase = std::uint64_t{1} << 20;

  // Total-variance normalizer: one dedicated pass, shift-stabilized sums
  // reduced in index order so the result is independent of jobs.
  const int n_var = 2048;
  double denom;
  {
    const Eigen::MatrixXd thetas = sample(space, n_var, seed, jobs, 2 * kNestedBase);
    const Eigen::VectorXd shift = full(thetas.row(0));
    if (shift.size() != n_grid)
      throw std::invalid_argument("check_prop_2_2: model output/grid size mismatch");
    Eigen::MatrixXd shifted(n_var, n_grid);
    parallel_for(n_var, jobs,
                 [&](int m) { shifted.row(m) = (full(thetas.row(m)) - shift).transpose(); });
    Eigen::VectorXd sum1 = Eigen::VectorXd::Zero(n_grid), sum2 = Eigen::VectorXd::Zero(n_grid);
    for (int m = 0; m < n_var; ++m) {
      sum1 += shifted.row(m).transpose();
      sum2 += shifted.row(m).transpose().cwiseAbs2();
    }
    const Eigen::VectorXd var =
        (sum2 - sum1.cwiseAbs2() / n_var) / static_cast<double>(n_var - 1);
    denom = integrate(var, grid);
    if (!(denom > 0.0)) throw std::runtime_error("check_prop_2_2: zero total variance");
  }

  // Outer loop over frozen values eta; inner MC for E_theta (f - f_eta)².
  const Eigen::MatrixXd etas = sample(space, n_outer, seed, jobs, kNestedBase);
  Eigen::MatrixXd per_eta(n_outer, n_grid);
  parallel_for(n_outer, jobs, [&](int o) {
    const Eigen::MatrixXd thetas =
        sample(space, n_inner, seed, 1,
               kNestedBase + static_cast<std::uint64_t>(n_outer) +
                   static_cast<std::uint64_t>(o) * static_cast<std::uint64_t>(n_inner));
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_grid);
    for (int m = 0; m < n_inner; ++m) {
      Eigen::RowVectorXd frozen_theta = thetas.row(m);
      for (int j : frozen) frozen_theta(j) = etas(o, j);
      acc += (full(thetas.row(m)) - full(frozen_theta)).cwiseAbs2();
    }
    per_eta.row(o) = acc.transpose() / n_inner;
  });

  out.pointwise_lhs = per_eta.colwise().mean().transpose();
  const Eigen::VectorXd pw_var =
      (per_eta.rowwise() - out.pointwise_lhs.transpose()).cwiseAbs2().colwise().sum().transpose() /
      static_cast<double>(n_outer - 1);
  out.pointwise_lhs_stderr = (pw_var / n_outer).cwiseSqrt();

  Eigen::VectorXd per_eta_functional(n_outer);
  for (int o = 0; o < n_outer; ++o)
    per_eta_functional(o) = integrate(per_eta.row(o).transpose(), grid) / denom;
  out.lhs = per_eta_functional.mean();
  out.lhs_stderr = std::sqrt((per_eta_functional.array() - out.lhs).square().sum() /
                             (n_outer - 1) / n_outer);

  // Independent pick-freeze estimate of the frozen group's total index.
  const SobolResult sob = pick_freeze_total(full, space, grid, frozen,
                                            std::max(n_outer * n_inner / 4, 256), seed, jobs);
  out.rhs = 2.0 * sob.functional_total;
  out.rhs_stderr = 2.0 * sob.functional_total_stderr;
  out.pointwise_rhs = 2.0 * sob.pointwise_numerator;
  out.pointwise_rhs_stderr = 2.0 * sob.pointwise_numerator_stderr;

  out.holds = out.lhs <= out.rhs + 3.0 * std::sqrt(out.lhs_stderr * out.lhs_stderr +
                                                   out.rhs_stderr * out.rhs_stderr);
  return out;
}

namespace detail {

inline double quantile_type7(std::vector<double> sorted, double p) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double silverman_bandwidth(const Eigen::Ref<const Eigen::VectorXd>& samples) {
  const auto n = static_cast<double>(samples.size());
  const double mean = samples.mean();
  const double sd = std::sqrt((samples.array() - mean).square().sum() / (n - 1.0));
  std::vector<double> sorted(samples.data(), samples.data() + samples.size());
  std::sort(sorted.begin(), sorted.end());
  const double q3 = detail::quantile_type7(sorted, 0.75);
  const double q1 = detail::quantile_type7(std::move(sorted), 0.25);
  const double iqr = q3 - q1;
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 1.06 * spread * std::pow(n, -0.2);
}

}  // namespace detail

/** Gaussian kernel density with Silverman's bandwidth; needs >= 30 samples. */
inline Eigen::VectorXd kde_pdf(const Eigen::Ref<const Eigen::VectorXd>& samples,
                               const Eigen::Ref<const Eigen::VectorXd>& eval_points) {
  if (samples.size() < 30) throw std::invalid_argument("kde_pdf: need at least 30 samples");
  const double h = detail::silverman_bandwidth(samples);
  if (!(h > 0.0)) throw std::invalid_argument("kde_pdf: zero-variance samples");
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h *
                             std::sqrt(2.0 * std::numbers::pi));
  Eigen::VectorXd density(eval_points.size());
  for (Eigen::Index k = 0; k < eval_points.size(); ++k)
    density(k) = norm * (-0.5 * ((samples.array() - eval_points(k)) / h).square()).exp().sum();
  return density;
}

/**
 * L¹ distance between the kernel density estimates of two sample sets,
 * integrated over a shared 512-point grid covering both supports plus three
 * bandwidths of margin.
 */
inline double pdf_l1_distance(const Eigen::Ref<const Eigen::VectorXd>& a,
                              const Eigen::Ref<const Eigen::VectorXd>& b) {
  const double ha = detail::silverman_bandwidth(a), hb = detail::silverman_bandwidth(b);
  if (!(ha > 0.0) || !(hb > 0.0))
    throw std::invalid_argument("pdf_l1_distance: zero-variance samples");
  const double lo = std::min(a.minCoeff() - 3.0 * ha, b.minCoeff() - 3.0 * hb);
  const double hi = std::max(a.maxCoeff() + 3.0 * ha, b.maxCoeff() + 3.0 * hb);
  const SpatialGrid grid = make_interval_grid(lo, hi, 512);
  return integrate((kde_pdf(a, grid.points.col(0)) - kde_pdf(b, grid.points.col(0))).cwiseAbs(),
                   grid);
}

struct RomCompareResult {
  Eigen::VectorXd dgsm_distance;  // per probe: L¹(full PDF, screening-ROM PDF)
  Eigen::VectorXd kl_distance;    // per probe: L¹(full PDF, truncation-ROM PDF)
};

/**
 * Compare two same-size retained sets by the PDFs their ROMs induce at probe
 * points. `full` maps theta to the probe values; all three models are
 * evaluated on one shared theta sample (common random numbers), so equal
 * retained sets give exactly equal distances.
 */
inline RomCompareResult rom_compare(const FieldFunction& full, const ParameterSpace& space,
                                    const std::vector<int>& dgsm_set,
                                    const std::vector<int>& kl_set, int n, std::uint64_t seed,
                                    int jobs = 1) {
  if (dgsm_set.size() != kl_set.size())
    throw std::invalid_argument("rom_compare: retained sets must have equal size");
  if (n < 30) throw std::invalid_argument("rom_compare: need at least 30 samples");

  const ReducedModel rom_dgsm(full, space.n_par(), dgsm_set);
  const ReducedModel rom_kl(full, space.n_par(), kl_set);
  const Eigen::MatrixXd thetas = sample(space, n, seed, jobs);

  const auto n_probes = full(thetas.row(0)).size();
  Eigen::MatrixXd full_vals(n, n_probes), dgsm_vals(n, n_probes), kl_vals(n, n_probes);
  parallel_for(n, jobs, [&](int m) {
    full_vals.row(m) = full(thetas.row(m)).transpose();
    dgsm_vals.row(m) = rom_dgsm.evaluate(thetas.row(m)).transpose();
    kl_vals.row(m) = rom_kl.evaluate(thetas.row(m)).transpose();
  });

  RomCompareResult out;
  out.dgsm_distance.resize(n_probes);
  out.kl_distance.resize(n_probes);
  for (Eigen::Index p = 0; p < n_probes; ++p) {
    out.dgsm_distance(p) = pdf_l1_distance(full_vals.col(p), dgsm_vals.col(p));
    out.kl_distance(p) = pdf_l1_distance(full_vals.col(p), kl_vals.col(p));
  }
  return out;
}

}  // namespace fgsa
