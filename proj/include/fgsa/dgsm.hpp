#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgsa/distributions.hpp"
#include "fgsa/grid.hpp"
#include "fgsa/kle.hpp"
#include "fgsa/parallel.hpp"

namespace fgsa {

/**
 * Per-sample parametric derivatives: samples[m] is either n_qoi x n_par
 * (mode-coordinate derivatives d f_i / d theta_j) or n_grid x n_par
 * (pointwise derivative fields) depending on the pathway.
 */
struct GradientEnsemble {
  std::vector<Eigen::MatrixXd> samples;

  int n_mc() const { return static_cast<int>(samples.size()); }

  void validate() const {
    if (samples.empty()) throw std::invalid_argument("GradientEnsemble: empty");
    for (std::size_t m = 0; m < samples.size(); ++m) {
      if (samples[m].rows() != samples[0].rows() || samples[m].cols() != samples[0].cols())
        throw std::invalid_argument("GradientEnsemble: inconsistent dimensions");
      if (!samples[m].allFinite())
        throw std::invalid_argument("GradientEnsemble: non-finite entry at sample " +
                                    std::to_string(m));
    }
  }
};

/** Mean-square derivative measure of a scalar map: mean of squared samples. */
inline double nu_scalar(const Eigen::Ref<const Eigen::VectorXd>& grad_samples) {
  if (grad_samples.size() == 0) throw std::invalid_argument("nu_scalar: empty sample set");
  return grad_samples.cwiseAbs2().mean();
}

/** Per-mode, per-parameter measures nu_j(f_i): rows i, cols j. */
inline Eigen::MatrixXd nu_modes_from_gradients(const GradientEnsemble& grads) {
  grads.validate();
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(grads.samples[0].rows(), grads.samples[0].cols());
  for (const auto& g : grads.samples) acc += g.cwiseAbs2();
  return acc / static_cast<double>(grads.n_mc());
}

/**
 * Functional derivative measures by direct quadrature: samples hold
 * pointwise derivative fields (n_grid x n_par); the result per parameter is
 * the grid integral of the pointwise mean square.
 */
inline Eigen::VectorXd functional_dgsm_direct(const GradientEnsemble& grads,
                                              const SpatialGrid& grid) {
  grads.validate();
  if (grads.samples[0].rows() != grid.size())
    throw std::invalid_argument("functional_dgsm_direct: field/grid size mismatch");
  return nu_modes_from_gradients(grads).transpose() * grid.weights;
}

/** Single-parameter convenience: rows of `grad` are per-sample fields. */
inline double functional_dgsm_direct(const Eigen::Ref<const Eigen::MatrixXd>& grad,
                                     const SpatialGrid& grid) {
  if (grad.cols() != grid.size())
    throw std::invalid_argument("functional_dgsm_direct: field/grid size mismatch");
  if (grad.rows() == 0) throw std::invalid_argument("functional_dgsm_direct: empty sample set");
  const Eigen::VectorXd mean_square = grad.cwiseAbs2().colwise().mean();
  return grid.weights.dot(mean_square);
}

/**
 * Finite-rank form: N_j = sum_i lambda_i nu_j(f_i), with nu_modes holding
 * nu_j(f_i) as rows i, cols j. Eigenvalues must be nonnegative.
 */
inline Eigen::VectorXd functional_dgsm_finite_rank(
    const Eigen::Ref<const Eigen::MatrixXd>& nu_modes,
    const Eigen::Ref<const Eigen::VectorXd>& eigenvalues) {
  if (nu_modes.rows() != eigenvalues.size())
    throw std::invalid_argument("functional_dgsm_finite_rank: mode count mismatch");
  if ((eigenvalues.array() < 0.0).any())
    throw std::invalid_argument("functional_dgsm_finite_rank: negative eigenvalue");
  return nu_modes.transpose() * eigenvalues;
}

/**
 * Screening bounds B_j = alpha_j * N_j / trace. The trace must be positive;
 * alphas are the per-parameter transport-inequality constants.
 */
inline Eigen::VectorXd dgsm_bound(const Eigen::Ref<const Eigen::VectorXd>& functional_dgsm,
                                  double trace,
                                  const Eigen::Ref<const Eigen::VectorXd>& alphas) {
  if (functional_dgsm.size() != alphas.size())
    throw std::invalid_argument("dgsm_bound: length mismatch");
  if (!(trace > 0.0)) throw std::invalid_argument("dgsm_bound: trace must be positive");
  return alphas.cwiseProduct(functional_dgsm) / trace;
}

/**
 * Model interface for the mode-projection screening pipeline. A forward
 * solve returns the output field plus an opaque state handle the model may
 * reuse when forming per-mode parametric gradients (adjoint solves for PDE
 * models, stored sensitivities for ODE models).
 */
class FunctionalModel {
 public:
  struct Forward {
    Eigen::VectorXd qoi;                // output field on output_grid()
    std::shared_ptr<const void> state;  // model-defined reusable state
  };

  virtual ~FunctionalModel() = default;
  virtual const SpatialGrid& output_grid() const = 0;
  virtual int n_par() const = 0;
  virtual Forward solve_forward(const Eigen::Ref<const Eigen::RowVectorXd>& theta) const = 0;
  /** d f_i / d theta_j for retained modes: rows i = 1..n_qoi, cols j. */
  virtual Eigen::MatrixXd mode_gradients(const Eigen::Ref<const Eigen::RowVectorXd>& theta,
                                         const Forward& forward, const KLExpansion& kle,
                                         int n_qoi) const = 0;
};

/** Model interface for direct screening: one solve yields field + gradients. */
class GradientModel {
 public:
  virtual ~GradientModel() = default;
  virtual const SpatialGrid& output_grid() const = 0;
  virtual int n_par() const = 0;
  /** qoi: field on output_grid(); grads: n_grid x n_par derivative fields. */
  virtual void evaluate(const Eigen::Ref<const Eigen::RowVectorXd>& theta, Eigen::VectorXd& qoi,
                        Eigen::MatrixXd& grads) const = 0;
};

/** Screening report from either pathway. */
struct DgsmReport {
  Eigen::MatrixXd nu_modes;          // n_qoi x n_par (mode-projection path)
  Eigen::VectorXd functional_dgsm;   // N_j
  Eigen::VectorXd normalized;        // N_j / sum_k N_k (zero vector if sum is 0)
  Eigen::VectorXd bound;             // B_j = alpha_j N_j / trace
  Eigen::VectorXd stderr_dgsm;       // 10-batch batch-means error of N_j
  Eigen::VectorXd bound_stderr;      // same error propagated to B_j
  std::vector<bool> important;       // bound >= threshold
  double trace = 0.0;                // variance normalization actually used
  double threshold = 0.0;
  int n_mc = 0;
  int n_qoi = 0;
  int n_forward_solves = 0;
  int n_adjoint_solves = 0;
  KLExpansion kle;                   // retained expansion (mode-projection path)

  void finalize(const Eigen::VectorXd& alphas) {
    const double total = functional_dgsm.sum();
    normalized = total > 0.0 ? Eigen::VectorXd(functional_dgsm / total)
                             : Eigen::VectorXd::Zero(functional_dgsm.size());
    bound = dgsm_bound(functional_dgsm, trace, alphas);
    bound_stderr = alphas.cwiseProduct(stderr_dgsm) / trace;
    important.assign(static_cast<std::size_t>(bound.size()), false);
    for (Eigen::Index j = 0; j < bound.size(); ++j)
      important[static_cast<std::size_t>(j)] = bound(j) >= threshold;
  }
};

namespace detail {

/** Batch boundaries for batch-means error bars: batch b is [b*n/k, (b+1)*n/k). */
inline int batch_of(int m, int n, int n_batches) {
  return static_cast<int>((static_cast<long long>(m) * n_batches) / n);
}

/** Batch-means standard error of the mean from per-batch sums and counts. */
inline double batch_means_stderr(const Eigen::VectorXd& batch_sums,
                                 const Eigen::VectorXd& batch_counts) {
  const int k = static_cast<int>(batch_sums.size());
  if (k < 2) return 0.0;
  Eigen::VectorXd means = batch_sums.cwiseQuotient(batch_counts);
  const double mean = means.mean();
  const double var = (means.array() - mean).square().sum() / (k - 1);
  return std::sqrt(var / k);
}

[[noreturn]] inline void rethrow_with_sample(const std::exception& e, int m) {
  throw std::runtime_error("sample " + std::to_string(m) + ": " + e.what());
}

}  // namespace detail

/**
 * Mode-projection screening: n_mc forward solves build the output ensemble,
 * its truncated expansion defines n_qoi scalar maps, per-sample mode
 * gradients give nu_j(f_i), and bounds use the retained eigenvalue sum as
 * the variance normalization — total cost n_mc (1 + n_qoi) solves for models
 * whose mode gradients each take one adjoint solve. Gradient samples reuse
 * the ensemble samples unless `fresh_gradient_samples` requests a second
 * independent set (bias diagnostics; doubles the forward cost). Work is
 * block-parallel with an in-order reduction, so results are independent of
 * `jobs`. Model failures are rethrown with the sample index attached.
 */
inline DgsmReport run_algorithm_1(const FunctionalModel& model, const ParameterSpace& space,
                                  int n_mc, int n_qoi, std::uint64_t seed, double threshold,
                                  int jobs = 1, bool fresh_gradient_samples = false) {
  if (n_mc < 2) throw std::invalid_argument("run_algorithm_1: need n_mc >= 2");
  if (model.n_par() != space.n_par())
    throw std::invalid_argument("run_algorithm_1: model/space parameter count mismatch");
  const SpatialGrid& grid = model.output_grid();
  if (n_qoi < 1 || n_qoi > grid.size())
    throw std::invalid_argument("run_algorithm_1: n_qoi out of range");

  const int d = space.n_par();
  const Eigen::MatrixXd theta = sample(space, n_mc, seed, jobs);

  // Forward ensemble; states are kept for gradient reuse.
  ProcessEnsemble ensemble;
  ensemble.grid = grid;
  ensemble.values.resize(n_mc, grid.size());
  std::vector<FunctionalModel::Forward> forwards(static_cast<std::size_t>(n_mc));
  parallel_for(n_mc, jobs, [&](int m) {
    try {
      forwards[static_cast<std::size_t>(m)] = model.solve_forward(theta.row(m));
    } catch (const std::exception& e) {
      detail::rethrow_with_sample(e, m);
    }
    if (forwards[static_cast<std::size_t>(m)].qoi.size() != grid.size())
      throw std::invalid_argument("run_algorithm_1: model output/grid size mismatch");
    ensemble.values.row(m) = forwards[static_cast<std::size_t>(m)].qoi.transpose();
  });

  DgsmReport report;
  report.kle = kle_from_samples(ensemble, n_qoi);
  report.n_mc = n_mc;
  report.n_qoi = n_qoi;
  report.threshold = threshold;
  report.n_forward_solves = n_mc;
  report.n_adjoint_solves = n_mc * n_qoi;

  // Gradient sample set: the ensemble's own samples, or a fresh stream block.
  Eigen::MatrixXd theta_g = theta;
  if (fresh_gradient_samples) {
    theta_g = sample(space, n_mc, seed, jobs, /*stream_offset=*/n_mc);
    parallel_for(n_mc, jobs, [&](int m) {
      try {
        forwards[static_cast<std::size_t>(m)] = model.solve_forward(theta_g.row(m));
      } catch (const std::exception& e) {
        detail::rethrow_with_sample(e, m);
      }
    });
    report.n_forward_solves += n_mc;
  }

  // Per-sample mode gradients, accumulated per parameter and per batch of
  // the per-sample summands g_j = sum_i lambda_i (d f_i / d theta_j)^2.
  constexpr int kBatches = 10;
  Eigen::MatrixXd nu_sum = Eigen::MatrixXd::Zero(n_qoi, d);
  Eigen::MatrixXd batch_sums = Eigen::MatrixXd::Zero(kBatches, d);
  Eigen::VectorXd batch_counts = Eigen::VectorXd::Zero(kBatches);
  struct BlockAcc {
    Eigen::MatrixXd nu;
    Eigen::MatrixXd batch;
    Eigen::VectorXd counts;
  };
  block_map_reduce<BlockAcc>(
      n_mc, jobs, 32,
      [&](int begin, int end) {
        BlockAcc acc{Eigen::MatrixXd::Zero(n_qoi, d), Eigen::MatrixXd::Zero(kBatches, d),
                     Eigen::VectorXd::Zero(kBatches)};
        for (int m = begin; m < end; ++m) {
          Eigen::MatrixXd grads;
          try {
            grads = model.mode_gradients(theta_g.row(m), forwards[static_cast<std::size_t>(m)],
                                         report.kle, n_qoi);
          } catch (const std::exception& e) {
            detail::rethrow_with_sample(e, m);
          }
          if (grads.rows() != n_qoi || grads.cols() != d)
            throw std::invalid_argument("run_algorithm_1: mode_gradients shape mismatch");
          const Eigen::MatrixXd sq = grads.cwiseAbs2();
          acc.nu += sq;
          const int b = detail::batch_of(m, n_mc, kBatches);
          acc.batch.row(b) += (sq.transpose() * report.kle.eigenvalues.head(n_qoi)).transpose();
          acc.counts(b) += 1.0;
        }
        return acc;
      },
      [&](int, BlockAcc&& acc) {
        nu_sum += acc.nu;
        batch_sums += acc.batch;
        batch_counts += acc.counts;
      });

  report.nu_modes = nu_sum / static_cast<double>(n_mc);
  report.functional_dgsm =
      functional_dgsm_finite_rank(report.nu_modes, report.kle.eigenvalues);
  report.trace = report.kle.eigenvalues.sum();  // retained-variance normalization

  report.stderr_dgsm.resize(d);
  for (int j = 0; j < d; ++j)
    report.stderr_dgsm(j) = detail::batch_means_stderr(batch_sums.col(j), batch_counts);

  report.finalize(poincare_constants(space));
  return report;
}

/**
 * Direct screening for models whose solves produce full derivative fields:
 * integrates the pointwise mean-square derivatives and normalizes by the
 * full output-variance trace (grid integral of the pointwise variance).
 * Streams the ensemble in blocks; memory is O(n_grid * n_par), independent
 * of n_mc, and results are independent of `jobs`.
 */
inline DgsmReport run_direct_screening(const GradientModel& model, const ParameterSpace& space,
                                       int n_mc, std::uint64_t seed, double threshold,
                                       int jobs = 1, Eigen::VectorXd* mean_out = nullptr,
                                       Eigen::VectorXd* variance_out = nullptr) {
  if (n_mc < 2) throw std::invalid_argument("run_direct_screening: need n_mc >= 2");
  if (model.n_par() != space.n_par())
    throw std::invalid_argument("run_direct_screening: model/space parameter count mismatch");
  const SpatialGrid& grid = model.output_grid();
  const int d = space.n_par();
  const int n_grid = grid.size();
  constexpr int kBatches = 10;

  const Eigen::MatrixXd theta = sample(space, n_mc, seed, jobs);

  // Shift field (first sample's output) stabilizes the variance sums.
  Eigen::VectorXd shift(n_grid);
  {
    Eigen::MatrixXd grads(n_grid, d);
    try {
      model.evaluate(theta.row(0), shift, grads);
    } catch (const std::exception& e) {
      detail::rethrow_with_sample(e, 0);
    }
    if (shift.size() != n_grid)
      throw std::invalid_argument("run_direct_screening: model output/grid size mismatch");
  }

  struct BlockAcc {
    Eigen::MatrixXd grad_sq;  // n_grid x d sums of squared derivatives
    Eigen::VectorXd s1, s2;   // shifted output sums
    Eigen::MatrixXd batch;    // per-batch sums of grid-integrated squares
    Eigen::VectorXd counts;
  };
  BlockAcc total{Eigen::MatrixXd::Zero(n_grid, d), Eigen::VectorXd::Zero(n_grid),
                 Eigen::VectorXd::Zero(n_grid), Eigen::MatrixXd::Zero(kBatches, d),
                 Eigen::VectorXd::Zero(kBatches)};

  block_map_reduce<BlockAcc>(
      n_mc, jobs, 64,
      [&](int begin, int end) {
        BlockAcc acc{Eigen::MatrixXd::Zero(n_grid, d), Eigen::VectorXd::Zero(n_grid),
                     Eigen::VectorXd::Zero(n_grid), Eigen::MatrixXd::Zero(kBatches, d),
                     Eigen::VectorXd::Zero(kBatches)};
        Eigen::VectorXd qoi(n_grid);
        Eigen::MatrixXd grads(n_grid, d);
        for (int m = begin; m < end; ++m) {
          try {
            model.evaluate(theta.row(m), qoi, grads);
          } catch (const std::exception& e) {
            detail::rethrow_with_sample(e, m);
          }
          const Eigen::MatrixXd sq = grads.cwiseAbs2();
          acc.grad_sq += sq;
          acc.s1 += qoi - shift;
          acc.s2 += (qoi - shift).cwiseAbs2();
          const int b = detail::batch_of(m, n_mc, kBatches);
          acc.batch.row(b) += (sq.transpose() * grid.weights).transpose();
          acc.counts(b) += 1.0;
        }
        return acc;
      },
      [&](int, BlockAcc&& acc) {
        total.grad_sq += acc.grad_sq;
        total.s1 += acc.s1;
        total.s2 += acc.s2;
        total.batch += acc.batch;
        total.counts += acc.counts;
      });

  const double nn = static_cast<double>(n_mc);
  DgsmReport report;
  report.n_mc = n_mc;
  report.threshold = threshold;
  report.n_forward_solves = n_mc;
  report.functional_dgsm = (total.grad_sq.transpose() * grid.weights) / nn;

  const Eigen::VectorXd variance = (total.s2 - total.s1.cwiseAbs2() / nn) / (nn - 1.0);
  report.trace = grid.weights.dot(variance);

  report.stderr_dgsm.resize(d);
  for (int j = 0; j < d; ++j)
    report.stderr_dgsm(j) = detail::batch_means_stderr(total.batch.col(j), total.counts);

  report.finalize(poincare_constants(space));

  if (mean_out) *mean_out = shift + total.s1 / nn;
  if (variance_out) *variance_out = variance;
  return report;
}

}  // namespace fgsa
