#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fgsa/csv.hpp"
#include "fgsa/eig.hpp"
#include "fgsa/grid.hpp"

#include <json.hpp>

namespace fgsa {

/** Sampled process values f(s_k, theta^m): one row per MC sample. */
struct ProcessEnsemble {
  SpatialGrid grid;
  Eigen::MatrixXd values;  // N_MC x n_grid

  int n_mc() const { return static_cast<int>(values.rows()); }
};

/**
 * Truncated Karhunen-Loeve expansion on a spatial grid. Eigenvalues are
 * sorted descending with negatives clipped to zero; modes are orthonormal in
 * the grid's weighted L2 inner product. `trace` is the full discrete
 * covariance trace (retained plus discarded variance), which the truncated
 * eigenvalue sum approaches from below.
 */
struct KLExpansion {
  SpatialGrid grid;
  Eigen::VectorXd mean;         // f-bar, length n_grid
  Eigen::VectorXd eigenvalues;  // lambda_1 >= ... >= lambda_m >= 0
  Eigen::MatrixXd modes;        // n_grid x m, weighted-orthonormal columns
  double trace = 0.0;           // sum_k w_k C(s_k, s_k)
  double clipped_magnitude = 0.0;  // largest |negative eigenvalue| set to zero

  int n_modes() const { return static_cast<int>(eigenvalues.size()); }
};

/** Log-field expansion over the PDE domain: a-bar plus amplitude sigma_a. */
struct InputFieldKLE {
  KLExpansion kle;  // kle.mean holds the pointwise mean field a-bar
  double sigma_a = 1.0;
};

namespace detail {

/** Fix each mode's sign so its largest-magnitude entry is positive. */
inline void canonicalize_mode_signs(Eigen::MatrixXd& modes) {
  for (Eigen::Index i = 0; i < modes.cols(); ++i) {
    Eigen::Index at = 0;
    modes.col(i).cwiseAbs().maxCoeff(&at);
    if (modes(at, i) < 0.0) modes.col(i) = -modes.col(i);
  }
}

/** Clip negative eigenvalues to zero, recording the largest magnitude seen. */
inline double clip_negative(Eigen::VectorXd& values) {
  double clipped = 0.0;
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    if (values(i) < 0.0) {
      clipped = std::max(clipped, -values(i));
      values(i) = 0.0;
    }
  }
  return clipped;
}

/**
 * Solve the weighted eigenproblem C W phi = lambda phi through its symmetric
 * form W^{1/2} C W^{1/2} psi = lambda psi, phi = W^{-1/2} psi. B is consumed.
 * Retains the largest n_keep pairs.
 */
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> weighted_eigensolve(
    Eigen::MatrixXd&& C, const Eigen::VectorXd& weights, int n_keep) {
  const Eigen::Index n = C.rows();
  const Eigen::VectorXd sqw = weights.cwiseSqrt();
  Eigen::MatrixXd B = std::move(C);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) B(i, j) *= sqw(i) * sqw(j);

  // Full divide-and-conquer on desk-size grids; index-range solver when only
  // a small leading block of a large spectrum is needed.
  SymEig eig;
  if (n > 1024 && 4 * n_keep < n)
    eig = sym_eig_top(std::move(B), n_keep);
  else
    eig = sym_eig_descending(std::move(B));

  Eigen::VectorXd values = eig.values.head(n_keep);
  Eigen::MatrixXd modes(n, n_keep);
  for (int i = 0; i < n_keep; ++i) modes.col(i) = eig.vectors.col(i).cwiseQuotient(sqw);
  canonicalize_mode_signs(modes);
  return {std::move(values), std::move(modes)};
}

}  // namespace detail

/**
 * KL expansion estimated from samples: column-mean centering, unbiased sample
 * covariance (1/(N_MC-1)), and the quadrature-weighted eigenproblem above.
 * A degenerate (all-identical) ensemble yields all-zero eigenvalues.
 */
inline KLExpansion kle_from_samples(const ProcessEnsemble& ensemble, int n_qoi) {
  const int n_grid = ensemble.grid.size();
  const int n_mc = ensemble.n_mc();
  if (ensemble.values.cols() != n_grid)
    throw std::invalid_argument("kle_from_samples: ensemble/grid size mismatch");
  if (n_mc < 2) throw std::invalid_argument("kle_from_samples: need at least 2 samples");
  if (n_qoi < 1 || n_qoi > n_grid)
    throw std::invalid_argument("kle_from_samples: n_qoi out of range");

  KLExpansion out;
  out.grid = ensemble.grid;
  out.mean = ensemble.values.colwise().mean();
  Eigen::MatrixXd centered = ensemble.values.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n_mc - 1);
  out.trace = ensemble.grid.weights.dot(cov.diagonal());

  auto [values, modes] = detail::weighted_eigensolve(std::move(cov), ensemble.grid.weights, n_qoi);
  out.clipped_magnitude = detail::clip_negative(values);
  out.eigenvalues = std::move(values);
  out.modes = std::move(modes);
  return out;
}

/**
 * KL coordinates of one realization: f_i = <f - f_bar, phi_i> / sigma_i with
 * sigma_i = sqrt(lambda_i). All retained modes must have lambda_i > 0.
 */
inline Eigen::VectorXd kle_modes_evaluate(const KLExpansion& kle,
                                          const Eigen::Ref<const Eigen::VectorXd>& sample_row) {
  if (sample_row.size() != kle.grid.weights.size())
    throw std::invalid_argument("kle_modes_evaluate: sample length mismatch");
  if (kle.n_modes() > 0 && kle.eigenvalues(kle.n_modes() - 1) <= 0.0)
    throw std::invalid_argument("kle_modes_evaluate: zero-eigenvalue mode has no coordinate");
  const Eigen::VectorXd centered_w =
      (sample_row - kle.mean).cwiseProduct(kle.grid.weights);
  return (kle.modes.transpose() * centered_w).cwiseQuotient(kle.eigenvalues.cwiseSqrt());
}

/** KL coordinates for every ensemble row: N_MC x n_modes. */
inline Eigen::MatrixXd kle_modes_evaluate_ensemble(const KLExpansion& kle,
                                                   const ProcessEnsemble& ensemble) {
  if (ensemble.values.cols() != kle.grid.weights.size())
    throw std::invalid_argument("kle_modes_evaluate_ensemble: ensemble length mismatch");
  if (kle.n_modes() > 0 && kle.eigenvalues(kle.n_modes() - 1) <= 0.0)
    throw std::invalid_argument("kle_modes_evaluate_ensemble: zero-eigenvalue mode");
  Eigen::MatrixXd centered = ensemble.values.rowwise() - kle.mean.transpose();
  centered = centered.array().rowwise() * kle.grid.weights.transpose().array();
  Eigen::MatrixXd coords = centered * kle.modes;
  coords.array().rowwise() /= kle.eigenvalues.cwiseSqrt().transpose().array();
  return coords;
}

/** Truncated reconstruction f_bar + sum_i sigma_i f_i phi_i. */
inline Eigen::VectorXd kle_reconstruct(const KLExpansion& kle,
                                       const Eigen::Ref<const Eigen::VectorXd>& coords) {
  if (coords.size() != kle.n_modes())
    throw std::invalid_argument("kle_reconstruct: coordinate length mismatch");
  return kle.mean + kle.modes * coords.cwiseProduct(kle.eigenvalues.cwiseSqrt());
}

/**
 * KL expansion of a known covariance kernel on a grid (Nystrom route with
 * the same weighted eigenproblem as the sampled path). The kernel is called
 * with two point rows; trace is the exact discrete trace sum_k w_k k(s_k,s_k).
 */
inline KLExpansion kle_from_kernel(
    const SpatialGrid& grid,
    const std::function<double(const Eigen::RowVectorXd&, const Eigen::RowVectorXd&)>& kernel,
    int n_par) {
  const int n = grid.size();
  if (n_par < 1 || n_par > n) throw std::invalid_argument("kle_from_kernel: n_par out of range");

  Eigen::MatrixXd K(n, n);
  for (int l = 0; l < n; ++l) {
    const Eigen::RowVectorXd yl = grid.points.row(l);
    for (int k = l; k < n; ++k) {
      const double v = kernel(grid.points.row(k), yl);
      K(k, l) = v;
      K(l, k) = v;
    }
  }

  KLExpansion out;
  out.grid = grid;
  out.mean = Eigen::VectorXd::Zero(n);
  out.trace = grid.weights.dot(K.diagonal());
  auto [values, modes] = detail::weighted_eigensolve(std::move(K), grid.weights, n_par);
  out.clipped_magnitude = detail::clip_negative(values);
  out.eigenvalues = std::move(values);
  out.modes = std::move(modes);
  return out;
}

/**
 * KL expansion of a separable kernel kx(x,x') * ky(y,y') on the tensor grid
 * of gx and gy. The weighted eigenproblem factors exactly into the two 1D
 * problems, so eigenvalues are sorted products and modes are tensor products;
 * this is the same decomposition the dense path would return, at 1D cost.
 */
inline KLExpansion kle_from_separable_kernel(const SpatialGrid& gx, const SpatialGrid& gy,
                                             const std::function<double(double, double)>& kx,
                                             const std::function<double(double, double)>& ky,
                                             int n_par) {
  const int nx = gx.size(), ny = gy.size();
  if (n_par < 1 || n_par > nx * ny)
    throw std::invalid_argument("kle_from_separable_kernel: n_par out of range");

  auto solve_1d = [](const SpatialGrid& g,
                     const std::function<double(double, double)>& k) {
    const int n = g.size();
    Eigen::MatrixXd K(n, n);
    for (int j = 0; j < n; ++j)
      for (int i = j; i < n; ++i) {
        const double v = k(g.points(i, 0), g.points(j, 0));
        K(i, j) = v;
        K(j, i) = v;
      }
    auto [values, modes] = detail::weighted_eigensolve(std::move(K), g.weights, n);
    detail::clip_negative(values);
    return std::make_pair(std::move(values), std::move(modes));
  };
  auto [lx, mx] = solve_1d(gx, kx);
  auto [ly, my] = solve_1d(gy, ky);

  struct Product {
    double value;
    int p, q;
  };
  std::vector<Product> products;
  products.reserve(static_cast<std::size_t>(nx) * ny);
  for (int p = 0; p < nx; ++p)
    for (int q = 0; q < ny; ++q) products.push_back({lx(p) * ly(q), p, q});
  std::sort(products.begin(), products.end(), [](const Product& a, const Product& b) {
    if (a.value != b.value) return a.value > b.value;
    return std::pair(a.p, a.q) < std::pair(b.p, b.q);  // deterministic tie order
  });

  KLExpansion out;
  out.grid = make_tensor_grid(gx, gy);
  out.mean = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nx) * ny);
  out.trace = lx.sum() * ly.sum();
  out.eigenvalues.resize(n_par);
  out.modes.resize(static_cast<Eigen::Index>(nx) * ny, n_par);
  for (int m = 0; m < n_par; ++m) {
    out.eigenvalues(m) = products[static_cast<std::size_t>(m)].value;
    const auto& pr = products[static_cast<std::size_t>(m)];
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i)
        out.modes(static_cast<Eigen::Index>(j) * nx + i, m) = mx(i, pr.p) * my(j, pr.q);
  }
  detail::canonicalize_mode_signs(out.modes);
  return out;
}

/** Realize the log field a-bar + sum_k sqrt(lambda_k) theta_k e_k(x). */
inline Eigen::VectorXd synthesize_field(const InputFieldKLE& field,
                                        const Eigen::Ref<const Eigen::VectorXd>& theta) {
  if (theta.size() != field.kle.n_modes())
    throw std::invalid_argument("synthesize_field: theta length mismatch");
  return field.kle.mean +
         field.kle.modes * theta.cwiseProduct(field.kle.eigenvalues.cwiseSqrt());
}

/** Smallest 1-based n with lambda_n / lambda_1 < ratio; 0 if none retained. */
inline int truncation_index(const Eigen::Ref<const Eigen::VectorXd>& eigenvalues, double ratio) {
  if (eigenvalues.size() == 0 || eigenvalues(0) <= 0.0) return 0;
  for (Eigen::Index n = 0; n < eigenvalues.size(); ++n)
    if (eigenvalues(n) / eigenvalues(0) < ratio) return static_cast<int>(n) + 1;
  return 0;
}

/**
 * Smallest 1-based k whose cumulative retained energy sum_{i<=k} lambda_i
 * exceeds `fraction` of the full trace; 0 if the retained modes never do.
 */
inline int first_index_reaching(const KLExpansion& kle, double fraction) {
  double cum = 0.0;
  for (int k = 0; k < kle.n_modes(); ++k) {
    cum += kle.eigenvalues(k);
    if (cum > fraction * kle.trace) return k + 1;
  }
  return 0;
}

/**
 * Portable persistence: eigenvalue/mode/mean/grid CSVs plus a JSON manifest
 * naming the grid. Values are written with 17 significant digits and
 * round-trip exactly.
 */
inline void save_kle(const KLExpansion& kle, const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path base(dir);

  CsvTable ev;
  ev.header = {"index", "lambda"};
  for (int i = 0; i < kle.n_modes(); ++i)
    ev.rows.push_back({std::to_string(i + 1), format_double(kle.eigenvalues(i))});
  write_csv((base / (name + "_eigenvalues.csv")).string(), ev);

  CsvTable modes;
  modes.header.push_back("point");
  for (int i = 0; i < kle.n_modes(); ++i) modes.header.push_back("mode_" + std::to_string(i + 1));
  for (int k = 0; k < kle.grid.size(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (int i = 0; i < kle.n_modes(); ++i) row.push_back(format_double(kle.modes(k, i)));
    modes.rows.push_back(std::move(row));
  }
  write_csv((base / (name + "_modes.csv")).string(), modes);

  CsvTable mean;
  mean.header = {"point", "mean"};
  for (int k = 0; k < kle.grid.size(); ++k)
    mean.rows.push_back({std::to_string(k), format_double(kle.mean(k))});
  write_csv((base / (name + "_mean.csv")).string(), mean);

  CsvTable gridcsv;
  gridcsv.header = {"point"};
  for (int d = 0; d < kle.grid.dim(); ++d) gridcsv.header.push_back("x" + std::to_string(d + 1));
  gridcsv.header.push_back("weight");
  for (int k = 0; k < kle.grid.size(); ++k) {
    std::vector<std::string> row{std::to_string(k)};
    for (int d = 0; d < kle.grid.dim(); ++d) row.push_back(format_double(kle.grid.points(k, d)));
    row.push_back(format_double(kle.grid.weights(k)));
    gridcsv.rows.push_back(std::move(row));
  }
  write_csv((base / (name + "_grid.csv")).string(), gridcsv);

  nlohmann::json manifest;
  manifest["name"] = name;
  manifest["n_grid"] = kle.grid.size();
  manifest["dim"] = kle.grid.dim();
  manifest["n_modes"] = kle.n_modes();
  manifest["trace"] = format_double(kle.trace);
  manifest["clipped_magnitude"] = format_double(kle.clipped_magnitude);
  manifest["files"] = {{"eigenvalues", name + "_eigenvalues.csv"},
                       {"modes", name + "_modes.csv"},
                       {"mean", name + "_mean.csv"},
                       {"grid", name + "_grid.csv"}};
  std::ofstream mf(base / (name + "_kle.json"), std::ios::binary);
  if (!mf) throw std::runtime_error("save_kle: cannot write manifest");
  mf << manifest.dump(2) << '\n';
}

inline KLExpansion load_kle(const std::string& dir, const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path base(dir);
  std::ifstream mf(base / (name + "_kle.json"), std::ios::binary);
  if (!mf) throw std::runtime_error("load_kle: cannot read manifest");
  nlohmann::json manifest = nlohmann::json::parse(mf);

  const int n_grid = manifest.at("n_grid").get<int>();
  const int dim = manifest.at("dim").get<int>();
  const int n_modes = manifest.at("n_modes").get<int>();

  KLExpansion kle;
  kle.trace = std::stod(manifest.at("trace").get<std::string>());
  kle.clipped_magnitude = std::stod(manifest.at("clipped_magnitude").get<std::string>());

  const CsvTable gridcsv = read_csv((base / (name + "_grid.csv")).string());
  kle.grid.points.resize(n_grid, dim);
  kle.grid.weights.resize(n_grid);
  for (int k = 0; k < n_grid; ++k) {
    for (int d = 0; d < dim; ++d)
      kle.grid.points(k, d) = gridcsv.value(static_cast<std::size_t>(k), "x" + std::to_string(d + 1));
    kle.grid.weights(k) = gridcsv.value(static_cast<std::size_t>(k), "weight");
  }
  kle.grid.measure = kle.grid.weights.sum();

  const CsvTable ev = read_csv((base / (name + "_eigenvalues.csv")).string());
  kle.eigenvalues.resize(n_modes);
  for (int i = 0; i < n_modes; ++i) kle.eigenvalues(i) = ev.value(static_cast<std::size_t>(i), "lambda");

  const CsvTable mean = read_csv((base / (name + "_mean.csv")).string());
  kle.mean.resize(n_grid);
  for (int k = 0; k < n_grid; ++k) kle.mean(k) = mean.value(static_cast<std::size_t>(k), "mean");

  const CsvTable modes = read_csv((base / (name + "_modes.csv")).string());
  kle.modes.resize(n_grid, n_modes);
  for (int k = 0; k < n_grid; ++k)
    for (int i = 0; i < n_modes; ++i)
      kle.modes(k, i) = modes.value(static_cast<std::size_t>(k), "mode_" + std::to_string(i + 1));
  return kle;
}

}  // namespace fgsa
