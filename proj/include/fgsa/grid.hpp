#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fgsa {

/**
 * Discretization of a compact output domain (interval, rectangle, or polar
 * annulus) together with quadrature weights that define the discrete L2 inner
 * product. Grid functions are flat arrays in row-major point order; the grid
 * owns the point ordering contract.
 *
 * Immutable after construction; safe to share read-only across workers.
 */
struct SpatialGrid {
  Eigen::MatrixXd points;   // n x d, d in {1,2}
  Eigen::VectorXd weights;  // strictly positive, length n
  double measure = 0.0;     // sum of weights

  int size() const { return static_cast<int>(points.rows()); }
  int dim() const { return static_cast<int>(points.cols()); }
};

namespace detail {

inline void validate_grid(const SpatialGrid& grid) {
  if (grid.points.rows() != grid.weights.size())
    throw std::invalid_argument("grid: points/weights length mismatch");
  if ((grid.weights.array() <= 0.0).any())
    throw std::invalid_argument("grid: weights must be strictly positive");
}

}  // namespace detail

/**
 * Uniform grid on [a,b] with composite-trapezoid weights:
 * h at interior points, h/2 at the two ends, h = (b-a)/(n-1).
 */
inline SpatialGrid make_interval_grid(double a, double b, int n) {
  if (n < 2) throw std::invalid_argument("make_interval_grid: n must be >= 2");
  if (!(a < b)) throw std::invalid_argument("make_interval_grid: requires a < b");
  const double h = (b - a) / (n - 1);
  SpatialGrid grid;
  grid.points.resize(n, 1);
  grid.weights.resize(n);
  for (int k = 0; k < n; ++k) {
    grid.points(k, 0) = a + h * k;
    grid.weights(k) = (k == 0 || k == n - 1) ? 0.5 * h : h;
  }
  grid.points(n - 1, 0) = b;  // guard against accumulated roundoff
  grid.measure = grid.weights.sum();
  return grid;
}

/**
 * Cell-centered grid on [a,b]: n midpoints with weight h = (b-a)/n each.
 * This is the 1D quadrature carried by finite-volume meshes.
 */
inline SpatialGrid make_midpoint_grid(double a, double b, int n) {
  if (n < 1) throw std::invalid_argument("make_midpoint_grid: n must be >= 1");
  if (!(a < b)) throw std::invalid_argument("make_midpoint_grid: requires a < b");
  const double h = (b - a) / n;
  SpatialGrid grid;
  grid.points.resize(n, 1);
  grid.weights = Eigen::VectorXd::Constant(n, h);
  for (int k = 0; k < n; ++k) grid.points(k, 0) = a + h * (k + 0.5);
  grid.measure = grid.weights.sum();
  return grid;
}

/**
 * Tensor product of two 1D grids. Points ordered row-major with the x index
 * fastest: point (i,j) sits at flat index j*nx + i. Weights are products, so
 * the product rule inherits the factors' convergence order.
 */
inline SpatialGrid make_tensor_grid(const SpatialGrid& gx, const SpatialGrid& gy) {
  if (gx.dim() != 1 || gy.dim() != 1)
    throw std::invalid_argument("make_tensor_grid: factors must be 1D grids");
  const int nx = gx.size(), ny = gy.size();
  SpatialGrid grid;
  grid.points.resize(static_cast<Eigen::Index>(nx) * ny, 2);
  grid.weights.resize(static_cast<Eigen::Index>(nx) * ny);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const Eigen::Index k = static_cast<Eigen::Index>(j) * nx + i;
      grid.points(k, 0) = gx.points(i, 0);
      grid.points(k, 1) = gy.points(j, 0);
      grid.weights(k) = gx.weights(i) * gy.weights(j);
    }
  grid.measure = grid.weights.sum();
  return grid;
}

/**
 * Polar tensor grid on the annulus r_in <= r <= r_out, stored in Cartesian
 * coordinates. Weights w = r * w_r * dphi with trapezoid weights w_r in the
 * radial direction and the periodic rectangle rule in the angle (n_phi equal
 * angles, no duplicated seam point). Point (ir, iphi) sits at flat index
 * ir*n_phi + iphi. The weight sum equals the annulus area exactly because the
 * trapezoid rule integrates r exactly.
 */
inline SpatialGrid make_polar_annulus_grid(double r_in, double r_out, int nr, int nphi) {
  if (nr < 2 || nphi < 3)
    throw std::invalid_argument("make_polar_annulus_grid: need nr >= 2, nphi >= 3");
  if (!(0.0 < r_in && r_in < r_out))
    throw std::invalid_argument("make_polar_annulus_grid: requires 0 < r_in < r_out");
  const double dr = (r_out - r_in) / (nr - 1);
  const double dphi = 2.0 * M_PI / nphi;
  SpatialGrid grid;
  grid.points.resize(static_cast<Eigen::Index>(nr) * nphi, 2);
  grid.weights.resize(static_cast<Eigen::Index>(nr) * nphi);
  for (int ir = 0; ir < nr; ++ir) {
    const double r = r_in + dr * ir;
    const double wr = (ir == 0 || ir == nr - 1) ? 0.5 * dr : dr;
    for (int ip = 0; ip < nphi; ++ip) {
      const double phi = dphi * ip;
      const Eigen::Index k = static_cast<Eigen::Index>(ir) * nphi + ip;
      grid.points(k, 0) = r * std::cos(phi);
      grid.points(k, 1) = r * std::sin(phi);
      grid.weights(k) = r * wr * dphi;
    }
  }
  grid.measure = grid.weights.sum();
  return grid;
}

/** Subgrid keeping the listed point indices with their original weights. */
inline SpatialGrid restrict_grid(const SpatialGrid& grid, const std::vector<int>& keep) {
  if (keep.empty()) throw std::invalid_argument("restrict_grid: empty index set");
  SpatialGrid out;
  out.points.resize(static_cast<Eigen::Index>(keep.size()), grid.dim());
  out.weights.resize(static_cast<Eigen::Index>(keep.size()));
  for (std::size_t m = 0; m < keep.size(); ++m) {
    const int k = keep[m];
    if (k < 0 || k >= grid.size()) throw std::invalid_argument("restrict_grid: index out of range");
    out.points.row(static_cast<Eigen::Index>(m)) = grid.points.row(k);
    out.weights(static_cast<Eigen::Index>(m)) = grid.weights(k);
  }
  out.measure = out.weights.sum();
  return out;
}

/** Quadrature integral of a grid function: sum_k w_k g(s_k). */
inline double integrate(const Eigen::Ref<const Eigen::VectorXd>& g, const SpatialGrid& grid) {
  if (g.size() != grid.weights.size())
    throw std::invalid_argument("integrate: grid function length mismatch");
  return grid.weights.dot(g);
}

/** Discrete weighted L2 inner product sum_k w_k f(s_k) g(s_k). */
inline double inner_product(const Eigen::Ref<const Eigen::VectorXd>& f,
                            const Eigen::Ref<const Eigen::VectorXd>& g,
                            const SpatialGrid& grid) {
  if (f.size() != grid.weights.size() || g.size() != grid.weights.size())
    throw std::invalid_argument("inner_product: grid function length mismatch");
  return (grid.weights.array() * f.array() * g.array()).sum();
}

}  // namespace fgsa
