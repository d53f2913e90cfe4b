#pragma once

#include <Eigen/Dense>

#include <atomic>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fgsa/dgsm.hpp"
#include "fgsa/kle.hpp"
#include "fgsa/mesh.hpp"
#include "fgsa/sparse.hpp"

namespace fgsa {

using ScalarField2d = std::function<double(const Eigen::Vector2d&)>;

/**
 * Darcy problem -div(exp(a) grad p) = b with mixed boundary conditions and a
 * log-conductivity expansion over mesh cells. The QoI is the solution
 * sampled at `qoi_cells`, integrated with `qoi_grid`'s weights (a boundary
 * trace or a subdomain restriction, depending on configuration).
 */
struct EllipticProblem {
  StructuredMesh mesh;
  InputFieldKLE field;      // log-conductivity modes over mesh.cells
  ScalarField2d source;     // volumetric source; null means 0
  ScalarField2d dirichlet;  // boundary value g; null means 0
  ScalarField2d neumann;    // conormal data (K grad p).n; null means 0
  std::vector<int> qoi_cells;
  SpatialGrid qoi_grid;
  double pcg_tol = 1e-10;

  int n_par() const { return field.kle.n_modes(); }

  void validate() const {
    if (field.kle.mean.size() != mesh.n_cells())
      throw std::invalid_argument("EllipticProblem: field/mesh size mismatch");
    if (static_cast<int>(qoi_cells.size()) != qoi_grid.size())
      throw std::invalid_argument("EllipticProblem: qoi cells/grid size mismatch");
    for (int c : qoi_cells)
      if (c < 0 || c >= mesh.n_cells())
        throw std::invalid_argument("EllipticProblem: qoi cell out of range");
    if (mesh.dirichlet.empty())
      throw std::invalid_argument("EllipticProblem: pure-Neumann problem is singular");
  }
};

/** Assembled two-point-flux operator for one conductivity realization. */
struct AssembledOperator {
  CsrMatrix matrix;
  std::shared_ptr<IncompleteCholesky> precond;
  Eigen::VectorXd rhs;           // source + boundary contributions
  Eigen::VectorXd conductivity;  // per-cell K
  double pcg_tol = 1e-10;
};

inline AssembledOperator assemble_operator(const EllipticProblem& pb,
                                           const Eigen::Ref<const Eigen::VectorXd>& log_field) {
  const StructuredMesh& mesh = pb.mesh;
  if (log_field.size() != mesh.n_cells())
    throw std::invalid_argument("assemble_operator: field/mesh size mismatch");

  AssembledOperator op;
  op.pcg_tol = pb.pcg_tol;
  op.conductivity = log_field.array().exp();
  op.rhs = Eigen::VectorXd::Zero(mesh.n_cells());

  std::vector<Triplet> trip;
  trip.reserve(4 * mesh.interior.size() + mesh.dirichlet.size() + mesh.n_cells());
  for (int c = 0; c < mesh.n_cells(); ++c) trip.push_back({c, c, 0.0});  // keep diagonal present
  for (const auto& f : mesh.interior) {
    const double ka = op.conductivity(f.a), kb = op.conductivity(f.b);
    const double t = f.geo * 2.0 * ka * kb / (ka + kb);
    trip.push_back({f.a, f.a, t});
    trip.push_back({f.b, f.b, t});
    trip.push_back({f.a, f.b, -t});
    trip.push_back({f.b, f.a, -t});
  }
  for (const auto& f : mesh.dirichlet) {
    const double t = op.conductivity(f.cell) * f.geo;
    trip.push_back({f.cell, f.cell, t});
    if (pb.dirichlet) op.rhs(f.cell) += t * pb.dirichlet(f.pos);
  }
  if (pb.neumann)
    for (const auto& f : mesh.neumann) op.rhs(f.cell) += pb.neumann(f.pos) * f.area;
  if (pb.source)
    for (int c = 0; c < mesh.n_cells(); ++c)
      op.rhs(c) += pb.source(mesh.cells.points.row(c).transpose()) * mesh.cells.weights(c);

  op.matrix = csr_from_triplets(mesh.n_cells(), std::move(trip));
  op.precond = std::make_shared<IncompleteCholesky>(op.matrix);
  return op;
}

/** Solve A x = rhs to the operator's relative tolerance; throws on failure. */
inline Eigen::VectorXd operator_solve(const AssembledOperator& op,
                                      const Eigen::Ref<const Eigen::VectorXd>& rhs) {
  PcgResult r = pcg_solve(op.matrix, *op.precond, rhs, op.pcg_tol);
  if (!r.converged)
    throw std::runtime_error("operator_solve: PCG stalled at relative residual " +
                             std::to_string(r.relative_residual));
  return std::move(r.x);
}

struct EllipticForward {
  Eigen::VectorXd pressure;  // all cells
  Eigen::VectorXd qoi;       // values at qoi_cells
  AssembledOperator op;
};

inline EllipticForward assemble_and_solve_forward(
    const EllipticProblem& pb, const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
  if (theta.size() != pb.n_par())
    throw std::invalid_argument("assemble_and_solve_forward: theta length mismatch");
  EllipticForward fwd;
  fwd.op = assemble_operator(pb, synthesize_field(pb.field, theta.transpose()));
  fwd.pressure = operator_solve(fwd.op, fwd.op.rhs);
  fwd.qoi.resize(static_cast<Eigen::Index>(pb.qoi_cells.size()));
  for (std::size_t k = 0; k < pb.qoi_cells.size(); ++k)
    fwd.qoi(static_cast<Eigen::Index>(k)) = fwd.pressure(pb.qoi_cells[k]);
  return fwd;
}

namespace detail {

/**
 * Adjoint solve for the mode-coordinate functional
 * f_i = <p|qoi - mean, phi_i>_qoi / sigma: A q = -(d f_i / d p), i.e. the
 * negative QoI weights scattered to the owning cells. The returned q makes
 * d f_i / d theta_j = sum_c u_c(p, q) * dlog K_c / d theta_j with u from
 * log_conductivity_sensitivity below.
 */
inline Eigen::VectorXd solve_mode_adjoint(const EllipticProblem& pb, const AssembledOperator& op,
                                          const Eigen::Ref<const Eigen::VectorXd>& mode,
                                          double sigma) {
  if (mode.size() != pb.qoi_grid.size())
    throw std::invalid_argument("solve_mode_adjoint: mode/qoi grid size mismatch");
  if (!(sigma > 0.0)) throw std::invalid_argument("solve_mode_adjoint: sigma must be positive");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(pb.mesh.n_cells());
  for (std::size_t k = 0; k < pb.qoi_cells.size(); ++k)
    rhs(pb.qoi_cells[k]) -= pb.qoi_grid.weights(static_cast<Eigen::Index>(k)) *
                            mode(static_cast<Eigen::Index>(k)) / sigma;
  return operator_solve(op, rhs);
}

}  // namespace detail

/** Adjoint solve when the QoI is a subdomain restriction of the solution. */
inline Eigen::VectorXd solve_adjoint_restriction(const EllipticProblem& pb,
                                                 const AssembledOperator& op,
                                                 const Eigen::Ref<const Eigen::VectorXd>& mode,
                                                 double sigma) {
  return detail::solve_mode_adjoint(pb, op, mode, sigma);
}

/** Adjoint solve when the QoI is the solution trace along a boundary. */
inline Eigen::VectorXd solve_adjoint_trace(const EllipticProblem& pb, const AssembledOperator& op,
                                           const Eigen::Ref<const Eigen::VectorXd>& mode,
                                           double sigma) {
  return detail::solve_mode_adjoint(pb, op, mode, sigma);
}

/**
 * Per-cell derivative of the functional with respect to the cell's
 * log-conductivity: u_c = d q^T (A p - rhs) / d log K_c, assembled by one
 * sweep over faces. Exact for the discrete operator (the same harmonic-mean
 * transmissibilities the assembly used).
 */
inline Eigen::VectorXd log_conductivity_sensitivity(const EllipticProblem& pb,
                                                    const AssembledOperator& op,
                                                    const Eigen::Ref<const Eigen::VectorXd>& p,
                                                    const Eigen::Ref<const Eigen::VectorXd>& q) {
  const StructuredMesh& mesh = pb.mesh;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(mesh.n_cells());
  for (const auto& f : mesh.interior) {
    const double ka = op.conductivity(f.a), kb = op.conductivity(f.b);
    const double dpdq = (p(f.a) - p(f.b)) * (q(f.a) - q(f.b));
    const double denom = (ka + kb) * (ka + kb);
    // d T / d log K_a = geo * 2 K_a K_b^2 / (K_a + K_b)^2, symmetrically for b.
    u(f.a) += f.geo * 2.0 * ka * kb * kb / denom * dpdq;
    u(f.b) += f.geo * 2.0 * kb * ka * ka / denom * dpdq;
  }
  for (const auto& f : mesh.dirichlet) {
    const double t = op.conductivity(f.cell) * f.geo;  // dT_D/dlogK = T_D
    const double g = pb.dirichlet ? pb.dirichlet(f.pos) : 0.0;
    u(f.cell) += t * (p(f.cell) - g) * q(f.cell);
  }
  return u;
}

/**
 * Parametric gradient of one mode coordinate: chain rule through the
 * log-conductivity expansion, d f_i / d theta_j = sqrt(lambda_j) <e_j, u>.
 */
inline Eigen::VectorXd mode_gradient(const EllipticProblem& pb, const AssembledOperator& op,
                                     const Eigen::Ref<const Eigen::VectorXd>& p,
                                     const Eigen::Ref<const Eigen::VectorXd>& q) {
  const Eigen::VectorXd u = log_conductivity_sensitivity(pb, op, p, q);
  return (pb.field.kle.modes.transpose() * u)
      .cwiseProduct(pb.field.kle.eigenvalues.cwiseSqrt());
}

/**
 * Screening adapter: one forward solve per sample plus one adjoint solve per
 * retained output mode. The forward state keeps only the pressure field; the
 * operator is re-assembled (no additional linear solves) when gradients are
 * requested, keeping memory flat across large ensembles.
 */
class EllipticModel : public FunctionalModel {
 public:
  explicit EllipticModel(EllipticProblem pb) : pb_(std::move(pb)) { pb_.validate(); }

  const EllipticProblem& problem() const { return pb_; }
  const SpatialGrid& output_grid() const override { return pb_.qoi_grid; }
  int n_par() const override { return pb_.n_par(); }

  long forward_solves() const { return forward_solves_.load(); }
  long adjoint_solves() const { return adjoint_solves_.load(); }
  void reset_counters() const { forward_solves_ = 0; adjoint_solves_ = 0; }

  Forward solve_forward(const Eigen::Ref<const Eigen::RowVectorXd>& theta) const override {
    EllipticForward fwd = assemble_and_solve_forward(pb_, theta);
    ++forward_solves_;
    Forward out;
    out.qoi = std::move(fwd.qoi);
    out.state = std::make_shared<Eigen::VectorXd>(std::move(fwd.pressure));
    return out;
  }

  Eigen::MatrixXd mode_gradients(const Eigen::Ref<const Eigen::RowVectorXd>& theta,
                                 const Forward& forward, const KLExpansion& kle,
                                 int n_qoi) const override {
    const auto* pressure = static_cast<const Eigen::VectorXd*>(forward.state.get());
    if (!pressure) throw std::invalid_argument("EllipticModel: forward state missing");
    const AssembledOperator op =
        assemble_operator(pb_, synthesize_field(pb_.field, theta.transpose()));
    Eigen::MatrixXd grads(n_qoi, pb_.n_par());
    for (int i = 0; i < n_qoi; ++i) {
      const double lambda = kle.eigenvalues(i);
      if (!(lambda > 0.0))
        throw std::invalid_argument("EllipticModel: zero-eigenvalue output mode");
      const Eigen::VectorXd q =
          detail::solve_mode_adjoint(pb_, op, kle.modes.col(i), std::sqrt(lambda));
      ++adjoint_solves_;
      grads.row(i) = mode_gradient(pb_, op, *pressure, q).transpose();
    }
    return grads;
  }

  /** theta -> QoI field, for variance-based estimators and ROM studies. */
  FieldFunction field_function() const {
    return [this](const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
      return assemble_and_solve_forward(pb_, theta).qoi;
    };
  }

 private:
  EllipticProblem pb_;
  mutable std::atomic<long> forward_solves_{0};
  mutable std::atomic<long> adjoint_solves_{0};
};

/**
 * Groundwater configuration: rectangle (-1,1)x(0,1), Dirichlet sides and
 * bottom at 0, no-flux top; four mollified injection wells; separable
 * exponential log-conductivity kernel sigma_a^2 exp(-|dx|/lx - |dy|/ly) with
 * sigma_a = 1.6, lx = 1/2, ly = 1/4; QoI = solution trace along the top.
 * `n_par` = 0 keeps the smallest set of modes whose cumulative eigenvalue
 * sum first exceeds 90% of the kernel trace.
 */
inline EllipticProblem subsurface_config(int nx = 128, int ny = 64, int n_par = 0) {
  EllipticProblem pb;
  pb.mesh = make_rectangle_mesh(-1.0, 1.0, 0.0, 1.0, nx, ny, BcKind::dirichlet, BcKind::dirichlet,
                                BcKind::dirichlet, BcKind::neumann);

  const double sigma_a = 1.6, lx = 0.5, ly = 0.25;
  const int max_modes = std::min(nx * ny, std::max(4 * std::max(n_par, 1), 256));
  KLExpansion kle = kle_from_separable_kernel(
      make_midpoint_grid(-1.0, 1.0, nx), make_midpoint_grid(0.0, 1.0, ny),
      [sigma_a, lx](double x, double y) { return sigma_a * sigma_a * std::exp(-std::abs(x - y) / lx); },
      [ly](double x, double y) { return std::exp(-std::abs(x - y) / ly); }, max_modes);
  if (n_par <= 0) {
    n_par = first_index_reaching(kle, 0.9);
    if (n_par == 0)
      throw std::runtime_error("subsurface_config: 90% energy not reached; raise mode budget");
  }
  if (n_par > kle.n_modes())
    throw std::invalid_argument("subsurface_config: n_par exceeds computed mode budget");
  kle.eigenvalues.conservativeResize(n_par);
  kle.modes.conservativeResize(Eigen::NoChange, n_par);
  pb.field.kle = std::move(kle);
  pb.field.sigma_a = sigma_a;

  struct Well {
    double x, y, strength;
  };
  const std::vector<Well> wells{{-0.6, 0.2, 2.0}, {-0.2, 0.4, 5.0}, {0.2, 0.6, 5.0},
                                {0.6, 0.8, 2.0}};
  const double L = 0.05;  // mollifier variance (length^2)
  pb.source = [wells, L](const Eigen::Vector2d& x) {
    double b = 0.0;
    for (const auto& w : wells) {
      const double dx = x(0) - w.x, dy = x(1) - w.y;
      b += w.strength / (2.0 * std::numbers::pi * L) * std::exp(-(dx * dx + dy * dy) / (2.0 * L));
    }
    return b;
  };

  pb.qoi_cells = rectangle_top_row(pb.mesh);
  pb.qoi_grid = make_midpoint_grid(-1.0, 1.0, nx);
  return pb;
}

/**
 * Interstitial-flow configuration: annulus 0.25 mm <= r <= 5 mm, uniform
 * inward conormal flux Q/(2 pi R_in) at the needle wall, p = 0 at the outer
 * rim; log-conductivity kernel 0.25 exp(-||x-y||_1 / ell) about the constant
 * mean ln(0.5) + 0.25; QoI = solution restricted to r <= r_qoi.
 */
inline EllipticProblem biotransport_config(double ell, double r_qoi, int nr = 96, int nphi = 192,
                                           int n_par = 150) {
  if (!(ell > 0.0)) throw std::invalid_argument("biotransport_config: need ell > 0");
  const double r_in = 0.25, r_out = 5.0;
  if (!(r_qoi > r_in && r_qoi <= r_out))
    throw std::invalid_argument("biotransport_config: r_qoi outside the annulus");

  EllipticProblem pb;
  pb.mesh = make_annulus_mesh(r_in, r_out, nr, nphi);

  const double sigma_a2 = 0.25;
  pb.field.kle = kle_from_kernel(
      pb.mesh.cells,
      [sigma_a2, ell](const Eigen::RowVectorXd& x, const Eigen::RowVectorXd& y) {
        return sigma_a2 * std::exp(-((x - y).cwiseAbs().sum()) / ell);
      },
      n_par);
  pb.field.kle.mean.setConstant(std::log(0.5) + sigma_a2);
  pb.field.sigma_a = std::sqrt(sigma_a2);

  const double flux = 1.0 / (2.0 * std::numbers::pi * r_in);  // Q = 1
  pb.neumann = [flux](const Eigen::Vector2d&) { return flux; };

  pb.qoi_cells = cells_within_radius(pb.mesh, r_qoi);
  std::vector<int> keep = pb.qoi_cells;
  pb.qoi_grid = restrict_grid(pb.mesh.cells, keep);
  return pb;
}

}  // namespace fgsa
