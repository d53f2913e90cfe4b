#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "fgsa/grid.hpp"

namespace fgsa {

enum class BcKind { dirichlet, neumann };

/** Face between two cells; transmissibility = geo * harmonic_mean(K_a, K_b). */
struct InteriorFace {
  int a, b;
  double geo;  // face_area / center_distance
};

/** Boundary face owned by one cell. */
struct BoundaryFace {
  int cell;
  double geo;           // face_area / (half center-to-face distance); Dirichlet T = K_cell * geo
  double area;          // face area; Neumann contribution = conormal_data * area
  Eigen::Vector2d pos;  // face-center position, for boundary-data evaluation
};

/**
 * Cell-centered structured mesh for two-point-flux finite volumes. `cells`
 * stores centers with cell volumes as weights; the same grid doubles as the
 * quadrature grid for fields living on the cells.
 */
struct StructuredMesh {
  SpatialGrid cells;
  std::vector<InteriorFace> interior;
  std::vector<BoundaryFace> dirichlet;
  std::vector<BoundaryFace> neumann;
  int nx = 0, ny = 0;  // logical extents: (nx, ny) or (nr, nphi)

  int n_cells() const { return cells.size(); }
};

/**
 * Axis-aligned rectangle (x0,x1)x(y0,y1) with nx-by-ny cells, indexed
 * iy*nx + ix (x fastest, matching make_tensor_grid ordering). Boundary
 * conditions are assigned per side.
 */
inline StructuredMesh make_rectangle_mesh(double x0, double x1, double y0, double y1, int nx,
                                          int ny, BcKind left, BcKind right, BcKind bottom,
                                          BcKind top) {
  if (nx < 2 || ny < 2) throw std::invalid_argument("make_rectangle_mesh: need nx, ny >= 2");
  if (!(x0 < x1) || !(y0 < y1))
    throw std::invalid_argument("make_rectangle_mesh: empty extent");

  StructuredMesh m;
  m.nx = nx;
  m.ny = ny;
  m.cells = make_tensor_grid(make_midpoint_grid(x0, x1, nx), make_midpoint_grid(y0, y1, ny));
  const double dx = (x1 - x0) / nx, dy = (y1 - y0) / ny;
  auto idx = [nx](int ix, int iy) { return iy * nx + ix; };

  for (int iy = 0; iy < ny; ++iy)
    for (int ix = 0; ix + 1 < nx; ++ix)
      m.interior.push_back({idx(ix, iy), idx(ix + 1, iy), dy / dx});
  for (int iy = 0; iy + 1 < ny; ++iy)
    for (int ix = 0; ix < nx; ++ix)
      m.interior.push_back({idx(ix, iy), idx(ix, iy + 1), dx / dy});

  auto add_side = [&](BcKind kind, int cell, double geo, double area, double px, double py) {
    BoundaryFace f{cell, geo, area, Eigen::Vector2d(px, py)};
    (kind == BcKind::dirichlet ? m.dirichlet : m.neumann).push_back(f);
  };
  for (int iy = 0; iy < ny; ++iy) {
    const double yc = y0 + (iy + 0.5) * dy;
    add_side(left, idx(0, iy), dy / (dx / 2.0), dy, x0, yc);
    add_side(right, idx(nx - 1, iy), dy / (dx / 2.0), dy, x1, yc);
  }
  for (int ix = 0; ix < nx; ++ix) {
    const double xc = x0 + (ix + 0.5) * dx;
    add_side(bottom, idx(ix, 0), dx / (dy / 2.0), dx, xc, y0);
    add_side(top, idx(ix, ny - 1), dx / (dy / 2.0), dx, xc, y1);
  }
  return m;
}

/**
 * Full annulus r_in <= r <= r_out with nr-by-nphi cells indexed
 * ir*nphi + iphi and periodic in angle; centers are stored in Cartesian
 * coordinates (matching make_polar_annulus_grid). The inner circle is a
 * Neumann boundary, the outer circle Dirichlet.
 */
inline StructuredMesh make_annulus_mesh(double r_in, double r_out, int nr, int nphi) {
  if (nr < 2 || nphi < 3) throw std::invalid_argument("make_annulus_mesh: need nr >= 2, nphi >= 3");
  if (!(0.0 < r_in && r_in < r_out))
    throw std::invalid_argument("make_annulus_mesh: need 0 < r_in < r_out");

  StructuredMesh m;
  m.nx = nr;
  m.ny = nphi;
  m.cells = make_polar_annulus_grid(r_in, r_out, nr, nphi);
  const double dr = (r_out - r_in) / nr;
  const double dphi = 2.0 * std::numbers::pi / nphi;
  auto idx = [nphi](int ir, int iphi) { return ir * nphi + iphi; };

  for (int ir = 0; ir + 1 < nr; ++ir) {
    const double r_face = r_in + (ir + 1) * dr;
    for (int iphi = 0; iphi < nphi; ++iphi)
      m.interior.push_back({idx(ir, iphi), idx(ir + 1, iphi), r_face * dphi / dr});
  }
  for (int ir = 0; ir < nr; ++ir) {
    const double r_c = r_in + (ir + 0.5) * dr;
    for (int iphi = 0; iphi < nphi; ++iphi)  // periodic wrap at iphi = nphi-1
      m.interior.push_back(
          {idx(ir, iphi), idx(ir, (iphi + 1) % nphi), dr / (r_c * dphi)});
  }
  for (int iphi = 0; iphi < nphi; ++iphi) {
    const double phi = (iphi + 0.5) * dphi;
    const Eigen::Vector2d dir(std::cos(phi), std::sin(phi));
    m.neumann.push_back({idx(0, iphi), r_in * dphi / (dr / 2.0), r_in * dphi, r_in * dir});
    m.dirichlet.push_back(
        {idx(nr - 1, iphi), r_out * dphi / (dr / 2.0), r_out * dphi, r_out * dir});
  }
  return m;
}

/** Cell indices of the top row of a rectangle mesh (ix ascending). */
inline std::vector<int> rectangle_top_row(const StructuredMesh& mesh) {
  std::vector<int> cells;
  cells.reserve(static_cast<std::size_t>(mesh.nx));
  for (int ix = 0; ix < mesh.nx; ++ix) cells.push_back((mesh.ny - 1) * mesh.nx + ix);
  return cells;
}

/** Cell indices whose center radius is at most r_max (annulus mesh). */
inline std::vector<int> cells_within_radius(const StructuredMesh& mesh, double r_max) {
  std::vector<int> cells;
  for (int c = 0; c < mesh.n_cells(); ++c)
    if (mesh.cells.points.row(c).norm() <= r_max) cells.push_back(c);
  if (cells.empty()) throw std::invalid_argument("cells_within_radius: no cells selected");
  return cells;
}

}  // namespace fgsa
