#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fgsa/parallel.hpp"
#include "fgsa/rng.hpp"

namespace fgsa {

/** A model mapping one parameter row to its output field on a fixed grid. */
using FieldFunction =
    std::function<Eigen::VectorXd(const Eigen::Ref<const Eigen::RowVectorXd>&)>;

/** One independent input coordinate: uniform(a,b) or normal(0, sigma^2). */
struct Marginal {
  enum class Kind { uniform, normal };
  Kind kind = Kind::uniform;
  double a = -1.0, b = 1.0;  // uniform support
  double sigma2 = 1.0;       // normal variance

  static Marginal Uniform(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("Marginal::Uniform: requires a < b");
    Marginal m;
    m.kind = Kind::uniform;
    m.a = a;
    m.b = b;
    return m;
  }
  static Marginal Normal(double sigma2) {
    if (!(sigma2 > 0.0)) throw std::invalid_argument("Marginal::Normal: requires sigma2 > 0");
    Marginal m;
    m.kind = Kind::normal;
    m.sigma2 = sigma2;
    return m;
  }
};

/** Product parameter space Theta_1 x ... x Theta_Npar of independent marginals. */
struct ParameterSpace {
  std::vector<Marginal> marginals;

  int n_par() const { return static_cast<int>(marginals.size()); }

  static ParameterSpace uniform_cube(int n_par, double a = -1.0, double b = 1.0) {
    if (n_par < 1) throw std::invalid_argument("ParameterSpace: n_par must be >= 1");
    ParameterSpace s;
    s.marginals.assign(static_cast<std::size_t>(n_par), Marginal::Uniform(a, b));
    return s;
  }
  static ParameterSpace standard_normal(int n_par) {
    if (n_par < 1) throw std::invalid_argument("ParameterSpace: n_par must be >= 1");
    ParameterSpace s;
    s.marginals.assign(static_cast<std::size_t>(n_par), Marginal::Normal(1.0));
    return s;
  }
};

/**
 * Poincare constant of a marginal: (b-a)^2/pi^2 for uniform(a,b) and sigma^2
 * for normal(0, sigma^2). These scale functional DGSMs into bounds on
 * functional total Sobol' indices.
 */
inline double poincare_constant(const Marginal& m) {
  switch (m.kind) {
    case Marginal::Kind::uniform: {
      const double w = m.b - m.a;
      return w * w / (M_PI * M_PI);
    }
    case Marginal::Kind::normal:
      return m.sigma2;
  }
  throw std::invalid_argument("poincare_constant: unsupported marginal kind");
}

inline Eigen::VectorXd poincare_constants(const ParameterSpace& space) {
  Eigen::VectorXd alpha(space.n_par());
  for (int j = 0; j < space.n_par(); ++j) alpha(j) = poincare_constant(space.marginals[j]);
  return alpha;
}

/** Draw of coordinate j at stream position j; pure in (seed, stream, j). */
inline double sample_coordinate(const ParameterSpace& space, std::uint64_t seed,
                                std::uint64_t stream, int j) {
  const Marginal& m = space.marginals[static_cast<std::size_t>(j)];
  const double u = rng::Stream(seed, stream).open01_at(static_cast<std::uint64_t>(j));
  switch (m.kind) {
    case Marginal::Kind::uniform:
      return m.a + (m.b - m.a) * u;
    case Marginal::Kind::normal:
      return std::sqrt(m.sigma2) * rng::normal_icdf(u);
  }
  throw std::invalid_argument("sample_coordinate: unsupported marginal kind");
}

/** One full sample row, stream index = sample index (plus optional offset). */
inline Eigen::VectorXd sample_row(const ParameterSpace& space, std::uint64_t seed,
                                  std::uint64_t stream) {
  Eigen::VectorXd row(space.n_par());
  for (int j = 0; j < space.n_par(); ++j) row(j) = sample_coordinate(space, seed, stream, j);
  return row;
}

/**
 * n i.i.d. samples, one row per sample. Row m is drawn from the counter-based
 * stream (seed, stream_offset + m), so the matrix is bit-identical for every
 * worker count and whether rows are drawn together or one at a time.
 */
inline Eigen::MatrixXd sample(const ParameterSpace& space, int n, std::uint64_t seed,
                              int jobs = 1, std::uint64_t stream_offset = 0) {
  if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
  Eigen::MatrixXd out(n, space.n_par());
  parallel_for(n, jobs, [&](int m) {
    out.row(m) = sample_row(space, seed, stream_offset + static_cast<std::uint64_t>(m));
  });
  return out;
}

}  // namespace fgsa
