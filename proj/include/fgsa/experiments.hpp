#pragma once

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fgsa/cholera.hpp"
#include "fgsa/config.hpp"
#include "fgsa/csv.hpp"
#include "fgsa/dgsm.hpp"
#include "fgsa/elliptic.hpp"
#include "fgsa/hash.hpp"
#include "fgsa/kle.hpp"
#include "fgsa/reduction.hpp"
#include "fgsa/sobol.hpp"
#include "fgsa/toy.hpp"

namespace fgsa {

struct RunResult {
  std::string out_dir;
  std::vector<std::pair<std::string, std::string>> artifacts;  // (basename, sha1)
  double wall_seconds = 0.0;
  DgsmReport report;  // the screening result every experiment produces
};

namespace detail {

/** Serialize, hash, then write, so the manifest records exactly what's on disk. */
inline void emit_artifact(RunResult& run, const std::string& name, const std::string& content) {
  const std::filesystem::path path = std::filesystem::path(run.out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path.string());
  run.artifacts.emplace_back(name, sha1_hex(content));
}

inline CsvTable dgsm_report_table(const DgsmReport& report) {
  CsvTable t;
  t.header = {"j", "N_j", "N_j_normalized", "bound_Bj", "stderr", "important"};
  for (Eigen::Index j = 0; j < report.functional_dgsm.size(); ++j)
    t.rows.push_back({std::to_string(j + 1), format_double(report.functional_dgsm(j)),
                      format_double(report.normalized(j)), format_double(report.bound(j)),
                      format_double(report.bound_stderr(j)),
                      report.important[static_cast<std::size_t>(j)] ? "true" : "false"});
  return t;
}

inline CsvTable sobol_report_table(const std::vector<SobolResult>& results) {
  CsvTable t;
  t.header = {"j", "S_func", "Stot_func", "stderr"};
  for (std::size_t j = 0; j < results.size(); ++j)
    t.rows.push_back({std::to_string(j + 1), format_double(results[j].functional_first_clamped),
                      format_double(results[j].functional_total_clamped),
                      format_double(results[j].functional_total_stderr)});
  return t;
}

inline CsvTable spectrum_table(const Eigen::VectorXd& eigenvalues, double trace) {
  CsvTable t;
  t.header = {"i", "lambda_i", "cumulative_fraction"};
  double cum = 0.0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    cum += eigenvalues(i);
    t.rows.push_back({std::to_string(i + 1), format_double(eigenvalues(i)),
                      format_double(trace > 0.0 ? cum / trace : 0.0)});
  }
  return t;
}

inline void emit_common_artifacts(RunResult& run, const ExperimentConfig& cfg, int jobs,
                                  const FieldFunction& field, const ParameterSpace& space,
                                  const SpatialGrid& grid) {
  emit_artifact(run, "dgsm_report.csv", csv_to_string(dgsm_report_table(run.report)));
  emit_artifact(run, "kle_spectrum.csv",
                csv_to_string(spectrum_table(run.report.kle.eigenvalues, run.report.kle.trace)));
  if (cfg.sobol.enabled) {
    const auto totals = sobol_all_totals(field, space, grid, cfg.sobol.n, cfg.seed, jobs);
    emit_artifact(run, "sobol_report.csv", csv_to_string(sobol_report_table(totals)));
  }
}

inline void emit_manifest(RunResult& run, const ExperimentConfig& cfg, int jobs) {
  nlohmann::ordered_json m;
  m["experiment"] = to_string(cfg.kind);
  m["seed"] = cfg.seed;
  m["jobs"] = jobs;  // informational; outputs are jobs-invariant
  nlohmann::ordered_json echo;
  for (const auto& [key, value] : effective_values(cfg)) echo[key] = value;
  m["config"] = std::move(echo);
  nlohmann::ordered_json outputs;
  for (const auto& [name, sha] : run.artifacts) outputs[name] = sha;
  m["outputs"] = std::move(outputs);
  m["wall_seconds"] = run.wall_seconds;
  const std::string text = m.dump(2) + "\n";
  const std::filesystem::path path = std::filesystem::path(run.out_dir) / "manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

}  // namespace detail

inline RunResult run_toy_experiment(const ExperimentConfig& cfg, int jobs) {
  RunResult run;
  run.out_dir = cfg.output_dir;
  const SpatialGrid grid = make_interval_grid(0.0, 1.0, cfg.toy_grid_n);
  const ToyModel model(grid);
  const ParameterSpace space = ToyProcess::parameter_space();
  run.report = run_algorithm_1(model, space, cfg.n_mc, cfg.n_qoi, cfg.seed, cfg.threshold, jobs);
  detail::emit_common_artifacts(run, cfg, jobs, ToyProcess::field_function(grid), space, grid);
  return run;
}

inline RunResult run_cholera_experiment(const ExperimentConfig& cfg, int jobs) {
  RunResult run;
  run.out_dir = cfg.output_dir;
  const CholeraModel model(cfg.cholera);
  const ParameterSpace space = ParameterSpace::uniform_cube(8);
  run.report = run_algorithm_1(model, space, cfg.n_mc, cfg.n_qoi, cfg.seed, cfg.threshold, jobs);

  // Trajectory at the range midpoint (the nominal for symmetric ranges).
  const auto nominal = map_theta_to_params(Eigen::RowVectorXd::Zero(8), cfg.cholera.ranges);
  const OdeSolution sol = solve_forward(nominal, cfg.cholera);
  CsvTable traj;
  traj.header = {"t", "S", "I", "R", "B_H", "B_L"};
  for (Eigen::Index k = 0; k < sol.times.size(); ++k)
    traj.rows.push_back({format_double(sol.times(k)), format_double(sol.states(k, 0)),
                         format_double(sol.states(k, 1)), format_double(sol.states(k, 2)),
                         format_double(sol.states(k, 3)), format_double(sol.states(k, 4))});
  detail::emit_artifact(run, "trajectory.csv", csv_to_string(traj));

  detail::emit_common_artifacts(run, cfg, jobs, model.field_function(), space,
                                model.output_grid());
  return run;
}

inline RunResult run_subsurface_experiment(const ExperimentConfig& cfg, int jobs) {
  RunResult run;
  run.out_dir = cfg.output_dir;
  const EllipticModel model(subsurface_config(cfg.nx, cfg.ny, cfg.n_par));
  const ParameterSpace space = ParameterSpace::standard_normal(model.n_par());
  run.report = run_algorithm_1(model, space, cfg.n_mc, cfg.n_qoi, cfg.seed, cfg.threshold, jobs);
  detail::emit_artifact(run, "input_spectrum.csv",
                        csv_to_string(detail::spectrum_table(
                            model.problem().field.kle.eigenvalues,
                            model.problem().field.kle.trace)));
  detail::emit_common_artifacts(run, cfg, jobs, model.field_function(), space,
                                model.output_grid());
  return run;
}

/** Cells nearest the requested radii along the first angular column. */
inline std::vector<int> annulus_probe_cells(const StructuredMesh& mesh,
                                            const std::vector<double>& radii) {
  std::vector<int> cells;
  for (double r : radii) {
    int best = -1;
    double best_err = std::numeric_limits<double>::infinity();
    for (int ir = 0; ir < mesh.nx; ++ir) {  // nx rings, ny rays; ray 0 is fixed
      const int c = ir * mesh.ny;
      const double rc = mesh.cells.points.row(c).norm();
      const double err = std::abs(rc - r);
      if (err < best_err) {
        best_err = err;
        best = c;
      }
    }
    cells.push_back(best);
  }
  return cells;
}

/**
 * One tier of the ROM study: retained sets are the top-k screened
 * coordinates (by bound) and the first k expansion terms; distances are the
 * L¹ gaps between each ROM's density and the full model's at every probe,
 * all three models sharing one theta sample.
 */
struct RomStudyRow {
  double probe_r;
  int tier;
  std::string method;  // "dgsm" or "kl"
  double l1_distance;
};

inline std::vector<int> top_k_by_bound(const DgsmReport& report, int k) {
  std::vector<int> order(static_cast<std::size_t>(report.bound.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return report.bound(a) > report.bound(b); });
  if (k < 1 || k > static_cast<int>(order.size()))
    throw std::invalid_argument("top_k_by_bound: k out of range");
  order.resize(static_cast<std::size_t>(k));
  return order;
}

inline RunResult run_biotransport_experiment(const ExperimentConfig& cfg, int jobs) {
  RunResult run;
  run.out_dir = cfg.output_dir;
  const EllipticProblem pb = biotransport_config(cfg.ell, cfg.r_qoi, cfg.nr, cfg.nphi, cfg.n_par);
  const EllipticModel model(pb);
  const ParameterSpace space = ParameterSpace::standard_normal(model.n_par());
  run.report = run_algorithm_1(model, space, cfg.n_mc, cfg.n_qoi, cfg.seed, cfg.threshold, jobs);
  detail::emit_artifact(
      run, "input_spectrum.csv",
      csv_to_string(detail::spectrum_table(pb.field.kle.eigenvalues, pb.field.kle.trace)));

  if (cfg.rom.enabled) {
    const std::vector<int> probe_cells = annulus_probe_cells(pb.mesh, cfg.probe_radii);
    const FieldFunction probe_model =
        [pb, probe_cells](const Eigen::Ref<const Eigen::RowVectorXd>& theta) {
          const Eigen::VectorXd pressure = assemble_and_solve_forward(pb, theta).pressure;
          Eigen::VectorXd vals(static_cast<Eigen::Index>(probe_cells.size()));
          for (std::size_t p = 0; p < probe_cells.size(); ++p)
            vals(static_cast<Eigen::Index>(p)) = pressure(probe_cells[p]);
          return vals;
        };

    constexpr std::uint64_t kPdfStreamBase = std::uint64_t{1} << 22;
    const int n_pdf = cfg.rom.n_pdf;
    const auto n_probes = static_cast<Eigen::Index>(probe_cells.size());
    const Eigen::MatrixXd thetas = sample(space, n_pdf, cfg.seed, jobs, kPdfStreamBase);
    Eigen::MatrixXd full_vals(n_pdf, n_probes);
    parallel_for(n_pdf, jobs,
                 [&](int m) { full_vals.row(m) = probe_model(thetas.row(m)).transpose(); });

    std::vector<RomStudyRow> rows;
    for (int tier : cfg.rom.tiers) {
      const std::vector<int> dgsm_set = top_k_by_bound(run.report, tier);
      std::vector<int> kl_set(static_cast<std::size_t>(tier));
      std::iota(kl_set.begin(), kl_set.end(), 0);
      for (const auto& [method, retained] :
           {std::pair<std::string, const std::vector<int>&>{"dgsm", dgsm_set},
            std::pair<std::string, const std::vector<int>&>{"kl", kl_set}}) {
        const ReducedModel rom(probe_model, space.n_par(), retained);
        Eigen::MatrixXd rom_vals(n_pdf, n_probes);
        parallel_for(n_pdf, jobs,
                     [&](int m) { rom_vals.row(m) = rom.evaluate(thetas.row(m)).transpose(); });
        for (Eigen::Index p = 0; p < n_probes; ++p)
          rows.push_back({cfg.probe_radii[static_cast<std::size_t>(p)], tier, method,
                          pdf_l1_distance(full_vals.col(p), rom_vals.col(p))});
      }
    }

    CsvTable table;
    table.header = {"probe_r", "tier", "method", "l1_distance"};
    for (const auto& row : rows)
      table.rows.push_back({format_double(row.probe_r), std::to_string(row.tier), row.method,
                            format_double(row.l1_distance)});
    detail::emit_artifact(run, "rom_table.csv", csv_to_string(table));

    CsvTable curves;
    curves.header = {"probe_r", "x", "density"};
    for (Eigen::Index p = 0; p < n_probes; ++p) {
      const Eigen::VectorXd samples = full_vals.col(p);
      const double h = detail::silverman_bandwidth(samples);
      const SpatialGrid g =
          make_interval_grid(samples.minCoeff() - 3.0 * h, samples.maxCoeff() + 3.0 * h, 512);
      const Eigen::VectorXd density = kde_pdf(samples, g.points.col(0));
      for (int k = 0; k < g.size(); ++k)
        curves.rows.push_back({format_double(cfg.probe_radii[static_cast<std::size_t>(p)]),
                               format_double(g.points(k, 0)), format_double(density(k))});
    }
    detail::emit_artifact(run, "pdf_curves.csv", csv_to_string(curves));
  }

  detail::emit_common_artifacts(run, cfg, jobs, model.field_function(), space,
                                model.output_grid());
  return run;
}

/** Run the configured experiment into cfg.output_dir and write its manifest. */
inline RunResult run_experiment(const ExperimentConfig& cfg, int jobs) {
  if (cfg.output_dir.empty())
    throw std::invalid_argument("run_experiment: output directory not set");
  std::filesystem::create_directories(cfg.output_dir);
  const auto t0 = std::chrono::steady_clock::now();
  RunResult run;
  switch (cfg.kind) {
    case ExperimentKind::toy: run = run_toy_experiment(cfg, jobs); break;
    case ExperimentKind::cholera: run = run_cholera_experiment(cfg, jobs); break;
    case ExperimentKind::subsurface: run = run_subsurface_experiment(cfg, jobs); break;
    case ExperimentKind::biotransport: run = run_biotransport_experiment(cfg, jobs); break;
  }
  run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  detail::emit_manifest(run, cfg, jobs);
  return run;
}

}  // namespace fgsa
