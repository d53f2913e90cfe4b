#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <string>

#include "fgsa/config.hpp"
#include "fgsa/experiments.hpp"
#include "fgsa/parallel.hpp"

namespace {

/** Machine-readable failure record on stderr, one JSON object per line. */
int fail(const char* type, const std::string& message, int code) {
  nlohmann::ordered_json record;
  record["error"]["type"] = type;
  record["error"]["message"] = message;
  std::fprintf(stderr, "%s\n", record.dump().c_str());
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Global sensitivity screening for functional model outputs: runs the "
      "configured experiment and writes CSV/JSON artifacts"};
  std::string config_path;
  app.add_option("--config", config_path, "experiment configuration file")->required();
  int jobs = 0;
  app.add_option("--jobs", jobs, "worker threads (default: all cores)");
  std::string out_dir;
  app.add_option("--out", out_dir, "output directory (overrides the config)");
  std::uint64_t seed_override = 0;
  auto* seed_opt = app.add_option("--seed-override", seed_override, "replace the config seed");
  bool validate_only = false;
  app.add_flag("--validate-only", validate_only,
               "check the configuration and list all effective values without running");
  CLI11_PARSE(app, argc, argv);

  fgsa::ExperimentConfig cfg;
  try {
    cfg = fgsa::load_experiment_config_file(config_path);
  } catch (const std::exception& e) {
    return fail("config", e.what(), 1);
  }

  if (seed_opt->count() > 0) cfg.seed = seed_override;
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (cfg.output_dir.empty()) {
    const char* root = std::getenv("FGSA_OUT_ROOT");
    cfg.output_dir = (std::filesystem::path(root != nullptr ? root : ".") /
                      ("fgsa_" + fgsa::to_string(cfg.kind)))
                         .string();
  }

  if (validate_only) {
    std::printf("configuration OK\n");
    for (const auto& [key, value] : fgsa::effective_values(cfg))
      std::printf("%s = %s\n", key.c_str(), value.c_str());
    return 0;
  }

  try {
    const fgsa::RunResult run = fgsa::run_experiment(cfg, fgsa::resolve_jobs(jobs));
    for (const auto& [name, sha] : run.artifacts)
      std::printf("wrote %s/%s  sha1 %s\n", run.out_dir.c_str(), name.c_str(), sha.c_str());
    std::printf("wrote %s/manifest.json\n", run.out_dir.c_str());
    std::printf("finished in %.2f s\n", run.wall_seconds);
    return 0;
  } catch (const std::exception& e) {
    return fail("runtime", e.what(), 2);
  }
}
