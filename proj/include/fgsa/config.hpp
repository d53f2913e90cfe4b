#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fgsa/cholera.hpp"
#include "fgsa/csv.hpp"

namespace fgsa {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/** `[section]` headers, `key = value` lines, `#` comment lines; nothing else. */
class ParsedConfig {
 public:
  static ParsedConfig from_text(const std::string& text) {
    ParsedConfig out;
    std::istringstream in(text);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigError("config line " + std::to_string(line_no) + ": malformed section");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigError("config line " + std::to_string(line_no) + ": empty section name");
        out.sections_[section];  // remember even if empty
        continue;
      }
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      if (section.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": key outside any section");
      const std::string key = trim(t.substr(0, eq));
      const std::string value = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      if (!out.sections_[section].emplace(key, value).second)
        throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key +
                          "' in [" + section + "]");
    }
    return out;
  }

  static ParsedConfig from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_text(buf.str());
  }

  bool has_section(const std::string& s) const { return sections_.count(s) != 0; }
  const std::map<std::string, std::string>* section(const std::string& s) const {
    const auto it = sections_.find(s);
    return it == sections_.end() ? nullptr : &it->second;
  }
  std::vector<std::string> section_names() const {
    std::vector<std::string> names;
    for (const auto& [name, keys] : sections_) names.push_back(name);
    return names;
  }

 private:
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

inline double parse_double_value(const std::string& where, const std::string& raw) {
  const std::string s = trim(raw);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError(where + ": expected a number, got '" + raw + "'");
  return v;
}

inline long long parse_int_value(const std::string& where, const std::string& raw) {
  const std::string s = trim(raw);
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ConfigError(where + ": expected an integer, got '" + raw + "'");
  return v;
}

inline bool parse_bool_value(const std::string& where, const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError(where + ": expected true/false, got '" + raw + "'");
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

/** Tracks which keys a schema consumed so leftovers can be reported. */
class SectionReader {
 public:
  SectionReader(const ParsedConfig& cfg, std::string name)
      : name_(std::move(name)), keys_(cfg.section(name_)) {}

  bool has(const std::string& key) const { return keys_ && keys_->count(key); }

  std::string require_string(const std::string& key) {
    if (!has(key)) throw ConfigError("missing required field " + path(key));
    consumed_.insert(key);
    return keys_->at(key);
  }
  std::string string_or(const std::string& key, const std::string& fallback) {
    return has(key) ? require_string(key) : fallback;
  }
  long long require_int(const std::string& key) {
    return parse_int_value(path(key), require_string(key));
  }
  long long int_or(const std::string& key, long long fallback) {
    return has(key) ? require_int(key) : fallback;
  }
  double require_double(const std::string& key) {
    return parse_double_value(path(key), require_string(key));
  }
  double double_or(const std::string& key, double fallback) {
    return has(key) ? require_double(key) : fallback;
  }
  bool bool_or(const std::string& key, bool fallback) {
    return has(key) ? parse_bool_value(path(key), require_string(key)) : fallback;
  }
  std::vector<double> doubles_or(const std::string& key, std::vector<double> fallback) {
    if (!has(key)) return fallback;
    std::vector<double> out;
    for (const auto& tok : split_ws(require_string(key)))
      out.push_back(parse_double_value(path(key), tok));
    return out;
  }
  std::vector<int> ints_or(const std::string& key, std::vector<int> fallback) {
    if (!has(key)) return fallback;
    std::vector<int> out;
    for (const auto& tok : split_ws(require_string(key)))
      out.push_back(static_cast<int>(parse_int_value(path(key), tok)));
    return out;
  }

  std::string path(const std::string& key) const { return "[" + name_ + "] " + key; }

  void reject_unknown_keys() const {
    if (!keys_) return;
    for (const auto& [key, value] : *keys_)
      if (!consumed_.count(key))
        throw ConfigError("unknown key '" + key + "' in [" + name_ + "]");
  }

 private:
  std::string name_;
  const std::map<std::string, std::string>* keys_;
  std::set<std::string> consumed_;
};

}  // namespace detail

enum class ExperimentKind { toy, cholera, subsurface, biotransport };

inline std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::toy: return "toy";
    case ExperimentKind::cholera: return "cholera";
    case ExperimentKind::subsurface: return "subsurface";
    case ExperimentKind::biotransport: return "biotransport";
  }
  throw std::logic_error("to_string: bad ExperimentKind");
}

struct SobolSettings {
  bool enabled = false;
  int n = 1000;
};

struct RomSettings {
  bool enabled = false;
  std::vector<int> tiers{7, 15, 30, 45};
  int n_pdf = 6000;
};

/** Everything a run needs, with defaults resolved; see README for the grammar. */
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::toy;
  std::uint64_t seed = 0;
  std::string output_dir;  // may be empty: resolved by the CLI
  int n_mc = 0;
  int n_qoi = 0;
  int n_par = 0;  // subsurface: 0 = choose by spectrum energy
  double threshold = 0.0;
  SobolSettings sobol;

  int toy_grid_n = 2001;

  CholeraConfig cholera;  // ranges resolved from the config file

  int nx = 128, ny = 64;  // subsurface mesh

  int nr = 96, nphi = 192;  // biotransport mesh
  double ell = 0.5;
  double r_qoi = 3.0;
  std::vector<double> probe_radii{0.25, 0.75, 2.5};
  RomSettings rom;
};

namespace detail {

inline void load_common(SectionReader& experiment, SectionReader& sampling, SectionReader& sobol,
                        ExperimentConfig& cfg, int default_n_qoi, double default_threshold) {
  cfg.seed = static_cast<std::uint64_t>(experiment.int_or("seed", 0));
  cfg.output_dir = experiment.string_or("output", "");

  cfg.n_mc = static_cast<int>(sampling.require_int("n_mc"));
  if (cfg.n_mc <= 0) throw ConfigError(sampling.path("n_mc") + ": must be positive");
  cfg.n_qoi = static_cast<int>(sampling.int_or("n_qoi", default_n_qoi));
  if (cfg.n_qoi <= 0) throw ConfigError(sampling.path("n_qoi") + ": must be positive");
  cfg.threshold = sampling.double_or("threshold", default_threshold);
  if (!(cfg.threshold > 0.0 && cfg.threshold <= 1.0))
    throw ConfigError(sampling.path("threshold") + ": must be in (0, 1]");

  cfg.sobol.enabled = sobol.bool_or("enabled", false);
  cfg.sobol.n = static_cast<int>(sobol.int_or("n", 1000));
  if (cfg.sobol.enabled && cfg.sobol.n < 2)
    throw ConfigError(sobol.path("n") + ": must be at least 2");
}

inline CholeraRanges load_cholera_ranges(SectionReader& sec) {
  static const char* names[8] = {"beta_L", "beta_H", "kappa_L", "b",
                                 "chi",    "xi",     "delta",   "gamma"};
  const bool has_fraction = sec.has("range_fraction");
  CholeraRanges ranges;
  if (has_fraction) {
    const double fraction = sec.require_double("range_fraction");
    if (!(fraction > 0.0 && fraction < 1.0))
      throw ConfigError(sec.path("range_fraction") + ": must be in (0, 1)");
    ranges = CholeraRanges::nominal_plus_minus(fraction);
  }
  int explicit_count = 0;
  for (int j = 0; j < 8; ++j) {
    const std::string key = std::string("range_") + names[j];
    if (!sec.has(key)) continue;
    const auto toks = split_ws(sec.require_string(key));
    if (toks.size() != 2)
      throw ConfigError(sec.path(key) + ": expected 'lo hi'");
    ranges.lo(j) = parse_double_value(sec.path(key), toks[0]);
    ranges.hi(j) = parse_double_value(sec.path(key), toks[1]);
    ++explicit_count;
  }
  if (!has_fraction && explicit_count != 8)
    throw ConfigError(
        "[cholera]: parameter ranges are required; set range_fraction or all eight "
        "range_<name> entries");
  ranges.validate();
  return ranges;
}

}  // namespace detail

inline ExperimentConfig load_experiment_config(const detail::ParsedConfig& parsed) {
  detail::SectionReader experiment(parsed, "experiment");
  detail::SectionReader sampling(parsed, "sampling");
  detail::SectionReader sobol(parsed, "sobol");

  const std::string kind_str = experiment.require_string("kind");
  ExperimentConfig cfg;
  std::set<std::string> allowed{"experiment", "sampling", "sobol"};

  if (kind_str == "toy") {
    cfg.kind = ExperimentKind::toy;
    allowed.insert("toy");
    detail::load_common(experiment, sampling, sobol, cfg, 2, 0.05);
    detail::SectionReader toy(parsed, "toy");
    cfg.toy_grid_n = static_cast<int>(toy.int_or("grid_n", 2001));
    if (cfg.toy_grid_n < 2) throw ConfigError(toy.path("grid_n") + ": must be at least 2");
    toy.reject_unknown_keys();
  } else if (kind_str == "cholera") {
    cfg.kind = ExperimentKind::cholera;
    allowed.insert("cholera");
    detail::load_common(experiment, sampling, sobol, cfg, 10, 0.05);
    detail::SectionReader ch(parsed, "cholera");
    cfg.cholera.ranges = detail::load_cholera_ranges(ch);
    cfg.cholera.t_final = ch.double_or("t_final", 150.0);
    if (!(cfg.cholera.t_final > 0.0))
      throw ConfigError(ch.path("t_final") + ": must be positive");
    cfg.cholera.n_out = static_cast<int>(ch.int_or("n_out", 601));
    if (cfg.cholera.n_out < 2) throw ConfigError(ch.path("n_out") + ": must be at least 2");
    cfg.cholera.rtol = ch.double_or("rtol", 1e-8);
    cfg.cholera.atol = ch.double_or("atol", 1e-10);
    if (!(cfg.cholera.rtol > 0.0) || !(cfg.cholera.atol > 0.0))
      throw ConfigError("[cholera]: tolerances must be positive");
    ch.reject_unknown_keys();
  } else if (kind_str == "subsurface") {
    cfg.kind = ExperimentKind::subsurface;
    allowed.insert("subsurface");
    detail::load_common(experiment, sampling, sobol, cfg, 15, 0.01);
    detail::SectionReader sub(parsed, "subsurface");
    cfg.nx = static_cast<int>(sub.int_or("nx", 128));
    cfg.ny = static_cast<int>(sub.int_or("ny", 64));
    if (cfg.nx < 2 || cfg.ny < 2) throw ConfigError("[subsurface]: mesh must be at least 2x2");
    cfg.n_par = static_cast<int>(sub.int_or("n_par", 0));
    if (cfg.n_par < 0) throw ConfigError(sub.path("n_par") + ": must be nonnegative");
    sub.reject_unknown_keys();
  } else if (kind_str == "biotransport") {
    cfg.kind = ExperimentKind::biotransport;
    allowed.insert("biotransport");
    allowed.insert("rom");
    detail::load_common(experiment, sampling, sobol, cfg, 50, 0.025);
    detail::SectionReader bio(parsed, "biotransport");
    cfg.nr = static_cast<int>(bio.int_or("nr", 96));
    cfg.nphi = static_cast<int>(bio.int_or("nphi", 192));
    if (cfg.nr < 2 || cfg.nphi < 3)
      throw ConfigError("[biotransport]: mesh needs nr >= 2 and nphi >= 3");
    cfg.ell = bio.double_or("ell", 0.5);
    if (!(cfg.ell > 0.0)) throw ConfigError(bio.path("ell") + ": must be positive");
    cfg.r_qoi = bio.double_or("r_qoi", 3.0);
    cfg.n_par = static_cast<int>(bio.int_or("n_par", 150));
    if (cfg.n_par <= 0) throw ConfigError(bio.path("n_par") + ": must be positive");
    cfg.probe_radii = bio.doubles_or("probes", {0.25, 0.75, 2.5});
    if (cfg.probe_radii.empty()) throw ConfigError(bio.path("probes") + ": need at least one");
    bio.reject_unknown_keys();

    detail::SectionReader rom(parsed, "rom");
    cfg.rom.enabled = rom.bool_or("enabled", false);
    cfg.rom.tiers = rom.ints_or("tiers", {7, 15, 30, 45});
    for (int t : cfg.rom.tiers)
      if (t < 1 || t > cfg.n_par)
        throw ConfigError(rom.path("tiers") + ": tier outside [1, n_par]");
    cfg.rom.n_pdf = static_cast<int>(rom.int_or("n_pdf", 6000));
    if (cfg.rom.enabled && cfg.rom.n_pdf < 30)
      throw ConfigError(rom.path("n_pdf") + ": need at least 30 samples for densities");
    rom.reject_unknown_keys();
  } else {
    throw ConfigError("[experiment] kind: unknown experiment '" + kind_str + "'");
  }

  experiment.reject_unknown_keys();
  sampling.reject_unknown_keys();
  sobol.reject_unknown_keys();
  for (const auto& name : parsed.section_names())
    if (!allowed.count(name)) throw ConfigError("unknown section [" + name + "]");
  return cfg;
}

inline ExperimentConfig load_experiment_config_text(const std::string& text) {
  return load_experiment_config(detail::ParsedConfig::from_text(text));
}

inline ExperimentConfig load_experiment_config_file(const std::string& path) {
  return load_experiment_config(detail::ParsedConfig::from_file(path));
}

/**
 * Every effective setting, defaults included, as ordered (key, value) pairs —
 * the `validate` report and the manifest echo. Numbers render with 17
 * significant digits so the echo re-parses to the same configuration.
 */
inline std::vector<std::pair<std::string, std::string>> effective_values(
    const ExperimentConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  const auto num = [](double v) { return format_double(v); };
  out.emplace_back("experiment.kind", to_string(cfg.kind));
  out.emplace_back("experiment.seed", std::to_string(cfg.seed));
  out.emplace_back("experiment.output", cfg.output_dir);
  out.emplace_back("sampling.n_mc", std::to_string(cfg.n_mc));
  out.emplace_back("sampling.n_qoi", std::to_string(cfg.n_qoi));
  out.emplace_back("sampling.threshold", num(cfg.threshold));
  out.emplace_back("sobol.enabled", cfg.sobol.enabled ? "true" : "false");
  out.emplace_back("sobol.n", std::to_string(cfg.sobol.n));
  switch (cfg.kind) {
    case ExperimentKind::toy:
      out.emplace_back("toy.grid_n", std::to_string(cfg.toy_grid_n));
      break;
    case ExperimentKind::cholera: {
      static const char* names[8] = {"beta_L", "beta_H", "kappa_L", "b",
                                     "chi",    "xi",     "delta",   "gamma"};
      for (int j = 0; j < 8; ++j)
        out.emplace_back(std::string("cholera.range_") + names[j],
                         num(cfg.cholera.ranges.lo(j)) + " " + num(cfg.cholera.ranges.hi(j)));
      out.emplace_back("cholera.t_final", num(cfg.cholera.t_final));
      out.emplace_back("cholera.n_out", std::to_string(cfg.cholera.n_out));
      out.emplace_back("cholera.rtol", num(cfg.cholera.rtol));
      out.emplace_back("cholera.atol", num(cfg.cholera.atol));
      break;
    }
    case ExperimentKind::subsurface:
      out.emplace_back("subsurface.nx", std::to_string(cfg.nx));
      out.emplace_back("subsurface.ny", std::to_string(cfg.ny));
      out.emplace_back("subsurface.n_par", std::to_string(cfg.n_par));
      break;
    case ExperimentKind::biotransport: {
      out.emplace_back("biotransport.nr", std::to_string(cfg.nr));
      out.emplace_back("biotransport.nphi", std::to_string(cfg.nphi));
      out.emplace_back("biotransport.ell", num(cfg.ell));
      out.emplace_back("biotransport.r_qoi", num(cfg.r_qoi));
      out.emplace_back("biotransport.n_par", std::to_string(cfg.n_par));
      std::string probes;
      for (double r : cfg.probe_radii) probes += (probes.empty() ? "" : " ") + num(r);
      out.emplace_back("biotransport.probes", probes);
      out.emplace_back("rom.enabled", cfg.rom.enabled ? "true" : "false");
      std::string tiers;
      for (int t : cfg.rom.tiers) tiers += (tiers.empty() ? "" : " ") + std::to_string(t);
      out.emplace_back("rom.tiers", tiers);
      out.emplace_back("rom.n_pdf", std::to_string(cfg.rom.n_pdf));
      break;
    }
  }
  return out;
}

}  // namespace fgsa
