#pragma once

// Experiment configuration: flat key=value text with [section] headers.
//
//   # comment
//   [run]
//   experiment = disk-sweep
//   seed = 0
//
// Every key has a default that depends on the experiment; `normalized()`
// prints all of them in a fixed order. Overrides on the command line use
// either `section.key=value` or a bare key when it is unambiguous
// (`k=1 p=1.5,1.7,1.9 n=256`).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pharmonic/error.hpp"
#include "pharmonic/io.hpp"

namespace pharmonic {

inline constexpr const char* kVersion = "0.1.0";

/// Carries every problem found in a config, one message per entry.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "invalid config:";
    for (const auto& p : v) s += "\n  " + p;
    return s;
  }
  std::vector<std::string> problems_;
};

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{"disk-sweep", "torus-hodge", "torus-diffuse",
                                              "minmax-surface", "oracle-suite"};
  return names;
}

struct ExperimentConfig {
  std::string experiment = "disk-sweep";
  std::uint64_t seed = 0;
  int threads = 1;

  int n = 0;  ///< cells per unit length (disk, square) or per period (torus)
  std::vector<double> p;
  std::vector<double> delta_reg;
  std::optional<double> eps;  ///< unset: eps = h
  double delta_N = 0.25;

  int max_iterations = 20000;
  double tolerance = 1e-5;
  int levels = 2;

  std::string boundary;  ///< dirichlet | periodic

  int k = 1;
  double ring = 0.5;

  double q = 1.4;
  double perturbation = 0.1;
  std::vector<int> m;  ///< diffuse windings; empty means m_p

  int nr = 32;
  int ntheta = 32;

  int profile_points = 16;
  double profile_rmax = 0.4;
  double pohozaev_r1 = 0.15;
  double pohozaev_r2 = 0.35;

  std::string out = "out";
  bool checkpoint = true;

  double h() const {
    return 1.0 / n;
  }
};

namespace detail {

inline std::string trim(std::string s) {
  auto ws = [](unsigned char c) { return std::isspace(c); };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  // Shortest representation that round-trips.
  for (int prec = 1; prec <= 17; ++prec) {
    std::ostringstream t;
    t << std::setprecision(prec) << v;
    if (std::stod(t.str()) == v) return t.str();
  }
  return os.str();
}

template <class T>
std::string fmt_list(const std::vector<T>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    if constexpr (std::is_floating_point_v<T>) s += fmt_double(v[i]);
    else s += std::to_string(v[i]);
  }
  return s;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  std::string t = trim(s);
  if (t.empty()) return false;
  if constexpr (std::is_floating_point_v<T>) {
    try {
      std::size_t used = 0;
      out = std::stod(t, &used);
      return used == t.size() && std::isfinite(out);
    } catch (...) {
      return false;
    }
  } else {
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    return ec == std::errc{} && ptr == t.data() + t.size();
  }
}

template <class T>
bool parse_list(const std::string& s, std::vector<T>& out) {
  out.clear();
  std::string t = trim(s);
  if (t.empty()) return true;
  std::stringstream ss(t);
  std::string item;
  while (std::getline(ss, item, ',')) {
    T v;
    if (!parse_number(item, v)) return false;
    out.push_back(v);
  }
  return true;
}

struct KeySpec {
  const char* section;
  const char* key;
  bool hashed;
};

inline const std::vector<KeySpec>& key_table() {
  static const std::vector<KeySpec> t{
      {"run", "experiment", true},      {"run", "seed", true},
      {"run", "threads", false},        {"grid", "n", true},
      {"schedule", "p", true},          {"schedule", "delta_reg", true},
      {"schedule", "eps", true},        {"schedule", "delta_N", true},
      {"stopping", "max_iterations", true}, {"stopping", "tolerance", true},
      {"stopping", "levels", true},     {"boundary", "kind", true},
      {"disk", "k", true},              {"disk", "ring", true},
      {"torus", "q", true},             {"torus", "perturbation", true},
      {"torus", "m", true},             {"minmax", "nr", true},
      {"minmax", "ntheta", true},       {"diagnostics", "profile_points", true},
      {"diagnostics", "profile_rmax", true}, {"diagnostics", "pohozaev_r1", true},
      {"diagnostics", "pohozaev_r2", true},  {"output", "dir", false},
      {"output", "checkpoint", true},
  };
  return t;
}

}  // namespace detail

/// Raw key/value assignments, "section.key" -> text, in input order of last write.
using ConfigText = std::map<std::string, std::string>;

/// Resolves a possibly bare key to "section.key"; empty on failure.
inline std::string qualify_key(const std::string& key, std::vector<std::string>& problems) {
  if (key.find('.') != std::string::npos) {
    for (const auto& s : detail::key_table())
      if (key == std::string(s.section) + "." + s.key) return key;
    problems.push_back("unknown key '" + key + "'");
    return {};
  }
  std::string found;
  int hits = 0;
  for (const auto& s : detail::key_table())
    if (key == s.key) found = std::string(s.section) + "." + s.key, ++hits;
  if (key == "experiment") return "run.experiment";
  if (hits == 1) return found;
  problems.push_back(hits == 0 ? "unknown key '" + key + "'" : "ambiguous key '" + key + "'");
  return {};
}

/// Parses config text; section headers qualify the following keys.
inline ConfigText parse_config_text(const std::string& text, std::vector<std::string>& problems) {
  ConfigText out;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        problems.push_back("line " + std::to_string(lineno) + ": malformed section header");
        continue;
      }
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      problems.push_back("line " + std::to_string(lineno) + ": expected key = value");
      continue;
    }
    std::string key = detail::trim(line.substr(0, eq));
    std::string value = detail::trim(line.substr(eq + 1));
    std::string full = section.empty() ? key : section + "." + key;
    std::string q = qualify_key(full, problems);
    if (!q.empty()) out[q] = value;
  }
  return out;
}

/// Applies `key=value` overrides (bare or qualified keys).
inline void apply_overrides(ConfigText& text, const std::vector<std::string>& overrides,
                            std::vector<std::string>& problems) {
  for (const auto& o : overrides) {
    auto eq = o.find('=');
    if (eq == std::string::npos) {
      problems.push_back("override '" + o + "' is not key=value");
      continue;
    }
    std::string q = qualify_key(detail::trim(o.substr(0, eq)), problems);
    if (!q.empty()) text[q] = detail::trim(o.substr(eq + 1));
  }
}

inline bool torus_experiment(const std::string& e) {
  return e == "torus-hodge" || e == "torus-diffuse";
}

/// Defaults that depend on the experiment.
inline ExperimentConfig experiment_defaults(const std::string& experiment) {
  ExperimentConfig c;
  c.experiment = experiment;
  c.delta_reg = {1e-1, 1e-2, 1e-3};
  c.boundary = torus_experiment(experiment) ? "periodic" : "dirichlet";
  if (experiment == "disk-sweep") {
    c.n = 256;
    c.p = {1.5, 1.7, 1.9};
  } else if (experiment == "torus-hodge") {
    c.n = 128;
    c.p = {1.5, 1.7, 1.8, 1.9};
  } else if (experiment == "torus-diffuse") {
    c.n = 128;
    c.p = {1.5, 1.7, 1.9};
  } else if (experiment == "minmax-surface") {
    c.n = 129;
    c.p = {1.5, 1.7, 1.9};
  } else {
    c.n = 256;
    c.p = {1.5, 1.9};
  }
  return c;
}

/// Builds a validated config from raw text. Collects every problem before
/// throwing ConfigError.
inline ExperimentConfig resolve_config(const ConfigText& text) {
  std::vector<std::string> problems;
  std::string experiment = "disk-sweep";
  if (auto it = text.find("run.experiment"); it != text.end()) experiment = it->second;
  if (std::find(experiment_names().begin(), experiment_names().end(), experiment) ==
      experiment_names().end()) {
    std::string names;
    for (const auto& n : experiment_names()) names += (names.empty() ? "" : ", ") + n;
    throw ConfigError({"run.experiment: unknown experiment '" + experiment + "' (expected one of " +
                       names + ")"});
  }
  ExperimentConfig c = experiment_defaults(experiment);

  auto get = [&](const char* key) -> const std::string* {
    auto it = text.find(key);
    return it == text.end() ? nullptr : &it->second;
  };
  auto num = [&](const char* key, auto& field) {
    if (const std::string* v = get(key))
      if (!detail::parse_number(*v, field)) problems.push_back(std::string(key) + ": not a number: '" + *v + "'");
  };
  auto list = [&](const char* key, auto& field) {
    if (const std::string* v = get(key))
      if (!detail::parse_list(*v, field))
        problems.push_back(std::string(key) + ": not a comma-separated number list: '" + *v + "'");
  };

  num("run.seed", c.seed);
  num("run.threads", c.threads);
  num("grid.n", c.n);
  list("schedule.p", c.p);
  list("schedule.delta_reg", c.delta_reg);
  if (const std::string* v = get("schedule.eps"); v && *v != "h") {
    double e;
    if (detail::parse_number(*v, e)) c.eps = e;
    else problems.push_back("schedule.eps: expected 'h' or a number, got '" + *v + "'");
  }
  num("schedule.delta_N", c.delta_N);
  num("stopping.max_iterations", c.max_iterations);
  num("stopping.tolerance", c.tolerance);
  num("stopping.levels", c.levels);
  if (const std::string* v = get("boundary.kind")) c.boundary = *v;
  num("disk.k", c.k);
  num("disk.ring", c.ring);
  num("torus.q", c.q);
  num("torus.perturbation", c.perturbation);
  list("torus.m", c.m);
  num("minmax.nr", c.nr);
  num("minmax.ntheta", c.ntheta);
  num("diagnostics.profile_points", c.profile_points);
  num("diagnostics.profile_rmax", c.profile_rmax);
  num("diagnostics.pohozaev_r1", c.pohozaev_r1);
  num("diagnostics.pohozaev_r2", c.pohozaev_r2);
  if (const std::string* v = get("output.dir")) c.out = *v;
  if (const std::string* v = get("output.checkpoint")) {
    if (*v == "true" || *v == "1") c.checkpoint = true;
    else if (*v == "false" || *v == "0") c.checkpoint = false;
    else problems.push_back("output.checkpoint: expected true or false, got '" + *v + "'");
  }

  // Range checks.
  if (c.threads < 1) problems.push_back("run.threads: must be at least 1");
  if (c.n < 8) problems.push_back("grid.n: must be at least 8");
  if (c.p.empty()) problems.push_back("schedule.p: empty schedule");
  for (std::size_t i = 0; i < c.p.size(); ++i) {
    if (!(c.p[i] > 1.0 && c.p[i] <= 2.0))
      problems.push_back("schedule.p: value " + detail::fmt_double(c.p[i]) + " outside p in (1,2]");
    else if (i > 0 && !(c.p[i] > c.p[i - 1]))
      problems.push_back("schedule.p: must increase toward 2");
  }
  for (std::size_t i = 0; i < c.delta_reg.size(); ++i) {
    if (!(c.delta_reg[i] >= 0.0)) problems.push_back("schedule.delta_reg: values must be nonnegative");
    else if (i > 0 && !(c.delta_reg[i] < c.delta_reg[i - 1]))
      problems.push_back("schedule.delta_reg: must decrease");
  }
  if (c.eps && !(*c.eps > 0.0)) problems.push_back("schedule.eps: must be positive");
  if (!(c.delta_N > 0.0 && c.delta_N <= 0.25)) problems.push_back("schedule.delta_N: must lie in (0, 1/4]");
  if (c.max_iterations < 1) problems.push_back("stopping.max_iterations: must be positive");
  if (!(c.tolerance > 0.0 && c.tolerance < 1.0)) problems.push_back("stopping.tolerance: must lie in (0, 1)");
  if (c.levels < 0) problems.push_back("stopping.levels: must be nonnegative");
  if (c.boundary != "dirichlet" && c.boundary != "periodic")
    problems.push_back("boundary.kind: expected dirichlet or periodic, got '" + c.boundary + "'");
  else if (torus_experiment(c.experiment) && c.boundary != "periodic")
    problems.push_back("boundary.kind: topology conflict, " + c.experiment +
                       " runs on the periodic torus but boundary is " + c.boundary);
  else if (!torus_experiment(c.experiment) && c.boundary != "dirichlet")
    problems.push_back("boundary.kind: topology conflict, " + c.experiment +
                       " needs Dirichlet data but boundary is " + c.boundary);
  if (c.k == 0 || std::abs(c.k) > 8) problems.push_back("disk.k: degree must be nonzero with |k| <= 8");
  if (!(c.ring > 0.0 && c.ring < 1.0)) problems.push_back("disk.ring: must lie in (0, 1)");
  if (!(c.q > 1.0)) problems.push_back("torus.q: must exceed 1");
  for (double pv : c.p)
    if (c.experiment == "torus-hodge" && !(c.q < pv)) {
      problems.push_back("torus.q: must be below every p");
      break;
    }
  if (!(c.perturbation >= 0.0 && c.perturbation < 1.0))
    problems.push_back("torus.perturbation: must lie in [0, 1)");
  if (!c.m.empty() && c.m.size() != c.p.size())
    problems.push_back("torus.m: needs one winding per p value");
  if (torus_experiment(c.experiment) && c.n % 2 != 0)
    problems.push_back("grid.n: torus experiments need an even n");
  if (c.nr < 1) problems.push_back("minmax.nr: must be positive");
  if (c.ntheta < 4 || c.ntheta % 4 != 0) problems.push_back("minmax.ntheta: must be a positive multiple of 4");
  if (c.profile_points < 2) problems.push_back("diagnostics.profile_points: need at least 2");
  if (!(c.profile_rmax > 0.0)) problems.push_back("diagnostics.profile_rmax: must be positive");
  if (!(c.pohozaev_r1 > 0.0 && c.pohozaev_r2 > c.pohozaev_r1))
    problems.push_back("diagnostics.pohozaev_r1/r2: need 0 < r1 < r2");
  if (c.out.empty()) problems.push_back("output.dir: must not be empty");
  if (!problems.empty()) throw ConfigError(problems);
  return c;
}

/// Canonical text of the config: every key in table order, with section
/// headers. `hashed_only` drops keys that do not affect results.
inline std::string normalized(const ExperimentConfig& c, bool hashed_only = false) {
  using detail::fmt_double;
  using detail::fmt_list;
  std::map<std::string, std::string> v{
      {"run.experiment", c.experiment},
      {"run.seed", std::to_string(c.seed)},
      {"run.threads", std::to_string(c.threads)},
      {"grid.n", std::to_string(c.n)},
      {"schedule.p", fmt_list(c.p)},
      {"schedule.delta_reg", fmt_list(c.delta_reg)},
      {"schedule.eps", c.eps ? fmt_double(*c.eps) : "h"},
      {"schedule.delta_N", fmt_double(c.delta_N)},
      {"stopping.max_iterations", std::to_string(c.max_iterations)},
      {"stopping.tolerance", fmt_double(c.tolerance)},
      {"stopping.levels", std::to_string(c.levels)},
      {"boundary.kind", c.boundary},
      {"disk.k", std::to_string(c.k)},
      {"disk.ring", fmt_double(c.ring)},
      {"torus.q", fmt_double(c.q)},
      {"torus.perturbation", fmt_double(c.perturbation)},
      {"torus.m", fmt_list(c.m)},
      {"minmax.nr", std::to_string(c.nr)},
      {"minmax.ntheta", std::to_string(c.ntheta)},
      {"diagnostics.profile_points", std::to_string(c.profile_points)},
      {"diagnostics.profile_rmax", fmt_double(c.profile_rmax)},
      {"diagnostics.pohozaev_r1", fmt_double(c.pohozaev_r1)},
      {"diagnostics.pohozaev_r2", fmt_double(c.pohozaev_r2)},
      {"output.dir", c.out},
      {"output.checkpoint", c.checkpoint ? "true" : "false"},
  };
  std::string out, section;
  for (const auto& s : detail::key_table()) {
    if (hashed_only && !s.hashed) continue;
    if (section != s.section) {
      section = s.section;
      out += (out.empty() ? "[" : "\n[") + section + "]\n";
    }
    out += std::string(s.key) + " = " + v.at(std::string(s.section) + "." + s.key) + "\n";
  }
  return out;
}

/// FNV-1a of the result-relevant normalized text and the code version.
inline std::uint64_t config_hash(const ExperimentConfig& c) {
  return fnv1a64(normalized(c, true) + "version = " + kVersion + "\n");
}

/// Convenience: text plus overrides to a validated config.
inline ExperimentConfig load_config(const std::string& text,
                                    const std::vector<std::string>& overrides = {}) {
  std::vector<std::string> problems;
  ConfigText t = parse_config_text(text, problems);
  apply_overrides(t, overrides, problems);
  if (!problems.empty()) throw ConfigError(problems);
  return resolve_config(t);
}

}  // namespace pharmonic
