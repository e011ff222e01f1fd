// Command-line runner: run | validate | oracle.
//
// Exit codes: 0 success, 2 experiment failure (failure.json written),
// 3 oracle check failed, 64 usage or config error.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pharmonic/experiments.hpp"

namespace {

constexpr int kUsage = 64;

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> args;
};

void add_common(CLI::App* app, Common& c, bool with_out) {
  app->add_option("--config", c.config_path, "config file (key=value with [sections])");
  if (with_out) app->add_option("--out", c.out, "output directory");
  app->add_option("--seed", c.seed, "seed for random initialization");
  app->add_option("--threads", c.threads, "worker threads");
  app->add_option("args", c.args, "[experiment] [key=value ...]");
}

pharmonic::ExperimentConfig build(const Common& c, const std::string& forced_experiment = {}) {
  using namespace pharmonic;
  std::string text;
  if (!c.config_path.empty()) text = read_file(c.config_path);
  std::vector<std::string> overrides;
  std::vector<std::string> problems;
  bool named = false;
  for (const auto& a : c.args) {
    if (a.find('=') != std::string::npos) overrides.push_back(a);
    else if (forced_experiment.empty() && !named) overrides.push_back("experiment=" + a), named = true;
    else problems.push_back("unexpected argument '" + a + "'");
  }
  if (!forced_experiment.empty()) overrides.push_back("experiment=" + forced_experiment);
  if (!c.out.empty()) overrides.push_back("output.dir=" + c.out);
  if (c.seed) overrides.push_back("run.seed=" + std::to_string(*c.seed));
  if (c.threads) overrides.push_back("run.threads=" + std::to_string(*c.threads));
  ConfigText t = parse_config_text(text, problems);
  apply_overrides(t, overrides, problems);
  if (problems.empty()) return resolve_config(t);
  // Report value problems alongside syntax ones.
  try {
    resolve_config(t);
  } catch (const ConfigError& e) {
    problems.insert(problems.end(), e.problems().begin(), e.problems().end());
  } catch (const Error&) {
  }
  throw ConfigError(problems);
}

int do_run(const Common& c, const std::string& forced = {}) {
  pharmonic::ExperimentConfig cfg;
  try {
    cfg = build(c, forced);
  } catch (const pharmonic::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const pharmonic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  std::cerr << "experiment " << cfg.experiment << " -> " << cfg.out << " (config "
            << pharmonic::hex64(pharmonic::config_hash(cfg)) << ")\n";
  auto r = pharmonic::run_experiment(cfg, cfg.out, &std::cerr);
  if (r.exit_code == 2)
    std::cerr << "failed: " << r.summary["error"]["message"].get<std::string>() << "\n";
  else if (r.exit_code == 3)
    std::cerr << "oracle checks failed; see " << cfg.out << "/summary.json\n";
  else
    std::cerr << "wrote " << cfg.out << "/summary.json\n";
  return r.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"p-harmonic map experiments"};
  app.set_version_flag("--version", pharmonic::kVersion);
  app.require_subcommand(1);

  Common run_opts, val_opts, orc_opts;
  auto* run = app.add_subcommand("run", "run a named experiment");
  add_common(run, run_opts, true);
  auto* validate = app.add_subcommand("validate", "print the normalized config or the list of problems");
  add_common(validate, val_opts, true);
  auto* oracle = app.add_subcommand("oracle", "closed-form oracle checks (no solver)");
  add_common(oracle, orc_opts, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kUsage;
  }

  if (*run) return do_run(run_opts);
  if (*oracle) return do_run(orc_opts, "oracle-suite");
  try {
    auto cfg = build(val_opts);
    std::cout << pharmonic::normalized(cfg);
    std::cout << "\n# config_hash = " << pharmonic::hex64(pharmonic::config_hash(cfg))
              << "\n# version = " << pharmonic::kVersion << "\n";
    return 0;
  } catch (const pharmonic::ConfigError& e) {
    for (const auto& p : e.problems()) std::cerr << "error: " << p << "\n";
    return kUsage;
  } catch (const pharmonic::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
}
