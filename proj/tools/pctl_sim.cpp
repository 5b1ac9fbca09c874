// Command-line simulator: seeded runs and parameter sweeps over JSON configs
// or built-in presets.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pctl/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;

struct CommonOptions {
  std::string config_path;
  std::string preset;
  std::string out = "out";
  int trials = 0;
  long long seed = -1;
  int threads = 1;
  bool timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration");
  cmd->add_option("--preset", o.preset, "built-in configuration (fig1 ... fig8, table1)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--trials", o.trials, "override experiment.trials");
  cmd->add_option("--seed", o.seed, "override experiment.seed");
  cmd->add_option("--threads", o.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_flag("--timing", o.timing, "write wall-clock seconds into trace.csv");
}

/// Preset first, then the file on top of it, then command-line overrides.
nlohmann::json load_config(const CommonOptions& o) {
  nlohmann::json j = nlohmann::json::object();
  if (!o.preset.empty()) j = pctl::preset(o.preset);
  if (!o.config_path.empty()) {
    std::ifstream f(o.config_path);
    if (!f) throw pctl::ConfigError("config", "cannot read " + o.config_path);
    nlohmann::json file;
    try {
      file = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw pctl::ConfigError("config", e.what());
    }
    j.merge_patch(file);
  }
  if (o.preset.empty() && o.config_path.empty()) throw pctl::ConfigError("config", "give --config or --preset");
  if (o.trials > 0) pctl::set_path(j, "experiment.trials", o.trials);
  if (o.seed >= 0) pctl::set_path(j, "experiment.seed", o.seed);
  return j;
}

/// Numbers stay numbers; anything else is passed as a string.
std::vector<nlohmann::json> parse_values(const std::string& csv) {
  std::vector<nlohmann::json> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const double d = std::stod(item, &used);
      if (used == item.size()) {
        if (item.find_first_of(".eE") == std::string::npos) {
          out.emplace_back(std::stoll(item));
        } else {
          out.emplace_back(d);
        }
        continue;
      }
    } catch (const std::exception&) {
    }
    if (item == "true" || item == "false") {
      out.emplace_back(item == "true");
    } else {
      out.emplace_back(item);
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Percentile-rate beamforming and power-control simulator"};
  app.require_subcommand(1);

  CommonOptions run_opts;
  auto* run_cmd = app.add_subcommand("run", "run one configuration");
  add_common(run_cmd, run_opts);

  CommonOptions sweep_opts;
  std::string param, values;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a configuration for several values of one parameter");
  add_common(sweep_cmd, sweep_opts);
  sweep_cmd->add_option("--param", param, "dotted parameter path, e.g. utility.w")->required();
  sweep_cmd->add_option("--values", values, "comma-separated values")->required();

  auto* list_cmd = app.add_subcommand("presets", "list built-in presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (list_cmd->parsed()) {
      for (const auto& n : pctl::preset_names()) std::cout << n << '\n';
      return 0;
    }
    if (run_cmd->parsed()) {
      const auto j = load_config(run_opts);
      pctl::RunConfig cfg;
      try {
        cfg = pctl::parse_config(j);
      } catch (const nlohmann::json::exception& e) {
        throw pctl::ConfigError("config", e.what());
      }
      const auto out = pctl::run(cfg, run_opts.threads);
      pctl::emit(out, run_opts.out, run_opts.timing);
      std::cout << "wrote " << out.records.size() << " trials to " << run_opts.out << " (" << out.seconds << " s)\n";
      return 0;
    }
    const auto j = load_config(sweep_opts);
    const auto vals = parse_values(values);
    std::vector<pctl::SweepPoint> pts;
    try {
      pts = pctl::sweep(j, param, vals, sweep_opts.threads);
    } catch (const nlohmann::json::exception& e) {
      throw pctl::ConfigError("config", e.what());
    }
    pctl::emit_sweep(pts, param, sweep_opts.out, sweep_opts.timing);
    std::cout << "wrote " << pts.size() << " sweep points to " << sweep_opts.out << '\n';
    return 0;
  } catch (const pctl::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const pctl::SolverAbort& e) {
    std::cerr << "solver abort: " << e.what() << '\n';
    return kExitSolver;
  } catch (const pctl::InfeasibleError& e) {
    std::cerr << "solver abort: " << e.what() << '\n';
    return kExitSolver;
  } catch (const pctl::DomainError& e) {
    std::cerr << "solver abort: " << e.what() << '\n';
    return kExitSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
