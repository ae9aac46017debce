#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "flivver/commands.hpp"

namespace {

using namespace flivver;

struct ConfigOptions {
  std::string config_file;
  std::vector<std::string> sets;
  std::map<std::string, std::string> flags;
};

// --config FILE, --set key=value and one --<key> option per config key.
void add_config_options(CLI::App* cmd, ConfigOptions& opts) {
  cmd->add_option("--config", opts.config_file, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--set", opts.sets, "override, key=value (repeatable)");
  for (const auto& key : config_keys()) cmd->add_option("--" + key, opts.flags[key], "config key " + key);
}

RunConfig resolve_config(const ConfigOptions& opts, const CLI::App* cmd, RunConfig base) {
  if (!opts.config_file.empty()) base = load_config(opts.config_file, base);
  for (const auto& s : opts.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
    set_key(base, s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : opts.flags) {
    if (cmd->count("--" + key)) set_key(base, key, value);
  }
  base.sync();
  return base;
}

std::vector<std::string> split_values(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flivver: metric velocity and depth from optic flow and acceleration"};
  app.require_subcommand(1);

  ConfigOptions sim_opts, est_opts, eval_opts, sweep_opts;
  std::string sim_out, est_dataset, est_out, eval_estimates, eval_dataset, eval_out, sweep_param, sweep_values,
      sweep_out = "sweep.csv";
  bool timing = false;
  std::uint64_t holdout_seed = 1000;

  auto* sim = app.add_subcommand("simulate", "write a synthetic replay dataset");
  add_config_options(sim, sim_opts);
  sim->add_option("--out", sim_out, "dataset directory (default: output_dir)");

  auto* est = app.add_subcommand("estimate", "run the estimator over a dataset");
  add_config_options(est, est_opts);
  est->add_option("--dataset", est_dataset, "dataset directory")->required();
  est->add_option("--out", est_out, "output directory (default: output_dir)");
  est->add_flag("--timing", timing, "record per-step wall-clock timing");

  auto* ev = app.add_subcommand("evaluate", "score estimates against dataset truth");
  add_config_options(ev, eval_opts);
  ev->add_option("--estimates", eval_estimates, "directory written by estimate")->required();
  ev->add_option("--dataset", eval_dataset, "dataset directory (omit for timing only)");
  ev->add_option("--out", eval_out, "report directory (default: the estimates directory)");

  auto* sw = app.add_subcommand("sweep", "simulate, estimate and evaluate over values of one key");
  add_config_options(sw, sweep_opts);
  sw->add_option("--param", sweep_param, "config key to sweep, or 'kalman' for the baseline grid search")->required();
  sw->add_option("--values", sweep_values, "comma-separated values");
  sw->add_option("--out", sweep_out, "output CSV");
  sw->add_option("--holdout-seed", holdout_seed, "seed for the kalman grid search");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) {
      const RunConfig cfg = resolve_config(sim_opts, sim, default_run_config());
      return cmd_simulate(cfg, sim_out.empty() ? cfg.output_dir : sim_out);
    }
    if (*est) {
      const RunConfig cfg = resolve_config(est_opts, est, default_run_config());
      return cmd_estimate(cfg, est_dataset, est_out.empty() ? cfg.output_dir : est_out, timing);
    }
    if (*ev) {
      // The estimate run's own config fixes the time offsets; flags still win.
      RunConfig base = default_run_config();
      const auto saved = std::filesystem::path(eval_estimates) / "config.txt";
      if (std::filesystem::exists(saved)) base = load_config(saved.string(), base);
      const RunConfig cfg = resolve_config(eval_opts, ev, base);
      return cmd_evaluate(cfg, eval_estimates, eval_dataset, eval_out.empty() ? eval_estimates : eval_out);
    }
    if (*sw) {
      const RunConfig cfg = resolve_config(sweep_opts, sw, default_run_config());
      if (sweep_param == "kalman") return cmd_tune_kalman(cfg, holdout_seed, sweep_out);
      return cmd_sweep(cfg, sweep_param, split_values(sweep_values), sweep_out);
    }
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const MisalignedSeries& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
  return kExitUsage;
}
