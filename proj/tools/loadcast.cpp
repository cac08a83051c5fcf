#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "loadcast/cli.hpp"

namespace {

using loadcast::RunConfig;
namespace cli = loadcast::cli;

// Flag values are collected as text and applied on top of the config file.
struct Flags {
  std::string config;
  std::vector<std::pair<CLI::Option*, std::string>> keyed;
  std::map<std::string, std::string> values;
  std::vector<std::string> hp;

  void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto* opt = app->add_option(flag, values[key], help);
    keyed.emplace_back(opt, key);
  }

  RunConfig resolve() const {
    RunConfig cfg;
    if (!config.empty()) cfg.load_file(config);
    for (const auto& [opt, key] : keyed) {
      if (opt->count() > 0) cfg.set(key, values.at(key));
    }
    for (const auto& kv : hp) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) {
        loadcast::fail(loadcast::ErrorCode::ConfigInvalid, "--hp expects key=value, got '" + kv + "'");
      }
      cfg.set("model." + kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void common(CLI::App* app, Flags& f, bool out_dir = true) {
  app->add_option("--config", f.config, "INI config file");
  f.add(app, "--input", "data.input", "LIVED CSV files (plain or gzip), comma separated");
  f.add(app, "--profile", "data.synth_profile", "synthetic household profile (JSON)");
  f.add(app, "--days", "data.synth_days", "days of synthetic data");
  f.add(app, "--sample-period", "data.synth_period_s", "synthetic sample period in seconds");
  f.add(app, "--roster", "data.roster", "roster override file (JSON)");
  f.add(app, "--max-gap", "data.max_gap_min", "largest tolerated reporting gap in minutes");
  f.add(app, "--min-days", "data.min_days", "minimum usable days per household");
  f.add(app, "--seed", "general.seed", "seed for every stochastic component");
  if (out_dir) f.add(app, "--out", "output.out", "report directory");
}

void modelling(CLI::App* app, Flags& f) {
  f.add(app, "--history-days", "window.history_days", "historic window length in days");
  f.add(app, "--increment", "window.increment_min", "increment in minutes");
  f.add(app, "--base", "window.base_min", "feature base interval in minutes");
  f.add(app, "--horizon", "window.horizon_min", "forecast horizon(s) in minutes, comma separated");
  f.add(app, "--features", "features.combos", "feature combination(s): names or complex|minimal; ';' separated");
  f.add(app, "--model", "model.models", "model family, comma separated");
  f.add(app, "--retrain-every", "model.retrain_every", "prediction steps between retrains");
  f.add(app, "--parallelism", "runtime.parallelism", "worker count");
  app->add_option("--hp", f.hp, "hyperparameter key=value (repeatable)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Household load forecasting toolkit"};
  app.require_subcommand(1);

  Flags validate_f, replay_f, synth_f, eval_f, select_f, run_f;

  auto* validate = app.add_subcommand("validate", "data-quality summary per household");
  common(validate, validate_f);

  auto* replay = app.add_subcommand("replay", "replay a log as LIVED lines");
  common(replay, replay_f);
  replay_f.add(replay, "--mode", "runtime.mode", "batch or paced");
  replay_f.add(replay, "--speedup", "runtime.speedup", "paced replay speedup");
  std::optional<int> replay_house;
  replay->add_option("--house", replay_house, "household id");

  auto* synth = app.add_subcommand("synth", "generate a synthetic household log");
  common(synth, synth_f, false);
  std::string synth_out = "synthetic.csv";
  synth->add_option("--out", synth_out, "output CSV path");

  auto* evaluate = app.add_subcommand("evaluate", "walk-forward evaluation reports");
  common(evaluate, eval_f);
  modelling(evaluate, eval_f);
  eval_f.add(evaluate, "--houses", "data.houses", "all or comma separated ids");

  auto* select = app.add_subcommand("feature-select", "rank feature combinations by Score");
  common(select, select_f);
  modelling(select, select_f);
  select_f.add(select, "--pool", "features.pool", "candidate features, comma separated");
  select_f.add(select, "--k", "features.k", "combination size");
  select_f.add(select, "--households", "data.houses", "comma separated household ids");

  auto* runc = app.add_subcommand("run", "parallel streaming prediction with latency report");
  common(runc, run_f);
  modelling(runc, run_f);
  run_f.add(runc, "--houses", "data.houses", "all or comma separated ids");
  run_f.add(runc, "--mode", "runtime.mode", "batch or paced");
  run_f.add(runc, "--speedup", "runtime.speedup", "paced replay speedup");
  run_f.add(runc, "--latency-report", "runtime.latency_report", "latency report path prefix");
  run_f.add(runc, "--report-every", "runtime.report_every_s", "seconds between interim latency reports");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : cli::kConfigError;
  }

  return cli::guarded(std::cerr, [&]() -> int {
    if (*validate) return cli::cmd_validate(validate_f.resolve(), std::cout);
    if (*replay) return cli::cmd_replay(replay_f.resolve(), replay_house, std::cout);
    if (*synth) return cli::cmd_synth(synth_f.resolve(), synth_out);
    if (*evaluate) return cli::cmd_evaluate(eval_f.resolve(), std::cout);
    if (*select) return cli::cmd_feature_select(select_f.resolve(), std::cout);
    if (*runc) return cli::cmd_run(run_f.resolve(), std::cout);
    return cli::kConfigError;
  });
}
