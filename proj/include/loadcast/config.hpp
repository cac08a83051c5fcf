#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "loadcast/error.hpp"
#include "loadcast/features.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/models/model.hpp"
#include "loadcast/replay.hpp"
#include "loadcast/windowing.hpp"

namespace loadcast {

// Every tunable of the command suite. Keys are "section.name"; the INI file
// uses one [section] per module.
struct RunConfig {
  // data
  std::vector<std::string> inputs;
  std::string synth_profile;
  double synth_days = 28.0;
  double synth_period_s = 2.0;
  std::string houses = "all";
  std::string roster;
  double max_gap_min = 60.0;
  int min_days = 1;
  bool strict = false;
  // window
  double history_days = 14.0;
  double increment_min = 15.0;
  double base_min = 60.0;
  std::vector<int> horizons_min = {60};
  // features
  std::vector<std::string> combos = {"minimal"};
  std::vector<std::string> pool;
  int k = 6;
  // model
  std::vector<std::string> models = {"persistence"};
  std::vector<std::pair<std::string, std::string>> hyperparams;
  int retrain_every = 1;
  // runtime
  std::size_t parallelism = 1;
  std::string mode = "batch";
  double speedup = 3600.0;
  double report_every_s = 0.0;
  std::string latency_report;
  // output
  std::string out = "out";
  std::optional<std::uint64_t> seed;

  void set(std::string_view key, std::string_view raw) {
    const auto value = detail::trim(raw);
    const auto bad = [&](const char* what) -> void {
      fail(ErrorCode::ConfigInvalid, std::string(key) + " expects " + what + ", got '" + std::string(value) + "'");
    };
    const auto real = [&]() {
      const auto v = detail::parse_number<double>(value);
      if (!v || !std::isfinite(*v)) bad("a number");
      return *v;
    };
    const auto integer = [&]() {
      const auto v = detail::parse_number<long long>(value);
      if (!v) bad("an integer");
      return *v;
    };
    const auto list = [&](char sep) {
      std::vector<std::string> out;
      for (const auto p : detail::split_fields(value, sep)) {
        const auto t = detail::trim(p);
        if (!t.empty()) out.emplace_back(t);
      }
      return out;
    };
    const auto boolean = [&]() {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      bad("a boolean");
      return false;
    };

    if (key == "data.input") inputs = list(',');
    else if (key == "data.synth_profile") synth_profile = std::string(value);
    else if (key == "data.synth_days") synth_days = real();
    else if (key == "data.synth_period_s") synth_period_s = real();
    else if (key == "data.houses") houses = std::string(value);
    else if (key == "data.roster") roster = std::string(value);
    else if (key == "data.max_gap_min") max_gap_min = real();
    else if (key == "data.min_days") min_days = static_cast<int>(integer());
    else if (key == "data.strict") strict = boolean();
    else if (key == "window.history_days") history_days = real();
    else if (key == "window.increment_min") increment_min = real();
    else if (key == "window.base_min") base_min = real();
    else if (key == "window.horizon_min") {
      horizons_min.clear();
      for (const auto& h : list(',')) {
        const auto v = detail::parse_number<int>(h);
        if (!v) bad("a list of minutes");
        horizons_min.push_back(*v);
      }
    } else if (key == "features.combos") combos = list(';');
    else if (key == "features.pool") pool = list(',');
    else if (key == "features.k") k = static_cast<int>(integer());
    else if (key == "model.models") models = list(',');
    else if (key == "model.retrain_every") retrain_every = static_cast<int>(integer());
    else if (key.starts_with("model.")) {
      ModelSpec probe;
      probe.set(key.substr(6), value);  // rejects unknown hyperparameters
      hyperparams.emplace_back(std::string(key.substr(6)), std::string(value));
    } else if (key == "runtime.parallelism") {
      const auto v = integer();
      if (v < 1) bad("an integer >= 1");
      parallelism = static_cast<std::size_t>(v);
    } else if (key == "runtime.mode") mode = std::string(value);
    else if (key == "runtime.speedup") speedup = real();
    else if (key == "runtime.report_every_s") report_every_s = real();
    else if (key == "runtime.latency_report") latency_report = std::string(value);
    else if (key == "output.out") out = std::string(value);
    else if (key == "general.seed" || key == "seed") seed = static_cast<std::uint64_t>(integer());
    else fail(ErrorCode::ConfigInvalid, "unknown config key '" + std::string(key) + "'");
  }

  // Merges an INI file; keys outside any section belong to [general].
  void load_file(const std::filesystem::path& path) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    try {
      pt::read_ini(path.string(), tree);
    } catch (const pt::ini_parser_error& e) {
      fail(ErrorCode::ConfigInvalid, e.what());
    }
    for (const auto& [name, node] : tree) {
      if (node.empty()) {
        set("general." + name, node.data());
        continue;
      }
      for (const auto& [key, leaf] : node) set(name + "." + key, leaf.data());
    }
  }

  Seconds synth_period() const { return to_seconds(synth_period_s, "data.synth_period_s"); }

  Seconds history_span() const { return to_seconds(history_days * 86400.0, "window.history_days"); }

  MicroWindowSpec window(int horizon_min) const {
    MicroWindowSpec s{to_seconds(increment_min * 60.0, "window.increment_min"),
                      to_seconds(base_min * 60.0, "window.base_min"),
                      to_seconds(horizon_min * 60.0, "window.horizon_min")};
    return s;
  }

  ModelSpec model_spec(std::string_view family) const {
    std::vector<std::string> pairs;
    for (const auto& [k, v] : hyperparams) pairs.push_back(k + "=" + v);
    ModelSpec spec;
    try {
      spec = ModelSpec::parse(family, pairs);
    } catch (const Error& e) {
      fail(ErrorCode::ConfigInvalid, e.what());
    }
    if (seed && std::none_of(hyperparams.begin(), hyperparams.end(),
                             [](const auto& kv) { return kv.first == "seed"; })) {
      spec.hp.seed = *seed;
    }
    return spec;
  }

  std::vector<FeatureCombination> feature_combos() const {
    std::vector<FeatureCombination> out;
    for (const auto& c : combos) out.push_back(FeatureCombination::parse(c));
    return out;
  }

  std::vector<FeatureId> feature_pool() const {
    std::vector<FeatureId> out;
    for (const auto& name : pool) {
      const auto f = parse_feature(name);
      if (!f) fail(ErrorCode::ConfigInvalid, "unknown feature '" + name + "' in pool");
      out.push_back(*f);
    }
    return out;
  }

  // All houses when "all", otherwise a comma list of ids.
  std::optional<std::vector<int>> house_ids() const {
    if (houses == "all" || houses.empty()) return std::nullopt;
    std::vector<int> ids;
    for (const auto p : detail::split_fields(houses, ',')) {
      const auto t = detail::trim(p);
      if (t.empty()) continue;
      const auto v = detail::parse_number<int>(t);
      if (!v) fail(ErrorCode::ConfigInvalid, "data.houses expects 'all' or ids, got '" + houses + "'");
      ids.push_back(*v);
    }
    return ids;
  }

  ReplayMode replay_mode() const {
    if (mode == "batch") return ReplayMode::Batch;
    if (mode == "paced") return ReplayMode::Paced;
    fail(ErrorCode::ConfigInvalid, "runtime.mode must be batch or paced");
  }

  // Checked before any command does work.
  void validate() const {
    if (!(synth_days > 0.0)) fail(ErrorCode::ConfigInvalid, "data.synth_days must be > 0");
    (void)synth_period();
    if (!(max_gap_min > 0.0)) fail(ErrorCode::ConfigInvalid, "data.max_gap_min must be > 0");
    if (min_days < 1) fail(ErrorCode::ConfigInvalid, "data.min_days must be >= 1");
    if (horizons_min.empty()) fail(ErrorCode::ConfigInvalid, "window.horizon_min is empty");
    for (const int h : horizons_min) {
      if (h <= 0) fail(ErrorCode::ConfigInvalid, "horizons must be > 0");
      (void)window(h);
    }
    if (history_span() < window(*std::max_element(horizons_min.begin(), horizons_min.end())).horizon) {
      fail(ErrorCode::ConfigInvalid, "window.history_days shorter than the longest horizon");
    }
    if (combos.empty()) fail(ErrorCode::ConfigInvalid, "features.combos is empty");
    try {
      (void)feature_combos();
    } catch (const Error& e) {
      fail(ErrorCode::ConfigInvalid, e.what());
    }
    (void)feature_pool();
    if (k < 1) fail(ErrorCode::ConfigInvalid, "features.k must be >= 1");
    if (models.empty()) fail(ErrorCode::ConfigInvalid, "model.models is empty");
    for (const auto& m : models) (void)model_spec(m);
    if (retrain_every < 1) fail(ErrorCode::ConfigInvalid, "model.retrain_every must be >= 1");
    (void)replay_mode();
    if (!(speedup > 0.0)) fail(ErrorCode::ConfigInvalid, "runtime.speedup must be > 0");
    if (report_every_s < 0.0) fail(ErrorCode::ConfigInvalid, "runtime.report_every_s must be >= 0");
    (void)house_ids();
    if (!inputs.empty() && !synth_profile.empty()) {
      fail(ErrorCode::ConfigInvalid, "data.input and data.synth_profile are mutually exclusive");
    }
  }

 private:
  static Seconds to_seconds(double s, std::string_view key) {
    if (!(s > 0.0) || std::round(s) != s) {
      fail(ErrorCode::ConfigInvalid, std::string(key) + " must be a positive whole number of seconds");
    }
    return Seconds{static_cast<long long>(s)};
  }
};

}  // namespace loadcast
