#pragma once

#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/config.hpp"
#include "loadcast/error.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/evaluation/selection.hpp"
#include "loadcast/evaluation/stability.hpp"
#include "loadcast/evaluation/walk_forward.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/lived_io.hpp"
#include "loadcast/pipeline.hpp"
#include "loadcast/replay.hpp"
#include "loadcast/runtime.hpp"

namespace loadcast::cli {

enum ExitCode : int { kOk = 0, kInputError = 2, kInsufficientData = 3, kConfigError = 4 };

inline int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::Io:
    case ErrorCode::MalformedRecord:
    case ErrorCode::InconsistentRedundancy:
    case ErrorCode::UnknownType:
    case ErrorCode::InvalidProfile:
      return kInputError;
    case ErrorCode::InsufficientData:
    case ErrorCode::InsufficientWeeks:
    case ErrorCode::TooFewHouseholds:
    case ErrorCode::WindowTooShort:
    case ErrorCode::EmptyTraining:
    case ErrorCode::AllZeroActuals:
      return kInsufficientData;
    default:
      return kConfigError;
  }
}

// Runs a command, mapping library errors onto exit codes.
inline int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInputError;
  }
}

inline std::string fmt2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string num(double v) { return detail::format_number(v); }

struct HouseholdData {
  HouseholdRoster roster;
  std::vector<SensorReading> readings;  // sorted by reading_order
};

using Dataset = std::map<int, HouseholdData>;

inline std::vector<SyntheticProfile> load_profiles(const RunConfig& cfg) {
  std::ifstream in(cfg.synth_profile);
  if (!in) fail(ErrorCode::Io, "cannot open profile " + cfg.synth_profile);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidProfile, e.what());
  }
  auto profiles = profiles_from_json(j);
  if (cfg.seed) {
    for (auto& p : profiles) p.seed = *cfg.seed;
  }
  return profiles;
}

inline Seconds synth_span(const RunConfig& cfg) {
  return Seconds{static_cast<long long>(std::llround(cfg.synth_days * 86400.0))};
}

// Readings grouped by household, restricted to the configured houses.
// `load_only` drops every non-LOAD record while reading.
inline Dataset load_dataset(const RunConfig& cfg, bool load_only = true) {
  std::vector<SensorReading> all;
  if (!cfg.synth_profile.empty()) {
    for (const auto& p : load_profiles(cfg)) {
      auto r = generate_synthetic(p, synth_span(cfg), cfg.synth_period());
      all.insert(all.end(), std::make_move_iterator(r.begin()), std::make_move_iterator(r.end()));
    }
    std::stable_sort(all.begin(), all.end(), reading_order);
  } else if (!cfg.inputs.empty()) {
    std::vector<std::filesystem::path> paths(cfg.inputs.begin(), cfg.inputs.end());
    auto keep = [load_only](const SensorReading& r) { return !load_only || r.type == MeasurementType::Load; };
    all = read_lived_files(paths, keep, cfg.strict).readings;
  } else {
    fail(ErrorCode::ConfigInvalid, "no input: give --input files or --profile");
  }
  auto rosters = derive_rosters(all);
  if (!cfg.roster.empty()) {
    for (auto& [h, r] : load_roster_overrides(cfg.roster)) rosters[h] = std::move(r);
  }
  const auto wanted = cfg.house_ids();
  Dataset ds;
  for (auto& [house, roster] : rosters) {
    if (wanted && std::find(wanted->begin(), wanted->end(), house) == wanted->end()) continue;
    ds.emplace(house, HouseholdData{roster, {}});
  }
  for (auto& r : all) {
    const auto it = ds.find(r.house_id);
    if (it != ds.end()) it->second.readings.push_back(std::move(r));
  }
  return ds;
}

inline std::filesystem::path out_dir(const RunConfig& cfg) {
  std::filesystem::path p(cfg.out);
  std::filesystem::create_directories(p);
  return p;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p);
  if (!f) fail(ErrorCode::Io, "cannot write " + p.string());
  return f;
}

// Calls fn(i) for i in [0, n) on up to `parallelism` threads.
inline void parallel_for(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex m;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lk(m);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t t = std::max<std::size_t>(1, std::min(parallelism, n));
  for (std::size_t k = 1; k < t; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

struct QualityRow {
  int house_id = 0;
  int total = 0, skipped = 0, used = 0;
  std::vector<DayQualityVerdict> verdicts;
  std::optional<EvaluationRange> range;
};

inline QualityRow assess_household(const HouseholdData& h, const RunConfig& cfg) {
  QualityRow row;
  row.house_id = h.roster.house_id;
  const Seconds gap{static_cast<long long>(std::llround(cfg.max_gap_min * 60.0))};
  row.verdicts = assess_days(h.readings, h.roster, gap);
  try {
    row.range = select_evaluation_range(row.verdicts, cfg.min_days);
    row.total = row.range->total;
    row.skipped = row.range->skipped;
    row.used = row.range->used;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::InsufficientData) throw;
    row.total = static_cast<int>(row.verdicts.size());
    row.skipped = row.total;
  }
  return row;
}

// Per-household total/skipped/used day counts.
inline int cmd_validate(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  const auto dir = out_dir(cfg);
  auto csv = open_out(dir / "validate.csv");
  auto days = open_out(dir / "validate_days.csv");
  csv << "id,total,skipped,used\n";
  days << "id,day,usable,reason\n";
  out << std::left << std::setw(8) << "id" << std::setw(8) << "total" << std::setw(8) << "skipped"
      << "used\n";
  for (const auto& [house, h] : ds) {
    const auto q = assess_household(h, cfg);
    csv << house << ',' << q.total << ',' << q.skipped << ',' << q.used << '\n';
    for (const auto& v : q.verdicts) {
      days << house << ',' << format_day(v.day) << ',' << (v.usable ? 1 : 0) << ',' << to_string(v.reason)
           << '\n';
    }
    out << std::left << std::setw(8) << house << std::setw(8) << q.total << std::setw(8) << q.skipped
        << q.used << '\n';
  }
  if (ds.empty()) {
    out << "no households found\n";
    return kInsufficientData;
  }
  return kOk;
}

// Streams one household's log to `sink` as LIVED lines.
inline int cmd_replay(const RunConfig& cfg, std::optional<int> house, std::ostream& sink) {
  cfg.validate();
  auto ds = load_dataset(cfg, false);
  std::vector<SensorReading> log;
  for (auto& [id, h] : ds) {
    if (house && id != *house) continue;
    log.insert(log.end(), h.readings.begin(), h.readings.end());
  }
  if (log.empty()) return kInsufficientData;
  EventSource src(std::move(log), cfg.replay_mode(), cfg.speedup);
  sink << kLivedHeader << '\n';
  while (auto r = src.next()) sink << format_reading(*r) << '\n' << std::flush;
  return kOk;
}

inline int cmd_synth(const RunConfig& cfg, const std::filesystem::path& out_csv) {
  if (cfg.synth_profile.empty()) fail(ErrorCode::ConfigInvalid, "synth needs --profile");
  cfg.validate();
  std::vector<SensorReading> all;
  for (const auto& p : load_profiles(cfg)) {
    auto r = generate_synthetic(p, synth_span(cfg), cfg.synth_period());
    all.insert(all.end(), r.begin(), r.end());
  }
  std::stable_sort(all.begin(), all.end(), reading_order);
  write_lived_file(out_csv, all);
  return kOk;
}

// Readings of the household's usable day range.
inline std::vector<SensorReading> quality_filtered(const HouseholdData& h, const RunConfig& cfg,
                                                   std::optional<EvaluationRange>* range_out = nullptr) {
  const auto q = assess_household(h, cfg);
  if (!q.range) {
    fail(ErrorCode::InsufficientData, "household " + std::to_string(h.roster.house_id) + " has " +
                                          std::to_string(q.used) + " usable days");
  }
  if (range_out) *range_out = q.range;
  const Timestamp lo{q.range->first_day};
  const Timestamp hi = Timestamp{q.range->last_day} + Days{1};
  std::vector<SensorReading> out;
  for (const auto& r : h.readings) {
    if (r.ts >= lo && r.ts < hi) out.push_back(r);
  }
  return out;
}

// Forecasts whose base or target touches a skipped day are left out of the metrics.
inline std::vector<ForecastRecord> usable_records(std::vector<ForecastRecord> recs, const EvaluationRange& range,
                                                  const ForecastConfig& fc) {
  std::erase_if(recs, [&](const ForecastRecord& r) {
    const Timestamp a = r.t_predict - fc.window.base_span;
    const Timestamp b = r.t_predict + fc.window.horizon - Seconds{1};
    for (auto d = day_of(a); d <= day_of(b); d += Days{1}) {
      if (range.is_skipped(d)) return true;
    }
    return false;
  });
  return recs;
}

struct EvalJob {
  int house_id;
  std::string model;
  std::string combo;
  int horizon;
};

struct EvalOutcome {
  std::optional<ErrorReport> report;
  std::vector<ForecastRecord> records;
  std::string error;
};

inline ForecastConfig forecast_config(const RunConfig& cfg, const std::string& model, const FeatureCombination& combo,
                                      int horizon, const HouseholdRoster& roster) {
  ForecastConfig fc;
  fc.history_span = cfg.history_span();
  fc.window = cfg.window(horizon);
  fc.combo = combo;
  fc.model = cfg.model_spec(model);
  fc.retrain_every = cfg.retrain_every;
  fc.roster = roster;
  return fc;
}

inline EvalOutcome evaluate_one(const HouseholdData& h, const RunConfig& cfg, const std::string& model,
                                const FeatureCombination& combo, int horizon) {
  EvalOutcome o;
  try {
    std::optional<EvaluationRange> range;
    const auto readings = quality_filtered(h, cfg, &range);
    const auto fc = forecast_config(cfg, model, combo, horizon, h.roster);
    o.records = usable_records(walk_forward(readings, fc).records, *range, fc);
    o.report = error_report(o.records, fc);
  } catch (const Error& e) {
    if (exit_code_for(e.code()) != kInsufficientData) throw;
    o.error = e.what();
  }
  return o;
}

inline void write_report_rows(std::ostream& csv, const ErrorReport& r) {
  for (const Metric m : {Metric::Mape, Metric::Nrmse}) {
    csv << r.house_id << ',' << r.model << ',' << r.combo << ',' << r.horizon_min << ',' << metric_name(m) << ','
        << num(r.value(m)) << ',' << r.n << '\n';
  }
}

inline nlohmann::json median_grid(std::span<const ErrorReport> reports, Metric m) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& [k, v] : median_across_households(reports, m)) {
    out.push_back({{"model", k.model}, {"combo", k.combo}, {"horizon", k.horizon_min}, {"value", v}});
  }
  return out;
}

inline void write_median_csv(const std::filesystem::path& p, std::span<const ErrorReport> reports, Metric m) {
  auto f = open_out(p);
  f << "model,combo,horizon," << metric_name(m) << "_median\n";
  for (const auto& [k, v] : median_across_households(reports, m)) {
    f << k.model << ',' << k.combo << ',' << k.horizon_min << ',' << num(v) << '\n';
  }
}

// Walk-forward evaluation over households x horizons x models x combos.
inline int cmd_evaluate(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  if (ds.empty()) {
    out << "no households to evaluate\n";
    return kInsufficientData;
  }
  const auto combos = cfg.feature_combos();
  std::vector<EvalJob> jobs;
  for (const auto& [house, h] : ds) {
    for (const int hz : cfg.horizons_min) {
      for (const auto& m : cfg.models) {
        for (const auto& c : combos) jobs.push_back({house, m, c.name(), hz});
      }
    }
  }
  std::vector<EvalOutcome> results(jobs.size());
  parallel_for(jobs.size(), cfg.parallelism, [&](std::size_t i) {
    const auto& j = jobs[i];
    results[i] = evaluate_one(ds.at(j.house_id), cfg, j.model, FeatureCombination::parse(j.combo), j.horizon);
  });

  const auto dir = out_dir(cfg);
  auto csv = open_out(dir / "reports.csv");
  auto traces = open_out(dir / "traces.csv");
  auto weekly = open_out(dir / "stability.csv");
  csv << "house_id,model,combo,horizon,metric,value,n\n";
  traces << "house_id,model,combo,horizon,t_predict,forecast,actual\n";
  weekly << "house_id,model,combo,horizon,week_start,mape\n";
  std::vector<ErrorReport> reports;
  nlohmann::json failures = nlohmann::json::array();
  nlohmann::json stability = nlohmann::json::array();
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& j = jobs[i];
    const auto& r = results[i];
    if (!r.report) {
      out << "house " << j.house_id << " " << j.model << " " << j.combo << " h=" << j.horizon << ": " << r.error
          << '\n';
      failures.push_back({{"house_id", j.house_id}, {"model", j.model}, {"combo", j.combo},
                          {"horizon", j.horizon}, {"error", r.error}});
      continue;
    }
    reports.push_back(*r.report);
    write_report_rows(csv, *r.report);
    for (const auto& rec : r.records) {
      traces << j.house_id << ',' << j.model << ',' << j.combo << ',' << j.horizon << ','
             << format_timestamp(rec.t_predict) << ',' << num(rec.forecast) << ',' << num(*rec.actual) << '\n';
    }
    const auto wm = weekly_mapes(r.records, cfg.window(j.horizon).increment);
    for (const auto& w : wm) {
      weekly << j.house_id << ',' << j.model << ',' << j.combo << ',' << j.horizon << ','
             << format_timestamp(w.week_start) << ',' << num(w.mape) << '\n';
    }
    nlohmann::json s = {{"house_id", j.house_id}, {"model", j.model}, {"combo", j.combo}, {"horizon", j.horizon}};
    try {
      s["stddev"] = household_stability(j.house_id, wm).stddev;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientWeeks) throw;
      s["stddev"] = nullptr;
      s["note"] = e.what();
    }
    stability.push_back(s);
  }
  write_median_csv(dir / "median_mape.csv", reports, Metric::Mape);
  write_median_csv(dir / "median_nrmse.csv", reports, Metric::Nrmse);
  nlohmann::json summary = {{"median_mape", median_grid(reports, Metric::Mape)},
                            {"median_nrmse", median_grid(reports, Metric::Nrmse)},
                            {"stability", stability},
                            {"failures", failures}};
  open_out(dir / "summary.json") << summary.dump(2) << '\n';
  out << reports.size() << " reports written to " << dir.string() << '\n';
  return reports.empty() ? kInsufficientData : kOk;
}

inline std::vector<ComboScore> feature_select(const Dataset& ds, const RunConfig& cfg) {
  if (ds.size() < 2) fail(ErrorCode::TooFewHouseholds, "feature selection needs at least 2 households");
  auto pool = cfg.feature_pool();
  if (pool.empty()) pool.assign(kAllFeatures.begin(), kAllFeatures.end());
  const auto combos = enumerate_combinations(pool, static_cast<std::size_t>(cfg.k));
  const std::string model = cfg.models.front();
  const int horizon = cfg.horizons_min.front();
  std::vector<const HouseholdData*> houses;
  for (const auto& [id, h] : ds) houses.push_back(&h);
  std::vector<std::vector<double>> mapes(combos.size(), std::vector<double>(houses.size()));
  std::vector<std::string> errors(combos.size() * houses.size());
  parallel_for(combos.size() * houses.size(), cfg.parallelism, [&](std::size_t i) {
    const auto c = i / houses.size(), h = i % houses.size();
    const auto o = evaluate_one(*houses[h], cfg, model, combos[c], horizon);
    if (o.report && std::isfinite(o.report->mape)) {
      mapes[c][h] = o.report->mape;
    } else {
      errors[i] = o.error.empty() ? "undefined MAPE" : o.error;
    }
  });
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (!errors[i].empty()) {
      fail(ErrorCode::InsufficientData, "household " + std::to_string(houses[i % houses.size()]->roster.house_id) +
                                            ": " + errors[i]);
    }
  }
  std::vector<ComboScore> scores;
  for (std::size_t c = 0; c < combos.size(); ++c) scores.push_back(score_combo(mapes[c], combos[c].name()));
  rank_combos(scores);
  return scores;
}

inline void write_combo_table(std::ostream& os, std::span<const ComboScore> scores) {
  os << "Feature combination,Stddev,MAPE,Score\n";
  for (const auto& s : scores) {
    os << s.combo << ',' << fmt2(s.stddev) << ',' << fmt2(s.avg_mape) << ',' << fmt2(s.score) << '\n';
  }
}

inline int cmd_feature_select(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  const auto scores = feature_select(ds, cfg);
  const auto dir = out_dir(cfg);
  auto csv = open_out(dir / "feature_select.csv");
  write_combo_table(csv, scores);
  write_combo_table(out, scores);
  nlohmann::json j = nlohmann::json::array();
  for (const auto& s : scores) {
    j.push_back({{"combo", s.combo}, {"stddev", s.stddev}, {"mape", s.avg_mape}, {"score", s.score},
                 {"households", s.households}});
  }
  open_out(dir / "feature_select.json") << j.dump(2) << '\n';
  return kOk;
}

inline std::vector<PipelineConfig> pipeline_configs(const Dataset& ds, const RunConfig& cfg, SinkKind sink) {
  const auto combos = cfg.feature_combos();
  std::vector<PipelineConfig> out;
  for (const auto& [house, h] : ds) {
    PipelineConfig pc;
    pc.roster = h.roster;
    pc.forecast = forecast_config(cfg, cfg.models.front(), combos.front(), cfg.horizons_min.front(), h.roster);
    pc.sink = sink;
    out.push_back(std::move(pc));
  }
  return out;
}

inline void write_forecasts(std::ostream& os, const RunResult& res) {
  os << "house_id,horizon,t_predict,forecast\n";
  std::map<int, std::vector<ForecastRecord>> by_house;
  for (const auto& o : res.outputs) {
    if (o.item.is_forecast()) by_house[o.house_id].push_back(o.item.forecast());
  }
  for (const auto& [h, recs] : by_house) {
    for (const auto& r : recs) {
      os << h << ',' << r.horizon_min << ',' << format_timestamp(r.t_predict) << ',' << num(r.forecast) << '\n';
    }
  }
}

// Streams every configured household through its own pipeline.
inline int cmd_run(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const Dataset ds = load_dataset(cfg);
  if (ds.empty()) {
    out << "no households to run\n";
    return kInsufficientData;
  }
  std::vector<SensorReading> merged;
  for (const auto& [id, h] : ds) merged.insert(merged.end(), h.readings.begin(), h.readings.end());
  RunOptions opt;
  opt.parallelism = cfg.parallelism;
  if (cfg.report_every_s > 0.0) {
    opt.report_every = std::chrono::milliseconds(static_cast<long long>(cfg.report_every_s * 1000.0));
    opt.on_report = [&out](const LatencyReport& r) {
      out << "latency: n=" << r.global.count << " median_ms=" << r.global.median_ms << '\n';
    };
  }
  const auto res = run(std::move(merged), pipeline_configs(ds, cfg, SinkKind::ForecastEmit), opt,
                       cfg.replay_mode(), cfg.speedup);
  const auto dir = out_dir(cfg);
  auto f = open_out(dir / "forecasts.csv");
  write_forecasts(f, res);
  const std::filesystem::path lat = cfg.latency_report.empty() ? dir / "latency" : std::filesystem::path(cfg.latency_report);
  if (lat.has_parent_path()) std::filesystem::create_directories(lat.parent_path());
  auto lcsv = open_out(lat.string() + ".csv");
  res.latency.write_csv(lcsv);
  auto ljson = open_out(lat.string() + ".json");
  nlohmann::json j = res.latency.to_json();
  j["routing_drops"] = res.routing_drops;
  j["failures"] = nlohmann::json::array();
  for (const auto& fl : res.failures) j["failures"].push_back({{"house_id", fl.house_id}, {"error", fl.message}});
  ljson << j.dump(2) << '\n';
  for (const auto& fl : res.failures) out << "house " << fl.house_id << " failed: " << fl.message << '\n';
  out << res.latency.global.count << " predictions, median latency " << res.latency.global.median_ms << " ms\n";
  return res.failures.size() == ds.size() ? kInsufficientData : kOk;
}

}  // namespace loadcast::cli
