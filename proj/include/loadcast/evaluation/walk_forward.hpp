#pragma once

#include <algorithm>
#include <chrono>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/features.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/models/model.hpp"
#include "loadcast/windowing.hpp"

namespace loadcast {

struct ForecastRecord {
  int house_id = 0;
  int horizon_min = 0;
  Timestamp t_predict{};
  double forecast = 0.0;            // kWh over [t_predict, t_predict + horizon)
  std::optional<double> actual;     // set once the target interval has elapsed
  std::size_t training_rows = 0;

  friend bool operator==(const ForecastRecord&, const ForecastRecord&) = default;
};

struct ForecastConfig {
  Seconds history_span = kDefaultHistorySpan;
  MicroWindowSpec window;
  FeatureCombination combo = FeatureCombination::minimal();
  ModelSpec model;
  int retrain_every = 1;
  std::optional<HouseholdRoster> roster;  // derived from the log when absent
  bool audit = false;

  int horizon_min() const {
    return static_cast<int>(std::chrono::duration_cast<Minutes>(window.horizon).count());
  }

  double persistence_scale() const {
    return static_cast<double>(window.horizon.count()) / static_cast<double>(window.base_span.count());
  }

  void validate() const {
    window.validate();
    model.validate();
    if (history_span <= Seconds{0}) fail(ErrorCode::ConfigInvalid, "history span must be > 0");
    if (retrain_every < 1) fail(ErrorCode::ConfigInvalid, "retrain_every must be >= 1");
    if (window.horizon > history_span) {
      fail(ErrorCode::ConfigInvalid, "horizon longer than the history span");
    }
  }
};

// Training rows seen at one prediction instant.
struct TrainingAudit {
  Timestamp t_predict{};
  std::vector<Interval> targets;  // filled only when auditing is on
  std::size_t rows = 0;
  std::optional<Timestamp> latest_target_end;
};

// First prediction instant: one full history span after the grid-aligned
// first reading.
inline Timestamp first_prediction_instant(Timestamp first_reading, const ForecastConfig& cfg) {
  return ceil_to_grid(first_reading, cfg.window.increment) + cfg.history_span;
}

// Features for one prediction instant: the training set when a retrain is
// due, and the live row over the base interval ending at `at`.
struct FeatureBatch {
  Timestamp at{};
  std::optional<TrainingSet> training;
  FeatureRow live;
  TrainingAudit audit;
};

class FeatureExtractor {
 public:
  FeatureExtractor(const ForecastConfig& cfg, const HouseholdRoster& roster)
      : spec_(cfg.window), retrain_every_(cfg.retrain_every), audit_(cfg.audit), layout_(cfg.combo, roster) {}

  // Throws WindowTooShort when no base interval fits yet.
  FeatureBatch extract(const HistoricWindow& window, Timestamp now) {
    FeatureBatch b;
    b.at = now;
    b.audit.t_predict = now;
    const IntervalPair live = current_base(window, spec_, now);
    cache_.evict_before(window.start(spec_.increment));
    if (steps_ % retrain_every_ == 0) {
      const auto pairs = enumerate_micro_windows(window, spec_);
      b.training = build_training_matrix(window, pairs, layout_, &cache_);
      for (const auto& p : b.training->pairs) {
        if (!b.audit.latest_target_end || p.target.end > *b.audit.latest_target_end) {
          b.audit.latest_target_end = p.target.end;
        }
        if (audit_) b.audit.targets.push_back(p.target);
      }
      b.audit.rows = b.training->rows();
    }
    auto& entry = cache_.at(live.t0());
    if (entry.row.values.empty()) entry.row = extract_row(window, live.base, layout_);
    b.live = entry.row;
    return b;
  }

  // Call once the batch was consumed so the retrain cadence advances.
  void commit() { ++steps_; }
  const FeatureLayout& layout() const { return layout_; }

 private:
  MicroWindowSpec spec_;
  int retrain_every_;
  bool audit_;
  FeatureLayout layout_;
  TrainingRowCache cache_;
  long long steps_ = 0;
};

class Predictor {
 public:
  explicit Predictor(const ForecastConfig& cfg)
      : spec_(cfg.model), scale_(cfg.persistence_scale()), horizon_min_(cfg.horizon_min()) {}

  // Throws EmptyTraining when no model has ever been fit.
  ForecastRecord predict(int house_id, FeatureBatch& b) {
    if (b.training) {
      model_ = fit(spec_, b.training->x, b.training->y, scale_);
      rows_ = b.training->rows();
    }
    if (!model_) fail(ErrorCode::EmptyTraining, "no fitted model");
    ForecastRecord r;
    r.house_id = house_id;
    r.horizon_min = horizon_min_;
    r.t_predict = b.at;
    r.forecast = loadcast::predict(*model_, b.live.values, b.live.consum_kwh);
    r.training_rows = rows_;
    return r;
  }

  const std::optional<FittedModel>& model() const { return model_; }

 private:
  ModelSpec spec_;
  double scale_;
  int horizon_min_;
  std::optional<FittedModel> model_;
  std::size_t rows_ = 0;
};

// Feature extraction and prediction fused into one call.
class HouseholdForecaster {
 public:
  HouseholdForecaster(const ForecastConfig& cfg, const HouseholdRoster& roster)
      : features_(cfg, roster), predictor_(cfg) {}

  struct Step {
    ForecastRecord record;
    TrainingAudit audit;
  };

  Step predict_at(const HistoricWindow& window, Timestamp now) {
    FeatureBatch b = features_.extract(window, now);
    Step s{predictor_.predict(window.roster().house_id, b), std::move(b.audit)};
    features_.commit();
    return s;
  }

 private:
  FeatureExtractor features_;
  Predictor predictor_;
};

struct WalkForwardResult {
  std::vector<ForecastRecord> records;
  std::vector<TrainingAudit> audit;
  std::size_t skipped = 0;  // instants without a usable training set
};

inline HouseholdRoster resolve_roster(std::span<const SensorReading> log, const ForecastConfig& cfg) {
  if (cfg.roster) return *cfg.roster;
  const auto rosters = derive_rosters(log);
  if (rosters.empty()) fail(ErrorCode::InsufficientData, "log holds no LOAD readings");
  if (rosters.size() > 1) fail(ErrorCode::InvalidArgument, "log holds more than one household");
  return rosters.begin()->second;
}

// Timeseries cross-validation: at every increment after warm-up, retrain on
// the trailing history only and forecast one horizon ahead. Only instants
// whose target has fully elapsed inside the log are reported.
inline WalkForwardResult walk_forward(std::span<const SensorReading> log, const ForecastConfig& cfg) {
  cfg.validate();
  WalkForwardResult out;
  std::vector<SensorReading> readings;
  const HouseholdRoster roster = resolve_roster(log, cfg);
  for (const auto& r : log) {
    if (r.type == MeasurementType::Load && r.house_id == roster.house_id && roster.index_of(r.sensor_id)) {
      readings.push_back(r);
    }
  }
  std::stable_sort(readings.begin(), readings.end(), reading_order);
  if (readings.empty()) return out;

  // Actuals come from an unbounded view of the whole log.
  HistoricWindow full(roster, Seconds{Days{365 * 400}});
  for (const auto& r : readings) full.advance(r);
  const Timestamp data_end = full.end();

  HistoricWindow window(roster, cfg.history_span);
  HouseholdForecaster forecaster(cfg, roster);
  std::size_t cursor = 0;
  for (Timestamp now = first_prediction_instant(readings.front().ts, cfg);
       now + cfg.window.horizon <= data_end; now += cfg.window.increment) {
    while (cursor < readings.size() && readings[cursor].ts < now) window.advance(readings[cursor++]);
    window.advance_to(now);
    try {
      auto step = forecaster.predict_at(window, now);
      step.record.actual = extract_target(full, Interval{now, now + cfg.window.horizon});
      out.records.push_back(step.record);
      out.audit.push_back(std::move(step.audit));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::WindowTooShort && e.code() != ErrorCode::EmptyTraining) throw;
      ++out.skipped;
    }
  }
  return out;
}

inline ErrorReport error_report(std::span<const ForecastRecord> records, const ForecastConfig& cfg) {
  std::vector<double> a, f;
  int house = 0;
  for (const auto& r : records) {
    if (!r.actual) continue;
    a.push_back(*r.actual);
    f.push_back(r.forecast);
    house = r.house_id;
  }
  if (a.empty()) fail(ErrorCode::InsufficientData, "no resolved forecasts");
  return make_error_report(house, cfg.model.name(), cfg.combo.name(), cfg.horizon_min(), a, f);
}

}  // namespace loadcast
