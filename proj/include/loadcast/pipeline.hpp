#pragma once

#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/evaluation/walk_forward.hpp"
#include "loadcast/features.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/models/model.hpp"
#include "loadcast/replay.hpp"
#include "loadcast/windowing.hpp"

namespace loadcast {

using SteadyTime = std::chrono::steady_clock::time_point;

// Error raised inside a stage, tagged with the stage that raised it.
class StageError : public Error {
 public:
  StageError(const Error& e, std::string stage)
      : Error(e.code(), "[" + stage + "] " + strip(e.what())), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  static std::string strip(std::string_view what) {
    const auto p = what.find(": ");
    return std::string(p == std::string_view::npos ? what : what.substr(p + 2));
  }
  std::string stage_;
};

// Pull-based stage. advance() yields the next item or nullopt once at end of
// stream; pulling again afterwards throws SourceExhausted.
template <class T>
class Stage {
 public:
  virtual ~Stage() = default;
  virtual std::string_view name() const = 0;

  std::optional<T> advance() {
    if (ended_) fail(ErrorCode::SourceExhausted, std::string(name()) + " advanced after end of stream");
    try {
      auto v = pull();
      if (!v) ended_ = true;
      return v;
    } catch (const StageError&) {
      throw;
    } catch (const Error& e) {
      throw StageError(e, std::string(name()));
    }
  }

  bool ended() const { return ended_; }

 protected:
  virtual std::optional<T> pull() = 0;

 private:
  bool ended_ = false;
};

template <class T>
using StagePtr = std::unique_ptr<Stage<T>>;

struct TimedReading {
  SensorReading reading;
  SteadyTime handoff{};
};

using ReadingFeed = std::function<std::optional<TimedReading>()>;

class SourceStage final : public Stage<TimedReading> {
 public:
  explicit SourceStage(ReadingFeed feed) : feed_(std::move(feed)) {}
  std::string_view name() const override { return "source"; }

 protected:
  std::optional<TimedReading> pull() override { return feed_(); }

 private:
  ReadingFeed feed_;
};

// Feed that stamps the handoff instant as each reading leaves the source.
inline ReadingFeed feed_from(EventSource& source) {
  return [&source]() -> std::optional<TimedReading> {
    auto r = source.next();
    if (!r) return std::nullopt;
    return TimedReading{std::move(*r), std::chrono::steady_clock::now()};
  };
}

// A grid instant at which a prediction is due, or the final flush.
struct WindowTick {
  Timestamp at{};
  bool flush = false;
  const HistoricWindow* window = nullptr;  // valid until the next pull
  SteadyTime handoff{};                    // arrival of the reading that released the tick
  std::chrono::nanoseconds windowing_time{0};
};

// Feeds the household's historic window and releases one tick per increment
// once a full history span has been observed. A tick at g is released by the
// first reading with ts >= g, before that reading enters the window.
class WindowingStage final : public Stage<WindowTick> {
 public:
  WindowingStage(StagePtr<TimedReading> up, HouseholdRoster roster, Seconds history_span,
                 MicroWindowSpec spec)
      : up_(std::move(up)), window_(std::move(roster), history_span), spec_(spec) {}

  std::string_view name() const override { return "windowing"; }
  const HistoricWindow& window() const { return window_; }

 protected:
  std::optional<WindowTick> pull() override {
    using clock = std::chrono::steady_clock;
    while (true) {
      if (pending_ && next_ && pending_->reading.ts >= *next_) return release(pending_->handoff);
      if (pending_) {
        const auto t = clock::now();
        window_.advance(pending_->reading);
        spent_ += clock::now() - t;
        pending_.reset();
      }
      if (done_) {
        if (flushed_) return std::nullopt;
        flushed_ = true;
        return WindowTick{window_.end(), true, &window_, last_handoff_, std::exchange(spent_, {})};
      }
      auto r = up_->advance();
      if (!r) {
        done_ = true;
        continue;
      }
      if (!accepts(r->reading)) continue;
      last_handoff_ = r->handoff;
      if (!next_) next_ = first_prediction_instant(r->reading.ts);
      pending_ = std::move(r);
    }
  }

 private:
  bool accepts(const SensorReading& r) const {
    if (r.type != MeasurementType::Load || r.house_id != window_.roster().house_id) return false;
    if (!window_.roster().index_of(r.sensor_id)) return false;
    return !window_.newest() || r.ts >= *window_.newest();
  }

  Timestamp first_prediction_instant(Timestamp first) const {
    return ceil_to_grid(first, spec_.increment) + window_.history_span();
  }

  WindowTick release(SteadyTime handoff) {
    using clock = std::chrono::steady_clock;
    const auto t = clock::now();
    const Timestamp g = *next_;
    window_.advance_to(g);
    *next_ += spec_.increment;
    spent_ += clock::now() - t;
    return WindowTick{g, false, &window_, handoff, std::exchange(spent_, {})};
  }

  StagePtr<TimedReading> up_;
  HistoricWindow window_;
  MicroWindowSpec spec_;
  std::optional<Timestamp> next_;
  std::optional<TimedReading> pending_;
  SteadyTime last_handoff_{};
  std::chrono::nanoseconds spent_{0};
  bool done_ = false;
  bool flushed_ = false;
};

struct FeatureFrame {
  WindowTick tick;
  std::optional<FeatureBatch> batch;  // empty for flush ticks and during warm-up
  std::chrono::nanoseconds feature_time{0};
};

class FeatureStage final : public Stage<FeatureFrame> {
 public:
  FeatureStage(StagePtr<WindowTick> up, const ForecastConfig& cfg, const HouseholdRoster& roster)
      : up_(std::move(up)), extractor_(cfg, roster) {}

  std::string_view name() const override { return "features"; }
  FeatureExtractor& extractor() { return extractor_; }

 protected:
  std::optional<FeatureFrame> pull() override {
    auto tick = up_->advance();
    if (!tick) return std::nullopt;
    FeatureFrame f{*tick, std::nullopt, {}};
    if (tick->flush) return f;
    const auto t = std::chrono::steady_clock::now();
    try {
      f.batch = extractor_.extract(*tick->window, tick->at);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::WindowTooShort) throw;
    }
    f.feature_time = std::chrono::steady_clock::now() - t;
    return f;
  }

 private:
  StagePtr<WindowTick> up_;
  FeatureExtractor extractor_;
};

struct Timing {
  SteadyTime handoff{};
  std::chrono::nanoseconds windowing_features{0};
  std::chrono::nanoseconds model{0};
};

struct PredictionFrame {
  WindowTick tick;
  std::optional<ForecastRecord> record;
  Timing timing;
};

class PredictionStage final : public Stage<PredictionFrame> {
 public:
  PredictionStage(StagePtr<FeatureFrame> up, FeatureStage* features, const ForecastConfig& cfg, int house_id)
      : up_(std::move(up)), features_(features), predictor_(cfg), house_id_(house_id) {}

  std::string_view name() const override { return "prediction"; }

 protected:
  std::optional<PredictionFrame> pull() override {
    auto f = up_->advance();
    if (!f) return std::nullopt;
    PredictionFrame out{f->tick, std::nullopt,
                        Timing{f->tick.handoff, f->tick.windowing_time + f->feature_time, {}}};
    if (!f->batch) return out;
    const auto t = std::chrono::steady_clock::now();
    try {
      out.record = predictor_.predict(house_id_, *f->batch);
      features_->extractor().commit();
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyTraining) throw;
    }
    out.timing.model = std::chrono::steady_clock::now() - t;
    return out;
  }

 private:
  StagePtr<FeatureFrame> up_;
  FeatureStage* features_;
  Predictor predictor_;
  int house_id_;
};

struct PipelineItem {
  std::variant<ForecastRecord, ErrorReport> value;
  Timing timing;

  bool is_forecast() const { return std::holds_alternative<ForecastRecord>(value); }
  const ForecastRecord& forecast() const { return std::get<ForecastRecord>(value); }
  const ErrorReport& report() const { return std::get<ErrorReport>(value); }
};

// Emits each forecast as soon as it is made; actuals are never filled.
class ForecastEmitStage final : public Stage<PipelineItem> {
 public:
  explicit ForecastEmitStage(StagePtr<PredictionFrame> up) : up_(std::move(up)) {}
  std::string_view name() const override { return "forecast-emit"; }

 protected:
  std::optional<PipelineItem> pull() override {
    while (auto f = up_->advance()) {
      if (f->record) return PipelineItem{*f->record, f->timing};
    }
    return std::nullopt;
  }

 private:
  StagePtr<PredictionFrame> up_;
};

// Holds forecasts until their target interval has been observed, emits them
// with the actual filled in, and closes with one ErrorReport.
class ErrorAnalyticsStage final : public Stage<PipelineItem> {
 public:
  ErrorAnalyticsStage(StagePtr<PredictionFrame> up, ForecastConfig cfg)
      : up_(std::move(up)), cfg_(std::move(cfg)) {}
  std::string_view name() const override { return "error-analytics"; }

  std::size_t unresolved() const { return unresolved_; }

 protected:
  std::optional<PipelineItem> pull() override {
    while (true) {
      if (!ready_.empty()) {
        auto item = std::move(ready_.front());
        ready_.pop_front();
        return item;
      }
      if (reported_) return std::nullopt;
      auto f = up_->advance();
      if (!f) {
        reported_ = true;
        unresolved_ = pending_.size();
        if (!resolved_.empty()) {
          ready_.push_back(PipelineItem{error_report(resolved_, cfg_), last_timing_});
        }
        continue;
      }
      last_timing_ = f->timing;
      if (f->record) pending_.push_back({*f->record, f->timing});
      resolve(*f->tick.window);
    }
  }

 private:
  void resolve(const HistoricWindow& w) {
    while (!pending_.empty()) {
      auto& [rec, timing] = pending_.front();
      const Interval target{rec.t_predict, rec.t_predict + cfg_.window.horizon};
      if (target.end > w.end()) break;
      rec.actual = extract_target(w, target);
      resolved_.push_back(rec);
      ready_.push_back(PipelineItem{rec, timing});
      pending_.pop_front();
    }
  }

  StagePtr<PredictionFrame> up_;
  ForecastConfig cfg_;
  std::deque<std::pair<ForecastRecord, Timing>> pending_;
  std::deque<PipelineItem> ready_;
  std::vector<ForecastRecord> resolved_;
  Timing last_timing_;
  std::size_t unresolved_ = 0;
  bool reported_ = false;
};

enum class SinkKind { ErrorAnalytics, ForecastEmit };

struct PipelineConfig {
  HouseholdRoster roster;
  ForecastConfig forecast;
  SinkKind sink = SinkKind::ForecastEmit;

  int house_id() const { return roster.house_id; }

  void validate() const {
    if (roster.device_ids.empty()) fail(ErrorCode::ConfigInvalid, "pipeline roster is empty");
    try {
      forecast.validate();
    } catch (const Error& e) {
      fail(ErrorCode::ConfigInvalid, e.what());
    }
    if (forecast.history_span < forecast.window.horizon + forecast.window.increment) {
      fail(ErrorCode::ConfigInvalid, "history span must cover horizon + increment");
    }
  }
};

inline StagePtr<PipelineItem> build_pipeline(const PipelineConfig& cfg, ReadingFeed feed) {
  cfg.validate();
  ForecastConfig fc = cfg.forecast;
  fc.roster = cfg.roster;
  auto src = std::make_unique<SourceStage>(std::move(feed));
  auto win = std::make_unique<WindowingStage>(std::move(src), cfg.roster, fc.history_span, fc.window);
  auto feat = std::make_unique<FeatureStage>(std::move(win), fc, cfg.roster);
  FeatureStage* feat_ptr = feat.get();
  auto pred = std::make_unique<PredictionStage>(std::move(feat), feat_ptr, fc, cfg.house_id());
  if (cfg.sink == SinkKind::ForecastEmit) return std::make_unique<ForecastEmitStage>(std::move(pred));
  return std::make_unique<ErrorAnalyticsStage>(std::move(pred), fc);
}

inline StagePtr<PipelineItem> build_pipeline(const PipelineConfig& cfg, EventSource& source) {
  return build_pipeline(cfg, feed_from(source));
}

// Drains a terminal stage.
inline std::vector<PipelineItem> drain(Stage<PipelineItem>& stage) {
  std::vector<PipelineItem> out;
  while (auto item = stage.advance()) out.push_back(std::move(*item));
  return out;
}

}  // namespace loadcast
