#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/matrix.hpp"
#include "loadcast/models/model.hpp"
#include "loadcast/pipeline.hpp"
#include "loadcast/replay.hpp"

namespace loadcast {

template <class T>
class BlockingQueue {
 public:
  // False when the queue has been closed; the item is discarded.
  bool push(T v) {
    {
      std::lock_guard lk(m_);
      if (closed_) return false;
      q_.push_back(std::move(v));
    }
    cv_.notify_one();
    return true;
  }

  void close() {
    {
      std::lock_guard lk(m_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::optional<T> try_pop() {
    std::lock_guard lk(m_);
    return take();
  }

  // Blocks until an item arrives or the queue is closed and drained.
  std::optional<T> pop() {
    std::unique_lock lk(m_);
    cv_.wait(lk, [&] { return !q_.empty() || closed_; });
    return take();
  }

 private:
  std::optional<T> take() {
    if (q_.empty()) return std::nullopt;
    T v = std::move(q_.front());
    q_.pop_front();
    return v;
  }

  std::mutex m_;
  std::condition_variable cv_;
  std::deque<T> q_;
  bool closed_ = false;
};

// Linear interpolation between closest ranks; `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(ErrorCode::InvalidArgument, "quantile of empty list");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - static_cast<double>(lo));
}

struct BoxplotSummary {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

inline BoxplotSummary boxplot(std::vector<double> v) {
  if (v.empty()) fail(ErrorCode::InvalidArgument, "boxplot of empty list");
  std::sort(v.begin(), v.end());
  return {v.front(), quantile_sorted(v, 0.25), median_of(v), quantile_sorted(v, 0.75), v.back()};
}

struct LatencySample {
  int house_id = 0;
  Timestamp t_predict{};
  SteadyTime t_handoff{};
  SteadyTime t_emit{};
  std::chrono::nanoseconds windowing_features{0};
  std::chrono::nanoseconds model{0};

  std::chrono::nanoseconds latency() const { return t_emit - t_handoff; }
};

inline double to_ms(std::chrono::nanoseconds d) { return static_cast<double>(d.count()) / 1e6; }

// Upper bucket edges in milliseconds; the last bucket is open-ended.
inline const std::vector<double>& latency_bucket_edges_ms() {
  static const std::vector<double> e = {0.01, 0.1, 1, 10, 100, 1000, 10000};
  return e;
}

struct LatencySummary {
  std::size_t count = 0;
  double mean_ms = 0.0, median_ms = 0.0, p95_ms = 0.0, p99_ms = 0.0, max_ms = 0.0;
  std::vector<std::size_t> histogram;  // edges from latency_bucket_edges_ms() plus overflow
  double mean_windowing_features_ms = 0.0;
  double mean_model_ms = 0.0;
};

inline LatencySummary summarize(std::span<const LatencySample> samples) {
  LatencySummary s;
  s.histogram.assign(latency_bucket_edges_ms().size() + 1, 0);
  s.count = samples.size();
  if (samples.empty()) return s;
  std::vector<double> ms;
  double wf = 0.0, mdl = 0.0;
  for (const auto& x : samples) {
    const double v = to_ms(x.latency());
    ms.push_back(v);
    wf += to_ms(x.windowing_features);
    mdl += to_ms(x.model);
    const auto& edges = latency_bucket_edges_ms();
    const auto b = static_cast<std::size_t>(std::lower_bound(edges.begin(), edges.end(), v) - edges.begin());
    ++s.histogram[b];
  }
  std::sort(ms.begin(), ms.end());
  const double n = static_cast<double>(ms.size());
  s.mean_ms = mean_of(ms);
  s.median_ms = median_of(ms);
  s.p95_ms = quantile_sorted(ms, 0.95);
  s.p99_ms = quantile_sorted(ms, 0.99);
  s.max_ms = ms.back();
  s.mean_windowing_features_ms = wf / n;
  s.mean_model_ms = mdl / n;
  return s;
}

inline nlohmann::json to_json(const LatencySummary& s) {
  return {{"count", s.count},
          {"mean_ms", s.mean_ms},
          {"median_ms", s.median_ms},
          {"p95_ms", s.p95_ms},
          {"p99_ms", s.p99_ms},
          {"max_ms", s.max_ms},
          {"histogram", {{"upper_edges_ms", latency_bucket_edges_ms()}, {"counts", s.histogram}}},
          {"stage_breakdown",
           {{"windowing_features_ms", s.mean_windowing_features_ms}, {"model_ms", s.mean_model_ms}}}};
}

struct LatencyReport {
  std::vector<LatencySample> samples;
  LatencySummary global;
  std::map<int, LatencySummary> per_household;
  double wall_seconds = 0.0;
  double throughput = 0.0;  // predictions per second of wall time

  static LatencyReport build(std::vector<LatencySample> samples, double wall_seconds) {
    LatencyReport r;
    r.samples = std::move(samples);
    r.global = summarize(r.samples);
    std::map<int, std::vector<LatencySample>> by_house;
    for (const auto& s : r.samples) by_house[s.house_id].push_back(s);
    for (const auto& [h, v] : by_house) r.per_household.emplace(h, summarize(v));
    r.wall_seconds = wall_seconds;
    r.throughput = wall_seconds > 0.0 ? static_cast<double>(r.samples.size()) / wall_seconds : 0.0;
    return r;
  }

  nlohmann::json to_json() const {
    nlohmann::json per = nlohmann::json::object();
    for (const auto& [h, s] : per_household) per[std::to_string(h)] = loadcast::to_json(s);
    return {{"global", loadcast::to_json(global)},
            {"per_household", per},
            {"wall_seconds", wall_seconds},
            {"throughput_per_s", throughput}};
  }

  void write_csv(std::ostream& os) const {
    os << "house_id,t_predict,latency_ms,windowing_features_ms,model_ms\n";
    for (const auto& s : samples) {
      os << s.house_id << ',' << format_timestamp(s.t_predict) << ',' << to_ms(s.latency()) << ','
         << to_ms(s.windowing_features) << ',' << to_ms(s.model) << '\n';
    }
  }
};

struct TaggedOutput {
  int house_id = 0;
  PipelineItem item;
};

struct HouseholdFailure {
  int house_id = 0;
  std::string message;
};

using PipelineFactory = std::function<StagePtr<PipelineItem>(const PipelineConfig&, ReadingFeed)>;

struct RunOptions {
  std::size_t parallelism = 1;
  std::chrono::milliseconds report_every{0};  // 0 disables periodic reports
  std::function<void(const LatencyReport&)> on_report;
  PipelineFactory factory;  // build_pipeline when empty
};

struct RunResult {
  std::vector<TaggedOutput> outputs;  // per-household order preserved
  std::vector<HouseholdFailure> failures;
  std::size_t routing_drops = 0;      // readings for unconfigured households
  LatencyReport latency;

  std::vector<ForecastRecord> forecasts(int house_id) const {
    std::vector<ForecastRecord> out;
    for (const auto& o : outputs) {
      if (o.house_id == house_id && o.item.is_forecast()) out.push_back(o.item.forecast());
    }
    return out;
  }
};

// One pipeline per household on its own thread; at most `parallelism`
// pipelines run at a time. A single router pulls the merged stream and hands
// each reading to its household by message passing.
inline RunResult run(EventSource& source, const std::vector<PipelineConfig>& configs, const RunOptions& opt) {
  if (opt.parallelism < 1) fail(ErrorCode::ConfigInvalid, "parallelism must be >= 1");
  std::map<int, std::size_t> route;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    configs[i].validate();
    if (!route.emplace(configs[i].house_id(), i).second) {
      fail(ErrorCode::ConfigInvalid, "household " + std::to_string(configs[i].house_id()) + " configured twice");
    }
  }

  struct Message {
    int house_id;
    std::optional<PipelineItem> item;  // nullopt: household finished
    SteadyTime t_emit;
    std::optional<std::string> error;
  };

  const auto started = std::chrono::steady_clock::now();
  std::vector<BlockingQueue<TimedReading>> inbox(configs.size());
  BlockingQueue<Message> outbox;
  std::counting_semaphore<> slots(static_cast<std::ptrdiff_t>(opt.parallelism));
  std::atomic<std::size_t> drops{0};
  std::optional<Error> router_error;

  std::vector<std::thread> workers;
  workers.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    workers.emplace_back([&, i] {
      const int house = configs[i].house_id();
      auto& q = inbox[i];
      slots.acquire();
      ReadingFeed feed = [&]() -> std::optional<TimedReading> {
        if (auto r = q.try_pop()) return r;
        slots.release();
        auto r = q.pop();
        slots.acquire();
        return r;
      };
      try {
        auto stage = opt.factory ? opt.factory(configs[i], feed) : build_pipeline(configs[i], feed);
        while (auto item = stage->advance()) {
          outbox.push(Message{house, std::move(*item), std::chrono::steady_clock::now(), std::nullopt});
        }
      } catch (const std::exception& e) {
        outbox.push(Message{house, std::nullopt, {}, std::string(e.what())});
        q.close();
        while (q.pop()) {
        }
      }
      slots.release();
      outbox.push(Message{house, std::nullopt, {}, std::nullopt});
    });
  }

  std::thread router([&] {
    try {
      while (auto r = source.next()) {
        const auto it = route.find(r->house_id);
        if (it == route.end()) {
          ++drops;
          continue;
        }
        inbox[it->second].push(TimedReading{std::move(*r), std::chrono::steady_clock::now()});
      }
    } catch (const Error& e) {
      router_error = e;
    }
    for (auto& q : inbox) q.close();
  });

  RunResult res;
  std::vector<LatencySample> samples;
  std::size_t finished = 0;
  auto last_report = started;
  while (finished < configs.size()) {
    auto m = outbox.pop();
    if (!m) break;
    if (m->error) {
      res.failures.push_back({m->house_id, *m->error});
      continue;
    }
    if (!m->item) {
      ++finished;
      continue;
    }
    if (m->item->is_forecast()) {
      const auto& t = m->item->timing;
      samples.push_back(LatencySample{m->house_id, m->item->forecast().t_predict, t.handoff, m->t_emit,
                                      t.windowing_features, t.model});
    }
    res.outputs.push_back(TaggedOutput{m->house_id, std::move(*m->item)});
    if (opt.report_every.count() > 0 && opt.on_report) {
      const auto now = std::chrono::steady_clock::now();
      if (now - last_report >= opt.report_every) {
        last_report = now;
        opt.on_report(LatencyReport::build(samples, std::chrono::duration<double>(now - started).count()));
      }
    }
  }
  router.join();
  for (auto& w : workers) w.join();
  if (router_error) throw *router_error;

  res.routing_drops = drops.load();
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  res.latency = LatencyReport::build(std::move(samples), wall);
  return res;
}

inline RunResult run(std::vector<SensorReading> log, const std::vector<PipelineConfig>& configs,
                     const RunOptions& opt, ReplayMode mode = ReplayMode::Batch, double speedup = 1.0) {
  EventSource src(std::move(log), mode, speedup);
  return run(src, configs, opt);
}

struct PredictorLatency {
  std::string model;
  std::string combo;
  std::vector<double> samples_ms;  // fit + predict per repetition
  BoxplotSummary summary;
};

// Times full retrain + one prediction; warm-up iterations are discarded.
inline PredictorLatency measure_predictor_latency(const ModelSpec& spec, const Matrix& x,
                                                  std::span<const double> y, std::span<const double> live,
                                                  std::size_t repetitions = 30, std::size_t warmup = 3,
                                                  double persistence_scale = 1.0) {
  if (repetitions < 30) fail(ErrorCode::InvalidArgument, "at least 30 repetitions required");
  PredictorLatency out;
  out.model = spec.name();
  volatile double sink = 0.0;
  const double consum = y.empty() ? 0.0 : y.back();
  for (std::size_t i = 0; i < warmup + repetitions; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = fit(spec, x, y, persistence_scale);
    sink = sink + predict(m, live, consum);
    const auto t1 = std::chrono::steady_clock::now();
    if (i >= warmup) out.samples_ms.push_back(to_ms(t1 - t0));
  }
  out.summary = boxplot(out.samples_ms);
  return out;
}

}  // namespace loadcast
