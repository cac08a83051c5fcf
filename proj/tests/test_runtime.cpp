#include <gtest/gtest.h>

#include <numeric>
#include <sstream>

#include "loadcast/runtime.hpp"

using namespace loadcast;
using namespace std::chrono_literals;

namespace {

SyntheticProfile household(int id) {
  SyntheticProfile p;
  p.house_id = id;
  p.seed = 100 + std::uint64_t(id);
  p.devices.push_back({15.0, 400.0 + 50.0 * id, 0.3, 15});
  p.devices.push_back({3.0, 70.0, 0.4, 60});
  return p;
}

struct Fleet {
  std::vector<SensorReading> log;
  std::vector<PipelineConfig> configs;
};

Fleet fleet(int households, Seconds span = Days{1} + 6h, const char* model = "tree-reg") {
  Fleet f;
  for (int h = 1; h <= households; ++h) {
    const auto part = generate_synthetic(household(h), span, 120s);
    f.log.insert(f.log.end(), part.begin(), part.end());
    PipelineConfig c;
    c.roster = derive_rosters(part).begin()->second;
    c.forecast.history_span = Days{1};
    c.forecast.window = MicroWindowSpec{15min, 60min, 60min};
    c.forecast.combo = FeatureCombination::complex();
    c.forecast.model = ModelSpec::parse(model);
    f.configs.push_back(c);
  }
  std::stable_sort(f.log.begin(), f.log.end(), reading_order);
  return f;
}

}  // namespace

TEST(BlockingQueue, OrderAndClose) {
  BlockingQueue<int> q;
  EXPECT_TRUE(q.push(1));
  EXPECT_TRUE(q.push(2));
  q.close();
  EXPECT_FALSE(q.push(3));
  EXPECT_EQ(q.pop(), 1);
  EXPECT_EQ(q.try_pop(), 2);
  EXPECT_FALSE(q.pop());
}

TEST(BlockingQueue, CrossThreadHandoff) {
  BlockingQueue<int> q;
  std::thread producer([&] {
    for (int i = 0; i < 1000; ++i) q.push(i);
    q.close();
  });
  long long sum = 0;
  int expected = 0;
  while (auto v = q.pop()) {
    EXPECT_EQ(*v, expected++);
    sum += *v;
  }
  producer.join();
  EXPECT_EQ(sum, 999LL * 1000 / 2);
}

TEST(Quantiles, LinearInterpolation) {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  EXPECT_DOUBLE_EQ(quantile_sorted(v, 0.25), 2.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(std::vector<double>{0, 10}, 0.95), 9.5);
  const auto b = boxplot({5, 1, 4, 2, 3});
  EXPECT_EQ(b.min, 1.0);
  EXPECT_EQ(b.q1, 2.0);
  EXPECT_EQ(b.median, 3.0);
  EXPECT_EQ(b.q3, 4.0);
  EXPECT_EQ(b.max, 5.0);
}

TEST(Runtime, ParallelismDoesNotChangeOutputs) {
  const auto f = fleet(6);
  RunOptions serial;
  serial.parallelism = 1;
  RunOptions wide;
  wide.parallelism = 6;
  const auto a = run(f.log, f.configs, serial);
  const auto b = run(f.log, f.configs, wide);
  ASSERT_TRUE(a.failures.empty());
  ASSERT_TRUE(b.failures.empty());
  for (int h = 1; h <= 6; ++h) {
    const auto x = a.forecasts(h);
    ASSERT_FALSE(x.empty());
    EXPECT_EQ(x, b.forecasts(h)) << "household " << h;
  }
}

TEST(Runtime, MatchesSinglePipeline) {
  const auto f = fleet(3);
  RunOptions opt;
  opt.parallelism = 2;
  const auto res = run(f.log, f.configs, opt);
  for (const auto& cfg : f.configs) {
    EventSource src(f.log);
    std::vector<ForecastRecord> solo;
    for (const auto& i : drain(*build_pipeline(cfg, src))) solo.push_back(i.forecast());
    EXPECT_EQ(res.forecasts(cfg.house_id()), solo);
  }
}

TEST(Runtime, UnknownHouseholdIsDroppedAndCounted) {
  auto f = fleet(2);
  const auto stray = generate_synthetic(household(9), 2h, 120s);
  f.log.insert(f.log.end(), stray.begin(), stray.end());
  std::stable_sort(f.log.begin(), f.log.end(), reading_order);
  const auto res = run(f.log, f.configs, RunOptions{});
  EXPECT_EQ(res.routing_drops, stray.size());
  EXPECT_TRUE(res.forecasts(9).empty());
  EXPECT_FALSE(res.forecasts(1).empty());
}

TEST(Runtime, LatencySamplesAreConsistent) {
  const auto f = fleet(3);
  RunOptions opt;
  opt.parallelism = 3;
  const auto res = run(f.log, f.configs, opt);
  const auto& lat = res.latency;
  std::size_t forecasts = 0;
  for (const auto& o : res.outputs) forecasts += o.item.is_forecast();
  EXPECT_EQ(lat.samples.size(), forecasts);
  for (const auto& s : lat.samples) {
    EXPECT_GE(s.latency().count(), 0);
    EXPECT_GE(s.windowing_features.count(), 0);
    EXPECT_GE(s.model.count(), 0);
  }
  EXPECT_EQ(std::accumulate(lat.global.histogram.begin(), lat.global.histogram.end(), std::size_t{0}),
            lat.samples.size());
  EXPECT_EQ(lat.global.histogram.size(), latency_bucket_edges_ms().size() + 1);
  EXPECT_LE(lat.global.median_ms, lat.global.p95_ms);
  EXPECT_LE(lat.global.p95_ms, lat.global.p99_ms);
  EXPECT_LE(lat.global.p99_ms, lat.global.max_ms);
  EXPECT_EQ(lat.per_household.size(), 3u);
  EXPECT_GT(lat.throughput, 0.0);
  const auto j = lat.to_json();
  EXPECT_EQ(j["global"]["count"].get<std::size_t>(), lat.samples.size());
  std::ostringstream csv;
  lat.write_csv(csv);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), std::ptrdiff_t(lat.samples.size() + 1));
}

namespace {

// Fails after a fixed number of items.
class Faulty final : public Stage<PipelineItem> {
 public:
  Faulty(StagePtr<PipelineItem> inner, int after) : inner_(std::move(inner)), after_(after) {}
  std::string_view name() const override { return "faulty"; }

 protected:
  std::optional<PipelineItem> pull() override {
    if (after_-- == 0) fail(ErrorCode::InvalidArgument, "injected");
    return inner_->advance();
  }

 private:
  StagePtr<PipelineItem> inner_;
  int after_;
};

}  // namespace

TEST(Runtime, FailureIsIsolatedToItsHousehold) {
  const auto f = fleet(3);
  const auto healthy = run(f.log, f.configs, RunOptions{});
  for (const std::size_t par : {1u, 3u}) {
    RunOptions opt;
    opt.parallelism = par;
    opt.factory = [](const PipelineConfig& c, ReadingFeed feed) -> StagePtr<PipelineItem> {
      auto p = build_pipeline(c, std::move(feed));
      if (c.house_id() == 2) return std::make_unique<Faulty>(std::move(p), 3);
      return p;
    };
    const auto res = run(f.log, f.configs, opt);
    ASSERT_EQ(res.failures.size(), 1u);
    EXPECT_EQ(res.failures[0].house_id, 2);
    EXPECT_NE(res.failures[0].message.find("[faulty] injected"), std::string::npos);
    EXPECT_EQ(res.forecasts(2).size(), 3u);
    EXPECT_EQ(res.forecasts(1), healthy.forecasts(1));
    EXPECT_EQ(res.forecasts(3), healthy.forecasts(3));
  }
}

TEST(Runtime, PeriodicReportsAreDelivered) {
  const auto f = fleet(2, Days{1} + 12h);
  RunOptions opt;
  opt.report_every = 1ms;
  std::vector<std::size_t> counts;
  opt.on_report = [&](const LatencyReport& r) { counts.push_back(r.global.count); };
  opt.factory = [](const PipelineConfig& c, ReadingFeed feed) {
    return build_pipeline(c, [feed]() {
      std::this_thread::sleep_for(std::chrono::microseconds(20));
      return feed();
    });
  };
  const auto res = run(f.log, f.configs, opt);
  ASSERT_FALSE(counts.empty());
  EXPECT_TRUE(std::is_sorted(counts.begin(), counts.end()));
  EXPECT_LE(counts.back(), res.latency.samples.size());
}

TEST(Runtime, DuplicateHouseholdRejected) {
  auto f = fleet(1);
  f.configs.push_back(f.configs[0]);
  EXPECT_THROW(run(f.log, f.configs, RunOptions{}), Error);
  RunOptions bad;
  bad.parallelism = 0;
  EXPECT_THROW(run(f.log, {f.configs[0]}, bad), Error);
}

TEST(PredictorLatency, ThirtyRepetitionsBoxplot) {
  std::vector<std::vector<double>> rows;
  std::vector<double> y;
  for (int i = 0; i < 300; ++i) {
    rows.push_back({double(i % 24), double(i % 7), double(i % 13)});
    y.push_back(0.1 * (i % 5));
  }
  const Matrix x = Matrix::from_rows(rows);
  const std::vector<double> live = {1, 2, 3};
  for (const auto* m : {"tree-reg", "gnb-cls", "svm-reg"}) {
    const auto r = measure_predictor_latency(ModelSpec::parse(m), x, y, live);
    ASSERT_EQ(r.samples_ms.size(), 30u);
    EXPECT_LE(r.summary.min, r.summary.q1);
    EXPECT_LE(r.summary.q1, r.summary.median);
    EXPECT_LE(r.summary.median, r.summary.q3);
    EXPECT_LE(r.summary.q3, r.summary.max);
    EXPECT_GE(r.summary.min, 0.0);
  }
  EXPECT_THROW(measure_predictor_latency(ModelSpec::parse("tree-reg"), x, y, live, 29), Error);
}
