#include <gtest/gtest.h>

#include <random>

#include "loadcast/windowing.hpp"

using namespace loadcast;
using namespace std::chrono_literals;

namespace {

Timestamp at(const char* s) { return *parse_timestamp(s); }

SensorReading load(Timestamp ts, const std::string& sensor, double w, int house = 1) {
  SensorReading r;
  r.ts = ts;
  r.value = w;
  r.house_id = house;
  r.sensor_id = sensor;
  return r;
}

// Counts t0 values by stepping one increment at a time.
std::size_t brute_count(Seconds span, const MicroWindowSpec& s) {
  std::size_t n = 0;
  for (Seconds t0{0}; t0 + s.base_span + s.horizon <= span; t0 += s.increment) ++n;
  return n;
}

const MicroWindowSpec kHour{15min, 60min, 60min};

}  // namespace

TEST(MicroWindows, FourteenDaysAtFifteenMinutesGives1337) {
  EXPECT_EQ(micro_window_count(Days{14}, kHour), 1337u);
  const Timestamp s = at("2013-10-01 00:00:00");
  const auto pairs = enumerate_micro_windows(s, s + Days{14}, kHour);
  ASSERT_EQ(pairs.size(), 1337u);
  EXPECT_EQ(pairs.front().base, (Interval{s, s + 1h}));
  EXPECT_EQ(pairs.front().target, (Interval{s + 1h, s + 2h}));
  EXPECT_EQ(pairs.back().target.end, s + Days{14});
}

TEST(MicroWindows, CountMatchesBruteForce) {
  std::mt19937 rng(1);
  for (int i = 0; i < 300; ++i) {
    const MicroWindowSpec s{Minutes{1 + int(rng() % 60)}, Minutes{1 + int(rng() % 240)},
                            Minutes{1 + int(rng() % 1440)}};
    const Seconds span = Minutes{int(rng() % (4 * 1440))};
    ASSERT_EQ(micro_window_count(span, s), brute_count(span, s));
  }
}

TEST(MicroWindows, PairsAreGridAlignedAndContained) {
  const Timestamp s = at("2013-10-01 00:00:00");
  const MicroWindowSpec spec{15min, 60min, 360min};
  const auto pairs = enumerate_micro_windows(s, s + Days{2} + 7min, spec);
  for (const auto& p : pairs) {
    EXPECT_EQ((p.t0() - s) % spec.increment, Seconds{0});
    EXPECT_EQ(p.base.end, p.target.start);
    EXPECT_LE(p.target.end, s + Days{2} + 7min);
    EXPECT_FALSE(p.target_is_future);
  }
}

TEST(MicroWindows, TooShortSpanThrows) {
  const Timestamp s = at("2013-10-01 00:00:00");
  try {
    enumerate_micro_windows(s, s + 119min, kHour);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::WindowTooShort);
  }
  EXPECT_EQ(enumerate_micro_windows(s, s + 120min, kHour).size(), 1u);
}

TEST(HistoricWindow, EvictsOlderThanSpan) {
  HistoricWindow w(make_roster(1, {"1:1"}), Days{1});
  const Timestamp s = at("2013-10-01 00:00:00");
  for (Timestamp t = s; t < s + Days{3}; t += 10min) w.advance(load(t, "1:1", 1.0));
  const Timestamp newest = s + Days{3} - 10min;
  EXPECT_GE(*w.oldest_retained(), newest - Days{1});
  EXPECT_EQ(w.size(), 145u);
  EXPECT_EQ(w.raw_start(), newest - Days{1});
}

TEST(HistoricWindow, WatermarkAdvancesWithoutReadings) {
  HistoricWindow w(make_roster(1, {"1:1"}), 2h);
  const Timestamp s = at("2013-10-01 00:00:00");
  w.advance(load(s, "1:1", 7.0));
  w.advance_to(s + 5h);
  EXPECT_EQ(w.end(), s + 5h);
  EXPECT_TRUE(w.empty());
  EXPECT_EQ(w.held_before(0, s + 4h), 7.0);
}

TEST(HistoricWindow, LateAndForeignReadings) {
  HistoricWindow w(make_roster(1, {"1:1", "1:2"}));
  const Timestamp s = at("2013-10-01 00:00:00");
  EXPECT_EQ(w.advance(load(s + 10s, "1:1", 1)), AdvanceStatus::Appended);
  EXPECT_EQ(w.advance(load(s, "1:2", 1)), AdvanceStatus::LateArrival);
  EXPECT_EQ(w.advance(load(s + 20s, "1:3", 1)), AdvanceStatus::Ignored);
  EXPECT_EQ(w.advance(load(s + 20s, "2:1", 1, 2)), AdvanceStatus::Ignored);
  auto work = load(s + 20s, "1:1", 1);
  work.type = MeasurementType::Work;
  EXPECT_EQ(w.advance(work), AdvanceStatus::Ignored);
  EXPECT_EQ(w.late_arrivals(), 1u);
  EXPECT_EQ(w.ignored(), 3u);
  EXPECT_EQ(w.size(), 1u);
}

TEST(HistoricWindow, RangeAndHoldLookups) {
  HistoricWindow w(make_roster(1, {"1:1"}));
  const Timestamp s = at("2013-10-01 00:00:00");
  for (int i = 0; i < 10; ++i) w.advance(load(s + Minutes{i}, "1:1", i));
  const auto [lo, hi] = w.range(0, Interval{s + 2min, s + 5min});
  EXPECT_EQ(std::distance(lo, hi), 3);
  EXPECT_EQ(lo->watts, 2.0);
  EXPECT_EQ(w.held_before(0, s + 5min), 4.0);
  EXPECT_FALSE(w.held_before(0, s));
}

TEST(HistoricWindow, StartIsCeiledToGrid) {
  HistoricWindow w(make_roster(1, {"1:1"}));
  const Timestamp s = at("2013-10-01 00:00:00");
  w.advance(load(s + 7min, "1:1", 1));
  w.advance(load(s + 3h, "1:1", 1));
  EXPECT_EQ(w.start(15min), s + 15min);
  const auto pairs = enumerate_micro_windows(w, kHour);
  EXPECT_EQ(pairs.front().t0(), s + 15min);
  EXPECT_EQ(pairs.size(), brute_count(3h - 15min, kHour));
}

TEST(CurrentBase, EndsAtNowAndTargetsFuture) {
  HistoricWindow w(make_roster(1, {"1:1"}));
  const Timestamp s = at("2013-10-01 00:00:00");
  for (Timestamp t = s; t <= s + 3h; t += 1min) w.advance(load(t, "1:1", 1));
  const auto p = current_base(w, kHour, s + 3h);
  EXPECT_EQ(p.base, (Interval{s + 2h, s + 3h}));
  EXPECT_TRUE(p.target_is_future);
  EXPECT_THROW(current_base(w, kHour, s + 30min), Error);
  EXPECT_THROW(current_base(w, kHour, s + 4h), Error);
  HistoricWindow empty(make_roster(1, {"1:1"}));
  EXPECT_THROW(current_base(empty, kHour, s), Error);
}

TEST(MicroWindows, StandardHorizons) {
  EXPECT_EQ(standard_horizons_min(), (std::vector<int>{15, 30, 60, 90, 120, 360, 720, 1440}));
}
