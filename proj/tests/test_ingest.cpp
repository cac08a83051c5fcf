#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include <zlib.h>

#include "loadcast/ingest.hpp"
#include "loadcast/lived_io.hpp"

using namespace loadcast;
using namespace std::chrono_literals;

namespace {

Timestamp at(const char* s) { return *parse_timestamp(s); }

SensorReading load(const char* ts, const std::string& sensor, double w, int house = 1) {
  SensorReading r;
  r.ts = at(ts);
  r.type = MeasurementType::Load;
  r.value = w;
  r.unit = "Watt";
  r.house_id = house;
  r.mac = "00:00:00:00:00:00:01";
  r.sensor_id = sensor;
  return r;
}

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::Io;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("loadcast_ingest_" + name);
}

}  // namespace

TEST(Timestamp, ParsesOnlyTheCanonicalLayout) {
  EXPECT_TRUE(parse_timestamp("2013-10-01 00:09:39"));
  EXPECT_FALSE(parse_timestamp("2013-10-01T00:09:39"));
  EXPECT_FALSE(parse_timestamp("2013-13-01 00:00:00"));
  EXPECT_FALSE(parse_timestamp("2013-02-30 00:00:00"));
  EXPECT_FALSE(parse_timestamp("2013-10-01 24:00:00"));
  EXPECT_FALSE(parse_timestamp("2013-10-01 00:09"));
  EXPECT_EQ(format_timestamp(at("2015-02-01 00:00:00")), "2015-02-01 00:00:00");
}

TEST(ParseReading, WorkSampleRow) {
  const auto r = parse_reading("2013-10-01 00:09:39,WORK,74.973,kWh,1,00:00:00:00:00:00:11,1:98,2013,10");
  EXPECT_EQ(r.ts, at("2013-10-01 00:09:39"));
  EXPECT_EQ(r.type, MeasurementType::Work);
  EXPECT_EQ(r.value, 74.973);
  EXPECT_EQ(r.unit, "kWh");
  EXPECT_EQ(r.house_id, 1);
  EXPECT_EQ(r.mac, "00:00:00:00:00:00:11");
  EXPECT_EQ(r.sensor_id, "1:98");
}

TEST(ParseReading, LoadSampleRow) {
  const auto r = parse_reading("2015-02-01 00:00:00,LOAD,49,Watt,2,00:00:00:00:00:00:45,2:201,2015,2");
  EXPECT_EQ(r.type, MeasurementType::Load);
  EXPECT_EQ(r.value, 49.0);
  EXPECT_EQ(r.house_id, 2);
  EXPECT_EQ(r.sensor_id, "2:201");
}

TEST(ParseReading, SampleRowsRoundTripExactly) {
  for (const std::string line : {"2013-10-01 00:09:39,WORK,74.973,kWh,1,00:00:00:00:00:00:11,1:98,2013,10",
                                 "2015-02-01 00:00:00,LOAD,49,Watt,2,00:00:00:00:00:00:45,2:201,2015,2",
                                 "2014-03-01 00:00:36,LOAD,23,Watt,6,00:00:00:00:00:00:32,6:1,2014,3"}) {
    EXPECT_EQ(format_reading(parse_reading(line)), line);
  }
}

TEST(ParseReading, TabSeparatedIsRejectedCommaWithSpacesAccepted) {
  EXPECT_EQ(code_of([] { parse_reading("2015-02-01 00:00:00\tLOAD\t49"); }), ErrorCode::MalformedRecord);
  const auto r = parse_reading(" 2015-02-01 00:00:00 , LOAD , 49 , Watt , 2 , m , 2:201 , 2015 , 2 ");
  EXPECT_EQ(r.value, 49.0);
}

TEST(ParseReading, Errors) {
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,WORK,74.973,kWh,1,mac,1:98,2014,10"); }),
            ErrorCode::InconsistentRedundancy);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,WORK,74.973,kWh,1,mac,1:98,2013,11"); }),
            ErrorCode::InconsistentRedundancy);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,WORK,74.973,kWh,1,mac,1:98,2013"); }),
            ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09,WORK,1,kWh,1,mac,1:98,2013,10"); }),
            ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,WORK,abc,kWh,1,mac,1:98,2013,10"); }),
            ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,WORK,nan,kWh,1,mac,1:98,2013,10"); }),
            ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,LOAD,-1,Watt,1,mac,1:98,2013,10"); }),
            ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,LOAD,1,Watt,1,mac,2:98,2013,10"); }),
            ErrorCode::MalformedRecord);
  EXPECT_EQ(code_of([] { parse_reading("2013-10-01 00:09:39,HUMIDITY,1,%,1,mac,1:98,2013,10"); }),
            ErrorCode::UnknownType);
}

TEST(ParseReading, MultiSensorTypesAreIgnorable) {
  const auto r = parse_reading("2013-10-01 00:09:39,TEMPERATURE,21.5,C,1,mac,1:7,2013,10");
  EXPECT_TRUE(r.ignorable());
  const auto s = parse_reading("2013-10-01 00:09:39,STATE,ON,,1,mac,1:7,2013,10");
  EXPECT_FALSE(s.ignorable());
  EXPECT_EQ(s.value, 1.0);
  EXPECT_EQ(format_value(s), "ON");
  EXPECT_EQ(parse_reading("2013-10-01 00:09:39,POWER,3,Watt,1,mac,1:7,2013,10").type, MeasurementType::Load);
}

TEST(ParseReading, RandomRecordsRoundTrip) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> val(0.0, 5000.0);
  std::uniform_int_distribution<int> secs(0, 86400 * 900);
  const MeasurementType types[] = {MeasurementType::Load, MeasurementType::Work, MeasurementType::Voltage,
                                   MeasurementType::Frequency, MeasurementType::Current};
  for (int i = 0; i < 2000; ++i) {
    SensorReading r;
    r.ts = at("2013-01-01 00:00:00") + Seconds{secs(rng)};
    r.type = types[i % 5];
    r.value = val(rng);
    r.unit = "u";
    r.house_id = 1 + i % 300;
    r.mac = "00:00:00:00:00:00:11";
    r.sensor_id = std::to_string(r.house_id) + ":" + std::to_string(i % 50);
    const auto back = parse_reading(format_reading(r));
    ASSERT_EQ(back, r) << format_reading(r);
  }
}

TEST(WorkMonotonicity, FlagsDecreases) {
  WorkMonotonicityChecker c;
  auto w = [](double v) {
    SensorReading r;
    r.type = MeasurementType::Work;
    r.sensor_id = "1:1";
    r.value = v;
    return r;
  };
  EXPECT_TRUE(c.observe(w(1.0)));
  EXPECT_TRUE(c.observe(w(1.0)));
  EXPECT_FALSE(c.observe(w(0.5)));
  EXPECT_EQ(c.violations(), 1u);
}

TEST(Roster, SortedUniqueAndPrefixChecked) {
  const auto r = make_roster(3, {"3:2", "3:10", "3:1", "3:2"});
  EXPECT_EQ(r.device_ids, (std::vector<std::string>{"3:1", "3:10", "3:2"}));
  EXPECT_EQ(r.index_of("3:2"), 2u);
  EXPECT_FALSE(r.index_of("3:9"));
  EXPECT_EQ(code_of([] { make_roster(3, {}); }), ErrorCode::InvalidArgument);
  EXPECT_EQ(code_of([] { make_roster(3, {"4:1"}); }), ErrorCode::InvalidArgument);
}

namespace {

// Readings every `step` for the whole day for the given devices.
std::vector<SensorReading> full_day(const char* day, const std::vector<std::string>& devices, Seconds step) {
  std::vector<SensorReading> out;
  const Timestamp start = at(day);
  for (Timestamp t = start; t < start + Days{1}; t += step) {
    for (const auto& d : devices) {
      auto r = load("2013-10-01 00:00:00", d, 10.0);
      r.ts = t;
      out.push_back(r);
    }
  }
  std::stable_sort(out.begin(), out.end(), reading_order);
  return out;
}

}  // namespace

TEST(DayQuality, CleanDayIsOk) {
  const auto roster = make_roster(1, {"1:1", "1:2"});
  const auto rs = full_day("2013-10-01 00:00:00", roster.device_ids, 2s);
  const auto v = assess_day_quality(day_of(at("2013-10-01 00:00:00")), rs, roster);
  EXPECT_TRUE(v.usable);
  EXPECT_EQ(v.reason, DayQuality::Ok);
}

TEST(DayQuality, TwoHourOutageExceedsGap) {
  const auto roster = make_roster(1, {"1:1", "1:2"});
  auto rs = full_day("2013-10-01 00:00:00", roster.device_ids, 60s);
  std::erase_if(rs, [](const SensorReading& r) {
    return r.sensor_id == "1:2" && r.ts > at("2013-10-01 09:00:00") && r.ts < at("2013-10-01 11:00:00");
  });
  const auto v = assess_day_quality(day_of(rs.front().ts), rs, roster);
  EXPECT_FALSE(v.usable);
  EXPECT_EQ(v.reason, DayQuality::GapExceeded);
}

TEST(DayQuality, LateStartCountsAsGap) {
  const auto roster = make_roster(1, {"1:1"});
  auto rs = full_day("2013-10-01 00:00:00", roster.device_ids, 60s);
  std::erase_if(rs, [](const SensorReading& r) { return r.ts < at("2013-10-01 01:30:00"); });
  EXPECT_EQ(assess_day_quality(day_of(rs.front().ts), rs, roster).reason, DayQuality::GapExceeded);
}

TEST(DayQuality, MissingDeviceAndEmptyDay) {
  std::vector<std::string> seven;
  for (int i = 1; i <= 7; ++i) seven.push_back("1:" + std::to_string(i));
  const auto roster = make_roster(1, seven);
  const auto rs = full_day("2013-10-01 00:00:00", std::vector<std::string>(seven.begin(), seven.end() - 1), 60s);
  const auto v = assess_day_quality(day_of(rs.front().ts), rs, roster);
  EXPECT_FALSE(v.usable);
  EXPECT_EQ(v.reason, DayQuality::MissingDevice);
  const auto e = assess_day_quality(day_of(rs.front().ts), {}, roster);
  EXPECT_EQ(e.reason, DayQuality::MissingDevice);
}

TEST(DayQuality, UsableIffOk) {
  std::mt19937 rng(3);
  const auto roster = make_roster(1, {"1:1", "1:2"});
  for (int trial = 0; trial < 40; ++trial) {
    auto rs = full_day("2013-10-01 00:00:00", roster.device_ids, 300s);
    std::bernoulli_distribution drop(0.1 * (trial % 5));
    std::erase_if(rs, [&](const SensorReading&) { return drop(rng); });
    const auto v = assess_day_quality(day_of(at("2013-10-01 00:00:00")), rs, roster, 20min);
    EXPECT_EQ(v.usable, v.reason == DayQuality::Ok);
  }
}

TEST(DayQuality, PermutationInsensitiveAfterSort) {
  const auto roster = make_roster(1, {"1:1", "1:2"});
  auto rs = full_day("2013-10-01 00:00:00", roster.device_ids, 600s);
  std::erase_if(rs, [](const SensorReading& r) { return r.sensor_id == "1:1" && r.ts > at("2013-10-01 12:00:00"); });
  const auto expect = assess_day_quality(day_of(rs.front().ts), rs, roster);
  std::mt19937 rng(5);
  for (int i = 0; i < 10; ++i) {
    auto shuffled = rs;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    std::stable_sort(shuffled.begin(), shuffled.end(), reading_order);
    EXPECT_EQ(assess_day_quality(day_of(rs.front().ts), shuffled, roster).reason, expect.reason);
  }
}

namespace {

std::vector<DayQualityVerdict> verdicts(int total, std::vector<int> bad) {
  std::vector<DayQualityVerdict> out;
  const CalendarDay d0 = day_of(at("2013-10-01 00:00:00"));
  for (int i = 0; i < total; ++i) {
    const bool b = std::find(bad.begin(), bad.end(), i) != bad.end();
    out.push_back({d0 + Days{i}, !b, b ? DayQuality::GapExceeded : DayQuality::Ok});
  }
  return out;
}

}  // namespace

TEST(EvaluationRange, HouseholdWithFourSkippedDays) {
  const auto r = select_evaluation_range(verdicts(181, {3, 50, 90, 120}), 120);
  EXPECT_EQ(r.total, 181);
  EXPECT_EQ(r.skipped, 4);
  EXPECT_EQ(r.used, 177);
  EXPECT_TRUE(r.is_skipped(r.first_day + Days{50}));
}

TEST(EvaluationRange, AllUsableAndThreshold) {
  const auto r = select_evaluation_range(verdicts(130, {}), 120);
  EXPECT_EQ(r.used, r.total);
  EXPECT_EQ(r.skipped, 0);
  std::vector<int> bad;
  for (int i = 100; i < 130; ++i) bad.push_back(i);
  EXPECT_EQ(code_of([&] { select_evaluation_range(verdicts(130, bad), 120); }), ErrorCode::InsufficientData);
}

TEST(EvaluationRange, UsedPlusSkippedIsTotal) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const int total = 1 + static_cast<int>(rng() % 300);
    std::vector<int> bad;
    for (int i = 0; i < total; ++i) {
      if (rng() % 7 == 0) bad.push_back(i);
    }
    if (static_cast<int>(bad.size()) == total) continue;
    const auto r = select_evaluation_range(verdicts(total, bad), 1);
    EXPECT_EQ(r.used + r.skipped, r.total);
  }
}

TEST(LivedIo, ReadsPlainAndGzipWithOptionalHeader) {
  const std::vector<std::string> lines = {
      "2013-10-01 00:09:42,WORK,74.973,kWh,1,00:00:00:00:00:00:11,1:98,2013,10",
      "2013-10-01 00:09:39,WORK,74.973,kWh,1,00:00:00:00:00:00:11,1:98,2013,10",
      "garbage",
      "2015-02-01 00:00:00,LOAD,49,Watt,2,00:00:00:00:00:00:45,2:201,2015,2"};
  const auto plain = temp_file("plain.csv");
  {
    std::ofstream f(plain);
    f << kLivedHeader << "\n";
    for (const auto& l : lines) f << l << "\r\n";
  }
  const auto gz = temp_file("log.csv.gz");
  {
    gzFile g = gzopen(gz.string().c_str(), "wb");
    for (const auto& l : lines) {
      gzputs(g, l.c_str());
      gzputs(g, "\n");
    }
    gzclose(g);
  }
  for (const auto& p : {plain, gz}) {
    const std::vector<std::filesystem::path> paths = {p};
    const auto log = read_lived_files(paths);
    ASSERT_EQ(log.readings.size(), 3u) << p;
    EXPECT_EQ(log.stats.malformed, 1u);
    EXPECT_TRUE(std::is_sorted(log.readings.begin(), log.readings.end(), reading_order));
    EXPECT_EQ(format_reading(log.readings.front()), lines[1]);
  }
  const std::vector<std::filesystem::path> strict_paths = {plain};
  EXPECT_EQ(code_of([&] { read_lived_files(strict_paths, {}, true); }), ErrorCode::MalformedRecord);
  const std::vector<std::filesystem::path> missing = {temp_file("does_not_exist.csv")};
  EXPECT_EQ(code_of([&] { read_lived_files(missing); }), ErrorCode::Io);
}

TEST(LivedIo, WriteThenReadIsIdentity) {
  std::vector<SensorReading> rs = {load("2013-10-01 00:00:02", "1:2", 5.5), load("2013-10-01 00:00:02", "1:1", 0),
                                   load("2013-10-01 00:00:04", "1:1", 1234.25)};
  std::stable_sort(rs.begin(), rs.end(), reading_order);
  const auto p = temp_file("roundtrip.csv");
  write_lived_file(p, rs);
  const std::vector<std::filesystem::path> paths = {p};
  EXPECT_EQ(read_lived_files(paths).readings, rs);
}

TEST(RosterOverrides, ObjectAndListForms) {
  const auto a = parse_roster_overrides(nlohmann::json::parse(R"({"1": ["1:2", "1:1"], "2": ["2:5"]})"));
  EXPECT_EQ(a.at(1).device_ids, (std::vector<std::string>{"1:1", "1:2"}));
  const auto b = parse_roster_overrides(nlohmann::json::parse(R"(["1:2", "2:5", "1:1"])"));
  EXPECT_EQ(b.at(2).device_ids, (std::vector<std::string>{"2:5"}));
  EXPECT_EQ(code_of([] { parse_roster_overrides(nlohmann::json::parse("3")); }), ErrorCode::ConfigInvalid);
}

TEST(DeriveRosters, OnlyLoadReportingPlugs) {
  std::vector<SensorReading> rs = {load("2013-10-01 00:00:02", "1:2", 5.5), load("2013-10-01 00:00:02", "2:1", 0, 2)};
  SensorReading w = rs[0];
  w.type = MeasurementType::Work;
  w.sensor_id = "1:9";
  rs.push_back(w);
  const auto m = derive_rosters(rs);
  EXPECT_EQ(m.size(), 2u);
  EXPECT_EQ(m.at(1).device_ids, std::vector<std::string>{"1:2"});
}
