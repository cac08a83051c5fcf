#pragma once

#include <chrono>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/evaluation/walk_forward.hpp"
#include "loadcast/time.hpp"

namespace loadcast {

inline constexpr std::size_t kStabilityWeeks = 8;

struct WeeklyMape {
  Timestamp week_start{};
  double mape = 0.0;
};

struct HouseholdStability {
  int house_id = 0;
  std::vector<WeeklyMape> weeks;
  std::vector<double> run_stddevs;  // one per run of 8 subsequent weeks
  double stddev = 0.0;              // mean over runs
};

struct StabilityReport {
  std::vector<HouseholdStability> households;
  double mean_stddev = 0.0;
};

// Sample stddev of every run of `run` consecutive values.
inline std::vector<double> rolling_stddevs(std::span<const double> weekly, std::size_t run = kStabilityWeeks) {
  std::vector<double> out;
  if (weekly.size() < run) return out;
  for (std::size_t i = 0; i + run <= weekly.size(); ++i) out.push_back(sample_stddev(weekly.subspan(i, run)));
  return out;
}

// Weekly MAPE per ISO week; partial boundary weeks (not covered from the
// first to the last prediction instant) are dropped.
inline std::vector<WeeklyMape> weekly_mapes(std::span<const ForecastRecord> records, Seconds increment) {
  std::map<Timestamp, std::pair<std::vector<double>, std::vector<double>>> weeks;
  std::optional<Timestamp> lo, hi;
  for (const auto& r : records) {
    if (!r.actual) continue;
    auto& [a, f] = weeks[iso_week_start(r.t_predict)];
    a.push_back(*r.actual);
    f.push_back(r.forecast);
    if (!lo || r.t_predict < *lo) lo = r.t_predict;
    if (!hi || r.t_predict > *hi) hi = r.t_predict;
  }
  std::vector<WeeklyMape> out;
  for (const auto& [start, series] : weeks) {
    const Timestamp end = start + Days{7};
    if (*lo > start || *hi < end - increment) continue;
    try {
      out.push_back(WeeklyMape{start, mape(series.first, series.second).percent});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllZeroActuals) throw;
    }
  }
  return out;
}

// Runs only span calendar-adjacent weeks.
inline HouseholdStability household_stability(int house_id, std::vector<WeeklyMape> weeks) {
  HouseholdStability h{house_id, std::move(weeks), {}, 0.0};
  std::size_t seg = 0;
  for (std::size_t i = 1; i <= h.weeks.size(); ++i) {
    if (i < h.weeks.size() && h.weeks[i].week_start - h.weeks[i - 1].week_start == Days{7}) continue;
    std::vector<double> v;
    for (std::size_t k = seg; k < i; ++k) v.push_back(h.weeks[k].mape);
    const auto s = rolling_stddevs(v);
    h.run_stddevs.insert(h.run_stddevs.end(), s.begin(), s.end());
    seg = i;
  }
  if (h.run_stddevs.empty()) {
    fail(ErrorCode::InsufficientWeeks, "household " + std::to_string(house_id) + " has fewer than " +
                                           std::to_string(kStabilityWeeks) + " consecutive complete weeks");
  }
  h.stddev = mean_of(h.run_stddevs);
  return h;
}

// Records of several households are split by house_id.
inline StabilityReport weekly_stability(std::span<const ForecastRecord> records,
                                        Seconds increment = Seconds{std::chrono::minutes{15}}) {
  std::map<int, std::vector<ForecastRecord>> by_house;
  for (const auto& r : records) by_house[r.house_id].push_back(r);
  if (by_house.empty()) fail(ErrorCode::InsufficientWeeks, "no forecast records");
  StabilityReport rep;
  std::vector<double> per_house;
  for (const auto& [house, recs] : by_house) {
    rep.households.push_back(household_stability(house, weekly_mapes(recs, increment)));
    per_house.push_back(rep.households.back().stddev);
  }
  rep.mean_stddev = mean_of(per_house);
  return rep;
}

}  // namespace loadcast
