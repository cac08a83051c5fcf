#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include "loadcast/error.hpp"

namespace loadcast {

struct MapeResult {
  double percent = 0.0;
  std::size_t n = 0;                  // pairs that entered the mean
  std::size_t zero_actual_count = 0;  // pairs skipped because A_t == 0
};

namespace detail {

inline void check_series(std::span<const double> a, std::span<const double> f) {
  if (a.size() != f.size()) fail(ErrorCode::InvalidArgument, "actual and forecast lengths differ");
  if (a.empty()) fail(ErrorCode::InvalidArgument, "empty series");
}

}  // namespace detail

// Mean of |A - F| / A in percent over pairs with A != 0.
inline MapeResult mape(std::span<const double> actual, std::span<const double> forecast) {
  detail::check_series(actual, forecast);
  MapeResult r;
  double sum = 0.0;
  for (std::size_t t = 0; t < actual.size(); ++t) {
    if (actual[t] == 0.0) {
      ++r.zero_actual_count;
      continue;
    }
    sum += std::abs((actual[t] - forecast[t]) / actual[t]);
    ++r.n;
  }
  if (r.n == 0) fail(ErrorCode::AllZeroActuals, "every actual value is zero");
  r.percent = sum / static_cast<double>(r.n) * 100.0;
  return r;
}

// sqrt(sum (A - F)^2) / sqrt(sum A^2) in percent.
inline double nrmse(std::span<const double> actual, std::span<const double> forecast) {
  detail::check_series(actual, forecast);
  double err = 0.0, norm = 0.0;
  for (std::size_t t = 0; t < actual.size(); ++t) {
    const double d = actual[t] - forecast[t];
    err += d * d;
    norm += actual[t] * actual[t];
  }
  if (norm == 0.0) fail(ErrorCode::AllZeroActuals, "every actual value is zero");
  return std::sqrt(err) / std::sqrt(norm) * 100.0;
}

inline double mean_of(std::span<const double> x) {
  if (x.empty()) fail(ErrorCode::InvalidArgument, "mean of empty list");
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

// Standard deviation with the N-1 divisor.
inline double sample_stddev(std::span<const double> x) {
  if (x.size() < 2) fail(ErrorCode::InvalidArgument, "sample stddev needs at least 2 values");
  const double m = mean_of(x);
  double s = 0.0;
  for (const double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

// Midpoint average for even counts.
inline double median_of(std::vector<double> x) {
  if (x.empty()) fail(ErrorCode::InvalidArgument, "median of empty list");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  return n % 2 == 1 ? x[n / 2] : (x[n / 2 - 1] + x[n / 2]) / 2.0;
}

enum class Metric { Mape, Nrmse };

inline std::string_view metric_name(Metric m) { return m == Metric::Mape ? "mape" : "nrmse"; }

struct ErrorReport {
  int house_id = 0;
  std::string model;
  std::string combo;
  int horizon_min = 0;
  double mape = 0.0;   // percent, NaN when every actual was zero
  double nrmse = 0.0;  // percent, NaN when every actual was zero
  std::size_t n = 0;
  std::size_t zero_actual_count = 0;

  double value(Metric m) const { return m == Metric::Mape ? mape : nrmse; }
};

inline ErrorReport make_error_report(int house_id, std::string model, std::string combo, int horizon_min,
                                     std::span<const double> actual, std::span<const double> forecast) {
  ErrorReport r;
  r.house_id = house_id;
  r.model = std::move(model);
  r.combo = std::move(combo);
  r.horizon_min = horizon_min;
  r.n = actual.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  try {
    const auto m = mape(actual, forecast);
    r.mape = m.percent;
    r.zero_actual_count = m.zero_actual_count;
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllZeroActuals) throw;
    r.mape = nan;
    r.zero_actual_count = actual.size();
  }
  try {
    r.nrmse = nrmse(actual, forecast);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::AllZeroActuals) throw;
    r.nrmse = nan;
  }
  return r;
}

struct CellKey {
  std::string model;
  std::string combo;
  int horizon_min = 0;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
};

// Median over households per (model, combo, horizon); NaN entries are skipped
// and a cell with no finite value is omitted.
inline std::map<CellKey, double> median_across_households(std::span<const ErrorReport> reports,
                                                          Metric metric) {
  std::map<CellKey, std::vector<double>> cells;
  for (const auto& r : reports) {
    const double v = r.value(metric);
    if (std::isfinite(v)) cells[CellKey{r.model, r.combo, r.horizon_min}].push_back(v);
  }
  std::map<CellKey, double> out;
  for (auto& [k, v] : cells) out.emplace(k, median_of(std::move(v)));
  return out;
}

}  // namespace loadcast
