#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/matrix.hpp"
#include "loadcast/time.hpp"
#include "loadcast/windowing.hpp"

namespace loadcast {

enum class FeatureId {
  Summed,
  Hour,
  Wday,
  Min,
  Max,
  Mean,
  Variance,
  Stddev,
  Skewness,
  Kurtosis,
  Momentum,
  WillR,
  Consum,
  First,
  Last,
  State,
};

inline constexpr std::size_t kFeatureCount = 16;

enum class FeatureScope { Household, PerDevice };

constexpr FeatureScope scope_of(FeatureId f) {
  return f <= FeatureId::Wday ? FeatureScope::Household : FeatureScope::PerDevice;
}

inline constexpr std::array<FeatureId, kFeatureCount> kAllFeatures = {
    FeatureId::Summed,   FeatureId::Hour,     FeatureId::Wday,     FeatureId::Min,
    FeatureId::Max,      FeatureId::Mean,     FeatureId::Variance, FeatureId::Stddev,
    FeatureId::Skewness, FeatureId::Kurtosis, FeatureId::Momentum, FeatureId::WillR,
    FeatureId::Consum,   FeatureId::First,    FeatureId::Last,     FeatureId::State};

constexpr std::string_view feature_name(FeatureId f) {
  switch (f) {
    case FeatureId::Summed: return "summed";
    case FeatureId::Hour: return "hour";
    case FeatureId::Wday: return "wday";
    case FeatureId::Min: return "min";
    case FeatureId::Max: return "max";
    case FeatureId::Mean: return "mean";
    case FeatureId::Variance: return "variance";
    case FeatureId::Stddev: return "stddev";
    case FeatureId::Skewness: return "skewness";
    case FeatureId::Kurtosis: return "kurtosis";
    case FeatureId::Momentum: return "moum";
    case FeatureId::WillR: return "willr";
    case FeatureId::Consum: return "consum";
    case FeatureId::First: return "first";
    case FeatureId::Last: return "last";
    case FeatureId::State: return "state";
  }
  return "?";
}

inline std::optional<FeatureId> parse_feature(std::string_view s) {
  const std::string n = [&] {
    std::string out(detail::trim(s));
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
  }();
  for (const auto f : kAllFeatures) {
    if (feature_name(f) == n) return f;
  }
  static const std::map<std::string, FeatureId, std::less<>> aliases = {
      {"sum", FeatureId::Summed},       {"weekday", FeatureId::Wday},
      {"momentum", FeatureId::Momentum}, {"williamsr", FeatureId::WillR},
      {"will-r", FeatureId::WillR},     {"lastvalue", FeatureId::Last},
      {"maxvalue", FeatureId::Max},     {"max-value", FeatureId::Max},
      {"williamsrvalue", FeatureId::WillR}, {"std", FeatureId::Stddev},
      {"var", FeatureId::Variance},     {"skew", FeatureId::Skewness},
      {"kurt", FeatureId::Kurtosis},
  };
  const auto it = aliases.find(n);
  if (it == aliases.end()) return std::nullopt;
  return it->second;
}

// Non-empty feature subset, kept in canonical order.
class FeatureCombination {
 public:
  FeatureCombination() = default;
  explicit FeatureCombination(std::vector<FeatureId> features) : features_(std::move(features)) {
    std::sort(features_.begin(), features_.end());
    features_.erase(std::unique(features_.begin(), features_.end()), features_.end());
    if (features_.empty()) fail(ErrorCode::InvalidArgument, "feature combination is empty");
  }

  static FeatureCombination complex() {
    return FeatureCombination({FeatureId::Summed, FeatureId::Wday, FeatureId::Last, FeatureId::Max,
                               FeatureId::WillR});
  }
  static FeatureCombination minimal() {
    return FeatureCombination({FeatureId::Summed, FeatureId::Wday});
  }

  // "complex", "minimal", or names separated by ',' or '-'.
  static FeatureCombination parse(std::string_view text) {
    const auto t = detail::trim(text);
    if (t == "complex" || t == "cpx") return complex();
    if (t == "minimal" || t == "min") return minimal();
    std::vector<FeatureId> out;
    const char sep = t.find(',') != std::string_view::npos ? ',' : '-';
    const auto parts = detail::split_fields(t, sep);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (parts[i].empty()) continue;
      auto f = parse_feature(parts[i]);
      if (!f && sep == '-' && i + 1 < parts.size()) {  // names such as "will-r" contain the separator
        f = parse_feature(std::string(parts[i]) + "-" + std::string(parts[i + 1]));
        if (f) ++i;
      }
      if (!f) fail(ErrorCode::ConfigInvalid, "unknown feature '" + std::string(parts[i]) + "'");
      out.push_back(*f);
    }
    return FeatureCombination(std::move(out));
  }

  const std::vector<FeatureId>& features() const { return features_; }
  bool contains(FeatureId f) const {
    return std::binary_search(features_.begin(), features_.end(), f);
  }
  std::size_t size() const { return features_.size(); }

  std::string name() const {
    std::string out;
    for (const auto f : features_) {
      if (!out.empty()) out += '-';
      out += feature_name(f);
    }
    return out;
  }

  std::vector<FeatureId> household_features() const {
    std::vector<FeatureId> out;
    for (const auto f : features_) {
      if (scope_of(f) == FeatureScope::Household) out.push_back(f);
    }
    return out;
  }
  std::vector<FeatureId> device_features() const {
    std::vector<FeatureId> out;
    for (const auto f : features_) {
      if (scope_of(f) == FeatureScope::PerDevice) out.push_back(f);
    }
    return out;
  }

  friend bool operator==(const FeatureCombination&, const FeatureCombination&) = default;
  friend auto operator<=>(const FeatureCombination&, const FeatureCombination&) = default;

 private:
  std::vector<FeatureId> features_;
};

struct ColumnDescriptor {
  FeatureId feature;
  std::string scope;  // "household" or a sensor id

  friend bool operator==(const ColumnDescriptor&, const ColumnDescriptor&) = default;
};

// Household columns first, then each roster device in order with its
// selected per-device features.
class FeatureLayout {
 public:
  FeatureLayout(FeatureCombination combo, const HouseholdRoster& roster)
      : combo_(std::move(combo)),
        household_(combo_.household_features()),
        device_(combo_.device_features()),
        devices_(roster.device_ids) {
    for (const auto f : household_) columns_.push_back({f, "household"});
    for (const auto& id : devices_) {
      for (const auto f : device_) columns_.push_back({f, id});
    }
  }

  const FeatureCombination& combination() const { return combo_; }
  const std::vector<ColumnDescriptor>& columns() const { return columns_; }
  std::size_t width() const { return columns_.size(); }
  const std::vector<FeatureId>& household() const { return household_; }
  const std::vector<FeatureId>& device() const { return device_; }
  std::size_t device_count() const { return devices_.size(); }

  friend bool operator==(const FeatureLayout& a, const FeatureLayout& b) {
    return a.columns_ == b.columns_;
  }

 private:
  FeatureCombination combo_;
  std::vector<FeatureId> household_;
  std::vector<FeatureId> device_;
  std::vector<std::string> devices_;
  std::vector<ColumnDescriptor> columns_;
};

// Readings of one device inside `iv`. An empty interval holds the last known
// value; with no value ever seen the series is {0}.
inline std::vector<double> device_series(const HistoricWindow& window, std::size_t device,
                                         const Interval& iv) {
  const auto [lo, hi] = window.range(device, iv);
  std::vector<double> out;
  if (lo != hi) {
    out.reserve(static_cast<std::size_t>(hi - lo));
    for (auto it = lo; it != hi; ++it) out.push_back(it->watts);
    return out;
  }
  out.push_back(window.held_before(device, iv.start).value_or(0.0));
  return out;
}

inline std::vector<std::vector<double>> household_series(const HistoricWindow& window,
                                                         const Interval& iv) {
  std::vector<std::vector<double>> out;
  out.reserve(window.roster().size());
  for (std::size_t d = 0; d < window.roster().size(); ++d) out.push_back(device_series(window, d, iv));
  return out;
}

// Moments of a watt series. Skewness and kurtosis are the bias-uncorrected
// ratios m3/m2^1.5 and m4/m2^2, both 0 for a flat series.
struct SeriesStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double kurtosis = 0.0;
  double first = 0.0;
  double last = 0.0;
};

inline SeriesStats series_stats(std::span<const double> x) {
  if (x.empty()) fail(ErrorCode::InvalidArgument, "empty series");
  SeriesStats s;
  s.first = x.front();
  s.last = x.back();
  s.min = x.front();
  s.max = x.front();
  double sum = 0.0;
  for (const double v : x) {
    sum += v;
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
  }
  const double n = static_cast<double>(x.size());
  s.mean = sum / n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (const double v : x) {
    const double d = v - s.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  s.variance = m2;
  if (m2 > 0.0) {
    s.skewness = m3 / std::pow(m2, 1.5);
    s.kurtosis = m4 / (m2 * m2);
  }
  return s;
}

// %R = (max - last) / (max - min) * -100, defined as 0 for a flat window.
inline double williams_r(double min, double max, double last) {
  if (max == min) return 0.0;
  return (max - last) / (max - min) * -100.0 + 0.0;
}

inline double momentum(double first, double last) { return last - first; }

inline double consumption_kwh(double mean_watts, Seconds duration) {
  return mean_watts * to_hours(duration) / 1000.0;
}

inline double device_feature(FeatureId f, const SeriesStats& s, Seconds duration) {
  switch (f) {
    case FeatureId::Min: return s.min;
    case FeatureId::Max: return s.max;
    case FeatureId::Mean: return s.mean;
    case FeatureId::Variance: return s.variance;
    case FeatureId::Stddev: return std::sqrt(s.variance);
    case FeatureId::Skewness: return s.skewness;
    case FeatureId::Kurtosis: return s.kurtosis;
    case FeatureId::Momentum: return momentum(s.first, s.last);
    case FeatureId::WillR: return williams_r(s.min, s.max, s.last);
    case FeatureId::Consum: return consumption_kwh(s.mean, duration);
    case FeatureId::First: return s.first;
    case FeatureId::Last: return s.last;
    case FeatureId::State: return s.last > 0.0 ? 1.0 : 0.0;
    default: break;
  }
  fail(ErrorCode::InvalidArgument, std::string(feature_name(f)) + " is not a per-device feature");
}

inline std::vector<double> extract_device_features(std::span<const double> series, const Interval& iv,
                                                   std::span<const FeatureId> which) {
  const SeriesStats s = series_stats(series);
  std::vector<double> out;
  out.reserve(which.size());
  for (const auto f : which) out.push_back(device_feature(f, s, iv.duration()));
  return out;
}

inline std::vector<double> extract_household_features(const std::vector<std::vector<double>>& series,
                                                      const Interval& iv,
                                                      std::span<const FeatureId> which) {
  std::vector<double> out;
  out.reserve(which.size());
  for (const auto f : which) {
    switch (f) {
      case FeatureId::Summed: {
        double total = 0.0;
        for (const auto& s : series) total += series_stats(s).mean;
        out.push_back(total);
        break;
      }
      case FeatureId::Hour: out.push_back(hour_of_day(iv.end)); break;
      case FeatureId::Wday: out.push_back(weekday_monday0(iv.end)); break;
      default:
        fail(ErrorCode::InvalidArgument, std::string(feature_name(f)) + " is not a household feature");
    }
  }
  return out;
}

// Aggregated household consumption: the sum of per-device consumptions.
inline double interval_kwh(const std::vector<std::vector<double>>& series, Seconds duration) {
  double kwh = 0.0;
  for (const auto& s : series) kwh += consumption_kwh(series_stats(s).mean, duration);
  return kwh;
}

inline double extract_target(const HistoricWindow& window, const Interval& target) {
  if (target.end > window.end()) {
    fail(ErrorCode::FutureTarget, "target interval ends at " + format_timestamp(target.end) +
                                      " beyond observed data");
  }
  return interval_kwh(household_series(window, target), target.duration());
}

struct FeatureRow {
  std::vector<double> values;
  double consum_kwh = 0.0;  // household consumption over the base interval
};

inline FeatureRow extract_row(const HistoricWindow& window, const Interval& base,
                              const FeatureLayout& layout) {
  const auto series = household_series(window, base);
  FeatureRow row;
  row.values.reserve(layout.width());
  const auto hh = extract_household_features(series, base, layout.household());
  row.values.insert(row.values.end(), hh.begin(), hh.end());
  for (const auto& s : series) {
    const auto dv = extract_device_features(s, base, layout.device());
    row.values.insert(row.values.end(), dv.begin(), dv.end());
  }
  row.consum_kwh = interval_kwh(series, base.duration());
  return row;
}

struct TrainingSet {
  Matrix x;
  std::vector<double> y;
  std::vector<IntervalPair> pairs;

  std::size_t rows() const { return y.size(); }
};

// Memoized rows keyed by base start. Rows are pure functions of retained
// data, so reuse across retrains is exact while t0 stays inside the window.
class TrainingRowCache {
 public:
  struct Entry {
    FeatureRow row;
    std::optional<double> target;
  };

  Entry& at(Timestamp t0) { return entries_[t0]; }

  void evict_before(Timestamp t0) { entries_.erase(entries_.begin(), entries_.lower_bound(t0)); }

  std::size_t size() const { return entries_.size(); }
  void clear() { entries_.clear(); }

 private:
  std::map<Timestamp, Entry> entries_;
};

// One row per pair; trailing pairs whose target is not yet observed are dropped.
inline TrainingSet build_training_matrix(const HistoricWindow& window,
                                         std::span<const IntervalPair> pairs,
                                         const FeatureLayout& layout,
                                         TrainingRowCache* cache = nullptr) {
  TrainingSet set;
  set.x = Matrix(0, layout.width());
  set.x.reserve_rows(pairs.size());
  for (const auto& p : pairs) {
    if (p.target.end > window.end()) break;
    if (cache) {
      auto& e = cache->at(p.t0());
      if (e.row.values.empty()) e.row = extract_row(window, p.base, layout);
      if (!e.target) e.target = extract_target(window, p.target);
      set.x.append_row(e.row.values);
      set.y.push_back(*e.target);
    } else {
      set.x.append_row(extract_row(window, p.base, layout).values);
      set.y.push_back(extract_target(window, p.target));
    }
    set.pairs.push_back(p);
  }
  return set;
}

}  // namespace loadcast
