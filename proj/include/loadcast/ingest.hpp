#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/time.hpp"

namespace loadcast {

// Smart plug measurements followed by multi-sensor measurements.
enum class MeasurementType {
  Load,
  Frequency,
  OnState,
  Voltage,
  Current,
  Work,
  Motion,
  BatteryState,
  Brightness,
  BatteryVoltage,
  Temperature,
};

constexpr bool is_smart_plug_type(MeasurementType t) { return t <= MeasurementType::Work; }

// Multi-sensor records are accepted and counted but never feed prediction.
constexpr bool is_ignorable_type(MeasurementType t) { return !is_smart_plug_type(t); }

constexpr std::string_view type_name(MeasurementType t) {
  switch (t) {
    case MeasurementType::Load: return "LOAD";
    case MeasurementType::Frequency: return "FREQUENCY";
    case MeasurementType::OnState: return "STATE";
    case MeasurementType::Voltage: return "VOLTAGE";
    case MeasurementType::Current: return "CURRENT";
    case MeasurementType::Work: return "WORK";
    case MeasurementType::Motion: return "MOTION";
    case MeasurementType::BatteryState: return "BATTERY_STATE";
    case MeasurementType::Brightness: return "BRIGHTNESS";
    case MeasurementType::BatteryVoltage: return "BATTERY_VOLTAGE";
    case MeasurementType::Temperature: return "TEMPERATURE";
  }
  return "?";
}

inline std::optional<MeasurementType> parse_type(std::string_view s) {
  std::string up(s);
  for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  static const std::unordered_map<std::string, MeasurementType> names = {
      {"LOAD", MeasurementType::Load},
      {"POWER", MeasurementType::Load},
      {"FREQUENCY", MeasurementType::Frequency},
      {"STATE", MeasurementType::OnState},
      {"ON_STATE", MeasurementType::OnState},
      {"ONSTATE", MeasurementType::OnState},
      {"VOLTAGE", MeasurementType::Voltage},
      {"CURRENT", MeasurementType::Current},
      {"WORK", MeasurementType::Work},
      {"MOTION", MeasurementType::Motion},
      {"BATTERY_STATE", MeasurementType::BatteryState},
      {"BATTERYSTATE", MeasurementType::BatteryState},
      {"BRIGHTNESS", MeasurementType::Brightness},
      {"BATTERY_VOLTAGE", MeasurementType::BatteryVoltage},
      {"BATTERYVOLTAGE", MeasurementType::BatteryVoltage},
      {"TEMPERATURE", MeasurementType::Temperature},
  };
  const auto it = names.find(up);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

struct SensorReading {
  Timestamp ts{};
  MeasurementType type = MeasurementType::Load;
  double value = 0.0;
  std::string unit;
  int house_id = 0;
  std::string mac;
  std::string sensor_id;

  bool ignorable() const { return is_ignorable_type(type); }

  friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

// Total order used whenever readings are merged: time first, then sensor id.
inline bool reading_order(const SensorReading& a, const SensorReading& b) {
  if (a.ts != b.ts) return a.ts < b.ts;
  return a.sensor_id < b.sensor_id;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' ||
                        s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep = ',') {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, pos - start)));
    start = pos + 1;
  }
  return out;
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T v{};
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_number(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace detail

// Parses one record "TS,Type,Value,Unit,Houseid,Mac,Sensor_id,Year,Month".
inline SensorReading parse_reading(std::string_view line) {
  const auto f = detail::split_fields(line);
  if (f.size() != 9) {
    fail(ErrorCode::MalformedRecord, "expected 9 fields, got " + std::to_string(f.size()));
  }
  SensorReading r;
  const auto ts = parse_timestamp(f[0]);
  if (!ts) fail(ErrorCode::MalformedRecord, "bad timestamp '" + std::string(f[0]) + "'");
  r.ts = *ts;

  const auto type = parse_type(f[1]);
  if (!type) fail(ErrorCode::UnknownType, "unknown measurement type '" + std::string(f[1]) + "'");
  r.type = *type;

  const auto value_text = detail::upper(f[2]);
  if (r.type == MeasurementType::OnState && (value_text == "ON" || value_text == "OFF")) {
    r.value = value_text == "ON" ? 1.0 : 0.0;
  } else if (r.type == MeasurementType::BatteryState && (value_text == "OK" || value_text == "LOW")) {
    r.value = value_text == "OK" ? 1.0 : 0.0;
  } else {
    const auto v = detail::parse_number<double>(f[2]);
    if (!v || !std::isfinite(*v)) {
      fail(ErrorCode::MalformedRecord, "bad value '" + std::string(f[2]) + "'");
    }
    r.value = *v;
  }
  if (r.type == MeasurementType::Load && r.value < 0.0) {
    fail(ErrorCode::MalformedRecord, "negative load");
  }
  r.unit = std::string(f[3]);

  const auto house = detail::parse_number<int>(f[4]);
  if (!house) fail(ErrorCode::MalformedRecord, "bad house id '" + std::string(f[4]) + "'");
  r.house_id = *house;
  r.mac = std::string(f[5]);
  r.sensor_id = std::string(f[6]);
  const auto colon = r.sensor_id.find(':');
  if (colon == std::string::npos || r.sensor_id.substr(0, colon) != std::to_string(r.house_id)) {
    fail(ErrorCode::MalformedRecord,
         "sensor id '" + r.sensor_id + "' does not belong to house " + std::to_string(r.house_id));
  }

  const auto year = detail::parse_number<int>(f[7]);
  const auto month = detail::parse_number<unsigned>(f[8]);
  if (!year || !month) fail(ErrorCode::MalformedRecord, "bad year/month fields");
  if (*year != year_of(r.ts) || *month != month_of(r.ts)) {
    fail(ErrorCode::InconsistentRedundancy, "year/month fields disagree with timestamp " +
                                                format_timestamp(r.ts));
  }
  return r;
}

inline std::string format_value(const SensorReading& r) {
  if (r.type == MeasurementType::OnState) return r.value != 0.0 ? "ON" : "OFF";
  if (r.type == MeasurementType::BatteryState) return r.value != 0.0 ? "OK" : "LOW";
  return detail::format_number(r.value);
}

inline std::string format_reading(const SensorReading& r) {
  std::string out = format_timestamp(r.ts);
  out += ',';
  out += type_name(r.type);
  out += ',';
  out += format_value(r);
  out += ',';
  out += r.unit;
  out += ',';
  out += std::to_string(r.house_id);
  out += ',';
  out += r.mac;
  out += ',';
  out += r.sensor_id;
  out += ',';
  out += std::to_string(year_of(r.ts));
  out += ',';
  out += std::to_string(month_of(r.ts));
  return out;
}

inline bool is_header_line(std::string_view line) {
  const auto f = detail::split_fields(line);
  return !f.empty() && detail::upper(f[0]) == "TS";
}

inline constexpr std::string_view kLivedHeader = "TS,Type,Value,Unit,Houseid,Mac,Sensor_id,Year,Month";

// Tracks the WORK counter per sensor; a decrease is a data-quality violation.
class WorkMonotonicityChecker {
 public:
  bool observe(const SensorReading& r) {
    if (r.type != MeasurementType::Work) return true;
    auto [it, inserted] = last_.try_emplace(r.sensor_id, r.value);
    if (inserted) return true;
    if (r.value < it->second) {
      ++violations_;
      it->second = r.value;
      return false;
    }
    it->second = r.value;
    return true;
  }

  std::size_t violations() const { return violations_; }

 private:
  std::unordered_map<std::string, double> last_;
  std::size_t violations_ = 0;
};

struct HouseholdRoster {
  int house_id = 0;
  std::vector<std::string> device_ids;  // sorted, unique

  std::size_t size() const { return device_ids.size(); }

  std::optional<std::size_t> index_of(std::string_view sensor_id) const {
    const auto it = std::lower_bound(device_ids.begin(), device_ids.end(), sensor_id);
    if (it == device_ids.end() || *it != sensor_id) return std::nullopt;
    return static_cast<std::size_t>(it - device_ids.begin());
  }
};

inline HouseholdRoster make_roster(int house_id, std::vector<std::string> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.empty()) {
    fail(ErrorCode::InvalidArgument, "roster for house " + std::to_string(house_id) + " is empty");
  }
  const auto prefix = std::to_string(house_id) + ":";
  for (const auto& id : ids) {
    if (id.rfind(prefix, 0) != 0) {
      fail(ErrorCode::InvalidArgument, "device '" + id + "' is not in house " + std::to_string(house_id));
    }
  }
  return HouseholdRoster{house_id, std::move(ids)};
}

// Rosters from the smart plugs that reported LOAD at least once.
inline std::map<int, HouseholdRoster> derive_rosters(std::span<const SensorReading> readings) {
  std::map<int, std::vector<std::string>> ids;
  for (const auto& r : readings) {
    if (r.type == MeasurementType::Load) ids[r.house_id].push_back(r.sensor_id);
  }
  std::map<int, HouseholdRoster> out;
  for (auto& [house, list] : ids) out.emplace(house, make_roster(house, std::move(list)));
  return out;
}

enum class DayQuality { Ok, GapExceeded, MissingDevice };

constexpr std::string_view to_string(DayQuality q) {
  switch (q) {
    case DayQuality::Ok: return "OK";
    case DayQuality::GapExceeded: return "GAP_EXCEEDED";
    case DayQuality::MissingDevice: return "MISSING_DEVICE";
  }
  return "?";
}

struct DayQualityVerdict {
  CalendarDay day{};
  bool usable = false;
  DayQuality reason = DayQuality::MissingDevice;
};

inline constexpr Seconds kDefaultMaxGap = std::chrono::hours{1};

// `readings` are the LOAD readings of one household on `day`, sorted by ts.
// The day boundaries count as reading instants, so a device that starts
// reporting late or stops early also exceeds the gap.
inline DayQualityVerdict assess_day_quality(CalendarDay day, std::span<const SensorReading> readings,
                                            const HouseholdRoster& roster,
                                            Seconds max_gap = kDefaultMaxGap) {
  if (max_gap <= Seconds{0}) fail(ErrorCode::InvalidArgument, "max_gap must be positive");
  const Timestamp day_start{day};
  const Timestamp day_end = day_start + Days{1};
  std::vector<std::optional<Timestamp>> last(roster.size());
  bool gap = false;
  for (const auto& r : readings) {
    if (r.type != MeasurementType::Load) continue;
    const auto idx = roster.index_of(r.sensor_id);
    if (!idx) continue;
    const Timestamp prev = last[*idx].value_or(day_start);
    if (r.ts - prev > max_gap) gap = true;
    last[*idx] = r.ts;
  }
  for (const auto& l : last) {
    if (!l) return {day, false, DayQuality::MissingDevice};
  }
  for (const auto& l : last) {
    if (day_end - *l > max_gap) gap = true;
  }
  if (gap) return {day, false, DayQuality::GapExceeded};
  return {day, true, DayQuality::Ok};
}

// One verdict per calendar day from the first to the last reading's day.
inline std::vector<DayQualityVerdict> assess_days(std::span<const SensorReading> sorted_readings,
                                                  const HouseholdRoster& roster,
                                                  Seconds max_gap = kDefaultMaxGap) {
  std::vector<DayQualityVerdict> out;
  if (sorted_readings.empty()) return out;
  auto it = sorted_readings.begin();
  const CalendarDay first = day_of(sorted_readings.front().ts);
  const CalendarDay last = day_of(sorted_readings.back().ts);
  for (CalendarDay d = first; d <= last; d += Days{1}) {
    auto end = it;
    while (end != sorted_readings.end() && day_of(end->ts) == d) ++end;
    out.push_back(assess_day_quality(d, std::span<const SensorReading>(&*it, end - it), roster, max_gap));
    it = end;
  }
  return out;
}

struct EvaluationRange {
  CalendarDay first_day{};
  CalendarDay last_day{};
  int total = 0;
  int skipped = 0;
  int used = 0;
  std::vector<CalendarDay> skipped_days;

  bool contains(CalendarDay d) const { return d >= first_day && d <= last_day; }
  bool is_skipped(CalendarDay d) const {
    return std::binary_search(skipped_days.begin(), skipped_days.end(), d);
  }
};

// The range spans first..last usable day; calendar days between them that are
// unusable or absent from `verdicts` count as skipped.
inline EvaluationRange select_evaluation_range(std::span<const DayQualityVerdict> verdicts,
                                               int min_days) {
  if (min_days < 1) fail(ErrorCode::InvalidArgument, "min_days must be >= 1");
  std::vector<DayQualityVerdict> sorted(verdicts.begin(), verdicts.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.day < b.day; });
  std::vector<CalendarDay> usable;
  for (const auto& v : sorted) {
    if (v.usable && (usable.empty() || usable.back() != v.day)) usable.push_back(v.day);
  }
  if (usable.empty() || static_cast<int>(usable.size()) < min_days) {
    fail(ErrorCode::InsufficientData, std::to_string(usable.size()) + " usable days, need " +
                                          std::to_string(min_days));
  }
  EvaluationRange range;
  range.first_day = usable.front();
  range.last_day = usable.back();
  range.total = static_cast<int>((range.last_day - range.first_day).count()) + 1;
  range.used = static_cast<int>(usable.size());
  range.skipped = range.total - range.used;
  std::size_t u = 0;
  for (CalendarDay d = range.first_day; d <= range.last_day; d += Days{1}) {
    if (u < usable.size() && usable[u] == d) {
      ++u;
    } else {
      range.skipped_days.push_back(d);
    }
  }
  return range;
}

}  // namespace loadcast
