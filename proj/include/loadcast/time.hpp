#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

namespace loadcast {

// Wall-clock instant at one second resolution. Gateway timestamps carry no
// timezone, so they are kept as naive local time mapped onto sys_seconds.
using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;
using Minutes = std::chrono::minutes;
using Days = std::chrono::days;
using CalendarDay = std::chrono::sys_days;

namespace detail {

inline bool parse_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
  if (pos + n > s.size()) return false;
  int v = 0;
  for (std::size_t i = pos; i < pos + n; ++i) {
    const char c = s[i];
    if (c < '0' || c > '9') return false;
    v = v * 10 + (c - '0');
  }
  out = v;
  return true;
}

}  // namespace detail

// Parses exactly "YYYY-MM-DD HH:MM:SS".
inline std::optional<Timestamp> parse_timestamp(std::string_view s) {
  if (s.size() != 19 || s[4] != '-' || s[7] != '-' || s[10] != ' ' || s[13] != ':' ||
      s[16] != ':') {
    return std::nullopt;
  }
  int y = 0, mo = 0, d = 0, h = 0, mi = 0, se = 0;
  if (!detail::parse_digits(s, 0, 4, y) || !detail::parse_digits(s, 5, 2, mo) ||
      !detail::parse_digits(s, 8, 2, d) || !detail::parse_digits(s, 11, 2, h) ||
      !detail::parse_digits(s, 14, 2, mi) || !detail::parse_digits(s, 17, 2, se)) {
    return std::nullopt;
  }
  const std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{unsigned(mo)},
                                        std::chrono::day{unsigned(d)}};
  if (!ymd.ok() || h > 23 || mi > 59 || se > 59) return std::nullopt;
  return Timestamp{CalendarDay{ymd}} + std::chrono::hours{h} + Minutes{mi} + Seconds{se};
}

inline std::string format_timestamp(Timestamp ts) {
  const auto day = std::chrono::floor<Days>(ts);
  const std::chrono::year_month_day ymd{day};
  const std::chrono::hh_mm_ss hms{ts - day};
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u %02lld:%02lld:%02lld", int(ymd.year()),
                unsigned(ymd.month()), unsigned(ymd.day()),
                static_cast<long long>(hms.hours().count()),
                static_cast<long long>(hms.minutes().count()),
                static_cast<long long>(hms.seconds().count()));
  return buf;
}

inline std::string format_day(CalendarDay day) {
  const std::chrono::year_month_day ymd{day};
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(ymd.year()), unsigned(ymd.month()),
                unsigned(ymd.day()));
  return buf;
}

inline CalendarDay day_of(Timestamp ts) { return std::chrono::floor<Days>(ts); }

inline int year_of(Timestamp ts) { return int(std::chrono::year_month_day{day_of(ts)}.year()); }

inline unsigned month_of(Timestamp ts) {
  return unsigned(std::chrono::year_month_day{day_of(ts)}.month());
}

inline int hour_of_day(Timestamp ts) {
  return static_cast<int>(std::chrono::floor<std::chrono::hours>(ts - day_of(ts)).count());
}

// 0 = Monday ... 6 = Sunday.
inline int weekday_monday0(Timestamp ts) {
  return static_cast<int>(std::chrono::weekday{day_of(ts)}.iso_encoding()) - 1;
}

// Monday 00:00 of the ISO week containing ts.
inline Timestamp iso_week_start(Timestamp ts) {
  return Timestamp{day_of(ts) - Days{weekday_monday0(ts)}};
}

// Grid anchored at the Unix epoch, so 15 minute increments fall on :00/:15/:30/:45.
inline Timestamp floor_to_grid(Timestamp ts, Seconds step) {
  auto c = ts.time_since_epoch().count();
  const auto s = step.count();
  auto r = c % s;
  if (r < 0) r += s;
  return Timestamp{Seconds{c - r}};
}

inline Timestamp ceil_to_grid(Timestamp ts, Seconds step) {
  const auto f = floor_to_grid(ts, step);
  return f == ts ? f : f + step;
}

inline double to_hours(Seconds s) { return static_cast<double>(s.count()) / 3600.0; }

}  // namespace loadcast
