#pragma once

#include <algorithm>
#include <chrono>
#include <deque>
#include <optional>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/time.hpp"

namespace loadcast {

inline constexpr Seconds kDefaultHistorySpan{Days{14}};

struct Sample {
  Timestamp ts{};
  double watts = 0.0;
};

// Half-open [start, end).
struct Interval {
  Timestamp start{};
  Timestamp end{};

  Seconds duration() const { return end - start; }
  bool contains(Timestamp t) const { return t >= start && t < end; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

struct MicroWindowSpec {
  Seconds increment{Minutes{15}};
  Seconds base_span{Minutes{60}};
  Seconds horizon{Minutes{60}};

  void validate() const {
    if (increment <= Seconds{0}) fail(ErrorCode::InvalidArgument, "increment must be > 0");
    if (base_span <= Seconds{0}) fail(ErrorCode::InvalidArgument, "base_span must be > 0");
    if (horizon <= Seconds{0}) fail(ErrorCode::InvalidArgument, "horizon must be > 0");
  }
};

// Horizons (minutes) evaluated in the reference experiments.
inline const std::vector<int>& standard_horizons_min() {
  static const std::vector<int> h = {15, 30, 60, 90, 120, 360, 720, 1440};
  return h;
}

struct IntervalPair {
  Interval base;
  Interval target;
  bool target_is_future = false;

  Timestamp t0() const { return base.start; }
  friend bool operator==(const IntervalPair&, const IntervalPair&) = default;
};

inline IntervalPair make_pair_at(Timestamp t0, const MicroWindowSpec& spec) {
  const Interval base{t0, t0 + spec.base_span};
  return IntervalPair{base, Interval{base.end, base.end + spec.horizon}, false};
}

enum class AdvanceStatus { Appended, LateArrival, Ignored };

// Time-bounded LOAD history of one household, one ts-ordered buffer per
// roster device. Readings older than (newest instant - history_span) are
// evicted; the last evicted value per device is kept so sample-and-hold
// lookups stay exact after eviction.
class HistoricWindow {
 public:
  explicit HistoricWindow(HouseholdRoster roster, Seconds history_span = kDefaultHistorySpan)
      : roster_(std::move(roster)),
        history_span_(history_span),
        buffers_(roster_.size()),
        evicted_hold_(roster_.size()) {
    if (history_span_ <= Seconds{0}) fail(ErrorCode::InvalidArgument, "history_span must be > 0");
  }

  AdvanceStatus advance(const SensorReading& r) {
    if (r.type != MeasurementType::Load || r.house_id != roster_.house_id) {
      ++ignored_;
      return AdvanceStatus::Ignored;
    }
    const auto idx = roster_.index_of(r.sensor_id);
    if (!idx) {
      ++ignored_;
      return AdvanceStatus::Ignored;
    }
    if (newest_ && r.ts < *newest_) {
      ++late_arrivals_;
      return AdvanceStatus::LateArrival;
    }
    if (!first_seen_) first_seen_ = r.ts;
    newest_ = r.ts;
    buffers_[*idx].push_back(Sample{r.ts, r.value});
    ++size_;
    evict(r.ts - history_span_);
    return AdvanceStatus::Appended;
  }

  // Declares that every reading before `watermark` has been observed.
  void advance_to(Timestamp watermark) {
    if (watermark_ && watermark < *watermark_) return;
    watermark_ = watermark;
    evict(watermark - history_span_);
  }

  const HouseholdRoster& roster() const { return roster_; }
  Seconds history_span() const { return history_span_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  std::size_t late_arrivals() const { return late_arrivals_; }
  std::size_t ignored() const { return ignored_; }
  const std::deque<Sample>& samples(std::size_t device) const { return buffers_.at(device); }

  bool has_data() const { return first_seen_.has_value(); }

  // Observed-through instant.
  Timestamp end() const {
    Timestamp e = newest_.value_or(Timestamp{});
    if (watermark_ && *watermark_ > e) e = *watermark_;
    return e;
  }

  // Earliest instant from which every reading is still retained.
  Timestamp raw_start() const {
    Timestamp s = first_seen_.value_or(end());
    if (cutoff_ && *cutoff_ > s) s = *cutoff_;
    return s;
  }

  // Window start anchored on the increment grid.
  Timestamp start(Seconds grid) const { return ceil_to_grid(raw_start(), grid); }

  std::optional<Timestamp> oldest_retained() const {
    std::optional<Timestamp> out;
    for (const auto& b : buffers_) {
      if (!b.empty() && (!out || b.front().ts < *out)) out = b.front().ts;
    }
    return out;
  }

  std::optional<Timestamp> newest() const { return newest_; }

  // Value of the last reading strictly before t, if any is known.
  std::optional<double> held_before(std::size_t device, Timestamp t) const {
    const auto& b = buffers_.at(device);
    auto it = std::lower_bound(b.begin(), b.end(), t,
                               [](const Sample& s, Timestamp v) { return s.ts < v; });
    if (it != b.begin()) return std::prev(it)->watts;
    return evicted_hold_[device];
  }

  // Samples of `device` inside [iv.start, iv.end).
  std::pair<std::deque<Sample>::const_iterator, std::deque<Sample>::const_iterator> range(
      std::size_t device, const Interval& iv) const {
    const auto& b = buffers_.at(device);
    const auto cmp = [](const Sample& s, Timestamp v) { return s.ts < v; };
    auto lo = std::lower_bound(b.begin(), b.end(), iv.start, cmp);
    auto hi = std::lower_bound(lo, b.end(), iv.end, cmp);
    return {lo, hi};
  }

 private:
  void evict(Timestamp cutoff) {
    if (cutoff_ && cutoff <= *cutoff_) return;
    cutoff_ = cutoff;
    for (std::size_t d = 0; d < buffers_.size(); ++d) {
      auto& b = buffers_[d];
      while (!b.empty() && b.front().ts < cutoff) {
        evicted_hold_[d] = b.front().watts;
        b.pop_front();
        --size_;
      }
    }
  }

  HouseholdRoster roster_;
  Seconds history_span_;
  std::vector<std::deque<Sample>> buffers_;
  std::vector<std::optional<double>> evicted_hold_;
  std::optional<Timestamp> first_seen_;
  std::optional<Timestamp> newest_;
  std::optional<Timestamp> watermark_;
  std::optional<Timestamp> cutoff_;
  std::size_t size_ = 0;
  std::size_t late_arrivals_ = 0;
  std::size_t ignored_ = 0;
};

inline std::size_t micro_window_count(Seconds span, const MicroWindowSpec& spec) {
  const auto need = spec.base_span + spec.horizon;
  if (span < need) return 0;
  return static_cast<std::size_t>((span - need) / spec.increment) + 1;
}

// Pairs at t0 = start, start + increment, ... whose target ends by window end.
inline std::vector<IntervalPair> enumerate_micro_windows(Timestamp start, Timestamp end,
                                                         const MicroWindowSpec& spec) {
  spec.validate();
  if (end - start < spec.base_span + spec.horizon) {
    fail(ErrorCode::WindowTooShort, "window spans " + std::to_string((end - start).count()) +
                                        " s, need base + horizon");
  }
  std::vector<IntervalPair> out;
  out.reserve(micro_window_count(end - start, spec));
  for (Timestamp t0 = start; t0 + spec.base_span + spec.horizon <= end; t0 += spec.increment) {
    out.push_back(make_pair_at(t0, spec));
  }
  return out;
}

inline std::vector<IntervalPair> enumerate_micro_windows(const HistoricWindow& window,
                                                         const MicroWindowSpec& spec) {
  spec.validate();
  if (!window.has_data()) fail(ErrorCode::WindowTooShort, "window is empty");
  const Timestamp start = window.start(spec.increment);
  const Timestamp end = window.end();
  if (end < start) fail(ErrorCode::WindowTooShort, "window shorter than one increment");
  return enumerate_micro_windows(start, end, spec);
}

// The live base interval ending at `now`; its target lies in the future.
inline IntervalPair current_base(const HistoricWindow& window, const MicroWindowSpec& spec,
                                 Timestamp now) {
  spec.validate();
  if (!window.has_data() || now - spec.base_span < window.raw_start() || now > window.end()) {
    fail(ErrorCode::WindowTooShort, "window does not cover the base interval ending at " +
                                        format_timestamp(now));
  }
  IntervalPair p = make_pair_at(now - spec.base_span, spec);
  p.target_is_future = true;
  return p;
}

}  // namespace loadcast
