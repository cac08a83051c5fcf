#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/time.hpp"

namespace loadcast {

enum class ReplayMode { Batch, Paced };

using Sleeper = std::function<void(std::chrono::nanoseconds)>;

inline void real_sleep(std::chrono::nanoseconds d) {
  if (d > std::chrono::nanoseconds::zero()) std::this_thread::sleep_for(d);
}

// Emits a time-ordered log one reading per call. In paced mode the source
// waits (ts[i+1] - ts[i]) / speedup before every emission after the first.
class EventSource {
 public:
  explicit EventSource(std::vector<SensorReading> log, ReplayMode mode = ReplayMode::Batch,
                       double speedup = 1.0, Sleeper sleeper = real_sleep)
      : log_(std::move(log)), mode_(mode), speedup_(speedup), sleeper_(std::move(sleeper)) {
    if (mode_ == ReplayMode::Paced && !(speedup_ > 0.0)) {
      fail(ErrorCode::InvalidArgument, "speedup must be > 0");
    }
    std::stable_sort(log_.begin(), log_.end(), reading_order);
  }

  static EventSource batch(std::vector<SensorReading> log) { return EventSource(std::move(log)); }

  static EventSource paced(std::vector<SensorReading> log, double speedup, Sleeper sleeper = real_sleep) {
    return EventSource(std::move(log), ReplayMode::Paced, speedup, std::move(sleeper));
  }

  // nullopt is the end-of-stream marker; it is returned exactly once.
  std::optional<SensorReading> next() {
    if (ended_) fail(ErrorCode::SourceExhausted, "next() called after end of stream");
    if (cursor_ >= log_.size()) {
      ended_ = true;
      return std::nullopt;
    }
    if (mode_ == ReplayMode::Paced && cursor_ > 0) {
      const auto delta = log_[cursor_].ts - log_[cursor_ - 1].ts;
      const std::chrono::duration<double> wait{static_cast<double>(delta.count()) / speedup_};
      sleeper_(std::chrono::duration_cast<std::chrono::nanoseconds>(wait));
    }
    return log_[cursor_++];
  }

  ReplayMode mode() const { return mode_; }
  double speedup() const { return speedup_; }
  std::size_t cursor() const { return cursor_; }
  std::size_t size() const { return log_.size(); }
  bool ended() const { return ended_; }

 private:
  std::vector<SensorReading> log_;
  ReplayMode mode_;
  double speedup_;
  Sleeper sleeper_;
  std::size_t cursor_ = 0;
  bool ended_ = false;
};

struct SyntheticDevice {
  double base_watts = 0.0;
  double on_watts = 0.0;
  double on_probability_per_slot = 0.0;
  int slot_minutes = 60;
};

struct SyntheticProfile {
  int house_id = 1;
  Timestamp start = Timestamp{CalendarDay{std::chrono::year{2013} / 10 / 1}};
  std::vector<SyntheticDevice> devices;
  double noise_stddev = 0.0;
  std::uint64_t seed = 0;
};

inline constexpr Seconds kDefaultSamplePeriod{2};

inline void validate(const SyntheticProfile& p) {
  if (p.devices.empty()) fail(ErrorCode::InvalidProfile, "profile has no devices");
  if (p.noise_stddev < 0.0) fail(ErrorCode::InvalidProfile, "noise_stddev must be >= 0");
  for (const auto& d : p.devices) {
    if (d.base_watts < 0.0 || d.on_watts < 0.0) fail(ErrorCode::InvalidProfile, "negative watts");
    if (d.on_probability_per_slot < 0.0 || d.on_probability_per_slot > 1.0) {
      fail(ErrorCode::InvalidProfile, "on_probability_per_slot outside [0,1]");
    }
    if (d.slot_minutes <= 0) fail(ErrorCode::InvalidProfile, "slot_minutes must be > 0");
  }
}

inline std::string synthetic_sensor_id(int house_id, std::size_t device) {
  return std::to_string(house_id) + ":" + std::to_string(device + 1);
}

// LOAD readings for [start, start + span): one per device per sample period.
// Each device starts in its base state; at every slot boundary it toggles
// between base and on with probability on_probability_per_slot.
inline std::vector<SensorReading> generate_synthetic(const SyntheticProfile& profile, Seconds span,
                                                     Seconds sample_period = kDefaultSamplePeriod) {
  validate(profile);
  if (span <= Seconds{0}) fail(ErrorCode::InvalidArgument, "span must be > 0");
  if (sample_period <= Seconds{0}) fail(ErrorCode::InvalidArgument, "sample_period must be > 0");

  const auto samples = static_cast<std::size_t>((span.count() + sample_period.count() - 1) /
                                                sample_period.count());
  std::vector<SensorReading> out;
  out.reserve(samples * profile.devices.size());
  for (std::size_t d = 0; d < profile.devices.size(); ++d) {
    const auto& dev = profile.devices[d];
    std::seed_seq slot_seed{profile.seed, std::uint64_t(profile.house_id), std::uint64_t(d), std::uint64_t(1)};
    std::seed_seq noise_seed{profile.seed, std::uint64_t(profile.house_id), std::uint64_t(d), std::uint64_t(2)};
    std::mt19937_64 slot_rng(slot_seed);
    std::mt19937_64 noise_rng(noise_seed);
    std::bernoulli_distribution toggle(dev.on_probability_per_slot);
    std::normal_distribution<double> noise(0.0, profile.noise_stddev > 0.0 ? profile.noise_stddev : 1.0);

    const Seconds slot{std::chrono::minutes{dev.slot_minutes}};
    const std::string sensor = synthetic_sensor_id(profile.house_id, d);
    char mac[32];
    std::snprintf(mac, sizeof(mac), "00:00:00:00:00:%02x:%02x", profile.house_id & 0xff,
                  static_cast<unsigned>(d + 1) & 0xffu);
    bool on = false;
    std::int64_t current_slot = -1;
    for (std::size_t i = 0; i < samples; ++i) {
      const Seconds offset = sample_period * static_cast<std::int64_t>(i);
      const std::int64_t s = offset / slot;
      while (current_slot < s) {
        ++current_slot;
        if (toggle(slot_rng)) on = !on;
      }
      double w = on ? dev.on_watts : dev.base_watts;
      if (profile.noise_stddev > 0.0) w = std::max(0.0, w + noise(noise_rng));
      SensorReading r;
      r.ts = profile.start + offset;
      r.type = MeasurementType::Load;
      r.value = w;
      r.unit = "Watt";
      r.house_id = profile.house_id;
      r.mac = mac;
      r.sensor_id = sensor;
      out.push_back(std::move(r));
    }
  }
  std::stable_sort(out.begin(), out.end(), reading_order);
  return out;
}

inline SyntheticProfile profile_from_json(const nlohmann::json& j) {
  try {
    SyntheticProfile p;
    p.house_id = j.value("house_id", 1);
    if (j.contains("start")) {
      const auto ts = parse_timestamp(j.at("start").get<std::string>());
      if (!ts) fail(ErrorCode::InvalidProfile, "bad start timestamp");
      p.start = *ts;
    }
    p.noise_stddev = j.value("noise_stddev", 0.0);
    p.seed = j.value("seed", std::uint64_t{0});
    for (const auto& d : j.at("devices")) {
      SyntheticDevice dev;
      dev.base_watts = d.value("base_watts", 0.0);
      dev.on_watts = d.value("on_watts", 0.0);
      dev.on_probability_per_slot = d.value("on_probability_per_slot", 0.0);
      dev.slot_minutes = d.value("slot_minutes", 60);
      p.devices.push_back(dev);
    }
    validate(p);
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidProfile, e.what());
  }
}

// A profile file holds one household object or {"households": [...]}.
inline std::vector<SyntheticProfile> profiles_from_json(const nlohmann::json& j) {
  std::vector<SyntheticProfile> out;
  if (j.is_object() && j.contains("households")) {
    for (const auto& h : j.at("households")) out.push_back(profile_from_json(h));
  } else if (j.is_array()) {
    for (const auto& h : j) out.push_back(profile_from_json(h));
  } else {
    out.push_back(profile_from_json(j));
  }
  return out;
}

inline nlohmann::json to_json(const SyntheticProfile& p) {
  nlohmann::json j;
  j["house_id"] = p.house_id;
  j["start"] = format_timestamp(p.start);
  j["noise_stddev"] = p.noise_stddev;
  j["seed"] = p.seed;
  j["devices"] = nlohmann::json::array();
  for (const auto& d : p.devices) {
    j["devices"].push_back({{"base_watts", d.base_watts},
                            {"on_watts", d.on_watts},
                            {"on_probability_per_slot", d.on_probability_per_slot},
                            {"slot_minutes", d.slot_minutes}});
  }
  return j;
}

}  // namespace loadcast
