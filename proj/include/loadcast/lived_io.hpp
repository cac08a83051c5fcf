#pragma once

#include <zlib.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/ingest.hpp"

namespace loadcast {

struct ParseStats {
  std::size_t lines = 0;
  std::size_t records = 0;
  std::size_t headers = 0;
  std::size_t malformed = 0;
  std::size_t inconsistent = 0;
  std::size_t unknown_type = 0;
  std::size_t ignorable = 0;

  std::size_t rejected() const { return malformed + inconsistent + unknown_type; }

  ParseStats& operator+=(const ParseStats& o) {
    lines += o.lines;
    records += o.records;
    headers += o.headers;
    malformed += o.malformed;
    inconsistent += o.inconsistent;
    unknown_type += o.unknown_type;
    ignorable += o.ignorable;
    return *this;
  }
};

// Line reader over plain or gzip-compressed text; zlib passes plain files through.
class LineReader {
 public:
  explicit LineReader(const std::filesystem::path& path)
      : file_(gzopen(path.string().c_str(), "rb"), &gzclose) {
    if (!file_) fail(ErrorCode::Io, "cannot open " + path.string());
    buffer_.resize(1 << 16);
  }

  bool next(std::string& line) {
    line.clear();
    while (true) {
      const char* got = gzgets(file_.get(), buffer_.data(), static_cast<int>(buffer_.size()));
      if (got == nullptr) {
        int err = Z_OK;
        gzerror(file_.get(), &err);
        if (err != Z_OK && err != Z_STREAM_END) fail(ErrorCode::Io, "read error");
        return !line.empty();
      }
      line += got;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
      }
    }
  }

 private:
  std::unique_ptr<gzFile_s, decltype(&gzclose)> file_;
  std::vector<char> buffer_;
};

// Streams every valid record of a LIVED file to `sink`. Invalid records are
// counted, or rethrown when `strict` is set.
inline ParseStats read_lived_file(const std::filesystem::path& path,
                                  const std::function<void(SensorReading&&)>& sink,
                                  bool strict = false) {
  LineReader reader(path);
  ParseStats stats;
  std::string line;
  while (reader.next(line)) {
    ++stats.lines;
    if (detail::trim(line).empty()) continue;
    if (stats.records == 0 && stats.headers == 0 && is_header_line(line)) {
      ++stats.headers;
      continue;
    }
    try {
      SensorReading r = parse_reading(line);
      ++stats.records;
      if (r.ignorable()) ++stats.ignorable;
      sink(std::move(r));
    } catch (const Error& e) {
      if (strict) throw;
      switch (e.code()) {
        case ErrorCode::InconsistentRedundancy: ++stats.inconsistent; break;
        case ErrorCode::UnknownType: ++stats.unknown_type; break;
        default: ++stats.malformed; break;
      }
    }
  }
  return stats;
}

struct LivedLog {
  std::vector<SensorReading> readings;  // sorted by reading_order
  ParseStats stats;
};

// Loads and merges sharded files. `keep` filters records before buffering.
inline LivedLog read_lived_files(std::span<const std::filesystem::path> paths,
                                 const std::function<bool(const SensorReading&)>& keep = {},
                                 bool strict = false) {
  LivedLog log;
  for (const auto& p : paths) {
    log.stats += read_lived_file(
        p,
        [&](SensorReading&& r) {
          if (!keep || keep(r)) log.readings.push_back(std::move(r));
        },
        strict);
  }
  std::stable_sort(log.readings.begin(), log.readings.end(), reading_order);
  return log;
}

inline void write_lived_file(const std::filesystem::path& path, std::span<const SensorReading> readings,
                             bool header = true) {
  std::ofstream out(path);
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
  if (header) out << kLivedHeader << '\n';
  for (const auto& r : readings) out << format_reading(r) << '\n';
  if (!out) fail(ErrorCode::Io, "write failed for " + path.string());
}

// Accepts {"<house>": ["<sensor_id>", ...], ...} or a flat list of sensor ids
// grouped by their house prefix.
inline std::map<int, HouseholdRoster> parse_roster_overrides(const nlohmann::json& j) {
  std::map<int, std::vector<std::string>> ids;
  if (j.is_object()) {
    for (const auto& [key, list] : j.items()) {
      const auto house = detail::parse_number<int>(key);
      if (!house || !list.is_array()) fail(ErrorCode::ConfigInvalid, "bad roster entry '" + key + "'");
      for (const auto& id : list) ids[*house].push_back(id.get<std::string>());
    }
  } else if (j.is_array()) {
    for (const auto& id : j) {
      const auto s = id.get<std::string>();
      const auto colon = s.find(':');
      const auto house = colon == std::string::npos ? std::nullopt
                                                     : detail::parse_number<int>(s.substr(0, colon));
      if (!house) fail(ErrorCode::ConfigInvalid, "bad sensor id '" + s + "'");
      ids[*house].push_back(s);
    }
  } else {
    fail(ErrorCode::ConfigInvalid, "roster file must be a JSON object or list");
  }
  std::map<int, HouseholdRoster> out;
  for (auto& [house, list] : ids) out.emplace(house, make_roster(house, std::move(list)));
  return out;
}

inline std::map<int, HouseholdRoster> load_roster_overrides(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::Io, "cannot open roster file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ConfigInvalid, std::string("roster file: ") + e.what());
  }
  return parse_roster_overrides(j);
}

}  // namespace loadcast
