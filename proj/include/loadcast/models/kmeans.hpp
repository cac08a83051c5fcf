#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"

namespace loadcast {

// Discretizes kWh targets; class i is represented by centroids[i]. Centroids
// are distinct and ascending.
struct KMeansCodebook {
  std::vector<double> centroids;

  std::size_t size() const { return centroids.size(); }

  // Nearest centroid, ties to the lower index.
  std::size_t assign(double y) const {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < centroids.size(); ++i) {
      const double d = std::abs(y - centroids[i]);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  }

  std::vector<std::size_t> assign_all(std::span<const double> y) const {
    std::vector<std::size_t> out(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) out[i] = assign(y[i]);
    return out;
  }

  double sse(std::span<const double> y) const {
    double s = 0.0;
    for (const double v : y) {
      const double d = v - centroids[assign(v)];
      s += d * d;
    }
    return s;
  }

  friend bool operator==(const KMeansCodebook&, const KMeansCodebook&) = default;
};

inline constexpr int kDefaultClusters = 8;

// 1-D Lloyd iterations from k-means++ seeding. With at most k distinct
// values the codebook is exactly the distinct values.
inline KMeansCodebook kmeans_fit(std::span<const double> y, int k = kDefaultClusters,
                                 std::uint64_t seed = 0, int max_iter = 100) {
  if (y.empty()) fail(ErrorCode::EmptyTraining, "k-means needs at least one target");
  if (k < 1) fail(ErrorCode::InvalidModelSpec, "k must be >= 1");

  std::vector<double> distinct(y.begin(), y.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (distinct.size() <= static_cast<std::size_t>(k)) return KMeansCodebook{distinct};

  std::mt19937_64 rng(seed);
  std::vector<double> centers;
  centers.reserve(static_cast<std::size_t>(k));
  centers.push_back(y[std::uniform_int_distribution<std::size_t>(0, y.size() - 1)(rng)]);
  std::vector<double> d2(y.size());
  while (centers.size() < static_cast<std::size_t>(k)) {
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const double c : centers) best = std::min(best, (y[i] - c) * (y[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) break;
    std::uniform_real_distribution<double> u(0.0, total);
    const double pick = u(rng);
    double acc = 0.0;
    std::size_t chosen = y.size() - 1;
    for (std::size_t i = 0; i < y.size(); ++i) {
      acc += d2[i];
      if (acc >= pick && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(y[chosen]);
  }

  std::vector<std::size_t> label(y.size(), 0);
  std::vector<double> sum(centers.size());
  std::vector<std::size_t> count(centers.size());
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = iter == 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      std::size_t best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = std::abs(y[i] - centers[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (label[i] != best) changed = true;
      label[i] = best;
    }
    if (!changed) break;
    std::fill(sum.begin(), sum.end(), 0.0);
    std::fill(count.begin(), count.end(), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
      sum[label[i]] += y[i];
      ++count[label[i]];
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
    }
  }

  std::fill(count.begin(), count.end(), 0);
  for (const auto l : label) ++count[l];
  KMeansCodebook book;
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (count[c] > 0) book.centroids.push_back(centers[c]);
  }
  std::sort(book.centroids.begin(), book.centroids.end());
  book.centroids.erase(std::unique(book.centroids.begin(), book.centroids.end()),
                       book.centroids.end());
  return book;
}

inline void to_json(nlohmann::json& j, const KMeansCodebook& b) { j = {{"centroids", b.centroids}}; }
inline void from_json(const nlohmann::json& j, KMeansCodebook& b) {
  b.centroids = j.at("centroids").get<std::vector<double>>();
}

}  // namespace loadcast
