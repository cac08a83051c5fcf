#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "loadcast/error.hpp"
#include "loadcast/evaluation/metrics.hpp"
#include "loadcast/features.hpp"

namespace loadcast {

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// All size-k subsets of the pool in lexicographic order of the pool's
// canonical (enum) ordering. Duplicates in the pool are collapsed.
inline std::vector<FeatureCombination> enumerate_combinations(std::vector<FeatureId> pool, std::size_t k = 6) {
  std::sort(pool.begin(), pool.end());
  pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
  if (k == 0) fail(ErrorCode::InvalidArgument, "k must be >= 1");
  if (pool.size() < k) {
    fail(ErrorCode::PoolTooSmall, "pool of " + std::to_string(pool.size()) + " features, k = " +
                                      std::to_string(k));
  }
  std::vector<FeatureCombination> out;
  out.reserve(binomial(pool.size(), k));
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  const std::size_t n = pool.size();
  while (true) {
    std::vector<FeatureId> c;
    c.reserve(k);
    for (const auto i : idx) c.push_back(pool[i]);
    out.emplace_back(std::move(c));
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) break;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

struct ComboScore {
  std::string combo;
  double avg_mape = 0.0;
  double stddev = 0.0;
  double score = 0.0;
  std::size_t households = 0;
};

// Score = mean + sample stddev of the per-household MAPEs.
inline ComboScore score_combo(std::span<const double> per_household_mapes, std::string combo = {}) {
  if (per_household_mapes.size() < 2) {
    fail(ErrorCode::TooFewHouseholds, "scoring needs at least 2 households");
  }
  ComboScore s;
  s.combo = std::move(combo);
  s.avg_mape = mean_of(per_household_mapes);
  s.stddev = sample_stddev(per_household_mapes);
  s.score = s.avg_mape + s.stddev;
  s.households = per_household_mapes.size();
  return s;
}

// Ascending score; ties keep input order.
inline void rank_combos(std::vector<ComboScore>& scores) {
  std::stable_sort(scores.begin(), scores.end(),
                   [](const ComboScore& a, const ComboScore& b) { return a.score < b.score; });
}

}  // namespace loadcast
