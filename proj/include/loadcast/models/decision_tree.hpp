#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/matrix.hpp"

namespace loadcast {

enum class TreeTask { Classification, Regression };

inline constexpr int kUnlimitedDepth = std::numeric_limits<int>::max();

struct TreeParams {
  int max_depth = 8;
  int min_samples_split = 2;
};

// Binary CART. Rows with x[feature] <= threshold go left. Classification
// splits on Gini impurity and labels are class indices stored as doubles;
// regression splits on squared-error reduction.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;

    friend bool operator==(const Node&, const Node&) = default;
  };

  DecisionTree() = default;

  static DecisionTree fit(const Matrix& x, std::span<const double> y, TreeTask task,
                          const TreeParams& params, std::size_t n_classes = 0) {
    if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "tree needs training rows");
    if (y.size() != x.rows()) fail(ErrorCode::LayoutMismatch, "target count differs from rows");
    if (params.max_depth < 0 || params.min_samples_split < 2) {
      fail(ErrorCode::InvalidModelSpec, "max_depth >= 0 and min_samples_split >= 2 required");
    }
    DecisionTree t;
    t.task_ = task;
    t.n_features_ = x.cols();
    if (task == TreeTask::Classification) {
      if (n_classes == 0) {
        for (const double v : y) n_classes = std::max(n_classes, static_cast<std::size_t>(v) + 1);
      }
      t.n_classes_ = n_classes;
    }
    Builder b{x, y, params, t};
    std::vector<std::size_t> idx(x.rows());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    b.build(idx, 0);
    return t;
  }

  double predict(std::span<const double> x) const {
    if (x.size() != n_features_) fail(ErrorCode::LayoutMismatch, "feature vector width mismatch");
    int n = 0;
    while (nodes_[n].feature >= 0) {
      const auto& node = nodes_[n];
      n = x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    }
    return nodes_[n].value;
  }

  std::size_t node_count() const { return nodes_.size(); }
  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
  }
  int depth() const { return depth_of(0); }
  const std::vector<Node>& nodes() const { return nodes_; }
  TreeTask task() const { return task_; }

  friend void to_json(nlohmann::json& j, const DecisionTree& t) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : t.nodes_) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
    j = {{"task", t.task_ == TreeTask::Classification ? "classification" : "regression"},
         {"n_features", t.n_features_},
         {"n_classes", t.n_classes_},
         {"nodes", nodes}};
  }

  friend void from_json(const nlohmann::json& j, DecisionTree& t) {
    t.task_ = j.at("task").get<std::string>() == "classification" ? TreeTask::Classification
                                                                  : TreeTask::Regression;
    t.n_features_ = j.at("n_features").get<std::size_t>();
    t.n_classes_ = j.at("n_classes").get<std::size_t>();
    t.nodes_.clear();
    for (const auto& n : j.at("nodes")) {
      t.nodes_.push_back(Node{n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                              n.at(3).get<int>(), n.at(4).get<double>()});
    }
  }

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  struct Split {
    int feature = -1;
    double threshold = 0.0;
    double gain = -std::numeric_limits<double>::infinity();
  };

  struct Builder {
    const Matrix& x;
    std::span<const double> y;
    const TreeParams& params;
    DecisionTree& tree;

    double impurity(std::span<const std::size_t> idx) const {
      const double n = static_cast<double>(idx.size());
      if (tree.task_ == TreeTask::Classification) {
        std::vector<double> counts(tree.n_classes_, 0.0);
        for (const auto i : idx) counts[static_cast<std::size_t>(y[i])] += 1.0;
        double g = 1.0;
        for (const double c : counts) g -= (c / n) * (c / n);
        return n * g;
      }
      double s = 0.0, s2 = 0.0;
      for (const auto i : idx) {
        s += y[i];
        s2 += y[i] * y[i];
      }
      return std::max(0.0, s2 - s * s / n);
    }

    bool pure(std::span<const std::size_t> idx) const {
      const double first = y[idx.front()];
      return std::all_of(idx.begin(), idx.end(), [&](std::size_t i) { return y[i] == first; });
    }

    double leaf_value(std::span<const std::size_t> idx) const {
      if (tree.task_ == TreeTask::Classification) {
        std::vector<std::size_t> counts(tree.n_classes_, 0);
        for (const auto i : idx) ++counts[static_cast<std::size_t>(y[i])];
        std::size_t best = 0;
        for (std::size_t c = 1; c < counts.size(); ++c) {
          if (counts[c] > counts[best]) best = c;
        }
        return static_cast<double>(best);
      }
      double s = 0.0;
      for (const auto i : idx) s += y[i];
      return s / static_cast<double>(idx.size());
    }

    // Exhaustive search over midpoints of sorted unique values; ties keep the
    // lower feature index, then the lower threshold.
    Split best_split(std::span<const std::size_t> idx, double parent) const {
      Split best;
      const std::size_t n = idx.size();
      const double eps = 1e-12 * std::max(parent, 1e-300);
      std::vector<std::pair<double, std::size_t>> order(n);
      std::vector<double> left_counts(tree.n_classes_), right_counts(tree.n_classes_);
      for (std::size_t f = 0; f < x.cols(); ++f) {
        for (std::size_t k = 0; k < n; ++k) order[k] = {x(idx[k], f), idx[k]};
        std::sort(order.begin(), order.end());
        if (order.front().first == order.back().first) continue;

        if (tree.task_ == TreeTask::Classification) {
          std::fill(left_counts.begin(), left_counts.end(), 0.0);
          std::fill(right_counts.begin(), right_counts.end(), 0.0);
          for (const auto& [v, i] : order) right_counts[static_cast<std::size_t>(y[i])] += 1.0;
          double left_sq = 0.0, right_sq = 0.0;
          for (const double c : right_counts) right_sq += c * c;
          for (std::size_t k = 0; k + 1 < n; ++k) {
            const auto c = static_cast<std::size_t>(y[order[k].second]);
            left_sq += 2.0 * left_counts[c] + 1.0;
            right_sq -= 2.0 * right_counts[c] - 1.0;
            left_counts[c] += 1.0;
            right_counts[c] -= 1.0;
            if (order[k].first == order[k + 1].first) continue;
            const double nl = static_cast<double>(k + 1);
            const double nr = static_cast<double>(n - k - 1);
            const double child = (nl - left_sq / nl) + (nr - right_sq / nr);
            consider(best, f, order[k].first, order[k + 1].first, parent - child, eps);
          }
        } else {
          double total = 0.0, total2 = 0.0;
          for (const auto& [v, i] : order) {
            total += y[i];
            total2 += y[i] * y[i];
          }
          double ls = 0.0, ls2 = 0.0;
          for (std::size_t k = 0; k + 1 < n; ++k) {
            const double v = y[order[k].second];
            ls += v;
            ls2 += v * v;
            if (order[k].first == order[k + 1].first) continue;
            const double nl = static_cast<double>(k + 1);
            const double nr = static_cast<double>(n - k - 1);
            const double rs = total - ls, rs2 = total2 - ls2;
            const double child =
                std::max(0.0, ls2 - ls * ls / nl) + std::max(0.0, rs2 - rs * rs / nr);
            consider(best, f, order[k].first, order[k + 1].first, parent - child, eps);
          }
        }
      }
      return best;
    }

    static void consider(Split& best, std::size_t f, double lo, double hi, double gain, double eps) {
      if (best.feature >= 0 && !(gain > best.gain + eps)) return;
      double thr = lo + (hi - lo) / 2.0;
      if (!(thr < hi)) thr = lo;
      best = Split{static_cast<int>(f), thr, gain};
    }

    int build(std::vector<std::size_t>& idx, int depth) {
      const int id = static_cast<int>(tree.nodes_.size());
      tree.nodes_.push_back(Node{});
      tree.nodes_[id].value = leaf_value(idx);
      if (depth >= params.max_depth || static_cast<int>(idx.size()) < params.min_samples_split ||
          pure(idx)) {
        return id;
      }
      const double parent = impurity(idx);
      const Split s = best_split(idx, parent);
      if (s.feature < 0) return id;
      std::vector<std::size_t> left, right;
      for (const auto i : idx) {
        (x(i, static_cast<std::size_t>(s.feature)) <= s.threshold ? left : right).push_back(i);
      }
      idx.clear();
      idx.shrink_to_fit();
      const int l = build(left, depth + 1);
      const int r = build(right, depth + 1);
      auto& node = tree.nodes_[id];
      node.feature = s.feature;
      node.threshold = s.threshold;
      node.left = l;
      node.right = r;
      return id;
    }
  };

  int depth_of(int n) const {
    if (nodes_.empty() || nodes_[n].feature < 0) return 0;
    return 1 + std::max(depth_of(nodes_[n].left), depth_of(nodes_[n].right));
  }

  TreeTask task_ = TreeTask::Regression;
  std::size_t n_features_ = 0;
  std::size_t n_classes_ = 0;
  std::vector<Node> nodes_;
};

}  // namespace loadcast
