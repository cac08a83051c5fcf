#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/matrix.hpp"

namespace loadcast {

struct LinearSvmParams {
  double epsilon = 0.0;  // insensitive band, in target units
  double learning_rate = 0.1;
  int epochs = 50;
  double regularization = 1e-5;
  std::uint64_t seed = 0;
};

// Per-column z-scoring; constant columns map to 0.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Matrix& x) {
    Standardizer s;
    const std::size_t n = x.rows(), f = x.cols();
    s.mean.assign(f, 0.0);
    s.scale.assign(f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
      double m = 0.0;
      for (std::size_t i = 0; i < n; ++i) m += x(i, j);
      m /= static_cast<double>(n);
      double v = 0.0;
      for (std::size_t i = 0; i < n; ++i) v += (x(i, j) - m) * (x(i, j) - m);
      v /= static_cast<double>(n);
      s.mean[j] = m;
      const double sd = std::sqrt(v);
      s.scale[j] = sd > 1e-12 * (std::abs(m) + 1e-300) && sd > 0.0 ? 1.0 / sd : 0.0;
    }
    return s;
  }

  void transform(std::span<const double> x, std::span<double> out) const {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean[j]) * scale[j];
  }

  Matrix transform(const Matrix& x) const {
    Matrix z(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i) transform(x.row(i), z.row(i));
    return z;
  }

  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline void check_svm_params(const LinearSvmParams& p) {
  if (!(p.epsilon >= 0.0) || !(p.learning_rate > 0.0) || p.epochs < 1 || !(p.regularization >= 0.0)) {
    fail(ErrorCode::InvalidModelSpec, "svm needs epsilon >= 0, learning_rate > 0, epochs >= 1, "
                                      "regularization >= 0");
  }
}

// Step size for iteration t (0-based) over n rows: decays once per epoch.
inline double svm_step(const LinearSvmParams& p, std::size_t t, std::size_t n) {
  return p.learning_rate / (1.0 + static_cast<double>(t) / static_cast<double>(n));
}

}  // namespace detail

// Linear epsilon-insensitive regression trained by seeded stochastic
// subgradient descent on standardized features and targets. The intercept is
// the training mean, so the learned weights model deviations from it. The
// returned weights are the average of the iterates over the second half of
// training.
class LinearSvr {
 public:
  static LinearSvr fit(const Matrix& x, std::span<const double> y, const LinearSvmParams& p) {
    if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "svr needs training rows");
    if (y.size() != x.rows()) fail(ErrorCode::LayoutMismatch, "target count differs from rows");
    detail::check_svm_params(p);
    LinearSvr m;
    m.std_ = Standardizer::fit(x);
    const std::size_t n = x.rows(), f = x.cols();
    m.bias_ = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (const double v : y) var += (v - m.bias_) * (v - m.bias_);
    const double sd = std::sqrt(var / static_cast<double>(n));
    m.y_scale_ = sd > 0.0 ? sd : 1.0;
    m.w_.assign(f, 0.0);
    if (f == 0 || sd == 0.0) return m;

    const Matrix z = m.std_.transform(x);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = (y[i] - m.bias_) / m.y_scale_;
    const double eps = p.epsilon / m.y_scale_;

    std::vector<double> w(f, 0.0), avg(f, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(p.seed);
    const std::size_t total = n * static_cast<std::size_t>(p.epochs);
    const std::size_t avg_from = total / 2;
    std::size_t step = 0, averaged = 0;
    for (int e = 0; e < p.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (const auto i : order) {
        const double eta = detail::svm_step(p, step, n);
        const auto zi = z.row(i);
        const double r = t[i] - detail::dot(w, zi);
        const double shrink = 1.0 - eta * p.regularization;
        for (std::size_t j = 0; j < f; ++j) w[j] *= shrink;
        if (std::abs(r) > eps) {
          const double g = r > 0 ? eta : -eta;
          for (std::size_t j = 0; j < f; ++j) w[j] += g * zi[j];
        }
        if (step >= avg_from) {
          ++averaged;
          for (std::size_t j = 0; j < f; ++j) avg[j] += (w[j] - avg[j]) / static_cast<double>(averaged);
        }
        ++step;
      }
    }
    m.w_ = averaged > 0 ? avg : w;
    return m;
  }

  double predict(std::span<const double> x) const {
    if (x.size() != w_.size()) fail(ErrorCode::LayoutMismatch, "feature vector width mismatch");
    std::vector<double> z(x.size());
    std_.transform(x, z);
    return bias_ + y_scale_ * detail::dot(w_, z);
  }

  double bias() const { return bias_; }
  const std::vector<double>& weights() const { return w_; }

  friend void to_json(nlohmann::json& j, const LinearSvr& m) {
    j = {{"mean", m.std_.mean}, {"scale", m.std_.scale}, {"weights", m.w_},
         {"bias", m.bias_}, {"y_scale", m.y_scale_}};
  }
  friend void from_json(const nlohmann::json& j, LinearSvr& m) {
    m.std_.mean = j.at("mean").get<std::vector<double>>();
    m.std_.scale = j.at("scale").get<std::vector<double>>();
    m.w_ = j.at("weights").get<std::vector<double>>();
    m.bias_ = j.at("bias").get<double>();
    m.y_scale_ = j.at("y_scale").get<double>();
  }

  friend bool operator==(const LinearSvr&, const LinearSvr&) = default;

 private:
  Standardizer std_;
  std::vector<double> w_;
  double bias_ = 0.0;
  double y_scale_ = 1.0;
};

// One-vs-rest linear hinge-loss classifier over labels 0..n_classes-1.
class LinearSvc {
 public:
  static LinearSvc fit(const Matrix& x, std::span<const std::size_t> labels, std::size_t n_classes,
                       const LinearSvmParams& p) {
    if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "svc needs training rows");
    if (labels.size() != x.rows()) fail(ErrorCode::LayoutMismatch, "label count differs from rows");
    detail::check_svm_params(p);
    LinearSvc m;
    m.std_ = Standardizer::fit(x);
    const std::size_t n = x.rows(), f = x.cols();
    m.w_ = Matrix(n_classes, f);
    m.b_.assign(n_classes, 0.0);
    if (n_classes <= 1) return m;

    std::vector<std::size_t> present(n_classes, 0);
    for (const auto l : labels) ++present[l];
    const Matrix z = m.std_.transform(x);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t total = n * static_cast<std::size_t>(p.epochs);
    const std::size_t avg_from = total / 2;
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (present[c] == 0) {
        m.b_[c] = -1e9;  // never predicted
        continue;
      }
      std::mt19937_64 rng(p.seed + c);
      std::vector<double> w(f, 0.0), avg(f, 0.0);
      double b = 0.0, avg_b = 0.0;
      std::size_t step = 0, averaged = 0;
      for (int e = 0; e < p.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        for (const auto i : order) {
          const double eta = detail::svm_step(p, step, n);
          const double s = labels[i] == c ? 1.0 : -1.0;
          const auto zi = z.row(i);
          const double margin = s * (detail::dot(w, zi) + b);
          const double shrink = 1.0 - eta * p.regularization;
          for (std::size_t j = 0; j < f; ++j) w[j] *= shrink;
          if (margin < 1.0) {
            for (std::size_t j = 0; j < f; ++j) w[j] += eta * s * zi[j];
            b += eta * s;
          }
          if (step >= avg_from) {
            ++averaged;
            const double k = static_cast<double>(averaged);
            for (std::size_t j = 0; j < f; ++j) avg[j] += (w[j] - avg[j]) / k;
            avg_b += (b - avg_b) / k;
          }
          ++step;
        }
      }
      for (std::size_t j = 0; j < f; ++j) m.w_(c, j) = averaged > 0 ? avg[j] : w[j];
      m.b_[c] = averaged > 0 ? avg_b : b;
    }
    return m;
  }

  std::vector<double> decision_function(std::span<const double> x) const {
    if (x.size() != w_.cols()) fail(ErrorCode::LayoutMismatch, "feature vector width mismatch");
    std::vector<double> z(x.size());
    std_.transform(x, z);
    std::vector<double> out(b_.size());
    for (std::size_t c = 0; c < b_.size(); ++c) out[c] = detail::dot(w_.row(c), z) + b_[c];
    return out;
  }

  // Highest score, ties to the lowest class.
  std::size_t predict(std::span<const double> x) const {
    if (b_.size() <= 1) return 0;
    const auto s = decision_function(x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < s.size(); ++c) {
      if (s[c] > s[best]) best = c;
    }
    return best;
  }

  friend void to_json(nlohmann::json& j, const LinearSvc& m) {
    j = {{"mean", m.std_.mean}, {"scale", m.std_.scale}, {"classes", m.b_.size()},
         {"weights", m.w_.data()}, {"bias", m.b_}};
  }
  friend void from_json(const nlohmann::json& j, LinearSvc& m) {
    m.std_.mean = j.at("mean").get<std::vector<double>>();
    m.std_.scale = j.at("scale").get<std::vector<double>>();
    m.b_ = j.at("bias").get<std::vector<double>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    const std::size_t f = m.std_.mean.size();
    m.w_ = Matrix(m.b_.size(), f);
    for (std::size_t i = 0; i < w.size() && f > 0; ++i) m.w_(i / f, i % f) = w[i];
  }

  friend bool operator==(const LinearSvc&, const LinearSvc&) = default;

 private:
  Standardizer std_;
  Matrix w_;
  std::vector<double> b_;
};

}  // namespace loadcast
