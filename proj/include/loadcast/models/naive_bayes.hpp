#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/matrix.hpp"

namespace loadcast {

// Gaussian naive Bayes over integer class labels 0..n_classes-1.
class GaussianNaiveBayes {
 public:
  GaussianNaiveBayes() = default;

  static GaussianNaiveBayes fit(const Matrix& x, std::span<const std::size_t> labels,
                                std::size_t n_classes) {
    if (x.rows() == 0) fail(ErrorCode::EmptyTraining, "naive Bayes needs training rows");
    if (labels.size() != x.rows()) fail(ErrorCode::LayoutMismatch, "label count differs from rows");
    const std::size_t n = x.rows();
    const std::size_t f = x.cols();
    GaussianNaiveBayes m;
    m.n_features_ = f;
    m.means_ = Matrix(n_classes, f);
    m.vars_ = Matrix(n_classes, f);
    m.log_prior_.assign(n_classes, -std::numeric_limits<double>::infinity());

    std::vector<double> count(n_classes, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = labels[i];
      if (c >= n_classes) fail(ErrorCode::InvalidArgument, "label out of range");
      count[c] += 1.0;
      for (std::size_t j = 0; j < f; ++j) m.means_(c, j) += x(i, j);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      if (count[c] == 0.0) continue;
      m.log_prior_[c] = std::log(count[c] / static_cast<double>(n));
      for (std::size_t j = 0; j < f; ++j) m.means_(c, j) /= count[c];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = labels[i];
      for (std::size_t j = 0; j < f; ++j) {
        const double d = x(i, j) - m.means_(c, j);
        m.vars_(c, j) += d * d;
      }
    }

    // Floor each variance at 1e-9 * (global feature variance + 1e-12).
    std::vector<double> floor(f, 0.0);
    for (std::size_t j = 0; j < f; ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += x(i, j);
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
      var /= static_cast<double>(n);
      floor[j] = 1e-9 * (var + 1e-12);
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      for (std::size_t j = 0; j < f; ++j) {
        const double v = count[c] > 0.0 ? m.vars_(c, j) / count[c] : 0.0;
        m.vars_(c, j) = std::max(v, floor[j]);
      }
    }
    return m;
  }

  // log P(c) + sum_j log N(x_j; mean_cj, var_cj), unnormalized.
  std::vector<double> joint_log_likelihood(std::span<const double> x) const {
    if (x.size() != n_features_) fail(ErrorCode::LayoutMismatch, "feature vector width mismatch");
    std::vector<double> out(log_prior_.size());
    for (std::size_t c = 0; c < log_prior_.size(); ++c) {
      double s = log_prior_[c];
      if (std::isinf(s)) {
        out[c] = s;
        continue;
      }
      for (std::size_t j = 0; j < n_features_; ++j) {
        const double v = vars_(c, j);
        const double d = x[j] - means_(c, j);
        s += -0.5 * std::log(2.0 * std::numbers::pi * v) - d * d / (2.0 * v);
      }
      out[c] = s;
    }
    return out;
  }

  // argmax of the joint log likelihood; ties go to the lowest class.
  std::size_t predict(std::span<const double> x) const {
    const auto jll = joint_log_likelihood(x);
    std::size_t best = 0;
    for (std::size_t c = 1; c < jll.size(); ++c) {
      if (jll[c] > jll[best]) best = c;
    }
    return best;
  }

  std::size_t classes() const { return log_prior_.size(); }
  const Matrix& means() const { return means_; }
  const Matrix& variances() const { return vars_; }
  const std::vector<double>& log_priors() const { return log_prior_; }

  friend void to_json(nlohmann::json& j, const GaussianNaiveBayes& m) {
    std::vector<double> lp;
    for (const double v : m.log_prior_) lp.push_back(std::isinf(v) ? -1e308 : v);
    j = {{"n_features", m.n_features_},
         {"classes", m.log_prior_.size()},
         {"log_prior", lp},
         {"means", m.means_.data()},
         {"variances", m.vars_.data()}};
  }

  friend void from_json(const nlohmann::json& j, GaussianNaiveBayes& m) {
    m.n_features_ = j.at("n_features").get<std::size_t>();
    const auto classes = j.at("classes").get<std::size_t>();
    m.log_prior_ = j.at("log_prior").get<std::vector<double>>();
    for (auto& v : m.log_prior_) {
      if (v <= -1e308) v = -std::numeric_limits<double>::infinity();
    }
    const auto means = j.at("means").get<std::vector<double>>();
    const auto vars = j.at("variances").get<std::vector<double>>();
    m.means_ = Matrix(classes, m.n_features_);
    m.vars_ = Matrix(classes, m.n_features_);
    for (std::size_t i = 0; i < classes * m.n_features_; ++i) {
      m.means_(i / m.n_features_, i % m.n_features_) = means.at(i);
      m.vars_(i / m.n_features_, i % m.n_features_) = vars.at(i);
    }
  }

 private:
  std::size_t n_features_ = 0;
  Matrix means_;
  Matrix vars_;
  std::vector<double> log_prior_;
};

}  // namespace loadcast
