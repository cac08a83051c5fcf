#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "loadcast/error.hpp"
#include "loadcast/ingest.hpp"
#include "loadcast/matrix.hpp"
#include "loadcast/models/decision_tree.hpp"
#include "loadcast/models/kmeans.hpp"
#include "loadcast/models/linear_svm.hpp"
#include "loadcast/models/naive_bayes.hpp"

namespace loadcast {

enum class ModelFamily { Persistence, GnbCls, TreeCls, SvmCls, TreeReg, SvmReg };

inline constexpr std::string_view family_name(ModelFamily f) {
  switch (f) {
    case ModelFamily::Persistence: return "persistence";
    case ModelFamily::GnbCls: return "gnb-cls";
    case ModelFamily::TreeCls: return "tree-cls";
    case ModelFamily::SvmCls: return "svm-cls";
    case ModelFamily::TreeReg: return "tree-reg";
    case ModelFamily::SvmReg: return "svm-reg";
  }
  return "?";
}

inline std::optional<ModelFamily> parse_family(std::string_view s) {
  for (const auto f : {ModelFamily::Persistence, ModelFamily::GnbCls, ModelFamily::TreeCls,
                       ModelFamily::SvmCls, ModelFamily::TreeReg, ModelFamily::SvmReg}) {
    if (family_name(f) == s) return f;
  }
  return std::nullopt;
}

constexpr bool is_classifier(ModelFamily f) {
  return f == ModelFamily::GnbCls || f == ModelFamily::TreeCls || f == ModelFamily::SvmCls;
}

struct Hyperparams {
  TreeParams tree;
  LinearSvmParams svm;
  int kmeans_k = kDefaultClusters;
  int kmeans_max_iter = 100;
  std::uint64_t seed = 0;

  friend bool operator==(const Hyperparams& a, const Hyperparams& b) {
    return a.tree.max_depth == b.tree.max_depth &&
           a.tree.min_samples_split == b.tree.min_samples_split &&
           a.svm.epsilon == b.svm.epsilon && a.svm.learning_rate == b.svm.learning_rate &&
           a.svm.epochs == b.svm.epochs && a.svm.regularization == b.svm.regularization &&
           a.kmeans_k == b.kmeans_k && a.kmeans_max_iter == b.kmeans_max_iter && a.seed == b.seed;
  }
};

struct ModelSpec {
  ModelFamily family = ModelFamily::Persistence;
  Hyperparams hp;

  std::string name() const { return std::string(family_name(family)); }

  void validate() const {
    if (hp.tree.max_depth < 0 || hp.tree.min_samples_split < 2) {
      fail(ErrorCode::InvalidModelSpec, "tree max_depth >= 0 and min_samples_split >= 2 required");
    }
    detail::check_svm_params(hp.svm);
    if (hp.kmeans_k < 1 || hp.kmeans_max_iter < 1) {
      fail(ErrorCode::InvalidModelSpec, "k-means needs k >= 1 and max_iter >= 1");
    }
  }

  // Applies "key=value"; keys: max_depth (or "inf"), min_samples_split,
  // epsilon, learning_rate, epochs, regularization, k, max_iter, seed.
  void set(std::string_view key, std::string_view value) {
    const auto as_int = [&]() -> long long {
      const auto v = detail::parse_number<long long>(value);
      if (!v) fail(ErrorCode::ConfigInvalid, "hyperparameter " + std::string(key) + " expects an integer");
      return *v;
    };
    const auto as_real = [&]() {
      const auto v = detail::parse_number<double>(value);
      if (!v) fail(ErrorCode::ConfigInvalid, "hyperparameter " + std::string(key) + " expects a number");
      return *v;
    };
    if (key == "max_depth") {
      hp.tree.max_depth = (value == "inf" || value == "none") ? kUnlimitedDepth
                                                               : static_cast<int>(as_int());
    } else if (key == "min_samples_split") {
      hp.tree.min_samples_split = static_cast<int>(as_int());
    } else if (key == "epsilon") {
      hp.svm.epsilon = as_real();
    } else if (key == "learning_rate") {
      hp.svm.learning_rate = as_real();
    } else if (key == "epochs") {
      hp.svm.epochs = static_cast<int>(as_int());
    } else if (key == "regularization") {
      hp.svm.regularization = as_real();
    } else if (key == "k") {
      hp.kmeans_k = static_cast<int>(as_int());
    } else if (key == "max_iter") {
      hp.kmeans_max_iter = static_cast<int>(as_int());
    } else if (key == "seed") {
      hp.seed = static_cast<std::uint64_t>(as_int());
    } else {
      fail(ErrorCode::ConfigInvalid, "unknown hyperparameter '" + std::string(key) + "'");
    }
  }

  static ModelSpec parse(std::string_view family, std::span<const std::string> hp_pairs = {}) {
    const auto f = parse_family(family);
    if (!f) fail(ErrorCode::ConfigInvalid, "unknown model '" + std::string(family) + "'");
    ModelSpec spec{*f, {}};
    for (const auto& kv : hp_pairs) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(ErrorCode::ConfigInvalid, "hyperparameter '" + kv + "' is not key=value");
      spec.set(detail::trim(std::string_view(kv).substr(0, eq)),
               detail::trim(std::string_view(kv).substr(eq + 1)));
    }
    spec.validate();
    return spec;
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct PersistenceState {
  friend bool operator==(const PersistenceState&, const PersistenceState&) = default;
};

struct FittedModel {
  ModelFamily family = ModelFamily::Persistence;
  std::size_t width = 0;
  double persistence_scale = 1.0;  // horizon / base span
  std::optional<KMeansCodebook> codebook;
  std::variant<PersistenceState, GaussianNaiveBayes, DecisionTree, LinearSvr, LinearSvc> state;
};

inline constexpr int kModelFormatVersion = 1;

// Full retrain. Classifiers first discretize y with k-means and learn the
// cluster labels.
inline FittedModel fit(const ModelSpec& spec, const Matrix& x, std::span<const double> y,
                       double persistence_scale = 1.0) {
  spec.validate();
  FittedModel m;
  m.family = spec.family;
  m.width = x.cols();
  m.persistence_scale = persistence_scale;
  if (spec.family == ModelFamily::Persistence) return m;

  if (x.rows() == 0 || y.empty()) fail(ErrorCode::EmptyTraining, "no training rows");
  if (x.rows() != y.size()) fail(ErrorCode::LayoutMismatch, "row count differs from target count");

  if (is_classifier(spec.family)) {
    KMeansCodebook book = kmeans_fit(y, spec.hp.kmeans_k, spec.hp.seed, spec.hp.kmeans_max_iter);
    const auto labels = book.assign_all(y);
    const std::size_t classes = book.size();
    switch (spec.family) {
      case ModelFamily::GnbCls:
        m.state = GaussianNaiveBayes::fit(x, labels, classes);
        break;
      case ModelFamily::TreeCls: {
        std::vector<double> yl(labels.begin(), labels.end());
        m.state = DecisionTree::fit(x, yl, TreeTask::Classification, spec.hp.tree, classes);
        break;
      }
      case ModelFamily::SvmCls: {
        auto p = spec.hp.svm;
        p.seed = spec.hp.seed;
        m.state = LinearSvc::fit(x, labels, classes, p);
        break;
      }
      default: break;
    }
    m.codebook = std::move(book);
    return m;
  }

  if (spec.family == ModelFamily::TreeReg) {
    m.state = DecisionTree::fit(x, y, TreeTask::Regression, spec.hp.tree);
  } else {
    auto p = spec.hp.svm;
    p.seed = spec.hp.seed;
    m.state = LinearSvr::fit(x, y, p);
  }
  return m;
}

// kWh forecast for the next horizon. Classifiers answer with a centroid,
// regressors are clamped at 0.
inline double predict(const FittedModel& m, std::span<const double> x, double current_consum) {
  if (m.family == ModelFamily::Persistence) {
    return m.persistence_scale == 1.0 ? current_consum : current_consum * m.persistence_scale;
  }
  if (x.size() != m.width) {
    fail(ErrorCode::LayoutMismatch, "feature vector has " + std::to_string(x.size()) +
                                        " columns, model expects " + std::to_string(m.width));
  }
  switch (m.family) {
    case ModelFamily::GnbCls:
      return m.codebook->centroids[std::get<GaussianNaiveBayes>(m.state).predict(x)];
    case ModelFamily::TreeCls:
      return m.codebook->centroids[static_cast<std::size_t>(std::get<DecisionTree>(m.state).predict(x))];
    case ModelFamily::SvmCls:
      return m.codebook->centroids[std::get<LinearSvc>(m.state).predict(x)];
    case ModelFamily::TreeReg:
      return std::max(0.0, std::get<DecisionTree>(m.state).predict(x));
    case ModelFamily::SvmReg:
      return std::max(0.0, std::get<LinearSvr>(m.state).predict(x));
    default: break;
  }
  return 0.0;
}

inline nlohmann::json to_json(const FittedModel& m) {
  nlohmann::json j;
  j["format_version"] = kModelFormatVersion;
  j["family"] = family_name(m.family);
  j["width"] = m.width;
  j["persistence_scale"] = m.persistence_scale;
  if (m.codebook) j["codebook"] = *m.codebook;
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (!std::is_same_v<T, PersistenceState>) j["state"] = s;
      },
      m.state);
  return j;
}

inline FittedModel fitted_model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format_version").get<int>() != kModelFormatVersion) {
      fail(ErrorCode::InvalidModelSpec, "unsupported model format version");
    }
    const auto fam = parse_family(j.at("family").get<std::string>());
    if (!fam) fail(ErrorCode::InvalidModelSpec, "unknown model family");
    FittedModel m;
    m.family = *fam;
    m.width = j.at("width").get<std::size_t>();
    m.persistence_scale = j.at("persistence_scale").get<double>();
    if (j.contains("codebook")) m.codebook = j.at("codebook").get<KMeansCodebook>();
    switch (m.family) {
      case ModelFamily::Persistence: break;
      case ModelFamily::GnbCls: m.state = j.at("state").get<GaussianNaiveBayes>(); break;
      case ModelFamily::TreeCls:
      case ModelFamily::TreeReg: m.state = j.at("state").get<DecisionTree>(); break;
      case ModelFamily::SvmCls: m.state = j.at("state").get<LinearSvc>(); break;
      case ModelFamily::SvmReg: m.state = j.at("state").get<LinearSvr>(); break;
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidModelSpec, e.what());
  }
}

}  // namespace loadcast
