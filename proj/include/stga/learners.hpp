#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "stga/dataset.hpp"
#include "stga/types.hpp"

namespace stga {

using json = nlohmann::json;

enum class Algorithm {
  decision_tree,
  random_forest,
  extra_trees,
  knn,
  gaussian_nb,
  mlp,
  adaboost,
  gradient_boosting,
  svm,
  logistic_regression,
  bagging,
};

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
const std::vector<Algorithm>& all_algorithms();

/// Algorithm identity plus hyperparameters. `hyperparameters` always holds
/// the complete, validated set once it has passed through make_spec().
struct LearnerSpec {
  Algorithm algorithm = Algorithm::decision_tree;
  json hyperparameters = json::object();
  std::uint64_t seed = 0;
  std::string name;  // display label in reports; defaults to the algorithm name

  std::string display_name() const { return name.empty() ? to_string(algorithm) : name; }

  template <class T>
  T param(const std::string& key) const {
    return hyperparameters.at(key).get<T>();
  }

  json to_json() const;
  static LearnerSpec from_json(const json& j);

  bool operator==(const LearnerSpec&) const = default;
};

/// Hyperparameter defaults (the tuned values used in the benchmark).
json default_hyperparameters(Algorithm a);

/// Merges `overrides` over the defaults and validates the result.
/// Unknown keys and ill-typed values throw ConfigError.
LearnerSpec make_spec(Algorithm a, const json& overrides = json::object(),
                      std::uint64_t seed = 0, std::string name = {});

void validate(const LearnerSpec& spec);

/// Fitted state of one algorithm.
class Classifier {
 public:
  virtual ~Classifier() = default;

  /// rows x 2 matrix; column 1 is P(y = 1).
  virtual Matrix predict_proba(const Matrix& X) const = 0;
  virtual json state() const = 0;
};

class TrainedModel {
 public:
  TrainedModel(LearnerSpec spec, Index n_features, std::shared_ptr<const Classifier> impl);

  const LearnerSpec& spec() const { return spec_; }
  Index n_features() const { return n_features_; }

  Matrix predict_proba(const Matrix& X) const;
  /// Argmax of predict_proba; an exact 0.5 tie goes to class 0.
  Labels predict(const Matrix& X) const;
  /// P(y = 1) per row.
  Vector positive_probability(const Matrix& X) const;

  const Classifier& classifier() const { return *impl_; }

  template <class T>
  const T& as() const {
    const auto* p = dynamic_cast<const T*>(impl_.get());
    if (!p) throw ModelError("model is not a " + std::string(typeid(T).name()));
    return *p;
  }

  json to_json() const;
  static TrainedModel from_json(const json& j);

 private:
  void check_columns(const Matrix& X) const;

  LearnerSpec spec_;
  Index n_features_;
  std::shared_ptr<const Classifier> impl_;
};

TrainedModel train(const LearnerSpec& spec, const Matrix& X, const Labels& y);
inline TrainedModel train(const LearnerSpec& spec, const Dataset& ds) {
  return train(spec, ds.features, ds.labels);
}

inline Labels predict(const TrainedModel& model, const Matrix& X) { return model.predict(X); }
inline Matrix predict_proba(const TrainedModel& model, const Matrix& X) {
  return model.predict_proba(X);
}

/// Converts P(y = 1) scores into labels, ties to class 0.
Labels threshold_labels(const Vector& p1);

/// Builds the two-column probability matrix from P(y = 1).
Matrix two_column_proba(const Vector& p1);

/// Serialization format version written into every model artifact.
inline constexpr int kModelFormatVersion = 1;

}  // namespace stga
