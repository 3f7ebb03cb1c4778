#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "stga/dataset.hpp"
#include "stga/learners.hpp"

namespace stga {

/// How level-1 training features are produced.
///  out_of_fold: row i's feature comes from a model trained without i's fold.
///  naive: every base learner is trained on all rows and predicts them back.
enum class Level1Mode { out_of_fold, naive };

/// Level-1 feature per base learner: its hard label or its P(y = 1).
enum class Level1FeatureKind { label, probability };

struct StackSpec {
  std::vector<LearnerSpec> base_specs;
  LearnerSpec meta_spec = make_spec(Algorithm::gradient_boosting);
  Level1Mode mode = Level1Mode::out_of_fold;
  int folds = 5;
  Level1FeatureKind feature_kind = Level1FeatureKind::probability;
  std::uint64_t seed = 0;  // fold assignment in out_of_fold mode

  void validate() const;
  json to_json() const;
  static StackSpec from_json(const json& j);
};

std::string to_string(Level1Mode m);
std::string to_string(Level1FeatureKind k);
Level1Mode level1_mode_from_string(const std::string& s);
Level1FeatureKind level1_feature_kind_from_string(const std::string& s);

/// Record of every base-learner fit performed while building D'.
struct Level1Trace {
  struct Fit {
    std::size_t learner = 0;
    int fold = -1;  // -1 in naive mode
    RowIndices train_rows;
    RowIndices predicted_rows;
  };
  std::vector<Fit> fits;
};

/// D': one row per training sample, one column per base learner, labels
/// copied from `ds`.
Dataset build_level1_dataset(const StackSpec& spec, const Dataset& ds,
                             Level1Trace* trace = nullptr);

struct StackModel {
  StackSpec spec;
  std::vector<TrainedModel> base_models;  // refit on the full training set
  TrainedModel meta_model;

  Index n_features() const { return base_models.front().n_features(); }

  json to_json() const;
  static StackModel from_json(const json& j);
};

StackModel train_stack(const StackSpec& spec, const Dataset& ds, Level1Trace* trace = nullptr);

/// Base-model outputs on X, shaped like D'.
Matrix level1_features(const StackModel& model, const Matrix& X);

Labels predict_stack(const StackModel& model, const Matrix& X);
Vector stack_positive_probability(const StackModel& model, const Matrix& X);

}  // namespace stga
