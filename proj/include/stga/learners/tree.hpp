#pragma once

#include <vector>

#include "stga/learners.hpp"
#include "stga/random.hpp"

namespace stga {

enum class SplitCriterion { gini, entropy };

/// How many features are examined at each split.
struct MaxFeatures {
  enum class Mode { all, sqrt, log2, count } mode = Mode::all;
  int count = 0;

  int resolve(int n_features) const;
  static MaxFeatures parse(const json& j);  // "all" | "sqrt" | "auto" | "log2" | integer
};

struct TreeOptions {
  SplitCriterion criterion = SplitCriterion::entropy;
  int max_depth = -1;  // negative: unlimited
  MaxFeatures max_features;
  bool random_thresholds = false;  // extremely randomized split points
  int min_samples_split = 2;
  int min_samples_leaf = 1;
};

/// CART binary classification tree trained on weighted samples.
///
/// Splits maximise the impurity decrease. Candidate thresholds are the
/// midpoints between consecutive distinct values (or one uniform draw per
/// feature in randomized mode). Equal gains keep the earlier candidate, so
/// the lowest feature index and then the lowest threshold win.
class DecisionTree : public Classifier {
 public:
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double p1 = 0.0;  // weighted fraction of class 1 among training rows
    int depth = 0;
  };

  DecisionTree() = default;

  /// Rows with zero weight are ignored.
  static DecisionTree fit(const Matrix& X, const Labels& y, const Vector& weights,
                          const TreeOptions& options, Rng& rng);

  Matrix predict_proba(const Matrix& X) const override;
  double positive_probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  json state() const override;
  static DecisionTree from_state(const json& j);

  int depth() const;
  int leaf_count() const;
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

/// Least-squares regression tree with the Friedman improvement criterion,
/// used as the stage learner in gradient boosting. Leaf values are set by
/// the caller after fitting.
class RegressionTree {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;
  };

  /// Fits the tree to `target`; `leaf_of_row` receives the leaf reached by
  /// each training row.
  static RegressionTree fit(const Matrix& X, const Vector& target, int max_depth,
                            int min_samples_split, std::vector<int>& leaf_of_row);

  int leaf_index(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  double predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const;
  void set_leaf_value(int leaf, double value) { nodes_.at(leaf).value = value; }

  json state() const;
  static RegressionTree from_state(const json& j);

  std::vector<Node>& nodes() { return nodes_; }
  const std::vector<Node>& nodes() const { return nodes_; }

 private:
  std::vector<Node> nodes_;
};

TreeOptions tree_options_from(const LearnerSpec& spec);

/// Vote-averaging ensemble of classification trees (random forest and
/// extra trees). P(y = 1) is the fraction of trees voting for class 1.
class TreeEnsemble : public Classifier {
 public:
  static TreeEnsemble fit(const Matrix& X, const Labels& y, const TreeOptions& options,
                          int n_estimators, bool bootstrap, std::uint64_t seed);

  Matrix predict_proba(const Matrix& X) const override;
  json state() const override;
  static TreeEnsemble from_state(const json& j);

  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  std::vector<DecisionTree> trees_;
};

}  // namespace stga
