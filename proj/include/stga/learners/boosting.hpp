#pragma once

#include <vector>

#include "stga/learners.hpp"
#include "stga/learners/tree.hpp"

namespace stga {

/// Real-valued AdaBoost (SAMME.R) over depth-1 trees, binary case.
///
/// Each accepted stump contributes f_t(x) = 1/2 log(p1(x) / p0(x)) from its
/// weighted leaf probabilities; sample weights are multiplied by
/// exp(-lr * y_i * f_t(x_i)) with y_i in {-1, +1}. Boosting stops early when
/// a stump's weighted error is 0 (kept) or >= 0.5 (discarded).
/// P(y = 1) = sigmoid(2 F(x)) with F the summed contributions; with no
/// accepted rounds it is the training prior.
class AdaBoostSammeR : public Classifier {
 public:
  static AdaBoostSammeR fit(const Matrix& X, const Labels& y, int n_estimators,
                            double learning_rate);

  Matrix predict_proba(const Matrix& X) const override;
  json state() const override;
  static AdaBoostSammeR from_state(const json& j);

  int rounds() const { return static_cast<int>(stumps_.size()); }
  /// F(x) using only the first `rounds` stumps.
  Vector decision_function(const Matrix& X, int rounds) const;
  const std::vector<double>& stump_errors() const { return errors_; }

 private:
  double contribution(const DecisionTree& stump, const Eigen::Ref<const Eigen::RowVectorXd>& x) const;

  std::vector<DecisionTree> stumps_;
  std::vector<double> errors_;
  double learning_rate_ = 1.0;
  double prior_ = 0.5;
};

/// Gradient boosting on the binomial deviance. Each stage fits a
/// regression tree to y - p with the Friedman improvement criterion, then
/// sets leaf values by one Newton step: sum(residual) / sum(p (1 - p)).
class GradientBoosting : public Classifier {
 public:
  static GradientBoosting fit(const Matrix& X, const Labels& y, int n_estimators,
                              double learning_rate, int max_depth, int min_samples_split);

  Matrix predict_proba(const Matrix& X) const override;
  Vector decision_function(const Matrix& X) const;
  json state() const override;
  static GradientBoosting from_state(const json& j);

  /// Mean training deviance before stage 1 and after each stage.
  const std::vector<double>& train_deviance() const { return deviance_; }
  int stages() const { return static_cast<int>(trees_.size()); }

 private:
  std::vector<RegressionTree> trees_;
  std::vector<double> deviance_;
  double init_ = 0.0;
  double learning_rate_ = 0.1;
};

/// Mean binomial deviance -2 [y log p + (1 - y) log(1 - p)] for raw scores F.
double binomial_deviance(const Labels& y, const Vector& raw);

}  // namespace stga
