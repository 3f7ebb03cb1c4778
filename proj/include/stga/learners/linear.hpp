#pragma once

#include "stga/learners.hpp"

namespace stga {

/// L2-regularised logistic regression fitted by Newton iterations on
///   sum_i logloss(y_i, sigmoid(w.x_i + b)) + l2/2 * |w|^2
/// The intercept is not penalised.
class LogisticRegression : public Classifier {
 public:
  struct Fit {
    int iterations = 0;
    bool converged = false;
  };

  LogisticRegression() = default;
  LogisticRegression(Vector weights, double intercept)
      : weights_(std::move(weights)), intercept_(intercept) {}

  static LogisticRegression fit(const Matrix& X, const Labels& y, double l2, int max_iter,
                                double tol, Fit* info = nullptr);

  Matrix predict_proba(const Matrix& X) const override;
  Vector decision_function(const Matrix& X) const;
  json state() const override;
  static LogisticRegression from_state(const json& j);

  const Vector& weights() const { return weights_; }
  double intercept() const { return intercept_; }

 private:
  Vector weights_;
  double intercept_ = 0.0;
};

/// Numerically stable logistic function.
double sigmoid(double z);

/// Exhaustive k-nearest-neighbour vote with Minkowski distance.
/// Distance ties are broken by training-row order.
class KNearestNeighbors : public Classifier {
 public:
  static KNearestNeighbors fit(const Matrix& X, const Labels& y, int k, double p);

  Matrix predict_proba(const Matrix& X) const override;
  json state() const override;
  static KNearestNeighbors from_state(const json& j);

 private:
  Matrix X_;
  Labels y_;
  int k_ = 5;
  double p_ = 2.0;
};

/// Gaussian naive Bayes. Every class variance is inflated by
/// var_smoothing times the largest per-feature variance.
class GaussianNaiveBayes : public Classifier {
 public:
  static GaussianNaiveBayes fit(const Matrix& X, const Labels& y, double var_smoothing);

  Matrix predict_proba(const Matrix& X) const override;
  json state() const override;
  static GaussianNaiveBayes from_state(const json& j);

  const Matrix& means() const { return mean_; }
  const Matrix& variances() const { return var_; }

 private:
  Matrix mean_;  // 2 x features
  Matrix var_;   // 2 x features
  Eigen::Vector2d log_prior_;
};

/// Bootstrap aggregation of any inner learner; P(y = 1) is the share of
/// replicates voting 1.
class Bagging : public Classifier {
 public:
  static Bagging fit(const Matrix& X, const Labels& y, const LearnerSpec& inner,
                     int n_estimators, std::uint64_t seed);

  Matrix predict_proba(const Matrix& X) const override;
  json state() const override;
  static Bagging from_state(const json& j);

  const std::vector<TrainedModel>& members() const { return members_; }

 private:
  std::vector<TrainedModel> members_;
};

}  // namespace stga
