#include "stga/learners/boosting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stga/learners/linear.hpp"

namespace stga {

namespace {

constexpr double kProbClip = std::numeric_limits<double>::epsilon();

}  // namespace

// --- AdaBoost (SAMME.R) -----------------------------------------------------

double AdaBoostSammeR::contribution(const DecisionTree& stump,
                                    const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  const double p1 = std::clamp(stump.positive_probability(x), kProbClip, 1.0 - kProbClip);
  return learning_rate_ * 0.5 * std::log(p1 / (1.0 - p1));
}

AdaBoostSammeR AdaBoostSammeR::fit(const Matrix& X, const Labels& y, int n_estimators,
                                   double learning_rate) {
  if (n_estimators < 0) throw ConfigError("adaboost: n_estimators must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("adaboost: learning_rate must be positive");
  AdaBoostSammeR model;
  model.learning_rate_ = learning_rate;
  const Index n = X.rows();
  model.prior_ = static_cast<double>(y.sum()) / static_cast<double>(n);

  TreeOptions stump;
  stump.criterion = SplitCriterion::gini;
  stump.max_depth = 1;
  Rng unused(0);  // exhaustive splits consume no randomness

  Vector w = Vector::Constant(n, 1.0 / static_cast<double>(n));
  for (int t = 0; t < n_estimators; ++t) {
    DecisionTree tree = DecisionTree::fit(X, y, w, stump, unused);
    double err = 0.0;
    for (Index i = 0; i < n; ++i) {
      const int pred = tree.positive_probability(X.row(i)) > 0.5 ? 1 : 0;
      if (pred != y(i)) err += w(i);
    }
    err /= w.sum();
    if (err >= 0.5) break;
    model.stumps_.push_back(tree);
    model.errors_.push_back(err);
    if (err <= 0.0) break;

    for (Index i = 0; i < n; ++i) {
      const double sign = y(i) ? 1.0 : -1.0;
      w(i) *= std::exp(-sign * model.contribution(tree, X.row(i)));
    }
    const double total = w.sum();
    if (!(total > 0.0) || !std::isfinite(total)) break;
    w /= total;
  }
  return model;
}

Vector AdaBoostSammeR::decision_function(const Matrix& X, int rounds) const {
  const int use = std::clamp(rounds, 0, this->rounds());
  Vector f = Vector::Zero(X.rows());
  for (int t = 0; t < use; ++t) {
    for (Index r = 0; r < X.rows(); ++r) f(r) += contribution(stumps_[t], X.row(r));
  }
  return f;
}

Matrix AdaBoostSammeR::predict_proba(const Matrix& X) const {
  if (stumps_.empty()) return two_column_proba(Vector::Constant(X.rows(), prior_));
  const Vector f = decision_function(X, rounds());
  Vector p1(f.size());
  for (Index i = 0; i < f.size(); ++i) p1(i) = sigmoid(2.0 * f(i));
  return two_column_proba(p1);
}

json AdaBoostSammeR::state() const {
  json stumps = json::array();
  for (const auto& s : stumps_) stumps.push_back(s.state());
  return {{"stumps", stumps},
          {"errors", errors_},
          {"learning_rate", learning_rate_},
          {"prior", prior_}};
}

AdaBoostSammeR AdaBoostSammeR::from_state(const json& j) {
  AdaBoostSammeR m;
  for (const auto& s : j.at("stumps")) m.stumps_.push_back(DecisionTree::from_state(s));
  m.errors_ = j.at("errors").get<std::vector<double>>();
  m.learning_rate_ = j.at("learning_rate").get<double>();
  m.prior_ = j.at("prior").get<double>();
  return m;
}

// --- gradient boosting ------------------------------------------------------

double binomial_deviance(const Labels& y, const Vector& raw) {
  double total = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    // -2 [y F - log(1 + e^F)]
    const double f = raw(i);
    const double log1pexp = f > 0.0 ? f + std::log1p(std::exp(-f)) : std::log1p(std::exp(f));
    total += -2.0 * (y(i) * f - log1pexp);
  }
  return total / static_cast<double>(y.size());
}

GradientBoosting GradientBoosting::fit(const Matrix& X, const Labels& y, int n_estimators,
                                       double learning_rate, int max_depth,
                                       int min_samples_split) {
  const Index n = X.rows();
  const Index pos = y.sum();
  if (pos == 0 || pos == n) {
    throw ModelError("gradient_boosting needs both classes in the training data");
  }
  GradientBoosting model;
  model.learning_rate_ = learning_rate;
  const double prior = static_cast<double>(pos) / static_cast<double>(n);
  model.init_ = std::log(prior / (1.0 - prior));

  Vector raw = Vector::Constant(n, model.init_);
  model.deviance_.push_back(binomial_deviance(y, raw));
  std::vector<int> leaf_of_row;
  for (int m = 0; m < n_estimators; ++m) {
    Vector residual(n), hess(n);
    for (Index i = 0; i < n; ++i) {
      const double p = sigmoid(raw(i));
      residual(i) = y(i) - p;
      hess(i) = p * (1.0 - p);
    }
    RegressionTree tree = RegressionTree::fit(X, residual, max_depth, min_samples_split, leaf_of_row);
    std::vector<double> num(tree.nodes().size(), 0.0), den(tree.nodes().size(), 0.0);
    for (Index i = 0; i < n; ++i) {
      num[static_cast<std::size_t>(leaf_of_row[static_cast<std::size_t>(i)])] += residual(i);
      den[static_cast<std::size_t>(leaf_of_row[static_cast<std::size_t>(i)])] += hess(i);
    }
    for (std::size_t leaf = 0; leaf < num.size(); ++leaf) {
      if (tree.nodes()[leaf].feature >= 0) continue;
      tree.set_leaf_value(static_cast<int>(leaf), den[leaf] < 1e-150 ? 0.0 : num[leaf] / den[leaf]);
    }
    for (Index i = 0; i < n; ++i) {
      raw(i) += learning_rate *
                tree.nodes()[static_cast<std::size_t>(leaf_of_row[static_cast<std::size_t>(i)])].value;
    }
    model.trees_.push_back(std::move(tree));
    model.deviance_.push_back(binomial_deviance(y, raw));
  }
  return model;
}

Vector GradientBoosting::decision_function(const Matrix& X) const {
  Vector raw = Vector::Constant(X.rows(), init_);
  for (const auto& tree : trees_) {
    for (Index r = 0; r < X.rows(); ++r) raw(r) += learning_rate_ * tree.predict(X.row(r));
  }
  return raw;
}

Matrix GradientBoosting::predict_proba(const Matrix& X) const {
  const Vector raw = decision_function(X);
  Vector p1(raw.size());
  for (Index i = 0; i < raw.size(); ++i) p1(i) = sigmoid(raw(i));
  return two_column_proba(p1);
}

json GradientBoosting::state() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.state());
  return {{"trees", trees},
          {"init", init_},
          {"learning_rate", learning_rate_},
          {"train_deviance", deviance_}};
}

GradientBoosting GradientBoosting::from_state(const json& j) {
  GradientBoosting m;
  for (const auto& t : j.at("trees")) m.trees_.push_back(RegressionTree::from_state(t));
  m.init_ = j.at("init").get<double>();
  m.learning_rate_ = j.at("learning_rate").get<double>();
  m.deviance_ = j.at("train_deviance").get<std::vector<double>>();
  return m;
}

}  // namespace stga
