#include "stga/learners.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "stga/learners/boosting.hpp"
#include "stga/learners/linear.hpp"
#include "stga/learners/mlp.hpp"
#include "stga/learners/svm.hpp"
#include "stga/learners/tree.hpp"

namespace stga {

namespace {

const std::map<Algorithm, std::string>& algorithm_names() {
  static const std::map<Algorithm, std::string> names = {
      {Algorithm::decision_tree, "decision_tree"},
      {Algorithm::random_forest, "random_forest"},
      {Algorithm::extra_trees, "extra_trees"},
      {Algorithm::knn, "knn"},
      {Algorithm::gaussian_nb, "gaussian_nb"},
      {Algorithm::mlp, "mlp"},
      {Algorithm::adaboost, "adaboost"},
      {Algorithm::gradient_boosting, "gradient_boosting"},
      {Algorithm::svm, "svm"},
      {Algorithm::logistic_regression, "logistic_regression"},
      {Algorithm::bagging, "bagging"},
  };
  return names;
}

// Allowed values for enumerated string hyperparameters.
const std::map<std::string, std::set<std::string>>& string_choices() {
  static const std::map<std::string, std::set<std::string>> choices = {
      {"criterion", {"gini", "entropy", "friedman_mse"}},
      {"splitter", {"best", "random"}},
      {"weights", {"uniform"}},
      {"activation", {"relu"}},
      {"learning_rate_schedule", {"constant", "adaptive"}},
      {"loss", {"deviance"}},
      {"kernel", {"linear", "poly", "rbf", "sigmoid"}},
  };
  return choices;
}

void check_value(Algorithm a, const std::string& key, const json& value, const json& def) {
  const std::string where = to_string(a) + "." + key;
  if (key == "max_features") {
    MaxFeatures::parse(value);
    return;
  }
  if (key == "gamma") {
    if (value.is_string() && value.get<std::string>() == "scale") return;
    if (value.is_number() && value.get<double>() > 0.0) return;
    throw ConfigError(where + " must be \"scale\" or a positive number");
  }
  if (key == "base") {
    if (!value.is_object()) throw ConfigError(where + " must be a learner spec object");
    const LearnerSpec inner = LearnerSpec::from_json(value);
    if (inner.algorithm == Algorithm::bagging) throw ConfigError(where + " cannot nest bagging");
    return;
  }
  if (def.is_number_integer()) {
    if (!value.is_number_integer()) throw ConfigError(where + " must be an integer");
  } else if (def.is_number()) {
    if (!value.is_number()) throw ConfigError(where + " must be a number");
  } else if (def.is_boolean()) {
    if (!value.is_boolean()) throw ConfigError(where + " must be true or false");
  } else if (def.is_string()) {
    if (!value.is_string()) throw ConfigError(where + " must be a string");
    const auto it = string_choices().find(key);
    if (it != string_choices().end() && !it->second.count(value.get<std::string>())) {
      throw ConfigError(where + ": unsupported value '" + value.get<std::string>() + "'");
    }
  }
}

}  // namespace

std::string to_string(Algorithm a) { return algorithm_names().at(a); }

Algorithm algorithm_from_string(const std::string& name) {
  for (const auto& [a, n] : algorithm_names()) {
    if (n == name) return a;
  }
  throw ConfigError("unknown algorithm '" + name + "'");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> all = [] {
    std::vector<Algorithm> v;
    for (const auto& [a, n] : algorithm_names()) v.push_back(a);
    return v;
  }();
  return all;
}

json default_hyperparameters(Algorithm a) {
  switch (a) {
    case Algorithm::decision_tree:
      return {{"criterion", "entropy"}, {"splitter", "best"},      {"max_depth", 3},
              {"max_features", "auto"}, {"min_samples_split", 2}, {"min_samples_leaf", 1}};
    case Algorithm::random_forest:
      return {{"n_estimators", 100},   {"criterion", "entropy"},   {"max_depth", 10},
              {"max_features", "all"}, {"bootstrap", true},        {"min_samples_split", 2},
              {"min_samples_leaf", 1}};
    case Algorithm::extra_trees:
      return {{"n_estimators", 50},     {"criterion", "gini"}, {"max_depth", 3},
              {"max_features", "auto"}, {"bootstrap", false},  {"min_samples_split", 2},
              {"min_samples_leaf", 1}};
    case Algorithm::knn:
      return {{"n_neighbors", 5}, {"p", 2.0}, {"weights", "uniform"}};
    case Algorithm::gaussian_nb:
      return {{"var_smoothing", 1e-9}};
    case Algorithm::mlp:
      return {{"hidden_units", 100},
              {"activation", "relu"},
              {"batch_size", 100},
              {"max_epochs", 100},
              {"learning_rate_schedule", "adaptive"},
              {"learning_rate_init", 1e-3},
              {"alpha", 1e-4}};
    case Algorithm::adaboost:
      return {{"n_estimators", 100}, {"learning_rate", 1.0}};
    case Algorithm::gradient_boosting:
      return {{"n_estimators", 50},           {"learning_rate", 0.1},  {"max_depth", 3},
              {"min_samples_split", 2},       {"loss", "deviance"},    {"criterion", "friedman_mse"}};
    case Algorithm::svm:
      return {{"kernel", "sigmoid"}, {"gamma", "scale"}, {"coef0", 0.0}, {"degree", 3},
              {"C", 1.0},            {"tol", 1e-3},      {"max_passes", 10}};
    case Algorithm::logistic_regression:
      return {{"l2", 1.0}, {"max_iter", 1000}, {"tol", 1e-6}};
    case Algorithm::bagging:
      return {{"n_estimators", 10},
              {"base",
               {{"algorithm", "decision_tree"},
                {"hyperparameters",
                 {{"criterion", "gini"}, {"max_depth", -1}, {"max_features", "all"}}}}}};
  }
  return json::object();
}

void validate(const LearnerSpec& spec) {
  const json defaults = default_hyperparameters(spec.algorithm);
  if (!spec.hyperparameters.is_object()) {
    throw ConfigError(to_string(spec.algorithm) + ": hyperparameters must be an object");
  }
  for (const auto& [key, value] : spec.hyperparameters.items()) {
    if (!defaults.contains(key)) {
      throw ConfigError("unknown hyperparameter '" + key + "' for " + to_string(spec.algorithm));
    }
    check_value(spec.algorithm, key, value, defaults.at(key));
  }
  if (spec.algorithm == Algorithm::decision_tree || spec.algorithm == Algorithm::random_forest ||
      spec.algorithm == Algorithm::extra_trees) {
    const auto& hp = spec.hyperparameters;
    const auto& crit = hp.contains("criterion") ? hp.at("criterion") : defaults.at("criterion");
    if (crit == "friedman_mse") throw ConfigError("friedman_mse is a regression criterion");
  }
  if (spec.algorithm == Algorithm::gradient_boosting && spec.hyperparameters.contains("criterion") &&
      spec.hyperparameters.at("criterion") != "friedman_mse") {
    throw ConfigError("gradient_boosting supports only the friedman_mse criterion");
  }
}

LearnerSpec make_spec(Algorithm a, const json& overrides, std::uint64_t seed, std::string name) {
  LearnerSpec spec;
  spec.algorithm = a;
  spec.seed = seed;
  spec.name = std::move(name);
  spec.hyperparameters = overrides.is_null() ? json::object() : overrides;
  validate(spec);
  json full = default_hyperparameters(a);
  full.update(spec.hyperparameters);
  spec.hyperparameters = std::move(full);
  return spec;
}

json LearnerSpec::to_json() const {
  json j = {{"algorithm", stga::to_string(algorithm)},
            {"hyperparameters", hyperparameters},
            {"seed", seed}};
  if (!name.empty()) j["name"] = name;
  return j;
}

LearnerSpec LearnerSpec::from_json(const json& j) {
  if (!j.is_object() || !j.contains("algorithm")) {
    throw ConfigError("learner spec needs an \"algorithm\" field");
  }
  for (const auto& [key, value] : j.items()) {
    if (key != "algorithm" && key != "hyperparameters" && key != "seed" && key != "name") {
      throw ConfigError("unknown learner spec field '" + key + "'");
    }
  }
  return make_spec(algorithm_from_string(j.at("algorithm").get<std::string>()),
                   j.value("hyperparameters", json::object()), j.value("seed", std::uint64_t{0}),
                   j.value("name", std::string{}));
}

// --- trained model ----------------------------------------------------------

TrainedModel::TrainedModel(LearnerSpec spec, Index n_features,
                           std::shared_ptr<const Classifier> impl)
    : spec_(std::move(spec)), n_features_(n_features), impl_(std::move(impl)) {}

void TrainedModel::check_columns(const Matrix& X) const {
  if (X.cols() != n_features_) {
    throw DataError(spec_.display_name() + ": expected " + std::to_string(n_features_) +
                    " features, got " + std::to_string(X.cols()));
  }
}

Matrix TrainedModel::predict_proba(const Matrix& X) const {
  check_columns(X);
  return impl_->predict_proba(X);
}

Labels TrainedModel::predict(const Matrix& X) const {
  return threshold_labels(predict_proba(X).col(1));
}

Vector TrainedModel::positive_probability(const Matrix& X) const {
  return predict_proba(X).col(1);
}

Labels threshold_labels(const Vector& p1) {
  Labels out(p1.size());
  for (Index i = 0; i < p1.size(); ++i) out(i) = p1(i) > 0.5 ? 1 : 0;
  return out;
}

Matrix two_column_proba(const Vector& p1) {
  Matrix out(p1.size(), 2);
  out.col(1) = p1.cwiseMax(0.0).cwiseMin(1.0);
  out.col(0) = (1.0 - out.col(1).array()).matrix();
  return out;
}

namespace {

std::shared_ptr<const Classifier> fit_impl(const LearnerSpec& spec, const Matrix& X,
                                           const Labels& y) {
  switch (spec.algorithm) {
    case Algorithm::decision_tree: {
      TreeOptions opt = tree_options_from(spec);
      opt.random_thresholds = spec.param<std::string>("splitter") == "random";
      Rng rng(spec.seed);
      return std::make_shared<DecisionTree>(
          DecisionTree::fit(X, y, Vector::Ones(X.rows()), opt, rng));
    }
    case Algorithm::random_forest:
    case Algorithm::extra_trees: {
      TreeOptions opt = tree_options_from(spec);
      opt.random_thresholds = spec.algorithm == Algorithm::extra_trees;
      return std::make_shared<TreeEnsemble>(
          TreeEnsemble::fit(X, y, opt, spec.param<int>("n_estimators"),
                            spec.param<bool>("bootstrap"), spec.seed));
    }
    case Algorithm::knn:
      return std::make_shared<KNearestNeighbors>(
          KNearestNeighbors::fit(X, y, spec.param<int>("n_neighbors"), spec.param<double>("p")));
    case Algorithm::gaussian_nb:
      return std::make_shared<GaussianNaiveBayes>(
          GaussianNaiveBayes::fit(X, y, spec.param<double>("var_smoothing")));
    case Algorithm::mlp: {
      MlpOptions opt;
      opt.hidden_units = spec.param<Index>("hidden_units");
      opt.batch_size = spec.param<int>("batch_size");
      opt.max_epochs = spec.param<int>("max_epochs");
      opt.adaptive = spec.param<std::string>("learning_rate_schedule") == "adaptive";
      opt.learning_rate = spec.param<double>("learning_rate_init");
      opt.alpha = spec.param<double>("alpha");
      return std::make_shared<MultilayerPerceptron>(MultilayerPerceptron::fit(X, y, opt, spec.seed));
    }
    case Algorithm::adaboost:
      return std::make_shared<AdaBoostSammeR>(AdaBoostSammeR::fit(
          X, y, spec.param<int>("n_estimators"), spec.param<double>("learning_rate")));
    case Algorithm::gradient_boosting:
      return std::make_shared<GradientBoosting>(GradientBoosting::fit(
          X, y, spec.param<int>("n_estimators"), spec.param<double>("learning_rate"),
          spec.param<int>("max_depth"), spec.param<int>("min_samples_split")));
    case Algorithm::svm: {
      SupportVectorMachine::Options opt;
      opt.kernel = Kernel::parse(spec.param<std::string>("kernel"));
      const auto& gamma = spec.hyperparameters.at("gamma");
      opt.gamma = gamma.is_number() ? gamma.get<double>() : -1.0;
      opt.coef0 = spec.param<double>("coef0");
      opt.degree = spec.param<int>("degree");
      opt.C = spec.param<double>("C");
      opt.tol = spec.param<double>("tol");
      opt.max_passes = spec.param<long>("max_passes");
      return std::make_shared<SupportVectorMachine>(SupportVectorMachine::fit(X, y, opt));
    }
    case Algorithm::logistic_regression:
      return std::make_shared<LogisticRegression>(
          LogisticRegression::fit(X, y, spec.param<double>("l2"), spec.param<int>("max_iter"),
                                  spec.param<double>("tol")));
    case Algorithm::bagging:
      return std::make_shared<Bagging>(
          Bagging::fit(X, y, LearnerSpec::from_json(spec.hyperparameters.at("base")),
                       spec.param<int>("n_estimators"), spec.seed));
  }
  throw ConfigError("unhandled algorithm");
}

std::shared_ptr<const Classifier> load_impl(Algorithm a, const json& state) {
  switch (a) {
    case Algorithm::decision_tree:
      return std::make_shared<DecisionTree>(DecisionTree::from_state(state));
    case Algorithm::random_forest:
    case Algorithm::extra_trees:
      return std::make_shared<TreeEnsemble>(TreeEnsemble::from_state(state));
    case Algorithm::knn:
      return std::make_shared<KNearestNeighbors>(KNearestNeighbors::from_state(state));
    case Algorithm::gaussian_nb:
      return std::make_shared<GaussianNaiveBayes>(GaussianNaiveBayes::from_state(state));
    case Algorithm::mlp:
      return std::make_shared<MultilayerPerceptron>(MultilayerPerceptron::from_state(state));
    case Algorithm::adaboost:
      return std::make_shared<AdaBoostSammeR>(AdaBoostSammeR::from_state(state));
    case Algorithm::gradient_boosting:
      return std::make_shared<GradientBoosting>(GradientBoosting::from_state(state));
    case Algorithm::svm:
      return std::make_shared<SupportVectorMachine>(SupportVectorMachine::from_state(state));
    case Algorithm::logistic_regression:
      return std::make_shared<LogisticRegression>(LogisticRegression::from_state(state));
    case Algorithm::bagging:
      return std::make_shared<Bagging>(Bagging::from_state(state));
  }
  throw ModelError("unhandled algorithm");
}

}  // namespace

TrainedModel train(const LearnerSpec& spec, const Matrix& X, const Labels& y) {
  if (X.rows() == 0) throw DataError(spec.display_name() + ": empty training set");
  if (X.rows() != y.size()) throw DataError(spec.display_name() + ": row/label count mismatch");
  validate(spec);
  LearnerSpec full = make_spec(spec.algorithm, spec.hyperparameters, spec.seed, spec.name);
  auto impl = fit_impl(full, X, y);
  return TrainedModel(std::move(full), X.cols(), std::move(impl));
}

json TrainedModel::to_json() const {
  return {{"format", "stga-model"},
          {"format_version", kModelFormatVersion},
          {"spec", spec_.to_json()},
          {"n_features", n_features_},
          {"state", impl_->state()}};
}

TrainedModel TrainedModel::from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "stga-model") {
      throw ModelError("not a model artifact");
    }
    const int version = j.at("format_version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelError("unsupported model format version " + std::to_string(version));
    }
    LearnerSpec spec = LearnerSpec::from_json(j.at("spec"));
    auto impl = load_impl(spec.algorithm, j.at("state"));
    return TrainedModel(std::move(spec), j.at("n_features").get<Index>(), std::move(impl));
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model artifact: ") + e.what());
  }
}

}  // namespace stga
