#include <gtest/gtest.h>

#include <cmath>

#include "stga/learners.hpp"
#include "stga/learners/boosting.hpp"
#include "stga/learners/linear.hpp"
#include "stga/learners/mlp.hpp"
#include "stga/learners/svm.hpp"
#include "stga/learners/tree.hpp"
#include "stga/metrics.hpp"
#include "test_support.hpp"

namespace stga {

// keeps discovered test names readable
void PrintTo(Algorithm a, std::ostream* os) { *os << to_string(a); }

namespace {

double test_accuracy(const TrainedModel& m, const Dataset& test) {
  return *accuracy(confusion(test.labels, m.predict(test.features)));
}

const Dataset& pima() {
  static const Dataset ds = impute_median(load_csv(testing::pima_path(), Schema::pima(), true));
  return ds;
}

class EveryAlgorithm : public ::testing::TestWithParam<Algorithm> {};

TEST_P(EveryAlgorithm, SeparableCloudsAtLeast95Percent) {
  const Dataset train_set = testing::gaussian_clouds(500, 3.0, 0.5, 1);
  const Dataset test_set = testing::gaussian_clouds(500, 3.0, 0.5, 2);
  const auto model = train(make_spec(GetParam(), {}, 7), train_set);
  EXPECT_GE(test_accuracy(model, test_set), 0.95) << to_string(GetParam());
}

TEST_P(EveryAlgorithm, ProbabilitiesAreDistributions) {
  const Dataset ds = testing::gaussian_clouds(120, 1.0, 1.5, 3, 3);
  const auto model = train(make_spec(GetParam(), {}, 7), ds);
  const Matrix p = model.predict_proba(ds.features);
  ASSERT_EQ(p.cols(), 2);
  for (Index r = 0; r < p.rows(); ++r) {
    EXPECT_GE(p(r, 0), 0.0);
    EXPECT_LE(p(r, 1), 1.0);
    EXPECT_NEAR(p(r, 0) + p(r, 1), 1.0, 1e-9);
  }
  const Labels y = model.predict(ds.features);
  for (Index r = 0; r < p.rows(); ++r) EXPECT_EQ(y(r), p(r, 1) > p(r, 0) ? 1 : 0);
}

TEST_P(EveryAlgorithm, DeterministicGivenSeed) {
  const Dataset ds = testing::gaussian_clouds(150, 1.0, 1.5, 4, 3);
  const auto spec = make_spec(GetParam(), {}, 99);
  EXPECT_EQ(train(spec, ds).predict_proba(ds.features), train(spec, ds).predict_proba(ds.features));
}

TEST_P(EveryAlgorithm, SerializationRoundTripIsLossless) {
  const Dataset ds = testing::gaussian_clouds(150, 1.0, 1.5, 5, 3);
  const auto model = train(make_spec(GetParam(), {}, 3), ds);
  const auto text = model.to_json().dump();
  const auto loaded = TrainedModel::from_json(json::parse(text));
  EXPECT_EQ(loaded.spec(), model.spec());
  EXPECT_EQ(loaded.predict_proba(ds.features), model.predict_proba(ds.features));
}

TEST_P(EveryAlgorithm, RejectsWrongFeatureCount) {
  const Dataset ds = testing::gaussian_clouds(60, 2.0, 1.0, 6, 3);
  const auto model = train(make_spec(GetParam(), {}, 3), ds);
  EXPECT_THROW(model.predict(Matrix::Zero(2, 4)), DataError);
}

INSTANTIATE_TEST_SUITE_P(Learners, EveryAlgorithm, ::testing::ValuesIn(all_algorithms()),
                         [](const auto& info) { return to_string(info.param); });

TEST(Spec, DefaultsAndValidation) {
  const auto rf = make_spec(Algorithm::random_forest);
  EXPECT_EQ(rf.param<int>("n_estimators"), 100);
  EXPECT_EQ(rf.param<std::string>("criterion"), "entropy");
  EXPECT_EQ(rf.param<int>("max_depth"), 10);
  EXPECT_EQ(rf.param<std::string>("max_features"), "all");
  const auto et = make_spec(Algorithm::extra_trees);
  EXPECT_EQ(et.param<int>("n_estimators"), 50);
  EXPECT_EQ(et.param<std::string>("criterion"), "gini");
  EXPECT_EQ(et.param<int>("max_depth"), 3);
  EXPECT_EQ(make_spec(Algorithm::knn).param<int>("n_neighbors"), 5);
  EXPECT_EQ(make_spec(Algorithm::gradient_boosting).param<int>("n_estimators"), 50);
  EXPECT_EQ(make_spec(Algorithm::adaboost).param<int>("n_estimators"), 100);
  EXPECT_EQ(make_spec(Algorithm::svm).param<std::string>("kernel"), "sigmoid");
  EXPECT_EQ(make_spec(Algorithm::mlp).param<int>("batch_size"), 100);

  EXPECT_THROW(make_spec(Algorithm::knn, {{"neighbours", 3}}), ConfigError);
  EXPECT_THROW(make_spec(Algorithm::knn, {{"n_neighbors", "three"}}), ConfigError);
  EXPECT_THROW(make_spec(Algorithm::decision_tree, {{"criterion", "chaos"}}), ConfigError);
  EXPECT_THROW(make_spec(Algorithm::svm, {{"gamma", "auto"}}), ConfigError);
  EXPECT_THROW(algorithm_from_string("perceptron"), ConfigError);
  EXPECT_NO_THROW(make_spec(Algorithm::svm, {{"gamma", 0.5}}));
  const auto spec = make_spec(Algorithm::bagging, {{"n_estimators", 3}}, 4, "bag");
  EXPECT_EQ(LearnerSpec::from_json(spec.to_json()), spec);
}

TEST(DecisionTreeTest, TableFiveTreeOnPimaRespectsDepth) {
  const auto model = train(make_spec(Algorithm::decision_tree, {}, 1), pima());
  const auto& tree = model.as<DecisionTree>();
  EXPECT_LE(tree.depth(), 3);
  EXPECT_GT(tree.leaf_count(), 1);
}

TEST(DecisionTreeTest, LeavesHoldTheMajorityOfTheirRows) {
  const Dataset& ds = pima();
  const auto model = train(
      make_spec(Algorithm::decision_tree, {{"max_features", "all"}, {"max_depth", 4}}, 1), ds);
  const auto& tree = model.as<DecisionTree>();
  std::vector<double> ones(tree.nodes().size(), 0.0), count(tree.nodes().size(), 0.0);
  for (Index r = 0; r < ds.rows(); ++r) {
    int n = 0;
    while (tree.nodes()[n].feature >= 0) {
      const auto& node = tree.nodes()[n];
      n = ds.features(r, node.feature) <= node.threshold ? node.left : node.right;
    }
    ones[n] += ds.labels(r);
    count[n] += 1.0;
  }
  for (std::size_t n = 0; n < tree.nodes().size(); ++n) {
    if (tree.nodes()[n].feature >= 0) continue;
    EXPECT_DOUBLE_EQ(tree.nodes()[n].p1, ones[n] / count[n]);
    EXPECT_LE(tree.nodes()[n].depth, 4);
  }
}

TEST(DecisionTreeTest, ConstantFeaturesGiveSingleLeaf) {
  Matrix X = Matrix::Constant(6, 2, 1.5);
  Labels y = (Labels(6) << 1, 1, 1, 0, 0, 1).finished();
  const auto model = train(make_spec(Algorithm::decision_tree, {{"max_features", "all"}}), X, y);
  EXPECT_EQ(model.as<DecisionTree>().nodes().size(), 1u);
  EXPECT_EQ(model.predict(X), Labels::Ones(6));
}

TEST(DecisionTreeTest, EqualGainPrefersLowestFeature) {
  // both features separate the classes perfectly
  Matrix X(4, 2);
  X << 0, 0, 0, 0, 1, 1, 1, 1;
  const Labels y = (Labels(4) << 0, 0, 1, 1).finished();
  const auto model = train(make_spec(Algorithm::decision_tree, {{"max_features", "all"}}), X, y);
  const auto& root = model.as<DecisionTree>().nodes().front();
  EXPECT_EQ(root.feature, 0);
  EXPECT_DOUBLE_EQ(root.threshold, 0.5);
}

TEST(RandomForestTest, TableFiveForestShape) {
  const auto model = train(make_spec(Algorithm::random_forest, {}, 2), pima());
  const auto& forest = model.as<TreeEnsemble>();
  ASSERT_EQ(forest.trees().size(), 100u);
  for (const auto& t : forest.trees()) EXPECT_LE(t.depth(), 10);
}

TEST(KnnTest, NearestNeighbourOfATrainingPointIsItself) {
  Matrix X(2, 2);
  X << 0, 0, 1, 1;
  const Labels y = (Labels(2) << 0, 1).finished();
  const auto model = train(make_spec(Algorithm::knn, {{"n_neighbors", 1}}), X, y);
  EXPECT_EQ(model.predict(X), y);

  const Dataset ds = testing::gaussian_clouds(200, 0.5, 1.0, 8, 3);
  const auto k1 = train(make_spec(Algorithm::knn, {{"n_neighbors", 1}}), ds);
  EXPECT_EQ(test_accuracy(k1, ds), 1.0);
}

TEST(KnnTest, IdenticalPositivesAlwaysVoteOne) {
  const Matrix X = Matrix::Constant(5, 3, 2.0);
  const Labels y = Labels::Ones(5);
  const auto model = train(make_spec(Algorithm::knn), X, y);
  Matrix queries(3, 3);
  queries << -5, 0, 1, 2, 2, 2, 100, 100, 100;
  EXPECT_EQ(model.predict(queries), Labels::Ones(3));
}

TEST(GaussianNbTest, WellSeparatedCloudsAbove99Percent) {
  const Dataset train_set = testing::gaussian_clouds(1000, 3.0, 1.0, 10, 1);
  const Dataset test_set = testing::gaussian_clouds(1000, 3.0, 1.0, 11, 1);
  const auto model = train(make_spec(Algorithm::gaussian_nb), train_set);
  EXPECT_GE(test_accuracy(model, test_set), 0.99);
}

TEST(GaussianNbTest, EquidistantPointIsHalfAndGoesToClassZero) {
  Matrix X(4, 1);
  X << -3, -1, 1, 3;
  const Labels y = (Labels(4) << 0, 0, 1, 1).finished();
  const auto model = train(make_spec(Algorithm::gaussian_nb), X, y);
  const Matrix p = model.predict_proba(Matrix::Zero(1, 1));
  EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
  EXPECT_EQ(model.predict(Matrix::Zero(1, 1))(0), 0);
}

TEST(LogisticTest, ZeroWeightsGiveHalfEverywhere) {
  const LogisticRegression lr(Vector::Zero(3), 0.0);
  const TrainedModel model(make_spec(Algorithm::logistic_regression), 3,
                           std::make_shared<LogisticRegression>(lr));
  const Matrix p = model.predict_proba(Matrix::Random(5, 3));
  EXPECT_TRUE((p.array() == 0.5).all());
  EXPECT_EQ(model.predict(Matrix::Random(5, 3)), Labels::Zero(5));
}

TEST(LogisticTest, ConvergesAndMatchesStationarity) {
  const Dataset ds = testing::informative_first_feature(300, 3, 0.5, 12);
  LogisticRegression::Fit info;
  const auto lr = LogisticRegression::fit(ds.features, ds.labels, 1.0, 1000, 1e-6, &info);
  EXPECT_TRUE(info.converged);
  // gradient of the penalised objective vanishes at the optimum
  Vector p(ds.rows());
  const Vector z = lr.decision_function(ds.features);
  for (Index i = 0; i < z.size(); ++i) p(i) = sigmoid(z(i));
  const Vector resid = p - ds.labels.cast<double>();
  const Vector gw = ds.features.transpose() * resid + lr.weights();
  EXPECT_LT(gw.cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(std::abs(resid.sum()), 1e-6);
  EXPECT_GT(std::abs(lr.weights()(0)), 5.0 * std::abs(lr.weights()(1)));
}

TEST(LogisticTest, SingleClassIsError) {
  EXPECT_THROW(train(make_spec(Algorithm::logistic_regression), Matrix::Zero(3, 1), Labels::Ones(3)),
               ModelError);
}

TEST(AdaBoostTest, ZeroRoundsReturnsPrior) {
  const Dataset ds = testing::gaussian_clouds(40, 1.0, 1.0, 13, 2);
  Labels y = ds.labels;
  y(0) = 1;  // 21 positives out of 40
  const auto model = train(make_spec(Algorithm::adaboost, {{"n_estimators", 0}}), ds.features, y);
  const Matrix p = model.predict_proba(ds.features);
  EXPECT_DOUBLE_EQ(p(3, 1), 21.0 / 40.0);
}

TEST(AdaBoostTest, ExponentialLossNeverIncreases) {
  const Dataset& ds = pima();
  const auto model = train(make_spec(Algorithm::adaboost), ds);
  const auto& ada = model.as<AdaBoostSammeR>();
  ASSERT_GT(ada.rounds(), 10);
  double previous = HUGE_VAL;
  for (int t = 0; t <= ada.rounds(); ++t) {
    const Vector f = ada.decision_function(ds.features, t);
    double loss = 0.0;
    for (Index i = 0; i < ds.rows(); ++i) loss += std::exp(-(ds.labels(i) ? 1.0 : -1.0) * f(i));
    loss /= static_cast<double>(ds.rows());
    EXPECT_LE(loss, previous * (1.0 + 1e-12)) << "round " << t;
    previous = loss;
  }
}

TEST(AdaBoostTest, TrainingErrorNonIncreasingOnSeparableCurve) {
  // one-dimensional threshold task; every stump round refines the vote
  const Dataset ds = testing::informative_first_feature(200, 1, 0.0, 14);
  const auto model = train(make_spec(Algorithm::adaboost, {{"n_estimators", 30}}), ds);
  const auto& ada = model.as<AdaBoostSammeR>();
  double previous = 1.0;
  for (int t = 1; t <= ada.rounds(); ++t) {
    const Vector f = ada.decision_function(ds.features, t);
    Index wrong = 0;
    for (Index i = 0; i < ds.rows(); ++i) wrong += (f(i) > 0.0 ? 1 : 0) != ds.labels(i);
    const double err = static_cast<double>(wrong) / static_cast<double>(ds.rows());
    EXPECT_LE(err, previous);
    previous = err;
  }
}

TEST(AdaBoostTest, StopsWhenAStumpIsPerfect) {
  Matrix X(4, 1);
  X << 0, 1, 2, 3;
  const Labels y = (Labels(4) << 0, 0, 1, 1).finished();
  const auto model = train(make_spec(Algorithm::adaboost), X, y);
  EXPECT_EQ(model.as<AdaBoostSammeR>().rounds(), 1);
  EXPECT_EQ(model.predict(X), y);
}

TEST(GradientBoostingTest, TrainingDevianceDecreases) {
  const auto model = train(make_spec(Algorithm::gradient_boosting), pima());
  const auto& dev = model.as<GradientBoosting>().train_deviance();
  ASSERT_EQ(dev.size(), 51u);
  for (std::size_t i = 1; i < 6; ++i) EXPECT_LT(dev[i], dev[i - 1]);
  for (std::size_t i = 1; i < dev.size(); ++i) EXPECT_LE(dev[i], dev[i - 1] + 1e-12);
}

TEST(MlpTest, AnalyticGradientMatchesFiniteDifferences) {
  Rng rng(21);
  Matrix X(5, 3);
  for (Index i = 0; i < X.size(); ++i) X(i) = rng.normal();
  const Labels y = (Labels(5) << 0, 1, 1, 0, 1).finished();
  MlpParameters params = MlpParameters::random(3, 7, rng);
  params.b1 = Vector::Constant(7, 0.05);
  MlpParameters grad = MlpParameters::zeros_like(params);
  mlp_loss_gradient(params, X, y, 1e-2, &grad);
  const Vector analytic = grad.flatten();
  const Vector theta = params.flatten();
  Vector numeric(theta.size());
  const double h = 1e-6;
  MlpParameters probe = params;
  for (Index k = 0; k < theta.size(); ++k) {
    Vector t = theta;
    t(k) += h;
    probe.unflatten(t);
    const double up = mlp_loss_gradient(probe, X, y, 1e-2, nullptr);
    t(k) -= 2 * h;
    probe.unflatten(t);
    const double down = mlp_loss_gradient(probe, X, y, 1e-2, nullptr);
    numeric(k) = (up - down) / (2 * h);
  }
  const double rel = (analytic - numeric).norm() / std::max(analytic.norm(), numeric.norm());
  EXPECT_LT(rel, 1e-4);
}

TEST(MlpTest, LossCurveImprovesOnPima) {
  const Standardizer s = Standardizer::fit(pima());
  const auto model = train(make_spec(Algorithm::mlp, {}, 5), s.apply(pima()));
  const auto& curve = model.as<MultilayerPerceptron>().loss_curve();
  ASSERT_EQ(curve.size(), 100u);
  EXPECT_LT(curve.back(), curve.front());
}

TEST(SvmTest, SmoSatisfiesKktConditions) {
  for (auto kernel : {Kernel::Type::linear, Kernel::Type::rbf, Kernel::Type::sigmoid}) {
    const Dataset ds = testing::gaussian_clouds(160, 1.0, 1.2, 22, 2);
    Kernel k;
    k.type = kernel;
    k.gamma = scale_gamma(ds.features);
    Matrix gram(ds.rows(), ds.rows());
    for (Index i = 0; i < ds.rows(); ++i) {
      for (Index j = 0; j < ds.rows(); ++j) gram(i, j) = k(ds.features.row(i), ds.features.row(j));
    }
    Vector signs = (2 * ds.labels.cast<double>().array() - 1.0).matrix();
    const auto sol = smo_solve(gram, signs, 1.0, 1e-3, 10'000'000);
    EXPECT_TRUE(sol.converged) << Kernel::name(kernel);
    EXPECT_LT(max_kkt_violation(gram, signs, sol, 1.0), 1e-3) << Kernel::name(kernel);
    EXPECT_NEAR(sol.alpha.dot(signs), 0.0, 1e-9);
    EXPECT_GE(sol.alpha.minCoeff(), 0.0);
    EXPECT_LE(sol.alpha.maxCoeff(), 1.0);
  }
}

TEST(SvmTest, PimaSigmoidKernelConverges) {
  const Standardizer s = Standardizer::fit(pima());
  const Dataset ds = s.apply(pima());
  SupportVectorMachine::Options opt;
  SmoResult diag;
  SupportVectorMachine::fit(ds.features, ds.labels, opt, &diag);
  EXPECT_TRUE(diag.converged) << diag.iterations;
  EXPECT_LT(diag.gap, 1e-3);
}

TEST(BaggingTest, AcceptsAnyInnerLearner) {
  const Dataset ds = testing::gaussian_clouds(100, 2.0, 1.0, 23, 2);
  const auto spec = make_spec(Algorithm::bagging,
                              {{"n_estimators", 5}, {"base", {{"algorithm", "knn"}}}}, 1);
  const auto model = train(spec, ds);
  EXPECT_EQ(model.as<Bagging>().members().size(), 5u);
  EXPECT_GE(test_accuracy(model, ds), 0.9);
}

}  // namespace
}  // namespace stga
