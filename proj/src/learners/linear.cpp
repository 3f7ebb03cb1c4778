#include "stga/learners/linear.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "stga/random.hpp"

namespace stga {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

namespace {

void require_both_classes(const Labels& y, const char* who) {
  const Index pos = y.sum();
  if (pos == 0 || pos == y.size()) {
    throw ModelError(std::string(who) + " needs both classes in the training data");
  }
}

// log(1 + exp(z)) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double logistic_objective(const Matrix& Xa, const Vector& yd, const Vector& w, double l2) {
  const Vector z = Xa * w;
  double obj = 0.0;
  for (Index i = 0; i < z.size(); ++i) obj += softplus(z(i)) - yd(i) * z(i);
  const Index d = w.size() - 1;
  return obj + 0.5 * l2 * w.head(d).squaredNorm();
}

}  // namespace

// --- logistic regression ----------------------------------------------------

LogisticRegression LogisticRegression::fit(const Matrix& X, const Labels& y, double l2,
                                           int max_iter, double tol, Fit* info) {
  require_both_classes(y, "logistic_regression");
  const Index n = X.rows();
  const Index d = X.cols();
  Matrix Xa(n, d + 1);
  Xa << X, Vector::Ones(n);
  const Vector yd = y.cast<double>();
  Vector w = Vector::Zero(d + 1);
  Vector penalty = Vector::Constant(d + 1, l2);
  penalty(d) = 0.0;

  Fit fit_info;
  double obj = logistic_objective(Xa, yd, w, l2);
  for (int it = 0; it < max_iter; ++it) {
    fit_info.iterations = it + 1;
    const Vector z = Xa * w;
    Vector p(n), s(n);
    for (Index i = 0; i < n; ++i) {
      p(i) = sigmoid(z(i));
      s(i) = p(i) * (1.0 - p(i));
    }
    const Vector grad = Xa.transpose() * (p - yd) + penalty.cwiseProduct(w);
    Matrix hess = Xa.transpose() * s.asDiagonal() * Xa;
    hess.diagonal() += penalty;
    hess(d, d) += 1e-12;
    const Vector step = hess.ldlt().solve(grad);

    // backtracking keeps every iterate a descent step
    double t = 1.0;
    Vector candidate = w - step;
    double cand_obj = logistic_objective(Xa, yd, candidate, l2);
    while (cand_obj > obj - 1e-4 * t * grad.dot(step) && t > 1e-10) {
      t *= 0.5;
      candidate = w - t * step;
      cand_obj = logistic_objective(Xa, yd, candidate, l2);
    }
    const double change = (t * step).cwiseAbs().maxCoeff();
    w = candidate;
    obj = cand_obj;
    if (change < tol) {
      fit_info.converged = true;
      break;
    }
  }
  if (info) *info = fit_info;
  return LogisticRegression(w.head(d), w(d));
}

Vector LogisticRegression::decision_function(const Matrix& X) const {
  return (X * weights_).array() + intercept_;
}

Matrix LogisticRegression::predict_proba(const Matrix& X) const {
  const Vector z = decision_function(X);
  Vector p1(z.size());
  for (Index i = 0; i < z.size(); ++i) p1(i) = sigmoid(z(i));
  return two_column_proba(p1);
}

json LogisticRegression::state() const {
  return {{"weights", std::vector<double>(weights_.data(), weights_.data() + weights_.size())},
          {"intercept", intercept_}};
}

LogisticRegression LogisticRegression::from_state(const json& j) {
  const auto w = j.at("weights").get<std::vector<double>>();
  return LogisticRegression(Eigen::Map<const Vector>(w.data(), static_cast<Index>(w.size())),
                            j.at("intercept").get<double>());
}

// --- k nearest neighbours ---------------------------------------------------

KNearestNeighbors KNearestNeighbors::fit(const Matrix& X, const Labels& y, int k, double p) {
  if (k < 1) throw ConfigError("knn: n_neighbors must be >= 1");
  if (!(p >= 1.0)) throw ConfigError("knn: Minkowski p must be >= 1");
  KNearestNeighbors m;
  m.X_ = X;
  m.y_ = y;
  m.k_ = k;
  m.p_ = p;
  return m;
}

Matrix KNearestNeighbors::predict_proba(const Matrix& X) const {
  const Index n = X_.rows();
  const auto k = static_cast<std::size_t>(std::min<Index>(k_, n));
  Vector p1(X.rows());
  std::vector<std::pair<double, Index>> dist(static_cast<std::size_t>(n));
  for (Index q = 0; q < X.rows(); ++q) {
    for (Index i = 0; i < n; ++i) {
      const auto diff = (X_.row(i) - X.row(q)).array().abs();
      const double d = p_ == 2.0 ? diff.square().sum() : diff.pow(p_).sum();
      dist[static_cast<std::size_t>(i)] = {d, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    double ones = 0.0;
    for (std::size_t j = 0; j < k; ++j) ones += y_(dist[j].second);
    p1(q) = ones / static_cast<double>(k);
  }
  return two_column_proba(p1);
}

json KNearestNeighbors::state() const {
  json rows = json::array();
  for (Index r = 0; r < X_.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < X_.cols(); ++c) row.push_back(X_(r, c));
    rows.push_back(std::move(row));
  }
  return {{"X", rows},
          {"y", std::vector<int>(y_.data(), y_.data() + y_.size())},
          {"k", k_},
          {"p", p_}};
}

KNearestNeighbors KNearestNeighbors::from_state(const json& j) {
  KNearestNeighbors m;
  const auto& rows = j.at("X");
  const auto y = j.at("y").get<std::vector<int>>();
  const Index n = static_cast<Index>(rows.size());
  const Index d = n ? static_cast<Index>(rows[0].size()) : 0;
  m.X_.resize(n, d);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < d; ++c) m.X_(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)].get<double>();
  }
  m.y_ = Eigen::Map<const Labels>(y.data(), static_cast<Index>(y.size()));
  m.k_ = j.at("k").get<int>();
  m.p_ = j.at("p").get<double>();
  return m;
}

// --- Gaussian naive Bayes ---------------------------------------------------

GaussianNaiveBayes GaussianNaiveBayes::fit(const Matrix& X, const Labels& y, double var_smoothing) {
  require_both_classes(y, "gaussian_nb");
  const Index d = X.cols();
  GaussianNaiveBayes m;
  m.mean_ = Matrix::Zero(2, d);
  m.var_ = Matrix::Zero(2, d);
  double max_var = 0.0;
  const Vector overall_mean = X.colwise().mean().transpose();
  for (Index f = 0; f < d; ++f) {
    max_var = std::max(
        max_var, (X.col(f).array() - overall_mean(f)).square().sum() / static_cast<double>(X.rows()));
  }
  const double eps = var_smoothing * max_var;
  for (int c = 0; c < 2; ++c) {
    Index count = 0;
    for (Index r = 0; r < X.rows(); ++r) {
      if (y(r) == c) {
        m.mean_.row(c) += X.row(r);
        ++count;
      }
    }
    m.mean_.row(c) /= static_cast<double>(count);
    for (Index r = 0; r < X.rows(); ++r) {
      if (y(r) == c) m.var_.row(c) += (X.row(r) - m.mean_.row(c)).array().square().matrix();
    }
    m.var_.row(c) /= static_cast<double>(count);
    m.var_.row(c).array() += eps;
    m.log_prior_(c) = std::log(static_cast<double>(count) / static_cast<double>(X.rows()));
  }
  if ((m.var_.array() <= 0.0).any()) {
    throw ModelError("gaussian_nb: zero variance feature (all features constant?)");
  }
  return m;
}

Matrix GaussianNaiveBayes::predict_proba(const Matrix& X) const {
  Vector p1(X.rows());
  constexpr double kLog2Pi = 1.8378770664093453;
  for (Index r = 0; r < X.rows(); ++r) {
    double ll[2];
    for (int c = 0; c < 2; ++c) {
      const auto diff = (X.row(r) - mean_.row(c)).array();
      ll[c] = log_prior_(c) -
              0.5 * (kLog2Pi + var_.row(c).array().log() + diff.square() / var_.row(c).array()).sum();
    }
    // P(1) = 1 / (1 + exp(ll0 - ll1))
    p1(r) = sigmoid(ll[1] - ll[0]);
  }
  return two_column_proba(p1);
}

json GaussianNaiveBayes::state() const {
  auto row = [](const Matrix& m, Index r) {
    std::vector<double> v;
    for (Index c = 0; c < m.cols(); ++c) v.push_back(m(r, c));
    return v;
  };
  return {{"mean", {row(mean_, 0), row(mean_, 1)}},
          {"var", {row(var_, 0), row(var_, 1)}},
          {"log_prior", {log_prior_(0), log_prior_(1)}}};
}

GaussianNaiveBayes GaussianNaiveBayes::from_state(const json& j) {
  GaussianNaiveBayes m;
  const auto mean = j.at("mean").get<std::vector<std::vector<double>>>();
  const auto var = j.at("var").get<std::vector<std::vector<double>>>();
  const auto d = static_cast<Index>(mean.at(0).size());
  m.mean_.resize(2, d);
  m.var_.resize(2, d);
  for (int c = 0; c < 2; ++c) {
    for (Index f = 0; f < d; ++f) {
      m.mean_(c, f) = mean[c][static_cast<std::size_t>(f)];
      m.var_(c, f) = var[c][static_cast<std::size_t>(f)];
    }
  }
  m.log_prior_ << j.at("log_prior")[0].get<double>(), j.at("log_prior")[1].get<double>();
  return m;
}

// --- bagging ----------------------------------------------------------------

Bagging Bagging::fit(const Matrix& X, const Labels& y, const LearnerSpec& inner, int n_estimators,
                     std::uint64_t seed) {
  if (n_estimators < 1) throw ConfigError("bagging: n_estimators must be >= 1");
  Bagging b;
  const Index n = X.rows();
  for (int t = 0; t < n_estimators; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    Matrix Xb(n, X.cols());
    Labels yb(n);
    for (Index i = 0; i < n; ++i) {
      const auto r = static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)));
      Xb.row(i) = X.row(r);
      yb(i) = y(r);
    }
    LearnerSpec member = inner;
    member.seed = derive_seed(seed ^ 0x5bd1e995ULL, static_cast<std::uint64_t>(t));
    b.members_.push_back(train(member, Xb, yb));
  }
  return b;
}

Matrix Bagging::predict_proba(const Matrix& X) const {
  Vector votes = Vector::Zero(X.rows());
  for (const auto& m : members_) votes += m.predict(X).cast<double>();
  return two_column_proba(votes / static_cast<double>(members_.size()));
}

json Bagging::state() const {
  json members = json::array();
  for (const auto& m : members_) members.push_back(m.to_json());
  return {{"members", members}};
}

Bagging Bagging::from_state(const json& j) {
  Bagging b;
  for (const auto& m : j.at("members")) b.members_.push_back(TrainedModel::from_json(m));
  return b;
}

}  // namespace stga
