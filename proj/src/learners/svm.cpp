#include "stga/learners/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "stga/learners/linear.hpp"

namespace stga {

double Kernel::operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                          const Eigen::Ref<const Eigen::RowVectorXd>& b) const {
  switch (type) {
    case Type::linear:
      return a.dot(b);
    case Type::poly:
      return std::pow(gamma * a.dot(b) + coef0, degree);
    case Type::rbf:
      return std::exp(-gamma * (a - b).squaredNorm());
    case Type::sigmoid:
      return std::tanh(gamma * a.dot(b) + coef0);
  }
  return 0.0;
}

Kernel::Type Kernel::parse(const std::string& name) {
  if (name == "linear") return Type::linear;
  if (name == "poly") return Type::poly;
  if (name == "rbf") return Type::rbf;
  if (name == "sigmoid") return Type::sigmoid;
  throw ConfigError("unknown kernel '" + name + "'");
}

std::string Kernel::name(Type t) {
  switch (t) {
    case Type::linear:
      return "linear";
    case Type::poly:
      return "poly";
    case Type::rbf:
      return "rbf";
    case Type::sigmoid:
      return "sigmoid";
  }
  return "?";
}

double scale_gamma(const Matrix& X) {
  const double mean = X.mean();
  const double var = (X.array() - mean).square().mean();
  return var > 0.0 ? 1.0 / (static_cast<double>(X.cols()) * var) : 1.0;
}

namespace {

constexpr double kTau = 1e-12;

}  // namespace

SmoResult smo_solve(const Matrix& gram, const Vector& signs, double C, double tol, long max_iter) {
  const Index n = gram.rows();
  SmoResult res;
  res.alpha = Vector::Zero(n);
  Vector& a = res.alpha;
  Vector G = Vector::Constant(n, -1.0);
  auto Q = [&](Index i, Index j) { return signs(i) * signs(j) * gram(i, j); };

  auto gap = [&]() {
    double up = -HUGE_VAL, low = -HUGE_VAL;
    for (Index t = 0; t < n; ++t) {
      const double v = -signs(t) * G(t);
      const bool in_up = (signs(t) > 0 && a(t) < C) || (signs(t) < 0 && a(t) > 0);
      const bool in_low = (signs(t) > 0 && a(t) > 0) || (signs(t) < 0 && a(t) < C);
      if (in_up) up = std::max(up, v);
      if (in_low) low = std::max(low, -v);
    }
    return up + low;
  };

  for (res.iterations = 0; res.iterations < max_iter; ++res.iterations) {
    // i: maximal violating index in I_up
    double gmax = -HUGE_VAL;
    Index i = -1;
    for (Index t = 0; t < n; ++t) {
      if (signs(t) > 0) {
        if (a(t) < C && -G(t) >= gmax) {
          gmax = -G(t);
          i = t;
        }
      } else if (a(t) > 0 && G(t) >= gmax) {
        gmax = G(t);
        i = t;
      }
    }
    // j: second-order choice in I_low
    double gmax2 = -HUGE_VAL;
    double best_obj = HUGE_VAL;
    Index j = -1;
    for (Index t = 0; t < n; ++t) {
      double grad_diff;
      if (signs(t) > 0) {
        if (!(a(t) > 0)) continue;
        gmax2 = std::max(gmax2, G(t));
        grad_diff = gmax + G(t);
      } else {
        if (!(a(t) < C)) continue;
        gmax2 = std::max(gmax2, -G(t));
        grad_diff = gmax - G(t);
      }
      if (grad_diff > 0 && i >= 0) {
        double quad = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
        if (quad <= 0) quad = kTau;
        const double obj = -(grad_diff * grad_diff) / quad;
        if (obj <= best_obj) {
          best_obj = obj;
          j = t;
        }
      }
    }
    if (i < 0 || j < 0 || gmax + gmax2 < tol) {
      res.converged = true;
      break;
    }

    const double ai_old = a(i);
    const double aj_old = a(j);
    if (signs(i) != signs(j)) {
      double quad = gram(i, i) + gram(j, j) + 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-G(i) - G(j)) / quad;
      const double diff = a(i) - a(j);
      a(i) += delta;
      a(j) += delta;
      if (diff > 0) {
        if (a(j) < 0) {
          a(j) = 0;
          a(i) = diff;
        }
      } else if (a(i) < 0) {
        a(i) = 0;
        a(j) = -diff;
      }
      if (diff > 0) {
        if (a(i) > C) {
          a(i) = C;
          a(j) = C - diff;
        }
      } else if (a(j) > C) {
        a(j) = C;
        a(i) = C + diff;
      }
    } else {
      double quad = gram(i, i) + gram(j, j) - 2.0 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (G(i) - G(j)) / quad;
      const double sum = a(i) + a(j);
      a(i) -= delta;
      a(j) += delta;
      if (sum > C) {
        if (a(i) > C) {
          a(i) = C;
          a(j) = sum - C;
        }
      } else if (a(j) < 0) {
        a(j) = 0;
        a(i) = sum;
      }
      if (sum > C) {
        if (a(j) > C) {
          a(j) = C;
          a(i) = sum - C;
        }
      } else if (a(i) < 0) {
        a(i) = 0;
        a(j) = sum;
      }
    }
    const double di = a(i) - ai_old;
    const double dj = a(j) - aj_old;
    for (Index k = 0; k < n; ++k) G(k) += Q(k, i) * di + Q(k, j) * dj;
  }

  // offset: mean over free vectors, else midpoint of the feasible interval
  double ub = HUGE_VAL, lb = -HUGE_VAL, free_sum = 0.0;
  Index free_count = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = signs(t) * G(t);
    if (a(t) >= C) {
      if (signs(t) < 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else if (a(t) <= 0) {
      if (signs(t) > 0) {
        ub = std::min(ub, yg);
      } else {
        lb = std::max(lb, yg);
      }
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  if (free_count > 0) {
    res.rho = free_sum / static_cast<double>(free_count);
  } else if (std::isfinite(ub) && std::isfinite(lb)) {
    res.rho = (ub + lb) / 2.0;
  } else {
    res.rho = std::isfinite(ub) ? ub : (std::isfinite(lb) ? lb : 0.0);
  }
  res.gap = gap();
  return res;
}

double max_kkt_violation(const Matrix& gram, const Vector& signs, const SmoResult& sol, double C) {
  const Index n = gram.rows();
  double worst = 0.0;
  for (Index i = 0; i < n; ++i) {
    double f = -sol.rho;
    for (Index j = 0; j < n; ++j) f += sol.alpha(j) * signs(j) * gram(i, j);
    const double margin = signs(i) * f - 1.0;
    double v;
    if (sol.alpha(i) <= 0.0) {
      v = std::max(0.0, -margin);
    } else if (sol.alpha(i) >= C) {
      v = std::max(0.0, margin);
    } else {
      v = std::abs(margin);
    }
    worst = std::max(worst, v);
  }
  return worst;
}

SupportVectorMachine SupportVectorMachine::fit(const Matrix& X, const Labels& y,
                                               const Options& opt, SmoResult* diagnostics) {
  const Index n = X.rows();
  const Index pos = y.sum();
  if (pos == 0 || pos == n) throw ModelError("svm needs both classes in the training data");
  if (!(opt.C > 0.0)) throw ConfigError("svm: C must be positive");

  SupportVectorMachine model;
  model.kernel_.type = opt.kernel;
  model.kernel_.gamma = opt.gamma > 0.0 ? opt.gamma : scale_gamma(X);
  model.kernel_.coef0 = opt.coef0;
  model.kernel_.degree = opt.degree;

  Matrix gram(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j <= i; ++j) gram(i, j) = gram(j, i) = model.kernel_(X.row(i), X.row(j));
  }
  Vector signs(n);
  for (Index i = 0; i < n; ++i) signs(i) = y(i) ? 1.0 : -1.0;
  const long max_iter = std::max<long>(1, opt.max_passes * static_cast<long>(n) * static_cast<long>(n));
  SmoResult sol = smo_solve(gram, signs, opt.C, opt.tol, max_iter);

  std::vector<Index> sv;
  for (Index i = 0; i < n; ++i) {
    if (sol.alpha(i) > 0.0) sv.push_back(i);
  }
  model.support_.resize(static_cast<Index>(sv.size()), X.cols());
  model.coef_.resize(static_cast<Index>(sv.size()));
  for (std::size_t k = 0; k < sv.size(); ++k) {
    model.support_.row(static_cast<Index>(k)) = X.row(sv[k]);
    model.coef_(static_cast<Index>(k)) = sol.alpha(sv[k]) * signs(sv[k]);
  }
  model.rho_ = sol.rho;
  if (diagnostics) *diagnostics = std::move(sol);
  return model;
}

Vector SupportVectorMachine::decision_function(const Matrix& X) const {
  Vector f = Vector::Constant(X.rows(), -rho_);
  for (Index r = 0; r < X.rows(); ++r) {
    for (Index k = 0; k < support_.rows(); ++k) f(r) += coef_(k) * kernel_(support_.row(k), X.row(r));
  }
  return f;
}

Matrix SupportVectorMachine::predict_proba(const Matrix& X) const {
  const Vector f = decision_function(X);
  Vector p1(f.size());
  for (Index i = 0; i < f.size(); ++i) p1(i) = sigmoid(f(i));
  return two_column_proba(p1);
}

json SupportVectorMachine::state() const {
  json sv = json::array();
  for (Index r = 0; r < support_.rows(); ++r) {
    json row = json::array();
    for (Index c = 0; c < support_.cols(); ++c) row.push_back(support_(r, c));
    sv.push_back(std::move(row));
  }
  return {{"kernel", Kernel::name(kernel_.type)},
          {"gamma", kernel_.gamma},
          {"coef0", kernel_.coef0},
          {"degree", kernel_.degree},
          {"features", support_.cols()},
          {"support_vectors", sv},
          {"coef", std::vector<double>(coef_.data(), coef_.data() + coef_.size())},
          {"rho", rho_}};
}

SupportVectorMachine SupportVectorMachine::from_state(const json& j) {
  SupportVectorMachine m;
  m.kernel_.type = Kernel::parse(j.at("kernel").get<std::string>());
  m.kernel_.gamma = j.at("gamma").get<double>();
  m.kernel_.coef0 = j.at("coef0").get<double>();
  m.kernel_.degree = j.at("degree").get<int>();
  const auto& sv = j.at("support_vectors");
  const auto d = j.at("features").get<Index>();
  m.support_.resize(static_cast<Index>(sv.size()), d);
  for (std::size_t r = 0; r < sv.size(); ++r) {
    for (Index c = 0; c < d; ++c) m.support_(static_cast<Index>(r), c) = sv[r][static_cast<std::size_t>(c)].get<double>();
  }
  const auto coef = j.at("coef").get<std::vector<double>>();
  m.coef_ = Eigen::Map<const Vector>(coef.data(), static_cast<Index>(coef.size()));
  m.rho_ = j.at("rho").get<double>();
  return m;
}

}  // namespace stga
