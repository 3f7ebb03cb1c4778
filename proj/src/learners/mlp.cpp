#include "stga/learners/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stga {

MlpParameters MlpParameters::zeros_like(const MlpParameters& p) {
  return {Matrix::Zero(p.w1.rows(), p.w1.cols()), Vector::Zero(p.b1.size()),
          Matrix::Zero(p.w2.rows(), p.w2.cols()), Vector::Zero(p.b2.size())};
}

MlpParameters MlpParameters::random(Index n_features, Index hidden, Rng& rng) {
  MlpParameters p;
  auto fill = [&rng](Matrix& m, Index fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (Index c = 0; c < m.cols(); ++c) {
      for (Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-bound, bound);
    }
  };
  p.w1.resize(n_features, hidden);
  p.w2.resize(hidden, 2);
  fill(p.w1, n_features);
  fill(p.w2, hidden);
  p.b1 = Vector::Zero(hidden);
  p.b2 = Vector::Zero(2);
  return p;
}

Vector MlpParameters::flatten() const {
  Vector v(size());
  Index o = 0;
  for (const auto* m : {&w1, &w2}) {
    v.segment(o, m->size()) = Eigen::Map<const Vector>(m->data(), m->size());
    o += m->size();
  }
  v.segment(o, b1.size()) = b1;
  o += b1.size();
  v.segment(o, b2.size()) = b2;
  return v;
}

void MlpParameters::unflatten(const Vector& v) {
  Index o = 0;
  for (auto* m : {&w1, &w2}) {
    Eigen::Map<Vector>(m->data(), m->size()) = v.segment(o, m->size());
    o += m->size();
  }
  b1 = v.segment(o, b1.size());
  o += b1.size();
  b2 = v.segment(o, b2.size());
}

namespace {

struct Forward {
  Matrix pre;     // X W1 + b1
  Matrix hidden;  // relu(pre)
  Matrix proba;   // softmax output
  Matrix log_proba;
};

Forward forward(const MlpParameters& p, const Matrix& X) {
  Forward f;
  f.pre = (X * p.w1).rowwise() + p.b1.transpose();
  f.hidden = f.pre.cwiseMax(0.0);
  const Matrix z = (f.hidden * p.w2).rowwise() + p.b2.transpose();
  f.log_proba.resize(z.rows(), 2);
  f.proba.resize(z.rows(), 2);
  for (Index r = 0; r < z.rows(); ++r) {
    const double m = std::max(z(r, 0), z(r, 1));
    const double lse = m + std::log(std::exp(z(r, 0) - m) + std::exp(z(r, 1) - m));
    for (int c = 0; c < 2; ++c) {
      f.log_proba(r, c) = z(r, c) - lse;
      f.proba(r, c) = std::exp(f.log_proba(r, c));
    }
  }
  return f;
}

}  // namespace

Matrix mlp_forward(const MlpParameters& params, const Matrix& X) {
  return forward(params, X).proba;
}

double mlp_loss_gradient(const MlpParameters& params, const Matrix& X, const Labels& y,
                         double alpha, MlpParameters* grad) {
  const Index n = X.rows();
  const auto nd = static_cast<double>(n);
  const Forward f = forward(params, X);
  double loss = 0.0;
  for (Index r = 0; r < n; ++r) loss -= f.log_proba(r, y(r));
  loss = loss / nd + alpha / (2.0 * nd) * (params.w1.squaredNorm() + params.w2.squaredNorm());
  if (!grad) return loss;

  Matrix dz = f.proba;
  for (Index r = 0; r < n; ++r) dz(r, y(r)) -= 1.0;
  dz /= nd;
  grad->w2 = f.hidden.transpose() * dz + (alpha / nd) * params.w2;
  grad->b2 = dz.colwise().sum().transpose();
  Matrix dh = dz * params.w2.transpose();
  dh = dh.cwiseProduct((f.pre.array() > 0.0).cast<double>().matrix());
  grad->w1 = X.transpose() * dh + (alpha / nd) * params.w1;
  grad->b1 = dh.colwise().sum().transpose();
  return loss;
}

MultilayerPerceptron MultilayerPerceptron::fit(const Matrix& X, const Labels& y,
                                               const MlpOptions& opt, std::uint64_t seed) {
  if (opt.hidden_units < 1 || opt.batch_size < 1 || opt.max_epochs < 0) {
    throw ConfigError("mlp: hidden_units, batch_size must be >= 1 and max_epochs >= 0");
  }
  Rng rng(seed);
  MultilayerPerceptron model;
  model.params_ = MlpParameters::random(X.cols(), opt.hidden_units, rng);

  const Index n = X.rows();
  const Index batch = std::min<Index>(opt.batch_size, n);
  Vector theta = model.params_.flatten();
  Vector m = Vector::Zero(theta.size());
  Vector v = Vector::Zero(theta.size());
  MlpParameters grad = MlpParameters::zeros_like(model.params_);
  double step = opt.learning_rate;
  double best = HUGE_VAL;
  int stalled = 0;
  long t = 0;

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (Index start = 0; start < n; start += batch) {
      const Index end = std::min(n, start + batch);
      Matrix Xb(end - start, X.cols());
      Labels yb(end - start);
      for (Index i = start; i < end; ++i) {
        Xb.row(i - start) = X.row(order[static_cast<std::size_t>(i)]);
        yb(i - start) = y(order[static_cast<std::size_t>(i)]);
      }
      model.params_.unflatten(theta);
      const double loss = mlp_loss_gradient(model.params_, Xb, yb, opt.alpha, &grad);
      epoch_loss += loss * static_cast<double>(end - start);
      const Vector g = grad.flatten();
      ++t;
      m = opt.beta1 * m + (1.0 - opt.beta1) * g;
      v = opt.beta2 * v + (1.0 - opt.beta2) * g.cwiseAbs2();
      const double corr1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
      const double corr2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
      theta.array() -= step * (m.array() / corr1) / ((v.array() / corr2).sqrt() + opt.epsilon);
    }
    epoch_loss /= static_cast<double>(n);
    model.loss_curve_.push_back(epoch_loss);
    if (epoch_loss < best) {
      best = epoch_loss;
      stalled = 0;
    } else if (++stalled >= 2 && opt.adaptive) {
      step *= 0.5;
      stalled = 0;
    }
  }
  model.params_.unflatten(theta);
  return model;
}

Matrix MultilayerPerceptron::predict_proba(const Matrix& X) const {
  return mlp_forward(params_, X);
}

json MultilayerPerceptron::state() const {
  const Vector flat = params_.flatten();
  return {{"features", params_.w1.rows()},
          {"hidden", params_.w1.cols()},
          {"parameters", std::vector<double>(flat.data(), flat.data() + flat.size())},
          {"loss_curve", loss_curve_}};
}

MultilayerPerceptron MultilayerPerceptron::from_state(const json& j) {
  MultilayerPerceptron model;
  const auto d = j.at("features").get<Index>();
  const auto h = j.at("hidden").get<Index>();
  model.params_.w1.resize(d, h);
  model.params_.b1.resize(h);
  model.params_.w2.resize(h, 2);
  model.params_.b2.resize(2);
  const auto flat = j.at("parameters").get<std::vector<double>>();
  if (static_cast<Index>(flat.size()) != model.params_.size()) {
    throw ModelError("mlp: parameter vector has the wrong length");
  }
  model.params_.unflatten(Eigen::Map<const Vector>(flat.data(), static_cast<Index>(flat.size())));
  model.loss_curve_ = j.at("loss_curve").get<std::vector<double>>();
  return model;
}

}  // namespace stga
