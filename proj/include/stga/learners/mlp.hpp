#pragma once

#include <vector>

#include "stga/learners.hpp"
#include "stga/random.hpp"

namespace stga {

/// Weights of a one-hidden-layer ReLU network with a two-way softmax output.
struct MlpParameters {
  Matrix w1;  // features x hidden
  Vector b1;  // hidden
  Matrix w2;  // hidden x 2
  Vector b2;  // 2

  static MlpParameters zeros_like(const MlpParameters& p);
  /// Uniform in +-sqrt(6 / fan_in) for weights, zero biases.
  static MlpParameters random(Index n_features, Index hidden, Rng& rng);

  Index size() const { return w1.size() + b1.size() + w2.size() + b2.size(); }
  Vector flatten() const;
  void unflatten(const Vector& v);
};

/// Mean cross-entropy plus alpha/(2n) |W|^2 and its gradient.
double mlp_loss_gradient(const MlpParameters& params, const Matrix& X, const Labels& y,
                         double alpha, MlpParameters* grad);

Matrix mlp_forward(const MlpParameters& params, const Matrix& X);

struct MlpOptions {
  Index hidden_units = 100;
  int batch_size = 100;
  int max_epochs = 100;
  double learning_rate = 1e-3;
  bool adaptive = true;  // halve the step after two epochs without improvement
  double alpha = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class MultilayerPerceptron : public Classifier {
 public:
  static MultilayerPerceptron fit(const Matrix& X, const Labels& y, const MlpOptions& options,
                                  std::uint64_t seed);

  Matrix predict_proba(const Matrix& X) const override;
  json state() const override;
  static MultilayerPerceptron from_state(const json& j);

  const MlpParameters& parameters() const { return params_; }
  const std::vector<double>& loss_curve() const { return loss_curve_; }

 private:
  MlpParameters params_;
  std::vector<double> loss_curve_;
};

}  // namespace stga
