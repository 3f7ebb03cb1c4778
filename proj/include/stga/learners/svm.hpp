#pragma once

#include <string>

#include "stga/learners.hpp"

namespace stga {

struct Kernel {
  enum class Type { linear, poly, rbf, sigmoid } type = Type::sigmoid;
  double gamma = 1.0;
  double coef0 = 0.0;
  int degree = 3;

  double operator()(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                    const Eigen::Ref<const Eigen::RowVectorXd>& b) const;

  static Type parse(const std::string& name);
  static std::string name(Type t);
};

/// "scale" gamma: 1 / (n_features * variance of all entries of X).
double scale_gamma(const Matrix& X);

struct SmoResult {
  Vector alpha;
  double rho = 0.0;  // decision = sum_i alpha_i y_i K(x_i, x) - rho
  long iterations = 0;
  bool converged = false;
  double gap = 0.0;  // max KKT gap m(alpha) - M(alpha) at exit
};

/// Sequential minimal optimisation for the C-SVC dual with second-order
/// working-set selection. `signs` holds +-1 labels. Non-PSD kernels are
/// handled by flooring the curvature at a small positive constant.
SmoResult smo_solve(const Matrix& gram, const Vector& signs, double C, double tol,
                    long max_iter);

/// Largest per-sample violation of the KKT conditions
///   alpha = 0      => y f(x) >= 1
///   0 < alpha < C  => y f(x) == 1
///   alpha = C      => y f(x) <= 1
double max_kkt_violation(const Matrix& gram, const Vector& signs, const SmoResult& sol, double C);

/// Kernel support vector classifier. P(y = 1) is the logistic squashing of
/// the signed decision value; it is a ranking score, not a calibrated
/// probability.
class SupportVectorMachine : public Classifier {
 public:
  struct Options {
    Kernel::Type kernel = Kernel::Type::sigmoid;
    double gamma = -1.0;  // <= 0 selects the "scale" heuristic
    double coef0 = 0.0;
    int degree = 3;
    double C = 1.0;
    double tol = 1e-3;
    long max_passes = 10;  // iteration cap = max_passes * n * n
  };

  static SupportVectorMachine fit(const Matrix& X, const Labels& y, const Options& options,
                                  SmoResult* diagnostics = nullptr);

  Matrix predict_proba(const Matrix& X) const override;
  Vector decision_function(const Matrix& X) const;
  json state() const override;
  static SupportVectorMachine from_state(const json& j);

  const Kernel& kernel() const { return kernel_; }
  Index support_vector_count() const { return support_.rows(); }

 private:
  Kernel kernel_;
  Matrix support_;
  Vector coef_;  // alpha_i * y_i
  double rho_ = 0.0;
};

}  // namespace stga
