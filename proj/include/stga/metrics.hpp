#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stga/types.hpp"

namespace stga {

/// A rate that may be undefined (zero denominator). Never coerced to 0.
using Metric = std::optional<double>;

std::string format_metric(const Metric& m, int decimals = 4);

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

ConfusionMatrix confusion(const Labels& y_true, const Labels& y_pred);

Metric accuracy(const ConfusionMatrix& cm);
/// TP / (TP + FN)
Metric sensitivity(const ConfusionMatrix& cm);
/// TN / (TN + FP)
Metric specificity(const ConfusionMatrix& cm);
/// Harmonic mean of sensitivity and specificity: 2·Sp·Sn / (Sp + Sn).
Metric fscore(const ConfusionMatrix& cm);
/// Conventional precision/recall F1, for comparison with other literature.
Metric f1_precision_recall(const ConfusionMatrix& cm);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  // thresholds[i] produced point i; the (0,0) anchor uses +infinity.
  std::vector<double> thresholds;

  std::size_t size() const { return fpr.size(); }
};

/// One point per distinct score, descending; a sample is called positive
/// when its score is >= the threshold.
RocCurve roc_curve(const Labels& y_true, const Vector& scores);

/// Trapezoidal area under the curve.
double auc(const RocCurve& curve);

/// Two-column CSV "fpr,tpr" with header.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

}  // namespace stga
