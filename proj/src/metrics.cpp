#include "stga/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>

namespace stga {

std::string format_metric(const Metric& m, int decimals) {
  if (!m) return "n/a";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, *m);
  return buf;
}

ConfusionMatrix confusion(const Labels& y_true, const Labels& y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("confusion: " + std::to_string(y_true.size()) + " true labels vs " +
                    std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  for (Index i = 0; i < y_true.size(); ++i) {
    const int t = y_true(i);
    const int p = y_pred(i);
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw DataError("confusion: labels must be 0 or 1");
    }
    if (t == 1) {
      p == 1 ? ++cm.tp : ++cm.fn;
    } else {
      p == 1 ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

namespace {

Metric ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metric accuracy(const ConfusionMatrix& cm) { return ratio(cm.tp + cm.tn, cm.total()); }
Metric sensitivity(const ConfusionMatrix& cm) { return ratio(cm.tp, cm.tp + cm.fn); }
Metric specificity(const ConfusionMatrix& cm) { return ratio(cm.tn, cm.tn + cm.fp); }

Metric fscore(const ConfusionMatrix& cm) {
  const Metric sn = sensitivity(cm);
  const Metric sp = specificity(cm);
  if (!sn || !sp || *sn + *sp == 0.0) return std::nullopt;
  return 2.0 * *sp * *sn / (*sp + *sn);
}

Metric f1_precision_recall(const ConfusionMatrix& cm) {
  const Metric precision = ratio(cm.tp, cm.tp + cm.fp);
  const Metric recall = sensitivity(cm);
  if (!precision || !recall || *precision + *recall == 0.0) return std::nullopt;
  return 2.0 * *precision * *recall / (*precision + *recall);
}

RocCurve roc_curve(const Labels& y_true, const Vector& scores) {
  if (y_true.size() != scores.size()) {
    throw DataError("roc_curve: label and score lengths differ");
  }
  const Index n = y_true.size();
  const Index pos = y_true.sum();
  const Index neg = n - pos;
  if (pos == 0 || neg == 0) throw DataError("roc_curve: both classes must be present");

  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Index a, Index b) { return scores(a) > scores(b); });

  RocCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  Index tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double threshold = scores(order[i]);
    while (i < order.size() && scores(order[i]) == threshold) {
      y_true(order[i]) ? ++tp : ++fp;
      ++i;
    }
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(pos));
    curve.thresholds.push_back(threshold);
  }
  return curve;
}

double auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve.fpr[i] - curve.fpr[i - 1]) * (curve.tpr[i] + curve.tpr[i - 1]) * 0.5;
  }
  return area;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "fpr,tpr\n";
  char buf[64];
  for (std::size_t i = 0; i < curve.size(); ++i) {
    auto r = std::to_chars(buf, buf + sizeof(buf), curve.fpr[i]);
    out.write(buf, r.ptr - buf);
    out << ',';
    r = std::to_chars(buf, buf + sizeof(buf), curve.tpr[i]);
    out.write(buf, r.ptr - buf);
    out << '\n';
  }
}

}  // namespace stga
