#include "stga/learners/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace stga {

int MaxFeatures::resolve(int n_features) const {
  switch (mode) {
    case Mode::all:
      return n_features;
    case Mode::sqrt:
      return std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(n_features)))));
    case Mode::log2:
      return std::max(1, static_cast<int>(std::floor(std::log2(static_cast<double>(n_features)))));
    case Mode::count:
      return std::clamp(count, 1, n_features);
  }
  return n_features;
}

MaxFeatures MaxFeatures::parse(const json& j) {
  MaxFeatures mf;
  if (j.is_number_integer()) {
    if (j.get<int>() < 1) throw ConfigError("max_features must be >= 1");
    mf.mode = Mode::count;
    mf.count = j.get<int>();
    return mf;
  }
  if (!j.is_string()) throw ConfigError("max_features must be a string or an integer");
  const auto s = j.get<std::string>();
  if (s == "all" || s == "n_features") {
    mf.mode = Mode::all;
  } else if (s == "sqrt" || s == "auto") {
    mf.mode = Mode::sqrt;
  } else if (s == "log2") {
    mf.mode = Mode::log2;
  } else {
    throw ConfigError("unknown max_features '" + s + "'");
  }
  return mf;
}

namespace {

double impurity(double w0, double w1, SplitCriterion criterion) {
  const double w = w0 + w1;
  if (w <= 0.0) return 0.0;
  const double p0 = w0 / w;
  const double p1 = w1 / w;
  if (criterion == SplitCriterion::gini) return 1.0 - p0 * p0 - p1 * p1;
  double h = 0.0;
  if (p0 > 0.0) h -= p0 * std::log2(p0);
  if (p1 > 0.0) h -= p1 * std::log2(p1);
  return h;
}

constexpr double kMinGain = 1e-12;

std::vector<int> sample_features(int n_features, int k, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(n_features));
  std::iota(all.begin(), all.end(), 0);
  if (k >= n_features) return all;
  for (int i = 0; i < k; ++i) {
    const auto j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_features - i)));
    std::swap(all[i], all[j]);
  }
  all.resize(static_cast<std::size_t>(k));
  std::sort(all.begin(), all.end());
  return all;
}

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const Labels& y, const Vector& w, const TreeOptions& opt, Rng& rng,
              std::vector<DecisionTree::Node>& nodes)
      : X_(X), y_(y), w_(w), opt_(opt), rng_(rng), nodes_(nodes) {}

  int build(std::vector<Index>& rows, int depth) {
    double w0 = 0.0, w1 = 0.0;
    for (Index r : rows) (y_(r) ? w1 : w0) += w_(r);
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    nodes_[id].depth = depth;
    nodes_[id].p1 = (w0 + w1) > 0.0 ? w1 / (w0 + w1) : 0.0;

    const double parent = impurity(w0, w1, opt_.criterion);
    const bool depth_capped = opt_.max_depth >= 0 && depth >= opt_.max_depth;
    if (depth_capped || static_cast<int>(rows.size()) < opt_.min_samples_split ||
        parent <= 1e-15) {
      return id;
    }

    const int n_features = static_cast<int>(X_.cols());
    const auto features = sample_features(n_features, opt_.max_features.resolve(n_features), rng_);
    double best_gain = kMinGain;
    int best_feature = -1;
    double best_threshold = 0.0;
    const double total = w0 + w1;

    std::vector<std::pair<double, Index>> sorted(rows.size());
    for (int f : features) {
      if (opt_.random_thresholds) {
        double lo = HUGE_VAL, hi = -HUGE_VAL;
        for (Index r : rows) {
          lo = std::min(lo, X_(r, f));
          hi = std::max(hi, X_(r, f));
        }
        if (!(hi > lo)) continue;
        const double thr = rng_.uniform(lo, hi);
        double l0 = 0.0, l1 = 0.0;
        int nl = 0;
        for (Index r : rows) {
          if (X_(r, f) <= thr) {
            (y_(r) ? l1 : l0) += w_(r);
            ++nl;
          }
        }
        const int nr = static_cast<int>(rows.size()) - nl;
        if (nl < opt_.min_samples_leaf || nr < opt_.min_samples_leaf) continue;
        const double gain = gain_of(parent, total, l0, l1, w0 - l0, w1 - l1);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = thr;
        }
        continue;
      }

      for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {X_(rows[i], f), rows[i]};
      std::sort(sorted.begin(), sorted.end());
      double l0 = 0.0, l1 = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        const Index r = sorted[i].second;
        (y_(r) ? l1 : l0) += w_(r);
        const double a = sorted[i].first;
        const double b = sorted[i + 1].first;
        if (!(b > a)) continue;
        const int nl = static_cast<int>(i + 1);
        const int nr = static_cast<int>(sorted.size()) - nl;
        if (nl < opt_.min_samples_leaf || nr < opt_.min_samples_leaf) continue;
        const double gain = gain_of(parent, total, l0, l1, w0 - l0, w1 - l1);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          double mid = a + (b - a) * 0.5;
          if (!(mid < b)) mid = a;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return id;

    std::vector<Index> left, right;
    for (Index r : rows) (X_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();
    const int l = build(left, depth + 1);
    const int rgt = build(right, depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = rgt;
    return id;
  }

 private:
  double gain_of(double parent, double total, double l0, double l1, double r0, double r1) const {
    const double wl = l0 + l1;
    const double wr = r0 + r1;
    if (wl <= 0.0 || wr <= 0.0) return -HUGE_VAL;
    return parent - (wl / total) * impurity(l0, l1, opt_.criterion) -
           (wr / total) * impurity(r0, r1, opt_.criterion);
  }

  const Matrix& X_;
  const Labels& y_;
  const Vector& w_;
  const TreeOptions& opt_;
  Rng& rng_;
  std::vector<DecisionTree::Node>& nodes_;
};

}  // namespace

DecisionTree DecisionTree::fit(const Matrix& X, const Labels& y, const Vector& weights,
                               const TreeOptions& options, Rng& rng) {
  if (X.rows() != y.size() || weights.size() != y.size()) {
    throw DataError("decision tree: inconsistent row counts");
  }
  std::vector<Index> rows;
  for (Index r = 0; r < X.rows(); ++r) {
    if (weights(r) > 0.0) rows.push_back(r);
  }
  if (rows.empty()) throw DataError("decision tree: no rows with positive weight");
  DecisionTree tree;
  TreeBuilder(X, y, weights, options, rng, tree.nodes_).build(rows, 0);
  return tree;
}

double DecisionTree::positive_probability(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int n = 0;
  while (nodes_[n].feature >= 0) {
    n = x(nodes_[n].feature) <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
  }
  return nodes_[n].p1;
}

Matrix DecisionTree::predict_proba(const Matrix& X) const {
  Vector p1(X.rows());
  for (Index r = 0; r < X.rows(); ++r) p1(r) = positive_probability(X.row(r));
  return two_column_proba(p1);
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

int DecisionTree::leaf_count() const {
  return static_cast<int>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const Node& n) { return n.feature < 0; }));
}

json DecisionTree::state() const {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), p1 = json::array(), depth = json::array();
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    p1.push_back(n.p1);
    depth.push_back(n.depth);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"p1", p1},               {"depth", depth}};
}

DecisionTree DecisionTree::from_state(const json& j) {
  DecisionTree t;
  const auto& feature = j.at("feature");
  t.nodes_.resize(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    auto& n = t.nodes_[i];
    n.feature = feature[i].get<int>();
    n.threshold = j.at("threshold")[i].get<double>();
    n.left = j.at("left")[i].get<int>();
    n.right = j.at("right")[i].get<int>();
    n.p1 = j.at("p1")[i].get<double>();
    n.depth = j.at("depth")[i].get<int>();
  }
  return t;
}

// --- regression tree --------------------------------------------------------

namespace {

class RegressionBuilder {
 public:
  RegressionBuilder(const Matrix& X, const Vector& t, int max_depth, int min_split,
                    std::vector<RegressionTree::Node>& nodes, std::vector<int>& leaf_of_row)
      : X_(X), t_(t), max_depth_(max_depth), min_split_(min_split), nodes_(nodes),
        leaf_of_row_(leaf_of_row) {}

  int build(std::vector<Index>& rows, int depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({});
    double sum = 0.0;
    for (Index r : rows) sum += t_(r);
    const auto n = static_cast<double>(rows.size());
    nodes_[id].value = sum / n;

    int best_feature = -1;
    double best_threshold = 0.0;
    double best_improvement = kMinGain;
    const bool capped = max_depth_ >= 0 && depth >= max_depth_;
    if (!capped && static_cast<int>(rows.size()) >= min_split_) {
      std::vector<std::pair<double, Index>> sorted(rows.size());
      for (int f = 0; f < X_.cols(); ++f) {
        for (std::size_t i = 0; i < rows.size(); ++i) sorted[i] = {X_(rows[i], f), rows[i]};
        std::sort(sorted.begin(), sorted.end());
        double left_sum = 0.0;
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
          left_sum += t_(sorted[i].second);
          const double a = sorted[i].first;
          const double b = sorted[i + 1].first;
          if (!(b > a)) continue;
          const auto nl = static_cast<double>(i + 1);
          const double nr = n - nl;
          const double diff = left_sum / nl - (sum - left_sum) / nr;
          const double improvement = nl * nr / n * diff * diff;
          if (improvement > best_improvement) {
            best_improvement = improvement;
            best_feature = f;
            double mid = a + (b - a) * 0.5;
            if (!(mid < b)) mid = a;
            best_threshold = mid;
          }
        }
      }
    }
    if (best_feature < 0) {
      for (Index r : rows) leaf_of_row_[static_cast<std::size_t>(r)] = id;
      return id;
    }
    std::vector<Index> left, right;
    for (Index r : rows) (X_(r, best_feature) <= best_threshold ? left : right).push_back(r);
    const int l = build(left, depth + 1);
    const int rgt = build(right, depth + 1);
    nodes_[id].feature = best_feature;
    nodes_[id].threshold = best_threshold;
    nodes_[id].left = l;
    nodes_[id].right = rgt;
    return id;
  }

 private:
  const Matrix& X_;
  const Vector& t_;
  int max_depth_;
  int min_split_;
  std::vector<RegressionTree::Node>& nodes_;
  std::vector<int>& leaf_of_row_;
};

}  // namespace

RegressionTree RegressionTree::fit(const Matrix& X, const Vector& target, int max_depth,
                                   int min_samples_split, std::vector<int>& leaf_of_row) {
  std::vector<Index> rows(static_cast<std::size_t>(X.rows()));
  std::iota(rows.begin(), rows.end(), Index{0});
  leaf_of_row.assign(rows.size(), -1);
  RegressionTree tree;
  RegressionBuilder(X, target, max_depth, min_samples_split, tree.nodes_, leaf_of_row)
      .build(rows, 0);
  return tree;
}

int RegressionTree::leaf_index(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  int n = 0;
  while (nodes_[n].feature >= 0) {
    n = x(nodes_[n].feature) <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
  }
  return n;
}

double RegressionTree::predict(const Eigen::Ref<const Eigen::RowVectorXd>& x) const {
  return nodes_[leaf_index(x)].value;
}

json RegressionTree::state() const {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), value = json::array();
  for (const auto& n : nodes_) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return {{"feature", feature}, {"threshold", threshold}, {"left", left},
          {"right", right},     {"value", value}};
}

RegressionTree RegressionTree::from_state(const json& j) {
  RegressionTree t;
  const auto& feature = j.at("feature");
  t.nodes_.resize(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) {
    auto& n = t.nodes_[i];
    n.feature = feature[i].get<int>();
    n.threshold = j.at("threshold")[i].get<double>();
    n.left = j.at("left")[i].get<int>();
    n.right = j.at("right")[i].get<int>();
    n.value = j.at("value")[i].get<double>();
  }
  return t;
}

// --- ensembles --------------------------------------------------------------

TreeOptions tree_options_from(const LearnerSpec& spec) {
  TreeOptions opt;
  const auto criterion = spec.param<std::string>("criterion");
  if (criterion == "gini") {
    opt.criterion = SplitCriterion::gini;
  } else if (criterion == "entropy") {
    opt.criterion = SplitCriterion::entropy;
  } else {
    throw ConfigError("unknown split criterion '" + criterion + "'");
  }
  opt.max_depth = spec.param<int>("max_depth");
  opt.max_features = MaxFeatures::parse(spec.hyperparameters.at("max_features"));
  opt.min_samples_split = spec.param<int>("min_samples_split");
  opt.min_samples_leaf = spec.param<int>("min_samples_leaf");
  return opt;
}

TreeEnsemble TreeEnsemble::fit(const Matrix& X, const Labels& y, const TreeOptions& options,
                               int n_estimators, bool bootstrap, std::uint64_t seed) {
  TreeEnsemble ens;
  ens.trees_.reserve(static_cast<std::size_t>(n_estimators));
  const Index n = X.rows();
  for (int t = 0; t < n_estimators; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    Vector w = Vector::Ones(n);
    if (bootstrap) {
      w.setZero();
      for (Index i = 0; i < n; ++i) w(static_cast<Index>(rng.below(static_cast<std::uint64_t>(n)))) += 1.0;
    }
    ens.trees_.push_back(DecisionTree::fit(X, y, w, options, rng));
  }
  return ens;
}

Matrix TreeEnsemble::predict_proba(const Matrix& X) const {
  Vector votes = Vector::Zero(X.rows());
  for (const auto& tree : trees_) {
    for (Index r = 0; r < X.rows(); ++r) {
      if (tree.positive_probability(X.row(r)) > 0.5) votes(r) += 1.0;
    }
  }
  return two_column_proba(votes / static_cast<double>(trees_.size()));
}

json TreeEnsemble::state() const {
  json trees = json::array();
  for (const auto& t : trees_) trees.push_back(t.state());
  return {{"trees", trees}};
}

TreeEnsemble TreeEnsemble::from_state(const json& j) {
  TreeEnsemble ens;
  for (const auto& t : j.at("trees")) ens.trees_.push_back(DecisionTree::from_state(t));
  return ens;
}

}  // namespace stga
