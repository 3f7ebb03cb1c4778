#include "stga/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "stga/random.hpp"

namespace stga {

void Schema::validate() const {
  if (column_names.size() < 2) {
    throw ConfigError("schema needs at least one predictor and a label column");
  }
  if (label_column < 0 || label_column >= column_count()) {
    throw ConfigError("schema label_column " + std::to_string(label_column) +
                      " is out of range");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : column_names) {
    if (!seen.insert(name).second) throw ConfigError("duplicate column name '" + name + "'");
  }
  for (Index c : missing_as_zero_columns) {
    if (c == label_column) throw ConfigError("label column cannot be zero-as-missing");
    if (c < 0 || c >= column_count()) {
      throw ConfigError("zero-as-missing column " + std::to_string(c) + " is out of range");
    }
  }
}

std::vector<Index> Schema::predictor_columns() const {
  std::vector<Index> cols;
  for (Index c = 0; c < column_count(); ++c) {
    if (c != label_column) cols.push_back(c);
  }
  return cols;
}

std::vector<std::string> Schema::feature_names() const {
  std::vector<std::string> names;
  for (Index c : predictor_columns()) names.push_back(column_names[c]);
  return names;
}

Index Schema::feature_of_column(Index column) const {
  if (column == label_column) throw ConfigError("label column is not a feature");
  return column < label_column ? column : column - 1;
}

Schema Schema::pima() {
  Schema s;
  s.column_names = {"pregnancies", "glucose", "blood_pressure", "skin_thickness",
                    "insulin",     "bmi",     "diabetes_pedigree", "age", "outcome"};
  s.label_column = 8;
  s.missing_as_zero_columns = {1, 2, 3, 4, 5};
  return s;
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      return out;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
}

bool parse_double(std::string_view s, double& value) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(value);
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

Dataset parse_csv(std::istream& in, const Schema& schema, bool has_header,
                  const std::string& source_name) {
  schema.validate();
  const auto ncols = static_cast<std::size_t>(schema.column_count());
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != ncols) {
      throw DataError(source_name + ": row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(ncols));
    }
    if (header_pending) {
      header_pending = false;
      for (std::size_t c = 0; c < ncols; ++c) {
        if (fields[c] != schema.column_names[c]) {
          throw DataError(source_name + ": header column " + std::to_string(c + 1) + " is '" +
                          std::string(fields[c]) + "', schema expects '" +
                          schema.column_names[c] + "'");
        }
      }
      continue;
    }
    std::vector<double> row;
    row.reserve(ncols - 1);
    for (std::size_t c = 0; c < ncols; ++c) {
      double v = 0.0;
      if (!parse_double(fields[c], v)) {
        throw DataError(source_name + ": row " + std::to_string(line_no) + ", column " +
                        std::to_string(c + 1) + ": cannot parse '" + std::string(fields[c]) +
                        "' as a number");
      }
      if (static_cast<Index>(c) == schema.label_column) {
        if (v != 0.0 && v != 1.0) {
          throw DataError(source_name + ": row " + std::to_string(line_no) + ", column " +
                          std::to_string(c + 1) + ": label must be 0 or 1, got '" +
                          std::string(fields[c]) + "'");
        }
        labels.push_back(static_cast<int>(v));
      } else {
        row.push_back(v);
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(source_name + ": no data rows");

  Dataset ds;
  ds.schema = schema;
  ds.features.resize(static_cast<Index>(rows.size()), schema.predictor_count());
  ds.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      ds.features(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
    ds.labels(static_cast<Index>(r)) = labels[r];
    ds.origin.push_back(static_cast<Index>(r));
  }
  return ds;
}

Dataset load_csv(const std::string& path, const Schema& schema, bool has_header) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return parse_csv(in, schema, has_header, path);
}

void write_csv(std::ostream& out, const Dataset& ds, bool header) {
  const Schema& s = ds.schema;
  if (header) {
    for (Index c = 0; c < s.column_count(); ++c) {
      if (c) out << ',';
      out << s.column_names[c];
    }
    out << '\n';
  }
  for (Index r = 0; r < ds.rows(); ++r) {
    Index f = 0;
    for (Index c = 0; c < s.column_count(); ++c) {
      if (c) out << ',';
      if (c == s.label_column) {
        out << ds.labels(r);
      } else {
        out << format_double(ds.features(r, f++));
      }
    }
    out << '\n';
  }
}

Dataset select_rows(const Dataset& ds, const RowIndices& rows) {
  Dataset out;
  out.schema = ds.schema;
  out.features.resize(static_cast<Index>(rows.size()), ds.cols());
  out.labels.resize(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Index>(i)) = ds.features.row(rows[i]);
    out.labels(static_cast<Index>(i)) = ds.labels(rows[i]);
    if (!ds.origin.empty()) out.origin.push_back(ds.origin[static_cast<std::size_t>(rows[i])]);
  }
  return out;
}

Dataset select_features(const Dataset& ds, const std::vector<bool>& mask) {
  if (static_cast<Index>(mask.size()) != ds.cols()) {
    throw ConfigError("feature mask has " + std::to_string(mask.size()) +
                      " bits, dataset has " + std::to_string(ds.cols()) + " features");
  }
  const auto predictors = ds.schema.predictor_columns();
  Schema schema;
  std::vector<Index> keep;
  for (std::size_t f = 0; f < mask.size(); ++f) {
    if (!mask[f]) continue;
    const Index col = predictors[f];
    if (ds.schema.missing_as_zero_columns.count(col)) {
      schema.missing_as_zero_columns.insert(static_cast<Index>(keep.size()));
    }
    schema.column_names.push_back(ds.schema.column_names[col]);
    keep.push_back(static_cast<Index>(f));
  }
  if (keep.empty()) throw ConfigError("feature mask selects no features");
  schema.label_column = static_cast<Index>(keep.size());
  schema.column_names.push_back(ds.schema.label_name());

  Dataset out;
  out.schema = std::move(schema);
  out.labels = ds.labels;
  out.origin = ds.origin;
  out.features.resize(ds.rows(), static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) {
    out.features.col(static_cast<Index>(j)) = ds.features.col(keep[j]);
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DataError("quantile of an empty sample");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

MedianImputer MedianImputer::fit(const Dataset& ds) {
  MedianImputer imp;
  for (Index col : ds.schema.missing_as_zero_columns) {
    const Index f = ds.schema.feature_of_column(col);
    std::vector<double> nonzero;
    for (Index r = 0; r < ds.rows(); ++r) {
      if (ds.features(r, f) != 0.0) nonzero.push_back(ds.features(r, f));
    }
    if (nonzero.empty()) {
      throw DataError("column '" + ds.schema.column_names[col] +
                      "' has no nonzero values; median imputation is undefined");
    }
    imp.medians_.emplace_back(f, median(std::move(nonzero)));
  }
  return imp;
}

Dataset MedianImputer::apply(const Dataset& ds, Index* replaced) const {
  Dataset out = ds;
  Index count = 0;
  for (const auto& [f, med] : medians_) {
    for (Index r = 0; r < out.rows(); ++r) {
      if (out.features(r, f) == 0.0) {
        out.features(r, f) = med;
        ++count;
      }
    }
  }
  if (replaced) *replaced = count;
  return out;
}

Dataset impute_median(const Dataset& ds) { return MedianImputer::fit(ds).apply(ds); }

OutlierClipper OutlierClipper::fit(const Dataset& ds, double iqr_multiplier) {
  if (!(iqr_multiplier > 0.0)) throw ConfigError("iqr_multiplier must be positive");
  OutlierClipper clipper;
  for (Index f = 0; f < ds.cols(); ++f) {
    std::vector<double> col(ds.features.col(f).data(), ds.features.col(f).data() + ds.rows());
    const double q1 = quantile(col, 0.25);
    const double q3 = quantile(col, 0.75);
    const double iqr = q3 - q1;
    if (iqr <= 0.0) {
      // degenerate spread: nothing is flagged
      clipper.fences_.push_back({-HUGE_VAL, HUGE_VAL, median(col)});
    } else {
      clipper.fences_.push_back(
          {q1 - iqr_multiplier * iqr, q3 + iqr_multiplier * iqr, median(col)});
    }
  }
  return clipper;
}

Dataset OutlierClipper::apply(const Dataset& ds, Index* replaced) const {
  if (static_cast<Index>(fences_.size()) != ds.cols()) {
    throw DataError("outlier fences were fitted on a different feature count");
  }
  Dataset out = ds;
  Index count = 0;
  for (Index f = 0; f < out.cols(); ++f) {
    const Fence& fence = fences_[f];
    for (Index r = 0; r < out.rows(); ++r) {
      const double v = out.features(r, f);
      if (v < fence.low || v > fence.high) {
        out.features(r, f) = fence.median;
        ++count;
      }
    }
  }
  if (replaced) *replaced = count;
  return out;
}

ClipResult clip_outliers(const Dataset& ds, double iqr_multiplier) {
  ClipResult res;
  res.data = OutlierClipper::fit(ds, iqr_multiplier).apply(ds, &res.replaced);
  return res;
}

Standardizer Standardizer::fit(const Dataset& ds) {
  Standardizer s;
  const auto n = static_cast<double>(ds.rows());
  s.mean_ = ds.features.colwise().mean().transpose();
  s.scale_.resize(ds.cols());
  for (Index f = 0; f < ds.cols(); ++f) {
    const double var = (ds.features.col(f).array() - s.mean_(f)).square().sum() / n;
    s.scale_(f) = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return s;
}

Dataset Standardizer::apply(const Dataset& ds) const {
  if (ds.cols() != mean_.size()) throw DataError("standardizer feature count mismatch");
  Dataset out = ds;
  out.features = ((ds.features.rowwise() - mean_.transpose()).array().rowwise() /
                  scale_.transpose().array())
                     .matrix();
  return out;
}

SplitIndices split_indices(Index n, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  }
  const auto n_train = static_cast<Index>(std::floor(train_fraction * static_cast<double>(n) + 0.5));
  if (n_train <= 0 || n_train >= n) {
    throw ConfigError("train fraction " + std::to_string(train_fraction) + " on " +
                      std::to_string(n) + " rows leaves an empty partition");
  }
  RowIndices perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  Rng rng(seed);
  rng.shuffle(perm);
  SplitIndices out;
  out.train.assign(perm.begin(), perm.begin() + n_train);
  out.test.assign(perm.begin() + n_train, perm.end());
  return out;
}

std::pair<Dataset, Dataset> shuffle_split(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed) {
  const auto idx = split_indices(ds.rows(), train_fraction, seed);
  return {select_rows(ds, idx.train), select_rows(ds, idx.test)};
}

RowIndices FoldPlan::test_indices(int fold) const {
  RowIndices out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(static_cast<Index>(i));
  }
  return out;
}

RowIndices FoldPlan::train_indices(int fold) const {
  RowIndices out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(static_cast<Index>(i));
  }
  return out;
}

FoldPlan make_folds(const Labels& labels, int k, bool stratified, std::uint64_t seed) {
  const Index n = labels.size();
  if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
  if (k > n) {
    throw ConfigError("fold count " + std::to_string(k) + " exceeds sample count " +
                      std::to_string(n));
  }
  Rng rng(seed);
  RowIndices order;
  if (stratified) {
    // Deal each class's shuffled rows round-robin, continuing the counter
    // across classes so both the totals and the per-class counts balance.
    RowIndices neg, pos;
    for (Index i = 0; i < n; ++i) (labels(i) ? pos : neg).push_back(i);
    rng.shuffle(neg);
    rng.shuffle(pos);
    order = neg;
    order.insert(order.end(), pos.begin(), pos.end());
  } else {
    order.resize(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    rng.shuffle(order);
  }
  FoldPlan plan;
  plan.k = k;
  plan.stratified = stratified;
  plan.seed = seed;
  plan.assignments.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t i = 0; i < order.size(); ++i) {
    plan.assignments[static_cast<std::size_t>(order[i])] = static_cast<int>(i % k);
  }
  return plan;
}

}  // namespace stga
