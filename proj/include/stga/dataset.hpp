#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "stga/types.hpp"

namespace stga {

/// Column layout of a CSV file: names, which column is the binary label,
/// and which predictor columns use a literal 0 to mean "not measured".
struct Schema {
  std::vector<std::string> column_names;
  Index label_column = 0;
  std::set<Index> missing_as_zero_columns;

  /// Throws ConfigError when the invariants do not hold.
  void validate() const;

  Index column_count() const { return static_cast<Index>(column_names.size()); }
  Index predictor_count() const { return column_count() - 1; }

  /// Column positions of the predictors, in file order.
  std::vector<Index> predictor_columns() const;
  std::vector<std::string> feature_names() const;
  const std::string& label_name() const { return column_names.at(label_column); }

  /// Maps a file column index to its position in the feature matrix.
  Index feature_of_column(Index column) const;

  /// Pima Indians diabetes layout: 8 predictors then "outcome".
  /// Glucose, blood pressure, skinfold, insulin and BMI are zero-as-missing.
  static Schema pima();

  bool operator==(const Schema&) const = default;
};

struct Dataset {
  Matrix features;  // rows = samples, cols = predictors
  Labels labels;    // values in {0, 1}
  Schema schema;
  RowIndices origin;  // source line of each row in the loaded file; empty if unknown

  Index rows() const { return features.rows(); }
  Index cols() const { return features.cols(); }
  Index positives() const { return labels.sum(); }
  bool has_both_classes() const { return positives() > 0 && positives() < rows(); }
};

/// Reads a comma-separated file. Values are returned raw (no cleaning).
Dataset load_csv(const std::string& path, const Schema& schema, bool has_header);
Dataset parse_csv(std::istream& in, const Schema& schema, bool has_header,
                  const std::string& source_name = "<stream>");

/// Writes the dataset back in schema column order using shortest
/// round-trip number formatting.
void write_csv(std::ostream& out, const Dataset& ds, bool header);

Dataset select_rows(const Dataset& ds, const RowIndices& rows);

/// Keeps the predictors whose mask bit is set; the label column is kept.
Dataset select_features(const Dataset& ds, const std::vector<bool>& mask);

/// Quantile with linear interpolation between order statistics
/// (position q * (n - 1) in the sorted sample).
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

/// Per-column medians of nonzero values for the zero-as-missing columns.
class MedianImputer {
 public:
  MedianImputer() = default;
  explicit MedianImputer(std::vector<std::pair<Index, double>> medians)
      : medians_(std::move(medians)) {}

  static MedianImputer fit(const Dataset& ds);
  Dataset apply(const Dataset& ds, Index* replaced = nullptr) const;

  const std::vector<std::pair<Index, double>>& medians() const { return medians_; }

 private:
  std::vector<std::pair<Index, double>> medians_;  // (feature index, median)
};

/// Replaces zeros in declared columns by the median of the nonzero values.
Dataset impute_median(const Dataset& ds);

/// Tukey fences per predictor column; flagged values become the median.
class OutlierClipper {
 public:
  struct Fence {
    double low;
    double high;
    double median;
  };

  OutlierClipper() = default;
  explicit OutlierClipper(std::vector<Fence> fences) : fences_(std::move(fences)) {}

  static OutlierClipper fit(const Dataset& ds, double iqr_multiplier);
  Dataset apply(const Dataset& ds, Index* replaced = nullptr) const;

  const std::vector<Fence>& fences() const { return fences_; }

 private:
  std::vector<Fence> fences_;
};

struct ClipResult {
  Dataset data;
  Index replaced = 0;
};

ClipResult clip_outliers(const Dataset& ds, double iqr_multiplier);

/// Z-score scaling with statistics from the fitting set. Constant
/// columns are centred but not scaled.
class Standardizer {
 public:
  Standardizer() = default;
  Standardizer(Vector mean, Vector scale) : mean_(std::move(mean)), scale_(std::move(scale)) {}

  static Standardizer fit(const Dataset& ds);
  Dataset apply(const Dataset& ds) const;

  const Vector& mean() const { return mean_; }
  const Vector& scale() const { return scale_; }

 private:
  Vector mean_;
  Vector scale_;
};

struct SplitIndices {
  RowIndices train;
  RowIndices test;
};

/// Seeded permutation; the first round_half_up(fraction * n) rows train.
SplitIndices split_indices(Index n, double train_fraction, std::uint64_t seed);
std::pair<Dataset, Dataset> shuffle_split(const Dataset& ds, double train_fraction,
                                          std::uint64_t seed);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;  // fold id per sample
  bool stratified = false;
  std::uint64_t seed = 0;

  RowIndices test_indices(int fold) const;
  RowIndices train_indices(int fold) const;
};

FoldPlan make_folds(const Labels& labels, int k, bool stratified, std::uint64_t seed);
inline FoldPlan make_folds(const Dataset& ds, int k, bool stratified, std::uint64_t seed) {
  return make_folds(ds.labels, k, stratified, seed);
}

}  // namespace stga
