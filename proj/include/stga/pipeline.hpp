#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stga/dataset.hpp"
#include "stga/genetic.hpp"
#include "stga/learners.hpp"
#include "stga/metrics.hpp"
#include "stga/stacking.hpp"

namespace stga {

inline constexpr int kConfigFormatVersion = 1;
inline constexpr int kReportFormatVersion = 1;

// --- configuration ----------------------------------------------------------

struct PreprocessingConfig {
  bool impute = true;
  bool clip = false;
  double iqr_multiplier = 1.5;
  bool standardize = true;  // z-score with training statistics
};

enum class SplitMode { holdout, kfold };

struct SplitConfig {
  SplitMode mode = SplitMode::holdout;
  double train_fraction = 0.7;
  std::vector<int> ks{5, 10, 15};
};

struct StackSettings {
  bool enabled = true;
  std::string name = "Suggest Method (ST-GA)";
  std::vector<LearnerSpec> base;  // empty: the benchmark learners
  LearnerSpec meta = make_spec(Algorithm::gradient_boosting);
  Level1Mode level1_mode = Level1Mode::out_of_fold;
  int folds = 5;
  Level1FeatureKind level1_features = Level1FeatureKind::probability;
};

struct GaSettings {
  bool enabled = true;
  bool apply_to_learners = false;  // benchmark rows use the mask too
  LearnerSpec wrapper = make_spec(Algorithm::logistic_regression);
  GaConfig config;
};

struct ReportSettings {
  std::vector<std::string> formats{"json", "csv", "markdown"};
  bool include_timing = false;
  std::string reference_note;
};

/// Everything an experiment needs. Learner, stack and GA seeds are not
/// configured directly; they derive from master_seed.
struct ExperimentConfig {
  std::string dataset_path = "data/pima.csv";
  bool has_header = true;
  Schema schema = Schema::pima();
  PreprocessingConfig preprocessing;
  SplitConfig split;
  std::vector<LearnerSpec> learners;
  StackSettings stack;
  GaSettings ga;
  std::uint64_t master_seed = 42;
  // Fits preprocessing and GA on the whole file and builds D' naively.
  bool paper_faithful = false;
  ReportSettings report;

  void validate() const;
  json to_json() const;
  static ExperimentConfig from_json(const json& j);

  /// Benchmark learner set with row names.
  static std::vector<LearnerSpec> default_learners();
};

/// Default configuration as JSON.
json default_config_json();

/// Recursive object merge; arrays and scalars in `patch` replace, as does an
/// object whose "algorithm" differs from the one it patches.
json merge_config(json base, const json& patch);

/// Applies "a.b.c=value". The path must exist; array elements are addressed
/// by index. The value parses as JSON, falling back to a plain string.
void apply_override(json& config, const std::string& assignment);

/// defaults <- file <- overrides, validated.
ExperimentConfig load_experiment_config(const json& file_config,
                                        const std::vector<std::string>& overrides);

/// Reads a JSON config file; a relative dataset path in it is taken relative to
/// the file's directory. Unreadable files are DataError, bad JSON ConfigError.
ExperimentConfig load_experiment_config_file(const std::string& path,
                                             const std::vector<std::string>& overrides);

/// FNV-1a 64 of the canonical config JSON, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

Schema schema_from_json(const json& j);
json schema_to_json(const Schema& s);

// --- preprocessing ----------------------------------------------------------

struct PrepCounts {
  Index imputed = 0;
  Index clipped = 0;
};

class Preprocessor {
 public:
  static Preprocessor fit(const PreprocessingConfig& config, const Dataset& ds);

  /// Impute and clip only (the cleaned form written by `prep`).
  Dataset clean(const Dataset& ds, PrepCounts* counts = nullptr) const;
  Dataset apply(const Dataset& ds, PrepCounts* counts = nullptr) const;

  json to_json() const;
  static Preprocessor from_json(const json& j);

 private:
  PreprocessingConfig config_;
  std::optional<MedianImputer> imputer_;
  std::optional<OutlierClipper> clipper_;
  std::optional<Standardizer> standardizer_;
};

// --- provenance -------------------------------------------------------------

/// Source rows seen by each fitting stage; used to check that nothing
/// fitted during training touched a held-out row.
struct ProvenanceLog {
  struct Entry {
    std::string stage;
    RowIndices rows;
  };
  std::vector<Entry> entries;

  void record(const std::string& stage, const Dataset& ds);
};

// --- fitted artifact --------------------------------------------------------

struct FittedLearner {
  LearnerSpec spec;
  std::optional<TrainedModel> model;
  std::string error;  // nonempty when training failed
};

struct SelectionSummary;

struct ModelBundle {
  std::uint64_t master_seed = 0;
  std::string config_hash;
  Schema schema;
  Preprocessor preprocessor;
  std::vector<bool> mask;  // GA mask (all ones when GA is off)
  bool mask_applies_to_learners = false;
  std::vector<FittedLearner> learners;
  bool stack_enabled = false;
  std::string stack_name;
  std::optional<StackModel> stack;
  std::string stack_error;
  std::shared_ptr<const SelectionSummary> selection;  // null when GA is off

  json to_json() const;
  static ModelBundle from_json(const json& j);
};

struct FeatureRow {
  std::string feature;
  double single_feature_accuracy = 0.0;
  double selection_frequency = 0.0;  // share of the final population with the bit set
  bool selected = false;

  bool operator==(const FeatureRow&) const = default;
};

struct SelectionSummary {
  std::string placement;  // "training_split" | "full_dataset"
  std::string mask;
  std::vector<std::string> selected;
  double best_fitness = 0.0;
  double full_mask_fitness = 0.0;
  int generations = 0;
  long evaluations = 0;
  std::vector<FeatureRow> features;

  json to_json() const;
  static SelectionSummary from_json(const json& j);
  bool operator==(const SelectionSummary&) const = default;
};

/// Mask, fitness comparison and per-feature table for a finished GA run.
SelectionSummary summarize_selection(const GaRun& run, const Dataset& ga_data,
                                     const LearnerSpec& wrapper, const GaConfig& config,
                                     const std::string& placement);

struct FitOutcome {
  ModelBundle bundle;
  std::optional<GaRun> ga_run;
  std::optional<SelectionSummary> selection;
  std::map<std::string, double> seconds;
};

/// Trains the preprocessing, GA mask, benchmark learners and stack on
/// `train_raw`. With `global_raw` set (paper-faithful mode) preprocessing
/// and GA are fitted on it instead.
FitOutcome fit_models(const ExperimentConfig& config, const Dataset& train_raw,
                      std::uint64_t seed, const Dataset* global_raw = nullptr,
                      ProvenanceLog* log = nullptr);

/// Per-feature table for a finished GA run on `ds`.
std::vector<FeatureRow> feature_report(const Dataset& ds, const LearnerSpec& wrapper,
                                       const GaRun& run, int cv_k, std::uint64_t fold_seed);

// --- report -----------------------------------------------------------------

struct ModelRow {
  std::string name;
  std::string algorithm;
  bool ok = true;
  std::string error;
  Metric accuracy, sensitivity, specificity, fscore, auc;
  Metric f1;  // precision/recall F1
  Index n_test = 0;
  std::optional<double> seconds;

  bool operator==(const ModelRow&) const = default;
};

struct KFoldRow {
  std::string name;
  std::string algorithm;
  int k = 0;
  bool ok = true;
  std::string error;
  Metric mean_accuracy;
  Metric std_accuracy;  // sample standard deviation over folds
  std::vector<Metric> fold_accuracies;
  std::optional<double> seconds;

  bool operator==(const KFoldRow&) const = default;
};

struct KFoldSelection {
  int k = 0;
  std::vector<std::string> fold_masks;

  bool operator==(const KFoldSelection&) const = default;
};

struct Report {
  std::string kind;  // "holdout" | "kfold"
  json config = json::object();
  std::uint64_t master_seed = 0;
  std::string config_hash;
  json protocol = json::object();
  std::vector<ModelRow> holdout;
  std::vector<KFoldRow> kfold;
  std::optional<SelectionSummary> selection;
  std::vector<KFoldSelection> kfold_selection;
  std::string reference_note;
  std::optional<double> total_seconds;

  json to_json() const;
  static Report from_json(const json& j);
  bool operator==(const Report&) const = default;
};

/// "json" | "csv" | "markdown" (alias "md").
std::string render_report(const Report& report, const std::string& format);

// --- experiments ------------------------------------------------------------

struct HoldoutResult {
  Report report;
  std::map<std::string, RocCurve> roc;  // keyed by row name
  FitOutcome fit;
};

Dataset load_dataset(const ExperimentConfig& config);

/// Seeded train/test rows for the holdout split.
SplitIndices holdout_split(const ExperimentConfig& config, Index n);

/// Evaluates every model of the bundle on `test_raw`.
std::vector<ModelRow> evaluate_bundle(const ModelBundle& bundle, const Dataset& test_raw,
                                      std::map<std::string, RocCurve>* roc = nullptr);

/// Holdout report for a fitted bundle scored on `test_raw`.
Report holdout_report(const ExperimentConfig& config, const ModelBundle& bundle,
                      const Dataset& test_raw, std::map<std::string, RocCurve>* roc = nullptr);

HoldoutResult run_holdout(const ExperimentConfig& config, ProvenanceLog* log = nullptr);
HoldoutResult run_holdout(const ExperimentConfig& config, const Dataset& raw,
                          ProvenanceLog* log = nullptr);

Report run_kfold(const ExperimentConfig& config);
Report run_kfold(const ExperimentConfig& config, const Dataset& raw);

/// Seed handed to fit_models for the holdout run.
std::uint64_t holdout_fit_seed(const ExperimentConfig& config);

/// Report header fields shared by all runs.
Report report_skeleton(const ExperimentConfig& config, const std::string& kind);

}  // namespace stga
