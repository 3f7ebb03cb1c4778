#include <chrono>
#include <cmath>

#include "stga/pipeline.hpp"

namespace stga {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double from_nullable(const json& j, double if_null) {
  return j.is_null() ? if_null : j.get<double>();
}

std::string mask_string(const std::vector<bool>& mask) {
  std::string s;
  for (bool b : mask) s += b ? '1' : '0';
  return s;
}

std::string describe_schema_mismatch(const Schema& expected, const Schema& got) {
  if (expected.column_names != got.column_names) {
    std::string e, g;
    for (const auto& c : expected.column_names) e += (e.empty() ? "" : ",") + c;
    for (const auto& c : got.column_names) g += (g.empty() ? "" : ",") + c;
    return "model expects columns [" + e + "] but the data has [" + g + "]";
  }
  if (expected.label_column != got.label_column) return "label column differs";
  return "zero-as-missing columns differ";
}

ModelRow score_row(const std::string& name, const std::string& algorithm, const Labels& truth,
                   const Vector& p1, std::map<std::string, RocCurve>* roc) {
  ModelRow row;
  row.name = name;
  row.algorithm = algorithm;
  row.n_test = truth.size();
  const auto cm = confusion(truth, threshold_labels(p1));
  row.accuracy = accuracy(cm);
  row.sensitivity = sensitivity(cm);
  row.specificity = specificity(cm);
  row.fscore = fscore(cm);
  row.f1 = f1_precision_recall(cm);
  try {
    const RocCurve curve = roc_curve(truth, p1);
    row.auc = auc(curve);
    if (roc) (*roc)[name] = curve;
  } catch (const DataError&) {
    row.auc = std::nullopt;  // single-class test set
  }
  return row;
}

ModelRow failed_row(const std::string& name, const std::string& algorithm, std::string error) {
  ModelRow row;
  row.name = name;
  row.algorithm = algorithm;
  row.ok = false;
  row.error = std::move(error);
  row.accuracy = row.sensitivity = row.specificity = row.fscore = row.auc = row.f1 = std::nullopt;
  return row;
}

}  // namespace

// --- preprocessing ----------------------------------------------------------

Preprocessor Preprocessor::fit(const PreprocessingConfig& config, const Dataset& ds) {
  Preprocessor p;
  p.config_ = config;
  Dataset d = ds;
  if (config.impute) {
    p.imputer_ = MedianImputer::fit(d);
    d = p.imputer_->apply(d);
  }
  if (config.clip) {
    p.clipper_ = OutlierClipper::fit(d, config.iqr_multiplier);
    d = p.clipper_->apply(d);
  }
  if (config.standardize) p.standardizer_ = Standardizer::fit(d);
  return p;
}

Dataset Preprocessor::clean(const Dataset& ds, PrepCounts* counts) const {
  Dataset d = ds;
  Index imputed = 0, clipped = 0;
  if (imputer_) d = imputer_->apply(d, &imputed);
  if (clipper_) d = clipper_->apply(d, &clipped);
  if (counts) *counts = {imputed, clipped};
  return d;
}

Dataset Preprocessor::apply(const Dataset& ds, PrepCounts* counts) const {
  Dataset d = clean(ds, counts);
  if (standardizer_) d = standardizer_->apply(d);
  return d;
}

json Preprocessor::to_json() const {
  json j = {{"impute", config_.impute},
            {"clip", config_.clip},
            {"iqr_multiplier", config_.iqr_multiplier},
            {"standardize", config_.standardize},
            {"medians", nullptr},
            {"fences", nullptr},
            {"mean", nullptr},
            {"scale", nullptr}};
  if (imputer_) {
    json m = json::array();
    for (const auto& [f, v] : imputer_->medians()) m.push_back({f, v});
    j["medians"] = m;
  }
  if (clipper_) {
    json f = json::array();
    for (const auto& fence : clipper_->fences()) {
      f.push_back({finite_or_null(fence.low), finite_or_null(fence.high), fence.median});
    }
    j["fences"] = f;
  }
  if (standardizer_) {
    j["mean"] = std::vector<double>(standardizer_->mean().data(),
                                    standardizer_->mean().data() + standardizer_->mean().size());
    j["scale"] = std::vector<double>(standardizer_->scale().data(),
                                     standardizer_->scale().data() + standardizer_->scale().size());
  }
  return j;
}

Preprocessor Preprocessor::from_json(const json& j) {
  Preprocessor p;
  p.config_.impute = j.at("impute").get<bool>();
  p.config_.clip = j.at("clip").get<bool>();
  p.config_.iqr_multiplier = j.at("iqr_multiplier").get<double>();
  p.config_.standardize = j.at("standardize").get<bool>();
  if (!j.at("medians").is_null()) {
    std::vector<std::pair<Index, double>> medians;
    for (const auto& m : j.at("medians")) medians.emplace_back(m.at(0).get<Index>(), m.at(1).get<double>());
    p.imputer_ = MedianImputer(std::move(medians));
  }
  if (!j.at("fences").is_null()) {
    std::vector<OutlierClipper::Fence> fences;
    for (const auto& f : j.at("fences")) {
      fences.push_back({from_nullable(f.at(0), -HUGE_VAL), from_nullable(f.at(1), HUGE_VAL),
                        f.at(2).get<double>()});
    }
    p.clipper_ = OutlierClipper(std::move(fences));
  }
  if (!j.at("mean").is_null()) {
    const auto mean = j.at("mean").get<std::vector<double>>();
    const auto scale = j.at("scale").get<std::vector<double>>();
    p.standardizer_ = Standardizer(Eigen::Map<const Vector>(mean.data(), static_cast<Index>(mean.size())),
                                   Eigen::Map<const Vector>(scale.data(), static_cast<Index>(scale.size())));
  }
  return p;
}

void ProvenanceLog::record(const std::string& stage, const Dataset& ds) {
  entries.push_back({stage, ds.origin});
}

// --- bundle -----------------------------------------------------------------

json ModelBundle::to_json() const {
  json ls = json::array();
  for (const auto& l : learners) {
    ls.push_back({{"spec", l.spec.to_json()},
                  {"model", l.model ? l.model->to_json() : json(nullptr)},
                  {"error", l.error}});
  }
  return {{"format", "stga-bundle"},
          {"format_version", kModelFormatVersion},
          {"master_seed", master_seed},
          {"config_hash", config_hash},
          {"schema", schema_to_json(schema)},
          {"preprocessor", preprocessor.to_json()},
          {"mask", mask_string(mask)},
          {"mask_applies_to_learners", mask_applies_to_learners},
          {"learners", ls},
          {"stack_enabled", stack_enabled},
          {"stack_name", stack_name},
          {"stack", stack ? stack->to_json() : json(nullptr)},
          {"stack_error", stack_error},
          {"feature_selection", selection ? selection->to_json() : json(nullptr)}};
}

ModelBundle ModelBundle::from_json(const json& j) {
  if (j.value("format", std::string{}) != "stga-bundle") throw ModelError("not a model artifact");
  if (j.at("format_version").get<int>() != kModelFormatVersion) {
    throw ModelError("unsupported model artifact version");
  }
  try {
    ModelBundle b;
    b.master_seed = j.at("master_seed").get<std::uint64_t>();
    b.config_hash = j.at("config_hash").get<std::string>();
    b.schema = schema_from_json(j.at("schema"));
    b.preprocessor = Preprocessor::from_json(j.at("preprocessor"));
    b.mask = Chromosome::from_string(j.at("mask").get<std::string>()).bits;
    b.mask_applies_to_learners = j.at("mask_applies_to_learners").get<bool>();
    for (const auto& l : j.at("learners")) {
      FittedLearner f{LearnerSpec::from_json(l.at("spec")), std::nullopt, l.at("error").get<std::string>()};
      if (!l.at("model").is_null()) f.model = TrainedModel::from_json(l.at("model"));
      b.learners.push_back(std::move(f));
    }
    b.stack_enabled = j.at("stack_enabled").get<bool>();
    b.stack_name = j.at("stack_name").get<std::string>();
    if (!j.at("stack").is_null()) b.stack = StackModel::from_json(j.at("stack"));
    b.stack_error = j.at("stack_error").get<std::string>();
    if (!j.at("feature_selection").is_null()) {
      b.selection = std::make_shared<const SelectionSummary>(SelectionSummary::from_json(j.at("feature_selection")));
    }
    return b;
  } catch (const json::exception& e) {
    throw ModelError(std::string("malformed model artifact: ") + e.what());
  }
}

// --- fitting ----------------------------------------------------------------

std::vector<FeatureRow> feature_report(const Dataset& ds, const LearnerSpec& wrapper,
                                       const GaRun& run, int cv_k, std::uint64_t fold_seed) {
  const auto names = ds.schema.feature_names();
  const auto n = static_cast<std::size_t>(ds.cols());
  std::vector<FeatureRow> rows;
  std::size_t population = 0;
  std::vector<std::size_t> set_count(n, 0);
  for (const auto& island : run.final_population) {
    for (const auto& ch : island) {
      ++population;
      for (std::size_t f = 0; f < n && f < ch.size(); ++f) set_count[f] += ch.bits[f];
    }
  }
  for (std::size_t f = 0; f < n; ++f) {
    Chromosome single;
    single.bits.assign(n, false);
    single.bits[f] = true;
    FeatureRow row;
    row.feature = names[f];
    row.single_feature_accuracy = wrapper_fitness(single, ds, wrapper, cv_k, fold_seed);
    row.selection_frequency =
        population ? static_cast<double>(set_count[f]) / static_cast<double>(population) : 0.0;
    row.selected = f < run.best_chromosome.size() && run.best_chromosome.bits[f];
    rows.push_back(std::move(row));
  }
  return rows;
}

SelectionSummary summarize_selection(const GaRun& run, const Dataset& ga_data,
                                     const LearnerSpec& wrapper, const GaConfig& config,
                                     const std::string& placement) {
  SelectionSummary sel;
  sel.placement = placement;
  sel.mask = run.best_chromosome.to_string();
  const auto names = ga_data.schema.feature_names();
  for (std::size_t f = 0; f < run.best_chromosome.size(); ++f) {
    if (run.best_chromosome.bits[f]) sel.selected.push_back(names[f]);
  }
  sel.best_fitness = run.best_fitness;
  Chromosome all;
  all.bits.assign(run.best_chromosome.size(), true);
  sel.full_mask_fitness = wrapper_fitness(all, ga_data, wrapper, config.cv_folds, wrapper_fold_seed(config));
  sel.generations = run.generations;
  sel.evaluations = run.evaluations;
  sel.features = feature_report(ga_data, wrapper, run, config.cv_folds, wrapper_fold_seed(config));
  return sel;
}

FitOutcome fit_models(const ExperimentConfig& config, const Dataset& train_raw,
                      std::uint64_t seed, const Dataset* global_raw, ProvenanceLog* log) {
  FitOutcome out;
  ModelBundle& b = out.bundle;
  b.master_seed = config.master_seed;
  b.config_hash = config_hash(config);
  b.schema = train_raw.schema;

  const Dataset& prep_source = global_raw ? *global_raw : train_raw;
  if (log) log->record("preprocess_fit", prep_source);
  b.preprocessor = Preprocessor::fit(config.preprocessing, prep_source);
  const Dataset train_set = b.preprocessor.apply(train_raw);

  std::vector<bool> mask(static_cast<std::size_t>(train_set.cols()), true);
  if (config.ga.enabled) {
    const Dataset ga_data = global_raw ? b.preprocessor.apply(*global_raw) : train_set;
    if (log) log->record("ga", ga_data);
    GaConfig gc = config.ga.config;
    gc.seed = derive_seed(seed, 4);
    const auto start = Clock::now();
    GaRun run = run_ga(gc, ga_data, config.ga.wrapper);
    out.seconds["ga"] = seconds_since(start);
    mask = run.best_chromosome.bits;

    out.selection = summarize_selection(run, ga_data, config.ga.wrapper, gc,
                                        global_raw ? "full_dataset" : "training_split");
    b.selection = std::make_shared<const SelectionSummary>(*out.selection);
    out.ga_run = std::move(run);
  }
  b.mask = mask;
  b.mask_applies_to_learners = config.ga.enabled && config.ga.apply_to_learners;
  const Dataset masked = select_features(train_set, mask);

  auto seeded = [&](const std::vector<LearnerSpec>& specs) {
    std::vector<LearnerSpec> out_specs = specs;
    for (std::size_t i = 0; i < out_specs.size(); ++i) out_specs[i].seed = derive_seed(seed, 100 + i);
    return out_specs;
  };

  const auto learner_specs = seeded(config.learners);
  for (const auto& spec : learner_specs) {
    FittedLearner fitted{spec, std::nullopt, {}};
    const Dataset& data = b.mask_applies_to_learners ? masked : train_set;
    if (log) log->record("learner:" + spec.display_name(), data);
    const auto start = Clock::now();
    try {
      fitted.model = train(spec, data);
    } catch (const std::exception& e) {
      fitted.error = e.what();
    }
    out.seconds[spec.display_name()] = seconds_since(start);
    b.learners.push_back(std::move(fitted));
  }

  b.stack_enabled = config.stack.enabled;
  b.stack_name = config.stack.name;
  if (config.stack.enabled) {
    StackSpec ss;
    ss.base_specs = config.stack.base.empty() ? learner_specs : seeded(config.stack.base);
    ss.meta_spec = config.stack.meta;
    ss.meta_spec.seed = derive_seed(seed, 300);
    ss.mode = config.paper_faithful ? Level1Mode::naive : config.stack.level1_mode;
    ss.folds = config.stack.folds;
    ss.feature_kind = config.stack.level1_features;
    ss.seed = derive_seed(seed, 3);
    if (log) log->record("stack", masked);
    const auto start = Clock::now();
    try {
      b.stack = train_stack(ss, masked);
    } catch (const std::exception& e) {
      b.stack_error = e.what();
    }
    out.seconds[config.stack.name] = seconds_since(start);
  }
  return out;
}

// --- evaluation -------------------------------------------------------------

std::vector<ModelRow> evaluate_bundle(const ModelBundle& bundle, const Dataset& test_raw,
                                      std::map<std::string, RocCurve>* roc) {
  if (!(test_raw.schema == bundle.schema)) {
    throw ConfigError("schema mismatch: " + describe_schema_mismatch(bundle.schema, test_raw.schema));
  }
  const Dataset test = bundle.preprocessor.apply(test_raw);
  const Dataset masked = select_features(test, bundle.mask);
  std::vector<ModelRow> rows;
  for (const auto& l : bundle.learners) {
    const std::string name = l.spec.display_name();
    const std::string algo = to_string(l.spec.algorithm);
    if (!l.model) {
      rows.push_back(failed_row(name, algo, l.error));
      continue;
    }
    try {
      const Matrix& X = bundle.mask_applies_to_learners ? masked.features : test.features;
      rows.push_back(score_row(name, algo, test.labels, l.model->positive_probability(X), roc));
    } catch (const std::exception& e) {
      rows.push_back(failed_row(name, algo, e.what()));
    }
  }
  if (bundle.stack_enabled) {
    if (!bundle.stack) {
      rows.push_back(failed_row(bundle.stack_name, "stack", bundle.stack_error));
    } else {
      try {
        rows.push_back(score_row(bundle.stack_name, "stack", test.labels,
                                 stack_positive_probability(*bundle.stack, masked.features), roc));
      } catch (const std::exception& e) {
        rows.push_back(failed_row(bundle.stack_name, "stack", e.what()));
      }
    }
  }
  return rows;
}

// --- experiments ------------------------------------------------------------

Dataset load_dataset(const ExperimentConfig& config) {
  return load_csv(config.dataset_path, config.schema, config.has_header);
}

SplitIndices holdout_split(const ExperimentConfig& config, Index n) {
  return split_indices(n, config.split.train_fraction, derive_seed(config.master_seed, 1));
}

std::uint64_t holdout_fit_seed(const ExperimentConfig& config) {
  return derive_seed(config.master_seed, 2);
}

Report report_skeleton(const ExperimentConfig& config, const std::string& kind) {
  Report r;
  r.kind = kind;
  r.config = config.to_json();
  r.master_seed = config.master_seed;
  r.config_hash = config_hash(config);
  const std::string scope = config.paper_faithful ? "full_dataset" : "training_split";
  r.protocol = {
      {"paper_faithful", config.paper_faithful},
      {"preprocessing_fit", scope},
      {"ga_fit", config.ga.enabled ? scope : "disabled"},
      {"level1_mode", !config.stack.enabled    ? "disabled"
                      : config.paper_faithful ? "naive"
                                              : to_string(config.stack.level1_mode)},
      {"meta_learner", config.stack.enabled ? to_string(config.stack.meta.algorithm) : "disabled"},
      {"learners_use_ga_mask", config.ga.enabled && config.ga.apply_to_learners}};
  if (kind == "holdout") r.protocol["train_fraction"] = config.split.train_fraction;
  if (kind == "kfold") r.protocol["ks"] = config.split.ks;
  r.reference_note = config.report.reference_note;
  return r;
}

Report holdout_report(const ExperimentConfig& config, const ModelBundle& bundle,
                      const Dataset& test_raw, std::map<std::string, RocCurve>* roc) {
  Report r = report_skeleton(config, "holdout");
  r.holdout = evaluate_bundle(bundle, test_raw, roc);
  if (bundle.selection) r.selection = *bundle.selection;
  return r;
}

HoldoutResult run_holdout(const ExperimentConfig& config, ProvenanceLog* log) {
  return run_holdout(config, load_dataset(config), log);
}

HoldoutResult run_holdout(const ExperimentConfig& config, const Dataset& raw, ProvenanceLog* log) {
  config.validate();
  const auto start = Clock::now();
  const SplitIndices split = holdout_split(config, raw.rows());
  const Dataset train_raw = select_rows(raw, split.train);
  const Dataset test_raw = select_rows(raw, split.test);

  HoldoutResult result;
  result.fit = fit_models(config, train_raw, holdout_fit_seed(config),
                          config.paper_faithful ? &raw : nullptr, log);
  result.report = holdout_report(config, result.fit.bundle, test_raw, &result.roc);
  if (config.report.include_timing) {
    for (auto& row : result.report.holdout) row.seconds = result.fit.seconds[row.name];
    result.report.total_seconds = seconds_since(start);
  }
  return result;
}

Report run_kfold(const ExperimentConfig& config) { return run_kfold(config, load_dataset(config)); }

Report run_kfold(const ExperimentConfig& config, const Dataset& raw) {
  config.validate();
  const auto start = Clock::now();
  Report report = report_skeleton(config, "kfold");
  for (int k : config.split.ks) {
    if (k > raw.rows()) {
      throw ConfigError("k = " + std::to_string(k) + " exceeds the " + std::to_string(raw.rows()) +
                        " rows");
    }
    const std::uint64_t k_seed = derive_seed(config.master_seed, 1000 + static_cast<std::uint64_t>(k));
    const FoldPlan plan = make_folds(raw.labels, k, true, k_seed);

    std::vector<KFoldRow> rows;
    KFoldSelection masks{k, {}};
    for (int f = 0; f < k; ++f) {
      const Dataset train_raw = select_rows(raw, plan.train_indices(f));
      const Dataset test_raw = select_rows(raw, plan.test_indices(f));
      const FitOutcome fit = fit_models(config, train_raw, derive_seed(k_seed, static_cast<std::uint64_t>(f) + 1),
                                        config.paper_faithful ? &raw : nullptr);
      const auto fold_rows = evaluate_bundle(fit.bundle, test_raw);
      if (fit.selection) masks.fold_masks.push_back(fit.selection->mask);
      if (rows.empty()) {
        for (const auto& r : fold_rows) {
          KFoldRow kr;
          kr.name = r.name;
          kr.algorithm = r.algorithm;
          kr.k = k;
          if (config.report.include_timing) kr.seconds = 0.0;
          rows.push_back(std::move(kr));
        }
      }
      for (std::size_t i = 0; i < fold_rows.size(); ++i) {
        KFoldRow& kr = rows[i];
        kr.fold_accuracies.push_back(fold_rows[i].ok ? fold_rows[i].accuracy : std::nullopt);
        if (!fold_rows[i].ok && kr.ok) {
          kr.ok = false;
          kr.error = "fold " + std::to_string(f) + ": " + fold_rows[i].error;
        }
        if (kr.seconds) {
          const auto it = fit.seconds.find(kr.name);
          if (it != fit.seconds.end()) *kr.seconds += it->second;
        }
      }
    }
    for (auto& kr : rows) {
      if (!kr.ok) continue;
      double sum = 0.0;
      for (const auto& a : kr.fold_accuracies) sum += a.value_or(0.0);
      const double mean = sum / static_cast<double>(k);
      double ss = 0.0;
      for (const auto& a : kr.fold_accuracies) ss += (a.value_or(0.0) - mean) * (a.value_or(0.0) - mean);
      kr.mean_accuracy = mean;
      kr.std_accuracy = std::sqrt(ss / static_cast<double>(k - 1));
    }
    report.kfold.insert(report.kfold.end(), rows.begin(), rows.end());
    if (config.ga.enabled) report.kfold_selection.push_back(std::move(masks));
  }
  if (config.report.include_timing) report.total_seconds = seconds_since(start);
  return report;
}

}  // namespace stga
