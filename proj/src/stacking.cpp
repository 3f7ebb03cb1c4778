#include "stga/stacking.hpp"

#include <set>

namespace stga {

std::string to_string(Level1Mode m) { return m == Level1Mode::naive ? "naive" : "out_of_fold"; }

std::string to_string(Level1FeatureKind k) {
  return k == Level1FeatureKind::label ? "label" : "probability";
}

Level1Mode level1_mode_from_string(const std::string& s) {
  if (s == "out_of_fold") return Level1Mode::out_of_fold;
  if (s == "naive") return Level1Mode::naive;
  throw ConfigError("unknown level1_mode '" + s + "'");
}

Level1FeatureKind level1_feature_kind_from_string(const std::string& s) {
  if (s == "probability") return Level1FeatureKind::probability;
  if (s == "label") return Level1FeatureKind::label;
  throw ConfigError("unknown level1_features '" + s + "'");
}

void StackSpec::validate() const {
  if (base_specs.empty()) throw ConfigError("stack needs at least one base learner");
  if (mode == Level1Mode::out_of_fold && folds < 2) {
    throw ConfigError("out-of-fold stacking needs at least 2 folds");
  }
  for (const auto& s : base_specs) stga::validate(s);
  stga::validate(meta_spec);
}

json StackSpec::to_json() const {
  json bases = json::array();
  for (const auto& s : base_specs) bases.push_back(s.to_json());
  return {{"base", bases},
          {"meta", meta_spec.to_json()},
          {"level1_mode", to_string(mode)},
          {"folds", folds},
          {"level1_features", to_string(feature_kind)},
          {"seed", seed}};
}

StackSpec StackSpec::from_json(const json& j) {
  StackSpec s;
  for (const auto& b : j.at("base")) s.base_specs.push_back(LearnerSpec::from_json(b));
  s.meta_spec = LearnerSpec::from_json(j.at("meta"));
  s.mode = level1_mode_from_string(j.value("level1_mode", std::string("out_of_fold")));
  s.folds = j.value("folds", 5);
  s.feature_kind =
      level1_feature_kind_from_string(j.value("level1_features", std::string("probability")));
  s.seed = j.value("seed", std::uint64_t{0});
  s.validate();
  return s;
}

namespace {

Vector level1_column(const TrainedModel& model, const Matrix& X, Level1FeatureKind kind) {
  if (kind == Level1FeatureKind::label) return model.predict(X).cast<double>();
  return model.positive_probability(X);
}

Schema level1_schema(const StackSpec& spec, const std::string& label_name) {
  Schema schema;
  std::set<std::string> used;
  for (std::size_t t = 0; t < spec.base_specs.size(); ++t) {
    std::string name = "z_" + spec.base_specs[t].display_name();
    if (!used.insert(name).second) name += "_" + std::to_string(t);
    used.insert(name);
    schema.column_names.push_back(name);
  }
  schema.column_names.push_back(label_name);
  schema.label_column = static_cast<Index>(spec.base_specs.size());
  return schema;
}

}  // namespace

Dataset build_level1_dataset(const StackSpec& spec, const Dataset& ds, Level1Trace* trace) {
  spec.validate();
  if (!ds.has_both_classes()) throw DataError("stacking needs both classes in the training data");
  const Index m = ds.rows();
  const auto T = static_cast<Index>(spec.base_specs.size());

  Dataset out;
  out.schema = level1_schema(spec, ds.schema.label_name());
  out.labels = ds.labels;
  out.origin = ds.origin;
  out.features = Matrix::Zero(m, T);

  RowIndices all(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) all[static_cast<std::size_t>(i)] = i;

  if (spec.mode == Level1Mode::naive) {
    for (Index t = 0; t < T; ++t) {
      const auto model = train(spec.base_specs[static_cast<std::size_t>(t)], ds);
      out.features.col(t) = level1_column(model, ds.features, spec.feature_kind);
      if (trace) trace->fits.push_back({static_cast<std::size_t>(t), -1, all, all});
    }
    return out;
  }

  const FoldPlan plan = make_folds(ds.labels, spec.folds, true, spec.seed);
  for (int f = 0; f < plan.k; ++f) {
    const RowIndices train_rows = plan.train_indices(f);
    const RowIndices test_rows = plan.test_indices(f);
    const Dataset fold_train = select_rows(ds, train_rows);
    if (!fold_train.has_both_classes()) {
      throw DataError("stacking fold " + std::to_string(f) +
                      " has a single-class training part");
    }
    const Dataset fold_test = select_rows(ds, test_rows);
    for (Index t = 0; t < T; ++t) {
      const auto model = train(spec.base_specs[static_cast<std::size_t>(t)], fold_train);
      const Vector z = level1_column(model, fold_test.features, spec.feature_kind);
      for (std::size_t i = 0; i < test_rows.size(); ++i) {
        out.features(test_rows[i], t) = z(static_cast<Index>(i));
      }
      if (trace) trace->fits.push_back({static_cast<std::size_t>(t), f, train_rows, test_rows});
    }
  }
  return out;
}

StackModel train_stack(const StackSpec& spec, const Dataset& ds, Level1Trace* trace) {
  const Dataset level1 = build_level1_dataset(spec, ds, trace);
  std::vector<TrainedModel> bases;
  bases.reserve(spec.base_specs.size());
  // in naive mode these refits reproduce the models that produced D'
  for (const auto& s : spec.base_specs) bases.push_back(train(s, ds));
  TrainedModel meta = train(spec.meta_spec, level1);
  return StackModel{spec, std::move(bases), std::move(meta)};
}

Matrix level1_features(const StackModel& model, const Matrix& X) {
  if (X.cols() != model.n_features()) {
    throw DataError("stack expects " + std::to_string(model.n_features()) + " features, got " +
                    std::to_string(X.cols()));
  }
  Matrix z(X.rows(), static_cast<Index>(model.base_models.size()));
  for (std::size_t t = 0; t < model.base_models.size(); ++t) {
    z.col(static_cast<Index>(t)) =
        level1_column(model.base_models[t], X, model.spec.feature_kind);
  }
  return z;
}

Labels predict_stack(const StackModel& model, const Matrix& X) {
  return model.meta_model.predict(level1_features(model, X));
}

Vector stack_positive_probability(const StackModel& model, const Matrix& X) {
  return model.meta_model.positive_probability(level1_features(model, X));
}

json StackModel::to_json() const {
  json bases = json::array();
  for (const auto& b : base_models) bases.push_back(b.to_json());
  return {{"format", "stga-stack"},
          {"format_version", kModelFormatVersion},
          {"spec", spec.to_json()},
          {"base_models", bases},
          {"meta_model", meta_model.to_json()}};
}

StackModel StackModel::from_json(const json& j) {
  if (j.value("format", std::string{}) != "stga-stack") throw ModelError("not a stack artifact");
  if (j.at("format_version").get<int>() != kModelFormatVersion) {
    throw ModelError("unsupported stack format version");
  }
  std::vector<TrainedModel> bases;
  for (const auto& b : j.at("base_models")) bases.push_back(TrainedModel::from_json(b));
  if (bases.empty()) throw ModelError("stack artifact has no base models");
  return StackModel{StackSpec::from_json(j.at("spec")), std::move(bases),
                    TrainedModel::from_json(j.at("meta_model"))};
}

}  // namespace stga
