#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "stga/pipeline.hpp"

namespace stga {

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& section) {
  if (!j.is_object()) throw ConfigError(section + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in " + section);
  }
}

template <class T>
T get(const json& j, const std::string& key, const std::string& section) {
  if (!j.contains(key)) throw ConfigError(section + "." + key + " is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key + " has the wrong type");
  }
}

json learner_to_config(const LearnerSpec& s) {
  json j = {{"algorithm", to_string(s.algorithm)}, {"hyperparameters", s.hyperparameters}};
  if (!s.name.empty()) j["name"] = s.name;
  return j;
}

LearnerSpec learner_from_config(const json& j, const std::string& where) {
  check_keys(j, {"algorithm", "hyperparameters", "name"}, where);
  try {
    return LearnerSpec::from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

std::vector<LearnerSpec> learners_from_config(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + " must be a list of learners");
  std::vector<LearnerSpec> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(learner_from_config(j[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json learners_to_config(const std::vector<LearnerSpec>& specs) {
  json out = json::array();
  for (const auto& s : specs) out.push_back(learner_to_config(s));
  return out;
}

}  // namespace

Schema schema_from_json(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "pima") return Schema::pima();
    throw ConfigError("unknown built-in schema '" + j.get<std::string>() + "'");
  }
  check_keys(j, {"columns", "label", "missing_as_zero"}, "dataset.schema");
  Schema s;
  s.column_names = get<std::vector<std::string>>(j, "columns", "dataset.schema");
  const auto label = get<std::string>(j, "label", "dataset.schema");
  auto index_of = [&](const std::string& name) {
    for (std::size_t c = 0; c < s.column_names.size(); ++c) {
      if (s.column_names[c] == name) return static_cast<Index>(c);
    }
    throw ConfigError("dataset.schema: no column named '" + name + "'");
  };
  s.label_column = index_of(label);
  for (const auto& name : j.value("missing_as_zero", std::vector<std::string>{})) {
    s.missing_as_zero_columns.insert(index_of(name));
  }
  s.validate();
  return s;
}

json schema_to_json(const Schema& s) {
  json missing = json::array();
  for (Index c : s.missing_as_zero_columns) missing.push_back(s.column_names.at(c));
  return {{"columns", s.column_names}, {"label", s.label_name()}, {"missing_as_zero", missing}};
}

std::vector<LearnerSpec> ExperimentConfig::default_learners() {
  return {make_spec(Algorithm::random_forest, {}, 0, "RF"),
          make_spec(Algorithm::knn, {}, 0, "KNN"),
          make_spec(Algorithm::mlp, {}, 0, "MLP"),
          make_spec(Algorithm::adaboost, {}, 0, "Ada boost"),
          make_spec(Algorithm::decision_tree, {}, 0, "D tree Classifier"),
          make_spec(Algorithm::gaussian_nb, {}, 0, "NB"),
          make_spec(Algorithm::gradient_boosting, {}, 0, "GBC"),
          make_spec(Algorithm::svm, {}, 0, "SVM"),
          make_spec(Algorithm::extra_trees, {}, 0, "Extra Tree")};
}

void ExperimentConfig::validate() const {
  schema.validate();
  if (learners.empty() && !stack.enabled) {
    throw ConfigError("nothing to run: no learners and the stack is disabled");
  }
  if (!(split.train_fraction > 0.0 && split.train_fraction < 1.0)) {
    throw ConfigError("split.train_fraction must lie in (0, 1)");
  }
  if (split.ks.empty()) throw ConfigError("split.ks must list at least one k");
  for (int k : split.ks) {
    if (k < 2) throw ConfigError("split.ks entries must be >= 2");
  }
  if (preprocessing.clip && !(preprocessing.iqr_multiplier > 0.0)) {
    throw ConfigError("preprocessing.iqr_multiplier must be positive");
  }
  std::set<std::string> names;
  for (const auto& l : learners) {
    if (!names.insert(l.display_name()).second) {
      throw ConfigError("duplicate learner name '" + l.display_name() + "'");
    }
  }
  if (stack.enabled) {
    if (names.count(stack.name)) throw ConfigError("stack name clashes with a learner name");
    if (stack.base.empty() && learners.empty()) {
      throw ConfigError("stack.base is \"learners\" but the learner list is empty");
    }
    if (stack.level1_mode == Level1Mode::out_of_fold && stack.folds < 2) {
      throw ConfigError("stack.folds must be >= 2");
    }
  }
  ga.config.validate();
  for (const auto& f : report.formats) {
    if (f != "json" && f != "csv" && f != "markdown") {
      throw ConfigError("unknown report format '" + f + "'");
    }
  }
}

json ExperimentConfig::to_json() const {
  json ga_json = ga.config.to_json();
  ga_json.erase("seed");
  ga_json["enabled"] = ga.enabled;
  ga_json["apply_to_learners"] = ga.apply_to_learners;
  ga_json["wrapper"] = learner_to_config(ga.wrapper);
  return {
      {"format_version", kConfigFormatVersion},
      {"master_seed", master_seed},
      {"paper_faithful", paper_faithful},
      {"dataset", {{"path", dataset_path}, {"has_header", has_header}, {"schema", schema_to_json(schema)}}},
      {"preprocessing",
       {{"impute", preprocessing.impute},
        {"clip", preprocessing.clip},
        {"iqr_multiplier", preprocessing.iqr_multiplier},
        {"standardize", preprocessing.standardize}}},
      {"split",
       {{"mode", split.mode == SplitMode::holdout ? "holdout" : "kfold"},
        {"train_fraction", split.train_fraction},
        {"ks", split.ks}}},
      {"learners", learners_to_config(learners)},
      {"stack",
       {{"enabled", stack.enabled},
        {"name", stack.name},
        {"base", stack.base.empty() ? json("learners") : learners_to_config(stack.base)},
        {"meta", learner_to_config(stack.meta)},
        {"level1_mode", to_string(stack.level1_mode)},
        {"folds", stack.folds},
        {"level1_features", to_string(stack.level1_features)}}},
      {"ga", ga_json},
      {"report",
       {{"formats", report.formats},
        {"include_timing", report.include_timing},
        {"reference_note", report.reference_note}}}};
}

namespace {

ExperimentConfig parse_config(const json& j) {
  check_keys(j, {"format_version", "master_seed", "paper_faithful", "dataset", "preprocessing",
                 "split", "learners", "stack", "ga", "report"},
             "config");
  ExperimentConfig c;
  if (j.contains("format_version") && get<int>(j, "format_version", "config") != kConfigFormatVersion) {
    throw ConfigError("unsupported config format_version");
  }
  c.master_seed = j.value("master_seed", c.master_seed);
  c.paper_faithful = j.value("paper_faithful", c.paper_faithful);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, {"path", "has_header", "schema"}, "dataset");
    c.dataset_path = d.value("path", c.dataset_path);
    c.has_header = d.value("has_header", c.has_header);
    if (d.contains("schema")) c.schema = schema_from_json(d.at("schema"));
  }
  if (j.contains("preprocessing")) {
    const json& p = j.at("preprocessing");
    check_keys(p, {"impute", "clip", "iqr_multiplier", "standardize"}, "preprocessing");
    c.preprocessing.impute = p.value("impute", c.preprocessing.impute);
    c.preprocessing.clip = p.value("clip", c.preprocessing.clip);
    c.preprocessing.iqr_multiplier = p.value("iqr_multiplier", c.preprocessing.iqr_multiplier);
    c.preprocessing.standardize = p.value("standardize", c.preprocessing.standardize);
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, {"mode", "train_fraction", "ks"}, "split");
    const auto mode = s.value("mode", std::string("holdout"));
    if (mode == "holdout") {
      c.split.mode = SplitMode::holdout;
    } else if (mode == "kfold") {
      c.split.mode = SplitMode::kfold;
    } else {
      throw ConfigError("split.mode must be \"holdout\" or \"kfold\"");
    }
    c.split.train_fraction = s.value("train_fraction", c.split.train_fraction);
    if (s.contains("ks")) c.split.ks = get<std::vector<int>>(s, "ks", "split");
  }
  c.learners = j.contains("learners") ? learners_from_config(j.at("learners"), "learners")
                                      : ExperimentConfig::default_learners();
  if (j.contains("stack")) {
    const json& s = j.at("stack");
    check_keys(s, {"enabled", "name", "base", "meta", "level1_mode", "folds", "level1_features"},
               "stack");
    c.stack.enabled = s.value("enabled", c.stack.enabled);
    c.stack.name = s.value("name", c.stack.name);
    if (s.contains("base")) {
      const json& b = s.at("base");
      if (b.is_string()) {
        if (b.get<std::string>() != "learners") {
          throw ConfigError("stack.base must be \"learners\" or a list of learners");
        }
      } else {
        c.stack.base = learners_from_config(b, "stack.base");
        if (c.stack.base.empty()) throw ConfigError("stack.base list is empty");
      }
    }
    if (s.contains("meta")) c.stack.meta = learner_from_config(s.at("meta"), "stack.meta");
    c.stack.level1_mode =
        level1_mode_from_string(s.value("level1_mode", to_string(c.stack.level1_mode)));
    c.stack.level1_features =
        level1_feature_kind_from_string(s.value("level1_features", to_string(c.stack.level1_features)));
    c.stack.folds = s.value("folds", c.stack.folds);
  }
  if (j.contains("ga")) {
    json g = j.at("ga");
    if (!g.is_object()) throw ConfigError("ga must be an object");
    if (g.contains("seed")) throw ConfigError("ga.seed is derived from master_seed; remove it");
    c.ga.enabled = g.value("enabled", c.ga.enabled);
    c.ga.apply_to_learners = g.value("apply_to_learners", c.ga.apply_to_learners);
    if (g.contains("wrapper")) c.ga.wrapper = learner_from_config(g.at("wrapper"), "ga.wrapper");
    g.erase("enabled");
    g.erase("apply_to_learners");
    g.erase("wrapper");
    c.ga.config = GaConfig::from_json(g);
  }
  if (j.contains("report")) {
    const json& r = j.at("report");
    check_keys(r, {"formats", "include_timing", "reference_note"}, "report");
    if (r.contains("formats")) c.report.formats = get<std::vector<std::string>>(r, "formats", "report");
    c.report.include_timing = r.value("include_timing", c.report.include_timing);
    c.report.reference_note = r.value("reference_note", c.report.reference_note);
  }
  c.validate();
  return c;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  try {
    return parse_config(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

json default_config_json() { return ExperimentConfig::from_json(json::object()).to_json(); }

json merge_config(json base, const json& patch) {
  if (!base.is_object() || !patch.is_object()) return patch;
  // A learner object that names a different algorithm starts from scratch.
  if (patch.contains("algorithm") && base.contains("algorithm") &&
      patch["algorithm"] != base["algorithm"]) {
    return patch;
  }
  for (const auto& [key, value] : patch.items()) {
    base[key] = base.contains(key) ? merge_config(base[key], value) : value;
  }
  return base;
}

void apply_override(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' must look like key.path=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (node->is_object()) {
      if (!node->contains(key)) throw ConfigError("override names unknown key '" + path + "'");
      node = &(*node)[key];
    } else if (node->is_array()) {
      std::size_t idx = 0;
      try {
        std::size_t used = 0;
        idx = std::stoul(key, &used);
        if (used != key.size()) throw std::invalid_argument(key);
      } catch (const std::exception&) {
        throw ConfigError("override path '" + path + "': '" + key + "' is not a list index");
      }
      if (idx >= node->size()) throw ConfigError("override path '" + path + "': index out of range");
      node = &(*node)[idx];
    } else {
      throw ConfigError("override names unknown key '" + path + "'");
    }
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value;
  try {
    value = json::parse(text);
  } catch (const json::parse_error&) {
    value = text;
  }
  *node = std::move(value);
}

ExperimentConfig load_experiment_config(const json& file_config,
                                        const std::vector<std::string>& overrides) {
  const ExperimentConfig merged =
      ExperimentConfig::from_json(merge_config(default_config_json(), file_config));
  if (overrides.empty()) return merged;
  json normalized = merged.to_json();
  for (const auto& o : overrides) apply_override(normalized, o);
  return ExperimentConfig::from_json(normalized);
}

ExperimentConfig load_experiment_config_file(const std::string& path,
                                             const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  json file;
  try {
    file = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("malformed config '" + path + "': " + e.what());
  }
  if (!file.is_object()) throw ConfigError("config file must hold a JSON object");
  if (file.contains("dataset") && file["dataset"].is_object() && file["dataset"].contains("path") &&
      file["dataset"]["path"].is_string()) {
    const std::filesystem::path data(file["dataset"]["path"].get<std::string>());
    if (data.is_relative()) {
      file["dataset"]["path"] =
          (std::filesystem::path(path).parent_path() / data).lexically_normal().string();
    }
  }
  return load_experiment_config(file, overrides);
}

std::string config_hash(const ExperimentConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : config.to_json().dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace stga
