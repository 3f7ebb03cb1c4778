#include <algorithm>
#include <sstream>

#include "stga/pipeline.hpp"

namespace stga {

namespace {

json metric_to_json(const Metric& m) { return m ? json(*m) : json("n/a"); }

Metric metric_from_json(const json& j) {
  if (j.is_string() && j.get<std::string>() == "n/a") return std::nullopt;
  if (!j.is_number()) throw DataError("report metric must be a number or \"n/a\"");
  return j.get<double>();
}

std::string number(double v) { return json(v).dump(); }

std::string csv_metric(const Metric& m) { return m ? number(*m) : "n/a"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c == '\n' ? ' ' : c;
  }
  return out;
}

std::string render_csv(const Report& r) {
  std::ostringstream out;
  if (r.kind == "kfold") {
    out << "name,algorithm,k,status,mean_accuracy,std_accuracy,fold_accuracies\n";
    for (const auto& row : r.kfold) {
      std::string folds;
      for (std::size_t i = 0; i < row.fold_accuracies.size(); ++i) {
        if (i) folds += ';';
        folds += csv_metric(row.fold_accuracies[i]);
      }
      out << csv_field(row.name) << ',' << row.algorithm << ',' << row.k << ','
          << (row.ok ? "ok" : "failed") << ',' << csv_metric(row.mean_accuracy) << ','
          << csv_metric(row.std_accuracy) << ',' << folds << '\n';
    }
    return out.str();
  }
  out << "name,algorithm,status,accuracy,sensitivity,specificity,fscore,auc,f1,n_test\n";
  for (const auto& row : r.holdout) {
    out << csv_field(row.name) << ',' << row.algorithm << ',' << (row.ok ? "ok" : "failed") << ','
        << csv_metric(row.accuracy) << ',' << csv_metric(row.sensitivity) << ','
        << csv_metric(row.specificity) << ',' << csv_metric(row.fscore) << ','
        << csv_metric(row.auc) << ',' << csv_metric(row.f1) << ',' << row.n_test << '\n';
  }
  return out.str();
}

void render_selection_md(std::ostream& out, const SelectionSummary& s) {
  out << "\n## Feature selection\n\n";
  out << "Best mask `" << s.mask << "` keeps " << s.selected.size() << " feature"
      << (s.selected.size() == 1 ? "" : "s") << ": ";
  for (std::size_t i = 0; i < s.selected.size(); ++i) out << (i ? ", " : "") << s.selected[i];
  out << ".\n\n";
  out << "- GA fitted on: " << s.placement << "\n";
  out << "- Wrapper CV accuracy, best mask: " << format_metric(s.best_fitness) << "\n";
  out << "- Wrapper CV accuracy, all features: " << format_metric(s.full_mask_fitness) << "\n";
  out << "- Generations: " << s.generations << ", fitness evaluations: " << s.evaluations << "\n\n";
  out << "| Feature | Single-feature accuracy | Selection frequency | Selected |\n";
  out << "|---|---|---|---|\n";
  for (const auto& f : s.features) {
    out << "| " << md_cell(f.feature) << " | " << format_metric(f.single_feature_accuracy) << " | "
        << format_metric(f.selection_frequency) << " | " << (f.selected ? "yes" : "no") << " |\n";
  }
}

std::string render_markdown(const Report& r) {
  std::ostringstream out;
  if (r.kind == "kfold") {
    out << "# K-fold cross-validation\n\n";
  } else {
    out << "# Holdout evaluation\n\n";
  }
  out << "Master seed " << r.master_seed << ", config hash `" << r.config_hash << "`.\n";
  if (r.protocol.is_object() && !r.protocol.empty()) {
    out << "\n";
    for (const auto& [key, value] : r.protocol.items()) {
      out << "- " << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
          << "\n";
    }
  }
  std::vector<std::string> failures;
  if (r.kind == "kfold") {
    std::vector<int> ks;
    std::vector<std::string> names;
    for (const auto& row : r.kfold) {
      if (std::find(ks.begin(), ks.end(), row.k) == ks.end()) ks.push_back(row.k);
      if (std::find(names.begin(), names.end(), row.name) == names.end()) names.push_back(row.name);
    }
    out << "\nMean accuracy (sample standard deviation) over folds.\n\n| Method |";
    for (int k : ks) out << " k=" << k << " |";
    out << "\n|---|";
    for (std::size_t i = 0; i < ks.size(); ++i) out << "---|";
    out << "\n";
    for (const auto& name : names) {
      out << "| " << md_cell(name) << " |";
      for (int k : ks) {
        const auto it = std::find_if(r.kfold.begin(), r.kfold.end(),
                                     [&](const KFoldRow& row) { return row.name == name && row.k == k; });
        if (it == r.kfold.end()) {
          out << " |";
        } else if (!it->ok) {
          out << " failed |";
          failures.push_back(name + " (k=" + std::to_string(k) + "): " + it->error);
        } else {
          out << ' ' << format_metric(it->mean_accuracy) << " (" << format_metric(it->std_accuracy)
              << ") |";
        }
      }
      out << "\n";
    }
  } else {
    out << "\n| Method | Accuracy | Sensitivity | Specificity | F-score | AUC | F1 |\n";
    out << "|---|---|---|---|---|---|---|\n";
    for (const auto& row : r.holdout) {
      out << "| " << md_cell(row.name) << " |";
      if (!row.ok) {
        out << " failed | failed | failed | failed | failed | failed |\n";
        failures.push_back(row.name + ": " + row.error);
        continue;
      }
      for (const Metric& m : {row.accuracy, row.sensitivity, row.specificity, row.fscore, row.auc, row.f1}) {
        out << ' ' << format_metric(m) << " |";
      }
      out << "\n";
    }
  }
  if (!failures.empty()) {
    out << "\nFailed models:\n\n";
    for (const auto& f : failures) out << "- " << md_cell(f) << "\n";
  }
  if (r.selection) render_selection_md(out, *r.selection);
  if (!r.kfold_selection.empty()) {
    out << "\n## Feature masks per fold\n\n| k | Masks |\n|---|---|\n";
    for (const auto& s : r.kfold_selection) {
      out << "| " << s.k << " |";
      for (const auto& m : s.fold_masks) out << " `" << m << "`";
      out << " |\n";
    }
  }
  if (!r.reference_note.empty()) out << "\nReference: " << r.reference_note << "\n";
  return out.str();
}

}  // namespace

json Report::to_json() const {
  json rows = json::array();
  for (const auto& row : holdout) {
    json j = {{"name", row.name},
              {"algorithm", row.algorithm},
              {"status", row.ok ? "ok" : "failed"},
              {"error", row.error},
              {"accuracy", metric_to_json(row.accuracy)},
              {"sensitivity", metric_to_json(row.sensitivity)},
              {"specificity", metric_to_json(row.specificity)},
              {"fscore", metric_to_json(row.fscore)},
              {"auc", metric_to_json(row.auc)},
              {"f1", metric_to_json(row.f1)},
              {"n_test", row.n_test}};
    if (row.seconds) j["seconds"] = *row.seconds;
    rows.push_back(std::move(j));
  }
  json krows = json::array();
  for (const auto& row : kfold) {
    json folds = json::array();
    for (const auto& m : row.fold_accuracies) folds.push_back(metric_to_json(m));
    json j = {{"name", row.name},
              {"algorithm", row.algorithm},
              {"k", row.k},
              {"status", row.ok ? "ok" : "failed"},
              {"error", row.error},
              {"mean_accuracy", metric_to_json(row.mean_accuracy)},
              {"std_accuracy", metric_to_json(row.std_accuracy)},
              {"fold_accuracies", folds}};
    if (row.seconds) j["seconds"] = *row.seconds;
    krows.push_back(std::move(j));
  }
  json ksel = json::array();
  for (const auto& s : kfold_selection) ksel.push_back({{"k", s.k}, {"fold_masks", s.fold_masks}});
  json j = {{"format", "stga-report"},
            {"format_version", kReportFormatVersion},
            {"kind", kind},
            {"master_seed", master_seed},
            {"config_hash", config_hash},
            {"config", config},
            {"protocol", protocol},
            {"holdout", rows},
            {"kfold", krows},
            {"feature_selection", selection ? selection->to_json() : json(nullptr)},
            {"kfold_feature_selection", ksel},
            {"reference_note", reference_note}};
  if (total_seconds) j["total_seconds"] = *total_seconds;
  return j;
}

Report Report::from_json(const json& j) {
  try {
    if (j.value("format", std::string{}) != "stga-report") throw DataError("not a report document");
    if (j.at("format_version").get<int>() != kReportFormatVersion) {
      throw DataError("unsupported report format_version");
    }
    Report r;
    r.kind = j.at("kind").get<std::string>();
    r.master_seed = j.at("master_seed").get<std::uint64_t>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.config = j.at("config");
    r.protocol = j.at("protocol");
    for (const auto& row : j.at("holdout")) {
      ModelRow m;
      m.name = row.at("name").get<std::string>();
      m.algorithm = row.at("algorithm").get<std::string>();
      m.ok = row.at("status").get<std::string>() == "ok";
      m.error = row.at("error").get<std::string>();
      m.accuracy = metric_from_json(row.at("accuracy"));
      m.sensitivity = metric_from_json(row.at("sensitivity"));
      m.specificity = metric_from_json(row.at("specificity"));
      m.fscore = metric_from_json(row.at("fscore"));
      m.auc = metric_from_json(row.at("auc"));
      m.f1 = metric_from_json(row.at("f1"));
      m.n_test = row.at("n_test").get<Index>();
      if (row.contains("seconds")) m.seconds = row.at("seconds").get<double>();
      r.holdout.push_back(std::move(m));
    }
    for (const auto& row : j.at("kfold")) {
      KFoldRow k;
      k.name = row.at("name").get<std::string>();
      k.algorithm = row.at("algorithm").get<std::string>();
      k.k = row.at("k").get<int>();
      k.ok = row.at("status").get<std::string>() == "ok";
      k.error = row.at("error").get<std::string>();
      k.mean_accuracy = metric_from_json(row.at("mean_accuracy"));
      k.std_accuracy = metric_from_json(row.at("std_accuracy"));
      for (const auto& f : row.at("fold_accuracies")) k.fold_accuracies.push_back(metric_from_json(f));
      if (row.contains("seconds")) k.seconds = row.at("seconds").get<double>();
      r.kfold.push_back(std::move(k));
    }
    if (!j.at("feature_selection").is_null()) r.selection = SelectionSummary::from_json(j.at("feature_selection"));
    for (const auto& s : j.at("kfold_feature_selection")) {
      r.kfold_selection.push_back(
          {s.at("k").get<int>(), s.at("fold_masks").get<std::vector<std::string>>()});
    }
    r.reference_note = j.at("reference_note").get<std::string>();
    if (j.contains("total_seconds")) r.total_seconds = j.at("total_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
}

std::string render_report(const Report& report, const std::string& format) {
  if (format == "json") return report.to_json().dump(2) + "\n";
  if (format == "csv") return render_csv(report);
  if (format == "markdown" || format == "md") return render_markdown(report);
  throw ConfigError("unknown report format '" + format + "'");
}

// --- selection summary ------------------------------------------------------

json SelectionSummary::to_json() const {
  const SelectionSummary& s = *this;
  json features = json::array();
  for (const auto& f : s.features) {
    features.push_back({{"feature", f.feature},
                        {"single_feature_accuracy", f.single_feature_accuracy},
                        {"selection_frequency", f.selection_frequency},
                        {"selected", f.selected}});
  }
  return {{"placement", s.placement},         {"mask", s.mask},
          {"selected", s.selected},           {"n_selected", s.selected.size()},
          {"best_fitness", s.best_fitness},   {"full_mask_fitness", s.full_mask_fitness},
          {"generations", s.generations},     {"evaluations", s.evaluations},
          {"features", features}};
}

SelectionSummary SelectionSummary::from_json(const json& j) {
  SelectionSummary s;
  s.placement = j.at("placement").get<std::string>();
  s.mask = j.at("mask").get<std::string>();
  s.selected = j.at("selected").get<std::vector<std::string>>();
  s.best_fitness = j.at("best_fitness").get<double>();
  s.full_mask_fitness = j.at("full_mask_fitness").get<double>();
  s.generations = j.at("generations").get<int>();
  s.evaluations = j.at("evaluations").get<long>();
  for (const auto& f : j.at("features")) {
    s.features.push_back({f.at("feature").get<std::string>(),
                          f.at("single_feature_accuracy").get<double>(),
                          f.at("selection_frequency").get<double>(), f.at("selected").get<bool>()});
  }
  return s;
}

}  // namespace stga
