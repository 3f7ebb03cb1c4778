#include "stga/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "stga/pipeline.hpp"

namespace fs = std::filesystem;

namespace stga {

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::string out_dir = "out";
  int verbose = 0;
  bool quiet = false;

  std::string model_path;    // eval
  std::string input_path;    // report
  std::string format = "markdown";
  std::string output_path;   // report
};

class Log {
 public:
  explicit Log(int level) : level_(level) {}
  void info(const std::string& msg) const {
    if (level_ >= 1) std::cerr << msg << '\n';
  }
  void detail(const std::string& msg) const {
    if (level_ >= 2) std::cerr << msg << '\n';
  }

 private:
  int level_;
};

json read_json_file(const fs::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw DataError(std::string("cannot open ") + what + " '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed ") + what + " '" + path.string() + "': " + e.what());
  }
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

// defaults <- file <- --set <- --seed
ExperimentConfig resolve_config(const Options& opt) {
  std::vector<std::string> overrides = opt.overrides;
  if (opt.seed) overrides.push_back("master_seed=" + std::to_string(*opt.seed));
  if (opt.config_path.empty()) return load_experiment_config(json::object(), overrides);
  return load_experiment_config_file(opt.config_path, overrides);
}

void announce(const ExperimentConfig& config) {
  std::cout << "master seed " << config.master_seed << ", config hash " << config_hash(config) << '\n';
}

bool any_failed(const Report& r) {
  for (const auto& row : r.holdout) {
    if (!row.ok) return true;
  }
  for (const auto& row : r.kfold) {
    if (!row.ok) return true;
  }
  return false;
}

std::string extension_of(const std::string& format) {
  if (format == "json") return ".json";
  if (format == "csv") return ".csv";
  return ".md";
}

void write_report(const Report& report, const std::vector<std::string>& formats, const fs::path& out_dir,
                  const std::string& stem, const Log& log) {
  for (const auto& f : formats) {
    const fs::path path = out_dir / (stem + extension_of(f));
    write_file(path, render_report(report, f));
    log.info("wrote " + path.string());
  }
}

int finish(const Report& report, const Log& log) {
  if (!any_failed(report)) return kExitOk;
  for (const auto& row : report.holdout) {
    if (!row.ok) std::cerr << "model failed: " << row.name << ": " << row.error << '\n';
  }
  for (const auto& row : report.kfold) {
    if (!row.ok) std::cerr << "model failed: " << row.name << " (k=" << row.k << "): " << row.error << '\n';
  }
  log.detail("reports were written; failed rows are marked in them");
  return kExitModelFailure;
}

// --- commands ---------------------------------------------------------------

int cmd_prep(const Options& opt, const Log& log) {
  const ExperimentConfig config = resolve_config(opt);
  announce(config);
  const Dataset raw = load_dataset(config);
  const Preprocessor prep = Preprocessor::fit(config.preprocessing, raw);
  PrepCounts counts;
  const Dataset cleaned = prep.clean(raw, &counts);

  const fs::path out(opt.out_dir);
  std::ostringstream csv;
  write_csv(csv, cleaned, config.has_header);
  write_file(out / "cleaned.csv", csv.str());
  const json summary = {{"master_seed", config.master_seed},
                        {"config_hash", config_hash(config)},
                        {"input", config.dataset_path},
                        {"rows", cleaned.rows()},
                        {"imputed", counts.imputed},
                        {"clipped", counts.clipped},
                        {"preprocessor", prep.to_json()}};
  write_file(out / "prep_summary.json", summary.dump(2) + "\n");
  log.info("prep: " + std::to_string(cleaned.rows()) + " rows, " + std::to_string(counts.imputed) +
           " imputed, " + std::to_string(counts.clipped) + " clipped");
  return kExitOk;
}

int cmd_select(const Options& opt, const Log& log) {
  const ExperimentConfig config = resolve_config(opt);
  announce(config);
  if (!config.ga.enabled) throw ConfigError("select needs ga.enabled = true in the config");
  const Dataset raw = load_dataset(config);
  const Dataset data = Preprocessor::fit(config.preprocessing, raw).apply(raw);
  GaConfig gc = config.ga.config;
  gc.seed = derive_seed(config.master_seed, 4);
  log.info("select: GA over " + std::to_string(data.cols()) + " features, " + std::to_string(data.rows()) +
           " rows");
  const GaRun run = run_ga(gc, data, config.ga.wrapper);
  const SelectionSummary sel = summarize_selection(run, data, config.ga.wrapper, gc, "full_dataset");

  const fs::path out(opt.out_dir);
  json mask = sel.to_json();
  mask["master_seed"] = config.master_seed;
  mask["config_hash"] = config_hash(config);
  mask["wrapper"] = config.ga.wrapper.to_json();
  write_file(out / "mask.json", mask.dump(2) + "\n");
  std::ostringstream history;
  run.write_history_csv(history);
  write_file(out / "ga_history.csv", history.str());
  std::cout << "mask " << sel.mask << " (" << sel.selected.size() << " features), wrapper accuracy "
            << sel.best_fitness << " vs " << sel.full_mask_fitness << " with all features\n";
  return kExitOk;
}

int cmd_train(const Options& opt, const Log& log) {
  const ExperimentConfig config = resolve_config(opt);
  announce(config);
  const Dataset raw = load_dataset(config);
  const SplitIndices split = holdout_split(config, raw.rows());
  log.info("train: " + std::to_string(split.train.size()) + " training rows");
  const FitOutcome fit = fit_models(config, select_rows(raw, split.train), holdout_fit_seed(config),
                                    config.paper_faithful ? &raw : nullptr);
  for (const auto& l : fit.bundle.learners) {
    if (!l.error.empty()) std::cerr << "model failed: " << l.spec.display_name() << ": " << l.error << '\n';
    else log.detail("trained " + l.spec.display_name());
  }
  if (!fit.bundle.stack_error.empty()) {
    std::cerr << "model failed: " << fit.bundle.stack_name << ": " << fit.bundle.stack_error << '\n';
  }
  if (fit.selection) log.info("GA mask " + fit.selection->mask);
  const fs::path path = fs::path(opt.out_dir) / "model.json";
  write_file(path, fit.bundle.to_json().dump() + "\n");
  log.info("wrote " + path.string());

  bool failed = !fit.bundle.stack_error.empty();
  for (const auto& l : fit.bundle.learners) failed = failed || !l.error.empty();
  return failed ? kExitModelFailure : kExitOk;
}

int cmd_eval(const Options& opt, const Log& log) {
  const ExperimentConfig config = resolve_config(opt);
  announce(config);
  const fs::path model_path = opt.model_path.empty() ? fs::path(opt.out_dir) / "model.json"
                                                     : fs::path(opt.model_path);
  const ModelBundle bundle = ModelBundle::from_json(read_json_file(model_path, "model"));
  if (bundle.config_hash != config_hash(config)) {
    std::cerr << "warning: model was trained with config hash " << bundle.config_hash << '\n';
  }
  const Dataset raw = load_dataset(config);
  const SplitIndices split = holdout_split(config, raw.rows());
  std::map<std::string, RocCurve> roc;
  const Report report = holdout_report(config, bundle, select_rows(raw, split.test), &roc);

  const fs::path out(opt.out_dir);
  write_report(report, config.report.formats, out, "report", log);
  for (const auto& [name, curve] : roc) {
    std::ostringstream csv;
    write_roc_csv(csv, curve);
    write_file(out / "roc" / (file_stem(name) + ".csv"), csv.str());
  }
  for (const auto& row : report.holdout) {
    if (row.ok) log.info(row.name + ": accuracy " + std::to_string(*row.accuracy));
  }
  return finish(report, log);
}

int cmd_xval(const Options& opt, const Log& log) {
  const ExperimentConfig config = resolve_config(opt);
  announce(config);
  std::string ks;
  for (int k : config.split.ks) ks += (ks.empty() ? "" : ",") + std::to_string(k);
  log.info("xval: k in {" + ks + "}");
  const Report report = run_kfold(config);
  write_report(report, config.report.formats, fs::path(opt.out_dir), "xval_report", log);
  for (const auto& row : report.kfold) {
    if (row.ok) log.detail(row.name + " k=" + std::to_string(row.k) + ": " + std::to_string(*row.mean_accuracy));
  }
  return finish(report, log);
}

int cmd_report(const Options& opt, const Log& log) {
  const Report report = Report::from_json(read_json_file(opt.input_path, "report"));
  // stdout may be the rendered report itself
  (opt.output_path == "-" ? std::cerr : std::cout)
      << "master seed " << report.master_seed << ", config hash " << report.config_hash << '\n';
  const std::string text = render_report(report, opt.format);
  if (opt.output_path == "-") {
    std::cout << text;
    return kExitOk;
  }
  fs::path path = opt.output_path.empty() ? fs::path(opt.input_path) : fs::path(opt.output_path);
  if (opt.output_path.empty()) {
    path.replace_extension(extension_of(opt.format == "md" ? "markdown" : opt.format));
    if (path == fs::path(opt.input_path)) throw ConfigError("report would overwrite its input; pass --output");
  }
  write_file(path, text);
  log.info("wrote " + path.string());
  return kExitOk;
}

}  // namespace

std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) {
    const bool keep = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.';
    if (keep) {
      out += c;
    } else if (!out.empty() && out.back() != '_') {
      out += '_';
    }
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out.empty() ? "model" : out;
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Stacked generalization with GA feature selection"};
  app.name("stga");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every command");

  Options opt;
  const auto add_globals = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", opt.config_path, "Experiment config (JSON)");
    cmd->add_option("--seed", opt.seed, "Master seed; overrides the config");
    cmd->add_option("--set", opt.overrides, "Override a config key: key.path=value (repeatable)")
        ->allow_extra_args(false);
    cmd->add_option("-o,--out", opt.out_dir, "Output directory")->capture_default_str();
    cmd->add_flag("-v,--verbose", opt.verbose, "More log output (repeatable)");
    cmd->add_flag("-q,--quiet", opt.quiet, "Only errors and the seed/hash line");
  };

  struct Command {
    CLI::App* app;
    int (*run)(const Options&, const Log&);
  };
  std::vector<Command> commands;
  const auto add = [&](const char* name, const char* help, int (*fn)(const Options&, const Log&)) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_globals(cmd);
    commands.push_back({cmd, fn});
    return cmd;
  };
  add("prep", "Impute/clip the dataset; writes cleaned.csv and prep_summary.json", cmd_prep);
  add("select", "GA feature selection on the whole file; writes mask.json and ga_history.csv", cmd_select);
  add("train", "Fit learners and the stack on the holdout training split; writes model.json", cmd_train);
  add("eval", "Score a model on the holdout test split; writes report files and roc/*.csv", cmd_eval)
      ->add_option("-m,--model", opt.model_path, "Model artifact (default: OUT/model.json)");
  add("xval", "Stratified k-fold evaluation for every configured k; writes xval_report files", cmd_xval);
  CLI::App* report = add("report", "Render a report JSON as json, csv or markdown", cmd_report);
  report->add_option("-i,--input", opt.input_path, "Report JSON")->required();
  report->add_option("-f,--format", opt.format, "json | csv | markdown")
      ->check(CLI::IsMember({"json", "csv", "markdown", "md"}))
      ->capture_default_str();
  report->add_option("--output", opt.output_path, "Destination file, '-' for stdout (default: next to input)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  const Log log(opt.quiet ? 0 : 1 + opt.verbose);
  for (const auto& c : commands) {
    if (!c.app->parsed()) continue;
    try {
      return c.run(opt, log);
    } catch (const ConfigError& e) {
      std::cerr << "config error: " << e.what() << '\n';
      return kExitConfigError;
    } catch (const DataError& e) {
      std::cerr << "data error: " << e.what() << '\n';
      return kExitIoError;
    } catch (const ModelError& e) {
      std::cerr << "model error: " << e.what() << '\n';
      return kExitModelFailure;
    } catch (const fs::filesystem_error& e) {
      std::cerr << "i/o error: " << e.what() << '\n';
      return kExitIoError;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitModelFailure;
    }
  }
  return kExitConfigError;
}

}  // namespace stga
