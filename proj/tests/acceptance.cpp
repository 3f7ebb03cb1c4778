// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only when
// every criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "stga/cli.hpp"
#include "stga/genetic.hpp"
#include "stga/learners/mlp.hpp"
#include "stga/metrics.hpp"
#include "stga/pipeline.hpp"
#include "stga/stacking.hpp"
#include "test_support.hpp"

namespace fs = std::filesystem;
using namespace stga;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      notes.push_back("failed: " + what);
    }
  }
};

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

const std::string kConfig = std::string(STGA_SOURCE_DIR) + "/configs/pima.json";

// --- 1. metric formulas against a brute-force tally -------------------------

Outcome metric_oracle() {
  Outcome out;
  Rng rng(2024);
  double worst = 0.0;
  int undefined_agree = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Index n = static_cast<Index>(rng.below(61));
    Labels t(n), p(n);
    const double bias = rng.uniform();
    for (Index i = 0; i < n; ++i) {
      t(i) = rng.uniform() < bias ? 1 : 0;
      p(i) = rng.uniform() < 0.5 ? t(i) : 1 - t(i);
    }
    long tp = 0, tn = 0, fp = 0, fn = 0;
    for (Index i = 0; i < n; ++i) {
      if (t(i) == 1 && p(i) == 1) ++tp;
      if (t(i) == 0 && p(i) == 0) ++tn;
      if (t(i) == 0 && p(i) == 1) ++fp;
      if (t(i) == 1 && p(i) == 0) ++fn;
    }
    const auto ratio = [](long a, long b) -> Metric {
      return b == 0 ? std::nullopt : Metric(static_cast<double>(a) / static_cast<double>(b));
    };
    const Metric acc = ratio(tp + tn, tp + tn + fp + fn);
    const Metric sn = ratio(tp, tp + fn);
    const Metric sp = ratio(tn, tn + fp);
    Metric f;
    if (sn && sp && *sn + *sp > 0.0) f = 2.0 * *sp * *sn / (*sp + *sn);

    const auto cm = confusion(t, p);
    const std::pair<Metric, Metric> pairs[] = {
        {accuracy(cm), acc}, {sensitivity(cm), sn}, {specificity(cm), sp}, {fscore(cm), f}};
    for (const auto& [got, want] : pairs) {
      if (got.has_value() != want.has_value()) {
        out.require(false, "definedness differs in trial " + std::to_string(trial));
        continue;
      }
      if (got) worst = std::max(worst, std::abs(*got - *want));
      else ++undefined_agree;
    }
  }
  out.require(worst < 1e-12, "max deviation " + std::to_string(worst));
  out.detail = "1000 pairs, max |diff| " + fmt(worst, 3) + ", " + std::to_string(undefined_agree) +
               " undefined cells agree";
  return out;
}

// --- 2. AUC against pair counting -------------------------------------------

Outcome auc_oracle() {
  Outcome out;
  Rng rng(77);
  double worst = 0.0;
  int sets = 0;
  while (sets < 500) {
    const Index n = 2 + static_cast<Index>(rng.below(199));
    Labels y(n);
    Vector s(n);
    const bool coarse = rng.uniform() < 0.5;  // many ties
    for (Index i = 0; i < n; ++i) {
      y(i) = rng.uniform() < 0.4 ? 1 : 0;
      s(i) = coarse ? std::floor(rng.uniform() * 5.0) / 5.0 : rng.uniform();
    }
    if (y.sum() == 0 || y.sum() == n) continue;
    ++sets;
    double wins = 0.0;
    double pairs = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (!y(i)) continue;
      for (Index j = 0; j < n; ++j) {
        if (y(j)) continue;
        pairs += 1.0;
        wins += s(i) > s(j) ? 1.0 : (s(i) == s(j) ? 0.5 : 0.0);
      }
    }
    worst = std::max(worst, std::abs(auc(roc_curve(y, s)) - wins / pairs));
  }
  out.require(worst <= 1e-12, "max deviation " + std::to_string(worst));
  out.detail = "500 score sets, max |diff| " + fmt(worst, 3);
  return out;
}

// --- 3. GA operators --------------------------------------------------------

Chromosome bits_of(unsigned value, std::size_t length) {
  Chromosome c;
  for (std::size_t i = 0; i < length; ++i) c.bits.push_back((value >> i) & 1u);
  return c;
}

Outcome ga_operators() {
  Outcome out;
  // crossover: every parent pair and every cut pair at length 6
  long checked = 0;
  bool locus_ok = true;
  for (unsigned a = 0; a < 64; ++a) {
    for (unsigned b = 0; b < 64; ++b) {
      const Chromosome pa = bits_of(a, 6), pb = bits_of(b, 6);
      for (std::size_t p = 0; p < 6; ++p) {
        for (std::size_t q = p + 1; q <= 6; ++q) {
          const auto [c1, c2] = crossover_double_point(pa, pb, p, q);
          for (std::size_t i = 0; i < 6; ++i) {
            const bool inside = i >= p && i < q;
            locus_ok = locus_ok && c1.bits[i] == (inside ? pb.bits[i] : pa.bits[i]) &&
                       c2.bits[i] == (inside ? pa.bits[i] : pb.bits[i]);
          }
          ++checked;
        }
      }
    }
  }
  out.require(locus_ok, "double-point crossover swaps exactly [p, q)");

  // mutation: total flips ~ Binomial(L * T, r)
  Rng rng(31);
  Chromosome ones;
  ones.bits.assign(500, true);
  const double rate = 0.05;
  const int trials = 2000;
  double flips = 0.0;
  for (int t = 0; t < trials; ++t) flips += 500.0 - static_cast<double>(mutate_bit_inversion(ones, rate, rng).count());
  const double n = 500.0 * trials;
  const double z = (flips - n * rate) / std::sqrt(n * rate * (1.0 - rate));
  out.require(std::abs(z) <= 5.0, "mutation flips z = " + fmt(z, 2));

  // roulette: selection frequency tracks weight share
  const std::vector<double> weights{1.0, 2.0, 3.0, 4.0, 0.5};
  const double total = 10.5;
  std::vector<double> counts(weights.size(), 0.0);
  for (std::size_t i : roulette_select(weights, 100000, rng)) counts[i] += 1.0;
  double roulette_worst = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    roulette_worst = std::max(roulette_worst, std::abs(counts[i] / 1e5 - weights[i] / total));
  }
  out.require(roulette_worst <= 0.01, "roulette deviation " + fmt(roulette_worst));

  // linear ranking: worst gets 2 - sp, best gets sp, evenly spaced between
  double rank_worst = 0.0;
  for (std::size_t size : {2u, 3u, 10u}) {
    for (double sp : {1.0, 1.25, 1.7, 2.0}) {
      std::vector<double> fitness(size);
      for (std::size_t i = 0; i < size; ++i) fitness[i] = std::cos(1.7 * static_cast<double>(i));
      const auto w = rank_scale(fitness, sp);
      for (std::size_t i = 0; i < size; ++i) {
        double pos = 0.0;  // number of strictly worse individuals
        for (double f : fitness) pos += f < fitness[i];
        const double want = 2.0 - sp + 2.0 * (sp - 1.0) * pos / static_cast<double>(size - 1);
        rank_worst = std::max(rank_worst, std::abs(w[i] - want));
      }
    }
  }
  out.require(rank_worst < 1e-12, "rank_scale deviation " + std::to_string(rank_worst));
  out.detail = std::to_string(checked) + " crossovers, mutation z " + fmt(z, 2) + ", roulette max dev " +
               fmt(roulette_worst) + ", ranking max dev " + fmt(rank_worst, 3);
  return out;
}

// --- 4. OneMax --------------------------------------------------------------

Outcome onemax() {
  Outcome out;
  int solved = 0;
  bool monotone = true;
  const auto fitness = [](const Chromosome& c) { return static_cast<double>(c.count()) / static_cast<double>(c.size()); };
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    GaConfig c;  // NIND 20, SUBPOP 5, MAXGEN 100, MIGR 0.2, INSR 0.95, MIGGEN 20
    c.seed = seed;
    c.stall_generations = 0;
    const GaRun run = run_ga(c, 30, fitness);
    solved += run.best_chromosome.count() == 30;
    for (std::size_t g = 1; g < run.best_so_far.size(); ++g) monotone = monotone && run.best_so_far[g] >= run.best_so_far[g - 1];
  }
  out.require(solved >= 95, "optimum reached in " + std::to_string(solved) + "/100 runs");
  out.require(monotone, "best-so-far history monotone");
  out.detail = std::to_string(solved) + "/100 runs reach 30/30, history monotone: " + (monotone ? "yes" : "no");
  return out;
}

// --- 5. learners on separable clouds ----------------------------------------

Outcome learner_sanity() {
  Outcome out;
  const Dataset ds = testing::gaussian_clouds(1000, 3.0, 0.5, 5);
  const SplitIndices split = split_indices(ds.rows(), 0.7, 9);
  const Dataset train_set = select_rows(ds, split.train);
  const Dataset test = select_rows(ds, split.test);
  std::vector<LearnerSpec> specs = ExperimentConfig::default_learners();
  specs.push_back(make_spec(Algorithm::logistic_regression));
  double lowest = 1.0;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].seed = 1000 + i;
    const TrainedModel m = train(specs[i], train_set);
    const double acc = *accuracy(confusion(test.labels, m.predict(test.features)));
    out.require(acc >= 0.95, specs[i].display_name() + " accuracy " + fmt(acc));
    lowest = std::min(lowest, acc);
  }
  out.detail = std::to_string(specs.size()) + " learners, lowest test accuracy " + fmt(lowest);
  return out;
}

// --- 6. MLP gradient --------------------------------------------------------

Outcome mlp_gradient() {
  Outcome out;
  Rng rng(8);
  Matrix X(5, 3);
  for (Index i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
  Labels y(5);
  y << 1, 0, 1, 1, 0;
  MlpParameters params = MlpParameters::random(3, 4, rng);
  for (Index i = 0; i < params.b1.size(); ++i) params.b1(i) = 0.1 * rng.normal();
  const double alpha = 1e-2;
  MlpParameters grad = MlpParameters::zeros_like(params);
  mlp_loss_gradient(params, X, y, alpha, &grad);
  const Vector analytic = grad.flatten();

  const Vector theta = params.flatten();
  Vector numeric(theta.size());
  const double h = 1e-6;
  for (Index k = 0; k < theta.size(); ++k) {
    MlpParameters plus = params, minus = params;
    Vector tp = theta, tm = theta;
    tp(k) += h;
    tm(k) -= h;
    plus.unflatten(tp);
    minus.unflatten(tm);
    numeric(k) = (mlp_loss_gradient(plus, X, y, alpha, nullptr) - mlp_loss_gradient(minus, X, y, alpha, nullptr)) /
                 (2.0 * h);
  }
  const double rel = (analytic - numeric).norm() / std::max(1e-300, analytic.norm() + numeric.norm());
  out.require(rel < 1e-4, "relative error " + std::to_string(rel));
  out.detail = std::to_string(theta.size()) + " parameters, relative error " + fmt(rel, 10);
  return out;
}

// --- 7. level-1 data --------------------------------------------------------

Outcome stacking_properties() {
  Outcome out;
  const ExperimentConfig config = load_experiment_config_file(kConfig, {});
  const Dataset raw = load_dataset(config);
  const Dataset pima = Preprocessor::fit(config.preprocessing, raw).apply(raw);

  StackSpec spec;
  spec.base_specs = config.learners;
  for (std::size_t i = 0; i < spec.base_specs.size(); ++i) spec.base_specs[i].seed = 500 + i;
  spec.meta_spec = config.stack.meta;
  spec.mode = Level1Mode::out_of_fold;
  spec.folds = config.stack.folds;
  spec.seed = 3;
  Level1Trace trace;
  const Dataset d1 = build_level1_dataset(spec, pima, &trace);
  const auto T = static_cast<Index>(spec.base_specs.size());
  out.require(d1.rows() == pima.rows() && d1.cols() == T, "D' shape");
  out.require(d1.labels == pima.labels, "labels preserved");

  std::vector<std::vector<int>> filled(static_cast<std::size_t>(pima.rows()),
                                       std::vector<int>(static_cast<std::size_t>(T), 0));
  bool pure = true;
  for (const auto& fit : trace.fits) {
    const std::set<Index> seen(fit.train_rows.begin(), fit.train_rows.end());
    for (Index r : fit.predicted_rows) {
      pure = pure && !seen.count(r);
      ++filled[static_cast<std::size_t>(r)][fit.learner];
    }
  }
  for (const auto& row : filled) {
    for (int c : row) pure = pure && c == 1;
  }
  out.require(pure, "every D' cell predicted once by a model that never saw the row");
  out.require(trace.fits.size() == static_cast<std::size_t>(T * spec.folds), "one fit per learner and fold");

  StackSpec naive;
  naive.base_specs = {make_spec(Algorithm::knn, {{"n_neighbors", 1}})};
  naive.meta_spec = make_spec(Algorithm::logistic_regression);
  naive.mode = Level1Mode::naive;
  naive.feature_kind = Level1FeatureKind::label;
  const Dataset leaked = build_level1_dataset(naive, pima);
  const bool copy = leaked.features.col(0) == pima.labels.cast<double>();
  out.require(copy, "naive 1-NN column equals y");
  out.detail = "D' " + std::to_string(d1.rows()) + "x" + std::to_string(d1.cols()) + ", " +
               std::to_string(trace.fits.size()) + " out-of-fold fits pure, naive 1-NN column == y: " +
               (copy ? "yes" : "no");
  return out;
}

// --- 8/9. holdout on Pima ---------------------------------------------------

const std::vector<std::string> kReportRows{"RF", "KNN", "MLP", "Ada boost", "D tree Classifier", "NB",
                                        "GBC", "SVM", "Extra Tree", "Suggest Method (ST-GA)"};

struct HoldoutRun {
  Report report;
  double seconds = 0.0;
};

HoldoutRun holdout_run(const std::vector<std::string>& overrides) {
  const auto start = std::chrono::steady_clock::now();
  HoldoutRun r;
  r.report = run_holdout(load_experiment_config_file(kConfig, overrides)).report;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

double stack_accuracy(const Report& r) {
  for (const auto& row : r.holdout) {
    if (row.algorithm == "stack") return row.accuracy.value_or(0.0);
  }
  return 0.0;
}

Outcome pima_holdout(const HoldoutRun& run, const HoldoutRun& faithful) {
  Outcome out;
  const Report& r = run.report;
  std::vector<std::string> names;
  double best_single = 0.0;
  std::string best_name;
  for (const auto& row : r.holdout) {
    names.push_back(row.name);
    if (row.algorithm != "stack" && row.accuracy && *row.accuracy > best_single) {
      best_single = *row.accuracy;
      best_name = row.name;
    }
  }
  const double st = stack_accuracy(r);
  out.require(r.protocol["level1_mode"] == "out_of_fold" && r.protocol["ga_fit"] == "training_split",
              "protocol is out-of-fold with GA inside the training split");
  out.require(run.seconds < 300.0, "(a) runtime " + fmt(run.seconds, 1) + " s");
  out.require(st >= 0.75, "(b) ST-GA accuracy " + fmt(st) + " >= 0.75");
  out.require(st >= best_single - 0.02, "(c) ST-GA " + fmt(st) + " >= best single (" + best_name + " " +
                                            fmt(best_single) + ") - 0.02");
  out.require(names == kReportRows, "(d) report has the ten expected rows in order");
  const double pf = stack_accuracy(faithful.report);
  out.require(pf > 0.90, "(e) paper-faithful naive/global ST-GA accuracy " + fmt(pf) + " > 0.90");
  out.detail = "ST-GA " + fmt(st) + ", best single " + best_name + " " + fmt(best_single) + ", " +
               std::to_string(names.size()) + " rows, " + fmt(run.seconds, 1) + " s; paper-faithful ST-GA " +
               fmt(pf);
  out.notes.push_back("published 98% ST-GA holdout accuracy: not reproduced under a leakage-free protocol "
                      "(see README, 'Headline accuracy')");
  return out;
}

Outcome feature_selection(const HoldoutRun& run) {
  Outcome out;
  const Report& r = run.report;
  if (!r.selection) {
    out.require(false, "report has a feature selection section");
    return out;
  }
  const SelectionSummary& s = *r.selection;
  out.require(s.selected.size() <= 8, std::to_string(s.selected.size()) + " features selected (<= 8)");
  out.require(s.best_fitness >= s.full_mask_fitness - 0.01,
              "wrapper accuracy " + fmt(s.best_fitness) + " >= all-features " + fmt(s.full_mask_fitness) + " - 0.01");
  const std::string md = render_report(r, "markdown");
  const bool cited = md.find("93% accuracy and 5 optimal features") != std::string::npos &&
                     render_report(r, "json").find("93% accuracy and 5 optimal features") != std::string::npos;
  out.require(cited, "report carries the published 93% / 5-feature reference");
  out.require(run.seconds < 180.0, "runtime " + fmt(run.seconds, 1) + " s");
  std::string selected;
  for (const auto& f : s.selected) selected += (selected.empty() ? "" : ", ") + f;
  out.detail = "mask " + s.mask + " (" + selected + "), wrapper CV " + fmt(s.best_fitness) + " vs all features " +
               fmt(s.full_mask_fitness);
  return out;
}

// --- 10. xval determinism ---------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

int xval_once(const fs::path& out_dir) {
  const std::string out = out_dir.string();
  const char* argv[] = {"stga", "xval", "--config", kConfig.c_str(), "--out", out.c_str(), "-q"};
  return run_cli(7, argv);
}

Outcome xval_determinism(Report* kfold) {
  Outcome out;
  const fs::path root = fs::temp_directory_path() / "stga_acceptance_xval";
  fs::remove_all(root);
  const int a = xval_once(root / "a");
  const int b = xval_once(root / "b");
  out.require(a == kExitOk && b == kExitOk, "both xval runs exit 0");
  const std::string ja = slurp(root / "a" / "xval_report.json");
  const std::string jb = slurp(root / "b" / "xval_report.json");
  out.require(!ja.empty() && ja == jb, "xval_report.json byte-identical");
  std::set<int> ks;
  std::size_t rows = 0;
  if (!ja.empty()) {
    *kfold = Report::from_json(json::parse(ja));
    for (const auto& row : kfold->kfold) {
      ks.insert(row.k);
      ++rows;
    }
  }
  out.require(ks == std::set<int>{5, 10, 15}, "k in {5, 10, 15}");
  out.require(rows == 3 * kReportRows.size(), "one row per model and k");
  out.detail = std::to_string(ja.size()) + " bytes, identical: " + (ja == jb ? "yes" : "no") + ", " +
               std::to_string(rows) + " rows";
  fs::remove_all(root);
  return out;
}

void consistency_warning(const Report& holdout, const Report& kfold) {
  for (const auto& h : holdout.holdout) {
    for (const auto& k : kfold.kfold) {
      if (k.name != h.name || k.k != 10 || !h.accuracy || !k.mean_accuracy) continue;
      const double gap = std::abs(*h.accuracy - *k.mean_accuracy);
      if (gap >= 0.15) {
        std::cout << "WARN  holdout/k-fold consistency: " << h.name << " holdout " << fmt(*h.accuracy)
                  << " vs k=10 mean " << fmt(*k.mean_accuracy) << "\n";
      }
    }
  }
}

}  // namespace

int main() {
  using Clock = std::chrono::steady_clock;
  int failures = 0;
  const auto report = [&](int id, const std::string& title, double limit, const std::function<Outcome()>& fn) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - start).count();
    if (limit > 0.0 && secs >= limit) {
      o.pass = false;
      o.notes.push_back("failed: runtime " + fmt(secs, 2) + " s exceeds " + fmt(limit, 0) + " s");
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  [" << std::setw(2) << id << "] " << title << ": " << o.detail
              << " (" << fmt(secs, 2) << " s)\n";
    for (const auto& n : o.notes) std::cout << "        " << n << "\n";
    std::cout.flush();
  };

  report(1, "metric oracle equivalence", 1.0, metric_oracle);
  report(2, "AUC oracle", 5.0, auc_oracle);
  report(3, "GA operator suite", 10.0, ga_operators);
  report(4, "GA OneMax oracle run", 60.0, onemax);
  report(5, "learner sanity on separable clouds", 120.0, learner_sanity);
  report(6, "MLP gradient check", 1.0, mlp_gradient);
  report(7, "stacking shape and leakage properties", 60.0, stacking_properties);

  HoldoutRun holdout, faithful;
  report(8, "end-to-end Pima holdout", 0.0, [&] {
    holdout = holdout_run({});
    faithful = holdout_run({"paper_faithful=true"});
    return pima_holdout(holdout, faithful);
  });
  report(9, "GA feature selection", 0.0, [&] { return feature_selection(holdout); });

  Report kfold;
  report(10, "xval determinism", 600.0, [&] { return xval_determinism(&kfold); });
  consistency_warning(holdout.report, kfold);

  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : "all criteria passed") << "\n";
  return failures ? 1 : 0;
}
