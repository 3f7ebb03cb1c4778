#include "stga/genetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <unordered_map>

#include "stga/metrics.hpp"

namespace stga {

std::size_t Chromosome::count() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), true));
}

std::string Chromosome::to_string() const {
  std::string s;
  s.reserve(bits.size());
  for (bool b : bits) s.push_back(b ? '1' : '0');
  return s;
}

Chromosome Chromosome::from_string(const std::string& s) {
  Chromosome ch;
  for (char c : s) {
    if (c != '0' && c != '1') throw ConfigError("chromosome strings use only 0 and 1");
    ch.bits.push_back(c == '1');
  }
  return ch;
}

void GaConfig::validate() const {
  if (!(migr > 0.0 && migr <= 1.0)) throw ConfigError("ga.migr must lie in (0, 1]");
  if (!(insr > 0.0 && insr <= 1.0)) throw ConfigError("ga.insr must lie in (0, 1]");
  if (subpop < 1) throw ConfigError("ga.subpop must be >= 1");
  if (miggen < 1) throw ConfigError("ga.miggen must be >= 1");
  if (nind < 2) throw ConfigError("ga.nind must be >= 2");
  if (maxgen < 0) throw ConfigError("ga.maxgen must be >= 0");
  if (mutation_rate > 1.0) throw ConfigError("ga.mutation_rate must be <= 1");
  if (!(crossover_rate >= 0.0 && crossover_rate <= 1.0)) {
    throw ConfigError("ga.crossover_rate must lie in [0, 1]");
  }
  if (!(selective_pressure >= 1.0 && selective_pressure <= 2.0)) {
    throw ConfigError("ga.selective_pressure must lie in [1, 2]");
  }
  if (cv_folds < 2) throw ConfigError("ga.cv_folds must be >= 2");
}

json GaConfig::to_json() const {
  return {{"nvar", nvar},
          {"preci", preci},
          {"nind", nind},
          {"maxgen", maxgen},
          {"migr", migr},
          {"insr", insr},
          {"subpop", subpop},
          {"miggen", miggen},
          {"mutation_rate", mutation_rate},
          {"crossover_rate", crossover_rate},
          {"selective_pressure", selective_pressure},
          {"stall_generations", stall_generations},
          {"cv_folds", cv_folds},
          {"memoize", memoize},
          {"seed", seed}};
}

GaConfig GaConfig::from_json(const json& j) {
  GaConfig c;
  const json known = c.to_json();
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("unknown ga setting '" + key + "'");
  }
  try {
    c.nvar = j.value("nvar", c.nvar);
    c.preci = j.value("preci", c.preci);
    c.nind = j.value("nind", c.nind);
    c.maxgen = j.value("maxgen", c.maxgen);
    c.migr = j.value("migr", c.migr);
    c.insr = j.value("insr", c.insr);
    c.subpop = j.value("subpop", c.subpop);
    c.miggen = j.value("miggen", c.miggen);
    c.mutation_rate = j.value("mutation_rate", c.mutation_rate);
    c.crossover_rate = j.value("crossover_rate", c.crossover_rate);
    c.selective_pressure = j.value("selective_pressure", c.selective_pressure);
    c.stall_generations = j.value("stall_generations", c.stall_generations);
    c.cv_folds = j.value("cv_folds", c.cv_folds);
    c.memoize = j.value("memoize", c.memoize);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("ga settings: ") + e.what());
  }
  c.validate();
  return c;
}

void repair(Chromosome& ch, Rng& rng) {
  if (ch.size() == 0 || !ch.none()) return;
  ch.bits[static_cast<std::size_t>(rng.below(ch.size()))] = true;
}

std::vector<Population> init_population(const GaConfig& config, std::size_t length, Rng& rng) {
  config.validate();
  std::vector<Population> islands(static_cast<std::size_t>(config.subpop));
  for (auto& island : islands) {
    island.resize(static_cast<std::size_t>(config.nind));
    for (auto& ch : island) {
      ch.bits.resize(length);
      for (std::size_t b = 0; b < length; ++b) ch.bits[b] = rng.bernoulli(0.5);
      repair(ch, rng);
    }
  }
  return islands;
}

std::vector<double> rank_scale(const std::vector<double>& fitness, double sp) {
  const std::size_t n = fitness.size();
  if (n == 0) throw ConfigError("rank_scale of an empty population");
  if (!(sp >= 1.0 && sp <= 2.0)) throw ConfigError("selective pressure must lie in [1, 2]");
  if (n == 1) return {1.0};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  auto weight_of_rank = [&](std::size_t r) {  // r = 1 is the worst
    return 2.0 - sp +
           2.0 * (sp - 1.0) * static_cast<double>(r - 1) / static_cast<double>(n - 1);
  };
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && fitness[order[j]] == fitness[order[i]]) ++j;
    double sum = 0.0;
    for (std::size_t k = i; k < j; ++k) sum += weight_of_rank(k + 1);
    const double avg = sum / static_cast<double>(j - i);
    for (std::size_t k = i; k < j; ++k) w[order[k]] = avg;
    i = j;
  }
  return w;
}

std::vector<std::size_t> roulette_select(const std::vector<double>& weights, std::size_t count,
                                         Rng& rng) {
  std::vector<double> cumulative(weights.size());
  double total = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] < 0.0) throw ConfigError("roulette weights must be non-negative");
    total += weights[i];
    cumulative[i] = total;
  }
  if (count == 0) return {};
  if (!(total > 0.0)) throw ConfigError("roulette weights are all zero");
  std::vector<std::size_t> picks(count);
  for (auto& p : picks) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    p = std::min(static_cast<std::size_t>(it - cumulative.begin()), weights.size() - 1);
  }
  return picks;
}

std::pair<Chromosome, Chromosome> crossover_double_point(const Chromosome& a, const Chromosome& b,
                                                         std::size_t p, std::size_t q) {
  if (a.size() != b.size()) throw ConfigError("crossover parents differ in length");
  if (!(p < q && q <= a.size())) throw ConfigError("crossover cut points must satisfy p < q <= length");
  Chromosome c1 = a, c2 = b;
  for (std::size_t i = p; i < q; ++i) {
    c1.bits[i] = b.bits[i];
    c2.bits[i] = a.bits[i];
  }
  return {std::move(c1), std::move(c2)};
}

std::pair<Chromosome, Chromosome> crossover_double_point(const Chromosome& a, const Chromosome& b,
                                                         Rng& rng) {
  if (a.size() < 2 || a.size() != b.size()) return {a, b};
  const std::size_t len = a.size();
  std::size_t p, q;
  do {
    p = static_cast<std::size_t>(rng.below(len + 1));
    q = static_cast<std::size_t>(rng.below(len + 1));
  } while (p == q);
  if (p > q) std::swap(p, q);
  return crossover_double_point(a, b, p, q);
}

Chromosome mutate_bit_inversion(const Chromosome& ch, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("mutation rate must lie in [0, 1]");
  Chromosome out = ch;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (rng.uniform() < rate) out.bits[i] = !out.bits[i];
  }
  repair(out, rng);
  return out;
}

namespace {

std::vector<std::size_t> order_by_fitness(const std::vector<double>& fitness, bool descending) {
  std::vector<std::size_t> order(fitness.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? fitness[a] > fitness[b] : fitness[a] < fitness[b];
  });
  return order;
}

}  // namespace

void reinsert_fitness_based(Population& parents, std::vector<double>& parent_fitness,
                            const Population& offspring,
                            const std::vector<double>& offspring_fitness, double insr) {
  if (parents.empty() || offspring.empty()) throw ConfigError("reinsertion needs nonempty populations");
  const std::size_t n = parents.size();
  const auto want = static_cast<std::size_t>(std::floor(insr * static_cast<double>(n) + 1e-9));
  const std::size_t count = std::min({want, n, offspring.size()});
  const auto worst_parents = order_by_fitness(parent_fitness, false);
  const auto best_offspring = order_by_fitness(offspring_fitness, true);
  for (std::size_t k = 0; k < count; ++k) {
    parents[worst_parents[k]] = offspring[best_offspring[k]];
    parent_fitness[worst_parents[k]] = offspring_fitness[best_offspring[k]];
  }
}

void migrate(std::vector<Population>& islands, std::vector<std::vector<double>>& fitness,
             double migr) {
  const std::size_t s = islands.size();
  if (s < 2) return;
  std::vector<Population> migrants(s);
  std::vector<std::vector<double>> migrant_fitness(s);
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t n = islands[i].size();
    const auto k = std::min(
        n, static_cast<std::size_t>(std::ceil(migr * static_cast<double>(n) - 1e-9)));
    const auto best = order_by_fitness(fitness[i], true);
    for (std::size_t j = 0; j < std::max<std::size_t>(k, 1); ++j) {
      migrants[i].push_back(islands[i][best[j]]);
      migrant_fitness[i].push_back(fitness[i][best[j]]);
    }
  }
  for (std::size_t i = 0; i < s; ++i) {
    const std::size_t dest = (i + 1) % s;
    const auto worst = order_by_fitness(fitness[dest], false);
    for (std::size_t j = 0; j < migrants[i].size(); ++j) {
      islands[dest][worst[j]] = migrants[i][j];
      fitness[dest][worst[j]] = migrant_fitness[i][j];
    }
  }
}

bool better_candidate(double fa, const Chromosome& a, double fb, const Chromosome& b) {
  if (fa != fb) return fa > fb;
  if (a.count() != b.count()) return a.count() < b.count();
  return a.to_string() < b.to_string();
}

void GaRun::write_history_csv(std::ostream& out) const {
  out << "generation,subpop,best,mean\n";
  for (const auto& h : history) {
    out << h.generation << ',' << h.subpop << ',' << json(h.best).dump() << ','
        << json(h.mean).dump() << '\n';
  }
}

GaRun run_ga(const GaConfig& config, std::size_t length, const FitnessFn& fitness_fn) {
  config.validate();
  if (length == 0) throw ConfigError("GA needs at least one feature");
  Rng rng(config.seed);
  const double mutation_rate =
      config.mutation_rate > 0.0 ? config.mutation_rate : 1.0 / static_cast<double>(length);

  GaRun run;
  std::unordered_map<std::string, double> cache;
  bool have_best = false;
  auto evaluate = [&](const Chromosome& ch) {
    double f;
    if (config.memoize) {
      const auto key = ch.to_string();
      const auto it = cache.find(key);
      if (it != cache.end()) {
        f = it->second;
      } else {
        f = fitness_fn(ch);
        ++run.evaluations;
        cache.emplace(key, f);
      }
    } else {
      f = fitness_fn(ch);
      ++run.evaluations;
    }
    if (!have_best || better_candidate(f, ch, run.best_fitness, run.best_chromosome)) {
      run.best_fitness = f;
      run.best_chromosome = ch;
      have_best = true;
    }
    return f;
  };

  auto islands = init_population(config, length, rng);
  std::vector<std::vector<double>> fitness(islands.size());
  for (std::size_t s = 0; s < islands.size(); ++s) {
    for (const auto& ch : islands[s]) fitness[s].push_back(evaluate(ch));
  }

  int stall = 0;
  for (int gen = 1; gen <= config.maxgen; ++gen) {
    const double best_before = run.best_fitness;
    for (std::size_t s = 0; s < islands.size(); ++s) {
      const auto weights = rank_scale(fitness[s], config.selective_pressure);
      const auto picks = roulette_select(weights, islands[s].size(), rng);
      Population offspring;
      for (std::size_t k = 0; k < picks.size(); k += 2) {
        const Chromosome& a = islands[s][picks[k]];
        if (k + 1 == picks.size()) {
          offspring.push_back(a);
          break;
        }
        const Chromosome& b = islands[s][picks[k + 1]];
        if (rng.bernoulli(config.crossover_rate)) {
          auto [c1, c2] = crossover_double_point(a, b, rng);
          offspring.push_back(std::move(c1));
          offspring.push_back(std::move(c2));
        } else {
          offspring.push_back(a);
          offspring.push_back(b);
        }
      }
      std::vector<double> offspring_fitness;
      for (auto& ch : offspring) {
        ch = mutate_bit_inversion(ch, mutation_rate, rng);
        offspring_fitness.push_back(evaluate(ch));
      }
      reinsert_fitness_based(islands[s], fitness[s], offspring, offspring_fitness, config.insr);
    }
    if (islands.size() > 1 && gen % config.miggen == 0) migrate(islands, fitness, config.migr);

    for (std::size_t s = 0; s < islands.size(); ++s) {
      const auto& f = fitness[s];
      run.history.push_back({gen, static_cast<int>(s), *std::max_element(f.begin(), f.end()),
                             std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(f.size())});
    }
    run.best_so_far.push_back(run.best_fitness);
    run.generations = gen;

    stall = run.best_fitness > best_before ? 0 : stall + 1;
    if (config.stall_generations > 0 && stall >= config.stall_generations) break;
  }
  run.final_population = std::move(islands);
  return run;
}

double wrapper_fitness(const Chromosome& ch, const Dataset& ds, const LearnerSpec& wrapper,
                       int cv_k, std::uint64_t fold_seed) {
  if (ch.none()) throw ConfigError("fitness of an empty feature mask");
  const Dataset masked = select_features(ds, ch.bits);
  const FoldPlan plan = make_folds(masked.labels, cv_k, true, fold_seed);
  double total = 0.0;
  for (int f = 0; f < plan.k; ++f) {
    const Dataset train_part = select_rows(masked, plan.train_indices(f));
    if (!train_part.has_both_classes()) {
      throw DataError("wrapper fold " + std::to_string(f) + " has a single-class training part");
    }
    const Dataset test_part = select_rows(masked, plan.test_indices(f));
    const auto model = train(wrapper, train_part);
    total += accuracy(confusion(test_part.labels, model.predict(test_part.features))).value_or(0.0);
  }
  return total / static_cast<double>(plan.k);
}

std::uint64_t wrapper_fold_seed(const GaConfig& config) { return derive_seed(config.seed, 0xF01DULL); }

GaRun run_ga(const GaConfig& config, const Dataset& ds, const LearnerSpec& wrapper) {
  const std::uint64_t fold_seed = wrapper_fold_seed(config);
  return run_ga(config, static_cast<std::size_t>(ds.cols()), [&](const Chromosome& ch) {
    return wrapper_fitness(ch, ds, wrapper, config.cv_folds, fold_seed);
  });
}

}  // namespace stga
