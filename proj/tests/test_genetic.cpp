#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <sstream>

#include "stga/genetic.hpp"
#include "test_support.hpp"

namespace stga {
namespace {

Chromosome bits(const std::string& s) { return Chromosome::from_string(s); }

double one_max(const Chromosome& ch) {
  return static_cast<double>(ch.count()) / static_cast<double>(ch.size());
}

// Closed-form linear ranking weight; rank 1 is the worst.
double ranking_weight(std::size_t rank, std::size_t n, double sp) {
  return 2.0 - sp + 2.0 * (sp - 1.0) * static_cast<double>(rank - 1) / static_cast<double>(n - 1);
}

TEST(ChromosomeTest, StringRoundTrip) {
  EXPECT_EQ(bits("10110").to_string(), "10110");
  EXPECT_EQ(bits("10110").count(), 3u);
  EXPECT_TRUE(bits("000").none());
  EXPECT_THROW(bits("10x"), ConfigError);
}

TEST(GaConfigTest, DefaultsAndValidation) {
  const GaConfig c;
  EXPECT_EQ(c.nind, 20);
  EXPECT_EQ(c.subpop, 5);
  EXPECT_EQ(c.maxgen, 100);
  EXPECT_EQ(c.miggen, 20);
  EXPECT_DOUBLE_EQ(c.migr, 0.2);
  EXPECT_DOUBLE_EQ(c.insr, 0.95);
  EXPECT_EQ(GaConfig::from_json(c.to_json()).to_json(), c.to_json());
  EXPECT_THROW(GaConfig::from_json({{"migr", 0.0}}), ConfigError);
  EXPECT_THROW(GaConfig::from_json({{"insr", 1.5}}), ConfigError);
  EXPECT_THROW(GaConfig::from_json({{"nind", 1}}), ConfigError);
  EXPECT_THROW(GaConfig::from_json({{"selective_pressure", 2.5}}), ConfigError);
  EXPECT_THROW(GaConfig::from_json({{"popsize", 10}}), ConfigError);
}

TEST(InitPopulation, ShapeDeterminismAndRepair) {
  GaConfig c;
  Rng a(4), b(4);
  const auto pop = init_population(c, 8, a);
  ASSERT_EQ(pop.size(), 5u);
  for (const auto& island : pop) {
    ASSERT_EQ(island.size(), 20u);
    for (const auto& ch : island) EXPECT_FALSE(ch.none());
  }
  EXPECT_EQ(init_population(c, 8, b), pop);

  Rng r(1);
  for (const auto& island : init_population(c, 1, r)) {
    for (const auto& ch : island) EXPECT_EQ(ch.to_string(), "1");
  }
}

TEST(RankScale, ClosedFormForSeveralSizes) {
  for (std::size_t n : {2u, 3u, 10u}) {
    for (double sp : {1.0, 1.5, 2.0}) {
      std::vector<double> fitness(n);
      for (std::size_t i = 0; i < n; ++i) fitness[i] = std::sin(static_cast<double>(i) + 0.3);
      const auto w = rank_scale(fitness, sp);
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t rank = 1;
        for (std::size_t j = 0; j < n; ++j) rank += fitness[j] < fitness[i];
        EXPECT_NEAR(w[i], ranking_weight(rank, n, sp), 1e-12);
        sum += w[i];
      }
      EXPECT_NEAR(sum, static_cast<double>(n), 1e-12);
    }
  }
}

TEST(RankScale, WorkedExamplesAndTies) {
  EXPECT_EQ(rank_scale({0.3, 0.7}, 2.0), (std::vector<double>{0.0, 2.0}));
  EXPECT_EQ(rank_scale({0.7, 0.3}, 2.0), (std::vector<double>{2.0, 0.0}));
  EXPECT_EQ(rank_scale({5.0, 1.0, 3.0}, 1.0), (std::vector<double>{1.0, 1.0, 1.0}));
  EXPECT_EQ(rank_scale({0.4}, 2.0), (std::vector<double>{1.0}));
  // tied pair occupies ranks 1 and 2 with weights 0 and 1
  const auto w = rank_scale({0.1, 0.1, 0.9}, 2.0);
  EXPECT_DOUBLE_EQ(w[0], 0.5);
  EXPECT_DOUBLE_EQ(w[1], 0.5);
  EXPECT_DOUBLE_EQ(w[2], 2.0);
  EXPECT_THROW(rank_scale({}, 2.0), ConfigError);
  EXPECT_THROW(rank_scale({1.0, 2.0}, 0.5), ConfigError);
}

TEST(RouletteSelect, ExamplesAndFrequencies) {
  Rng rng(8);
  for (auto i : roulette_select({0.0, 2.0}, 50, rng)) EXPECT_EQ(i, 1u);
  EXPECT_TRUE(roulette_select({1.0, 1.0}, 0, rng).empty());
  EXPECT_THROW(roulette_select({0.0, 0.0}, 3, rng), ConfigError);
  const auto picks = roulette_select({1.0, 1.0}, 100000, rng);
  const double ones = static_cast<double>(std::count(picks.begin(), picks.end(), 1u));
  EXPECT_NEAR(ones / 100000.0, 0.5, 0.01);
}

TEST(Crossover, WorkedExampleAndBoundaries) {
  const auto [c1, c2] = crossover_double_point(bits("111111"), bits("000000"), 2, 4);
  EXPECT_EQ(c1.to_string(), "110011");
  EXPECT_EQ(c2.to_string(), "001100");
  const auto [s1, s2] = crossover_double_point(bits("110100"), bits("001011"), 0, 6);
  EXPECT_EQ(s1.to_string(), "001011");
  EXPECT_EQ(s2.to_string(), "110100");
  Rng rng(3);
  const auto same = crossover_double_point(bits("1011"), bits("1011"), rng);
  EXPECT_EQ(same.first, bits("1011"));
  EXPECT_EQ(same.second, bits("1011"));
  const auto tiny = crossover_double_point(bits("1"), bits("0"), rng);
  EXPECT_EQ(tiny.first, bits("1"));
  EXPECT_EQ(tiny.second, bits("0"));
}

TEST(Crossover, LocusPropertyExhaustiveAtLengthSix) {
  const Chromosome a = bits("101100"), b = bits("011010");
  for (std::size_t p = 0; p < 6; ++p) {
    for (std::size_t q = p + 1; q <= 6; ++q) {
      const auto [c1, c2] = crossover_double_point(a, b, p, q);
      for (std::size_t i = 0; i < 6; ++i) {
        const bool inside = i >= p && i < q;
        EXPECT_EQ(c1.bits[i], inside ? b.bits[i] : a.bits[i]);
        EXPECT_EQ(c2.bits[i], inside ? a.bits[i] : b.bits[i]);
      }
    }
  }
}

TEST(Crossover, RandomCutsAreUniformOverPairs) {
  // length 3 has 6 pairs p < q in [0, 3]; identify each by its offspring
  Rng rng(12);
  std::map<std::string, int> seen;
  for (int t = 0; t < 60000; ++t) ++seen[crossover_double_point(bits("111"), bits("000"), rng).first.to_string()];
  ASSERT_EQ(seen.size(), 6u);
  for (const auto& [child, n] : seen) EXPECT_NEAR(n / 60000.0, 1.0 / 6.0, 0.01) << child;
}

TEST(Mutation, RatesZeroOneAndBinomialMean) {
  Rng rng(6);
  EXPECT_EQ(mutate_bit_inversion(bits("10110"), 0.0, rng), bits("10110"));
  EXPECT_EQ(mutate_bit_inversion(bits("10110"), 1.0, rng), bits("01001"));
  EXPECT_EQ(mutate_bit_inversion(bits("111"), 1.0, rng).count(), 1u);  // complement repaired
  EXPECT_THROW(mutate_bit_inversion(bits("1"), 1.5, rng), ConfigError);

  Chromosome ch;
  ch.bits.assign(1000, true);
  double flips = 0.0;
  for (int t = 0; t < 1000; ++t) flips += 1000.0 - static_cast<double>(mutate_bit_inversion(ch, 0.1, rng).count());
  EXPECT_NEAR(flips / 1000.0, 100.0, 10.0);
}

TEST(Reinsertion, TableThreeRateKeepsBestParent) {
  Population parents, offspring;
  std::vector<double> pf, of;
  for (int i = 0; i < 20; ++i) {
    parents.push_back(bits(i == 7 ? "11" : "10"));
    pf.push_back(i == 7 ? 10.0 : static_cast<double>(i) / 100.0);
    offspring.push_back(bits("01"));
    of.push_back(1.0 + i);
  }
  reinsert_fitness_based(parents, pf, offspring, of, 0.95);
  ASSERT_EQ(parents.size(), 20u);
  EXPECT_EQ(parents[7], bits("11"));
  EXPECT_EQ(std::count(parents.begin(), parents.end(), bits("01")), 19);
  EXPECT_EQ(*std::max_element(pf.begin(), pf.end()), 20.0);
}

TEST(Reinsertion, ZeroAndFullRates) {
  Population parents{bits("10"), bits("01")}, offspring{bits("11"), bits("11")};
  std::vector<double> pf{0.1, 0.2}, of{0.5, 0.6};
  auto p = parents;
  auto f = pf;
  reinsert_fitness_based(p, f, offspring, of, 0.4);  // floor(0.8) = 0
  EXPECT_EQ(p, parents);
  reinsert_fitness_based(p, f, offspring, of, 1.0);
  EXPECT_EQ(p, offspring);
  EXPECT_EQ(f, (std::vector<double>{0.6, 0.5}));
}

TEST(Migration, RingMovesCeilMigrTimesNind) {
  std::vector<Population> islands(5);
  std::vector<std::vector<double>> fitness(5);
  for (int s = 0; s < 5; ++s) {
    for (int i = 0; i < 20; ++i) {
      islands[static_cast<std::size_t>(s)].push_back(Chromosome{{s == 0, s == 1, s == 2, s == 3, s == 4}});
      fitness[static_cast<std::size_t>(s)].push_back(s * 100.0 + i);
    }
  }
  migrate(islands, fitness, 0.2);
  for (int s = 0; s < 5; ++s) {
    const auto& island = islands[static_cast<std::size_t>(s)];
    ASSERT_EQ(island.size(), 20u);
    const int from = (s + 4) % 5;
    int foreign = 0;
    for (const auto& ch : island) foreign += ch.bits[static_cast<std::size_t>(from)];
    EXPECT_EQ(foreign, 4) << "island " << s;
  }
  // island 1 received island 0's four best (fitness 16..19) into its four worst slots
  EXPECT_EQ(fitness[1][0], 19.0);
  EXPECT_EQ(fitness[1][3], 16.0);
}

TEST(Migration, MinimumOneMigrantAndNoOps) {
  std::vector<Population> islands{{bits("10"), bits("10")}, {bits("01"), bits("01")}};
  std::vector<std::vector<double>> fitness{{1.0, 2.0}, {3.0, 4.0}};
  migrate(islands, fitness, 0.01);
  EXPECT_EQ(std::count(islands[1].begin(), islands[1].end(), bits("10")), 1);
  EXPECT_EQ(std::count(islands[0].begin(), islands[0].end(), bits("01")), 1);

  std::vector<Population> same{{bits("11"), bits("11")}, {bits("11"), bits("11")}};
  std::vector<std::vector<double>> sf{{1.0, 1.0}, {1.0, 1.0}};
  const auto before = same;
  migrate(same, sf, 0.5);
  EXPECT_EQ(same, before);

  std::vector<Population> lone{{bits("10")}};
  std::vector<std::vector<double>> lf{{1.0}};
  migrate(lone, lf, 0.5);
  EXPECT_EQ(lone[0][0], bits("10"));
}

TEST(RunGa, OneMaxFindsOptimumAndKeepsElitism) {
  int solved = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GaConfig c;
    c.seed = seed;
    c.stall_generations = 0;
    const GaRun run = run_ga(c, 30, one_max);
    solved += run.best_fitness == 1.0;
    EXPECT_LE(run.generations, c.maxgen);
    for (std::size_t g = 1; g < run.best_so_far.size(); ++g) {
      EXPECT_GE(run.best_so_far[g], run.best_so_far[g - 1]);
    }
    // per-island best also never drops: the best parent always survives reinsertion
    std::map<int, double> last;
    for (const auto& h : run.history) {
      if (last.count(h.subpop)) EXPECT_GE(h.best, last[h.subpop]);
      last[h.subpop] = h.best;
    }
    for (const auto& island : run.final_population) EXPECT_EQ(island.size(), 20u);
  }
  EXPECT_GE(solved, 19);
}

TEST(RunGa, ConstantFitnessAndTieBreak) {
  GaConfig c;
  c.maxgen = 10;
  c.stall_generations = 0;
  const GaRun run = run_ga(c, 6, [](const Chromosome&) { return 0.5; });
  for (double b : run.best_so_far) EXPECT_EQ(b, 0.5);
  for (const auto& h : run.history) EXPECT_EQ(h.best, 0.5);
  EXPECT_EQ(run.best_chromosome.count(), 1u);  // fewest bits wins ties
  EXPECT_EQ(run.history.size(), 50u);
}

TEST(RunGa, StallStopsEarly) {
  GaConfig c;
  c.stall_generations = 5;
  const GaRun run = run_ga(c, 4, [](const Chromosome&) { return 1.0; });
  EXPECT_EQ(run.generations, 5);
}

TEST(RunGa, MemoizationIsTransparent) {
  GaConfig c;
  c.seed = 31;
  c.maxgen = 30;
  auto fitness = [](const Chromosome& ch) {
    double f = 0.0;
    for (std::size_t i = 0; i < ch.size(); ++i) f += ch.bits[i] ? std::cos(1.7 * static_cast<double>(i)) : 0.0;
    return f;
  };
  const GaRun cached = run_ga(c, 10, fitness);
  c.memoize = false;
  const GaRun fresh = run_ga(c, 10, fitness);
  EXPECT_EQ(cached.best_chromosome, fresh.best_chromosome);
  EXPECT_EQ(cached.best_so_far, fresh.best_so_far);
  EXPECT_LT(cached.evaluations, fresh.evaluations);
  EXPECT_LE(cached.evaluations, 1023);
}

TEST(RunGa, HistoryCsvHeader) {
  GaConfig c;
  c.maxgen = 1;
  c.subpop = 2;
  std::ostringstream out;
  run_ga(c, 3, one_max).write_history_csv(out);
  std::istringstream lines(out.str());
  std::string header;
  std::getline(lines, header);
  EXPECT_EQ(header, "generation,subpop,best,mean");
  int rows = 0;
  for (std::string line; std::getline(lines, line);) ++rows;
  EXPECT_EQ(rows, 2);
}

TEST(WrapperFitness, InformativeFeatureWinsAndIsDeterministic) {
  const Dataset ds = testing::informative_first_feature(300, 3, 0.3, 5);
  const auto lr = make_spec(Algorithm::logistic_regression);
  const double f0 = wrapper_fitness(bits("100"), ds, lr, 5, 9);
  const double f1 = wrapper_fitness(bits("010"), ds, lr, 5, 9);
  EXPECT_GT(f0, f1);
  EXPECT_GT(f0, 0.85);
  EXPECT_EQ(wrapper_fitness(bits("100"), ds, lr, 5, 9), f0);
  EXPECT_THROW(wrapper_fitness(bits("000"), ds, lr, 5, 9), ConfigError);
}

TEST(WrapperFitness, FullMaskEqualsPlainCrossValidation) {
  const Dataset ds = testing::informative_first_feature(120, 3, 0.5, 6);
  const auto lr = make_spec(Algorithm::logistic_regression);
  const FoldPlan plan = make_folds(ds.labels, 4, true, 2);
  double total = 0.0;
  for (int f = 0; f < 4; ++f) {
    const Dataset tr = select_rows(ds, plan.train_indices(f));
    const Dataset te = select_rows(ds, plan.test_indices(f));
    const Labels pred = train(lr, tr).predict(te.features);
    total += static_cast<double>((pred.array() == te.labels.array()).count()) /
             static_cast<double>(te.rows());
  }
  EXPECT_DOUBLE_EQ(wrapper_fitness(bits("111"), ds, lr, 4, 2), total / 4.0);
}

TEST(WrapperFitness, GaOnDatasetPrefersTheInformativeFeature) {
  const Dataset ds = testing::informative_first_feature(200, 4, 0.2, 7);
  GaConfig c;
  c.maxgen = 10;
  c.seed = 3;
  const GaRun run = run_ga(c, ds, make_spec(Algorithm::logistic_regression));
  EXPECT_TRUE(run.best_chromosome.bits[0]);
  EXPECT_LE(run.evaluations, 15);
}

}  // namespace
}  // namespace stga
