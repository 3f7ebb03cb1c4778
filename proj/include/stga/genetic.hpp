#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stga/dataset.hpp"
#include "stga/learners.hpp"
#include "stga/random.hpp"

namespace stga {

/// Binary feature mask: bit f selects predictor f.
struct Chromosome {
  std::vector<bool> bits;

  std::size_t size() const { return bits.size(); }
  std::size_t count() const;
  bool none() const { return count() == 0; }
  std::string to_string() const;  // e.g. "10110"
  static Chromosome from_string(const std::string& s);

  bool operator==(const Chromosome&) const = default;
};

using Population = std::vector<Chromosome>;

/// Island-model GA settings. nvar and preci are carried for completeness;
/// a feature mask uses one bit per predictor and no real-valued decoding.
struct GaConfig {
  int nvar = 9;
  int preci = 20;
  int nind = 20;
  int maxgen = 100;
  double migr = 0.2;
  double insr = 0.95;
  int subpop = 5;
  int miggen = 20;
  double mutation_rate = -1.0;  // <= 0: 1 / chromosome length
  double crossover_rate = 0.9;
  double selective_pressure = 2.0;
  int stall_generations = 25;   // early stop; <= 0 disables
  int cv_folds = 5;             // wrapper fitness folds
  bool memoize = true;
  std::uint64_t seed = 0;

  void validate() const;
  json to_json() const;
  static GaConfig from_json(const json& j);
};

/// Sets one uniformly chosen bit if the mask is empty.
void repair(Chromosome& ch, Rng& rng);

std::vector<Population> init_population(const GaConfig& config, std::size_t length, Rng& rng);

/// Linear ranking. Rank 1 is the worst individual; tied fitnesses share the
/// mean of their rank weights. Weights sum to N.
std::vector<double> rank_scale(const std::vector<double>& fitness, double selective_pressure);

/// Fitness-proportional sampling with replacement.
std::vector<std::size_t> roulette_select(const std::vector<double>& weights, std::size_t count,
                                         Rng& rng);

/// Swaps the segment [p, q) between the parents.
std::pair<Chromosome, Chromosome> crossover_double_point(const Chromosome& a, const Chromosome& b,
                                                         std::size_t p, std::size_t q);
/// Draws 0 <= p < q <= length uniformly over all such pairs.
std::pair<Chromosome, Chromosome> crossover_double_point(const Chromosome& a, const Chromosome& b,
                                                         Rng& rng);

Chromosome mutate_bit_inversion(const Chromosome& ch, double rate, Rng& rng);

/// Replaces the floor(insr * N) least-fit parents with the fittest
/// offspring. Fitness vectors are updated alongside.
void reinsert_fitness_based(Population& parents, std::vector<double>& parent_fitness,
                            const Population& offspring,
                            const std::vector<double>& offspring_fitness, double insr);

/// Ring migration: each island sends its top ceil(migr * N) individuals to
/// the next island, replacing that island's worst.
void migrate(std::vector<Population>& islands, std::vector<std::vector<double>>& fitness,
             double migr);

using FitnessFn = std::function<double(const Chromosome&)>;

struct GaGeneration {
  int generation = 0;
  int subpop = 0;
  double best = 0.0;
  double mean = 0.0;
};

struct GaRun {
  Chromosome best_chromosome;
  double best_fitness = 0.0;
  std::vector<GaGeneration> history;
  std::vector<double> best_so_far;  // per generation, over all islands
  int generations = 0;
  long evaluations = 0;             // fitness function calls (after memoization)
  std::vector<Population> final_population;

  void write_history_csv(std::ostream& out) const;
};

GaRun run_ga(const GaConfig& config, std::size_t length, const FitnessFn& fitness);

/// Mean k-fold accuracy of `wrapper` trained on the masked columns.
/// Folds are stratified and seeded by `fold_seed`.
double wrapper_fitness(const Chromosome& ch, const Dataset& ds, const LearnerSpec& wrapper,
                       int cv_k, std::uint64_t fold_seed);

/// Fold seed used by the dataset overload of run_ga.
std::uint64_t wrapper_fold_seed(const GaConfig& config);

GaRun run_ga(const GaConfig& config, const Dataset& ds, const LearnerSpec& wrapper);

/// Best-mask selection order: higher fitness, then fewer set bits, then
/// lexicographically smaller bit string.
bool better_candidate(double fa, const Chromosome& a, double fb, const Chromosome& b);

}  // namespace stga
