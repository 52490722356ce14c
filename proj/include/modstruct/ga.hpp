#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <unordered_set>
#include <vector>

#include "modstruct/aim.hpp"
#include "modstruct/canonical.hpp"
#include "modstruct/dynamics.hpp"
#include "modstruct/error.hpp"
#include "modstruct/layout.hpp"
#include "modstruct/parallel.hpp"
#include "modstruct/rng.hpp"
#include "modstruct/tree_ops.hpp"

namespace modstruct {

struct GaParams {
  int pop_size = 1000;
  int g_size = 100;       // generation budget
  int t_size = 100;       // selection rounds per generation
  int c_size = 30;        // children per selected parent
  double cross_p = 0.95;  // crossover probability, else copy
  int k_converge = 10;    // stall generations before stopping
  int tournament_k = 2;   // individuals per tournament
  int crossover_budget = 1000;
  bool dedup = false;  // collapse canonical duplicates in PopSelect
  std::uint64_t seed = 1;
  int threads = 1;  // fitness evaluation workers; never changes results

  void validate() const {
    MODSTRUCT_REQUIRE(pop_size >= 1, ErrorCode::InvalidParams, "pop_size must be >= 1");
    MODSTRUCT_REQUIRE(g_size >= 0, ErrorCode::InvalidParams, "g_size must be >= 0");
    MODSTRUCT_REQUIRE(t_size >= 1, ErrorCode::InvalidParams, "t_size must be >= 1");
    MODSTRUCT_REQUIRE(c_size >= 1, ErrorCode::InvalidParams, "c_size must be >= 1");
    MODSTRUCT_REQUIRE(cross_p >= 0.0 && cross_p <= 1.0, ErrorCode::InvalidParams, "cross_p must lie in [0, 1]");
    MODSTRUCT_REQUIRE(k_converge >= 1, ErrorCode::InvalidParams, "k_converge must be >= 1");
    MODSTRUCT_REQUIRE(tournament_k >= 1, ErrorCode::InvalidParams, "tournament_k must be >= 1");
    MODSTRUCT_REQUIRE(crossover_budget >= 1, ErrorCode::InvalidParams, "crossover_budget must be >= 1");
    MODSTRUCT_REQUIRE(threads >= 1, ErrorCode::InvalidParams, "threads must be >= 1");
  }
};

// What fitness evaluation needs besides the chromosome.
struct EvalContext {
  Roster roster;
  double edge_length = 1.0;
  FitnessParams fitness;
};

struct Individual {
  Aim aim;
  FitnessValue fitness;
  CanonicalKey key;
};

inline Individual evaluate_individual(Aim aim, const EvalContext& ctx) {
  Individual ind;
  const auto cells = place_on_grid(aim);
  ind.fitness = fitness_from_sigma(d_bar_sigma_from_cells(cells, ctx.roster, ctx.edge_length), ctx.fitness);
  ind.key = canonical_key(cells, ctx.roster);
  ind.aim = std::move(aim);
  return ind;
}

/// Fitness-descending order; -inf ties and exact ties keep input order.
inline bool fitter(const FitnessValue& a, const FitnessValue& b) { return a.value > b.value; }

struct GenerationRecord {
  int gen = 0;
  double best_fitness = -std::numeric_limits<double>::infinity();
  double mean_fitness = std::numeric_limits<double>::quiet_NaN();  // over finite individuals
  long long retries = 0;                                         // rejected crossover attempts
  double millis = 0.0;
  Individual best;
};

struct GaTrace {
  std::vector<GenerationRecord> generations;  // index 0 is the initial population
  bool converged = false;
};

struct GaResult {
  Individual best;
  GaTrace trace;
};

using Population = std::vector<Individual>;

inline Population evaluate_all(std::vector<Aim> aims, const EvalContext& ctx, int threads) {
  Population out(aims.size());
  parallel_for(aims.size(), threads, [&](std::size_t i) { out[i] = evaluate_individual(std::move(aims[i]), ctx); });
  return out;
}

/// pop_size random serial chains, evaluated.
inline Population initialize(const EvalContext& ctx, int pop_size, Rng& rng, int threads = 1) {
  const int n = static_cast<int>(ctx.roster.size());
  MODSTRUCT_REQUIRE(n >= 1, ErrorCode::InvalidInput, "roster is empty");
  std::vector<Aim> aims;
  aims.reserve(static_cast<std::size_t>(pop_size));
  for (int i = 0; i < pop_size; ++i) aims.push_back(random_chain(n, rng));
  return evaluate_all(std::move(aims), ctx, threads);
}

/// Samples min(k, size) distinct individuals uniformly and returns the index
/// of the fittest; ties go to the lowest index.
inline std::size_t tournament_select(const std::vector<FitnessValue>& fitness, int k, Rng& rng) {
  MODSTRUCT_REQUIRE(!fitness.empty(), ErrorCode::InvalidInput, "tournament over an empty population");
  const std::size_t size = fitness.size();
  std::size_t best = size;
  auto consider = [&](std::size_t i) {
    if (best == size || fitter(fitness[i], fitness[best]) || (!fitter(fitness[best], fitness[i]) && i < best)) best = i;
  };
  if (static_cast<std::size_t>(k) >= size) {
    for (std::size_t i = 0; i < size; ++i) consider(i);
    return best;
  }
  std::vector<std::size_t> drawn;
  drawn.reserve(static_cast<std::size_t>(k));
  while (drawn.size() < static_cast<std::size_t>(k)) {
    const std::size_t i = rng.index(size);
    if (std::find(drawn.begin(), drawn.end(), i) == drawn.end()) {
      drawn.push_back(i);
      consider(i);
    }
  }
  return best;
}

/// Split at a random non-root module, re-dock at random free faces, repeat
/// until the child has no overlapping modules. `attempts` receives the number
/// of tries used.
inline Aim crossover(const Aim& parent, Rng& rng, int budget = 1000, int* attempts = nullptr) {
  const int n = parent.size();
  if (attempts) *attempts = 0;
  if (n < 2) return parent;
  for (int attempt = 1; attempt <= budget; ++attempt) {
    if (attempts) *attempts = attempt;
    const int r = static_cast<int>(rng.uniform_int(2, n));
    const SplitResult s = dfs_tree_split(parent, r);
    const FaceRef l = s.split.left_faces[rng.index(s.split.left_faces.size())];
    const FaceRef rf = s.split.right_faces[rng.index(s.split.right_faces.size())];
    Aim child = reconnect(s, l, rf);
    if (check_feasible(child)) return child;
  }
  throw Error(ErrorCode::Stalled, "no feasible crossover child after " + std::to_string(budget) + " attempts");
}

/// Keeps the pop_size fittest candidates (stable on ties). With `dedup`, a
/// canonical class is kept once before any duplicate is admitted.
inline Population pop_select(Population candidates, int pop_size, bool dedup = false) {
  MODSTRUCT_REQUIRE(!candidates.empty(), ErrorCode::InvalidInput, "no candidates to select from");
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return fitter(candidates[a].fitness, candidates[b].fitness); });
  const auto target = std::min<std::size_t>(static_cast<std::size_t>(pop_size), candidates.size());
  std::vector<std::size_t> chosen;
  chosen.reserve(target);
  if (dedup) {
    std::unordered_set<CanonicalKey, CanonicalKeyHash> seen;
    std::vector<std::size_t> duplicates;
    for (std::size_t i : order) {
      if (chosen.size() == target) break;
      if (seen.insert(candidates[i].key).second) {
        chosen.push_back(i);
      } else {
        duplicates.push_back(i);
      }
    }
    for (std::size_t i : duplicates) {
      if (chosen.size() == target) break;
      chosen.push_back(i);
    }
    std::stable_sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
      return fitter(candidates[a].fitness, candidates[b].fitness);
    });
  } else {
    chosen.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(target));
  }
  Population out;
  out.reserve(target);
  for (std::size_t i : chosen) out.push_back(std::move(candidates[i]));
  return out;
}

namespace detail {

inline GenerationRecord summarize(int gen, const Population& pop, long long retries, double millis) {
  GenerationRecord rec;
  rec.gen = gen;
  rec.retries = retries;
  rec.millis = millis;
  rec.best = pop.front();
  rec.best_fitness = pop.front().fitness.value;
  double sum = 0.0;
  int finite = 0;
  for (const auto& ind : pop) {
    if (ind.fitness.finite()) {
      sum += ind.fitness.value;
      ++finite;
    }
  }
  if (finite > 0) rec.mean_fitness = sum / finite;
  return rec;
}

}  // namespace detail

/// Generation loop: tournament selection, crossover-or-copy children, elitist
/// selection over parents and children, early stop once the best fitness has
/// been finite and unchanged for k_converge generations.
inline GaResult evolve(const EvalContext& ctx, const GaParams& ga) {
  ga.validate();
  ctx.fitness.validate();
  validate_roster(ctx.roster);
  using clock = std::chrono::steady_clock;

  const Rng root(ga.seed);
  GaResult result;
  auto started = clock::now();
  Rng init_rng = root.split(0);
  Population pop = pop_select(initialize(ctx, ga.pop_size, init_rng, ga.threads), ga.pop_size, ga.dedup);
  result.trace.generations.push_back(detail::summarize(
      0, pop, 0, std::chrono::duration<double, std::milli>(clock::now() - started).count()));

  int stall = 0;
  for (int g = 1; g <= ga.g_size; ++g) {
    started = clock::now();
    Rng rng = root.split(static_cast<std::uint64_t>(g));
    std::vector<FitnessValue> fit;
    fit.reserve(pop.size());
    for (const auto& ind : pop) fit.push_back(ind.fitness);

    // Children are scheduled serially so the stream is thread-count independent.
    std::vector<Aim> fresh;
    std::vector<std::size_t> copies;  // parent index per copied child
    std::vector<bool> is_copy;
    long long retries = 0;
    for (int t = 0; t < ga.t_size; ++t) {
      const std::size_t idx = tournament_select(fit, ga.tournament_k, rng);
      for (int c = 0; c < ga.c_size; ++c) {
        if (rng.uniform01() < ga.cross_p) {
          int attempts = 0;
          fresh.push_back(crossover(pop[idx].aim, rng, ga.crossover_budget, &attempts));
          retries += std::max(attempts - 1, 0);
          is_copy.push_back(false);
        } else {
          copies.push_back(idx);
          is_copy.push_back(true);
        }
      }
    }
    Population evaluated = evaluate_all(std::move(fresh), ctx, ga.threads);

    Population candidates = pop;
    candidates.reserve(pop.size() + is_copy.size());
    std::size_t next_fresh = 0;
    std::size_t next_copy = 0;
    for (bool copy : is_copy) {
      if (copy) {
        candidates.push_back(pop[copies[next_copy++]]);
      } else {
        candidates.push_back(std::move(evaluated[next_fresh++]));
      }
    }

    const double previous_best = pop.front().fitness.value;
    pop = pop_select(std::move(candidates), ga.pop_size, ga.dedup);
    result.trace.generations.push_back(detail::summarize(
        g, pop, retries, std::chrono::duration<double, std::milli>(clock::now() - started).count()));

    const double best = pop.front().fitness.value;
    stall = (std::isfinite(best) && best == previous_best) ? stall + 1 : 0;
    if (stall >= ga.k_converge) {
      result.trace.converged = true;
      break;
    }
  }
  result.best = pop.front();
  return result;
}

}  // namespace modstruct
