#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <optional>
#include <thread>
#include <vector>

#include "synthlab/agents.hpp"
#include "synthlab/core.hpp"
#include "synthlab/envs.hpp"
#include "synthlab/neural.hpp"
#include "synthlab/synthenv.hpp"

namespace synthlab {

/// How inner-agent hyperparameters are drawn per candidate.
struct HpSampling {
  bool fixed = false;
  double lr_min = 1e-4;
  double lr_max = 1e-2;
  // epsilon_decay_steps drawn uniformly as a fraction of the inner budget
  double eps_decay_min_fraction = 0.1;
  double eps_decay_max_fraction = 0.5;

  bool operator==(const HpSampling&) const = default;
};

struct ESConfig {
  int population_size = 16;
  double sigma = 0.1;
  double step_size = 0.05;
  bool mirrored = true;
  int iterations = 30;
  long inner_budget_steps = 5000;
  int eval_episodes = 10;
  HpSampling hp_sampling;
  int early_stop_consecutive = 2;
  std::uint64_t seed = 0;

  void validate() const {
    if (population_size < 1) throw ConfigError("es.population_size", "must be positive");
    if (mirrored && population_size % 2 != 0) throw ConfigError("es.population_size", "must be even when mirrored");
    if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("es.sigma", "must be finite and >= 0");
    if (!(step_size > 0.0) || !std::isfinite(step_size)) throw ConfigError("es.step_size", "must be finite and > 0");
    if (iterations < 0) throw ConfigError("es.iterations", "must be non-negative");
    if (inner_budget_steps < 0) throw ConfigError("es.inner_budget_steps", "must be non-negative");
    if (eval_episodes < 1) throw ConfigError("es.eval_episodes", "must be positive");
    if (early_stop_consecutive < 1) throw ConfigError("es.early_stop_consecutive", "must be positive");
    if (!hp_sampling.fixed && !(hp_sampling.lr_min > 0.0 && hp_sampling.lr_min <= hp_sampling.lr_max))
      throw ConfigError("es.hp_sampling", "need 0 < lr_min <= lr_max");
  }
  bool operator==(const ESConfig&) const = default;
};

enum class ProxyRole { SE, RN };

/// What is being meta-learned and for which target.
struct MetaObjective {
  EnvSpec target = EnvSpec::gridworld(3);
  ProxyRole role = ProxyRole::SE;
  RewardMode rn_mode = RewardMode::Potential;
  std::vector<int> hidden = {32};
  int se_horizon = 50;
  InitMode init_mode = InitMode::RealInit;
  double sigma_init = 1.0;
  double clamp_bound = 10.0;
  double rn_gamma = 0.99;
  // template for inner agents; budget and sampled hyperparameters override it
  AgentConfig agent;

  std::vector<LayerSpec> architecture() const {
    if (role == ProxyRole::SE) return SyntheticEnv::architecture(target.obs_dim, target.action_count, hidden);
    return RewardNet::architecture(rn_mode, target.obs_dim, target.action_count, hidden);
  }

  ParamVector initial_params(std::uint64_t seed) const { return init_params(architecture(), seed); }

  SyntheticEnv make_se(const ParamVector& theta) const {
    SyntheticEnv se{Mlp(architecture(), theta), target.obs_dim, target.action_count, se_horizon,
                    init_mode,                  sigma_init,     clamp_bound};
    se.validate();
    return se;
  }

  RewardNet make_rn(const ParamVector& theta) const { return RewardNet{rn_mode, Mlp(architecture(), theta), rn_gamma}; }
};

struct FitnessRecord {
  int iteration = 0;
  int candidate_index = 0;
  std::uint64_t perturbation_seed = 0;
  AgentConfig agent_hyperparameters;
  double fitness = 0.0;
  long real_steps_consumed = 0;
  long training_steps = 0;
  bool diverged = false;
};

struct Candidate {
  std::vector<double> perturbation;
  ParamVector params;
  std::uint64_t perturbation_seed = 0;
};

/// lambda/2 standard-normal directions and their mirrors (or lambda
/// independent ones), interleaved as [e0, -e0, e1, -e1, ...].
inline std::vector<Candidate> sample_population(const ParamVector& theta, const ESConfig& cfg,
                                                std::uint64_t iteration_seed) {
  const std::size_t n = theta.size();
  const int lambda = cfg.population_size;
  std::vector<Candidate> pop(static_cast<std::size_t>(lambda));
  const int draws = cfg.mirrored ? lambda / 2 : lambda;
  for (int k = 0; k < draws; ++k) {
    const std::uint64_t seed = derive_seed(iteration_seed, {static_cast<std::uint64_t>(k)});
    Random rng(seed);
    std::vector<double> eps(n);
    for (auto& e : eps) e = rng.normal();
    auto make = [&](std::vector<double> dir) {
      Candidate c{std::move(dir), theta, seed};
      for (std::size_t i = 0; i < n; ++i) c.params.values[i] = theta.values[i] + cfg.sigma * c.perturbation[i];
      return c;
    };
    if (cfg.mirrored) {
      std::vector<double> neg(n);
      for (std::size_t i = 0; i < n; ++i) neg[i] = -eps[i];
      pop[static_cast<std::size_t>(2 * k)] = make(std::move(eps));
      pop[static_cast<std::size_t>(2 * k + 1)] = make(std::move(neg));
    } else {
      pop[static_cast<std::size_t>(k)] = make(std::move(eps));
    }
  }
  return pop;
}

/// Centered rank weights in [-1/2, 1/2], summing to zero; ties share their
/// average rank.
inline std::vector<double> centered_ranks(std::span<const double> fitness) {
  const std::size_t n = fitness.size();
  std::vector<double> u(n, 0.0);
  if (n < 2) return u;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && fitness[order[j + 1]] == fitness[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j);
    for (std::size_t k = i; k <= j; ++k) u[order[k]] = avg_rank / static_cast<double>(n - 1) - 0.5;
    i = j + 1;
  }
  return u;
}

/// theta' = theta + alpha / (lambda sigma) * sum_i u_i eps_i.
inline ParamVector es_update(const ParamVector& theta, std::span<const std::vector<double>> perturbations,
                             std::span<const double> fitnesses, const ESConfig& cfg) {
  if (perturbations.size() != fitnesses.size() || fitnesses.size() != static_cast<std::size_t>(cfg.population_size))
    throw UsageError("es_update: need exactly population_size perturbations and fitnesses");
  for (std::size_t i = 0; i < fitnesses.size(); ++i)
    if (!std::isfinite(fitnesses[i])) throw UsageError("es_update: non-finite fitness at " + std::to_string(i));
  const auto u = centered_ranks(fitnesses);
  ParamVector out = theta;
  if (cfg.sigma == 0.0) return out;
  const double scale = cfg.step_size / (static_cast<double>(cfg.population_size) * cfg.sigma);
  for (std::size_t j = 0; j < theta.size(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * perturbations[i][j];
    out.values[j] += scale * acc;
  }
  return out;
}

inline AgentConfig sample_agent_hyperparameters(const AgentConfig& base, const ESConfig& cfg, std::uint64_t seed) {
  AgentConfig a = base;
  a.train_budget_steps = cfg.inner_budget_steps;
  a.seed = derive_seed(seed, {0xa9e});
  if (!cfg.hp_sampling.fixed) {
    Random rng(derive_seed(seed, {0x4b}));
    const double lo = std::log(cfg.hp_sampling.lr_min), hi = std::log(cfg.hp_sampling.lr_max);
    a.learning_rate = std::exp(rng.uniform(lo, hi));
    const double frac = rng.uniform(cfg.hp_sampling.eps_decay_min_fraction, cfg.hp_sampling.eps_decay_max_fraction);
    a.epsilon_decay_steps = static_cast<long>(std::llround(frac * static_cast<double>(cfg.inner_budget_steps)));
  }
  return a;
}

/// Train a fresh inner agent on the candidate proxy, then score it greedily
/// on the unmodified real environment.
inline FitnessRecord evaluate_candidate(const ParamVector& theta, const MetaObjective& objective, const ESConfig& cfg,
                                        std::uint64_t candidate_seed) {
  FitnessRecord rec;
  rec.agent_hyperparameters = sample_agent_hyperparameters(objective.agent, cfg, candidate_seed);
  Env real(objective.target);
  std::optional<Policy> policy;
  try {
    if (objective.role == ProxyRole::SE) {
      SyntheticEnv se = objective.make_se(theta);
      CountingEnv real_counter(real);
      SyntheticEnvAdapter proxy(se, real_counter);
      auto trained = train_agent(proxy, rec.agent_hyperparameters);
      rec.training_steps = trained.env_steps;
      require(real_counter.steps() == 0, "synthetic-environment training stepped the real environment");
      policy = std::move(trained.policy);
    } else {
      RewardNet rn = objective.make_rn(theta);
      ShapedEnv proxy(real, rn);
      auto trained = train_agent(proxy, rec.agent_hyperparameters);
      rec.training_steps = trained.env_steps;
      policy = std::move(trained.policy);
    }
  } catch (const TrainingError&) {
    rec.diverged = true;
    rec.fitness = real.min_return();
    return rec;
  }
  CountingEnv eval_env(real);
  rec.fitness = evaluate_policy(*policy, eval_env, cfg.eval_episodes, derive_seed(candidate_seed, {0xe7}));
  rec.real_steps_consumed = eval_env.steps();
  if (!std::isfinite(rec.fitness)) {
    rec.diverged = true;
    rec.fitness = real.min_return();
  }
  return rec;
}

struct IterationStats {
  int iteration = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
  double incumbent_fitness = 0.0;
  double wall_ms = 0.0;
};

struct MetaResult {
  ParamVector best_params;
  double best_fitness = -INFINITY;
  ParamVector final_params;
  std::vector<IterationStats> history;
  std::vector<FitnessRecord> records;
  bool early_stopped = false;
};

using CandidateEvaluator = std::function<FitnessRecord(const ParamVector&, std::uint64_t candidate_seed)>;

struct MetaOptions {
  int workers = 1;
  // Replaces evaluate_candidate (test hook).
  CandidateEvaluator evaluator;
  // Defaults to the target's solve threshold.
  std::optional<double> solve_threshold;
  std::optional<ParamVector> initial_params;
  std::function<void(const IterationStats&, const ParamVector& incumbent)> on_iteration;
};

/// Runs `count` independent jobs on up to `workers` threads; results are
/// stored by index so scheduling never affects the output.
template <typename Result, typename Job>
std::vector<Result> parallel_map(int count, int workers, Job job) {
  std::vector<Result> results(static_cast<std::size_t>(count));
  workers = std::clamp(workers, 1, std::max(1, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) results[static_cast<std::size_t>(i)] = job(i);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          results[static_cast<std::size_t>(i)] = job(i);
        } catch (...) {
          errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

/// Rank-shaped, mirrored ES over proxy parameters. The incumbent is the
/// candidate with the highest mean fitness over all its evaluations (its
/// first score plus one re-evaluation per iteration while it stays
/// incumbent).
inline MetaResult meta_train(const MetaObjective& objective, const ESConfig& cfg, const MetaOptions& options = {}) {
  cfg.validate();
  using Clock = std::chrono::steady_clock;
  MetaResult result;
  ParamVector theta = options.initial_params ? *options.initial_params
                                             : objective.initial_params(derive_seed(cfg.seed, {0x7e7a}));
  result.best_params = theta;
  result.final_params = theta;
  const double threshold = options.solve_threshold.value_or(objective.target.solve_threshold);
  CandidateEvaluator evaluate = options.evaluator ? options.evaluator
                                                  : CandidateEvaluator([&](const ParamVector& p, std::uint64_t s) {
                                                      return evaluate_candidate(p, objective, cfg, s);
                                                    });
  double incumbent_sum = 0.0;
  int incumbent_count = 0;
  int consecutive = 0;

  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = Clock::now();
    const std::uint64_t iteration_seed = derive_seed(cfg.seed, {0x17e2, static_cast<std::uint64_t>(it)});
    auto population = sample_population(theta, cfg, iteration_seed);
    auto records = parallel_map<FitnessRecord>(cfg.population_size, options.workers, [&](int i) {
      const std::uint64_t cs = derive_seed(cfg.seed, {0xca9d, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(i)});
      FitnessRecord r = evaluate(population[static_cast<std::size_t>(i)].params, cs);
      r.iteration = it;
      r.candidate_index = i;
      r.perturbation_seed = population[static_cast<std::size_t>(i)].perturbation_seed;
      return r;
    });

    std::vector<double> fitness;
    std::vector<std::vector<double>> perturbations;
    for (std::size_t i = 0; i < records.size(); ++i) {
      fitness.push_back(records[i].fitness);
      perturbations.push_back(population[i].perturbation);
      const double incumbent_mean = incumbent_count ? incumbent_sum / incumbent_count : -INFINITY;
      if (records[i].fitness > incumbent_mean) {
        result.best_params = population[i].params;
        incumbent_sum = records[i].fitness;
        incumbent_count = 1;
      }
    }
    result.records.insert(result.records.end(), records.begin(), records.end());
    theta = es_update(theta, perturbations, fitness, cfg);

    // re-evaluate the incumbent with a fresh seed
    FitnessRecord re = evaluate(result.best_params, derive_seed(cfg.seed, {0x4ee7a1, static_cast<std::uint64_t>(it)}));
    incumbent_sum += re.fitness;
    ++incumbent_count;

    IterationStats stats;
    stats.iteration = it;
    stats.best_fitness = *std::max_element(fitness.begin(), fitness.end());
    stats.mean_fitness = std::accumulate(fitness.begin(), fitness.end(), 0.0) / static_cast<double>(fitness.size());
    stats.incumbent_fitness = re.fitness;
    stats.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    result.history.push_back(stats);
    if (options.on_iteration) options.on_iteration(stats, result.best_params);

    consecutive = re.fitness >= threshold ? consecutive + 1 : 0;
    if (consecutive >= cfg.early_stop_consecutive) {
      result.early_stopped = true;
      break;
    }
  }
  result.final_params = theta;
  result.best_fitness = incumbent_count ? incumbent_sum / incumbent_count : -INFINITY;
  return result;
}

}  // namespace synthlab
