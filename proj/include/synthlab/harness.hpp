#pragma once

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "synthlab/io.hpp"

namespace synthlab {

enum class RunKind { BaselineAgent, MetaTrainSE, MetaTrainRN, OswmTrain, OswmAdaptAndSolve, Report };

inline std::string to_string(RunKind k) {
  switch (k) {
    case RunKind::BaselineAgent: return "baseline_agent";
    case RunKind::MetaTrainSE: return "meta_train_se";
    case RunKind::MetaTrainRN: return "meta_train_rn";
    case RunKind::OswmTrain: return "oswm_train";
    case RunKind::OswmAdaptAndSolve: return "oswm_adapt_and_solve";
    case RunKind::Report: return "report";
  }
  return "?";
}

inline RunKind run_kind_from_string(const std::string& s) {
  for (auto k : {RunKind::BaselineAgent, RunKind::MetaTrainSE, RunKind::MetaTrainRN, RunKind::OswmTrain,
                 RunKind::OswmAdaptAndSolve, RunKind::Report})
    if (to_string(k) == s) return k;
  throw ConfigError("run_kind", "unknown run kind '" + s + "'");
}

struct RunConfig {
  RunKind run_kind = RunKind::BaselineAgent;
  std::string run_id;
  std::optional<EnvSpec> env;
  std::optional<AgentConfig> agent;
  std::optional<ESConfig> es;
  std::optional<ProxyConfig> proxy;
  std::optional<PriorConfig> prior;
  std::optional<WorldModelConfig> world_model;
  std::vector<std::uint64_t> seeds;
  std::string output_dir;
  // report kind: the finished run to summarise
  std::string run_dir;
  // greedy episodes for final real-env scores
  int final_eval_episodes = 100;
  // return level for steps-to-solve; defaults to the env's solve threshold
  std::optional<double> efficiency_threshold;

  bool operator==(const RunConfig&) const = default;

  double threshold() const { return efficiency_threshold.value_or(env ? env->solve_threshold : 0.0); }

  void validate() const {
    auto need = [&](bool present, const char* field) {
      if (!present) throw ConfigError(field, "required for run_kind " + to_string(run_kind));
    };
    if (run_kind == RunKind::Report) {
      need(!run_dir.empty(), "run_dir");
      return;
    }
    if (seeds.empty()) throw ConfigError("seeds", "must not be empty");
    need(!output_dir.empty(), "output_dir");
    if (final_eval_episodes < 1) throw ConfigError("final_eval_episodes", "must be positive");
    switch (run_kind) {
      case RunKind::BaselineAgent: need(env.has_value(), "env"); break;
      case RunKind::MetaTrainSE:
      case RunKind::MetaTrainRN:
        need(env.has_value(), "env");
        need(es.has_value(), "es");
        break;
      case RunKind::OswmTrain:
        need(prior.has_value(), "prior");
        need(world_model.has_value(), "world_model");
        break;
      case RunKind::OswmAdaptAndSolve:
        need(env.has_value(), "env");
        need(world_model.has_value(), "world_model");
        if (world_model->checkpoint.empty()) need(prior.has_value(), "prior");
        if (world_model->context_size + 1 > world_model->spec.encoder.max_sequence)
          throw ConfigError("world_model.context_size", "must be < max_sequence");
        if (prior && (prior->state_dim != env->obs_dim || prior->action_count != env->action_count))
          throw ConfigError("prior.state_dim", "prior dimensions must match env obs_dim/action_count");
        break;
      case RunKind::Report: break;
    }
    if (run_kind == RunKind::OswmTrain && prior->episode_length + 1 > world_model->spec.encoder.max_sequence)
      throw ConfigError("prior.episode_length", "exceeds world_model.max_sequence");
  }
};

inline json to_json(const RunConfig& c) {
  json j{{"run_kind", to_string(c.run_kind)}, {"run_id", c.run_id}};
  if (c.env) j["env"] = to_json(*c.env);
  if (c.agent) j["agent"] = to_json(*c.agent);
  if (c.es) j["es"] = to_json(*c.es);
  if (c.proxy) j["proxy"] = to_json(*c.proxy);
  if (c.prior) j["prior"] = to_json(*c.prior);
  if (c.world_model) j["world_model"] = to_json(*c.world_model);
  j["seeds"] = c.seeds;
  j["output_dir"] = c.output_dir;
  if (!c.run_dir.empty()) j["run_dir"] = c.run_dir;
  j["final_eval_episodes"] = c.final_eval_episodes;
  if (c.efficiency_threshold) j["efficiency_threshold"] = *c.efficiency_threshold;
  return j;
}

/// Parses and validates; every problem surfaces as a ConfigError naming the
/// field.
inline RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  FieldReader r(j, "");
  if (!r.has("run_kind")) throw ConfigError("run_kind", "required");
  r.get_enum("run_kind", c.run_kind, run_kind_from_string);
  r.get("run_id", c.run_id);
  if (c.run_id.empty()) c.run_id = to_string(c.run_kind);
  if (r.has("env")) c.env = env_spec_from_json(r.raw("env"));
  if (r.has("agent")) c.agent = agent_config_from_json(r.raw("agent"));
  if (r.has("es")) c.es = es_config_from_json(r.raw("es"));
  if (r.has("proxy")) c.proxy = proxy_config_from_json(r.raw("proxy"));
  if (r.has("prior")) c.prior = prior_config_from_json(r.raw("prior"));
  if (r.has("world_model")) c.world_model = world_model_config_from_json(r.raw("world_model"));
  if (r.has("seeds")) {
    const json& s = r.raw("seeds");
    if (!s.is_array()) throw ConfigError("seeds", "expected an array of unsigned integers");
    for (const auto& v : s) {
      if (!v.is_number_unsigned()) throw ConfigError("seeds", "expected an array of unsigned integers");
      c.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  r.get("output_dir", c.output_dir);
  r.get("run_dir", c.run_dir);
  r.get("final_eval_episodes", c.final_eval_episodes);
  if (r.has("efficiency_threshold")) {
    double t = 0;
    r.get("efficiency_threshold", t);
    c.efficiency_threshold = t;
  }
  r.finish();
  c.validate();
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Efficiency comparison.

inline std::optional<long> steps_to_threshold(const LearningCurve& curve, double threshold) {
  for (const auto& p : curve.points)
    if (p.eval_return >= threshold) return p.env_steps;
  return std::nullopt;
}

struct EfficiencyComparison {
  double ratio = 0.0;
  bool censored = false;
  std::optional<long> proxy_steps;
  std::optional<long> real_steps;
};

/// Ratio of first env-steps at which each curve reaches `threshold`. A
/// curve that never gets there makes the ratio +inf and sets the flag.
inline EfficiencyComparison compare_efficiency(const LearningCurve& proxy, const LearningCurve& real, double threshold) {
  EfficiencyComparison c;
  c.proxy_steps = steps_to_threshold(proxy, threshold);
  c.real_steps = steps_to_threshold(real, threshold);
  if (!c.proxy_steps || !c.real_steps) {
    c.censored = true;
    c.ratio = std::numeric_limits<double>::infinity();
    return c;
  }
  // reaching the threshold before any training counts as one step
  c.ratio = static_cast<double>(std::max<long>(*c.proxy_steps, 1)) / static_cast<double>(std::max<long>(*c.real_steps, 1));
  return c;
}

inline json to_json(const EfficiencyComparison& c) {
  json j{{"censored", c.censored}};
  j["ratio"] = std::isfinite(c.ratio) ? json(c.ratio) : json("inf");
  j["proxy_steps"] = c.proxy_steps ? json(*c.proxy_steps) : json(nullptr);
  j["real_steps"] = c.real_steps ? json(*c.real_steps) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// Greedy evaluation with goal accounting.

struct GreedyScore {
  double mean_return = 0.0;
  // fraction of episodes ending in a terminal (not time-limit) transition
  double terminal_rate = 0.0;
};

inline GreedyScore score_policy(const Policy& policy, EnvLike& env, int episodes, std::uint64_t seed) {
  GreedyScore g;
  for (int e = 0; e < episodes; ++e) {
    EnvState s = env.reset(derive_seed(seed, {static_cast<std::uint64_t>(e)}));
    double total = 0.0;
    while (true) {
      StepResult r = env.step(s, policy.act(s.observation));
      total += r.reward;
      if (r.done) {
        if (!r.truncated) g.terminal_rate += 1.0;
        break;
      }
      s = std::move(r.state);
    }
    g.mean_return += total;
  }
  g.mean_return /= episodes;
  g.terminal_rate /= episodes;
  return g;
}

// ---------------------------------------------------------------------------
// Run outputs.

namespace detail {

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

/// One seed's output directory: metrics.jsonl, curves.csv, checkpoints/.
class SeedOutput {
 public:
  SeedOutput(const std::filesystem::path& dir, std::string run_id, RunKind kind, std::uint64_t seed)
      : dir_(dir), run_id_(std::move(run_id)), kind_(kind), seed_(seed), t0_(std::chrono::steady_clock::now()) {
    std::filesystem::create_directories(dir_ / "checkpoints");
    metrics_.open(dir_ / "metrics.jsonl", std::ios::trunc);
    curves_.open(dir_ / "curves.csv", std::ios::trunc);
    if (!metrics_ || !curves_) throw std::runtime_error("cannot write to " + dir_.string());
    curves_ << "series,step,value\n";
  }

  const std::filesystem::path& dir() const { return dir_; }

  void metric(const std::string& step_key, long step, const json& values) {
    json row{{"run_id", run_id_}, {"kind", to_string(kind_)}, {"seed", seed_}, {step_key, step}};
    for (auto it = values.begin(); it != values.end(); ++it) row[it.key()] = it.value();
    row["wall_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0_).count();
    metrics_ << row.dump() << "\n";
    metrics_.flush();
  }

  void curve(const std::string& series, const LearningCurve& c) {
    for (const auto& p : c.points) curves_ << series << "," << p.env_steps << "," << fmt_double(p.eval_return) << "\n";
    curves_.flush();
  }

  void curve_point(const std::string& series, long step, double value) {
    curves_ << series << "," << step << "," << fmt_double(value) << "\n";
  }

  void checkpoint(const std::string& name, const json& ck) const { write_json_file(dir_ / "checkpoints" / name, ck); }

 private:
  std::filesystem::path dir_;
  std::string run_id_;
  RunKind kind_;
  std::uint64_t seed_;
  std::chrono::steady_clock::time_point t0_;
  std::ofstream metrics_;
  std::ofstream curves_;
};

inline AgentConfig agent_or_default(const RunConfig& c) { return c.agent.value_or(AgentConfig{}); }

inline json run_baseline(const RunConfig& c, std::uint64_t seed, SeedOutput& out) {
  AgentConfig a = agent_or_default(c);
  a.seed = seed;
  Env env(*c.env), eval_env(*c.env);
  CountingEnv counted(env);
  TrainResult tr = train_agent(counted, a, &eval_env);
  for (const auto& p : tr.curve.points) out.metric("step", p.env_steps, {{"eval_return", p.eval_return}});
  out.curve("real", tr.curve);
  out.checkpoint("agent.json", checkpoint(tr.policy));
  const GreedyScore g = score_policy(tr.policy, eval_env, c.final_eval_episodes, derive_seed(seed, {0xf1a1}));
  const auto solve = steps_to_threshold(tr.curve, c.threshold());
  return json{{"seed", seed},
              {"mean_eval_return", g.mean_return},
              {"solved", g.mean_return >= c.env->solve_threshold},
              {"train_steps", counted.steps()},
              {"steps_to_threshold", solve ? json(*solve) : json(nullptr)}};
}

inline MetaObjective make_objective(const RunConfig& c) {
  MetaObjective o;
  o.target = *c.env;
  o.role = c.run_kind == RunKind::MetaTrainSE ? ProxyRole::SE : ProxyRole::RN;
  const ProxyConfig p = c.proxy.value_or(ProxyConfig{});
  o.hidden = p.hidden;
  o.se_horizon = p.se_horizon;
  o.init_mode = p.init_mode;
  o.sigma_init = p.sigma_init;
  o.clamp_bound = p.clamp_bound;
  o.rn_mode = p.rn_mode;
  o.rn_gamma = p.rn_gamma;
  o.agent = agent_or_default(c);
  return o;
}

inline json run_meta(const RunConfig& c, std::uint64_t seed, int workers, SeedOutput& out) {
  const MetaObjective objective = make_objective(c);
  ESConfig es = *c.es;
  es.seed = seed;
  MetaOptions opts;
  opts.workers = workers;
  const bool se_role = objective.role == ProxyRole::SE;
  opts.on_iteration = [&](const IterationStats& s, const ParamVector& incumbent) {
    out.metric("iter", s.iteration,
               {{"best_fitness", s.best_fitness},
                {"mean_fitness", s.mean_fitness},
                {"incumbent_fitness", s.incumbent_fitness}});
    out.checkpoint("incumbent.json", se_role ? checkpoint(objective.make_se(incumbent))
                                             : checkpoint(objective.make_rn(incumbent)));
  };
  MetaResult mr = meta_train(objective, es, opts);
  {
    std::ofstream rec(out.dir() / "fitness_records.jsonl", std::ios::trunc);
    for (const auto& r : mr.records)
      rec << json{{"iteration", r.iteration},
                  {"candidate_index", r.candidate_index},
                  {"perturbation_seed", r.perturbation_seed},
                  {"agent_hyperparameters", to_json(r.agent_hyperparameters)},
                  {"fitness", r.fitness},
                  {"real_steps_consumed", r.real_steps_consumed},
                  {"training_steps", r.training_steps},
                  {"diverged", r.diverged}}
                 .dump()
          << "\n";
  }

  // A fresh agent on the incumbent proxy against one on the real env, same
  // seed and budget.
  AgentConfig a = objective.agent;
  a.train_budget_steps = es.inner_budget_steps;
  a.seed = derive_seed(seed, {0xf4e5});
  Env real(*c.env), eval_env(*c.env);
  CountingEnv counted(real);
  TrainResult proxy_run;
  if (se_role) {
    SyntheticEnv se = objective.make_se(mr.best_params);
    SyntheticEnvAdapter adapter(se, counted);
    proxy_run = train_agent(adapter, a, &eval_env);
    out.checkpoint("incumbent.json", checkpoint(se));
  } else {
    RewardNet rn = objective.make_rn(mr.best_params);
    ShapedEnv shaped(counted, rn);
    proxy_run = train_agent(shaped, a, &eval_env);
    out.checkpoint("incumbent.json", checkpoint(rn));
  }
  const long proxy_real_steps = counted.steps();
  Env real2(*c.env);
  TrainResult real_run = train_agent(real2, a, &eval_env);
  out.curve("proxy", proxy_run.curve);
  out.curve("real", real_run.curve);
  out.checkpoint("proxy_agent.json", checkpoint(proxy_run.policy));
  out.checkpoint("real_agent.json", checkpoint(real_run.policy));
  const std::uint64_t es_seed = derive_seed(seed, {0xf1a1});
  const GreedyScore gp = score_policy(proxy_run.policy, eval_env, c.final_eval_episodes, es_seed);
  const GreedyScore gr = score_policy(real_run.policy, eval_env, c.final_eval_episodes, es_seed);
  return json{{"seed", seed},
              {"incumbent_fitness", mr.best_fitness},
              {"iterations", mr.history.size()},
              {"early_stopped", mr.early_stopped},
              {"proxy_agent_return", gp.mean_return},
              {"real_agent_return", gr.mean_return},
              {"proxy_real_steps_during_training", proxy_real_steps},
              {"efficiency", to_json(compare_efficiency(proxy_run.curve, real_run.curve, c.threshold()))}};
}

inline std::uint64_t heldout_seed(const PriorConfig& prior) { return derive_seed(prior.seed, {0x4e1d}); }

inline WorldModelSpec model_spec(const WorldModelConfig& w, const PriorConfig& prior) {
  WorldModelSpec s = w.spec;
  s.state_dim = prior.state_dim;
  s.action_count = prior.action_count;
  return s;
}

inline json run_oswm_train(const RunConfig& c, std::uint64_t seed, SeedOutput& out) {
  const WorldModelConfig& w = *c.world_model;
  WorldModelTrainConfig tc = w.train;
  tc.seed = seed;
  const WorldModelSpec spec = model_spec(w, *c.prior);
  const HeldOutCorpus corpus = make_heldout_corpus(*c.prior, w.heldout_episodes, heldout_seed(*c.prior));
  const double initial = heldout_mse(WorldModel::initialize(spec, derive_seed(tc.seed, {0x3d})), corpus);
  auto res = train_world_model(*c.prior, spec, tc, [&](const LossPoint& p) {
    out.metric("step", p.step, {{"loss", p.loss}, {"lr", scheduled_lr(tc, p.step - 1)}});
    out.curve_point("loss", p.step, p.loss);
  });
  const double final_mse = heldout_mse(res.model, corpus);
  out.checkpoint("world_model.json", checkpoint(res.model));
  return json{{"seed", seed},
              {"heldout_mse_initial", initial},
              {"heldout_mse_final", final_mse},
              {"mse_reduction", final_mse > 0.0 ? json(initial / final_mse) : json("inf")}};
}

inline json run_oswm_adapt(const RunConfig& c, std::uint64_t seed, SeedOutput& out) {
  const WorldModelConfig& w = *c.world_model;
  WorldModel model;
  if (!w.checkpoint.empty()) {
    model = world_model_from_checkpoint(read_json_file(w.checkpoint));
  } else {
    WorldModelTrainConfig tc = w.train;
    tc.seed = seed;
    model = train_world_model(*c.prior, model_spec(w, *c.prior), tc,
                              [&](const LossPoint& p) { out.metric("step", p.step, {{"loss", p.loss}}); })
                .model;
    out.checkpoint("world_model.json", checkpoint(model));
  }
  if (model.spec.state_dim != c.env->obs_dim || model.spec.action_count != c.env->action_count)
    throw UsageError("world model dimensions do not match env");
  Env real(*c.env);
  CountingEnv counted(real);
  ContextWindow ctx = adapt(model, counted, w.context_size, derive_seed(seed, {0xada}));
  const long context_steps = counted.steps();
  write_transitions_jsonl(out.dir() / "context.jsonl", ctx.transitions);
  SimulatedEnv sim(model, ctx, *c.env, w.simulation);
  AgentConfig a = agent_or_default(c);
  a.seed = derive_seed(seed, {0xa6});
  // learning curve is measured on a separate real env that is never trained on
  Env eval_env(*c.env);
  TrainResult tr = train_agent(sim, a, &eval_env);
  for (const auto& p : tr.curve.points) out.metric("step", p.env_steps, {{"eval_return", p.eval_return}});
  out.curve("simulated", tr.curve);
  out.checkpoint("agent.json", checkpoint(tr.policy));
  const GreedyScore g = score_policy(tr.policy, eval_env, c.final_eval_episodes, derive_seed(seed, {0xf1a1}));
  json s{{"seed", seed},
         {"mean_eval_return", g.mean_return},
         {"real_steps_context", context_steps},
         {"real_steps_beyond_context", counted.steps() - context_steps},
         {"simulated_steps", sim.steps()}};
  if (c.env->kind == EnvKind::GridWorld) s["goal_rate"] = g.terminal_rate;
  return s;
}

inline json aggregate(const RunConfig& c, const std::vector<json>& per_seed) {
  auto values = [&](const std::string& key) {
    std::vector<double> v;
    for (const auto& s : per_seed)
      if (s.contains(key) && s[key].is_number()) v.push_back(s[key].get<double>());
    return v;
  };
  auto stats = [&](const std::string& key) {
    auto v = values(key);
    if (v.empty()) return json(nullptr);
    std::sort(v.begin(), v.end());
    double mean = 0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    const double median = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    return json{{"mean", mean}, {"median", median}, {"min", v.front()}, {"max", v.back()}};
  };
  json a;
  switch (c.run_kind) {
    case RunKind::BaselineAgent: {
      int solved = 0;
      for (const auto& s : per_seed) solved += s["solved"].get<bool>();
      a = {{"mean_eval_return", stats("mean_eval_return")}, {"seeds_solved", solved}};
      break;
    }
    case RunKind::MetaTrainSE:
    case RunKind::MetaTrainRN: {
      std::vector<double> ratios;
      for (const auto& s : per_seed) {
        const auto& r = s["efficiency"]["ratio"];
        ratios.push_back(r.is_number() ? r.get<double>() : std::numeric_limits<double>::infinity());
      }
      std::sort(ratios.begin(), ratios.end());
      const double med = ratios.size() % 2 ? ratios[ratios.size() / 2]
                                           : 0.5 * (ratios[ratios.size() / 2 - 1] + ratios[ratios.size() / 2]);
      a = {{"incumbent_fitness", stats("incumbent_fitness")},
           {"proxy_agent_return", stats("proxy_agent_return")},
           {"real_agent_return", stats("real_agent_return")},
           {"median_efficiency_ratio", std::isfinite(med) ? json(med) : json("inf")}};
      break;
    }
    case RunKind::OswmTrain:
      a = {{"heldout_mse_initial", stats("heldout_mse_initial")},
           {"heldout_mse_final", stats("heldout_mse_final")},
           {"mse_reduction", stats("mse_reduction")}};
      break;
    case RunKind::OswmAdaptAndSolve:
      a = {{"mean_eval_return", stats("mean_eval_return")}, {"goal_rate", stats("goal_rate")}};
      break;
    case RunKind::Report: break;
  }
  return a;
}

}  // namespace detail

inline std::filesystem::path resolve_output_dir(const RunConfig& c) {
  if (const char* root = std::getenv("SYNTHLAB_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / c.run_id;
  return c.output_dir;
}

/// Executes every seed in order and writes the run directory. Throws on
/// failure; see run_main for the exit-code mapping.
inline json execute(const RunConfig& c, int workers = 1, std::ostream* log = nullptr) {
  c.validate();
  const auto dir = resolve_output_dir(c);
  std::filesystem::create_directories(dir);
  write_json_file(dir / "config.json", to_json(c));
  std::vector<json> per_seed;
  for (std::uint64_t seed : c.seeds) {
    detail::SeedOutput out(dir / ("seed_" + std::to_string(seed)), c.run_id, c.run_kind, seed);
    json s;
    switch (c.run_kind) {
      case RunKind::BaselineAgent: s = detail::run_baseline(c, seed, out); break;
      case RunKind::MetaTrainSE:
      case RunKind::MetaTrainRN: s = detail::run_meta(c, seed, workers, out); break;
      case RunKind::OswmTrain: s = detail::run_oswm_train(c, seed, out); break;
      case RunKind::OswmAdaptAndSolve: s = detail::run_oswm_adapt(c, seed, out); break;
      case RunKind::Report: throw UsageError("report runs go through make_report");
    }
    write_json_file(out.dir() / "summary.json", s);
    if (log) *log << "[" << c.run_id << "] seed " << seed << ": " << s.dump() << std::endl;
    per_seed.push_back(std::move(s));
  }
  json summary{{"run_id", c.run_id},
               {"kind", to_string(c.run_kind)},
               {"seeds", per_seed},
               {"aggregate", detail::aggregate(c, per_seed)}};
  write_json_file(dir / "summary.json", summary);
  return summary;
}

// ---------------------------------------------------------------------------
// Reports.

inline std::vector<std::pair<std::string, LearningCurve>> read_curves_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::pair<std::string, LearningCurve>> out;
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string series, step, value;
    std::getline(ss, series, ',');
    std::getline(ss, step, ',');
    std::getline(ss, value, ',');
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& p) { return p.first == series; });
    if (it == out.end()) {
      out.emplace_back(series, LearningCurve{});
      it = std::prev(out.end());
    }
    it->second.points.push_back({std::stol(step), std::stod(value)});
  }
  return out;
}

/// Reads a finished run directory and writes report.md / report.json next
/// to its summary. Meta runs get a steps-to-solve table (proxy vs real).
inline std::string make_report(const std::filesystem::path& run_dir) {
  const json summary = read_json_file(run_dir / "summary.json");
  const RunConfig cfg = run_config_from_json(read_json_file(run_dir / "config.json"));
  const RunKind kind = cfg.run_kind;
  std::ostringstream md;
  json rows = json::array();
  md << "# " << summary["run_id"].get<std::string>() << " (" << to_string(kind) << ")\n\n";
  auto cell = [](const json& v) {
    if (v.is_null()) return std::string("never");
    if (v.is_number_float()) {
      std::ostringstream os;
      os << std::setprecision(4) << v.get<double>();
      return os.str();
    }
    return v.is_string() ? v.get<std::string>() : v.dump();
  };
  if (kind == RunKind::MetaTrainSE || kind == RunKind::MetaTrainRN) {
    const double threshold = cfg.threshold();
    md << "Steps to reach return >= " << threshold << "\n\n";
    md << "| seed | proxy steps | real steps | ratio | proxy return | real return |\n";
    md << "|---|---|---|---|---|---|\n";
    for (const auto& s : summary["seeds"]) {
      const std::uint64_t seed = s["seed"].get<std::uint64_t>();
      const auto curves = read_curves_csv(run_dir / ("seed_" + std::to_string(seed)) / "curves.csv");
      LearningCurve proxy, real;
      for (const auto& [name, c] : curves) (name == "proxy" ? proxy : real) = c;
      const auto cmp = compare_efficiency(proxy, real, threshold);
      const json row{{"seed", seed},
                     {"efficiency", to_json(cmp)},
                     {"proxy_agent_return", s["proxy_agent_return"]},
                     {"real_agent_return", s["real_agent_return"]}};
      rows.push_back(row);
      md << "| " << seed << " | " << cell(row["efficiency"]["proxy_steps"]) << " | "
         << cell(row["efficiency"]["real_steps"]) << " | " << cell(row["efficiency"]["ratio"]) << " | "
         << cell(s["proxy_agent_return"]) << " | " << cell(s["real_agent_return"]) << " |\n";
    }
  } else {
    std::vector<std::string> keys;
    for (const auto& s : summary["seeds"])
      for (auto it = s.begin(); it != s.end(); ++it)
        if (std::find(keys.begin(), keys.end(), it.key()) == keys.end() && !it.value().is_object()) keys.push_back(it.key());
    md << "|";
    for (const auto& k : keys) md << " " << k << " |";
    md << "\n|";
    for (std::size_t i = 0; i < keys.size(); ++i) md << "---|";
    md << "\n";
    for (const auto& s : summary["seeds"]) {
      md << "|";
      for (const auto& k : keys) md << " " << (s.contains(k) ? cell(s[k]) : "") << " |";
      md << "\n";
      rows.push_back(s);
    }
  }
  md << "\nAggregate: `" << summary["aggregate"].dump() << "`\n";
  write_text_file(run_dir / "report.md", md.str());
  write_json_file(run_dir / "report.json", json{{"run_id", summary["run_id"]}, {"kind", to_string(kind)}, {"rows", rows}});
  return md.str();
}

/// CLI-facing wrapper: 0 success, 1 runtime failure, 2 config failure.
inline int run_main(const std::filesystem::path& config_path, int workers, std::optional<std::uint64_t> seed_override,
                    std::ostream& log, std::ostream& err) {
  RunConfig cfg;
  try {
    cfg = load_run_config(config_path);
    if (seed_override) cfg.seeds = {*seed_override};
    if (workers < 1) throw ConfigError("workers", "must be >= 1");
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  }
  std::string stage = "setup";
  try {
    if (cfg.run_kind == RunKind::Report) {
      stage = "report";
      log << make_report(cfg.run_dir);
      return 0;
    }
    stage = to_string(cfg.run_kind);
    execute(cfg, workers, &log);
    return 0;
  } catch (const std::exception& e) {
    err << "runtime error: run_id=" << cfg.run_id << " stage=" << stage << ": " << e.what() << "\n";
    return 1;
  }
}

inline int report_main(const std::filesystem::path& run_dir, std::ostream& log, std::ostream& err) {
  try {
    log << make_report(run_dir);
    return 0;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "runtime error: stage=report run_dir=" << run_dir.string() << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace synthlab
