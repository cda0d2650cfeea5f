#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "synthlab/agents.hpp"
#include "synthlab/core.hpp"
#include "synthlab/envs.hpp"
#include "synthlab/meta_opt.hpp"
#include "synthlab/neural.hpp"
#include "synthlab/prior_gen.hpp"
#include "synthlab/synthenv.hpp"
#include "synthlab/world_model.hpp"

namespace synthlab {

using json = nlohmann::json;

/// Strict reader for one JSON object: typed lookups with field-path errors
/// and rejection of unknown keys.
class FieldReader {
 public:
  FieldReader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "must be an object");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  bool has(const std::string& key) const { return j_->contains(key); }

  const json& raw(const std::string& key) {
    used_.insert(key);
    return j_->at(key);
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    const json& v = raw(key);
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(field(key), "expected a boolean");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(field(key), "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          out = v.get<T>();
        } else {
          if (v.get<long long>() < 0) throw ConfigError(field(key), "expected a non-negative integer");
          out = static_cast<T>(v.get<long long>());
        }
      } else {
        out = v.get<T>();
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(field(key), "expected a number");
      out = v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(field(key), "expected a string");
      out = v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<int>>) {
      if (!v.is_array()) throw ConfigError(field(key), "expected an array of integers");
      out.clear();
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw ConfigError(field(key), "expected an array of integers");
        out.push_back(e.get<int>());
      }
    } else {
      static_assert(sizeof(T) == 0, "unsupported field type");
    }
  }

  template <typename T, typename Parse>
  void get_enum(const std::string& key, T& out, Parse parse) {
    std::string s;
    get(key, s);
    if (has(key)) {
      try {
        out = parse(s);
      } catch (const ConfigError& e) {
        throw ConfigError(field(key), e.what());
      }
    }
  }

  void finish() const {
    for (auto it = j_->begin(); it != j_->end(); ++it)
      if (!used_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
  }

 private:
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

// ---------------------------------------------------------------------------
// Config conversions.

inline json to_json(const EnvSpec& s) {
  json j{{"kind", to_string(s.kind)},
         {"obs_dim", s.obs_dim},
         {"action_count", s.action_count},
         {"horizon", s.horizon},
         {"solve_threshold", s.solve_threshold}};
  if (s.kind == EnvKind::GridWorld) j["grid_size"] = s.grid_size;
  return j;
}

/// Unspecified fields take the kind's defaults.
inline EnvSpec env_spec_from_json(const json& j, const std::string& path = "env") {
  FieldReader r(j, path);
  if (!r.has("kind")) throw ConfigError(r.field("kind"), "required");
  EnvKind kind = EnvKind::CartPole;
  r.get_enum("kind", kind, env_kind_from_string);
  int grid = 3;
  r.get("grid_size", grid);
  EnvSpec s = EnvSpec::defaults_for(kind, grid);
  r.get("obs_dim", s.obs_dim);
  r.get("action_count", s.action_count);
  r.get("horizon", s.horizon);
  r.get("solve_threshold", s.solve_threshold);
  r.finish();
  try {
    s.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(path + "." + e.field(), e.what());
  }
  return s;
}

inline json to_json(const AgentConfig& a) {
  return json{{"algorithm", to_string(a.algorithm)},
              {"gamma", a.gamma},
              {"learning_rate", a.learning_rate},
              {"epsilon_start", a.epsilon_start},
              {"epsilon_end", a.epsilon_end},
              {"epsilon_decay_steps", a.epsilon_decay_steps},
              {"buffer_capacity", a.buffer_capacity},
              {"batch_size", a.batch_size},
              {"target_sync_interval", a.target_sync_interval},
              {"learning_starts", a.learning_starts},
              {"train_frequency", a.train_frequency},
              {"gradient_steps", a.gradient_steps},
              {"huber_loss", a.huber_loss},
              {"grad_clip", a.grad_clip},
              {"hidden_sizes", a.hidden_sizes},
              {"hidden_activation", to_string(a.hidden_activation)},
              {"episodes_per_update", a.episodes_per_update},
              {"train_budget_steps", a.train_budget_steps},
              {"eval_interval", a.eval_interval},
              {"eval_episodes", a.eval_episodes},
              {"keep_best", a.keep_best},
              {"seed", a.seed}};
}

inline AgentConfig agent_config_from_json(const json& j, AgentConfig a = {}, const std::string& path = "agent") {
  FieldReader r(j, path);
  r.get_enum("algorithm", a.algorithm, algorithm_from_string);
  r.get("gamma", a.gamma);
  r.get("learning_rate", a.learning_rate);
  r.get("epsilon_start", a.epsilon_start);
  r.get("epsilon_end", a.epsilon_end);
  r.get("epsilon_decay_steps", a.epsilon_decay_steps);
  r.get("buffer_capacity", a.buffer_capacity);
  r.get("batch_size", a.batch_size);
  r.get("target_sync_interval", a.target_sync_interval);
  r.get("learning_starts", a.learning_starts);
  r.get("train_frequency", a.train_frequency);
  r.get("gradient_steps", a.gradient_steps);
  r.get("huber_loss", a.huber_loss);
  r.get("grad_clip", a.grad_clip);
  r.get("hidden_sizes", a.hidden_sizes);
  r.get_enum("hidden_activation", a.hidden_activation, activation_from_string);
  r.get("episodes_per_update", a.episodes_per_update);
  r.get("train_budget_steps", a.train_budget_steps);
  r.get("eval_interval", a.eval_interval);
  r.get("eval_episodes", a.eval_episodes);
  r.get("keep_best", a.keep_best);
  r.get("seed", a.seed);
  r.finish();
  a.validate();
  return a;
}

inline json to_json(const ESConfig& c) {
  json hp{{"fixed", c.hp_sampling.fixed},
          {"lr_min", c.hp_sampling.lr_min},
          {"lr_max", c.hp_sampling.lr_max},
          {"eps_decay_min_fraction", c.hp_sampling.eps_decay_min_fraction},
          {"eps_decay_max_fraction", c.hp_sampling.eps_decay_max_fraction}};
  return json{{"population_size", c.population_size},
              {"sigma", c.sigma},
              {"step_size", c.step_size},
              {"mirrored", c.mirrored},
              {"iterations", c.iterations},
              {"inner_budget_steps", c.inner_budget_steps},
              {"eval_episodes", c.eval_episodes},
              {"hp_sampling", hp},
              {"early_stop_consecutive", c.early_stop_consecutive},
              {"seed", c.seed}};
}

inline ESConfig es_config_from_json(const json& j, ESConfig c = {}) {
  FieldReader r(j, "es");
  r.get("population_size", c.population_size);
  r.get("sigma", c.sigma);
  r.get("step_size", c.step_size);
  r.get("mirrored", c.mirrored);
  r.get("iterations", c.iterations);
  r.get("inner_budget_steps", c.inner_budget_steps);
  r.get("eval_episodes", c.eval_episodes);
  if (r.has("hp_sampling")) {
    FieldReader h(r.raw("hp_sampling"), "es.hp_sampling");
    h.get("fixed", c.hp_sampling.fixed);
    h.get("lr_min", c.hp_sampling.lr_min);
    h.get("lr_max", c.hp_sampling.lr_max);
    h.get("eps_decay_min_fraction", c.hp_sampling.eps_decay_min_fraction);
    h.get("eps_decay_max_fraction", c.hp_sampling.eps_decay_max_fraction);
    h.finish();
  }
  r.get("early_stop_consecutive", c.early_stop_consecutive);
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

/// Proxy definition shared by the SE and RN meta-training kinds.
struct ProxyConfig {
  std::vector<int> hidden = {32};
  int se_horizon = 50;
  InitMode init_mode = InitMode::RealInit;
  double sigma_init = 1.0;
  double clamp_bound = 10.0;
  RewardMode rn_mode = RewardMode::Potential;
  double rn_gamma = 0.99;

  bool operator==(const ProxyConfig&) const = default;
};

inline json to_json(const ProxyConfig& p) {
  return json{{"hidden", p.hidden},
              {"se_horizon", p.se_horizon},
              {"init_mode", to_string(p.init_mode)},
              {"sigma_init", p.sigma_init},
              {"clamp_bound", p.clamp_bound},
              {"rn_mode", to_string(p.rn_mode)},
              {"rn_gamma", p.rn_gamma}};
}

inline ProxyConfig proxy_config_from_json(const json& j) {
  ProxyConfig p;
  FieldReader r(j, "proxy");
  r.get("hidden", p.hidden);
  r.get("se_horizon", p.se_horizon);
  r.get_enum("init_mode", p.init_mode, init_mode_from_string);
  r.get("sigma_init", p.sigma_init);
  r.get("clamp_bound", p.clamp_bound);
  r.get_enum("rn_mode", p.rn_mode, reward_mode_from_string);
  r.get("rn_gamma", p.rn_gamma);
  r.finish();
  if (p.se_horizon < 1) throw ConfigError("proxy.se_horizon", "must be >= 1");
  if (!(p.sigma_init >= 0.0)) throw ConfigError("proxy.sigma_init", "must be >= 0");
  if (!(p.clamp_bound > 0.0)) throw ConfigError("proxy.clamp_bound", "must be positive");
  for (int h : p.hidden)
    if (h < 1) throw ConfigError("proxy.hidden", "widths must be positive");
  return p;
}

inline json activations_to_json(const std::vector<Activation>& v) {
  json a = json::array();
  for (auto x : v) a.push_back(to_string(x));
  return a;
}

inline std::vector<Activation> activations_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ConfigError(field, "expected an array of activation names");
  std::vector<Activation> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ConfigError(field, "expected an array of activation names");
    try {
      out.push_back(activation_from_string(e.get<std::string>()));
    } catch (const ConfigError& err) {
      throw ConfigError(field, err.what());
    }
  }
  return out;
}

inline json to_json(const PriorConfig& c) {
  json mix = json::array();
  for (const auto& m : c.mixture) {
    json o{{"weight", m.weight}};
    if (m.hidden_min) o["hidden_min"] = *m.hidden_min;
    if (m.hidden_max) o["hidden_max"] = *m.hidden_max;
    if (m.activation_pool) o["activation_pool"] = activations_to_json(*m.activation_pool);
    if (m.weight_scale_min) o["weight_scale_min"] = *m.weight_scale_min;
    if (m.weight_scale_max) o["weight_scale_max"] = *m.weight_scale_max;
    if (m.transition_noise_std) o["transition_noise_std"] = *m.transition_noise_std;
    if (m.reward_sparsity) o["reward_sparsity"] = *m.reward_sparsity;
    mix.push_back(o);
  }
  return json{{"state_dim", c.state_dim},
              {"action_count", c.action_count},
              {"hidden_min", c.hidden_min},
              {"hidden_max", c.hidden_max},
              {"activation_pool", activations_to_json(c.activation_pool)},
              {"weight_scale_min", c.weight_scale_min},
              {"weight_scale_max", c.weight_scale_max},
              {"episode_length", c.episode_length},
              {"transition_noise_std", c.transition_noise_std},
              {"reward_sparsity", c.reward_sparsity},
              {"mixture", mix},
              {"seed", c.seed}};
}

inline PriorConfig prior_config_from_json(const json& j) {
  PriorConfig c;
  FieldReader r(j, "prior");
  r.get("state_dim", c.state_dim);
  r.get("action_count", c.action_count);
  r.get("hidden_min", c.hidden_min);
  r.get("hidden_max", c.hidden_max);
  if (r.has("activation_pool")) c.activation_pool = activations_from_json(r.raw("activation_pool"), "prior.activation_pool");
  r.get("weight_scale_min", c.weight_scale_min);
  r.get("weight_scale_max", c.weight_scale_max);
  r.get("episode_length", c.episode_length);
  r.get("transition_noise_std", c.transition_noise_std);
  r.get("reward_sparsity", c.reward_sparsity);
  if (r.has("mixture")) {
    const json& arr = r.raw("mixture");
    if (!arr.is_array()) throw ConfigError("prior.mixture", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "prior.mixture[" + std::to_string(i) + "]";
      FieldReader m(arr[i], path);
      PriorComponent comp;
      m.get("weight", comp.weight);
      auto opt_int = [&](const char* k, std::optional<int>& o) {
        if (m.has(k)) {
          int v = 0;
          m.get(k, v);
          o = v;
        }
      };
      auto opt_double = [&](const char* k, std::optional<double>& o) {
        if (m.has(k)) {
          double v = 0;
          m.get(k, v);
          o = v;
        }
      };
      opt_int("hidden_min", comp.hidden_min);
      opt_int("hidden_max", comp.hidden_max);
      if (m.has("activation_pool")) comp.activation_pool = activations_from_json(m.raw("activation_pool"), path + ".activation_pool");
      opt_double("weight_scale_min", comp.weight_scale_min);
      opt_double("weight_scale_max", comp.weight_scale_max);
      opt_double("transition_noise_std", comp.transition_noise_std);
      opt_double("reward_sparsity", comp.reward_sparsity);
      m.finish();
      c.mixture.push_back(comp);
    }
  }
  r.get("seed", c.seed);
  r.finish();
  c.validate();
  return c;
}

/// World-model architecture, training and simulation settings.
struct WorldModelConfig {
  WorldModelSpec spec;
  WorldModelTrainConfig train;
  int context_size = 1000;
  int heldout_episodes = 1000;
  SimulationOptions simulation;
  // optional path of a trained world_model checkpoint (oswm_adapt_and_solve)
  std::string checkpoint;

  bool operator==(const WorldModelConfig& o) const {
    return spec == o.spec && train == o.train && context_size == o.context_size &&
           heldout_episodes == o.heldout_episodes && simulation.snap_to_grid == o.simulation.snap_to_grid &&
           simulation.cartpole_bounds == o.simulation.cartpole_bounds && checkpoint == o.checkpoint;
  }
};

inline json to_json(const WorldModelConfig& w) {
  return json{{"d_model", w.spec.encoder.d_model},
              {"heads", w.spec.encoder.heads},
              {"layers", w.spec.encoder.layers},
              {"max_sequence", w.spec.encoder.max_sequence},
              {"ff_dim", w.spec.encoder.ff_dim},
              {"reward_loss_weight", w.spec.reward_loss_weight},
              {"position_embedding", w.spec.position_embedding},
              {"training_steps", w.train.training_steps},
              {"batch_size", w.train.batch_size},
              {"learning_rate", w.train.learning_rate},
              {"final_lr_fraction", w.train.final_lr_fraction},
              {"warmup_steps", w.train.warmup_steps},
              {"grad_clip", w.train.grad_clip},
              {"log_interval", w.train.log_interval},
              {"context_size", w.context_size},
              {"heldout_episodes", w.heldout_episodes},
              {"snap_to_grid", w.simulation.snap_to_grid},
              {"cartpole_bounds", w.simulation.cartpole_bounds},
              {"checkpoint", w.checkpoint}};
}

inline WorldModelConfig world_model_config_from_json(const json& j) {
  WorldModelConfig w;
  FieldReader r(j, "world_model");
  r.get("d_model", w.spec.encoder.d_model);
  r.get("heads", w.spec.encoder.heads);
  r.get("layers", w.spec.encoder.layers);
  r.get("max_sequence", w.spec.encoder.max_sequence);
  r.get("ff_dim", w.spec.encoder.ff_dim);
  r.get("reward_loss_weight", w.spec.reward_loss_weight);
  r.get("position_embedding", w.spec.position_embedding);
  r.get("training_steps", w.train.training_steps);
  r.get("batch_size", w.train.batch_size);
  r.get("learning_rate", w.train.learning_rate);
  r.get("final_lr_fraction", w.train.final_lr_fraction);
  r.get("warmup_steps", w.train.warmup_steps);
  r.get("grad_clip", w.train.grad_clip);
  r.get("log_interval", w.train.log_interval);
  r.get("context_size", w.context_size);
  r.get("heldout_episodes", w.heldout_episodes);
  r.get("snap_to_grid", w.simulation.snap_to_grid);
  r.get("cartpole_bounds", w.simulation.cartpole_bounds);
  r.get("checkpoint", w.checkpoint);
  r.finish();
  try {
    w.spec.encoder.validate();
  } catch (const ConfigError& e) {
    throw ConfigError("world_model." + e.field(), e.what());
  }
  w.train.validate();
  if (w.context_size < 1) throw ConfigError("world_model.context_size", "must be >= 1");
  if (w.context_size + 1 > w.spec.encoder.max_sequence)
    throw ConfigError("world_model.context_size", "must be < max_sequence");
  if (w.heldout_episodes < 1) throw ConfigError("world_model.heldout_episodes", "must be positive");
  return w;
}

// ---------------------------------------------------------------------------
// Checkpoints: {format_version, role, spec, manifest, values}.

inline json manifest_to_json(const ParamVector& p) {
  json m = json::array();
  for (const auto& s : p.manifest) m.push_back({{"name", s.name}, {"shape", s.shape}, {"offset", s.offset}});
  return m;
}

inline ParamVector params_from_json(const json& manifest, const json& values) {
  ParamVector p;
  for (const auto& s : manifest) p.add_segment(s.at("name").get<std::string>(), s.at("shape").get<std::vector<int>>());
  for (std::size_t i = 0; i < p.manifest.size(); ++i)
    if (manifest[i].at("offset").get<std::size_t>() != p.manifest[i].offset)
      throw UsageError("checkpoint manifest offsets are not contiguous");
  auto v = values.get<std::vector<double>>();
  if (v.size() != p.size()) throw UsageError("checkpoint values do not match the manifest");
  p.values = std::move(v);
  return p;
}

inline json layers_to_json(const std::vector<LayerSpec>& layers) {
  json a = json::array();
  for (const auto& l : layers)
    a.push_back({{"in_dim", l.in_dim}, {"out_dim", l.out_dim}, {"activation", to_string(l.activation)}});
  return a;
}

inline std::vector<LayerSpec> layers_from_json(const json& a) {
  std::vector<LayerSpec> layers;
  for (const auto& l : a)
    layers.push_back({l.at("in_dim").get<int>(), l.at("out_dim").get<int>(),
                      activation_from_string(l.at("activation").get<std::string>())});
  return layers;
}

inline json make_checkpoint(const std::string& role, json spec, const ParamVector& params) {
  return json{{"format_version", 1},
              {"role", role},
              {"spec", std::move(spec)},
              {"manifest", manifest_to_json(params)},
              {"values", params.values}};
}

inline json checkpoint(const Policy& policy) {
  return make_checkpoint("agent",
                         {{"algorithm", to_string(policy.algorithm)}, {"layers", layers_to_json(policy.net.layers())}},
                         policy.net.params());
}

inline json checkpoint(const SyntheticEnv& se) {
  return make_checkpoint("synthetic_env",
                         {{"obs_dim", se.obs_dim},
                          {"action_count", se.action_count},
                          {"se_horizon", se.se_horizon},
                          {"init_mode", to_string(se.init_mode)},
                          {"sigma_init", se.sigma_init},
                          {"clamp_bound", se.clamp_bound},
                          {"layers", layers_to_json(se.dynamics.layers())}},
                         se.dynamics.params());
}

inline json checkpoint(const RewardNet& rn) {
  return make_checkpoint("reward_net",
                         {{"mode", to_string(rn.mode)}, {"gamma", rn.gamma}, {"layers", layers_to_json(rn.net.layers())}},
                         rn.net.params());
}

inline json checkpoint(const WorldModel& m) {
  WorldModelConfig w;
  w.spec = m.spec;
  json spec = to_json(w);
  spec["state_dim"] = m.spec.state_dim;
  spec["action_count"] = m.spec.action_count;
  return make_checkpoint("world_model", spec, m.params);
}

inline void expect_role(const json& ck, const std::string& role) {
  if (ck.value("format_version", 0) != 1) throw UsageError("unsupported checkpoint format_version");
  if (ck.at("role").get<std::string>() != role)
    throw UsageError("checkpoint role is '" + ck.at("role").get<std::string>() + "', expected '" + role + "'");
}

inline Policy policy_from_checkpoint(const json& ck) {
  expect_role(ck, "agent");
  const json& s = ck.at("spec");
  return Policy{algorithm_from_string(s.at("algorithm").get<std::string>()),
                Mlp(layers_from_json(s.at("layers")), params_from_json(ck.at("manifest"), ck.at("values")))};
}

inline SyntheticEnv synthetic_env_from_checkpoint(const json& ck) {
  expect_role(ck, "synthetic_env");
  const json& s = ck.at("spec");
  SyntheticEnv se{Mlp(layers_from_json(s.at("layers")), params_from_json(ck.at("manifest"), ck.at("values"))),
                  s.at("obs_dim").get<int>(),
                  s.at("action_count").get<int>(),
                  s.at("se_horizon").get<int>(),
                  init_mode_from_string(s.at("init_mode").get<std::string>()),
                  s.at("sigma_init").get<double>(),
                  s.at("clamp_bound").get<double>()};
  se.validate();
  return se;
}

inline RewardNet reward_net_from_checkpoint(const json& ck) {
  expect_role(ck, "reward_net");
  const json& s = ck.at("spec");
  return RewardNet{reward_mode_from_string(s.at("mode").get<std::string>()),
                   Mlp(layers_from_json(s.at("layers")), params_from_json(ck.at("manifest"), ck.at("values"))),
                   s.at("gamma").get<double>()};
}

inline WorldModel world_model_from_checkpoint(const json& ck) {
  expect_role(ck, "world_model");
  json spec = ck.at("spec");
  const int sd = spec.at("state_dim").get<int>(), ac = spec.at("action_count").get<int>();
  spec.erase("state_dim");
  spec.erase("action_count");
  WorldModelConfig w = world_model_config_from_json(spec);
  w.spec.state_dim = sd;
  w.spec.action_count = ac;
  WorldModel m{w.spec, params_from_json(ck.at("manifest"), ck.at("values"))};
  if (m.params.size() != world_model_layout(m.spec).size())
    throw UsageError("world_model checkpoint does not match its spec");
  return m;
}

// ---------------------------------------------------------------------------
// Files.

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return json::parse(in);
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

inline void write_json_file(const std::filesystem::path& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

inline json to_json(const Transition& t) {
  return json{{"state", t.state},
              {"action", t.action},
              {"reward", t.reward},
              {"next_state", t.next_state},
              {"done", t.done},
              {"truncated", t.truncated}};
}

inline Transition transition_from_json(const json& j) {
  Transition t;
  t.state = j.at("state").get<std::vector<double>>();
  t.action = j.at("action").get<int>();
  t.reward = j.at("reward").get<double>();
  t.next_state = j.at("next_state").get<std::vector<double>>();
  t.done = j.at("done").get<bool>();
  t.truncated = j.value("truncated", false);
  return t;
}

/// One transition per line.
inline void write_transitions_jsonl(const std::filesystem::path& path, const std::vector<Transition>& ts) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : ts) out << to_json(t).dump() << "\n";
}

inline std::vector<Transition> read_transitions_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<Transition> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(transition_from_json(json::parse(line)));
  return out;
}

/// One episode (array of transitions) per line.
inline void write_episodes_jsonl(const std::filesystem::path& path, const std::vector<std::vector<Transition>>& eps) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& ep : eps) {
    json a = json::array();
    for (const auto& t : ep) a.push_back(to_json(t));
    out << a.dump() << "\n";
  }
}

inline std::vector<std::vector<Transition>> read_episodes_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<std::vector<Transition>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<Transition> ep;
    for (const auto& t : json::parse(line)) ep.push_back(transition_from_json(t));
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace synthlab
