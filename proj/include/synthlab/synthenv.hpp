#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "synthlab/core.hpp"
#include "synthlab/envs.hpp"
#include "synthlab/neural.hpp"

namespace synthlab {

enum class InitMode { RealInit, GaussianInit };
enum class RewardMode { Replace, Additive, Potential };

inline std::string to_string(InitMode m) { return m == InitMode::RealInit ? "RealInit" : "GaussianInit"; }
inline InitMode init_mode_from_string(const std::string& s) {
  if (s == "RealInit") return InitMode::RealInit;
  if (s == "GaussianInit") return InitMode::GaussianInit;
  throw ConfigError("proxy.init_mode", "unknown init mode '" + s + "'");
}
inline std::string to_string(RewardMode m) {
  switch (m) {
    case RewardMode::Replace: return "Replace";
    case RewardMode::Additive: return "Additive";
    case RewardMode::Potential: return "Potential";
  }
  return "?";
}
inline RewardMode reward_mode_from_string(const std::string& s) {
  if (s == "Replace") return RewardMode::Replace;
  if (s == "Additive") return RewardMode::Additive;
  if (s == "Potential") return RewardMode::Potential;
  throw ConfigError("proxy.rn_mode", "unknown reward-net mode '" + s + "'");
}

/// Learned replacement for a real environment's dynamics and reward:
/// (state ++ onehot(action)) -> (next_state ++ reward).
struct SyntheticEnv {
  Mlp dynamics;
  int obs_dim = 0;
  int action_count = 0;
  int se_horizon = 50;
  InitMode init_mode = InitMode::RealInit;
  double sigma_init = 1.0;
  double clamp_bound = 10.0;

  static std::vector<LayerSpec> architecture(int obs_dim, int action_count, std::span<const int> hidden) {
    return dense_stack(obs_dim + action_count, hidden, obs_dim + 1, Activation::Tanh, Activation::Linear);
  }

  void validate() const {
    if (dynamics.in_dim() != obs_dim + action_count)
      throw ConfigError("synthetic_env", "dynamics input must be obs_dim + action_count");
    if (dynamics.out_dim() != obs_dim + 1)
      throw ConfigError("synthetic_env", "dynamics output must be obs_dim + 1");
    if (se_horizon < 1) throw ConfigError("se_horizon", "must be >= 1");
  }
};

inline std::vector<double> state_action_input(std::span<const double> state, int action, int action_count) {
  std::vector<double> in(state.begin(), state.end());
  in.resize(state.size() + static_cast<std::size_t>(action_count), 0.0);
  in[state.size() + static_cast<std::size_t>(action)] = 1.0;
  return in;
}

inline EnvState se_reset(const SyntheticEnv& se, EnvLike& real_env, std::uint64_t seed) {
  if (se.init_mode == InitMode::RealInit) {
    EnvState s = real_env.reset(seed);
    s.step_index = 0;
    s.terminated = false;
    return s;
  }
  Random rng(derive_seed(seed, {0x5e}));
  EnvState s;
  s.observation.resize(static_cast<std::size_t>(se.obs_dim));
  for (auto& v : s.observation) v = se.sigma_init * rng.normal();
  return s;
}

/// Pure transition of the synthetic environment. Episodes end (as a time
/// limit) after se_horizon steps.
inline StepResult se_step(const SyntheticEnv& se, const EnvState& state, int action) {
  require(action >= 0 && action < se.action_count, "se_step: action out of range");
  require(!state.terminated, "se_step: episode already ended");
  auto out = se.dynamics.forward(state_action_input(state.observation, action, se.action_count));
  StepResult r;
  r.state.observation.assign(out.begin(), out.begin() + se.obs_dim);
  for (auto& v : r.state.observation) v = std::clamp(v, -se.clamp_bound, se.clamp_bound);
  r.reward = out[static_cast<std::size_t>(se.obs_dim)];
  r.state.step_index = state.step_index + 1;
  r.done = r.state.step_index >= se.se_horizon;
  r.truncated = r.done;
  r.state.terminated = r.done;
  return r;
}

/// Learned reward: replaces, adds to, or potential-shapes the real reward.
struct RewardNet {
  RewardMode mode = RewardMode::Potential;
  Mlp net;
  double gamma = 0.99;

  static std::vector<LayerSpec> architecture(RewardMode mode, int obs_dim, int action_count,
                                             std::span<const int> hidden) {
    const int in = mode == RewardMode::Potential ? obs_dim : 2 * obs_dim + action_count;
    return dense_stack(in, hidden, 1, Activation::Tanh, Activation::Linear);
  }

  double potential(std::span<const double> state) const { return net.forward(state)[0]; }
};

inline double rn_shape(const RewardNet& rn, const Transition& t, double real_reward) {
  switch (rn.mode) {
    case RewardMode::Replace:
    case RewardMode::Additive: {
      const int action_count = rn.net.in_dim() - 2 * static_cast<int>(t.state.size());
      require(action_count > 0, "rn_shape: reward net input does not match transition");
      auto in = state_action_input(t.state, t.action, action_count);
      in.insert(in.end(), t.next_state.begin(), t.next_state.end());
      const double r = rn.net.forward(in)[0];
      return rn.mode == RewardMode::Replace ? r : real_reward + r;
    }
    case RewardMode::Potential: {
      // Terminal states are absorbing with zero potential.
      const double next = t.terminal() ? 0.0 : rn.potential(t.next_state);
      return real_reward + rn.gamma * next - rn.potential(t.state);
    }
  }
  return real_reward;
}

/// EnvLike view of a synthetic environment. Resets may consult the real
/// environment's initial-state distribution; steps never touch it.
class SyntheticEnvAdapter final : public EnvLike {
 public:
  SyntheticEnvAdapter(const SyntheticEnv& se, EnvLike& real_env) : se_(&se), real_(&real_env) {}

  int obs_dim() const override { return se_->obs_dim; }
  int action_count() const override { return se_->action_count; }
  EnvState reset(std::uint64_t seed) override { return se_reset(*se_, *real_, seed); }
  StepResult step(const EnvState& state, int action) override { return se_step(*se_, state, action); }

 private:
  const SyntheticEnv* se_;
  EnvLike* real_;
};

/// Real dynamics with the reward passed through a reward network.
class ShapedEnv final : public EnvLike {
 public:
  ShapedEnv(EnvLike& real_env, const RewardNet& rn) : real_(&real_env), rn_(&rn) {}

  int obs_dim() const override { return real_->obs_dim(); }
  int action_count() const override { return real_->action_count(); }
  EnvState reset(std::uint64_t seed) override { return real_->reset(seed); }
  StepResult step(const EnvState& state, int action) override {
    StepResult r = real_->step(state, action);
    Transition t{state.observation, action, r.reward, r.state.observation, r.done, r.truncated};
    r.reward = rn_shape(*rn_, t, r.reward);
    return r;
  }

 private:
  EnvLike* real_;
  const RewardNet* rn_;
};

inline SyntheticEnvAdapter as_env(const SyntheticEnv& se, EnvLike& real_env) { return {se, real_env}; }
inline ShapedEnv as_env(EnvLike& real_env, const RewardNet& rn) { return {real_env, rn}; }

}  // namespace synthlab
