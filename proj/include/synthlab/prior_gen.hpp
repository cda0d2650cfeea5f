#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "synthlab/core.hpp"
#include "synthlab/neural.hpp"

namespace synthlab {

/// Overrides applied on top of the base PriorConfig when a mixture
/// component is picked.
struct PriorComponent {
  double weight = 1.0;
  std::optional<int> hidden_min;
  std::optional<int> hidden_max;
  std::optional<std::vector<Activation>> activation_pool;
  std::optional<double> weight_scale_min;
  std::optional<double> weight_scale_max;
  std::optional<double> transition_noise_std;
  std::optional<double> reward_sparsity;

  bool operator==(const PriorComponent&) const = default;
};

struct PriorConfig {
  int state_dim = 2;
  int action_count = 4;
  int hidden_min = 4;
  int hidden_max = 32;
  std::vector<Activation> activation_pool = {Activation::Tanh, Activation::ReLU, Activation::Sigmoid};
  double weight_scale_min = 0.5;
  double weight_scale_max = 2.0;
  int episode_length = 100;
  double transition_noise_std = 0.01;
  double reward_sparsity = 0.3;
  // empty means a single component equal to the base fields
  std::vector<PriorComponent> mixture;
  std::uint64_t seed = 0;

  PriorConfig resolve(const PriorComponent& c) const {
    PriorConfig r = *this;
    r.mixture.clear();
    if (c.hidden_min) r.hidden_min = *c.hidden_min;
    if (c.hidden_max) r.hidden_max = *c.hidden_max;
    if (c.activation_pool) r.activation_pool = *c.activation_pool;
    if (c.weight_scale_min) r.weight_scale_min = *c.weight_scale_min;
    if (c.weight_scale_max) r.weight_scale_max = *c.weight_scale_max;
    if (c.transition_noise_std) r.transition_noise_std = *c.transition_noise_std;
    if (c.reward_sparsity) r.reward_sparsity = *c.reward_sparsity;
    return r;
  }

  void validate() const {
    if (state_dim < 1) throw ConfigError("prior.state_dim", "must be positive");
    if (action_count < 1) throw ConfigError("prior.action_count", "must be positive");
    if (episode_length < 1) throw ConfigError("prior.episode_length", "must be positive");
    auto check = [](const PriorConfig& c) {
      if (c.hidden_min < 1 || c.hidden_max < c.hidden_min)
        throw ConfigError("prior.hidden_units_range", "need 1 <= min <= max");
      if (c.activation_pool.empty()) throw ConfigError("prior.activation_pool", "must not be empty");
      if (!(c.weight_scale_min >= 0.0 && c.weight_scale_max >= c.weight_scale_min))
        throw ConfigError("prior.weight_scale_range", "need 0 <= min <= max");
      if (!(c.transition_noise_std >= 0.0)) throw ConfigError("prior.transition_noise_std", "must be >= 0");
      if (!(c.reward_sparsity >= 0.0 && c.reward_sparsity <= 1.0))
        throw ConfigError("prior.reward_sparsity", "must lie in [0, 1]");
    };
    check(*this);
    if (!mixture.empty()) {
      double total = 0.0;
      for (const auto& c : mixture) {
        if (!(c.weight >= 0.0)) throw ConfigError("prior.mixture", "weights must be non-negative");
        total += c.weight;
        check(resolve(c));
      }
      if (std::abs(total - 1.0) > 1e-9) throw ConfigError("prior.mixture", "weights must sum to 1");
    }
  }
  bool operator==(const PriorConfig&) const = default;
};

/// A randomly initialised environment: one dynamics net per state dimension
/// plus a reward net, all reading (state ++ onehot(action)).
struct PriorEnv {
  std::vector<Mlp> dynamics;
  Mlp reward_net;
  int state_dim = 0;
  int action_count = 0;
  int episode_length = 0;
  double transition_noise_std = 0.0;
  bool sparse_reward = false;
  double reward_threshold = 0.0;
  int component = 0;

  std::vector<double> next_state_mean(std::span<const double> state, int action) const {
    std::vector<double> in(state.begin(), state.end());
    in.resize(state.size() + static_cast<std::size_t>(action_count), 0.0);
    in[state.size() + static_cast<std::size_t>(action)] = 1.0;
    std::vector<double> out(static_cast<std::size_t>(state_dim));
    for (int d = 0; d < state_dim; ++d) out[static_cast<std::size_t>(d)] = dynamics[static_cast<std::size_t>(d)].forward(in)[0];
    return out;
  }

  double raw_reward(std::span<const double> state, int action) const {
    std::vector<double> in(state.begin(), state.end());
    in.resize(state.size() + static_cast<std::size_t>(action_count), 0.0);
    in[state.size() + static_cast<std::size_t>(action)] = 1.0;
    return reward_net.forward(in)[0];
  }

  double reward(std::span<const double> state, int action) const {
    const double r = raw_reward(state, action);
    if (!sparse_reward) return r;
    return r >= reward_threshold ? 1.0 : 0.0;
  }
};

namespace detail {

inline Mlp random_depth1_net(int in, int hidden, int out, Activation act, double scale, Random& rng) {
  auto layers = dense_stack(in, std::vector<int>{hidden}, out, act, Activation::Linear);
  ParamVector p = zero_params(layers);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const double w_std = scale / std::sqrt(static_cast<double>(layers[i].in_dim));
    for (auto& w : p.view(p.manifest[2 * i])) w = rng.normal(0.0, w_std);
    for (auto& b : p.view(p.manifest[2 * i + 1])) b = rng.normal(0.0, 0.5 * scale);
  }
  return Mlp(std::move(layers), std::move(p));
}

inline std::vector<double> squashed_gaussian(int dim, Random& rng) {
  std::vector<double> s(static_cast<std::size_t>(dim));
  for (auto& v : s) v = std::tanh(rng.normal());
  return s;
}

}  // namespace detail

inline int pick_component(const PriorConfig& cfg, Random& rng) {
  if (cfg.mixture.size() <= 1) return 0;
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < cfg.mixture.size(); ++i) {
    acc += cfg.mixture[i].weight;
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(cfg.mixture.size()) - 1;
}

inline PriorEnv sample_prior_env(const PriorConfig& cfg, Random& rng) {
  PriorEnv env;
  env.component = pick_component(cfg, rng);
  const PriorConfig c = cfg.mixture.empty() ? cfg : cfg.resolve(cfg.mixture[static_cast<std::size_t>(env.component)]);
  env.state_dim = c.state_dim;
  env.action_count = c.action_count;
  env.episode_length = c.episode_length;
  env.transition_noise_std = c.transition_noise_std;
  const int in = c.state_dim + c.action_count;
  auto draw_net = [&] {
    const int hidden = static_cast<int>(rng.between(c.hidden_min, c.hidden_max));
    const Activation act = c.activation_pool[rng.index(static_cast<int>(c.activation_pool.size()))];
    const double scale = rng.uniform(c.weight_scale_min, c.weight_scale_max);
    return detail::random_depth1_net(in, hidden, 1, act, scale, rng);
  };
  for (int d = 0; d < c.state_dim; ++d) env.dynamics.push_back(draw_net());
  env.reward_net = draw_net();
  env.sparse_reward = rng.uniform() < c.reward_sparsity;
  if (env.sparse_reward) {
    // 90th percentile of the reward net over start-distribution states
    std::vector<double> samples(1024);
    for (auto& s : samples) {
      auto state = detail::squashed_gaussian(c.state_dim, rng);
      s = env.raw_reward(state, rng.index(c.action_count));
    }
    std::sort(samples.begin(), samples.end());
    env.reward_threshold = samples[static_cast<std::size_t>(0.9 * static_cast<double>(samples.size()))];
  }
  return env;
}

enum class CollectionPolicy { UniformRandom };

/// One episode under the collection policy. States start at tanh(N(0, I))
/// and every next state is squashed through tanh.
inline std::vector<Transition> generate_episode(const PriorEnv& env, CollectionPolicy policy, Random& rng) {
  (void)policy;
  std::vector<Transition> episode;
  episode.reserve(static_cast<std::size_t>(env.episode_length));
  auto state = detail::squashed_gaussian(env.state_dim, rng);
  for (int t = 0; t < env.episode_length; ++t) {
    const int a = rng.index(env.action_count);
    auto next = env.next_state_mean(state, a);
    for (auto& v : next) {
      if (env.transition_noise_std > 0.0) v += rng.normal(0.0, env.transition_noise_std);
      v = std::tanh(v);
    }
    Transition tr;
    tr.reward = env.reward(state, a);
    tr.state = state;
    tr.action = a;
    tr.next_state = next;
    tr.done = t + 1 == env.episode_length;
    tr.truncated = tr.done;
    episode.push_back(std::move(tr));
    state = std::move(next);
  }
  return episode;
}

/// Cut-off sample: context is episode[0, cutoff), the query/target is
/// episode[cutoff].
struct BatchElement {
  int episode = 0;
  int cutoff = 0;
};

struct TrainingBatch {
  std::vector<BatchElement> elements;
  int skipped_episodes = 0;
};

inline TrainingBatch build_training_batch(const std::vector<std::vector<Transition>>& episodes, int batch_size,
                                          Random& rng) {
  TrainingBatch batch;
  std::vector<int> usable;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    if (episodes[i].size() >= 2)
      usable.push_back(static_cast<int>(i));
    else
      ++batch.skipped_episodes;
  }
  require(!usable.empty(), "build_training_batch: no episode has length >= 2");
  for (int b = 0; b < batch_size; ++b) {
    const int e = usable[static_cast<std::size_t>(rng.index(static_cast<int>(usable.size())))];
    const int len = static_cast<int>(episodes[static_cast<std::size_t>(e)].size());
    batch.elements.push_back({e, static_cast<int>(rng.between(1, len - 1))});
  }
  return batch;
}

}  // namespace synthlab
