#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "synthlab/core.hpp"
#include "synthlab/envs.hpp"
#include "synthlab/neural.hpp"
#include "synthlab/optim.hpp"

namespace synthlab {

enum class Algorithm { DDQN, REINFORCE };

inline std::string to_string(Algorithm a) { return a == Algorithm::DDQN ? "DDQN" : "REINFORCE"; }
inline Algorithm algorithm_from_string(const std::string& s) {
  if (s == "DDQN") return Algorithm::DDQN;
  if (s == "REINFORCE") return Algorithm::REINFORCE;
  throw ConfigError("agent.algorithm", "unknown algorithm '" + s + "'");
}

struct AgentConfig {
  Algorithm algorithm = Algorithm::DDQN;
  double gamma = 0.99;
  double learning_rate = 1e-3;
  // DDQN exploration and replay
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  long epsilon_decay_steps = 10000;
  int buffer_capacity = 50000;
  int batch_size = 64;
  int target_sync_interval = 500;
  long learning_starts = 1000;
  int train_frequency = 1;
  // gradient updates performed each time training triggers
  int gradient_steps = 1;
  bool huber_loss = true;
  double grad_clip = 10.0;
  // network
  std::vector<int> hidden_sizes = {64, 64};
  Activation hidden_activation = Activation::ReLU;
  // REINFORCE: episodes collected per policy-gradient update
  int episodes_per_update = 4;
  long train_budget_steps = 50000;
  // 0 means train_budget_steps / 20
  long eval_interval = 0;
  int eval_episodes = 10;
  // Return the best periodically evaluated snapshot instead of the final
  // policy. Only meaningful when an evaluator is supplied.
  bool keep_best = false;
  std::uint64_t seed = 0;

  long effective_eval_interval() const {
    if (eval_interval > 0) return eval_interval;
    return std::max<long>(1, train_budget_steps / 20);
  }

  void validate() const {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("agent.gamma", "must lie in (0, 1]");
    if (!(learning_rate > 0.0)) throw ConfigError("agent.learning_rate", "must be positive");
    if (!(epsilon_end <= epsilon_start && epsilon_start <= 1.0 && epsilon_end >= 0.0))
      throw ConfigError("agent.epsilon_start", "need 0 <= epsilon_end <= epsilon_start <= 1");
    if (epsilon_decay_steps < 0) throw ConfigError("agent.epsilon_decay_steps", "must be non-negative");
    if (buffer_capacity < 1) throw ConfigError("agent.buffer_capacity", "must be positive");
    if (batch_size < 1) throw ConfigError("agent.batch_size", "must be positive");
    if (batch_size > buffer_capacity) throw ConfigError("agent.batch_size", "must not exceed buffer_capacity");
    if (target_sync_interval < 1) throw ConfigError("agent.target_sync_interval", "must be positive");
    if (train_frequency < 1) throw ConfigError("agent.train_frequency", "must be positive");
    if (gradient_steps < 1) throw ConfigError("agent.gradient_steps", "must be positive");
    if (episodes_per_update < 1) throw ConfigError("agent.episodes_per_update", "must be positive");
    if (train_budget_steps < 0) throw ConfigError("agent.train_budget_steps", "must be non-negative");
    if (eval_episodes < 1) throw ConfigError("agent.eval_episodes", "must be positive");
    for (int h : hidden_sizes)
      if (h < 1) throw ConfigError("agent.hidden_sizes", "must be positive");
  }

  bool operator==(const AgentConfig&) const = default;
};

/// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(int capacity) : capacity_(static_cast<std::size_t>(capacity)) {
    require(capacity > 0, "replay buffer capacity must be positive");
    entries_.reserve(std::min<std::size_t>(capacity_, 1 << 16));
  }

  void push(Transition t) {
    if (entries_.size() < capacity_) {
      entries_.push_back(std::move(t));
    } else {
      entries_[head_] = std::move(t);
      head_ = (head_ + 1) % capacity_;
    }
  }

  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }

  /// i-th oldest entry.
  const Transition& at(std::size_t i) const { return entries_[(head_ + i) % entries_.size()]; }

  const Transition& sample(Random& rng) const {
    return entries_[static_cast<std::size_t>(rng.index(static_cast<int>(entries_.size())))];
  }

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;
  std::vector<Transition> entries_;
};

/// Linear decay from start to end over decay_steps, then constant.
inline double epsilon_at(const AgentConfig& cfg, long step) {
  if (step >= cfg.epsilon_decay_steps) return cfg.epsilon_end;
  const double frac = static_cast<double>(step) / static_cast<double>(cfg.epsilon_decay_steps);
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

inline int act_epsilon_greedy(const Mlp& qnet, std::span<const double> observation, double epsilon, Random& rng) {
  require(epsilon >= 0.0 && epsilon <= 1.0, "epsilon must lie in [0, 1]");
  const double u = rng.uniform();
  if (u < epsilon) return rng.index(qnet.out_dim());
  return argmax(qnet.forward(observation));
}

/// Double DQN target: the online net picks the action, the target net values it.
inline double ddqn_td_target(double reward, bool done, double gamma, const Mlp& qnet, const Mlp& target_net,
                             std::span<const double> next_state) {
  if (done) return reward;
  const int a = argmax(qnet.forward(next_state));
  return reward + gamma * target_net.forward(next_state)[static_cast<std::size_t>(a)];
}

struct Policy {
  Algorithm algorithm = Algorithm::DDQN;
  Mlp net;

  /// Greedy action: argmax of Q-values or of action probabilities.
  int act(std::span<const double> observation) const { return argmax(net.forward(observation)); }
};

struct CurvePoint {
  long env_steps = 0;
  double eval_return = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

struct LearningCurve {
  std::vector<CurvePoint> points;
  bool operator==(const LearningCurve&) const = default;
};

inline double run_episode(const Policy& policy, EnvLike& env, std::uint64_t seed) {
  EnvState s = env.reset(seed);
  double total = 0.0;
  while (true) {
    StepResult r = env.step(s, policy.act(s.observation));
    total += r.reward;
    if (r.done) break;
    s = std::move(r.state);
  }
  return total;
}

/// Mean undiscounted greedy return over `episodes` rollouts.
inline double evaluate_policy(const Policy& policy, EnvLike& env, int episodes, std::uint64_t seed) {
  require(episodes >= 1, "evaluate_policy: need at least one episode");
  double sum = 0.0;
  for (int e = 0; e < episodes; ++e) sum += run_episode(policy, env, derive_seed(seed, {static_cast<std::uint64_t>(e)}));
  return sum / episodes;
}

// ---------------------------------------------------------------------------
// REINFORCE

using Episode = std::vector<Transition>;

enum class Baseline { BatchMean, None };

/// Advantages per step: discounted return-to-go minus the batch mean.
inline std::vector<std::vector<double>> reinforce_advantages(std::span<const Episode> episodes, double gamma,
                                                             Baseline baseline) {
  std::vector<std::vector<double>> adv;
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& ep : episodes) {
    if (ep.empty()) throw UsageError("reinforce: zero-length episode");
    std::vector<double> g(ep.size());
    double running = 0.0;
    for (std::size_t t = ep.size(); t-- > 0;) {
      running = ep[t].reward + gamma * running;
      g[t] = running;
    }
    for (double v : g) sum += v;
    n += g.size();
    adv.push_back(std::move(g));
  }
  if (baseline == Baseline::BatchMean) {
    const double mean = sum / static_cast<double>(n);
    for (auto& g : adv)
      for (auto& v : g) v -= mean;
  }
  return adv;
}

/// Surrogate objective J = (1/N) sum_t A_t log pi(a_t | s_t) with A held fixed.
inline double reinforce_surrogate(std::span<const Episode> episodes, const Mlp& policy_net, double gamma,
                                  Baseline baseline = Baseline::BatchMean) {
  auto adv = reinforce_advantages(episodes, gamma, baseline);
  double j = 0.0;
  std::size_t n = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e)
    for (std::size_t t = 0; t < episodes[e].size(); ++t) {
      auto lp = log_softmax(policy_net.forward(episodes[e][t].state));
      j += adv[e][t] * lp[static_cast<std::size_t>(episodes[e][t].action)];
      ++n;
    }
  return j / static_cast<double>(n);
}

/// Gradient of the surrogate objective (ascent direction).
inline ParamVector reinforce_gradient(std::span<const Episode> episodes, const Mlp& policy_net, double gamma,
                                      Baseline baseline = Baseline::BatchMean) {
  require(!episodes.empty(), "reinforce: no episodes");
  auto adv = reinforce_advantages(episodes, gamma, baseline);
  ParamVector grad = policy_net.params().zeros_like();
  MlpTrace trace;
  std::vector<double> upstream(static_cast<std::size_t>(policy_net.out_dim()));
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t e = 0; e < episodes.size(); ++e)
    for (std::size_t t = 0; t < episodes[e].size(); ++t) {
      const double a = adv[e][t];
      if (a == 0.0) continue;
      policy_net.forward(episodes[e][t].state, trace);
      auto p = softmax(trace.outputs.back());
      // d log pi(a) / d logits = onehot(a) - p
      for (std::size_t k = 0; k < p.size(); ++k)
        upstream[k] = a * inv_n * ((static_cast<int>(k) == episodes[e][t].action ? 1.0 : 0.0) - p[k]);
      policy_net.backward(trace, upstream, grad.values);
    }
  return grad;
}

/// One plain gradient-ascent step on the surrogate objective.
inline Mlp reinforce_update(std::span<const Episode> episodes, Mlp policy_net, double gamma, double learning_rate,
                            Baseline baseline = Baseline::BatchMean) {
  ParamVector g = reinforce_gradient(episodes, policy_net, gamma, baseline);
  for (auto& v : g.values) v = -v;
  sgd_step(policy_net.values(), g.values, learning_rate);
  return policy_net;
}

// ---------------------------------------------------------------------------
// Training

struct TrainResult {
  Policy policy;
  LearningCurve curve;
  long env_steps = 0;
  long updates = 0;
};

namespace detail {

class CurveRecorder {
 public:
  CurveRecorder(const AgentConfig& cfg, EnvLike* evaluator)
      : interval_(cfg.effective_eval_interval()),
        episodes_(cfg.eval_episodes),
        seed_(derive_seed(cfg.seed, {0xe7a1})),
        evaluator_(evaluator) {}

  void maybe_record(long steps_done, const Policy& policy, LearningCurve& curve) {
    if (!evaluator_ || steps_done % interval_ != 0) return;
    const double ret = evaluate_policy(policy, *evaluator_, episodes_, seed_);
    curve.points.push_back({steps_done, ret});
    if (!best_ || ret > best_return_) {
      best_ = policy;
      best_return_ = ret;
    }
  }

  const std::optional<Policy>& best() const { return best_; }

 private:
  long interval_;
  int episodes_;
  std::uint64_t seed_;
  EnvLike* evaluator_;
  std::optional<Policy> best_;
  double best_return_ = 0.0;
};

inline TrainResult train_ddqn(EnvLike& env, const AgentConfig& cfg, EnvLike* evaluator) {
  auto layers = dense_stack(env.obs_dim(), cfg.hidden_sizes, env.action_count(), cfg.hidden_activation);
  TrainResult result;
  result.policy = Policy{Algorithm::DDQN, Mlp(layers, derive_seed(cfg.seed, {0x9e7}))};
  Mlp& online = result.policy.net;
  Mlp target = online;
  ReplayBuffer buffer(cfg.buffer_capacity);
  Random rng(derive_seed(cfg.seed, {0xac7}));
  AdamState adam;
  AdamConfig adam_cfg{cfg.learning_rate};
  CurveRecorder recorder(cfg, evaluator);

  std::vector<double> grad(online.size());
  MlpTrace trace, next_trace, target_trace;
  std::vector<double> upstream(static_cast<std::size_t>(env.action_count()));
  std::uint64_t episode = 0;
  EnvState state = env.reset(derive_seed(cfg.seed, {0xe9, episode}));

  for (long step = 0; step < cfg.train_budget_steps; ++step) {
    const int action = act_epsilon_greedy(online, state.observation, epsilon_at(cfg, step), rng);
    StepResult r = env.step(state, action);
    buffer.push(Transition{state.observation, action, r.reward, r.state.observation, r.done, r.truncated});
    if (r.done) {
      ++episode;
      state = env.reset(derive_seed(cfg.seed, {0xe9, episode}));
    } else {
      state = std::move(r.state);
    }

    if (step + 1 >= cfg.learning_starts && buffer.size() >= static_cast<std::size_t>(cfg.batch_size) &&
        (step + 1) % cfg.train_frequency == 0) {
      for (int gs = 0; gs < cfg.gradient_steps; ++gs) {
      std::fill(grad.begin(), grad.end(), 0.0);
      double loss = 0.0;
      const double inv_b = 1.0 / cfg.batch_size;
      for (int b = 0; b < cfg.batch_size; ++b) {
        const Transition& t = buffer.sample(rng);
        double y = t.reward;
        if (!t.terminal()) {
          online.forward(t.next_state, next_trace);
          target.forward(t.next_state, target_trace);
          y += cfg.gamma * target_trace.output()[static_cast<std::size_t>(argmax(next_trace.output()))];
        }
        online.forward(t.state, trace);
        const double q = trace.outputs.back()[static_cast<std::size_t>(t.action)];
        double dq = 0.0;
        if (cfg.huber_loss) {
          loss += huber_loss(q, y, dq);
        } else {
          loss += 0.5 * (q - y) * (q - y);
          dq = q - y;
        }
        std::fill(upstream.begin(), upstream.end(), 0.0);
        upstream[static_cast<std::size_t>(t.action)] = dq * inv_b;
        online.backward(trace, upstream, grad);
      }
      if (!std::isfinite(loss)) throw TrainingError("DDQN loss diverged", step);
      clip_by_norm(grad, cfg.grad_clip);
      try {
        adam_step(online.values(), grad, adam, adam_cfg);
      } catch (const NumericError&) {
        throw TrainingError("DDQN gradient diverged", step);
      }
      ++result.updates;
      }
    }
    if ((step + 1) % cfg.target_sync_interval == 0) target.load(online.values());
    recorder.maybe_record(step + 1, result.policy, result.curve);
  }
  result.env_steps = cfg.train_budget_steps;
  if (cfg.keep_best && recorder.best()) result.policy = *recorder.best();
  return result;
}

inline int sample_action(const Mlp& policy_net, std::span<const double> obs, Random& rng) {
  auto p = softmax(policy_net.forward(obs));
  double u = rng.uniform(), acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    acc += p[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(p.size()) - 1;
}

inline TrainResult train_reinforce(EnvLike& env, const AgentConfig& cfg, EnvLike* evaluator) {
  auto layers = dense_stack(env.obs_dim(), cfg.hidden_sizes, env.action_count(), cfg.hidden_activation);
  TrainResult result;
  result.policy = Policy{Algorithm::REINFORCE, Mlp(layers, derive_seed(cfg.seed, {0x9e7}))};
  Mlp& net = result.policy.net;
  Random rng(derive_seed(cfg.seed, {0xac7}));
  AdamState adam;
  AdamConfig adam_cfg{cfg.learning_rate};
  CurveRecorder recorder(cfg, evaluator);

  std::vector<Episode> batch;
  Episode current;
  std::uint64_t episode = 0;
  EnvState state = env.reset(derive_seed(cfg.seed, {0xe9, episode}));

  auto update = [&](long step) {
    if (batch.empty()) return;
    ParamVector g = reinforce_gradient(batch, net, cfg.gamma);
    for (auto& v : g.values) v = -v;
    clip_by_norm(g.values, cfg.grad_clip);
    try {
      adam_step(net.values(), g.values, adam, adam_cfg);
    } catch (const NumericError&) {
      throw TrainingError("REINFORCE gradient diverged", step);
    }
    ++result.updates;
    batch.clear();
  };

  for (long step = 0; step < cfg.train_budget_steps; ++step) {
    const int action = sample_action(net, state.observation, rng);
    StepResult r = env.step(state, action);
    if (!std::isfinite(r.reward)) throw TrainingError("non-finite reward", step);
    current.push_back(Transition{state.observation, action, r.reward, r.state.observation, r.done, r.truncated});
    if (r.done) {
      batch.push_back(std::move(current));
      current.clear();
      ++episode;
      state = env.reset(derive_seed(cfg.seed, {0xe9, episode}));
      if (static_cast<int>(batch.size()) >= cfg.episodes_per_update) update(step);
    } else {
      state = std::move(r.state);
    }
    if (step + 1 == cfg.train_budget_steps) {
      if (!current.empty()) batch.push_back(std::move(current));
      update(step);
    }
    recorder.maybe_record(step + 1, result.policy, result.curve);
  }
  result.env_steps = cfg.train_budget_steps;
  if (cfg.keep_best && recorder.best()) result.policy = *recorder.best();
  return result;
}

}  // namespace detail

/// Trains a fresh agent for exactly cfg.train_budget_steps steps of `env`.
/// When `evaluator` is given, greedy returns on it are recorded every
/// eval interval.
inline TrainResult train_agent(EnvLike& env, const AgentConfig& cfg, EnvLike* evaluator = nullptr) {
  cfg.validate();
  if (cfg.algorithm == Algorithm::DDQN) return detail::train_ddqn(env, cfg, evaluator);
  return detail::train_reinforce(env, cfg, evaluator);
}

}  // namespace synthlab
