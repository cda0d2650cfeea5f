#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "synthlab/attention.hpp"
#include "synthlab/core.hpp"
#include "synthlab/envs.hpp"
#include "synthlab/neural.hpp"
#include "synthlab/optim.hpp"
#include "synthlab/prior_gen.hpp"

namespace synthlab {

enum class ContextSource { RealEnv, Synthetic };

struct ContextWindow {
  std::vector<Transition> transitions;
  ContextSource source = ContextSource::Synthetic;
  std::uint64_t seed = 0;

  std::size_t size() const noexcept { return transitions.size(); }

  /// Indices of transitions that begin an episode.
  std::vector<std::size_t> episode_starts() const {
    std::vector<std::size_t> starts;
    for (std::size_t i = 0; i < transitions.size(); ++i)
      if (i == 0 || transitions[i - 1].done) starts.push_back(i);
    return starts;
  }
};

struct WorldModelSpec {
  AttentionBlockSpec encoder{32, 4, 2, 1001, 0};
  int state_dim = 2;
  int action_count = 4;
  double reward_loss_weight = 1.0;
  bool position_embedding = true;

  int context_token_dim() const { return 2 * state_dim + action_count + 1; }
  int query_token_dim() const { return state_dim + action_count; }
  int output_dim() const { return state_dim + 1; }

  void validate() const {
    encoder.validate();
    if (state_dim < 1) throw ConfigError("world_model.state_dim", "must be positive");
    if (action_count < 1) throw ConfigError("world_model.action_count", "must be positive");
    if (!(reward_loss_weight >= 0.0)) throw ConfigError("world_model.reward_loss_weight", "must be >= 0");
  }
  bool operator==(const WorldModelSpec&) const = default;
};

/// Parameter layout: context/query token embeddings, position table,
/// attention encoder, then the (next_state ++ reward) head.
inline ParamVector world_model_layout(const WorldModelSpec& spec) {
  const int d = spec.encoder.d_model;
  ParamVector p;
  p.add_segment("embed.context.weight", {d, spec.context_token_dim()});
  p.add_segment("embed.context.bias", {d});
  p.add_segment("embed.query.weight", {d, spec.query_token_dim()});
  p.add_segment("embed.query.bias", {d});
  p.add_segment("embed.position", {spec.encoder.max_sequence, d});
  append_attention_segments(p, spec.encoder, "encoder.");
  p.add_segment("head.weight", {spec.output_dim(), d});
  p.add_segment("head.bias", {spec.output_dim()});
  return p;
}

struct WorldModel {
  WorldModelSpec spec;
  ParamVector params;

  static WorldModel initialize(const WorldModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    WorldModel m{spec, world_model_layout(spec)};
    Random rng(seed);
    auto fill = [&](const std::string& name, double std) {
      for (auto& v : m.params.view(m.params.segment(name))) v = rng.normal(0.0, std);
    };
    fill("embed.context.weight", 1.0 / std::sqrt(static_cast<double>(spec.context_token_dim())));
    fill("embed.query.weight", 1.0 / std::sqrt(static_cast<double>(spec.query_token_dim())));
    if (spec.position_embedding) fill("embed.position", 0.02);
    const auto& enc = m.params.segment("encoder.layer0.wq");
    init_attention_params({m.params.values.data() + enc.offset, attention_param_count(spec.encoder)}, spec.encoder, rng);
    fill("head.weight", 1.0 / std::sqrt(static_cast<double>(spec.encoder.d_model)));
    return m;
  }

  std::span<const double> encoder_params() const {
    const auto& enc = params.segment("encoder.layer0.wq");
    return {params.values.data() + enc.offset, attention_param_count(spec.encoder)};
  }
};

namespace detail {

struct WorldModelOffsets {
  std::size_t ctx_w, ctx_b, q_w, q_b, pos, enc, head_w, head_b;
  explicit WorldModelOffsets(const ParamVector& p)
      : ctx_w(p.segment("embed.context.weight").offset),
        ctx_b(p.segment("embed.context.bias").offset),
        q_w(p.segment("embed.query.weight").offset),
        q_b(p.segment("embed.query.bias").offset),
        pos(p.segment("embed.position").offset),
        enc(p.segment("encoder.layer0.wq").offset),
        head_w(p.segment("head.weight").offset),
        head_b(p.segment("head.bias").offset) {}
};

inline void context_token(const WorldModelSpec& spec, const Transition& t, double* out) {
  const int sd = spec.state_dim;
  for (int i = 0; i < sd; ++i) out[i] = t.state[static_cast<std::size_t>(i)];
  for (int a = 0; a < spec.action_count; ++a) out[sd + a] = a == t.action ? 1.0 : 0.0;
  out[sd + spec.action_count] = t.reward;
  for (int i = 0; i < sd; ++i) out[sd + spec.action_count + 1 + i] = t.next_state[static_cast<std::size_t>(i)];
}

inline void query_token(const WorldModelSpec& spec, std::span<const double> state, int action, double* out) {
  for (int i = 0; i < spec.state_dim; ++i) out[i] = state[static_cast<std::size_t>(i)];
  for (int a = 0; a < spec.action_count; ++a) out[spec.state_dim + a] = a == action ? 1.0 : 0.0;
}

inline void check_transition(const WorldModelSpec& spec, const Transition& t) {
  require(t.state.size() == static_cast<std::size_t>(spec.state_dim) &&
              t.next_state.size() == static_cast<std::size_t>(spec.state_dim),
          "world model: transition state dimension mismatch");
  require(t.action >= 0 && t.action < spec.action_count, "world model: transition action out of range");
}

/// Embedded rows for transitions [0, count) followed by an optional query.
inline void embed_sequence(const WorldModel& m, const WorldModelOffsets& o, std::span<const Transition> context,
                           const std::vector<double>* query_in, Matrix& x) {
  const auto& spec = m.spec;
  const int d = spec.encoder.d_model, cd = spec.context_token_dim(), qd = spec.query_token_dim();
  const int rows = static_cast<int>(context.size()) + (query_in ? 1 : 0);
  x.resize(rows, d);
  const double* P = m.params.values.data();
  std::vector<double> tok(static_cast<std::size_t>(cd));
  for (int i = 0; i < static_cast<int>(context.size()); ++i) {
    context_token(spec, context[static_cast<std::size_t>(i)], tok.data());
    affine(P + o.ctx_w, P + o.ctx_b, tok.data(), cd, d, x.row(i));
  }
  if (query_in) affine(P + o.q_w, P + o.q_b, query_in->data(), qd, d, x.row(rows - 1));
  if (spec.position_embedding)
    for (int i = 0; i < rows; ++i)
      for (int c = 0; c < d; ++c) x.row(i)[c] += P[o.pos + static_cast<std::size_t>(i) * d + c];
}

}  // namespace detail

/// One-step prediction: next_state then reward.
struct Prediction {
  std::vector<double> next_state;
  double reward = 0.0;
};

inline Prediction decode_prediction(const WorldModelSpec& spec, std::span<const double> out) {
  Prediction p;
  p.next_state.assign(out.begin(), out.begin() + spec.state_dim);
  p.reward = out[static_cast<std::size_t>(spec.state_dim)];
  return p;
}

/// Full forward over [context || query]; pure.
inline Prediction wm_step(const WorldModel& model, std::span<const Transition> context,
                          std::span<const double> state, int action) {
  const auto& spec = model.spec;
  require(!context.empty(), "wm_step: empty context");
  if (static_cast<int>(context.size()) + 1 > spec.encoder.max_sequence)
    throw UsageError("wm_step: context longer than max_sequence - 1");
  require(state.size() == static_cast<std::size_t>(spec.state_dim), "wm_step: state dimension mismatch");
  require(action >= 0 && action < spec.action_count, "wm_step: action out of range");
  for (const auto& t : context) detail::check_transition(spec, t);
  detail::WorldModelOffsets o(model.params);
  std::vector<double> q(static_cast<std::size_t>(spec.query_token_dim()));
  detail::query_token(spec, state, action, q.data());
  Matrix x;
  detail::embed_sequence(model, o, context, &q, x);
  AttentionTrace trace;
  attention_forward(spec.encoder, model.encoder_params(), x, trace, true);
  std::vector<double> out(static_cast<std::size_t>(spec.output_dim()));
  const double* P = model.params.values.data();
  detail::affine(P + o.head_w, P + o.head_b, trace.output.row(x.rows - 1), spec.encoder.d_model, spec.output_dim(),
                 out.data());
  return decode_prediction(spec, out);
}

inline Prediction wm_step(const WorldModel& model, const ContextWindow& context, std::span<const double> state,
                          int action) {
  return wm_step(model, std::span<const Transition>(context.transitions), state, action);
}

/// Frozen context with cached keys/values; step() matches wm_step bitwise.
class WorldModelSession {
 public:
  WorldModelSession(const WorldModel& model, std::span<const Transition> context)
      : model_(&model), offsets_(model.params), context_len_(static_cast<int>(context.size())) {
    const auto& spec = model.spec;
    require(!context.empty(), "world model session: empty context");
    if (context_len_ + 1 > spec.encoder.max_sequence)
      throw UsageError("world model session: context longer than max_sequence - 1");
    for (const auto& t : context) detail::check_transition(spec, t);
    Matrix x;
    detail::embed_sequence(model, offsets_, context, nullptr, x);
    cache_ = AttentionCache(spec.encoder, model.encoder_params(), x);
  }

  Prediction step(std::span<const double> state, int action) const {
    const auto& spec = model_->spec;
    require(state.size() == static_cast<std::size_t>(spec.state_dim), "wm step: state dimension mismatch");
    require(action >= 0 && action < spec.action_count, "wm step: action out of range");
    const int d = spec.encoder.d_model;
    const double* P = model_->params.values.data();
    std::vector<double> q(static_cast<std::size_t>(spec.query_token_dim())), x(static_cast<std::size_t>(d));
    detail::query_token(spec, state, action, q.data());
    detail::affine(P + offsets_.q_w, P + offsets_.q_b, q.data(), spec.query_token_dim(), d, x.data());
    if (spec.position_embedding)
      for (int c = 0; c < d; ++c) x[static_cast<std::size_t>(c)] += P[offsets_.pos + static_cast<std::size_t>(context_len_) * d + c];
    auto y = cache_.query(model_->encoder_params(), x);
    std::vector<double> out(static_cast<std::size_t>(spec.output_dim()));
    detail::affine(P + offsets_.head_w, P + offsets_.head_b, y.data(), d, spec.output_dim(), out.data());
    return decode_prediction(spec, out);
  }

 private:
  const WorldModel* model_;
  detail::WorldModelOffsets offsets_;
  int context_len_;
  AttentionCache cache_;
};

// ---------------------------------------------------------------------------
// Loss and gradient.

/// Reusable buffers for one (context, query) example.
struct WorldModelWorkspace {
  Matrix x;
  AttentionTrace trace;
  Matrix d_output;
  Matrix d_input;
  std::vector<double> query;
  std::vector<double> token;
};

/// Loss of one cut-off example: mean squared next-state error plus
/// reward_loss_weight times the squared reward error. Adds
/// `scale * dloss/dparams` into grad when grad is non-empty.
inline double world_model_example_loss(const WorldModel& model, std::span<const Transition> context,
                                       const Transition& target, std::span<double> grad, double scale,
                                       WorldModelWorkspace& ws) {
  const auto& spec = model.spec;
  const int d = spec.encoder.d_model, sd = spec.state_dim, out_dim = spec.output_dim();
  const int cd = spec.context_token_dim(), qd = spec.query_token_dim();
  detail::WorldModelOffsets o(model.params);
  ws.query.resize(static_cast<std::size_t>(qd));
  detail::query_token(spec, target.state, target.action, ws.query.data());
  detail::embed_sequence(model, o, context, &ws.query, ws.x);
  attention_forward(spec.encoder, model.encoder_params(), ws.x, ws.trace, true);
  const int last = ws.x.rows - 1;
  const double* P = model.params.values.data();
  std::vector<double> out(static_cast<std::size_t>(out_dim));
  detail::affine(P + o.head_w, P + o.head_b, ws.trace.output.row(last), d, out_dim, out.data());

  std::vector<double> d_out(static_cast<std::size_t>(out_dim));
  double loss = 0.0;
  for (int i = 0; i < sd; ++i) {
    const double e = out[static_cast<std::size_t>(i)] - target.next_state[static_cast<std::size_t>(i)];
    loss += e * e / sd;
    d_out[static_cast<std::size_t>(i)] = 2.0 * e / sd;
  }
  const double er = out[static_cast<std::size_t>(sd)] - target.reward;
  loss += spec.reward_loss_weight * er * er;
  d_out[static_cast<std::size_t>(sd)] = 2.0 * spec.reward_loss_weight * er;
  if (grad.empty()) return loss;

  for (auto& g : d_out) g *= scale;
  double* G = grad.data();
  const double* y = ws.trace.output.row(last);
  ws.d_output.resize(ws.x.rows, d);
  for (int r = 0; r < out_dim; ++r) {
    G[o.head_b + r] += d_out[static_cast<std::size_t>(r)];
    for (int c = 0; c < d; ++c) {
      G[o.head_w + static_cast<std::size_t>(r) * d + c] += d_out[static_cast<std::size_t>(r)] * y[c];
      ws.d_output.row(last)[c] += d_out[static_cast<std::size_t>(r)] * P[o.head_w + static_cast<std::size_t>(r) * d + c];
    }
  }
  std::span<double> enc_grad(G + o.enc, attention_param_count(spec.encoder));
  attention_backward(spec.encoder, model.encoder_params(), ws.trace, ws.d_output, enc_grad, ws.d_input);

  ws.token.resize(static_cast<std::size_t>(cd));
  for (int i = 0; i <= last; ++i) {
    const double* dx = ws.d_input.row(i);
    if (spec.position_embedding)
      for (int c = 0; c < d; ++c) G[o.pos + static_cast<std::size_t>(i) * d + c] += dx[c];
    const bool is_query = i == last;
    const double* in = is_query ? ws.query.data() : ws.token.data();
    if (!is_query) detail::context_token(spec, context[static_cast<std::size_t>(i)], ws.token.data());
    const int in_dim = is_query ? qd : cd;
    const std::size_t w = is_query ? o.q_w : o.ctx_w, b = is_query ? o.q_b : o.ctx_b;
    for (int r = 0; r < d; ++r) {
      if (dx[r] == 0.0) continue;
      G[b + r] += dx[r];
      for (int c = 0; c < in_dim; ++c) G[w + static_cast<std::size_t>(r) * in_dim + c] += dx[r] * in[c];
    }
  }
  return loss;
}

inline double world_model_example_loss(const WorldModel& model, std::span<const Transition> context,
                                       const Transition& target) {
  WorldModelWorkspace ws;
  return world_model_example_loss(model, context, target, {}, 0.0, ws);
}

// ---------------------------------------------------------------------------
// Training.

struct WorldModelTrainConfig {
  long training_steps = 20000;
  int batch_size = 16;
  double learning_rate = 1e-3;
  // cosine decay to this fraction of learning_rate
  double final_lr_fraction = 0.1;
  long warmup_steps = 200;
  double grad_clip = 1.0;
  int log_interval = 100;
  std::uint64_t seed = 0;

  void validate() const {
    if (training_steps < 0) throw ConfigError("world_model.training_steps", "must be non-negative");
    if (batch_size < 1) throw ConfigError("world_model.batch_size", "must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("world_model.learning_rate", "must be positive");
    if (log_interval < 1) throw ConfigError("world_model.log_interval", "must be positive");
  }
  bool operator==(const WorldModelTrainConfig&) const = default;
};

struct LossPoint {
  long step = 0;
  double loss = 0.0;
};

struct WorldModelTrainResult {
  WorldModel model;
  std::vector<LossPoint> loss_curve;
};

inline double scheduled_lr(const WorldModelTrainConfig& cfg, long step) {
  if (cfg.warmup_steps > 0 && step < cfg.warmup_steps)
    return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(cfg.warmup_steps);
  const double span = static_cast<double>(std::max<long>(1, cfg.training_steps - cfg.warmup_steps));
  const double progress = std::min(1.0, static_cast<double>(step - cfg.warmup_steps) / span);
  const double cosine = 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
  return cfg.learning_rate * (cfg.final_lr_fraction + (1.0 - cfg.final_lr_fraction) * cosine);
}

/// Fresh prior episodes every step (one prior env per batch element),
/// cut-off batches, Adam on the mean example loss.
inline WorldModelTrainResult train_world_model(const PriorConfig& prior, const WorldModelSpec& spec,
                                               const WorldModelTrainConfig& cfg,
                                               const std::function<void(const LossPoint&)>& on_log = {}) {
  prior.validate();
  spec.validate();
  cfg.validate();
  require(prior.state_dim == spec.state_dim && prior.action_count == spec.action_count,
          "train_world_model: prior and model dimensions differ");
  if (prior.episode_length + 1 > spec.encoder.max_sequence)
    throw ConfigError("prior.episode_length", "exceeds the model's max_sequence");
  WorldModelTrainResult res{WorldModel::initialize(spec, derive_seed(cfg.seed, {0x3d})), {}};
  WorldModel& model = res.model;
  Random rng(derive_seed(cfg.seed, {0xda7a}));
  AdamState adam(model.params.size());
  std::vector<double> grad(model.params.size());
  WorldModelWorkspace ws;
  std::vector<std::vector<Transition>> episodes(static_cast<std::size_t>(cfg.batch_size));
  double window = 0.0;
  int window_n = 0;
  for (long step = 0; step < cfg.training_steps; ++step) {
    for (auto& ep : episodes) {
      PriorEnv env = sample_prior_env(prior, rng);
      ep = generate_episode(env, CollectionPolicy::UniformRandom, rng);
    }
    auto batch = build_training_batch(episodes, cfg.batch_size, rng);
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(batch.elements.size());
    for (const auto& el : batch.elements) {
      const auto& ep = episodes[static_cast<std::size_t>(el.episode)];
      loss += scale * world_model_example_loss(model, std::span<const Transition>(ep.data(), static_cast<std::size_t>(el.cutoff)),
                                               ep[static_cast<std::size_t>(el.cutoff)], grad, scale, ws);
    }
    if (!std::isfinite(loss)) throw TrainingError("world model loss is not finite", step);
    for (double g : grad)
      if (!std::isfinite(g)) throw TrainingError("world model gradient is not finite", step);
    if (cfg.grad_clip > 0.0) clip_by_norm(grad, cfg.grad_clip);
    AdamConfig ac;
    ac.learning_rate = scheduled_lr(cfg, step);
    adam_step(model.params.values, grad, adam, ac);
    window += loss;
    ++window_n;
    if ((step + 1) % cfg.log_interval == 0 || step + 1 == cfg.training_steps) {
      LossPoint p{step + 1, window / window_n};
      res.loss_curve.push_back(p);
      if (on_log) on_log(p);
      window = 0.0;
      window_n = 0;
    }
  }
  return res;
}

/// Frozen evaluation corpus: `episodes` prior episodes with one fixed
/// cut-off each.
struct HeldOutCorpus {
  std::vector<std::vector<Transition>> episodes;
  std::vector<int> cutoffs;
};

inline HeldOutCorpus make_heldout_corpus(const PriorConfig& prior, int episodes, std::uint64_t seed) {
  HeldOutCorpus c;
  Random rng(seed);
  for (int i = 0; i < episodes; ++i) {
    PriorEnv env = sample_prior_env(prior, rng);
    c.episodes.push_back(generate_episode(env, CollectionPolicy::UniformRandom, rng));
  }
  for (int i = 0; i < episodes; ++i) {
    const int len = static_cast<int>(c.episodes[static_cast<std::size_t>(i)].size());
    c.cutoffs.push_back(len >= 2 ? static_cast<int>(rng.between(1, len - 1)) : 0);
  }
  return c;
}

/// Mean squared error over all (next_state ++ reward) outputs.
inline double heldout_mse(const WorldModel& model, const HeldOutCorpus& corpus) {
  double total = 0.0;
  long n = 0;
  for (std::size_t i = 0; i < corpus.episodes.size(); ++i) {
    const int k = corpus.cutoffs[i];
    if (k < 1) continue;
    const auto& ep = corpus.episodes[i];
    const auto& target = ep[static_cast<std::size_t>(k)];
    auto p = wm_step(model, std::span<const Transition>(ep.data(), static_cast<std::size_t>(k)), target.state,
                     target.action);
    double se = 0.0;
    for (std::size_t j = 0; j < p.next_state.size(); ++j) se += std::pow(p.next_state[j] - target.next_state[j], 2);
    se += std::pow(p.reward - target.reward, 2);
    total += se / static_cast<double>(p.next_state.size() + 1);
    ++n;
  }
  return n ? total / static_cast<double>(n) : 0.0;
}

// ---------------------------------------------------------------------------
// Real-environment adaptation and simulation.

/// Uniform-random rollouts in the real env until exactly n transitions are
/// collected. These are the only real steps the pipeline takes.
inline ContextWindow adapt(const WorldModel& model, EnvLike& real_env, int n, std::uint64_t seed) {
  require(n >= 1, "adapt: n must be >= 1");
  require(real_env.obs_dim() == model.spec.state_dim && real_env.action_count() == model.spec.action_count,
          "adapt: environment does not match the model dimensions");
  if (n + 1 > model.spec.encoder.max_sequence) throw UsageError("adapt: n exceeds max_sequence - 1");
  ContextWindow ctx;
  ctx.source = ContextSource::RealEnv;
  ctx.seed = seed;
  Random rng(derive_seed(seed, {0xad}));
  std::uint64_t episode = 0;
  EnvState state = real_env.reset(derive_seed(seed, {0xe9, episode}));
  while (static_cast<int>(ctx.transitions.size()) < n) {
    const int a = rng.index(real_env.action_count());
    StepResult r = real_env.step(state, a);
    ctx.transitions.push_back({state.observation, a, r.reward, r.state.observation, r.done, r.truncated});
    if (r.done) {
      ++episode;
      if (static_cast<int>(ctx.transitions.size()) < n) state = real_env.reset(derive_seed(seed, {0xe9, episode}));
    } else {
      state = std::move(r.state);
    }
  }
  return ctx;
}

struct SimulationOptions {
  // GridWorld: replace each predicted state by its nearest cell
  bool snap_to_grid = true;
  // CartPole: end episodes when the predicted state leaves the track/angle bounds
  bool cartpole_bounds = true;
};

/// The world model plus a frozen context as an environment. It holds no
/// reference to any real environment.
class SimulatedEnv final : public EnvLike {
 public:
  SimulatedEnv(const WorldModel& model, ContextWindow context, EnvSpec target, SimulationOptions opts = {})
      : model_(&model), context_(std::move(context)), target_(target), opts_(opts) {
    require(model.spec.state_dim == target.obs_dim && model.spec.action_count == target.action_count,
            "as_simulated_env: target spec does not match the model");
    for (auto i : context_.episode_starts()) starts_.push_back(context_.transitions[i].state);
    session_ = std::make_unique<WorldModelSession>(model, context_.transitions);
  }

  int obs_dim() const override { return target_.obs_dim; }
  int action_count() const override { return target_.action_count; }

  EnvState reset(std::uint64_t seed) override {
    Random rng(derive_seed(seed, {0x51a}));
    return EnvState{starts_[static_cast<std::size_t>(rng.index(static_cast<int>(starts_.size())))], 0, false};
  }

  StepResult step(const EnvState& state, int action) override {
    require(!state.terminated, "simulated env: episode already ended");
    require(action >= 0 && action < target_.action_count, "simulated env: action out of range");
    ++steps_;
    Prediction p = session_->step(state.observation, action);
    StepResult r;
    r.reward = p.reward;
    r.state.observation = std::move(p.next_state);
    r.state.step_index = state.step_index + 1;
    bool terminal = false;
    if (target_.kind == EnvKind::GridWorld) {
      const Env grid(target_);
      auto [row, col] = grid.cell_of(r.state.observation);
      if (opts_.snap_to_grid) r.state.observation = grid.observation_of(row, col);
      terminal = row == target_.grid_size - 1 && col == target_.grid_size - 1;
    } else if (target_.kind == EnvKind::CartPole && opts_.cartpole_bounds) {
      terminal = cartpole::out_of_bounds(r.state.observation);
    }
    const bool time_limit = r.state.step_index >= target_.horizon;
    r.done = terminal || time_limit;
    r.truncated = time_limit && !terminal;
    r.state.terminated = r.done;
    return r;
  }

  const ContextWindow& context() const noexcept { return context_; }
  const std::vector<std::vector<double>>& start_states() const noexcept { return starts_; }
  long steps() const noexcept { return steps_; }

 private:
  const WorldModel* model_;
  ContextWindow context_;
  EnvSpec target_;
  SimulationOptions opts_;
  std::vector<std::vector<double>> starts_;
  std::unique_ptr<WorldModelSession> session_;
  long steps_ = 0;
};

inline SimulatedEnv as_simulated_env(const WorldModel& model, ContextWindow context, const EnvSpec& target,
                                     SimulationOptions opts = {}) {
  return SimulatedEnv(model, std::move(context), target, opts);
}

}  // namespace synthlab
