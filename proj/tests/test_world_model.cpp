#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "synthlab/agents.hpp"
#include "synthlab/world_model.hpp"
#include "test_util.hpp"

using namespace synthlab;

namespace {

WorldModelSpec small_spec(int d_model = 16, int layers = 2) {
  WorldModelSpec s;
  s.encoder = AttentionBlockSpec{d_model, 4, layers, 1001, 0};
  s.state_dim = 2;
  s.action_count = 4;
  return s;
}

PriorConfig small_prior(int length = 20) {
  PriorConfig p;
  p.episode_length = length;
  return p;
}

std::vector<Transition> prior_episode(std::uint64_t seed, int length = 20) {
  Random rng(seed);
  auto env = sample_prior_env(small_prior(length), rng);
  return generate_episode(env, CollectionPolicy::UniformRandom, rng);
}

// Briefly trained model shared by the order and context probes.
const WorldModel& trained_model() {
  static const WorldModel model = [] {
    WorldModelTrainConfig cfg;
    cfg.training_steps = 150;
    cfg.batch_size = 8;
    cfg.learning_rate = 3e-3;
    cfg.warmup_steps = 10;
    cfg.seed = 4;
    return train_world_model(small_prior(), small_spec(), cfg).model;
  }();
  return model;
}

}  // namespace

TEST(WorldModelSpecTest, TokenDimensions) {
  auto s = small_spec();
  EXPECT_EQ(s.context_token_dim(), 2 + 4 + 1 + 2);
  EXPECT_EQ(s.query_token_dim(), 6);
  EXPECT_EQ(s.output_dim(), 3);
  auto m = WorldModel::initialize(s, 1);
  m.params.validate();
  EXPECT_EQ(m.params.segment("head.weight").shape, (std::vector<int>{3, 16}));
}

TEST(WorldModelGradient, MatchesFiniteDifferencesOnTwoTokens) {
  auto model = WorldModel::initialize(small_spec(16), 7);
  // perturb the zero-initialised biases so every path carries gradient
  Random rng(8);
  for (auto& v : model.params.values)
    if (v == 0.0) v = 0.05 * rng.normal();
  auto ep = prior_episode(3, 5);
  std::span<const Transition> ctx(ep.data(), 1);
  const Transition& target = ep[1];

  std::vector<double> grad(model.params.size(), 0.0);
  WorldModelWorkspace ws;
  world_model_example_loss(model, ctx, target, grad, 1.0, ws);

  std::vector<std::size_t> coords;
  for (const auto& seg : model.params.manifest) {
    std::size_t n = seg.size();
    // only the first two position rows are in use
    if (seg.name == "embed.position") n = 2 * 16;
    const std::size_t stride = std::max<std::size_t>(1, n / 20);
    for (std::size_t i = 0; i < n; i += stride) coords.push_back(seg.offset + i);
  }
  const double err = synthlab::testing::max_fd_error(
      model.params.values, grad,
      [&](const std::vector<double>& v) {
        WorldModel m = model;
        m.params.values = v;
        return world_model_example_loss(m, ctx, target);
      },
      1e-5, coords);
  EXPECT_LT(err, 1e-4);

  // unused position rows receive no gradient
  const auto& pos = model.params.segment("embed.position");
  for (std::size_t i = 2 * 16; i < pos.size(); ++i) ASSERT_EQ(grad[pos.offset + i], 0.0);
}

TEST(WorldModelGradient, LossIsWeightedMse) {
  auto model = WorldModel::initialize(small_spec(), 2);
  auto ep = prior_episode(5);
  std::span<const Transition> ctx(ep.data(), 4);
  const auto& t = ep[4];
  auto p = wm_step(model, ctx, t.state, t.action);
  const double ds = (std::pow(p.next_state[0] - t.next_state[0], 2) + std::pow(p.next_state[1] - t.next_state[1], 2)) / 2;
  const double dr = std::pow(p.reward - t.reward, 2);
  EXPECT_NEAR(world_model_example_loss(model, ctx, t), ds + dr, 1e-12);
  model.spec.reward_loss_weight = 3.0;
  EXPECT_NEAR(world_model_example_loss(model, ctx, t), ds + 3.0 * dr, 1e-12);
}

TEST(TrainWorldModel, ZeroStepsIsInitialization) {
  WorldModelTrainConfig cfg;
  cfg.training_steps = 0;
  cfg.seed = 9;
  auto res = train_world_model(small_prior(), small_spec(), cfg);
  EXPECT_TRUE(res.loss_curve.empty());
  auto ref = WorldModel::initialize(small_spec(), derive_seed(9, {0x3d}));
  EXPECT_EQ(res.model.params, ref.params);
  auto corpus = make_heldout_corpus(small_prior(), 20, 1);
  EXPECT_EQ(heldout_mse(res.model, corpus), heldout_mse(ref, corpus));
}

TEST(TrainWorldModel, FiniteDeterministicAndImproving) {
  WorldModelTrainConfig cfg;
  cfg.training_steps = 60;
  cfg.batch_size = 4;
  cfg.log_interval = 10;
  cfg.learning_rate = 3e-3;
  cfg.warmup_steps = 5;
  cfg.seed = 3;
  std::vector<LossPoint> logged;
  auto a = train_world_model(small_prior(), small_spec(), cfg, [&](const LossPoint& p) { logged.push_back(p); });
  auto b = train_world_model(small_prior(), small_spec(), cfg);
  EXPECT_EQ(a.model.params, b.model.params);
  ASSERT_EQ(a.loss_curve.size(), 6u);
  EXPECT_EQ(logged.size(), 6u);
  for (const auto& p : a.loss_curve) EXPECT_TRUE(std::isfinite(p.loss));
  auto corpus = make_heldout_corpus(small_prior(), 100, 11);
  auto init = WorldModel::initialize(small_spec(), derive_seed(3, {0x3d}));
  EXPECT_LT(heldout_mse(a.model, corpus), heldout_mse(init, corpus));
}

TEST(TrainWorldModel, RejectsMismatchedPrior) {
  WorldModelTrainConfig cfg;
  cfg.training_steps = 1;
  PriorConfig p = small_prior();
  p.state_dim = 3;
  EXPECT_THROW(train_world_model(p, small_spec(), cfg), UsageError);
  p = small_prior(1001);
  EXPECT_THROW(train_world_model(p, small_spec(), cfg), ConfigError);
}

TEST(WmStep, PureAndMatchesSession) {
  auto model = WorldModel::initialize(small_spec(32, 2), 5);
  auto ep = prior_episode(6, 50);
  std::span<const Transition> ctx(ep.data(), 40);
  WorldModelSession session(model, ctx);
  Random rng(1);
  for (int i = 0; i < 20; ++i) {
    std::vector<double> s{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const int a = rng.index(4);
    auto x = wm_step(model, ctx, s, a), y = wm_step(model, ctx, s, a);
    auto z = session.step(s, a);
    ASSERT_EQ(x.next_state, y.next_state);
    ASSERT_EQ(x.reward, y.reward);
    ASSERT_EQ(x.next_state, z.next_state);
    ASSERT_EQ(x.reward, z.reward);
  }
}

TEST(WmStep, ContextLimitIsUsageError) {
  auto model = WorldModel::initialize(small_spec(), 1);
  std::vector<Transition> ctx(1001, prior_episode(1, 2)[0]);
  EXPECT_THROW(wm_step(model, ctx, std::vector<double>{0, 0}, 0), UsageError);
  EXPECT_THROW(wm_step(model, std::span<const Transition>{}, std::vector<double>{0, 0}, 0), UsageError);
  ctx.resize(1000);
  EXPECT_NO_THROW(wm_step(model, ctx, std::vector<double>{0, 0}, 0));
}

TEST(WmStep, CausalAttentionIgnoresLaterTokens) {
  auto model = WorldModel::initialize(small_spec(), 3);
  auto ep = prior_episode(7);
  detail::WorldModelOffsets o(model.params);
  std::vector<double> q1{0.1, 0.2, 1, 0, 0, 0}, q2{-0.7, 0.9, 0, 0, 1, 0};
  Matrix x1, x2;
  detail::embed_sequence(model, o, std::span<const Transition>(ep.data(), 10), &q1, x1);
  detail::embed_sequence(model, o, std::span<const Transition>(ep.data(), 10), &q2, x2);
  AttentionTrace t1, t2;
  attention_forward(model.spec.encoder, model.encoder_params(), x1, t1, false);
  attention_forward(model.spec.encoder, model.encoder_params(), x2, t2, false);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < model.spec.encoder.d_model; ++c) ASSERT_EQ(t1.output.row(r)[c], t2.output.row(r)[c]);
}

TEST(WmStep, SwappingContextTransitionsChangesOutput) {
  const auto& model = trained_model();
  auto ep = prior_episode(12);
  Random rng(2);
  int changed = 0;
  for (int i = 0; i < 100; ++i) {
    std::vector<Transition> ctx(ep.begin(), ep.begin() + 15);
    const int a = rng.index(15);
    int b = rng.index(14);
    if (b >= a) ++b;
    const auto q = ep[15];
    auto before = wm_step(model, ctx, q.state, q.action);
    std::swap(ctx[static_cast<std::size_t>(a)], ctx[static_cast<std::size_t>(b)]);
    auto after = wm_step(model, ctx, q.state, q.action);
    changed += before.next_state != after.next_state || before.reward != after.reward;
  }
  EXPECT_GE(changed, 95);
}

TEST(WmStep, ContextFromAnotherPriorEnvChangesPredictions) {
  const auto& model = trained_model();
  auto mine = prior_episode(21), other = prior_episode(22);
  std::span<const Transition> ca(mine.data(), 19), cb(other.data(), 19);
  WorldModelSession sa(model, ca);
  Random rng(5);
  double delta = 0.0, floor = 0.0;
  for (int i = 0; i < 100; ++i) {
    std::vector<double> s{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const int a = rng.index(4);
    auto x = wm_step(model, ca, s, a), y = wm_step(model, cb, s, a), z = sa.step(s, a);
    for (int k = 0; k < 2; ++k) {
      delta += std::abs(x.next_state[k] - y.next_state[k]);
      floor += std::abs(x.next_state[k] - z.next_state[k]);
    }
    delta += std::abs(x.reward - y.reward);
    floor += std::abs(x.reward - z.reward);
  }
  delta /= 300;
  floor = std::max(floor / 300, 1e-15);
  EXPECT_GT(delta, 10 * floor);
}

TEST(Adapt, CollectsExactlyNRealSteps) {
  auto model = WorldModel::initialize(small_spec(), 1);
  for (int n : {1, 37, 1000}) {
    Env real(EnvSpec::gridworld(3));
    CountingEnv counted(real);
    auto ctx = adapt(model, counted, n, 4);
    EXPECT_EQ(static_cast<int>(ctx.size()), n);
    EXPECT_EQ(counted.steps(), n);
    EXPECT_EQ(ctx.source, ContextSource::RealEnv);
  }
}

TEST(Adapt, EpisodeBoundariesPreserved) {
  auto model = WorldModel::initialize(small_spec(), 1);
  Env real(EnvSpec::gridworld(3));
  auto ctx = adapt(model, real, 500, 8);
  auto starts = ctx.episode_starts();
  ASSERT_GT(starts.size(), 3u);
  for (auto i : starts) EXPECT_EQ(ctx.transitions[i].state, (std::vector<double>{0.0, 0.0}));
  for (std::size_t i = 0; i + 1 < ctx.size(); ++i)
    if (!ctx.transitions[i].done) {
      EXPECT_EQ(ctx.transitions[i].next_state, ctx.transitions[i + 1].state);
    }
  EXPECT_THROW(adapt(model, real, 0, 1), UsageError);
  EXPECT_THROW(adapt(model, real, 1001, 1), UsageError);
}

TEST(SimulatedEnvTest, ResetsDrawFromContextStarts) {
  auto model = WorldModel::initialize(small_spec(), 1);
  Env real(EnvSpec::cartpole());
  WorldModelSpec cp = small_spec();
  cp.state_dim = 4;
  cp.action_count = 2;
  auto cp_model = WorldModel::initialize(cp, 2);
  auto ctx = adapt(cp_model, real, 300, 3);
  auto sim = as_simulated_env(cp_model, ctx, EnvSpec::cartpole());
  auto starts = sim.start_states();
  EXPECT_EQ(starts.size(), ctx.episode_starts().size());
  for (std::uint64_t s = 0; s < 100; ++s) {
    auto st = sim.reset(s);
    EXPECT_NE(std::find(starts.begin(), starts.end(), st.observation), starts.end());
    EXPECT_EQ(st.step_index, 0);
  }
}

TEST(SimulatedEnvTest, TrainingInsideUsesNoRealSteps) {
  const auto& model = trained_model();
  Env real(EnvSpec::gridworld(3));
  CountingEnv counted(real);
  auto ctx = adapt(model, counted, 100, 6);
  auto sim = as_simulated_env(model, ctx, EnvSpec::gridworld(3));
  AgentConfig a;
  a.hidden_sizes = {16};
  a.batch_size = 16;
  a.learning_starts = 50;
  a.train_budget_steps = 300;
  auto r = train_agent(sim, a);
  EXPECT_EQ(counted.steps(), 100);
  EXPECT_EQ(sim.steps(), 300);
  EXPECT_EQ(r.env_steps, 300);
}

TEST(SimulatedEnvTest, GridWorldSnapsAndStopsAtHorizon) {
  const auto& model = trained_model();
  Env real(EnvSpec::gridworld(3));
  auto ctx = adapt(model, real, 100, 6);
  auto sim = as_simulated_env(model, ctx, EnvSpec::gridworld(3));
  auto s = sim.reset(0);
  Random rng(1);
  int steps = 0;
  while (true) {
    auto r = sim.step(s, rng.index(4));
    ++steps;
    for (double v : r.state.observation) ASSERT_TRUE(v == 0.0 || v == 0.5 || v == 1.0);
    if (r.done) {
      const bool goal = r.state.observation == std::vector<double>{1.0, 1.0};
      EXPECT_TRUE(goal || steps == 36);
      EXPECT_EQ(r.truncated, !goal);
      break;
    }
    s = r.state;
  }
}
