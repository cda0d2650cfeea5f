#include <gtest/gtest.h>

#include <cmath>

#include "synthlab/prior_gen.hpp"

using namespace synthlab;

namespace {

PriorConfig zero_prior() {
  PriorConfig c;
  c.weight_scale_min = 0.0;
  c.weight_scale_max = 0.0;
  c.transition_noise_std = 0.0;
  c.reward_sparsity = 0.0;
  c.episode_length = 20;
  return c;
}

std::vector<double> flatten(const std::vector<Transition>& ep) {
  std::vector<double> out;
  for (const auto& t : ep) {
    out.insert(out.end(), t.state.begin(), t.state.end());
    out.push_back(t.action);
    out.push_back(t.reward);
    out.insert(out.end(), t.next_state.begin(), t.next_state.end());
  }
  return out;
}

std::vector<Transition> episode_of_length(int n) {
  std::vector<Transition> ep;
  for (int i = 0; i < n; ++i) ep.push_back(Transition{{double(i)}, i % 2, 0.1 * i, {double(i + 1)}, i + 1 == n, i + 1 == n});
  return ep;
}

}  // namespace

TEST(SamplePriorEnv, ZeroScaleGivesConstantTrajectories) {
  Random rng(1);
  auto env = sample_prior_env(zero_prior(), rng);
  auto ep = generate_episode(env, CollectionPolicy::UniformRandom, rng);
  ASSERT_EQ(ep.size(), 20u);
  for (const auto& t : ep) {
    EXPECT_EQ(t.next_state, std::vector<double>(2, 0.0));
    EXPECT_EQ(t.reward, 0.0);
  }
  for (std::size_t i = 1; i < ep.size(); ++i) EXPECT_EQ(ep[i].state, std::vector<double>(2, 0.0));
}

TEST(SamplePriorEnv, SingleComponentMixtureAlwaysChosen) {
  PriorConfig c;
  PriorComponent a;
  a.weight = 1.0;
  a.hidden_min = 7;
  a.hidden_max = 7;
  c.mixture = {a};
  c.validate();
  Random rng(2);
  for (int i = 0; i < 50; ++i) {
    auto env = sample_prior_env(c, rng);
    EXPECT_EQ(env.component, 0);
    EXPECT_EQ(env.dynamics[0].layers()[0].out_dim, 7);
  }
}

TEST(SamplePriorEnv, MixtureFrequenciesMatchWeights) {
  PriorConfig c;
  c.hidden_min = c.hidden_max = 4;
  PriorComponent a, b;
  a.weight = 0.3;
  b.weight = 0.7;
  b.hidden_min = 5;
  b.hidden_max = 5;
  c.mixture = {a, b};
  c.validate();
  Random rng(3);
  const int n = 10000;
  int first = 0;
  for (int i = 0; i < n; ++i) {
    auto env = sample_prior_env(c, rng);
    first += env.component == 0;
    ASSERT_EQ(env.dynamics[0].layers()[0].out_dim, env.component == 0 ? 4 : 5);
  }
  const double sd = std::sqrt(n * 0.3 * 0.7);
  EXPECT_LT(std::abs(first - 0.3 * n), 3 * sd);
}

TEST(SamplePriorEnv, StructureFollowsConfig) {
  PriorConfig c;
  c.state_dim = 3;
  c.action_count = 5;
  c.hidden_min = 4;
  c.hidden_max = 6;
  Random rng(4);
  for (int i = 0; i < 100; ++i) {
    auto env = sample_prior_env(c, rng);
    ASSERT_EQ(env.dynamics.size(), 3u);
    for (const auto& net : env.dynamics) {
      ASSERT_EQ(net.layers().size(), 2u);
      EXPECT_EQ(net.in_dim(), 8);
      EXPECT_EQ(net.out_dim(), 1);
      EXPECT_GE(net.layers()[0].out_dim, 4);
      EXPECT_LE(net.layers()[0].out_dim, 6);
    }
    EXPECT_EQ(env.reward_net.in_dim(), 8);
  }
}

TEST(PriorConfigTest, ValidationErrors) {
  PriorConfig c;
  PriorComponent a, b;
  a.weight = 0.5;
  b.weight = 0.4;
  c.mixture = {a, b};
  EXPECT_THROW(c.validate(), ConfigError);
  c = PriorConfig{};
  c.hidden_min = 10;
  c.hidden_max = 5;
  EXPECT_THROW(c.validate(), ConfigError);
  c = PriorConfig{};
  c.activation_pool.clear();
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SparseReward, ThresholdsToZeroOne) {
  PriorConfig c;
  c.reward_sparsity = 1.0;
  Random rng(5);
  auto env = sample_prior_env(c, rng);
  EXPECT_TRUE(env.sparse_reward);
  int ones = 0, total = 0;
  for (int e = 0; e < 20; ++e)
    for (const auto& t : generate_episode(env, CollectionPolicy::UniformRandom, rng)) {
      ASSERT_TRUE(t.reward == 0.0 || t.reward == 1.0);
      ones += t.reward == 1.0;
      ++total;
    }
  EXPECT_LT(ones, total);
}

TEST(GenerateEpisode, ZeroNoiseZeroWeightsGiveOrigin) {
  Random rng(6);
  auto env = sample_prior_env(zero_prior(), rng);
  auto ep = generate_episode(env, CollectionPolicy::UniformRandom, rng);
  EXPECT_EQ(ep[0].next_state, std::vector<double>(2, 0.0));
}

TEST(GenerateEpisode, StatesStayInsideOpenUnitBox) {
  PriorConfig c;
  c.weight_scale_min = c.weight_scale_max = 2.0;
  c.transition_noise_std = 0.5;
  Random rng(7);
  for (int k = 0; k < 50; ++k) {
    auto env = sample_prior_env(c, rng);
    for (const auto& t : generate_episode(env, CollectionPolicy::UniformRandom, rng)) {
      for (double v : t.state) ASSERT_TRUE(v > -1.0 && v < 1.0);
      for (double v : t.next_state) ASSERT_TRUE(v > -1.0 && v < 1.0);
    }
  }
}

TEST(GenerateEpisode, ExactLengthAndFinalDone) {
  PriorConfig c;
  c.episode_length = 37;
  Random rng(8);
  auto env = sample_prior_env(c, rng);
  auto ep = generate_episode(env, CollectionPolicy::UniformRandom, rng);
  ASSERT_EQ(ep.size(), 37u);
  for (std::size_t i = 0; i + 1 < ep.size(); ++i) {
    EXPECT_FALSE(ep[i].done);
    EXPECT_EQ(ep[i].next_state, ep[i + 1].state);
  }
  EXPECT_TRUE(ep.back().done);
}

TEST(GenerateEpisode, ActionsAreUniform) {
  PriorConfig c;
  c.episode_length = 1000;
  Random rng(9);
  auto env = sample_prior_env(c, rng);
  std::vector<int> counts(4, 0);
  const int n = 10;
  for (int e = 0; e < n; ++e)
    for (const auto& t : generate_episode(env, CollectionPolicy::UniformRandom, rng)) ++counts[t.action];
  const double total = n * 1000, sd = std::sqrt(total * 0.25 * 0.75);
  for (int k : counts) EXPECT_LT(std::abs(k - total / 4), 3 * sd);
}

TEST(TrainingBatch, LengthTwoForcesCutoffOne) {
  std::vector<std::vector<Transition>> eps = {episode_of_length(2)};
  Random rng(10);
  auto batch = build_training_batch(eps, 100, rng);
  for (const auto& e : batch.elements) EXPECT_EQ(e.cutoff, 1);
}

TEST(TrainingBatch, CutoffsAreUniform) {
  const int len = 11;
  std::vector<std::vector<Transition>> eps = {episode_of_length(len)};
  Random rng(11);
  const int n = 10000;
  auto batch = build_training_batch(eps, n, rng);
  std::vector<int> hist(len, 0);
  for (const auto& e : batch.elements) {
    ASSERT_GE(e.cutoff, 1);
    ASSERT_LE(e.cutoff, len - 1);
    ++hist[e.cutoff];
  }
  const double p = 1.0 / (len - 1), sd = std::sqrt(n * p * (1 - p));
  for (int k = 1; k < len; ++k) EXPECT_LT(std::abs(hist[k] - n * p), 3 * sd) << "cutoff " << k;
}

TEST(TrainingBatch, ShortEpisodesAreSkippedAndCounted) {
  std::vector<std::vector<Transition>> eps = {episode_of_length(1), episode_of_length(5), episode_of_length(1)};
  Random rng(12);
  auto batch = build_training_batch(eps, 50, rng);
  EXPECT_EQ(batch.skipped_episodes, 2);
  for (const auto& e : batch.elements) EXPECT_EQ(e.episode, 1);
  std::vector<std::vector<Transition>> none = {episode_of_length(1)};
  EXPECT_THROW(build_training_batch(none, 1, rng), UsageError);
}

TEST(TrainingBatch, TargetsAreStoredTransitions) {
  PriorConfig c;
  c.episode_length = 30;
  Random rng(13);
  std::vector<std::vector<Transition>> eps;
  for (int i = 0; i < 5; ++i) {
    auto env = sample_prior_env(c, rng);
    eps.push_back(generate_episode(env, CollectionPolicy::UniformRandom, rng));
  }
  auto batch = build_training_batch(eps, 200, rng);
  for (const auto& e : batch.elements) {
    const auto& t = eps[e.episode][e.cutoff];
    // the query state continues the context exactly
    EXPECT_EQ(eps[e.episode][e.cutoff - 1].next_state, t.state);
  }
}

TEST(PriorProperty, DeterministicInSeed) {
  PriorConfig c;
  Random a(21), b(21);
  auto ea = sample_prior_env(c, a), eb = sample_prior_env(c, b);
  EXPECT_EQ(flatten(generate_episode(ea, CollectionPolicy::UniformRandom, a)),
            flatten(generate_episode(eb, CollectionPolicy::UniformRandom, b)));
}

TEST(PriorProperty, DifferentSeedsGiveDifferentTrajectories) {
  PriorConfig c;
  for (std::uint64_t k = 0; k < 100; ++k) {
    Random a(derive_seed(1, {k})), b(derive_seed(2, {k}));
    auto ea = sample_prior_env(c, a), eb = sample_prior_env(c, b);
    EXPECT_NE(flatten(generate_episode(ea, CollectionPolicy::UniformRandom, a)),
              flatten(generate_episode(eb, CollectionPolicy::UniformRandom, b)));
  }
}

TEST(PriorProperty, DimensionNetsAreIndependent) {
  PriorConfig c;
  c.state_dim = 4;
  Random rng(31);
  auto env = sample_prior_env(c, rng);
  const std::vector<double> s{0.2, -0.4, 0.6, 0.1};
  for (int d = 0; d < 4; ++d) {
    PriorEnv changed = env;
    for (auto& v : changed.dynamics[static_cast<std::size_t>(d)].values()) v += 0.3;
    for (int a = 0; a < 4; ++a) {
      auto before = env.next_state_mean(s, a), after = changed.next_state_mean(s, a);
      for (int k = 0; k < 4; ++k) {
        if (k == d)
          EXPECT_NE(before[k], after[k]);
        else
          EXPECT_EQ(before[k], after[k]);
      }
    }
  }
}
