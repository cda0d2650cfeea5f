#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "synthlab/harness.hpp"

using namespace synthlab;
namespace fs = std::filesystem;

namespace {

class HarnessTest : public ::testing::Test {
 protected:
  void SetUp() override {
    unsetenv("SYNTHLAB_OUTPUT_ROOT");
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    root_ = fs::temp_directory_path() / ("synthlab_" + std::to_string(getpid())) / info->name();
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  fs::path root_;
};

AgentConfig tiny_agent() {
  AgentConfig a;
  a.hidden_sizes = {16};
  a.batch_size = 16;
  a.learning_starts = 50;
  a.buffer_capacity = 1000;
  a.target_sync_interval = 50;
  a.epsilon_decay_steps = 300;
  a.train_budget_steps = 600;
  a.eval_episodes = 2;
  return a;
}

RunConfig baseline_config(const fs::path& out) {
  RunConfig c;
  c.run_kind = RunKind::BaselineAgent;
  c.run_id = "baseline_test";
  c.env = EnvSpec::gridworld(3);
  c.agent = tiny_agent();
  c.seeds = {1, 2};
  c.output_dir = out.string();
  c.final_eval_episodes = 3;
  return c;
}

RunConfig meta_config(const fs::path& out) {
  RunConfig c;
  c.run_kind = RunKind::MetaTrainSE;
  c.run_id = "meta_test";
  c.env = EnvSpec::gridworld(3);
  c.agent = tiny_agent();
  ESConfig es;
  es.population_size = 4;
  es.iterations = 2;
  es.inner_budget_steps = 400;
  es.eval_episodes = 2;
  c.es = es;
  c.proxy = ProxyConfig{};
  c.proxy->hidden = {8};
  c.seeds = {3};
  c.output_dir = out.string();
  c.final_eval_episodes = 2;
  c.efficiency_threshold = 0.9;
  return c;
}

WorldModelConfig tiny_world_model() {
  WorldModelConfig w;
  w.spec.encoder = AttentionBlockSpec{16, 4, 1, 1001, 0};
  w.train.training_steps = 6;
  w.train.batch_size = 2;
  w.train.log_interval = 2;
  w.train.warmup_steps = 2;
  w.context_size = 50;
  w.heldout_episodes = 10;
  return w;
}

PriorConfig tiny_prior() {
  PriorConfig p;
  p.episode_length = 15;
  return p;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<json> read_rows(const fs::path& p) {
  std::vector<json> rows;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) rows.push_back(json::parse(line));
  return rows;
}

// metrics rows with the timing field removed
std::vector<json> stable_rows(const fs::path& p) {
  auto rows = read_rows(p);
  for (auto& r : rows) r.erase("wall_ms");
  return rows;
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SYNTHLAB_CLI) + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_F(HarnessTest, ConfigRoundTripsForEveryKind) {
  std::vector<RunConfig> configs = {baseline_config(root_), meta_config(root_)};
  RunConfig rn = meta_config(root_);
  rn.run_kind = RunKind::MetaTrainRN;
  rn.proxy->rn_mode = RewardMode::Additive;
  rn.es->hp_sampling.fixed = true;
  configs.push_back(rn);
  RunConfig train;
  train.run_kind = RunKind::OswmTrain;
  train.run_id = "wm";
  train.prior = tiny_prior();
  PriorComponent comp;
  comp.weight = 0.25;
  comp.activation_pool = std::vector<Activation>{Activation::ReLU};
  comp.reward_sparsity = 0.9;
  PriorComponent rest;
  rest.weight = 0.75;
  train.prior->mixture = {comp, rest};
  train.world_model = tiny_world_model();
  train.seeds = {0, 7};
  train.output_dir = "out";
  configs.push_back(train);
  RunConfig adapt_cfg = train;
  adapt_cfg.run_kind = RunKind::OswmAdaptAndSolve;
  adapt_cfg.env = EnvSpec::gridworld(3);
  adapt_cfg.agent = tiny_agent();
  adapt_cfg.world_model->checkpoint = "wm.json";
  adapt_cfg.world_model->simulation.snap_to_grid = false;
  configs.push_back(adapt_cfg);
  RunConfig report;
  report.run_kind = RunKind::Report;
  report.run_id = "r";
  report.run_dir = "somewhere";
  configs.push_back(report);

  for (const auto& c : configs) {
    const json j = to_json(c);
    const RunConfig back = run_config_from_json(json::parse(j.dump()));
    EXPECT_EQ(back, c) << j.dump();
    EXPECT_EQ(to_json(back), j);
  }
}

TEST_F(HarnessTest, ConfigErrorsNameTheField) {
  json j = to_json(baseline_config(root_));
  j["agent"]["learning_rat"] = 0.1;
  try {
    run_config_from_json(j);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("agent.learning_rat"), std::string::npos) << e.what();
  }
  j = to_json(baseline_config(root_));
  j["agent"]["batch_size"] = "big";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(baseline_config(root_));
  j["seeds"] = json::array();
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(meta_config(root_));
  j.erase("es");
  EXPECT_THROW(run_config_from_json(j), ConfigError);
  j = to_json(baseline_config(root_));
  j["run_kind"] = "train_everything";
  EXPECT_THROW(run_config_from_json(j), ConfigError);
}

TEST(CompareEfficiency, Examples) {
  LearningCurve a{{{1000, 0.1}, {5000, 0.95}, {20000, 0.97}}};
  auto same = compare_efficiency(a, a, 0.9);
  EXPECT_EQ(same.ratio, 1.0);
  EXPECT_FALSE(same.censored);

  LearningCurve real{{{5000, 0.2}, {10000, 0.5}, {20000, 0.92}}};
  auto quarter = compare_efficiency(a, real, 0.9);
  EXPECT_DOUBLE_EQ(quarter.ratio, 0.25);
  EXPECT_EQ(*quarter.proxy_steps, 5000);
  EXPECT_EQ(*quarter.real_steps, 20000);

  LearningCurve never{{{5000, 0.2}, {10000, 0.5}}};
  auto censored = compare_efficiency(never, real, 0.9);
  EXPECT_TRUE(std::isinf(censored.ratio));
  EXPECT_TRUE(censored.censored);
  EXPECT_EQ(to_json(censored)["ratio"], "inf");
}

TEST_F(HarnessTest, BaselineRunWritesArtifactsWithStableKeys) {
  auto c = baseline_config(root_ / "run");
  json summary = execute(c);
  for (std::uint64_t seed : c.seeds) {
    const fs::path d = root_ / "run" / ("seed_" + std::to_string(seed));
    ASSERT_TRUE(fs::exists(d / "summary.json"));
    ASSERT_TRUE(fs::exists(d / "checkpoints" / "agent.json"));
    EXPECT_EQ(read_text(d / "curves.csv").substr(0, 18), "series,step,value\n");
    auto rows = read_rows(d / "metrics.jsonl");
    ASSERT_EQ(rows.size(), 20u);
    std::set<std::string> keys;
    for (auto it = rows[0].begin(); it != rows[0].end(); ++it) keys.insert(it.key());
    EXPECT_EQ(keys, (std::set<std::string>{"run_id", "kind", "seed", "step", "eval_return", "wall_ms"}));
    for (const auto& r : rows) {
      std::set<std::string> k;
      for (auto it = r.begin(); it != r.end(); ++it) k.insert(it.key());
      EXPECT_EQ(k, keys);
    }
    auto policy = policy_from_checkpoint(read_json_file(d / "checkpoints" / "agent.json"));
    EXPECT_EQ(policy.net.in_dim(), 2);
  }
  EXPECT_EQ(summary["seeds"].size(), 2u);
  EXPECT_TRUE(summary["aggregate"].contains("seeds_solved"));
  EXPECT_EQ(run_config_from_json(read_json_file(root_ / "run" / "config.json")), c);
}

TEST_F(HarnessTest, RerunReproducesMetricsBitwise) {
  auto c = baseline_config(root_ / "a");
  execute(c);
  c.output_dir = (root_ / "b").string();
  execute(c);
  for (std::uint64_t seed : c.seeds) {
    const std::string s = "seed_" + std::to_string(seed);
    EXPECT_EQ(stable_rows(root_ / "a" / s / "metrics.jsonl"), stable_rows(root_ / "b" / s / "metrics.jsonl"));
    EXPECT_EQ(read_text(root_ / "a" / s / "curves.csv"), read_text(root_ / "b" / s / "curves.csv"));
    EXPECT_EQ(read_text(root_ / "a" / s / "summary.json"), read_text(root_ / "b" / s / "summary.json"));
  }
}

TEST_F(HarnessTest, MetaRunIdenticalAcrossWorkerCounts) {
  auto c = meta_config(root_ / "w1");
  execute(c, 1);
  c.output_dir = (root_ / "w8").string();
  execute(c, 8);
  const fs::path a = root_ / "w1" / "seed_3", b = root_ / "w8" / "seed_3";
  EXPECT_EQ(stable_rows(a / "metrics.jsonl"), stable_rows(b / "metrics.jsonl"));
  EXPECT_EQ(read_text(a / "fitness_records.jsonl"), read_text(b / "fitness_records.jsonl"));
  EXPECT_EQ(read_text(a / "curves.csv"), read_text(b / "curves.csv"));
  EXPECT_EQ(read_text(a / "checkpoints" / "incumbent.json"), read_text(b / "checkpoints" / "incumbent.json"));
  EXPECT_EQ(read_text(a / "summary.json"), read_text(b / "summary.json"));

  auto rows = read_rows(a / "metrics.jsonl");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& r : rows)
    for (const char* k : {"iter", "best_fitness", "mean_fitness", "incumbent_fitness", "wall_ms"}) EXPECT_TRUE(r.contains(k)) << k;
  auto se = synthetic_env_from_checkpoint(read_json_file(a / "checkpoints" / "incumbent.json"));
  EXPECT_EQ(se.obs_dim, 2);
  auto summary = read_json_file(a / "summary.json");
  EXPECT_EQ(summary["proxy_real_steps_during_training"], 0);
  EXPECT_TRUE(summary.contains("efficiency"));
}

TEST_F(HarnessTest, ReportTabulatesProxyAgainstReal) {
  auto c = meta_config(root_ / "meta");
  execute(c);
  const std::string md = make_report(root_ / "meta");
  EXPECT_NE(md.find("| seed | proxy steps | real steps | ratio | proxy return | real return |"), std::string::npos) << md;
  EXPECT_NE(md.find("| 3 |"), std::string::npos);
  EXPECT_TRUE(fs::exists(root_ / "meta" / "report.md"));
  auto rj = read_json_file(root_ / "meta" / "report.json");
  ASSERT_EQ(rj["rows"].size(), 1u);
  EXPECT_TRUE(rj["rows"][0]["efficiency"].contains("ratio"));
}

TEST_F(HarnessTest, OswmTrainThenAdaptFromCheckpoint) {
  RunConfig train;
  train.run_kind = RunKind::OswmTrain;
  train.run_id = "wm";
  train.prior = tiny_prior();
  train.world_model = tiny_world_model();
  train.seeds = {5};
  train.output_dir = (root_ / "train").string();
  auto s = execute(train);
  const auto& seed = s["seeds"][0];
  EXPECT_GT(seed["heldout_mse_initial"].get<double>(), 0.0);
  EXPECT_TRUE(seed.contains("mse_reduction"));
  const fs::path ck = root_ / "train" / "seed_5" / "checkpoints" / "world_model.json";
  ASSERT_TRUE(fs::exists(ck));
  EXPECT_EQ(read_rows(root_ / "train" / "seed_5" / "metrics.jsonl").size(), 3u);

  RunConfig adapt_cfg;
  adapt_cfg.run_kind = RunKind::OswmAdaptAndSolve;
  adapt_cfg.run_id = "adapt";
  adapt_cfg.env = EnvSpec::gridworld(3);
  adapt_cfg.agent = tiny_agent();
  adapt_cfg.world_model = tiny_world_model();
  adapt_cfg.world_model->checkpoint = ck.string();
  adapt_cfg.seeds = {1};
  adapt_cfg.output_dir = (root_ / "adapt").string();
  adapt_cfg.final_eval_episodes = 5;
  auto a = execute(adapt_cfg)["seeds"][0];
  EXPECT_EQ(a["real_steps_context"], 50);
  EXPECT_EQ(a["real_steps_beyond_context"], 0);
  EXPECT_EQ(a["simulated_steps"], 600);
  EXPECT_TRUE(a.contains("goal_rate"));
  EXPECT_EQ(read_transitions_jsonl(root_ / "adapt" / "seed_1" / "context.jsonl").size(), 50u);
}

TEST_F(HarnessTest, OutputRootOverride) {
  auto c = baseline_config(root_ / "ignored");
  c.seeds = {4};
  setenv("SYNTHLAB_OUTPUT_ROOT", (root_ / "elsewhere").c_str(), 1);
  execute(c);
  unsetenv("SYNTHLAB_OUTPUT_ROOT");
  EXPECT_TRUE(fs::exists(root_ / "elsewhere" / "baseline_test" / "summary.json"));
  EXPECT_FALSE(fs::exists(root_ / "ignored"));
}

TEST_F(HarnessTest, CheckpointsRoundTrip) {
  Policy p{Algorithm::REINFORCE, Mlp(dense_stack(4, std::vector<int>{5}, 2, Activation::Tanh), 3)};
  auto p2 = policy_from_checkpoint(json::parse(checkpoint(p).dump()));
  EXPECT_EQ(p2.algorithm, p.algorithm);
  EXPECT_EQ(p2.net.params(), p.net.params());
  EXPECT_EQ(p2.net.layers(), p.net.layers());

  MetaObjective o;
  o.hidden = {6};
  auto se = o.make_se(o.initial_params(1));
  se.init_mode = InitMode::GaussianInit;
  se.sigma_init = 0.3;
  auto se2 = synthetic_env_from_checkpoint(json::parse(checkpoint(se).dump()));
  EXPECT_EQ(se2.dynamics.params(), se.dynamics.params());
  EXPECT_EQ(se2.init_mode, InitMode::GaussianInit);
  EXPECT_EQ(se2.sigma_init, 0.3);

  o.role = ProxyRole::RN;
  auto rn = o.make_rn(o.initial_params(2));
  auto rn2 = reward_net_from_checkpoint(json::parse(checkpoint(rn).dump()));
  EXPECT_EQ(rn2.mode, rn.mode);
  EXPECT_EQ(rn2.net.params(), rn.net.params());

  auto wm = WorldModel::initialize(tiny_world_model().spec, 4);
  auto wm2 = world_model_from_checkpoint(json::parse(checkpoint(wm).dump()));
  EXPECT_EQ(wm2.params, wm.params);
  EXPECT_EQ(wm2.spec, wm.spec);

  EXPECT_THROW(reward_net_from_checkpoint(checkpoint(p)), UsageError);
}

TEST_F(HarnessTest, CliMalformedJsonExitsTwoWithoutOutputs) {
  const fs::path cfg = root_ / "bad.json";
  write_text_file(cfg, "{\"run_kind\": \"baseline_agent\", ");
  EXPECT_EQ(run_cli("run --config " + cfg.string(), root_ / "log.txt"), 2);
  EXPECT_NE(read_text(root_ / "log.txt").find("config"), std::string::npos);
  std::vector<fs::path> entries;
  for (const auto& e : fs::directory_iterator(root_)) entries.push_back(e.path().filename());
  EXPECT_EQ(entries.size(), 2u);
}

TEST_F(HarnessTest, CliUnknownFieldExitsTwo) {
  json j = to_json(baseline_config(root_ / "out"));
  j["env"]["gravity"] = 3.0;
  write_json_file(root_ / "cfg.json", j);
  EXPECT_EQ(run_cli("run --config " + (root_ / "cfg.json").string(), root_ / "log.txt"), 2);
  EXPECT_NE(read_text(root_ / "log.txt").find("env.gravity"), std::string::npos) << read_text(root_ / "log.txt");
  EXPECT_FALSE(fs::exists(root_ / "out"));
  EXPECT_EQ(run_cli("run", root_ / "log.txt"), 2);
  EXPECT_EQ(run_cli("run --config " + (root_ / "cfg.json").string() + " --workers 0", root_ / "log.txt"), 2);
}

TEST_F(HarnessTest, CliRunSeedOverrideAndReport) {
  auto c = baseline_config(root_ / "out");
  write_json_file(root_ / "cfg.json", to_json(c));
  ASSERT_EQ(run_cli("run --config " + (root_ / "cfg.json").string() + " --workers 2 --seed-override 9", root_ / "log.txt"), 0)
      << read_text(root_ / "log.txt");
  EXPECT_TRUE(fs::exists(root_ / "out" / "seed_9" / "summary.json"));
  EXPECT_FALSE(fs::exists(root_ / "out" / "seed_1"));
  EXPECT_EQ(run_cli("report --run-dir " + (root_ / "out").string(), root_ / "report.txt"), 0);
  EXPECT_NE(read_text(root_ / "report.txt").find("mean_eval_return"), std::string::npos);
}

TEST_F(HarnessTest, CliRuntimeFailureExitsOneWithStage) {
  RunConfig r;
  r.run_kind = RunKind::Report;
  r.run_id = "late_report";
  r.run_dir = (root_ / "missing").string();
  write_json_file(root_ / "cfg.json", to_json(r));
  EXPECT_EQ(run_cli("run --config " + (root_ / "cfg.json").string(), root_ / "log.txt"), 1);
  const std::string log = read_text(root_ / "log.txt");
  EXPECT_NE(log.find("run_id=late_report"), std::string::npos) << log;
  EXPECT_NE(log.find("stage=report"), std::string::npos) << log;
  EXPECT_EQ(run_cli("report --run-dir " + (root_ / "missing").string(), root_ / "log.txt"), 1);
}

TEST(ExampleConfigs, AllParseAndValidate) {
  int n = 0;
  for (const auto& e : fs::directory_iterator(SYNTHLAB_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    EXPECT_NO_THROW(load_run_config(e.path())) << e.path();
    ++n;
  }
  EXPECT_GE(n, 6);
}
