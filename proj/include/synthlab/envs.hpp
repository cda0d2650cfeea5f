#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "synthlab/core.hpp"

namespace synthlab {

enum class EnvKind { CartPole, GridWorld, PointMass };

inline std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::CartPole: return "CartPole";
    case EnvKind::GridWorld: return "GridWorld";
    case EnvKind::PointMass: return "PointMass";
  }
  return "?";
}

inline EnvKind env_kind_from_string(const std::string& s) {
  if (s == "CartPole") return EnvKind::CartPole;
  if (s == "GridWorld") return EnvKind::GridWorld;
  if (s == "PointMass") return EnvKind::PointMass;
  throw ConfigError("env.kind", "unknown environment '" + s + "'");
}

struct EnvSpec {
  EnvKind kind = EnvKind::CartPole;
  int obs_dim = 4;
  int action_count = 2;
  int horizon = 500;
  double solve_threshold = 475.0;
  int grid_size = 0;

  static EnvSpec cartpole() { return {EnvKind::CartPole, 4, 2, 500, 475.0, 0}; }
  static EnvSpec gridworld(int n) { return {EnvKind::GridWorld, 2, 4, 4 * n * n, 0.9, n}; }
  static EnvSpec point_mass() { return {EnvKind::PointMass, 2, 3, 200, -15.0, 0}; }

  static EnvSpec defaults_for(EnvKind kind, int grid_size = 3) {
    switch (kind) {
      case EnvKind::CartPole: return cartpole();
      case EnvKind::GridWorld: return gridworld(grid_size);
      case EnvKind::PointMass: return point_mass();
    }
    return cartpole();
  }

  void validate() const {
    int want_obs = 0, want_actions = 0;
    switch (kind) {
      case EnvKind::CartPole: want_obs = 4; want_actions = 2; break;
      case EnvKind::GridWorld: want_obs = 2; want_actions = 4; break;
      case EnvKind::PointMass: want_obs = 2; want_actions = 3; break;
    }
    if (obs_dim != want_obs)
      throw ConfigError("obs_dim", to_string(kind) + " requires obs_dim=" + std::to_string(want_obs));
    if (action_count != want_actions)
      throw ConfigError("action_count",
                        to_string(kind) + " requires action_count=" + std::to_string(want_actions));
    if (horizon < 1) throw ConfigError("horizon", "must be >= 1");
    if (!std::isfinite(solve_threshold)) throw ConfigError("solve_threshold", "must be finite");
    if (kind == EnvKind::GridWorld && grid_size < 2) throw ConfigError("grid_size", "must be >= 2");
  }

  bool operator==(const EnvSpec&) const = default;
};

struct EnvState {
  std::vector<double> observation;
  int step_index = 0;
  bool terminated = false;

  bool operator==(const EnvState&) const = default;
};

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool done = false;
  bool truncated = false;
};

/// Anything agents can train against: real environments, synthetic
/// environments, reward-shaped wrappers and world-model simulators.
class EnvLike {
 public:
  virtual ~EnvLike() = default;
  virtual int obs_dim() const = 0;
  virtual int action_count() const = 0;
  virtual EnvState reset(std::uint64_t seed) = 0;
  virtual StepResult step(const EnvState& state, int action) = 0;
};

namespace cartpole {
inline constexpr double kGravity = 9.8;
inline constexpr double kCartMass = 1.0;
inline constexpr double kPoleMass = 0.1;
inline constexpr double kTotalMass = kCartMass + kPoleMass;
inline constexpr double kHalfLength = 0.5;
inline constexpr double kPoleMassLength = kPoleMass * kHalfLength;
inline constexpr double kForce = 10.0;
inline constexpr double kTau = 0.02;
inline constexpr double kThetaLimit = 12.0 * 2.0 * std::numbers::pi / 360.0;
inline constexpr double kXLimit = 2.4;

inline bool out_of_bounds(std::span<const double> s) {
  return s[0] < -kXLimit || s[0] > kXLimit || s[2] < -kThetaLimit || s[2] > kThetaLimit;
}
}  // namespace cartpole

namespace point_mass {
inline constexpr double kTau = 0.05;
inline constexpr double kVelocityWeight = 0.1;
}  // namespace point_mass

/// Reference implementation of the real target MDPs. Stateless apart from the
/// spec: the episode state is passed in and out explicitly, so a single Env
/// may be shared read-only.
class Env final : public EnvLike {
 public:
  explicit Env(EnvSpec spec) : spec_(spec) { spec_.validate(); }

  const EnvSpec& spec() const noexcept { return spec_; }
  int obs_dim() const override { return spec_.obs_dim; }
  int action_count() const override { return spec_.action_count; }

  EnvState reset(std::uint64_t seed) override { return initial_state(seed); }
  StepResult step(const EnvState& state, int action) override { return transition(state, action); }

  EnvState initial_state(std::uint64_t seed) const {
    Random rng(derive_seed(seed, {0x656e76}));
    EnvState s;
    switch (spec_.kind) {
      case EnvKind::CartPole:
        s.observation.resize(4);
        for (auto& v : s.observation) v = rng.uniform(-0.05, 0.05);
        break;
      case EnvKind::GridWorld:
        s.observation = {0.0, 0.0};
        break;
      case EnvKind::PointMass:
        s.observation = {rng.uniform(-1.0, 1.0), 0.0};
        break;
    }
    return s;
  }

  StepResult transition(const EnvState& state, int action) const {
    if (state.terminated) throw UsageError("step called on a terminated state");
    if (action < 0 || action >= spec_.action_count)
      throw UsageError("action " + std::to_string(action) + " out of range");
    if (state.observation.size() != static_cast<std::size_t>(spec_.obs_dim))
      throw UsageError("observation has wrong dimension");

    StepResult out;
    bool terminal = false;
    switch (spec_.kind) {
      case EnvKind::CartPole: terminal = step_cartpole(state.observation, action, out); break;
      case EnvKind::GridWorld: terminal = step_grid(state.observation, action, out); break;
      case EnvKind::PointMass: step_point_mass(state.observation, action, out); break;
    }
    out.state.step_index = state.step_index + 1;
    bool time_limit = out.state.step_index >= spec_.horizon;
    out.done = terminal || time_limit;
    out.truncated = time_limit && !terminal;
    out.state.terminated = out.done;
    return out;
  }

  /// Lowest achievable undiscounted return (used to score diverged runs).
  double min_return() const {
    const double h = spec_.horizon;
    switch (spec_.kind) {
      case EnvKind::CartPole: return 0.0;
      case EnvKind::GridWorld: return -0.01 * h;
      case EnvKind::PointMass: {
        double vmax = point_mass::kTau * h;
        double xmax = 1.0 + point_mass::kTau * point_mass::kTau * h * (h + 1.0) / 2.0;
        return -h * (xmax * xmax + point_mass::kVelocityWeight * vmax * vmax);
      }
    }
    return 0.0;
  }

  // GridWorld helpers -----------------------------------------------------
  std::array<int, 2> cell_of(std::span<const double> obs) const {
    const double scale = spec_.grid_size - 1;
    auto clampi = [&](double v) {
      return std::clamp(static_cast<int>(std::lround(v * scale)), 0, spec_.grid_size - 1);
    };
    return {clampi(obs[0]), clampi(obs[1])};
  }
  std::vector<double> observation_of(int row, int col) const {
    const double scale = spec_.grid_size - 1;
    return {row / scale, col / scale};
  }
  bool is_goal(std::span<const double> obs) const {
    auto [r, c] = cell_of(obs);
    return r == spec_.grid_size - 1 && c == spec_.grid_size - 1;
  }

 private:
  static bool step_cartpole(const std::vector<double>& s, int action, StepResult& out) {
    using namespace cartpole;
    if (s.size() != 4) throw UsageError("cartpole state must have 4 entries");
    const double x = s[0], x_dot = s[1], theta = s[2], theta_dot = s[3];
    const double force = action == 1 ? kForce : -kForce;
    const double cos_t = std::cos(theta), sin_t = std::sin(theta);
    const double temp = (force + kPoleMassLength * theta_dot * theta_dot * sin_t) / kTotalMass;
    const double theta_acc =
        (kGravity * sin_t - cos_t * temp) /
        (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / kTotalMass));
    const double x_acc = temp - kPoleMassLength * theta_acc * cos_t / kTotalMass;
    out.state.observation = {x + kTau * x_dot, x_dot + kTau * x_acc, theta + kTau * theta_dot,
                             theta_dot + kTau * theta_acc};
    out.reward = 1.0;
    return out_of_bounds(out.state.observation);
  }

  bool step_grid(const std::vector<double>& s, int action, StepResult& out) const {
    auto [row, col] = cell_of(s);
    const int last = spec_.grid_size - 1;
    switch (action) {
      case 0: row = std::max(row - 1, 0); break;     // up
      case 1: row = std::min(row + 1, last); break;  // down
      case 2: col = std::max(col - 1, 0); break;     // left
      case 3: col = std::min(col + 1, last); break;  // right
    }
    out.state.observation = observation_of(row, col);
    const bool goal = row == last && col == last;
    out.reward = goal ? 1.0 : -0.01;
    return goal;
  }

  static void step_point_mass(const std::vector<double>& s, int action, StepResult& out) {
    using namespace point_mass;
    const double force = static_cast<double>(action - 1);
    const double pos = s[0] + kTau * s[1];
    const double vel = s[1] + kTau * force;
    out.state.observation = {pos, vel};
    out.reward = -(pos * pos + kVelocityWeight * vel * vel);
  }

  EnvSpec spec_;
};

inline Env make_env(const EnvSpec& spec) { return Env(spec); }

/// Counts every reset/step forwarded to the wrapped environment.
class CountingEnv final : public EnvLike {
 public:
  explicit CountingEnv(EnvLike& inner) : inner_(&inner) {}

  int obs_dim() const override { return inner_->obs_dim(); }
  int action_count() const override { return inner_->action_count(); }
  EnvState reset(std::uint64_t seed) override {
    ++resets_;
    return inner_->reset(seed);
  }
  StepResult step(const EnvState& state, int action) override {
    ++steps_;
    return inner_->step(state, action);
  }

  long steps() const noexcept { return steps_; }
  long resets() const noexcept { return resets_; }

 private:
  EnvLike* inner_;
  long steps_ = 0;
  long resets_ = 0;
};

}  // namespace synthlab
