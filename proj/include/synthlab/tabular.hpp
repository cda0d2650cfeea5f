#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "synthlab/core.hpp"
#include "synthlab/envs.hpp"

namespace synthlab {

/// Explicit finite MDP. P and R are indexed [s][a][s'] (flattened).
struct TabularMdp {
  int states = 0;
  int actions = 0;
  std::vector<double> P;
  std::vector<double> R;
  // Absorbing states with zero value.
  std::vector<bool> terminal;

  TabularMdp() = default;
  TabularMdp(int s, int a)
      : states(s),
        actions(a),
        P(static_cast<std::size_t>(s) * a * s, 0.0),
        R(static_cast<std::size_t>(s) * a * s, 0.0),
        terminal(static_cast<std::size_t>(s), false) {}

  std::size_t index(int s, int a, int next) const {
    return (static_cast<std::size_t>(s) * actions + a) * states + next;
  }
  double& p(int s, int a, int next) { return P[index(s, a, next)]; }
  double& r(int s, int a, int next) { return R[index(s, a, next)]; }
  double p(int s, int a, int next) const { return P[index(s, a, next)]; }
  double r(int s, int a, int next) const { return R[index(s, a, next)]; }
};

struct ValueIterationResult {
  std::vector<double> values;
  std::vector<int> policy;
  int iterations = 0;
};

inline double q_value(const TabularMdp& mdp, const std::vector<double>& v, int s, int a, double gamma) {
  double q = 0.0;
  for (int n = 0; n < mdp.states; ++n) {
    const double p = mdp.p(s, a, n);
    if (p == 0.0) continue;
    q += p * (mdp.r(s, a, n) + gamma * (mdp.terminal[static_cast<std::size_t>(n)] ? 0.0 : v[static_cast<std::size_t>(n)]));
  }
  return q;
}

/// Bellman backups to a fixed point (sup-norm change below tolerance); the
/// greedy policy breaks ties toward the lowest action index.
inline ValueIterationResult value_iteration_oracle(const TabularMdp& mdp, double gamma, double tolerance,
                                                   int max_iterations = 1000000) {
  ValueIterationResult res;
  res.values.assign(static_cast<std::size_t>(mdp.states), 0.0);
  std::vector<double> next(res.values.size());
  for (int it = 1; it <= max_iterations; ++it) {
    double delta = 0.0;
    for (int s = 0; s < mdp.states; ++s) {
      if (mdp.terminal[static_cast<std::size_t>(s)]) {
        next[static_cast<std::size_t>(s)] = 0.0;
        continue;
      }
      double best = -INFINITY;
      for (int a = 0; a < mdp.actions; ++a) best = std::max(best, q_value(mdp, res.values, s, a, gamma));
      delta = std::max(delta, std::abs(best - res.values[static_cast<std::size_t>(s)]));
      next[static_cast<std::size_t>(s)] = best;
    }
    res.values.swap(next);
    if (!std::isfinite(delta)) throw NumericError("value iteration diverged", static_cast<std::size_t>(it));
    if (delta < tolerance) {
      res.iterations = it;
      res.policy.assign(static_cast<std::size_t>(mdp.states), 0);
      for (int s = 0; s < mdp.states; ++s) {
        double best = -INFINITY;
        for (int a = 0; a < mdp.actions; ++a) {
          const double q = q_value(mdp, res.values, s, a, gamma);
          if (q > best) {
            best = q;
            res.policy[static_cast<std::size_t>(s)] = a;
          }
        }
      }
      return res;
    }
  }
  throw NumericError("value iteration did not converge", static_cast<std::size_t>(max_iterations));
}

/// Random dense MDP with Dirichlet-like transitions and Gaussian rewards.
inline TabularMdp random_mdp(int states, int actions, Random& rng) {
  TabularMdp mdp(states, actions);
  for (int s = 0; s < states; ++s)
    for (int a = 0; a < actions; ++a) {
      double sum = 0.0;
      for (int n = 0; n < states; ++n) {
        const double w = -std::log(1.0 - rng.uniform());
        mdp.p(s, a, n) = w;
        sum += w;
      }
      for (int n = 0; n < states; ++n) {
        mdp.p(s, a, n) /= sum;
        mdp.r(s, a, n) = rng.normal();
      }
    }
  return mdp;
}

/// Exact tabular model of a GridWorld env; states are cells in row-major order.
inline TabularMdp tabularize_gridworld(const Env& env) {
  const int n = env.spec().grid_size;
  require(env.spec().kind == EnvKind::GridWorld, "tabularize_gridworld: not a GridWorld");
  TabularMdp mdp(n * n, 4);
  for (int row = 0; row < n; ++row)
    for (int col = 0; col < n; ++col) {
      const int s = row * n + col;
      if (row == n - 1 && col == n - 1) {
        mdp.terminal[static_cast<std::size_t>(s)] = true;
        continue;
      }
      EnvState st{env.observation_of(row, col), 0, false};
      for (int a = 0; a < 4; ++a) {
        auto r = env.transition(st, a);
        auto [nr, nc] = env.cell_of(r.state.observation);
        mdp.p(s, a, nr * n + nc) = 1.0;
        mdp.r(s, a, nr * n + nc) = r.reward;
      }
    }
  return mdp;
}

/// Copy of `mdp` whose rewards are replaced by shaped(s, a, s', r).
inline TabularMdp reshape_rewards(const TabularMdp& mdp,
                                  const std::function<double(int, int, int, double)>& shaped) {
  TabularMdp out = mdp;
  for (int s = 0; s < mdp.states; ++s)
    for (int a = 0; a < mdp.actions; ++a)
      for (int n = 0; n < mdp.states; ++n) out.r(s, a, n) = shaped(s, a, n, mdp.r(s, a, n));
  return out;
}

}  // namespace synthlab
