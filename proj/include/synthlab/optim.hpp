#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "synthlab/core.hpp"

namespace synthlab {

/// Throws NumericError naming the first non-finite coordinate.
inline void check_finite(std::span<const double> values, const char* what = "gradient") {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!std::isfinite(values[i])) throw NumericError(std::string("non-finite ") + what, i);
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

/// Rescales `grad` in place so its L2 norm is at most max_norm.
inline void clip_by_norm(std::span<double> grad, double max_norm) {
  if (max_norm <= 0.0) return;
  const double n = l2_norm(grad);
  if (n > max_norm) {
    const double s = max_norm / n;
    for (auto& g : grad) g *= s;
  }
}

inline void sgd_step(std::span<double> params, std::span<const double> grad, double learning_rate) {
  require(params.size() == grad.size(), "sgd_step: length mismatch");
  check_finite(grad);
  for (std::size_t i = 0; i < params.size(); ++i) params[i] -= learning_rate * grad[i];
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  long t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// Bias-corrected Adam.
inline void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
                      const AdamConfig& cfg) {
  require(params.size() == grad.size(), "adam_step: length mismatch");
  check_finite(grad);
  if (state.m.size() != params.size()) state = AdamState(params.size());
  ++state.t;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

}  // namespace synthlab
