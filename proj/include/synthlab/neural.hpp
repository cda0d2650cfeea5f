#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "synthlab/core.hpp"

namespace synthlab {

enum class Activation { Linear, Tanh, ReLU, Sigmoid };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "Linear";
    case Activation::Tanh: return "Tanh";
    case Activation::ReLU: return "ReLU";
    case Activation::Sigmoid: return "Sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "Linear") return Activation::Linear;
  if (s == "Tanh") return Activation::Tanh;
  if (s == "ReLU") return Activation::ReLU;
  if (s == "Sigmoid") return Activation::Sigmoid;
  throw ConfigError("activation", "unknown activation '" + s + "'");
}

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::Linear: return z;
    case Activation::Tanh: return std::tanh(z);
    case Activation::ReLU: return z > 0.0 ? z : 0.0;
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-z));
  }
  return z;
}

// Derivative expressed through the activation's output y = f(z).
inline double activation_grad(Activation a, double y) {
  switch (a) {
    case Activation::Linear: return 1.0;
    case Activation::Tanh: return 1.0 - y * y;
    case Activation::ReLU: return y > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

struct LayerSpec {
  int in_dim = 1;
  int out_dim = 1;
  Activation activation = Activation::Linear;

  bool operator==(const LayerSpec&) const = default;
};

/// One named tensor inside a flat parameter vector.
struct Segment {
  std::string name;
  std::vector<int> shape;
  std::size_t offset = 0;

  std::size_t size() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                           [](std::size_t a, int b) { return a * static_cast<std::size_t>(b); });
  }
  bool operator==(const Segment&) const = default;
};

/// Flat double-precision parameters plus the manifest mapping them to tensors.
struct ParamVector {
  std::vector<double> values;
  std::vector<Segment> manifest;

  std::size_t size() const noexcept { return values.size(); }

  void add_segment(std::string name, std::vector<int> shape) {
    Segment seg{std::move(name), std::move(shape), values.size()};
    values.resize(values.size() + seg.size(), 0.0);
    manifest.push_back(std::move(seg));
  }

  const Segment& segment(const std::string& name) const {
    for (const auto& s : manifest)
      if (s.name == name) return s;
    throw UsageError("no segment named " + name);
  }

  std::span<double> view(const Segment& s) { return {values.data() + s.offset, s.size()}; }
  std::span<const double> view(const Segment& s) const { return {values.data() + s.offset, s.size()}; }

  /// Segments must be contiguous, ordered, non-overlapping and cover values.
  void validate() const {
    std::size_t expect = 0;
    for (const auto& s : manifest) {
      if (s.offset != expect) throw UsageError("manifest segment " + s.name + " is not contiguous");
      expect += s.size();
    }
    if (expect != values.size()) throw UsageError("manifest does not cover parameter values");
  }

  ParamVector zeros_like() const {
    ParamVector z = *this;
    std::fill(z.values.begin(), z.values.end(), 0.0);
    return z;
  }

  bool operator==(const ParamVector&) const = default;
};

inline void validate_layers(std::span<const LayerSpec> layers) {
  if (layers.empty()) throw ConfigError("layers", "network needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_dim < 1 || layers[i].out_dim < 1)
      throw ConfigError("layers", "layer " + std::to_string(i) + " has a non-positive dimension");
    if (i > 0 && layers[i].in_dim != layers[i - 1].out_dim)
      throw ConfigError("layers", "layer " + std::to_string(i) + " in_dim does not match previous out_dim");
  }
}

inline std::size_t param_count(std::span<const LayerSpec> layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.in_dim) * l.out_dim + l.out_dim;
  return n;
}

/// Builds the standard dense stack: hidden layers with `hidden` activation,
/// final layer with `output`.
inline std::vector<LayerSpec> dense_stack(int in_dim, std::span<const int> hidden, int out_dim,
                                          Activation hidden_act, Activation output_act = Activation::Linear) {
  std::vector<LayerSpec> layers;
  int prev = in_dim;
  for (int h : hidden) {
    layers.push_back({prev, h, hidden_act});
    prev = h;
  }
  layers.push_back({prev, out_dim, output_act});
  return layers;
}

inline ParamVector zero_params(std::span<const LayerSpec> layers) {
  validate_layers(layers);
  ParamVector p;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    p.add_segment("layer" + std::to_string(i) + ".weight", {layers[i].out_dim, layers[i].in_dim});
    p.add_segment("layer" + std::to_string(i) + ".bias", {layers[i].out_dim});
  }
  return p;
}

/// Gaussian weights with std 1/sqrt(in_dim), zero biases.
inline ParamVector init_params(std::span<const LayerSpec> layers, std::uint64_t seed) {
  ParamVector p = zero_params(layers);
  Random rng(seed);
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const double std = 1.0 / std::sqrt(static_cast<double>(layers[i].in_dim));
    for (auto& w : p.view(p.manifest[2 * i])) w = rng.normal(0.0, std);
  }
  return p;
}

/// Dot product with four independent accumulators (fixed summation order).
inline double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

/// Per-layer outputs of one forward pass plus backward scratch; reusable.
struct MlpTrace {
  std::vector<double> input;
  std::vector<std::vector<double>> outputs;
  std::vector<double> delta, next_delta;

  std::span<const double> output() const { return outputs.back(); }
};

class Mlp {
 public:
  Mlp() = default;
  Mlp(std::vector<LayerSpec> layers, ParamVector params) : layers_(std::move(layers)), params_(std::move(params)) {
    validate_layers(layers_);
    if (params_.size() != param_count(layers_))
      throw UsageError("parameter vector length does not match layer specs");
  }
  Mlp(std::vector<LayerSpec> layers, std::uint64_t seed)
      : Mlp(layers, init_params(layers, seed)) {}

  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  const ParamVector& params() const noexcept { return params_; }
  ParamVector& mutable_params() noexcept { return params_; }
  std::span<const double> values() const noexcept { return params_.values; }
  std::span<double> values() noexcept { return params_.values; }
  int in_dim() const { return layers_.front().in_dim; }
  int out_dim() const { return layers_.back().out_dim; }
  std::size_t size() const noexcept { return params_.size(); }

  /// Replace parameters (same length) keeping the manifest.
  void load(std::span<const double> values) {
    require(values.size() == params_.size(), "parameter length mismatch on load");
    std::copy(values.begin(), values.end(), params_.values.begin());
  }
  ParamVector flatten() const { return params_; }

  void forward(std::span<const double> input, MlpTrace& trace) const {
    if (input.size() != static_cast<std::size_t>(in_dim()))
      throw UsageError("forward: input length " + std::to_string(input.size()) + " != " +
                       std::to_string(in_dim()));
    trace.input.assign(input.begin(), input.end());
    trace.outputs.resize(layers_.size());
    const double* p = params_.values.data();
    std::span<const double> x = trace.input;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const auto& spec = layers_[l];
      auto& y = trace.outputs[l];
      y.resize(static_cast<std::size_t>(spec.out_dim));
      const double* w = p;
      const double* b = p + static_cast<std::size_t>(spec.out_dim) * spec.in_dim;
      for (int o = 0; o < spec.out_dim; ++o) {
        const double* row = w + static_cast<std::size_t>(o) * spec.in_dim;
        const double z = b[o] + dot(row, x.data(), spec.in_dim);
        y[static_cast<std::size_t>(o)] = activate(spec.activation, z);
      }
      p = b + spec.out_dim;
      x = y;
    }
  }

  std::vector<double> forward(std::span<const double> input) const {
    MlpTrace trace;
    forward(input, trace);
    return std::move(trace.outputs.back());
  }

  /// Accumulates d(loss)/d(params) into `grad` given d(loss)/d(output).
  /// Optionally writes d(loss)/d(input) into `input_grad`.
  void backward(MlpTrace& trace, std::span<const double> upstream, std::span<double> grad,
                std::span<double> input_grad = {}) const {
    if (upstream.size() != static_cast<std::size_t>(out_dim()))
      throw UsageError("backward: upstream gradient length mismatch");
    if (grad.size() != params_.size()) throw UsageError("backward: gradient buffer length mismatch");
    if (trace.outputs.size() != layers_.size()) throw UsageError("backward: trace does not match network");

    auto& delta = trace.delta;
    auto& next_delta = trace.next_delta;
    delta.assign(upstream.begin(), upstream.end());
    std::size_t offset = params_.size();
    for (std::size_t li = layers_.size(); li-- > 0;) {
      const auto& spec = layers_[li];
      const std::size_t wsize = static_cast<std::size_t>(spec.out_dim) * spec.in_dim;
      offset -= wsize + spec.out_dim;
      const double* w = params_.values.data() + offset;
      double* gw = grad.data() + offset;
      double* gb = gw + wsize;
      const auto& y = trace.outputs[li];
      std::span<const double> x = li == 0 ? std::span<const double>(trace.input) : trace.outputs[li - 1];
      for (int o = 0; o < spec.out_dim; ++o)
        delta[static_cast<std::size_t>(o)] *= activation_grad(spec.activation, y[static_cast<std::size_t>(o)]);

      const bool need_input = li > 0 || !input_grad.empty();
      if (need_input) next_delta.assign(static_cast<std::size_t>(spec.in_dim), 0.0);
      for (int o = 0; o < spec.out_dim; ++o) {
        const double d = delta[static_cast<std::size_t>(o)];
        gb[o] += d;
        if (d == 0.0) continue;
        double* grow = gw + static_cast<std::size_t>(o) * spec.in_dim;
        const double* wrow = w + static_cast<std::size_t>(o) * spec.in_dim;
        for (int i = 0; i < spec.in_dim; ++i) grow[i] += d * x[static_cast<std::size_t>(i)];
        if (need_input)
          for (int i = 0; i < spec.in_dim; ++i) next_delta[static_cast<std::size_t>(i)] += d * wrow[i];
      }
      if (need_input) delta.swap(next_delta);
    }
    if (!input_grad.empty()) {
      require(input_grad.size() == delta.size(), "backward: input gradient buffer length mismatch");
      std::copy(delta.begin(), delta.end(), input_grad.begin());
    }
  }

 private:
  std::vector<LayerSpec> layers_;
  ParamVector params_;
};

inline std::vector<double> forward(const Mlp& mlp, std::span<const double> input) { return mlp.forward(input); }

/// Parameter gradient of the scalar loss whose output-gradient is `upstream`.
inline ParamVector backward(const Mlp& mlp, std::span<const double> input, std::span<const double> upstream) {
  MlpTrace trace;
  mlp.forward(input, trace);
  ParamVector g = mlp.params().zeros_like();
  mlp.backward(trace, upstream, g.values);
  return g;
}

// ---------------------------------------------------------------------------
// Losses. Each returns the loss and writes d(loss)/d(prediction).

inline double mse_loss(std::span<const double> prediction, std::span<const double> target,
                       std::span<double> grad) {
  require(prediction.size() == target.size() && grad.size() == prediction.size(), "mse: size mismatch");
  const double n = static_cast<double>(prediction.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    loss += d * d;
    grad[i] = 2.0 * d / n;
  }
  return loss / n;
}

/// Smooth L1 on a single residual; writes d/d(prediction).
inline double huber_loss(double prediction, double target, double& grad, double delta = 1.0) {
  const double d = prediction - target;
  if (std::abs(d) <= delta) {
    grad = d;
    return 0.5 * d * d;
  }
  grad = d > 0 ? delta : -delta;
  return delta * (std::abs(d) - 0.5 * delta);
}

inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (auto& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (auto& v : p) v /= sum;
  return p;
}

inline std::vector<double> log_softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double v : logits) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  std::vector<double> out(logits.begin(), logits.end());
  for (auto& v : out) v -= lse;
  return out;
}

/// -log softmax(logits)[label]; gradient is softmax - onehot.
inline double softmax_cross_entropy(std::span<const double> logits, int label, std::span<double> grad) {
  auto p = softmax(logits);
  for (std::size_t i = 0; i < p.size(); ++i) grad[i] = p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0);
  return -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
}

}  // namespace synthlab
