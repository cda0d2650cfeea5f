#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "synthlab/core.hpp"
#include "synthlab/neural.hpp"

namespace synthlab {

/// Row-major dense matrix; rows are sequence positions.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  void resize(int r, int c) {
    rows = r;
    cols = c;
    data.assign(static_cast<std::size_t>(r) * c, 0.0);
  }
  double* row(int i) { return data.data() + static_cast<std::size_t>(i) * cols; }
  const double* row(int i) const { return data.data() + static_cast<std::size_t>(i) * cols; }
  std::span<double> row_span(int i) { return {row(i), static_cast<std::size_t>(cols)}; }
  std::span<const double> row_span(int i) const { return {row(i), static_cast<std::size_t>(cols)}; }

  static Matrix from_rows(const std::vector<std::vector<double>>& rows) {
    Matrix m(static_cast<int>(rows.size()), rows.empty() ? 0 : static_cast<int>(rows.front().size()));
    for (int i = 0; i < m.rows; ++i) {
      require(rows[static_cast<std::size_t>(i)].size() == static_cast<std::size_t>(m.cols), "ragged rows");
      std::copy(rows[static_cast<std::size_t>(i)].begin(), rows[static_cast<std::size_t>(i)].end(), m.row(i));
    }
    return m;
  }
  std::vector<std::vector<double>> to_rows() const {
    std::vector<std::vector<double>> out;
    for (int i = 0; i < rows; ++i) out.emplace_back(row(i), row(i) + cols);
    return out;
  }
};

struct AttentionBlockSpec {
  int d_model = 32;
  int heads = 4;
  int layers = 2;
  int max_sequence = 1001;
  // Feedforward width; 0 means 2 * d_model.
  int ff_dim = 0;

  int ff() const { return ff_dim > 0 ? ff_dim : 2 * d_model; }
  int head_dim() const { return d_model / heads; }

  void validate() const {
    if (d_model < 1) throw ConfigError("d_model", "must be positive");
    if (heads < 1) throw ConfigError("heads", "must be positive");
    if (layers < 1) throw ConfigError("layers", "must be positive");
    if (d_model % heads != 0) throw ConfigError("heads", "d_model must be divisible by heads");
    if (max_sequence < 1001) throw ConfigError("max_sequence", "must be >= 1001 (context plus query)");
    if (ff_dim < 0) throw ConfigError("ff_dim", "must be non-negative");
  }
  bool operator==(const AttentionBlockSpec&) const = default;
};

inline void append_attention_segments(ParamVector& p, const AttentionBlockSpec& spec, const std::string& prefix) {
  const int d = spec.d_model, f = spec.ff();
  for (int l = 0; l < spec.layers; ++l) {
    const std::string n = prefix + "layer" + std::to_string(l) + ".";
    for (const char* proj : {"q", "k", "v", "o"}) {
      p.add_segment(n + "w" + proj, {d, d});
      p.add_segment(n + "b" + proj, {d});
    }
    p.add_segment(n + "w1", {f, d});
    p.add_segment(n + "b1", {f});
    p.add_segment(n + "w2", {d, f});
    p.add_segment(n + "b2", {d});
  }
}

inline std::size_t attention_param_count(const AttentionBlockSpec& spec) {
  const std::size_t d = static_cast<std::size_t>(spec.d_model), f = static_cast<std::size_t>(spec.ff());
  return static_cast<std::size_t>(spec.layers) * (4 * (d * d + d) + f * d + f + d * f + d);
}

/// Scaled Gaussian init for all weight matrices; zero biases. The output
/// projections are scaled down by 1/sqrt(2 * layers) to keep the residual
/// stream bounded at init.
inline void init_attention_params(std::span<double> params, const AttentionBlockSpec& spec, Random& rng) {
  require(params.size() == attention_param_count(spec), "attention params length mismatch");
  const int d = spec.d_model, f = spec.ff();
  const double depth_scale = 1.0 / std::sqrt(2.0 * spec.layers);
  std::size_t off = 0;
  auto fill = [&](std::size_t n, double std) {
    for (std::size_t i = 0; i < n; ++i) params[off + i] = std == 0.0 ? 0.0 : rng.normal(0.0, std);
    off += n;
  };
  const std::size_t dd = static_cast<std::size_t>(d) * d;
  for (int l = 0; l < spec.layers; ++l) {
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    fill(dd, s), fill(static_cast<std::size_t>(d), 0.0);                  // q
    fill(dd, s), fill(static_cast<std::size_t>(d), 0.0);                  // k
    fill(dd, s), fill(static_cast<std::size_t>(d), 0.0);                  // v
    fill(dd, s * depth_scale), fill(static_cast<std::size_t>(d), 0.0);    // o
    fill(static_cast<std::size_t>(f) * d, s), fill(static_cast<std::size_t>(f), 0.0);
    fill(static_cast<std::size_t>(d) * f, depth_scale / std::sqrt(static_cast<double>(f))),
        fill(static_cast<std::size_t>(d), 0.0);
  }
}

inline ParamVector attention_init_params(const AttentionBlockSpec& spec, std::uint64_t seed) {
  ParamVector p;
  append_attention_segments(p, spec, "");
  Random rng(seed);
  init_attention_params(p.values, spec, rng);
  return p;
}

namespace detail {

struct LayerView {
  const double *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo, *w1, *b1, *w2, *b2;
};

struct LayerGrad {
  double *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo, *w1, *b1, *w2, *b2;
};

template <typename Ptr, typename View>
View layer_view(Ptr base, const AttentionBlockSpec& spec, int layer) {
  const std::size_t d = static_cast<std::size_t>(spec.d_model), f = static_cast<std::size_t>(spec.ff());
  const std::size_t per_layer = 4 * (d * d + d) + f * d + f + d * f + d;
  Ptr p = base + per_layer * static_cast<std::size_t>(layer);
  View v{};
  v.wq = p; p += d * d; v.bq = p; p += d;
  v.wk = p; p += d * d; v.bk = p; p += d;
  v.wv = p; p += d * d; v.bv = p; p += d;
  v.wo = p; p += d * d; v.bo = p; p += d;
  v.w1 = p; p += f * d; v.b1 = p; p += f;
  v.w2 = p; p += d * f; v.b2 = p;
  return v;
}

inline void affine(const double* w, const double* b, const double* x, int in, int out, double* y) {
  for (int o = 0; o < out; ++o) {
    const double* row = w + static_cast<std::size_t>(o) * in;
    double z = b[o];
    for (int i = 0; i < in; ++i) z += row[i] * x[i];
    y[o] = z;
  }
}

// Causal attention for one query row. `prefix_k`/`prefix_v` hold the
// `prefix` earlier rows (stride d); `own_k`/`own_v` are the row's own key and
// value. Writes the mixed values to ctx and, optionally, the weights
// (heads x (prefix+1)) to probs. Shared by full and cached evaluation so both
// produce bitwise-identical results.
inline void attend_row(const AttentionBlockSpec& spec, const double* q, const double* prefix_k,
                       const double* prefix_v, int prefix, const double* own_k, const double* own_v,
                       double* ctx, double* probs, std::vector<double>& scratch) {
  const int d = spec.d_model, hd = spec.head_dim(), count = prefix + 1;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  scratch.resize(static_cast<std::size_t>(count));
  for (int h = 0; h < spec.heads; ++h) {
    const int c0 = h * hd;
    double mx = -INFINITY;
    for (int j = 0; j < count; ++j) {
      const double* k = j < prefix ? prefix_k + static_cast<std::size_t>(j) * d : own_k;
      double s = 0.0;
      for (int c = 0; c < hd; ++c) s += q[c0 + c] * k[c0 + c];
      s *= scale;
      scratch[static_cast<std::size_t>(j)] = s;
      if (s > mx) mx = s;
    }
    double sum = 0.0;
    for (int j = 0; j < count; ++j) {
      double e = std::exp(scratch[static_cast<std::size_t>(j)] - mx);
      scratch[static_cast<std::size_t>(j)] = e;
      sum += e;
    }
    for (int c = 0; c < hd; ++c) ctx[c0 + c] = 0.0;
    for (int j = 0; j < count; ++j) {
      const double p = scratch[static_cast<std::size_t>(j)] / sum;
      if (probs) probs[static_cast<std::size_t>(h) * count + j] = p;
      const double* v = j < prefix ? prefix_v + static_cast<std::size_t>(j) * d : own_v;
      for (int c = 0; c < hd; ++c) ctx[c0 + c] += p * v[c0 + c];
    }
  }
}

// Output projection, residual, feedforward, residual for one row.
inline void finish_row(const AttentionBlockSpec& spec, const LayerView& w, const double* x, const double* ctx,
                       double* h, double* f1, double* out) {
  const int d = spec.d_model, f = spec.ff();
  affine(w.wo, w.bo, ctx, d, d, h);
  for (int c = 0; c < d; ++c) h[c] += x[c];
  affine(w.w1, w.b1, h, d, f, f1);
  for (int c = 0; c < f; ++c) f1[c] = std::tanh(f1[c]);
  affine(w.w2, w.b2, f1, f, d, out);
  for (int c = 0; c < d; ++c) out[c] += h[c];
}

}  // namespace detail

struct AttentionLayerTrace {
  Matrix x, q, k, v, ctx, h, f1;
  // probs for row i live at offset heads * i * (i + 1) / 2, shape heads x (i + 1).
  std::vector<double> probs;
};

struct AttentionTrace {
  std::vector<AttentionLayerTrace> layers;
  Matrix output;
};

inline std::size_t probs_offset(int heads, int row) {
  return static_cast<std::size_t>(heads) * static_cast<std::size_t>(row) * static_cast<std::size_t>(row + 1) / 2;
}

/// Causal multi-head self-attention stack with residual feedforward blocks.
/// `params` is the flat block layout from append_attention_segments.
/// With last_row_only the final layer is evaluated for the last position
/// only (other output rows are left zero); earlier layers are complete.
inline void attention_forward(const AttentionBlockSpec& spec, std::span<const double> params, const Matrix& input,
                              AttentionTrace& trace, bool last_row_only = false) {
  if (input.rows > spec.max_sequence)
    throw UsageError("attention_forward: sequence length " + std::to_string(input.rows) + " exceeds max_sequence");
  require(input.rows >= 1, "attention_forward: empty sequence");
  require(input.cols == spec.d_model, "attention_forward: token width != d_model");
  require(params.size() == attention_param_count(spec), "attention_forward: params length mismatch");
  const int L = input.rows, d = spec.d_model, f = spec.ff();
  trace.layers.resize(static_cast<std::size_t>(spec.layers));
  std::vector<double> scratch;
  const Matrix* x = &input;
  for (int l = 0; l < spec.layers; ++l) {
    auto& t = trace.layers[static_cast<std::size_t>(l)];
    auto w = detail::layer_view<const double*, detail::LayerView>(params.data(), spec, l);
    t.x = *x;
    t.q.resize(L, d), t.k.resize(L, d), t.v.resize(L, d), t.ctx.resize(L, d), t.h.resize(L, d), t.f1.resize(L, f);
    t.probs.assign(probs_offset(spec.heads, L), 0.0);
    const int first = last_row_only && l + 1 == spec.layers ? L - 1 : 0;
    for (int i = 0; i < L; ++i) {
      if (i >= first) detail::affine(w.wq, w.bq, t.x.row(i), d, d, t.q.row(i));
      detail::affine(w.wk, w.bk, t.x.row(i), d, d, t.k.row(i));
      detail::affine(w.wv, w.bv, t.x.row(i), d, d, t.v.row(i));
    }
    Matrix out(L, d);
    for (int i = first; i < L; ++i) {
      detail::attend_row(spec, t.q.row(i), t.k.row(0), t.v.row(0), i, t.k.row(i), t.v.row(i), t.ctx.row(i),
                         t.probs.data() + probs_offset(spec.heads, i), scratch);
      detail::finish_row(spec, w, t.x.row(i), t.ctx.row(i), t.h.row(i), t.f1.row(i), out.row(i));
    }
    if (l + 1 == spec.layers) {
      trace.output = std::move(out);
    } else {
      trace.layers[static_cast<std::size_t>(l) + 1].x = std::move(out);
      x = &trace.layers[static_cast<std::size_t>(l) + 1].x;
    }
  }
}

inline std::vector<std::vector<double>> attention_forward(const AttentionBlockSpec& spec, const ParamVector& params,
                                                          const std::vector<std::vector<double>>& sequence) {
  AttentionTrace trace;
  attention_forward(spec, params.values, Matrix::from_rows(sequence), trace);
  return trace.output.to_rows();
}

/// Accumulates parameter gradients into `grad` and writes the input gradient.
inline void attention_backward(const AttentionBlockSpec& spec, std::span<const double> params,
                               const AttentionTrace& trace, const Matrix& d_output, std::span<double> grad,
                               Matrix& d_input) {
  require(grad.size() == params.size(), "attention_backward: gradient length mismatch");
  const int d = spec.d_model, f = spec.ff(), hd = spec.head_dim(), H = spec.heads;
  const int L = d_output.rows;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Matrix dx = d_output;
  std::vector<double> df1(static_cast<std::size_t>(f)), dctx(static_cast<std::size_t>(d));
  for (int l = spec.layers - 1; l >= 0; --l) {
    const auto& t = trace.layers[static_cast<std::size_t>(l)];
    auto w = detail::layer_view<const double*, detail::LayerView>(params.data(), spec, l);
    auto g = detail::layer_view<double*, detail::LayerGrad>(grad.data(), spec, l);
    Matrix dh(L, d), dq(L, d), dk(L, d), dv(L, d), dctx_all(L, d);
    Matrix dx_prev(L, d);
    // feedforward + residual
    auto zero_row = [d](const double* r) {
      for (int c = 0; c < d; ++c)
        if (r[c] != 0.0) return false;
      return true;
    };
    for (int i = 0; i < L; ++i) {
      const double* dout = dx.row(i);
      if (zero_row(dout)) continue;
      const double* f1 = t.f1.row(i);
      const double* h = t.h.row(i);
      std::fill(df1.begin(), df1.end(), 0.0);
      for (int o = 0; o < d; ++o) {
        const double go = dout[o];
        g.b2[o] += go;
        double* gw = g.w2 + static_cast<std::size_t>(o) * f;
        const double* ww = w.w2 + static_cast<std::size_t>(o) * f;
        for (int c = 0; c < f; ++c) {
          gw[c] += go * f1[c];
          df1[static_cast<std::size_t>(c)] += go * ww[c];
        }
      }
      double* dhi = dh.row(i);
      for (int c = 0; c < d; ++c) dhi[c] = dout[c];
      for (int c = 0; c < f; ++c) {
        const double dz = df1[static_cast<std::size_t>(c)] * (1.0 - f1[c] * f1[c]);
        g.b1[c] += dz;
        double* gw = g.w1 + static_cast<std::size_t>(c) * d;
        const double* ww = w.w1 + static_cast<std::size_t>(c) * d;
        for (int k = 0; k < d; ++k) {
          gw[k] += dz * h[k];
          dhi[k] += dz * ww[k];
        }
      }
      // output projection + residual
      double* dxp = dx_prev.row(i);
      double* dci = dctx_all.row(i);
      const double* ctx = t.ctx.row(i);
      for (int c = 0; c < d; ++c) dxp[c] = dhi[c];
      for (int o = 0; o < d; ++o) {
        const double go = dhi[o];
        g.bo[o] += go;
        double* gw = g.wo + static_cast<std::size_t>(o) * d;
        const double* ww = w.wo + static_cast<std::size_t>(o) * d;
        for (int c = 0; c < d; ++c) {
          gw[c] += go * ctx[c];
          dci[c] += go * ww[c];
        }
      }
    }
    // attention mixing
    std::vector<double> dp;
    for (int i = 0; i < L; ++i) {
      const int count = i + 1;
      const double* probs = t.probs.data() + probs_offset(H, i);
      const double* dci = dctx_all.row(i);
      if (zero_row(dci)) continue;
      dp.resize(static_cast<std::size_t>(count));
      for (int h = 0; h < H; ++h) {
        const int c0 = h * hd;
        const double* p = probs + static_cast<std::size_t>(h) * count;
        double dot = 0.0;
        for (int j = 0; j < count; ++j) {
          const double* v = t.v.row(j);
          double s = 0.0;
          for (int c = 0; c < hd; ++c) s += dci[c0 + c] * v[c0 + c];
          dp[static_cast<std::size_t>(j)] = s;
          dot += p[j] * s;
          double* dvj = dv.row(j);
          for (int c = 0; c < hd; ++c) dvj[c0 + c] += p[j] * dci[c0 + c];
        }
        const double* q = t.q.row(i);
        double* dqi = dq.row(i);
        for (int j = 0; j < count; ++j) {
          const double ds = p[j] * (dp[static_cast<std::size_t>(j)] - dot) * scale;
          if (ds == 0.0) continue;
          const double* k = t.k.row(j);
          double* dkj = dk.row(j);
          for (int c = 0; c < hd; ++c) {
            dqi[c0 + c] += ds * k[c0 + c];
            dkj[c0 + c] += ds * q[c0 + c];
          }
        }
      }
    }
    // q/k/v projections
    auto project_back = [&](const Matrix& dm, const double* ww, double* gw, double* gb) {
      for (int i = 0; i < L; ++i) {
        const double* dr = dm.row(i);
        const double* xr = t.x.row(i);
        double* dxp = dx_prev.row(i);
        for (int o = 0; o < d; ++o) {
          const double go = dr[o];
          if (go == 0.0) continue;
          gb[o] += go;
          double* gwr = gw + static_cast<std::size_t>(o) * d;
          const double* wr = ww + static_cast<std::size_t>(o) * d;
          for (int c = 0; c < d; ++c) {
            gwr[c] += go * xr[c];
            dxp[c] += go * wr[c];
          }
        }
      }
    };
    project_back(dq, w.wq, g.wq, g.bq);
    project_back(dk, w.wk, g.wk, g.bk);
    project_back(dv, w.wv, g.wv, g.bv);
    dx = std::move(dx_prev);
  }
  d_input = std::move(dx);
  (void)dctx;
}

/// Per-layer keys and values of a fixed prefix. Lets a single extra query
/// row be evaluated in O(prefix) per layer with results bitwise identical to
/// a full forward over prefix + query.
class AttentionCache {
 public:
  AttentionCache() = default;
  AttentionCache(const AttentionBlockSpec& spec, std::span<const double> params, const Matrix& prefix)
      : spec_(spec), length_(prefix.rows) {
    if (prefix.rows + 1 > spec.max_sequence)
      throw UsageError("attention cache: prefix plus query exceeds max_sequence");
    AttentionTrace trace;
    attention_forward(spec, params, prefix, trace);
    for (auto& t : trace.layers) {
      keys_.push_back(std::move(t.k));
      values_.push_back(std::move(t.v));
    }
  }

  int length() const noexcept { return length_; }

  /// Output row for a token appended at position length().
  std::vector<double> query(std::span<const double> params, std::span<const double> token) const {
    const int d = spec_.d_model, f = spec_.ff();
    require(token.size() == static_cast<std::size_t>(d), "attention cache: token width mismatch");
    std::vector<double> x(token.begin(), token.end()), q(static_cast<std::size_t>(d)), k(q), v(q), ctx(q), h(q),
        out(q), f1(static_cast<std::size_t>(f)), scratch;
    for (int l = 0; l < spec_.layers; ++l) {
      auto w = detail::layer_view<const double*, detail::LayerView>(params.data(), spec_, l);
      detail::affine(w.wq, w.bq, x.data(), d, d, q.data());
      detail::affine(w.wk, w.bk, x.data(), d, d, k.data());
      detail::affine(w.wv, w.bv, x.data(), d, d, v.data());
      const auto& K = keys_[static_cast<std::size_t>(l)];
      const auto& V = values_[static_cast<std::size_t>(l)];
      detail::attend_row(spec_, q.data(), K.data.data(), V.data.data(), length_, k.data(), v.data(), ctx.data(),
                         nullptr, scratch);
      detail::finish_row(spec_, w, x.data(), ctx.data(), h.data(), f1.data(), out.data());
      x.swap(out);
    }
    return x;
  }

 private:
  AttentionBlockSpec spec_;
  int length_ = 0;
  std::vector<Matrix> keys_;
  std::vector<Matrix> values_;
};

}  // namespace synthlab
