// SPDX-License-Identifier: Apache-2.0
#pragma once

// Ternary-weight transformer: pre-norm residual blocks built from BitLinear
// projections (int8 activations x packed ternary weights), RoPE attention
// with grouped KV heads, an extra RMSNorm ("subln") in front of every
// sub-layer output projection, a non-gated ReLU^2 FFN, and no bias terms.
// Embedding, norms and LM head stay in float32.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitnet/config.hpp"
#include "bitnet/error.hpp"
#include "bitnet/kernel.hpp"
#include "bitnet/matrix.hpp"
#include "bitnet/pack.hpp"
#include "bitnet/parallel.hpp"
#include "bitnet/quant.hpp"

namespace bitnet {

using TokenId = uint32_t;

// ---------------------------------------------------------------------------
// Elementwise building blocks

inline void rmsnorm(std::span<const float> x, std::span<const float> gain, float eps,
                    std::span<float> out) {
  if (gain.size() != x.size() || out.size() != x.size()) {
    fail(ErrorKind::kShape, "rmsnorm: dimension mismatch");
  }
  double sum_sq = 0.0;
  for (float v : x) sum_sq += double(v) * double(v);
  const double mean_sq = x.empty() ? 0.0 : sum_sq / double(x.size());
  const float inv = static_cast<float>(1.0 / std::sqrt(mean_sq + double(eps)));
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = gain[i] * (x[i] * inv);
}

inline std::vector<float> rmsnorm(std::span<const float> x, std::span<const float> gain,
                                  float eps) {
  std::vector<float> out(x.size());
  rmsnorm(x, gain, eps, out);
  return out;
}

inline MatrixF rmsnorm_rows(const MatrixF& x, std::span<const float> gain, float eps) {
  MatrixF out(x.rows(), x.cols(), 0.0f);
  for (std::size_t t = 0; t < x.rows(); ++t) rmsnorm(x.row(t), gain, eps, out.row(t));
  return out;
}

inline float relu_squared(float x) noexcept {
  const float r = x > 0.0f ? x : 0.0f;
  return r * r;
}

// Rotates consecutive pairs (x[2j], x[2j+1]) by position * theta^(-2j/d).
inline void rope_rotate(std::span<float> x, std::size_t position, float theta) {
  const std::size_t d = x.size();
  if (d % 2 != 0) fail(ErrorKind::kShape, "rope: head_dim must be even");
  for (std::size_t j = 0; j < d / 2; ++j) {
    const double freq = std::pow(double(theta), -2.0 * double(j) / double(d));
    const double angle = double(position) * freq;
    const double c = std::cos(angle), s = std::sin(angle);
    const double a = x[2 * j], b = x[2 * j + 1];
    x[2 * j] = static_cast<float>(a * c - b * s);
    x[2 * j + 1] = static_cast<float>(a * s + b * c);
  }
}

inline void rope_apply(std::span<float> q, std::span<float> k, std::size_t position, float theta) {
  rope_rotate(q, position, theta);
  rope_rotate(k, position, theta);
}

// ---------------------------------------------------------------------------
// Weights and state

struct LayerWeights {
  PackedTernaryTensor wq, wk, wv, wo;
  PackedTernaryTensor w_up, w_down;
  std::vector<float> attn_norm, ffn_norm;
  std::vector<float> attn_subln;  // d_model, before wo
  std::vector<float> ffn_subln;   // d_ff, before w_down

  friend bool operator==(const LayerWeights&, const LayerWeights&) = default;
};

struct ParameterInfo {
  std::string name;
  std::string kind;  // ternary_weight | norm_gain | embedding | lm_head
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct Model {
  ModelConfig config;
  MatrixF embedding;  // vocab x d_model
  std::vector<LayerWeights> layers;
  std::vector<float> final_norm;
  MatrixF lm_head;  // vocab x d_model, untied from the embedding

  void validate() const;
  std::vector<ParameterInfo> parameter_inventory() const;

  friend bool operator==(const Model&, const Model&) = default;
};

namespace detail {

inline void expect_shape(const PackedTernaryTensor& t, std::size_t rows, std::size_t cols,
                         const std::string& name) {
  if (t.rows() != rows || t.cols() != cols) {
    fail(ErrorKind::kShape, name + ": expected " + std::to_string(rows) + "x" +
                                std::to_string(cols) + ", got " + std::to_string(t.rows()) + "x" +
                                std::to_string(t.cols()));
  }
}

inline void expect_gain(const std::vector<float>& g, std::size_t n, const std::string& name) {
  if (g.size() != n) fail(ErrorKind::kShape, name + ": expected length " + std::to_string(n));
  for (float v : g) {
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidInput, name + ": non-finite gain");
  }
}

}  // namespace detail

inline void Model::validate() const {
  config.validate();
  const std::size_t d = config.d_model, kv = config.kv_dim(), ff = config.d_ff,
                    v = config.vocab_size;
  if (embedding.rows() != v || embedding.cols() != d) fail(ErrorKind::kShape, "embedding shape");
  if (lm_head.rows() != v || lm_head.cols() != d) fail(ErrorKind::kShape, "lm_head shape");
  detail::expect_gain(final_norm, d, "final_norm");
  if (layers.size() != config.n_layers) fail(ErrorKind::kShape, "layer count != n_layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    detail::expect_shape(l.wq, d, d, p + "wq");
    detail::expect_shape(l.wk, kv, d, p + "wk");
    detail::expect_shape(l.wv, kv, d, p + "wv");
    detail::expect_shape(l.wo, d, d, p + "wo");
    detail::expect_shape(l.w_up, ff, d, p + "w_up");
    detail::expect_shape(l.w_down, d, ff, p + "w_down");
    detail::expect_gain(l.attn_norm, d, p + "attn_norm");
    detail::expect_gain(l.ffn_norm, d, p + "ffn_norm");
    detail::expect_gain(l.attn_subln, d, p + "attn_subln");
    detail::expect_gain(l.ffn_subln, ff, p + "ffn_subln");
  }
}

inline std::vector<ParameterInfo> Model::parameter_inventory() const {
  std::vector<ParameterInfo> out;
  out.push_back({"tok_embeddings", "embedding", embedding.rows(), embedding.cols()});
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::string p = "layers." + std::to_string(i) + ".";
    auto ternary = [&](const char* n, const PackedTernaryTensor& t) {
      out.push_back({p + n, "ternary_weight", t.rows(), t.cols()});
    };
    auto gain = [&](const char* n, const std::vector<float>& g) {
      out.push_back({p + n, "norm_gain", 1, g.size()});
    };
    gain("attn_norm", l.attn_norm);
    ternary("wq", l.wq);
    ternary("wk", l.wk);
    ternary("wv", l.wv);
    gain("attn_subln", l.attn_subln);
    ternary("wo", l.wo);
    gain("ffn_norm", l.ffn_norm);
    ternary("w_up", l.w_up);
    gain("ffn_subln", l.ffn_subln);
    ternary("w_down", l.w_down);
  }
  out.push_back({"norm", "norm_gain", 1, final_norm.size()});
  out.push_back({"output", "lm_head", lm_head.rows(), lm_head.cols()});
  return out;
}

// Keys and values for every layer, laid out [n_kv_heads][max_seq_len][head_dim].
class KVCache {
 public:
  KVCache() = default;
  explicit KVCache(const ModelConfig& c)
      : n_layers_(c.n_layers),
        n_kv_heads_(c.n_kv_heads),
        max_seq_len_(c.max_seq_len),
        head_dim_(c.head_dim()),
        keys_(c.n_layers, std::vector<float>(c.n_kv_heads * c.max_seq_len * c.head_dim(), 0.0f)),
        values_(keys_) {}

  std::size_t length() const noexcept { return length_; }
  std::size_t capacity() const noexcept { return max_seq_len_; }

  // Forget everything at or past `len`.
  void truncate(std::size_t len) {
    if (len > length_) fail(ErrorKind::kCapacity, "truncate beyond current length");
    length_ = len;
  }
  void set_length(std::size_t len) {
    if (len > max_seq_len_) fail(ErrorKind::kCapacity, "KV cache length past capacity");
    length_ = len;
  }

  std::span<float> key(std::size_t layer, std::size_t kv_head, std::size_t pos) {
    return {keys_[layer].data() + offset(kv_head, pos), head_dim_};
  }
  std::span<float> value(std::size_t layer, std::size_t kv_head, std::size_t pos) {
    return {values_[layer].data() + offset(kv_head, pos), head_dim_};
  }
  std::span<const float> key(std::size_t layer, std::size_t kv_head, std::size_t pos) const {
    return {keys_[layer].data() + offset(kv_head, pos), head_dim_};
  }
  std::span<const float> value(std::size_t layer, std::size_t kv_head, std::size_t pos) const {
    return {values_[layer].data() + offset(kv_head, pos), head_dim_};
  }

 private:
  std::size_t offset(std::size_t kv_head, std::size_t pos) const noexcept {
    return (kv_head * max_seq_len_ + pos) * head_dim_;
  }

  std::size_t n_layers_ = 0, n_kv_heads_ = 0, max_seq_len_ = 0, head_dim_ = 0;
  std::size_t length_ = 0;
  std::vector<std::vector<float>> keys_, values_;
};

// ---------------------------------------------------------------------------
// Forward pass

// Called with the quantized input of every BitLinear projection, in
// execution order. Used by tests to replay the integer inputs.
using BitLinearObserver = std::function<void(std::string_view projection,
                                             const QuantizedActivations& qa)>;

struct ForwardOptions {
  KernelPath path = KernelPath::kPacked;
  KernelOptions kernel{};
  BitLinearObserver observer{};
};

inline MatrixF bitlinear_apply(const QuantizedActivations& qa, const PackedTernaryTensor& pt,
                               const ForwardOptions& opt) {
  const auto acc = gemm(opt.path, pt, qa, opt.kernel);
  return dequantize_output(acc, pt.weight_scale(), qa.act_scales);
}

// absmax-quantize every token row, exact integer matmul, per-token rescale.
inline MatrixF bitlinear_forward(const MatrixF& x, const PackedTernaryTensor& pt,
                                 const ForwardOptions& opt = {}) {
  if (x.cols() != pt.cols()) fail(ErrorKind::kShape, "bitlinear: input width != weight cols");
  return bitlinear_apply(absmax_quantize(x), pt, opt);
}

namespace detail {

inline void observe(const ForwardOptions& opt, const std::string& name,
                    const QuantizedActivations& qa) {
  if (opt.observer) opt.observer(name, qa);
}

inline std::string layer_prefix(std::size_t layer) {
  return "layers." + std::to_string(layer) + ".";
}

}  // namespace detail

// Attention sub-layer output (before the residual add). Appends this call's
// keys and values at positions [start_pos, start_pos + T) and sets the cache
// length to start_pos + T.
inline MatrixF attention_forward(const MatrixF& x, const LayerWeights& layer,
                                 const ModelConfig& cfg, KVCache& cache, std::size_t layer_index,
                                 std::size_t start_pos, const ForwardOptions& opt = {}) {
  const std::size_t tokens = x.rows(), d = cfg.d_model, hd = cfg.head_dim();
  const std::size_t n_heads = cfg.n_heads, group = cfg.n_heads / cfg.n_kv_heads;
  if (x.cols() != d) fail(ErrorKind::kShape, "attention: input width != d_model");
  if (start_pos > cache.length()) fail(ErrorKind::kCapacity, "attention: gap in KV cache");
  if (start_pos + tokens > cache.capacity()) {
    fail(ErrorKind::kCapacity, "attention: " + std::to_string(start_pos + tokens) +
                                   " positions exceed max_seq_len " +
                                   std::to_string(cache.capacity()));
  }
  const std::string prefix = detail::layer_prefix(layer_index);

  const auto qa = absmax_quantize(rmsnorm_rows(x, layer.attn_norm, cfg.norm_eps));
  detail::observe(opt, prefix + "wq", qa);
  detail::observe(opt, prefix + "wk", qa);
  detail::observe(opt, prefix + "wv", qa);
  MatrixF q = bitlinear_apply(qa, layer.wq, opt);
  MatrixF k = bitlinear_apply(qa, layer.wk, opt);
  const MatrixF v = bitlinear_apply(qa, layer.wv, opt);

  for (std::size_t t = 0; t < tokens; ++t) {
    const std::size_t pos = start_pos + t;
    for (std::size_t h = 0; h < n_heads; ++h) {
      rope_rotate(q.row(t).subspan(h * hd, hd), pos, cfg.rope_theta);
    }
    for (std::size_t h = 0; h < cfg.n_kv_heads; ++h) {
      auto kh = k.row(t).subspan(h * hd, hd);
      rope_rotate(kh, pos, cfg.rope_theta);
      std::copy(kh.begin(), kh.end(), cache.key(layer_index, h, pos).begin());
      const auto vh = v.row(t).subspan(h * hd, hd);
      std::copy(vh.begin(), vh.end(), cache.value(layer_index, h, pos).begin());
    }
  }
  cache.set_length(start_pos + tokens);

  MatrixF heads(tokens, d, 0.0f);
  const float inv_sqrt = 1.0f / std::sqrt(static_cast<float>(hd));
  const std::size_t work = tokens * n_heads * (start_pos + tokens) * hd;
  const unsigned workers = work < opt.kernel.min_parallel_work ? 1u : opt.kernel.workers;
  parallel_for(tokens * n_heads, workers, [&](std::size_t begin, std::size_t end) {
    std::vector<float> scores(start_pos + tokens);
    for (std::size_t th = begin; th < end; ++th) {
      const std::size_t t = th / n_heads, h = th % n_heads, kvh = h / group;
      const std::size_t n_pos = start_pos + t + 1;  // causal: keys 0..pos
      const float* qh = q.row(t).data() + h * hd;
      float max_score = -std::numeric_limits<float>::infinity();
      for (std::size_t p = 0; p < n_pos; ++p) {
        const auto kp = cache.key(layer_index, kvh, p);
        float s = 0.0f;
        for (std::size_t i = 0; i < hd; ++i) s += qh[i] * kp[i];
        scores[p] = s * inv_sqrt;
        max_score = std::max(max_score, scores[p]);
      }
      float denom = 0.0f;
      for (std::size_t p = 0; p < n_pos; ++p) {
        scores[p] = std::exp(scores[p] - max_score);
        denom += scores[p];
      }
      float* out = heads.row(t).data() + h * hd;
      for (std::size_t p = 0; p < n_pos; ++p) {
        const float w = scores[p] / denom;
        const auto vp = cache.value(layer_index, kvh, p);
        for (std::size_t i = 0; i < hd; ++i) out[i] += w * vp[i];
      }
    }
  });

  const auto qo = absmax_quantize(rmsnorm_rows(heads, layer.attn_subln, cfg.norm_eps));
  detail::observe(opt, prefix + "wo", qo);
  return bitlinear_apply(qo, layer.wo, opt);
}

// FFN sub-layer output: w_down(subln(relu^2(w_up(rmsnorm(x))))).
inline MatrixF ffn_forward(const MatrixF& x, const LayerWeights& layer, const ModelConfig& cfg,
                           std::size_t layer_index = 0, const ForwardOptions& opt = {}) {
  if (x.cols() != cfg.d_model) fail(ErrorKind::kShape, "ffn: input width != d_model");
  const std::string prefix = detail::layer_prefix(layer_index);
  const auto qa = absmax_quantize(rmsnorm_rows(x, layer.ffn_norm, cfg.norm_eps));
  detail::observe(opt, prefix + "w_up", qa);
  MatrixF up = bitlinear_apply(qa, layer.w_up, opt);
  for (float& u : up.flat()) u = relu_squared(u);
  const auto qd = absmax_quantize(rmsnorm_rows(up, layer.ffn_subln, cfg.norm_eps));
  detail::observe(opt, prefix + "w_down", qd);
  return bitlinear_apply(qd, layer.w_down, opt);
}

// Logits (T x vocab) for every input position. Tokens occupy positions
// [start_pos, start_pos + T); cache entries at or past start_pos are replaced.
inline MatrixF forward_pass(std::span<const TokenId> tokens, const Model& model, KVCache& cache,
                            std::size_t start_pos, const ForwardOptions& opt = {}) {
  const auto& cfg = model.config;
  const std::size_t d = cfg.d_model;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= cfg.vocab_size) {
      fail(ErrorKind::kInvalidToken, "token id " + std::to_string(tokens[i]) + " at index " +
                                         std::to_string(i) + " >= vocab_size " +
                                         std::to_string(cfg.vocab_size));
    }
  }
  if (start_pos > cache.length()) fail(ErrorKind::kCapacity, "forward: gap in KV cache");
  if (start_pos + tokens.size() > cfg.max_seq_len) {
    fail(ErrorKind::kCapacity, "forward: context of " + std::to_string(start_pos + tokens.size()) +
                                   " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
  }

  MatrixF x(tokens.size(), d, 0.0f);
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    const auto e = model.embedding.row(tokens[t]);
    std::copy(e.begin(), e.end(), x.row(t).begin());
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    const MatrixF a = attention_forward(x, model.layers[l], cfg, cache, l, start_pos, opt);
    for (std::size_t i = 0; i < x.size(); ++i) x.flat()[i] += a.flat()[i];
    const MatrixF f = ffn_forward(x, model.layers[l], cfg, l, opt);
    for (std::size_t i = 0; i < x.size(); ++i) x.flat()[i] += f.flat()[i];
  }
  if (model.layers.empty()) cache.set_length(start_pos + tokens.size());

  const MatrixF h = rmsnorm_rows(x, model.final_norm, cfg.norm_eps);
  MatrixF logits(tokens.size(), cfg.vocab_size, 0.0f);
  const std::size_t work = tokens.size() * cfg.vocab_size * d;
  const unsigned workers = work < opt.kernel.min_parallel_work ? 1u : opt.kernel.workers;
  parallel_for(cfg.vocab_size, workers, [&](std::size_t begin, std::size_t end) {
    for (std::size_t vocab = begin; vocab < end; ++vocab) {
      const float* w = model.lm_head.row(vocab).data();
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        const float* hv = h.row(t).data();
        float s = 0.0f;
        for (std::size_t i = 0; i < d; ++i) s += w[i] * hv[i];
        logits(t, vocab) = s;
      }
    }
  });
  return logits;
}

// ---------------------------------------------------------------------------
// Sampling and generation

struct GenerationParams {
  std::size_t max_new_tokens = 32;
  float temperature = 0.0f;  // 0 = greedy
  std::optional<std::size_t> top_k{};
  uint64_t seed = 0;
  std::set<TokenId> stop_ids{};
};

// mt19937_64 output is fully specified; the uniform draw is built by hand so
// sampling does not depend on the standard library's distributions.
class SamplerRng {
 public:
  explicit SamplerRng(uint64_t seed) : engine_(seed) {}
  double uniform() { return double(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

inline TokenId argmax(std::span<const float> logits) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return static_cast<TokenId>(best);
}

inline TokenId sample(std::span<const float> logits, const GenerationParams& params,
                      SamplerRng& rng) {
  if (logits.empty()) fail(ErrorKind::kInvalidInput, "sample: empty logits");
  for (float v : logits) {
    if (!std::isfinite(v)) fail(ErrorKind::kInvalidInput, "sample: non-finite logit");
  }
  if (!(params.temperature >= 0.0f)) fail(ErrorKind::kInvalidInput, "temperature must be >= 0");
  if (params.temperature == 0.0f) return argmax(logits);

  std::vector<std::size_t> ids(logits.size());
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  std::size_t keep = ids.size();
  if (params.top_k) {
    if (*params.top_k == 0) fail(ErrorKind::kInvalidInput, "top_k must be positive");
    keep = std::min(keep, *params.top_k);
    // Stable: equal logits keep index order.
    std::stable_sort(ids.begin(), ids.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    ids.resize(keep);
  }
  double max_l = -std::numeric_limits<double>::infinity();
  for (std::size_t i : ids) max_l = std::max(max_l, double(logits[i]));
  std::vector<double> probs(keep);
  double total = 0.0;
  for (std::size_t j = 0; j < keep; ++j) {
    probs[j] = std::exp((double(logits[ids[j]]) - max_l) / double(params.temperature));
    total += probs[j];
  }
  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t j = 0; j < keep; ++j) {
    cum += probs[j];
    if (u < cum) return static_cast<TokenId>(ids[j]);
  }
  return static_cast<TokenId>(ids[keep - 1]);
}

struct GenerationResult {
  std::vector<TokenId> ids;
  std::vector<double> step_ms;  // one wall-clock sample per generated token
  double prefill_ms = 0.0;
  bool stopped = false;  // a stop id ended generation (the stop id is not in ids)
};

// Exclusive decoding state over a shared, immutable model.
class Session {
 public:
  explicit Session(const Model& model, ForwardOptions opt = {})
      : model_(&model), cache_(model.config), opt_(std::move(opt)) {}

  const Model& model() const noexcept { return *model_; }
  KVCache& cache() noexcept { return cache_; }
  std::size_t position() const noexcept { return cache_.length(); }
  const ForwardOptions& options() const noexcept { return opt_; }

  // Appends tokens at the current position.
  MatrixF forward(std::span<const TokenId> tokens) {
    return forward_pass(tokens, *model_, cache_, cache_.length(), opt_);
  }
  void rewind(std::size_t position) { cache_.truncate(position); }

 private:
  const Model* model_;
  KVCache cache_;
  ForwardOptions opt_;
};

namespace detail {

using Clock = std::chrono::steady_clock;

inline double elapsed_ms(Clock::time_point since) {
  return std::chrono::duration<double, std::milli>(Clock::now() - since).count();
}

// Every prompt token except the last is prefilled; the last is fed by the
// first decode step. Returns that pending token.
inline TokenId prefill(Session& session, std::span<const TokenId> prompt) {
  if (prompt.empty()) fail(ErrorKind::kInvalidInput, "prompt must contain at least one token");
  if (prompt.size() > 1) session.forward(prompt.first(prompt.size() - 1));
  return prompt.back();
}

inline void check_room(const ModelConfig& cfg, std::size_t prompt_len, std::size_t new_tokens) {
  // generating n tokens after a p-token prompt feeds p + n - 1 positions
  if (prompt_len + new_tokens - 1 > cfg.max_seq_len) {
    fail(ErrorKind::kCapacity, "prompt of " + std::to_string(prompt_len) + " tokens plus " +
                                   std::to_string(new_tokens) + " new tokens exceeds max_seq_len " +
                                   std::to_string(cfg.max_seq_len));
  }
}

}  // namespace detail

// Each decode step feeds one token and samples the next; step_ms[i] is the
// wall time of the step that produced ids[i].
inline GenerationResult generate(std::span<const TokenId> prompt, const Model& model,
                                 const GenerationParams& params, ForwardOptions opt = {}) {
  GenerationResult result;
  if (params.max_new_tokens == 0) return result;
  if (prompt.empty()) fail(ErrorKind::kInvalidInput, "prompt must contain at least one token");
  detail::check_room(model.config, prompt.size(), params.max_new_tokens);

  Session session(model, std::move(opt));
  SamplerRng rng(params.seed);
  const auto t0 = detail::Clock::now();
  TokenId current = detail::prefill(session, prompt);
  result.prefill_ms = detail::elapsed_ms(t0);

  for (std::size_t i = 0; i < params.max_new_tokens; ++i) {
    const auto start = detail::Clock::now();
    const MatrixF logits = session.forward(std::span<const TokenId>(&current, 1));
    const TokenId next = sample(logits.row(0), params, rng);
    result.step_ms.push_back(detail::elapsed_ms(start));
    if (params.stop_ids.contains(next)) {
      result.stopped = true;
      break;
    }
    result.ids.push_back(next);
    current = next;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Seeded synthetic weights for tests, demos and benchmarks.

namespace detail {

inline MatrixF uniform_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols,
                              double scale) {
  MatrixF m(rows, cols, 0.0f);
  for (float& v : m.flat()) v = static_cast<float>((double(rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0) * scale);
  return m;
}

inline std::vector<float> gain_vector(std::mt19937_64& rng, std::size_t n) {
  const MatrixF m = uniform_matrix(rng, 1, n, 0.1);
  std::vector<float> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = 1.0f + m.flat()[i];
  return g;
}

}  // namespace detail

// Float "checkpoint" tensors in model order, before quantization.
struct FloatLayer {
  MatrixF wq, wk, wv, wo, w_up, w_down;
  std::vector<float> attn_norm, ffn_norm, attn_subln, ffn_subln;
};
struct FloatCheckpoint {
  ModelConfig config;
  MatrixF embedding;
  std::vector<FloatLayer> layers;
  std::vector<float> final_norm;
  MatrixF lm_head;
};

inline FloatCheckpoint make_random_checkpoint(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = cfg.d_model, kv = cfg.kv_dim(), ff = cfg.d_ff;
  const double in_d = 1.0 / std::sqrt(double(d)), in_ff = 1.0 / std::sqrt(double(ff));
  FloatCheckpoint ck;
  ck.config = cfg;
  ck.embedding = detail::uniform_matrix(rng, cfg.vocab_size, d, 1.0);
  for (std::size_t l = 0; l < cfg.n_layers; ++l) {
    FloatLayer fl;
    fl.attn_norm = detail::gain_vector(rng, d);
    fl.wq = detail::uniform_matrix(rng, d, d, in_d);
    fl.wk = detail::uniform_matrix(rng, kv, d, in_d);
    fl.wv = detail::uniform_matrix(rng, kv, d, in_d);
    fl.attn_subln = detail::gain_vector(rng, d);
    fl.wo = detail::uniform_matrix(rng, d, d, in_d);
    fl.ffn_norm = detail::gain_vector(rng, d);
    fl.w_up = detail::uniform_matrix(rng, ff, d, in_d);
    fl.ffn_subln = detail::gain_vector(rng, ff);
    fl.w_down = detail::uniform_matrix(rng, d, ff, in_ff);
    ck.layers.push_back(std::move(fl));
  }
  ck.final_norm = detail::gain_vector(rng, d);
  ck.lm_head = detail::uniform_matrix(rng, cfg.vocab_size, d, in_d);
  return ck;
}

inline Model quantize_checkpoint(const FloatCheckpoint& ck) {
  auto q = [](const MatrixF& w) { return pack_ternary(absmean_quantize_weights(w)); };
  Model m;
  m.config = ck.config;
  m.embedding = ck.embedding;
  for (const auto& fl : ck.layers) {
    LayerWeights lw{q(fl.wq),        q(fl.wk),       q(fl.wv),         q(fl.wo),
                    q(fl.w_up),      q(fl.w_down),   fl.attn_norm,     fl.ffn_norm,
                    fl.attn_subln,   fl.ffn_subln};
    m.layers.push_back(std::move(lw));
  }
  m.final_norm = ck.final_norm;
  m.lm_head = ck.lm_head;
  m.validate();
  return m;
}

inline Model make_random_model(const ModelConfig& cfg, uint64_t seed) {
  return quantize_checkpoint(make_random_checkpoint(cfg, seed));
}

}  // namespace bitnet
