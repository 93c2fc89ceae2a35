// SPDX-License-Identifier: Apache-2.0
#pragma once

// Test-only reference computations. Nothing here calls into the code paths
// it is used to check: rounding, packing, unpacking and the float64 forward
// pass are all re-derived from their definitions.

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "bitnet/bitnet.hpp"

namespace oracle {

inline float ulp(float v) {
  const float a = std::fabs(v);
  return std::nextafter(a, std::numeric_limits<float>::infinity()) - a;
}

inline double round_away(double x) {
  const double a = std::floor(std::fabs(x) + 0.5);
  return x < 0 ? -a : a;
}

// Ternary value -> 2-bit code by arithmetic, assembled little-end first.
inline uint8_t pack_group(const int v[4], int count) {
  unsigned byte = 0, weight = 1;
  for (int i = 0; i < 4; ++i) {
    const int code = i < count ? v[i] + 1 : 1;
    byte += unsigned(code) * weight;
    weight *= 4;
  }
  return uint8_t(byte);
}

inline int decode_field(uint8_t byte, int i) {
  unsigned b = byte;
  for (int k = 0; k < i; ++k) b /= 4;
  return int(b % 4) - 1;
}

inline std::vector<std::vector<int>> unpack(const bitnet::PackedTernaryTensor& pt) {
  std::vector<std::vector<int>> w(pt.rows(), std::vector<int>(pt.cols()));
  const std::size_t rb = (pt.cols() + 3) / 4;
  for (std::size_t r = 0; r < pt.rows(); ++r) {
    for (std::size_t c = 0; c < pt.cols(); ++c) {
      w[r][c] = decode_field(pt.data()[r * rb + c / 4], int(c % 4));
    }
  }
  return w;
}

// acc[t][n] = sum_k w[n][k] x[t][k], 64-bit to rule out overflow masking.
inline std::vector<std::vector<int64_t>> triple_loop(const std::vector<std::vector<int>>& w,
                                                     const std::vector<std::vector<int>>& x) {
  std::vector<std::vector<int64_t>> acc(x.size(), std::vector<int64_t>(w.size(), 0));
  for (std::size_t t = 0; t < x.size(); ++t)
    for (std::size_t n = 0; n < w.size(); ++n)
      for (std::size_t k = 0; k < x[t].size(); ++k) acc[t][n] += int64_t(w[n][k]) * x[t][k];
  return acc;
}

inline std::vector<std::vector<int>> to_rows(const bitnet::Matrix<int8_t>& m) {
  std::vector<std::vector<int>> out(m.rows(), std::vector<int>(m.cols()));
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out[r][c] = m(r, c);
  return out;
}

inline bitnet::QuantizedActivations random_activations(std::mt19937_64& rng, std::size_t tokens,
                                                       std::size_t cols) {
  std::uniform_int_distribution<int> q(-127, 127);
  std::uniform_real_distribution<float> s(0.5f, 300.0f);
  bitnet::QuantizedActivations qa{bitnet::Matrix<int8_t>(tokens, cols, 0),
                                  std::vector<float>(tokens)};
  for (auto& v : qa.values.flat()) v = int8_t(q(rng));
  for (auto& v : qa.act_scales) v = s(rng);
  return qa;
}

inline bitnet::TernaryWeights random_ternary(std::mt19937_64& rng, std::size_t rows,
                                             std::size_t cols) {
  std::uniform_int_distribution<int> t(-1, 1);
  bitnet::TernaryWeights tw{bitnet::Matrix<int8_t>(rows, cols, 0), 0.0f};
  for (auto& v : tw.values.flat()) v = int8_t(t(rng));
  tw.weight_scale = std::uniform_real_distribution<float>(0.01f, 2.0f)(rng);
  return tw;
}

// ---------------------------------------------------------------------------
// Float64 forward pass over a whole sequence starting at position 0.
//
// BitLinear inputs are taken from a tape of the engine's quantized
// activations (captured through ForwardOptions::observer) so the oracle
// multiplies the same integers; everything else is recomputed in double.
// Each tape entry is checked against the oracle's own input: the stored code
// must equal round(x * scale) up to a rounding tie.

using Tape = std::map<std::string, bitnet::QuantizedActivations>;
using MatD = std::vector<std::vector<double>>;

struct ForwardOracle {
  const bitnet::Model& model;
  const Tape& tape;
  double max_code_drift = 0.0;  // worst |q - x*s| - 0.5 seen

  MatD rmsnorm(const MatD& x, const std::vector<float>& g) const {
    MatD y = x;
    for (std::size_t t = 0; t < x.size(); ++t) {
      double ss = 0;
      for (double v : x[t]) ss += v * v;
      const double inv = 1.0 / std::sqrt(ss / double(x[t].size()) + double(model.config.norm_eps));
      for (std::size_t i = 0; i < x[t].size(); ++i) y[t][i] = double(g[i]) * x[t][i] * inv;
    }
    return y;
  }

  MatD bitlinear(const MatD& x, const bitnet::PackedTernaryTensor& pt, const std::string& name) {
    const auto it = tape.find(name);
    if (it == tape.end()) throw std::runtime_error("tape missing " + name);
    const auto& qa = it->second;
    const auto w = unpack(pt);
    MatD y(x.size(), std::vector<double>(pt.rows(), 0.0));
    for (std::size_t t = 0; t < x.size(); ++t) {
      const double s = qa.act_scales[t];
      for (std::size_t k = 0; k < x[t].size(); ++k) {
        const double drift = std::fabs(double(qa.values(t, k)) - x[t][k] * s) - 0.5;
        max_code_drift = std::max(max_code_drift, drift);
      }
      for (std::size_t n = 0; n < pt.rows(); ++n) {
        double acc = 0;
        for (std::size_t k = 0; k < x[t].size(); ++k) {
          acc += (double(pt.weight_scale()) * w[n][k]) * (double(qa.values(t, k)) / s);
        }
        y[t][n] = acc;
      }
    }
    return y;
  }

  void rope(std::vector<double>& v, std::size_t off, std::size_t hd, std::size_t pos) const {
    for (std::size_t j = 0; j < hd / 2; ++j) {
      const double ang = double(pos) * std::pow(double(model.config.rope_theta), -2.0 * double(j) / double(hd));
      const double a = v[off + 2 * j], b = v[off + 2 * j + 1];
      v[off + 2 * j] = a * std::cos(ang) - b * std::sin(ang);
      v[off + 2 * j + 1] = a * std::sin(ang) + b * std::cos(ang);
    }
  }

  MatD attention(const MatD& x, std::size_t l) {
    const auto& cfg = model.config;
    const auto& L = model.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    const std::size_t T = x.size(), hd = cfg.head_dim(), H = cfg.n_heads;
    const auto h = rmsnorm(x, L.attn_norm);
    auto q = bitlinear(h, L.wq, p + "wq");
    auto k = bitlinear(h, L.wk, p + "wk");
    const auto v = bitlinear(h, L.wv, p + "wv");
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t hh = 0; hh < H; ++hh) rope(q[t], hh * hd, hd, t);
      for (std::size_t hh = 0; hh < cfg.n_kv_heads; ++hh) rope(k[t], hh * hd, hd, t);
    }
    // repeat kv heads explicitly
    MatD out(T, std::vector<double>(cfg.d_model, 0.0));
    for (std::size_t hh = 0; hh < H; ++hh) {
      const std::size_t kvh = hh * cfg.n_kv_heads / H;
      for (std::size_t t = 0; t < T; ++t) {
        std::vector<double> sc(t + 1);
        double mx = -1e300;
        for (std::size_t j = 0; j <= t; ++j) {
          double s = 0;
          for (std::size_t i = 0; i < hd; ++i) s += q[t][hh * hd + i] * k[j][kvh * hd + i];
          sc[j] = s / std::sqrt(double(hd));
          mx = std::max(mx, sc[j]);
        }
        double z = 0;
        for (auto& s : sc) z += (s = std::exp(s - mx));
        for (std::size_t j = 0; j <= t; ++j)
          for (std::size_t i = 0; i < hd; ++i) out[t][hh * hd + i] += sc[j] / z * v[j][kvh * hd + i];
      }
    }
    return bitlinear(rmsnorm(out, L.attn_subln), L.wo, p + "wo");
  }

  MatD ffn(const MatD& x, std::size_t l) {
    const auto& L = model.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    auto u = bitlinear(rmsnorm(x, L.ffn_norm), L.w_up, p + "w_up");
    for (auto& row : u)
      for (auto& e : row) e = e > 0 ? e * e : 0.0;
    return bitlinear(rmsnorm(u, L.ffn_subln), L.w_down, p + "w_down");
  }

  MatD logits(const std::vector<bitnet::TokenId>& tokens) {
    const auto& cfg = model.config;
    MatD x(tokens.size(), std::vector<double>(cfg.d_model));
    for (std::size_t t = 0; t < tokens.size(); ++t)
      for (std::size_t i = 0; i < cfg.d_model; ++i) x[t][i] = model.embedding(tokens[t], i);
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
      const auto a = attention(x, l);
      for (std::size_t t = 0; t < x.size(); ++t)
        for (std::size_t i = 0; i < cfg.d_model; ++i) x[t][i] += a[t][i];
      const auto f = ffn(x, l);
      for (std::size_t t = 0; t < x.size(); ++t)
        for (std::size_t i = 0; i < cfg.d_model; ++i) x[t][i] += f[t][i];
    }
    const auto h = rmsnorm(x, model.final_norm);
    MatD out(tokens.size(), std::vector<double>(cfg.vocab_size, 0.0));
    for (std::size_t t = 0; t < tokens.size(); ++t)
      for (std::size_t v = 0; v < cfg.vocab_size; ++v)
        for (std::size_t i = 0; i < cfg.d_model; ++i) out[t][v] += double(model.lm_head(v, i)) * h[t][i];
    return out;
  }
};

inline void attach_tape(bitnet::ForwardOptions& opt, Tape& tape) {
  opt.observer = [&tape](std::string_view name, const bitnet::QuantizedActivations& qa) {
    tape[std::string(name)] = qa;
  };
}

// max_t max_v |a - b| / max_v |b|
inline double row_relative_error(const bitnet::MatrixF& a, const MatD& b) {
  double worst = 0;
  for (std::size_t t = 0; t < a.rows(); ++t) {
    double scale = 0, diff = 0;
    for (std::size_t v = 0; v < a.cols(); ++v) {
      scale = std::max(scale, std::fabs(b[t][v]));
      diff = std::max(diff, std::fabs(double(a(t, v)) - b[t][v]));
    }
    worst = std::max(worst, scale > 0 ? diff / scale : diff);
  }
  return worst;
}

inline double row_relative_error(const bitnet::MatrixF& a, const bitnet::MatrixF& b) {
  MatD bd(b.rows(), std::vector<double>(b.cols()));
  for (std::size_t t = 0; t < b.rows(); ++t)
    for (std::size_t v = 0; v < b.cols(); ++v) bd[t][v] = b(t, v);
  return row_relative_error(a, bd);
}

}  // namespace oracle
