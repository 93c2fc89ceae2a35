// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>

#include <json.hpp>

#include "bitnet/error.hpp"

namespace bitnet {

struct ModelConfig {
  std::size_t n_layers = 0;
  std::size_t d_model = 0;
  std::size_t n_heads = 0;
  std::size_t n_kv_heads = 0;
  std::size_t d_ff = 0;
  std::size_t vocab_size = 0;
  std::size_t max_seq_len = 0;
  float rope_theta = 10000.0f;
  float norm_eps = 1e-5f;

  std::size_t head_dim() const noexcept { return n_heads ? d_model / n_heads : 0; }
  std::size_t kv_dim() const noexcept { return head_dim() * n_kv_heads; }

  // n_layers may be 0 (embedding -> final norm -> LM head).
  void validate() const {
    auto need = [](bool ok, const char* what) {
      if (!ok) fail(ErrorKind::kInvalidInput, std::string("model config: ") + what);
    };
    need(d_model > 0 && n_heads > 0 && n_kv_heads > 0 && d_ff > 0 && vocab_size > 0 &&
             max_seq_len > 0,
         "dimensions must be positive");
    need(d_model % n_heads == 0, "d_model must be divisible by n_heads");
    need(head_dim() % 2 == 0, "head_dim must be even");
    need(n_heads % n_kv_heads == 0, "n_heads must be divisible by n_kv_heads");
    need(rope_theta > 0.0f, "rope_theta must be positive");
    need(norm_eps > 0.0f, "norm_eps must be positive");
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"n_layers", c.n_layers},     {"d_model", c.d_model},
                     {"n_heads", c.n_heads},       {"n_kv_heads", c.n_kv_heads},
                     {"d_ff", c.d_ff},             {"vocab_size", c.vocab_size},
                     {"max_seq_len", c.max_seq_len}, {"rope_theta", c.rope_theta},
                     {"norm_eps", c.norm_eps}};
}

// Unknown keys are ignored; rope_theta and norm_eps are optional.
inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  try {
    c.n_layers = j.at("n_layers").get<std::size_t>();
    c.d_model = j.at("d_model").get<std::size_t>();
    c.n_heads = j.at("n_heads").get<std::size_t>();
    c.n_kv_heads = j.value("n_kv_heads", c.n_heads);
    c.d_ff = j.at("d_ff").get<std::size_t>();
    c.vocab_size = j.at("vocab_size").get<std::size_t>();
    c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
    c.rope_theta = j.value("rope_theta", 10000.0f);
    c.norm_eps = j.value("norm_eps", 1e-5f);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kInvalidInput, std::string("model config: ") + e.what());
  }
}

// The fixture used throughout the tests: 2 layers, d_model 64, 4 heads,
// 2 kv heads, d_ff 128, byte-level vocab, 128 positions.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.d_model = 64;
  c.n_heads = 4;
  c.n_kv_heads = 2;
  c.d_ff = 128;
  c.vocab_size = 259;
  c.max_seq_len = 128;
  return c;
}

}  // namespace bitnet
