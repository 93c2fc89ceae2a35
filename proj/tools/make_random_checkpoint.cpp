// SPDX-License-Identifier: Apache-2.0
//
// Writes a seeded random float32 checkpoint (raw tensor files plus a
// manifest.json) that `bitnet convert` can turn into a model file.

#include <bit>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bitnet/config.hpp"
#include "bitnet/format.hpp"
#include "bitnet/model.hpp"

namespace fs = std::filesystem;

namespace {

void write_raw(const fs::path& path, std::span<const float> values) {
  std::vector<uint8_t> bytes;
  bytes.reserve(values.size() * 4);
  for (float v : values) {
    const auto u = std::bit_cast<uint32_t>(v);
    for (int b = 0; b < 4; ++b) bytes.push_back(uint8_t(u >> (8 * b)));
  }
  bitnet::write_file(path, bytes);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate a random float32 checkpoint for the tiny test configuration"};
  std::string out_dir;
  uint64_t seed = 1;
  bitnet::ModelConfig cfg = bitnet::tiny_config();
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_option("--seed", seed)->capture_default_str();
  app.add_option("--layers", cfg.n_layers)->capture_default_str();
  app.add_option("--d-model", cfg.d_model)->capture_default_str();
  app.add_option("--heads", cfg.n_heads)->capture_default_str();
  app.add_option("--kv-heads", cfg.n_kv_heads)->capture_default_str();
  app.add_option("--d-ff", cfg.d_ff)->capture_default_str();
  app.add_option("--max-seq-len", cfg.max_seq_len)->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    const auto ck = bitnet::make_random_checkpoint(cfg, seed);
    fs::create_directories(out_dir);
    nlohmann::json tensors = nlohmann::json::array();
    auto emit = [&](const std::string& name, std::size_t rows, std::size_t cols,
                    std::span<const float> values, const char* role) {
      const std::string file = name + ".f32";
      write_raw(fs::path(out_dir) / file, values);
      tensors.push_back({{"name", name}, {"file", file}, {"rows", rows}, {"cols", cols}, {"role", role}});
    };
    auto matrix = [&](const std::string& name, const bitnet::MatrixF& m, const char* role) {
      emit(name, m.rows(), m.cols(), m.flat(), role);
    };
    auto gain = [&](const std::string& name, const std::vector<float>& g) {
      emit(name, 1, g.size(), g, "keep-real");
    };
    matrix("tok_embeddings", ck.embedding, "keep-real");
    for (std::size_t i = 0; i < ck.layers.size(); ++i) {
      const auto& l = ck.layers[i];
      const std::string p = "layers." + std::to_string(i) + ".";
      gain(p + "attn_norm", l.attn_norm);
      matrix(p + "wq", l.wq, "quantize");
      matrix(p + "wk", l.wk, "quantize");
      matrix(p + "wv", l.wv, "quantize");
      gain(p + "attn_subln", l.attn_subln);
      matrix(p + "wo", l.wo, "quantize");
      gain(p + "ffn_norm", l.ffn_norm);
      matrix(p + "w_up", l.w_up, "quantize");
      gain(p + "ffn_subln", l.ffn_subln);
      matrix(p + "w_down", l.w_down, "quantize");
    }
    gain("norm", ck.final_norm);
    matrix("output", ck.lm_head, "keep-real");

    const nlohmann::json manifest = {{"config", cfg}, {"tensors", tensors}};
    const std::string text = manifest.dump(2) + "\n";
    bitnet::write_file(fs::path(out_dir) / "manifest.json",
                       std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
    std::cout << (fs::path(out_dir) / "manifest.json").string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
