// SPDX-License-Identifier: Apache-2.0
#pragma once

// Decode latency (time per output token) and matmul arithmetic energy.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bitnet/config.hpp"
#include "bitnet/error.hpp"
#include "bitnet/model.hpp"

namespace bitnet {

// ---------------------------------------------------------------------------
// Energy

// Picojoules per scalar op at 7nm.
struct EnergyTable {
  double fp16_add_pj = 0.16;
  double fp16_mul_pj = 0.34;
  double int8_add_pj = 0.007;
  double int8_mul_pj = 0.07;
};

enum class EnergyMode { kFp16, kW158A8 };

inline constexpr std::size_t kDefaultEnergyTokens = 512;

// Multiply-accumulates in the weight projections only: q, k, v, o and the
// two FFN matrices. Embedding lookup, the LM head and the attention score/
// value products are left out of both precision modes.
inline uint64_t count_weight_macs(const ModelConfig& cfg, uint64_t n_tokens) {
  const uint64_t d = cfg.d_model, ff = cfg.d_ff, kv = cfg.kv_dim();
  const uint64_t attention = d * (d + 2 * kv + d);
  const uint64_t ffn = 2 * d * ff;
  return n_tokens * cfg.n_layers * (attention + ffn);
}

// Energy of one MAC. A ternary weight turns the MAC into a sign select plus
// one int8 add, so w158a8 pays no multiplications.
inline double energy_per_mac_pj(const EnergyTable& table, EnergyMode mode) noexcept {
  return mode == EnergyMode::kFp16 ? table.fp16_add_pj + table.fp16_mul_pj : table.int8_add_pj;
}

// Joules.
inline double estimate_energy(const ModelConfig& cfg, uint64_t n_tokens,
                              const EnergyTable& table = {}, EnergyMode mode = EnergyMode::kW158A8) {
  return double(count_weight_macs(cfg, n_tokens)) * energy_per_mac_pj(table, mode) * 1e-12;
}

inline const char* to_string(EnergyMode mode) noexcept {
  return mode == EnergyMode::kFp16 ? "fp16" : "w158a8";
}

// ---------------------------------------------------------------------------
// Latency

struct BenchOptions {
  std::size_t n_tokens = 128;
  unsigned workers = 8;
  KernelPath path = KernelPath::kPacked;
};

struct BenchReport {
  std::size_t tokens = 0;
  unsigned workers = 0;
  std::size_t warmup_steps = 0;
  double mean_ms = 0.0, median_ms = 0.0, p95_ms = 0.0, min_ms = 0.0, max_ms = 0.0;
  double total_wall_s = 0.0;
  std::vector<double> samples_ms;  // raw per-step latencies, decode order
  std::vector<TokenId> output_ids;
};

struct LatencyStats {
  double mean = 0.0, median = 0.0, p95 = 0.0, min = 0.0, max = 0.0;
};

// Median averages the two middle samples for even counts; p95 uses the
// nearest-rank definition (sorted[ceil(0.95 n) - 1]).
inline LatencyStats latency_stats(std::span<const double> samples) {
  LatencyStats s;
  if (samples.empty()) return s;
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) / double(n);
  s.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * double(n)));
  s.p95 = sorted[std::max<std::size_t>(rank, 1) - 1];
  s.min = sorted.front();
  s.max = sorted.back();
  return s;
}

// Greedy decode of n_tokens after the prompt. One extra decode step runs
// first and is discarded (cache rewound, time dropped); each of the n_tokens
// timed steps feeds one token and picks the next.
inline BenchReport measure_tpot(const Model& model, std::span<const TokenId> prompt,
                                const BenchOptions& opt = {}) {
  using Clock = std::chrono::steady_clock;
  if (opt.n_tokens == 0) fail(ErrorKind::kInvalidInput, "bench needs at least one token");
  if (prompt.empty()) fail(ErrorKind::kInvalidInput, "prompt must contain at least one token");
  detail::check_room(model.config, prompt.size(), opt.n_tokens);

  ForwardOptions fwd;
  fwd.path = opt.path;
  fwd.kernel.workers = opt.workers;
  Session session(model, fwd);
  GenerationParams greedy;

  const auto run_start = Clock::now();
  TokenId current = detail::prefill(session, prompt);
  const std::size_t resume = session.position();
  session.forward(std::span<const TokenId>(&current, 1));
  session.rewind(resume);

  BenchReport report;
  report.workers = opt.workers;
  report.warmup_steps = 1;
  report.samples_ms.reserve(opt.n_tokens);
  for (std::size_t i = 0; i < opt.n_tokens; ++i) {
    const auto start = Clock::now();
    const MatrixF logits = session.forward(std::span<const TokenId>(&current, 1));
    current = argmax(logits.row(0));
    report.samples_ms.push_back(
        std::chrono::duration<double, std::milli>(Clock::now() - start).count());
    report.output_ids.push_back(current);
  }
  report.total_wall_s = std::chrono::duration<double>(Clock::now() - run_start).count();
  report.tokens = report.output_ids.size();
  const auto s = latency_stats(report.samples_ms);
  report.mean_ms = s.mean;
  report.median_ms = s.median;
  report.p95_ms = s.p95;
  report.min_ms = s.min;
  report.max_ms = s.max;
  return report;
}

inline void to_json(nlohmann::json& j, const BenchReport& r) {
  j = {{"tokens", r.tokens},           {"workers", r.workers},
       {"warmup_steps", r.warmup_steps}, {"mean_ms", r.mean_ms},
       {"median_ms", r.median_ms},     {"p95_ms", r.p95_ms},
       {"min_ms", r.min_ms},           {"max_ms", r.max_ms},
       {"total_wall_s", r.total_wall_s}, {"samples_ms", r.samples_ms},
       {"output_ids", r.output_ids}};
}

inline std::string format_report_table(const BenchReport& r) {
  std::ostringstream os;
  os << std::left << std::setw(16) << "metric" << std::right << std::setw(14) << "value" << "\n";
  auto row = [&](const char* name, double v, int precision) {
    os << std::left << std::setw(16) << name << std::right << std::setw(14) << std::fixed
       << std::setprecision(precision) << v << "\n";
  };
  row("tokens", double(r.tokens), 0);
  row("workers", double(r.workers), 0);
  row("warmup_steps", double(r.warmup_steps), 0);
  row("mean_ms", r.mean_ms, 4);
  row("median_ms", r.median_ms, 4);
  row("p95_ms", r.p95_ms, 4);
  row("min_ms", r.min_ms, 4);
  row("max_ms", r.max_ms, 4);
  row("total_wall_s", r.total_wall_s, 4);
  return os.str();
}

}  // namespace bitnet
