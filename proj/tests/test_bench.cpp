// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>

#include "bitnet/bench.hpp"

using namespace bitnet;

namespace {

ModelConfig mac_config() {
  ModelConfig c;
  c.n_layers = 1;
  c.d_model = 4;
  c.d_ff = 8;
  c.n_heads = 1;
  c.n_kv_heads = 1;
  c.vocab_size = 4;
  c.max_seq_len = 4;
  return c;
}

}  // namespace

TEST(EnergyTable, Defaults) {
  const EnergyTable t;
  EXPECT_EQ(t.fp16_add_pj, 0.16);
  EXPECT_EQ(t.fp16_mul_pj, 0.34);
  EXPECT_EQ(t.int8_add_pj, 0.007);
  EXPECT_EQ(t.int8_mul_pj, 0.07);
}

TEST(CountWeightMacs, Examples) {
  EXPECT_EQ(count_weight_macs(mac_config(), 1), 128u);
  EXPECT_EQ(count_weight_macs(mac_config(), 2), 256u);
  ModelConfig zero = mac_config();
  zero.n_layers = 0;
  EXPECT_EQ(count_weight_macs(zero, 7), 0u);
  // grouped kv: d=64, kv_dim=32 -> 64*(64+64+64) + 2*64*128
  EXPECT_EQ(count_weight_macs(tiny_config(), 1), 2u * (64 * 192 + 2 * 64 * 128));
}

TEST(EstimateEnergy, PerMacValues) {
  // 1e9 MACs in fp16: 1e9 * 0.5 pJ
  EXPECT_NEAR(1e9 * energy_per_mac_pj({}, EnergyMode::kFp16) * 1e-12, 5.0e-4, 1e-15);
  EXPECT_NEAR(energy_per_mac_pj({}, EnergyMode::kFp16) / energy_per_mac_pj({}, EnergyMode::kW158A8),
              71.428571, 1e-5);
  EXPECT_EQ(estimate_energy(mac_config(), 0, {}, EnergyMode::kFp16), 0.0);
}

TEST(EstimateEnergy, LinearInTokensAndTable) {
  const auto cfg = tiny_config();
  const double e1 = estimate_energy(cfg, 1, {}, EnergyMode::kFp16);
  EXPECT_DOUBLE_EQ(estimate_energy(cfg, 512, {}, EnergyMode::kFp16), 512 * e1);
  EnergyTable doubled;
  doubled.int8_add_pj *= 2;
  EXPECT_DOUBLE_EQ(estimate_energy(cfg, 10, doubled, EnergyMode::kW158A8),
                   2 * estimate_energy(cfg, 10, {}, EnergyMode::kW158A8));
  EXPECT_NEAR(estimate_energy(cfg, 512, {}, EnergyMode::kW158A8),
              estimate_energy(cfg, 512, {}, EnergyMode::kFp16) * (0.007 / 0.5), 1e-18);
  EXPECT_EQ(kDefaultEnergyTokens, 512u);
}

TEST(LatencyStats, OrderStatistics) {
  const std::vector<double> s{5, 1, 4, 2, 3};
  const auto st = latency_stats(s);
  EXPECT_DOUBLE_EQ(st.mean, 3.0);
  EXPECT_DOUBLE_EQ(st.median, 3.0);
  EXPECT_DOUBLE_EQ(st.p95, 5.0);
  EXPECT_DOUBLE_EQ(st.min, 1.0);
  std::vector<double> hundred(100);
  for (int i = 0; i < 100; ++i) hundred[i] = 100 - i;
  const auto h = latency_stats(hundred);
  EXPECT_DOUBLE_EQ(h.median, 50.5);
  EXPECT_DOUBLE_EQ(h.p95, 95.0);
}

TEST(MeasureTpot, DefaultsAndDeterminism) {
  const Model m = make_random_model(tiny_config(), 9);
  const std::vector<TokenId> prompt{256};
  EXPECT_EQ(BenchOptions{}.n_tokens, 128u);
  EXPECT_EQ(BenchOptions{}.workers, 8u);
  const auto a = measure_tpot(m, prompt);
  const auto b = measure_tpot(m, prompt);
  EXPECT_EQ(a.tokens, 128u);
  EXPECT_EQ(a.samples_ms.size(), 128u);
  EXPECT_EQ(a.warmup_steps, 1u);
  EXPECT_EQ(a.workers, 8u);
  EXPECT_EQ(a.output_ids, b.output_ids);
  EXPECT_GE(a.mean_ms, a.min_ms);
  EXPECT_LE(a.mean_ms, a.max_ms);
  const auto replay = latency_stats(a.samples_ms);
  EXPECT_EQ(replay.mean, a.mean_ms);
  EXPECT_EQ(replay.p95, a.p95_ms);

  // matches greedy generate on the same prompt
  GenerationParams p;
  p.max_new_tokens = 128;
  EXPECT_EQ(generate(prompt, m, p).ids, a.output_ids);
}

TEST(MeasureTpot, CapacityError) {
  const Model m = make_random_model(tiny_config(), 9);
  const std::vector<TokenId> prompt{256, 1};
  try {
    measure_tpot(m, prompt);  // 2 + 128 - 1 > 128
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kCapacity);
  }
}
