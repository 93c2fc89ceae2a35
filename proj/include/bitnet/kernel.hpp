// SPDX-License-Identifier: Apache-2.0
#pragma once

// Exact ternary x int8 matrix multiply.
//
// Every kernel computes acc[t][n] = sum_k w[n][k] * x[t][k] in int32 and must
// agree bit-for-bit with gemm_reference. Work is split over weight rows, so
// each output cell is owned by exactly one worker and results do not depend
// on the worker count.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bitnet/error.hpp"
#include "bitnet/matrix.hpp"
#include "bitnet/pack.hpp"
#include "bitnet/parallel.hpp"
#include "bitnet/quant.hpp"

namespace bitnet {

// T x N int32 dot products.
using AccumulatorMatrix = Matrix<int32_t>;

struct KernelOptions {
  unsigned workers = 8;
  // Columns unpacked per inner block; must be a positive multiple of 4.
  std::size_t tile_cols = 64;
  // Below N*K*T multiply-adds the call runs on the calling thread only.
  std::size_t min_parallel_work = std::size_t{1} << 16;
};

enum class KernelPath { kReference, kPacked, kLut };

namespace detail {

inline unsigned effective_workers(const KernelOptions& opt, std::size_t n, std::size_t k,
                                  std::size_t t) {
  return n * k * t < opt.min_parallel_work ? 1u : std::max(1u, opt.workers);
}

inline void check_cols(std::size_t weight_cols, std::size_t act_cols) {
  if (weight_cols != act_cols) {
    fail(ErrorKind::kShape, "weight cols " + std::to_string(weight_cols) +
                                " != activation cols " + std::to_string(act_cols));
  }
}

}  // namespace detail

inline AccumulatorMatrix gemm_reference(const TernaryWeights& tw, const QuantizedActivations& qa) {
  detail::check_cols(tw.cols(), qa.cols());
  const std::size_t n_out = tw.rows(), k_dim = tw.cols(), tokens = qa.tokens();
  AccumulatorMatrix acc(tokens, n_out, 0);
  for (std::size_t t = 0; t < tokens; ++t) {
    const int8_t* x = qa.values.row(t).data();
    for (std::size_t n = 0; n < n_out; ++n) {
      const int8_t* w = tw.values.row(n).data();
      int32_t sum = 0;
      for (std::size_t k = 0; k < k_dim; ++k) sum += int32_t(w[k]) * int32_t(x[k]);
      acc(t, n) = sum;
    }
  }
  return acc;
}

// Load packed row tiles, unpack to int8 in a small stack buffer, multiply.
inline AccumulatorMatrix gemm_packed(const PackedTernaryTensor& pt, const QuantizedActivations& qa,
                                     const KernelOptions& opt = {}) {
  detail::check_cols(pt.cols(), qa.cols());
  if (opt.tile_cols == 0 || opt.tile_cols % 4 != 0) {
    fail(ErrorKind::kInvalidInput, "tile_cols must be a positive multiple of 4");
  }
  const std::size_t n_out = pt.rows(), k_dim = pt.cols(), tokens = qa.tokens();
  AccumulatorMatrix acc(tokens, n_out, 0);
  if (tokens == 0) return acc;

  const std::size_t tile = opt.tile_cols;
  parallel_for(n_out, detail::effective_workers(opt, n_out, k_dim, tokens),
               [&](std::size_t n_begin, std::size_t n_end) {
                 std::vector<int8_t> w(tile);
                 std::vector<int32_t> sums(tokens);
                 for (std::size_t n = n_begin; n < n_end; ++n) {
                   const auto row = pt.row(n);
                   std::fill(sums.begin(), sums.end(), 0);
                   for (std::size_t k0 = 0; k0 < k_dim; k0 += tile) {
                     const std::size_t width = std::min(tile, k_dim - k0);
                     unpack_row(row.subspan(k0 / 4), width, w.data());
                     for (std::size_t t = 0; t < tokens; ++t) {
                       const int8_t* x = qa.values.row(t).data() + k0;
                       int32_t s = 0;
                       for (std::size_t k = 0; k < width; ++k) s += int32_t(w[k]) * int32_t(x[k]);
                       sums[t] += s;
                     }
                   }
                   for (std::size_t t = 0; t < tokens; ++t) acc(t, n) = sums[t];
                 }
               });
  return acc;
}

// Table lookup kernel. For each token and each 4-column group g the 256
// possible weight bytes are mapped to the partial sum they select, so the
// inner loop is one load and one add per weight byte. Fields are decoded
// as code - 1; reserved codes never reach this point because packed tensors
// are validated at construction. Padding columns see zero activations.
inline AccumulatorMatrix gemm_lut(const PackedTernaryTensor& pt, const QuantizedActivations& qa,
                                  const KernelOptions& opt = {}) {
  detail::check_cols(pt.cols(), qa.cols());
  const std::size_t n_out = pt.rows(), k_dim = pt.cols(), tokens = qa.tokens();
  const std::size_t groups = pt.row_bytes();
  AccumulatorMatrix acc(tokens, n_out, 0);
  if (tokens == 0) return acc;

  // |partial| <= 4 * 127, fits int16.
  std::vector<int16_t> lut(tokens * groups * 256);
  parallel_for(tokens * groups, detail::effective_workers(opt, tokens * groups, 256, 1),
               [&](std::size_t begin, std::size_t end) {
                 for (std::size_t tg = begin; tg < end; ++tg) {
                   const std::size_t t = tg / groups, g = tg % groups;
                   const int8_t* x = qa.values.row(t).data();
                   std::array<int16_t, 4> xs{};
                   for (std::size_t i = 0; i < 4 && g * 4 + i < k_dim; ++i) xs[i] = x[g * 4 + i];
                   // per-field contribution for code c: (c - 1) * x, code 3 unused
                   std::array<std::array<int16_t, 4>, 4> part{};
                   for (std::size_t i = 0; i < 4; ++i) {
                     part[i] = {int16_t(-xs[i]), 0, xs[i], 0};
                   }
                   int16_t* table = lut.data() + tg * 256;
                   for (unsigned b = 0; b < 256; ++b) {
                     table[b] = int16_t(part[0][b & 3] + part[1][(b >> 2) & 3] +
                                        part[2][(b >> 4) & 3] + part[3][b >> 6]);
                   }
                 }
               });

  parallel_for(n_out, detail::effective_workers(opt, n_out, k_dim, tokens),
               [&](std::size_t n_begin, std::size_t n_end) {
                 for (std::size_t n = n_begin; n < n_end; ++n) {
                   const uint8_t* w = pt.row(n).data();
                   for (std::size_t t = 0; t < tokens; ++t) {
                     const int16_t* table = lut.data() + t * groups * 256;
                     int32_t s = 0;
                     for (std::size_t g = 0; g < groups; ++g) s += table[g * 256 + w[g]];
                     acc(t, n) = s;
                   }
                 }
               });
  return acc;
}

// y[t][n] = float(acc[t][n]) * (weight_scale / act_scales[t]). The per-token
// factor is formed once in float and then multiplied; every kernel path uses
// this exact order so their float outputs agree bitwise.
inline MatrixF dequantize_output(const AccumulatorMatrix& acc, float weight_scale,
                                 std::span<const float> act_scales) {
  if (act_scales.size() != acc.rows()) {
    fail(ErrorKind::kShape, "dequantize_output: act_scales length != token count");
  }
  MatrixF y(acc.rows(), acc.cols(), 0.0f);
  for (std::size_t t = 0; t < acc.rows(); ++t) {
    const float factor = weight_scale / act_scales[t];
    for (std::size_t n = 0; n < acc.cols(); ++n) {
      y(t, n) = static_cast<float>(acc(t, n)) * factor;
    }
  }
  return y;
}

inline AccumulatorMatrix gemm(KernelPath path, const PackedTernaryTensor& pt,
                              const QuantizedActivations& qa, const KernelOptions& opt = {}) {
  switch (path) {
    case KernelPath::kReference: return gemm_reference(unpack_ternary(pt), qa);
    case KernelPath::kPacked: return gemm_packed(pt, qa, opt);
    case KernelPath::kLut: return gemm_lut(pt, qa, opt);
  }
  fail(ErrorKind::kInvalidInput, "unknown kernel path");
}

}  // namespace bitnet
