// SPDX-License-Identifier: Apache-2.0
#pragma once

// Ternary (absmean) weight quantization and per-token int8 (absmax)
// activation quantization. All functions are pure.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "bitnet/error.hpp"
#include "bitnet/matrix.hpp"

namespace bitnet {

inline constexpr int kActMax = 127;

// Ternary weight matrix: every entry in {-1, 0, +1}, shared per-tensor scale.
struct TernaryWeights {
  Matrix<int8_t> values;
  float weight_scale = 0.0f;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }

  friend bool operator==(const TernaryWeights&, const TernaryWeights&) = default;
};

// Per-token int8 activations in [-127, 127] with one positive scale per row.
// The real value of entry (t, k) is values(t, k) / act_scales[t].
struct QuantizedActivations {
  Matrix<int8_t> values;
  std::vector<float> act_scales;

  std::size_t tokens() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
};

// Round half away from zero, the tie rule used by both quantizers.
inline double round_half_away(double x) noexcept { return std::round(x); }

inline void check_finite(std::span<const float> xs, const char* what) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i])) {
      fail(ErrorKind::kInvalidInput,
           std::string(what) + ": non-finite entry at index " + std::to_string(i));
    }
  }
}

// gamma = mean|W| over the whole tensor (accumulated in double);
// w_q = clamp(round(w / gamma), -1, 1). A zero tensor yields gamma = 0 and
// all-zero codes without dividing.
inline TernaryWeights absmean_quantize_weights(const MatrixF& w) {
  if (w.rows() == 0 || w.cols() == 0) {
    fail(ErrorKind::kInvalidInput, "absmean_quantize_weights: empty matrix");
  }
  check_finite(w.flat(), "absmean_quantize_weights");

  double sum_abs = 0.0;
  for (float v : w.flat()) sum_abs += std::fabs(static_cast<double>(v));
  const float gamma = static_cast<float>(sum_abs / static_cast<double>(w.size()));

  TernaryWeights out{Matrix<int8_t>(w.rows(), w.cols(), 0), gamma};
  if (gamma == 0.0f) {
    out.weight_scale = 0.0f;
    return out;
  }
  const double g = gamma;
  auto dst = out.values.flat();
  auto src = w.flat();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double r = round_half_away(static_cast<double>(src[i]) / g);
    dst[i] = static_cast<int8_t>(std::clamp(r, -1.0, 1.0));
  }
  return out;
}

// Quantizes one token row into `out` and returns its scale. A zero row gets
// scale 1 so downstream code can always divide by it.
inline float absmax_quantize_row(std::span<const float> x, std::span<int8_t> out) {
  if (out.size() != x.size()) fail(ErrorKind::kShape, "absmax_quantize_row: length mismatch");
  check_finite(x, "absmax_quantize_row");

  float m = 0.0f;
  for (float v : x) m = std::max(m, std::fabs(v));
  if (m == 0.0f) {
    std::fill(out.begin(), out.end(), int8_t{0});
    return 1.0f;
  }
  // Subnormal maxima would overflow 127/m; saturate the scale instead.
  const float scale = std::min(static_cast<float>(kActMax / static_cast<double>(m)),
                               std::numeric_limits<float>::max());
  const double s = scale;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double r = round_half_away(static_cast<double>(x[k]) * s);
    out[k] = static_cast<int8_t>(std::clamp(r, -double(kActMax), double(kActMax)));
  }
  return scale;
}

inline QuantizedActivations absmax_quantize(const MatrixF& x) {
  QuantizedActivations qa{Matrix<int8_t>(x.rows(), x.cols(), 0),
                          std::vector<float>(x.rows(), 1.0f)};
  for (std::size_t t = 0; t < x.rows(); ++t) {
    qa.act_scales[t] = absmax_quantize_row(x.row(t), qa.values.row(t));
  }
  return qa;
}

inline MatrixF dequantize_weights(const TernaryWeights& tw) {
  MatrixF out(tw.rows(), tw.cols(), 0.0f);
  auto src = tw.values.flat();
  auto dst = out.flat();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i] = tw.weight_scale * static_cast<float>(src[i]);
  }
  return out;
}

inline MatrixF dequantize_activations(const QuantizedActivations& qa) {
  MatrixF out(qa.tokens(), qa.cols(), 0.0f);
  for (std::size_t t = 0; t < qa.tokens(); ++t) {
    for (std::size_t k = 0; k < qa.cols(); ++k) {
      out(t, k) = static_cast<float>(qa.values(t, k)) / qa.act_scales[t];
    }
  }
  return out;
}

// Fraction of entries that |w / gamma| pushes past the ternary grid (those
// rounding to magnitude 2 or more before the clamp).
inline double clipping_fraction(const MatrixF& w, float gamma) {
  if (gamma == 0.0f || w.empty()) return 0.0;
  std::size_t clipped = 0;
  for (float v : w.flat()) {
    if (std::fabs(round_half_away(static_cast<double>(v) / gamma)) > 1.0) ++clipped;
  }
  return static_cast<double>(clipped) / static_cast<double>(w.size());
}

}  // namespace bitnet
