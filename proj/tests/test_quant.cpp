// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "bitnet/quant.hpp"
#include "oracles.hpp"

using namespace bitnet;

namespace {

// Independent scalar absmean: gamma via long double, codes via oracle rounding.
std::vector<int> oracle_absmean(const MatrixF& w, float& gamma) {
  long double s = 0;
  for (float v : w.flat()) s += std::fabs((long double)v);
  gamma = float(s / (long double)w.size());
  std::vector<int> out;
  for (float v : w.flat()) {
    const double r = gamma == 0 ? 0 : oracle::round_away(double(v) / double(gamma));
    out.push_back(int(std::max(-1.0, std::min(1.0, r))));
  }
  return out;
}

std::vector<int> flat_ints(const Matrix<int8_t>& m) {
  return {m.flat().begin(), m.flat().end()};
}

}  // namespace

TEST(AbsmeanQuantize, SymmetricExactCase) {
  const auto tw = absmean_quantize_weights(MatrixF{{1.0f, -1.0f}, {0.0f, 0.0f}});
  EXPECT_EQ(tw.values, (Matrix<int8_t>{{1, -1}, {0, 0}}));
  EXPECT_FLOAT_EQ(tw.weight_scale, 0.5f);
}

TEST(AbsmeanQuantize, ZeroMatrixGuard) {
  const auto tw = absmean_quantize_weights(MatrixF(2, 2, 0.0f));
  EXPECT_EQ(tw.values, (Matrix<int8_t>{{0, 0}, {0, 0}}));
  EXPECT_EQ(tw.weight_scale, 0.0f);
}

TEST(AbsmeanQuantize, MixedCaseMatchesScalarOracle) {
  const MatrixF w{{0.3f, -0.2f}, {0.7f, -0.8f}};
  const auto tw = absmean_quantize_weights(w);
  EXPECT_EQ(tw.values, (Matrix<int8_t>{{1, 0}, {1, -1}}));
  EXPECT_FLOAT_EQ(tw.weight_scale, 0.5f);
  float gamma = 0;
  EXPECT_EQ(flat_ints(tw.values), oracle_absmean(w, gamma));
  EXPECT_EQ(tw.weight_scale, gamma);
}

TEST(AbsmeanQuantize, RejectsNonFinite) {
  MatrixF w{{1.0f, std::numeric_limits<float>::quiet_NaN()}};
  try {
    absmean_quantize_weights(w);
    FAIL() << "expected invalid-input";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidInput);
  }
  w(0, 1) = std::numeric_limits<float>::infinity();
  EXPECT_THROW(absmean_quantize_weights(w), Error);
}

TEST(AbsmeanQuantize, RandomMatchesOracleAndStaysTernary) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 40);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  for (int iter = 0; iter < 200; ++iter) {
    MatrixF w(dim(rng), dim(rng));
    for (float& v : w.flat()) v = nd(rng);
    const auto tw = absmean_quantize_weights(w);
    float gamma = 0;
    EXPECT_EQ(flat_ints(tw.values), oracle_absmean(w, gamma));
    for (int8_t v : tw.values.flat()) ASSERT_TRUE(v >= -1 && v <= 1);
  }
}

TEST(AbsmeanQuantize, GridIsAFixedPoint) {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 100; ++iter) {
    auto tw = oracle::random_ternary(rng, 1 + iter % 9, 1 + iter % 13);
    tw.values(0, 0) = 1;  // at least one nonzero
    const auto again = absmean_quantize_weights(dequantize_weights(tw));
    EXPECT_EQ(again.values, tw.values);
  }
}

TEST(AbsmeanQuantize, SignSymmetry) {
  std::mt19937_64 rng(3);
  std::normal_distribution<float> nd;
  MatrixF w(7, 9), neg(7, 9);
  for (std::size_t i = 0; i < w.size(); ++i) neg.flat()[i] = -(w.flat()[i] = nd(rng));
  const auto a = absmean_quantize_weights(w), b = absmean_quantize_weights(neg);
  EXPECT_EQ(a.weight_scale, b.weight_scale);
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_EQ(a.values.flat()[i], -b.values.flat()[i]);
}

TEST(AbsmaxQuantize, ZeroRowGuard) {
  std::vector<int8_t> q(3, 9);
  const std::vector<float> x{0, 0, 0};
  EXPECT_EQ(absmax_quantize_row(x, q), 1.0f);
  EXPECT_EQ(q, (std::vector<int8_t>{0, 0, 0}));
}

TEST(AbsmaxQuantize, UnitMaxMapsToFullRange) {
  std::vector<int8_t> q(1);
  const std::vector<float> x{1.0f};
  EXPECT_EQ(absmax_quantize_row(x, q), 127.0f);
  EXPECT_EQ(q[0], 127);
}

TEST(AbsmaxQuantize, TiesRoundAwayFromZero) {
  std::vector<int8_t> q(3);
  const std::vector<float> x{0.5f, -1.0f, 0.25f};
  EXPECT_EQ(absmax_quantize_row(x, q), 127.0f);
  EXPECT_EQ(q, (std::vector<int8_t>{64, -127, 32}));
  for (std::size_t k = 0; k < x.size(); ++k) {
    EXPECT_EQ(q[k], int(oracle::round_away(double(x[k]) * 127.0)));
  }
}

TEST(AbsmaxQuantize, RejectsNonFinite) {
  std::vector<int8_t> q(2);
  const std::vector<float> x{1.0f, -std::numeric_limits<float>::infinity()};
  EXPECT_THROW(absmax_quantize_row(x, q), Error);
}

TEST(AbsmaxQuantize, SubnormalRowKeepsPositiveFiniteScale) {
  std::vector<int8_t> q(2);
  const std::vector<float> x{std::numeric_limits<float>::denorm_min(), 0.0f};
  const float s = absmax_quantize_row(x, q);
  EXPECT_GT(s, 0.0f);
  EXPECT_TRUE(std::isfinite(s));
  EXPECT_GE(q[0], 0);
}

TEST(AbsmaxQuantize, RoundTripBoundAndRange) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> len(1, 64);
  std::uniform_real_distribution<float> mag(-30.0f, 30.0f);
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<float> x(len(rng));
    for (float& v : x) v = mag(rng) * std::exp2(float(iter % 20 - 10));
    std::vector<int8_t> q(x.size());
    const float s = absmax_quantize_row(x, q);
    ASSERT_GT(s, 0.0f);
    for (std::size_t k = 0; k < x.size(); ++k) {
      ASSERT_NE(q[k], -128);
      const float deq = float(q[k]) / s;
      const float bound = 0.5f / s;
      ASSERT_LE(std::fabs(x[k] - deq), bound + oracle::ulp(x[k]));
    }
  }
}

TEST(Dequantize, Examples) {
  EXPECT_EQ(dequantize_weights({Matrix<int8_t>{{1, -1}, {0, 0}}, 0.5f}),
            (MatrixF{{0.5f, -0.5f}, {0.0f, 0.0f}}));
  EXPECT_EQ(dequantize_weights({Matrix<int8_t>{{1, -1}, {1, 1}}, 0.0f}), MatrixF(2, 2, 0.0f));
  EXPECT_EQ(dequantize_weights({Matrix<int8_t>{{1, 0}, {1, -1}}, 0.5f}),
            (MatrixF{{0.5f, 0.0f}, {0.5f, -0.5f}}));
}

TEST(Dequantize, NearestPointForInRangeWeights) {
  std::mt19937_64 rng(13);
  std::normal_distribution<float> nd(0.0f, 0.7f);
  MatrixF w(64, 64);
  for (float& v : w.flat()) v = nd(rng);
  const auto tw = absmean_quantize_weights(w);
  const float g = tw.weight_scale;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const float x = w.flat()[i];
    if (std::fabs(x) > 1.5f * g) continue;
    const float err = std::fabs(x - g * float(tw.values.flat()[i]));
    EXPECT_LE(err, g / 2 + oracle::ulp(g));
  }
}

TEST(ClippingFraction, CountsEntriesPastTheGrid) {
  // gamma = 0.5: |w/gamma| = 4, 0, 0, 0 -> one clipped of four
  EXPECT_DOUBLE_EQ(clipping_fraction(MatrixF{{2.0f, 0.0f}, {0.0f, 0.0f}}, 0.5f), 0.25);
  EXPECT_DOUBLE_EQ(clipping_fraction(MatrixF(2, 2, 0.0f), 0.0f), 0.0);
}
