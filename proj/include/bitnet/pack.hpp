// SPDX-License-Identifier: Apache-2.0
#pragma once

// 2-bit ternary packing, four weights per byte.
//
// Layout (normative, also the on-disk payload):
//   * row-major; each row starts on a byte boundary, ceil(cols/4) bytes long
//   * column offset i within a byte (i = 0..3, ascending column) occupies
//     bits [2i, 2i+1]
//   * code = value + 1: -1 -> 0b00, 0 -> 0b01, +1 -> 0b10; 0b11 is reserved
//   * unused fields in a row's last byte hold 0b01 (zero)

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bitnet/error.hpp"
#include "bitnet/quant.hpp"

namespace bitnet {

inline constexpr uint8_t kCodeZero = 0b01;
inline constexpr uint8_t kCodeReserved = 0b11;
inline constexpr uint8_t kZeroByte = 0x55;

constexpr std::size_t packed_row_bytes(std::size_t cols) noexcept { return (cols + 3) / 4; }

constexpr std::size_t packed_size_bytes(std::size_t rows, std::size_t cols) noexcept {
  return rows * packed_row_bytes(cols);
}

// Byte offset of the first reserved code in a real (non-padding) field, or
// npos if the payload is clean.
inline std::size_t find_reserved_code(std::span<const uint8_t> data, std::size_t rows,
                                      std::size_t cols) noexcept {
  const std::size_t row_bytes = packed_row_bytes(cols);
  const std::size_t tail = cols % 4;  // real fields in the last byte, 0 = all four
  for (std::size_t r = 0; r < rows; ++r) {
    const uint8_t* row = data.data() + r * row_bytes;
    for (std::size_t b = 0; b < row_bytes; ++b) {
      const uint8_t byte = row[b];
      const std::size_t fields = (b + 1 == row_bytes && tail != 0) ? tail : 4;
      for (std::size_t i = 0; i < fields; ++i) {
        if (((byte >> (2 * i)) & 0b11) == kCodeReserved) return r * row_bytes + b;
      }
    }
  }
  return std::string::npos;
}

// Packed ternary weights. Construction validates the payload, so every live
// instance satisfies the layout invariants and kernels never re-check codes.
class PackedTernaryTensor {
 public:
  PackedTernaryTensor() = default;

  static PackedTernaryTensor from_bytes(std::size_t rows, std::size_t cols, float weight_scale,
                                        std::vector<uint8_t> data) {
    if (rows == 0 || cols == 0) fail(ErrorKind::kShape, "packed tensor needs rows, cols >= 1");
    if (data.size() != packed_size_bytes(rows, cols)) {
      fail(ErrorKind::kShape, "packed payload is " + std::to_string(data.size()) +
                                  " bytes, expected " +
                                  std::to_string(packed_size_bytes(rows, cols)));
    }
    if (!(weight_scale >= 0.0f) || !std::isfinite(weight_scale)) {
      fail(ErrorKind::kInvalidInput, "weight scale must be finite and non-negative");
    }
    if (const auto at = find_reserved_code(data, rows, cols); at != std::string::npos) {
      fail(ErrorKind::kCorruptData, "reserved ternary code 0b11 at byte offset " + std::to_string(at));
    }
    PackedTernaryTensor t;
    t.rows_ = rows;
    t.cols_ = cols;
    t.weight_scale_ = weight_scale;
    t.data_ = std::move(data);
    return t;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t row_bytes() const noexcept { return packed_row_bytes(cols_); }
  float weight_scale() const noexcept { return weight_scale_; }
  std::span<const uint8_t> data() const noexcept { return data_; }
  std::span<const uint8_t> row(std::size_t r) const noexcept {
    return {data_.data() + r * row_bytes(), row_bytes()};
  }

  friend bool operator==(const PackedTernaryTensor&, const PackedTernaryTensor&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  float weight_scale_ = 0.0f;
  std::vector<uint8_t> data_;
};

inline PackedTernaryTensor pack_ternary(const TernaryWeights& tw) {
  const std::size_t rows = tw.rows(), cols = tw.cols();
  if (rows == 0 || cols == 0) fail(ErrorKind::kShape, "pack_ternary: empty weights");
  const std::size_t row_bytes = packed_row_bytes(cols);
  std::vector<uint8_t> data(rows * row_bytes, kZeroByte);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto src = tw.values.row(r);
    uint8_t* dst = data.data() + r * row_bytes;
    for (std::size_t c = 0; c < cols; ++c) {
      const int v = src[c];
      if (v < -1 || v > 1) {
        fail(ErrorKind::kInvalidInput, "pack_ternary: entry (" + std::to_string(r) + ", " +
                                           std::to_string(c) + ") = " + std::to_string(v) +
                                           " is not ternary");
      }
      const unsigned shift = 2 * (c % 4);
      uint8_t& byte = dst[c / 4];
      byte = static_cast<uint8_t>((byte & ~(0b11u << shift)) | (unsigned(v + 1) << shift));
    }
  }
  return PackedTernaryTensor::from_bytes(rows, cols, tw.weight_scale, std::move(data));
}

// Decodes `count` ternary values from a packed row starting at column 0.
inline void unpack_row(std::span<const uint8_t> row, std::size_t count, int8_t* out) noexcept {
  for (std::size_t c = 0; c < count; ++c) {
    out[c] = static_cast<int8_t>(((row[c / 4] >> (2 * (c % 4))) & 0b11) - 1);
  }
}

inline TernaryWeights unpack_ternary(const PackedTernaryTensor& pt) {
  TernaryWeights tw{Matrix<int8_t>(pt.rows(), pt.cols(), 0), pt.weight_scale()};
  for (std::size_t r = 0; r < pt.rows(); ++r) {
    unpack_row(pt.row(r), pt.cols(), tw.values.row(r).data());
  }
  return tw;
}

}  // namespace bitnet
