// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bitnet {

enum class ErrorKind {
  kInvalidInput,
  kShape,
  kCorruptData,
  kCapacity,
  kInvalidToken,
  kIo,
  kBadMagic,
  kUnsupportedVersion,
  kTruncated,
  kOverlappingRecords,
  kReservedCode,
  kDuplicateName,
  kMalformedHeader,
  kChecksumMismatch,
  kRoleOrder,
  kReservedMarker,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kInvalidInput: return "invalid-input";
    case ErrorKind::kShape: return "shape";
    case ErrorKind::kCorruptData: return "corrupt-data";
    case ErrorKind::kCapacity: return "capacity";
    case ErrorKind::kInvalidToken: return "invalid-token";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kBadMagic: return "bad-magic";
    case ErrorKind::kUnsupportedVersion: return "unsupported-version";
    case ErrorKind::kTruncated: return "truncated";
    case ErrorKind::kOverlappingRecords: return "overlapping-records";
    case ErrorKind::kReservedCode: return "reserved-code";
    case ErrorKind::kDuplicateName: return "duplicate-name";
    case ErrorKind::kMalformedHeader: return "malformed-header";
    case ErrorKind::kChecksumMismatch: return "checksum-mismatch";
    case ErrorKind::kRoleOrder: return "role-order";
    case ErrorKind::kReservedMarker: return "reserved-marker";
  }
  return "unknown";
}

// Every failure the library reports is an Error carrying a kind, so callers
// (and the CLI exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace bitnet
