// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "bitnet/error.hpp"
#include "bitnet/model.hpp"

namespace bitnet {

inline constexpr std::string_view kBeginOfText = "<|begin_of_text|>";
inline constexpr std::string_view kEndOfTurn = "<|eot_id|>";
inline constexpr std::string_view kPad = "<|pad|>";

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;

  virtual std::size_t vocab_size() const = 0;
  virtual TokenId begin_of_text_id() const = 0;
  virtual TokenId eot_id() const = 0;
  // With parse_special, marker strings in `text` map to their special ids.
  virtual std::vector<TokenId> encode(std::string_view text, bool parse_special) const = 0;
  virtual std::string decode(std::span<const TokenId> ids) const = 0;
};

// Ids 0..255 are raw bytes; 256..258 are begin_of_text, eot and pad.
class ByteTokenizer final : public Tokenizer {
 public:
  static constexpr TokenId kBeginOfTextId = 256;
  static constexpr TokenId kEotId = 257;
  static constexpr TokenId kPadId = 258;
  static constexpr std::size_t kVocabSize = 259;

  std::size_t vocab_size() const override { return kVocabSize; }
  TokenId begin_of_text_id() const override { return kBeginOfTextId; }
  TokenId eot_id() const override { return kEotId; }

  std::vector<TokenId> encode(std::string_view text, bool parse_special) const override {
    std::vector<TokenId> ids;
    ids.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
      if (parse_special) {
        bool matched = false;
        for (std::size_t s = 0; s < kSpecials.size(); ++s) {
          if (text.substr(i, kSpecials[s].size()) == kSpecials[s]) {
            ids.push_back(static_cast<TokenId>(256 + s));
            i += kSpecials[s].size();
            matched = true;
            break;
          }
        }
        if (matched) continue;
      }
      ids.push_back(static_cast<unsigned char>(text[i]));
      ++i;
    }
    return ids;
  }

  std::string decode(std::span<const TokenId> ids) const override {
    std::string out;
    out.reserve(ids.size());
    for (TokenId id : ids) {
      if (id < 256) {
        out.push_back(static_cast<char>(id));
      } else if (id < kVocabSize) {
        out.append(kSpecials[id - 256]);
      } else {
        fail(ErrorKind::kInvalidToken, "token id " + std::to_string(id) + " outside byte vocabulary");
      }
    }
    return out;
  }

 private:
  static constexpr std::array<std::string_view, 3> kSpecials = {kBeginOfText, kEndOfTurn, kPad};
};

inline std::vector<TokenId> byte_tokenize(std::string_view text) {
  return ByteTokenizer{}.encode(text, false);
}

inline std::string byte_detokenize(std::span<const TokenId> ids) { return ByteTokenizer{}.decode(ids); }

}  // namespace bitnet
