// SPDX-License-Identifier: Apache-2.0
#pragma once

// Conversation rendering:
//
//   <|begin_of_text|>System: {system}<|eot_id|>\n
//   User: {user}<|eot_id|>\n
//   Assistant: {assistant}<|eot_id|>\n
//   ...
//
// followed by "Assistant: " when the last turn is from the user. The output
// never ends in a newline: the final <|eot_id|> has none unless the
// generation prompt follows it.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitnet/error.hpp"
#include "bitnet/tokenizer.hpp"

namespace bitnet {

enum class Role { kSystem, kUser, kAssistant };

struct ChatMessage {
  Role role;
  std::string content;
};

inline std::string_view role_label(Role r) noexcept {
  switch (r) {
    case Role::kSystem: return "System";
    case Role::kUser: return "User";
    case Role::kAssistant: return "Assistant";
  }
  return "";
}

inline std::string apply_chat_template(std::span<const ChatMessage> messages) {
  std::string out(kBeginOfText);
  std::size_t turn = 0;  // index among non-system messages
  for (std::size_t i = 0; i < messages.size(); ++i) {
    const auto& m = messages[i];
    for (std::string_view marker : {kBeginOfText, kEndOfTurn}) {
      if (m.content.find(marker) != std::string::npos) {
        fail(ErrorKind::kReservedMarker,
             "message " + std::to_string(i) + " contains reserved marker " + std::string(marker));
      }
    }
    if (m.role == Role::kSystem) {
      if (i != 0) fail(ErrorKind::kRoleOrder, "system message must come first");
    } else {
      const Role expected = turn % 2 == 0 ? Role::kUser : Role::kAssistant;
      if (m.role != expected) {
        fail(ErrorKind::kRoleOrder, "message " + std::to_string(i) + " should be from " +
                                        std::string(role_label(expected)));
      }
      ++turn;
    }
    out.append(role_label(m.role));
    out.append(": ");
    out.append(m.content);
    out.append(kEndOfTurn);
    if (i + 1 < messages.size()) out.push_back('\n');
  }
  if (!messages.empty() && messages.back().role == Role::kUser) out.append("\nAssistant: ");
  return out;
}

}  // namespace bitnet
