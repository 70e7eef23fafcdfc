#pragma once

#include <string>
#include <vector>

#include "cgi/errors.hpp"

namespace cgi {

enum class Role { System, Human, Assistant };

std::string to_string(Role r);
Role role_from_string(const std::string& s);

struct ChatTurn {
  Role role = Role::Human;
  std::string content;

  bool operator==(const ChatTurn&) const = default;
};

using ChatTurns = std::vector<ChatTurn>;

}  // namespace cgi
