#include "cgi/chat.hpp"

namespace cgi {

std::string to_string(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::Human: return "human";
    case Role::Assistant: return "assistant";
  }
  return "human";
}

Role role_from_string(const std::string& s) {
  if (s == "system") return Role::System;
  if (s == "human") return Role::Human;
  if (s == "assistant" || s == "gpt") return Role::Assistant;
  throw Error("unknown chat role: " + s);
}

}  // namespace cgi
