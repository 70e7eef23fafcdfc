#pragma once

#include <memory>
#include <string>
#include <vector>

#include "cgi/chat.hpp"

namespace cgi {

struct ChatClientConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8187/v1
  std::string api_key;
  std::string model = "default";
  double temperature = 1.0;
  int max_attempts = 3;
  int backoff_initial_ms = 1000;
  int timeout_seconds = 120;
  int max_inflight = 8;
  bool parallel_sampling = false;  // request n samples in one call
};

// Minimal chat-completions client: POST {endpoint}/chat/completions with a
// messages array, bounded retries with exponential backoff, and a global
// in-flight cap. Throws BackendUnavailable once retries are exhausted.
class ChatClient {
 public:
  explicit ChatClient(ChatClientConfig cfg);
  ~ChatClient();

  ChatClient(const ChatClient&) = delete;
  ChatClient& operator=(const ChatClient&) = delete;

  std::string complete(const ChatTurns& turns, double temperature);
  std::vector<std::string> complete_n(const ChatTurns& turns, int n, double temperature);

  const ChatClientConfig& config() const { return cfg_; }
  void set_endpoint(std::string endpoint);

 private:
  struct Impl;
  ChatClientConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cgi
