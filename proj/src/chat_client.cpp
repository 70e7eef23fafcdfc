#include "cgi/chat_client.hpp"

#include <chrono>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "httplib.h"
#include "json.hpp"

#include "cgi/errors.hpp"

namespace cgi {
namespace {

using nlohmann::json;

struct ParsedEndpoint {
  std::string host_port;  // scheme://host:port for httplib
  std::string path_prefix;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  std::string rest = endpoint;
  std::string scheme = "http://";
  if (rest.rfind("http://", 0) == 0) {
    rest = rest.substr(7);
  } else if (rest.rfind("https://", 0) == 0) {
    scheme = "https://";
    rest = rest.substr(8);
  }
  std::size_t slash = rest.find('/');
  ParsedEndpoint out;
  out.host_port = scheme + (slash == std::string::npos ? rest : rest.substr(0, slash));
  out.path_prefix = slash == std::string::npos ? "" : rest.substr(slash);
  while (!out.path_prefix.empty() && out.path_prefix.back() == '/') {
    out.path_prefix.pop_back();
  }
  return out;
}

const char* role_name(Role r) {
  switch (r) {
    case Role::System: return "system";
    case Role::Human: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status <= 599);
}

// Counting gate for the in-flight request cap.
class Gate {
 public:
  explicit Gate(int slots) : slots_(slots) {}
  void acquire() {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return slots_ > 0; });
    --slots_;
  }
  void release() {
    {
      std::lock_guard lock(mu_);
      ++slots_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int slots_;
};

struct GateSlot {
  explicit GateSlot(Gate& gate) : gate_(gate) { gate_.acquire(); }
  ~GateSlot() { gate_.release(); }
  Gate& gate_;
};

}  // namespace

struct ChatClient::Impl {
  explicit Impl(int slots) : gate(slots) {}
  Gate gate;
  mutable std::mutex endpoint_mu;

  // One POST with retry/backoff; returns up to `n` completions.
  std::vector<std::string> request(const ChatClientConfig& cfg, const std::string& endpoint,
                                   const ChatTurns& turns, int n, double temperature);
};

std::vector<std::string> ChatClient::Impl::request(const ChatClientConfig& cfg,
                                                   const std::string& endpoint,
                                                   const ChatTurns& turns, int n,
                                                   double temperature) {
  if (endpoint.empty()) throw BackendUnavailable("no chat endpoint configured");
  ParsedEndpoint ep = parse_endpoint(endpoint);

  json messages = json::array();
  for (const auto& turn : turns) {
    messages.push_back({{"role", role_name(turn.role)}, {"content", turn.content}});
  }
  json body{{"model", cfg.model}, {"messages", messages}, {"temperature", temperature}};
  if (n > 1) body["n"] = n;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < std::max(1, cfg.max_attempts); ++attempt) {
    if (attempt > 0) {
      auto delay = std::chrono::milliseconds(cfg.backoff_initial_ms) * (1 << (attempt - 1));
      std::this_thread::sleep_for(delay);
    }
    httplib::Result res = [&] {
      GateSlot slot(gate);
      httplib::Client client(ep.host_port);
      client.set_connection_timeout(cfg.timeout_seconds, 0);
      client.set_read_timeout(cfg.timeout_seconds, 0);
      client.set_write_timeout(cfg.timeout_seconds, 0);
      httplib::Headers headers;
      if (!cfg.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + cfg.api_key);
      }
      return client.Post(ep.path_prefix + "/chat/completions", headers, payload,
                         "application/json");
    }();

    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        json reply = json::parse(res->body);
        std::vector<std::string> out;
        for (const auto& choice : reply.at("choices")) {
          out.push_back(choice.at("message").at("content").get<std::string>());
        }
        if (out.empty()) throw Error("no choices in response");
        return out;
      } catch (const std::exception& e) {
        last_error = std::string("malformed completion response: ") + e.what();
        continue;
      }
    }
    last_error = "status " + std::to_string(res->status) + ": " + res->body;
    if (!retryable_status(res->status)) break;
  }
  throw BackendUnavailable("chat completion failed after retries: " + last_error);
}

ChatClient::ChatClient(ChatClientConfig cfg)
    : cfg_(std::move(cfg)), impl_(std::make_unique<Impl>(std::max(1, cfg_.max_inflight))) {}

ChatClient::~ChatClient() = default;

void ChatClient::set_endpoint(std::string endpoint) {
  std::lock_guard lock(impl_->endpoint_mu);
  cfg_.endpoint = std::move(endpoint);
}

std::string ChatClient::complete(const ChatTurns& turns, double temperature) {
  std::string endpoint;
  {
    std::lock_guard lock(impl_->endpoint_mu);
    endpoint = cfg_.endpoint;
  }
  return impl_->request(cfg_, endpoint, turns, 1, temperature).front();
}

std::vector<std::string> ChatClient::complete_n(const ChatTurns& turns, int n,
                                                double temperature) {
  if (n < 1) throw Error("complete_n requires n >= 1");
  std::string endpoint;
  {
    std::lock_guard lock(impl_->endpoint_mu);
    endpoint = cfg_.endpoint;
  }
  std::vector<std::string> out;
  if (cfg_.parallel_sampling) {
    out = impl_->request(cfg_, endpoint, turns, n, temperature);
    if (static_cast<int>(out.size()) > n) out.resize(static_cast<std::size_t>(n));
  }
  // Sequential calls when n-sampling is off or the stack returned fewer.
  while (static_cast<int>(out.size()) < n) {
    out.push_back(impl_->request(cfg_, endpoint, turns, 1, temperature).front());
  }
  return out;
}

}  // namespace cgi
