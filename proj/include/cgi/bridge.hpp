#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cgi/craftsim.hpp"
#include "cgi/env.hpp"
#include "cgi/trajectory.hpp"

namespace cgi::bridge {

inline constexpr int kProtocolVersion = 1;

struct BridgeConfig {
  int connect_timeout_ms = 10000;
  int io_timeout_ms = 60000;
};

// Newline-delimited line transport.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual void send_line(const std::string& line) = 0;
  // nullopt on EOF; throws ConnectTimeout when the deadline passes.
  virtual std::optional<std::string> recv_line(int timeout_ms) = 0;
  virtual void close() = 0;
};

// Transport over a pair of file descriptors (sockets, pipes, stdio).
class FdTransport : public Transport {
 public:
  FdTransport(int read_fd, int write_fd, bool owns_fds = true);
  ~FdTransport() override;
  void send_line(const std::string& line) override;
  std::optional<std::string> recv_line(int timeout_ms) override;
  void close() override;

 private:
  int read_fd_;
  int write_fd_;
  bool owns_fds_;
  std::string buffer_;
};

// Child process over stdio; the spec string runs under /bin/sh -c.
class ProcessTransport : public Transport {
 public:
  explicit ProcessTransport(const std::string& command);
  ~ProcessTransport() override;
  void send_line(const std::string& line) override;
  std::optional<std::string> recv_line(int timeout_ms) override;
  void close() override;

 private:
  std::unique_ptr<FdTransport> io_;
  int pid_ = -1;
};

std::unique_ptr<Transport> connect_tcp(const std::string& host, int port, int timeout_ms);

// Connected socketpair as two transports (in-process loopback and tests).
std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_transport_pair();

// Client session. Construction performs the hello/ack version handshake;
// requests and responses alternate strictly.
class BridgeSession {
 public:
  BridgeSession(std::unique_ptr<Transport> transport, BridgeConfig cfg = {});
  ~BridgeSession();

  Observation reset(const std::string& task_id, std::uint64_t seed);
  Observation step(const std::string& task_id, const std::string& action);
  void close();

 private:
  nlohmann::json roundtrip(const nlohmann::json& request);

  std::unique_ptr<Transport> transport_;
  BridgeConfig cfg_;
  std::string reset_task_;  // last task reset on this session
  bool open_ = false;
};

// endpoint spec: "cmd:<shell command>" or "tcp:<host>:<port>"
std::unique_ptr<BridgeSession> bridge_connect(const std::string& endpoint,
                                              BridgeConfig cfg = {});

// Serves the crafting environment over one transport until EOF/close.
// Unknown request types get an error response and the connection stays
// open. Used by the serve-env command and the loopback tests.
void serve_env(Transport& transport, const std::vector<craft::CraftTask>& tasks,
               craft::CraftConfig cfg = {});

// Listens on host:port and serves each accepted connection in turn
// (one session per episode). Returns when `max_sessions` sessions ended
// (0 = forever).
void serve_env_tcp(const std::string& host, int port,
                   const std::vector<craft::CraftTask>& tasks,
                   craft::CraftConfig cfg = {}, int max_sessions = 0);

// TextEnv adaptor over a bridge session.
class BridgeEnv : public TextEnv {
 public:
  explicit BridgeEnv(std::unique_ptr<BridgeSession> session)
      : session_(std::move(session)) {}

  Observation reset(const std::string& task_id, std::uint64_t seed) override {
    return session_->reset(task_id, seed);
  }
  Observation step(const std::string& task_id, const std::string& command) override {
    return session_->step(task_id, command);
  }

 private:
  std::unique_ptr<BridgeSession> session_;
};

}  // namespace cgi::bridge
