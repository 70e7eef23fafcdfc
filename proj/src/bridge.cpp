#include "cgi/bridge.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <map>
#include <memory>
#include <utility>

namespace cgi::bridge {
namespace {

using nlohmann::json;

void set_cloexec(int fd) { ::fcntl(fd, F_SETFD, FD_CLOEXEC); }

}  // namespace

FdTransport::FdTransport(int read_fd, int write_fd, bool owns_fds)
    : read_fd_(read_fd), write_fd_(write_fd), owns_fds_(owns_fds) {}

FdTransport::~FdTransport() { close(); }

void FdTransport::close() {
  if (!owns_fds_) {
    read_fd_ = write_fd_ = -1;
    return;
  }
  if (read_fd_ >= 0) ::close(read_fd_);
  if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
  read_fd_ = write_fd_ = -1;
}

void FdTransport::send_line(const std::string& line) {
  if (write_fd_ < 0) throw ProtocolError("transport closed");
  std::string framed = line + "\n";
  std::size_t sent = 0;
  while (sent < framed.size()) {
    ssize_t n = ::write(write_fd_, framed.data() + sent, framed.size() - sent);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("bridge write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(n);
  }
}

std::optional<std::string> FdTransport::recv_line(int timeout_ms) {
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  while (true) {
    std::size_t nl = buffer_.find('\n');
    if (nl != std::string::npos) {
      std::string line = buffer_.substr(0, nl);
      buffer_.erase(0, nl + 1);
      if (!line.empty() && line.back() == '\r') line.pop_back();
      return line;
    }
    if (read_fd_ < 0) return std::nullopt;

    int remaining = timeout_ms <= 0
                        ? -1
                        : static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(
                                               deadline - std::chrono::steady_clock::now())
                                               .count());
    if (timeout_ms > 0 && remaining <= 0) {
      throw ConnectTimeout("timed out waiting for bridge response");
    }
    struct pollfd pfd{read_fd_, POLLIN, 0};
    int rc = ::poll(&pfd, 1, remaining);
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("bridge poll failed: ") + std::strerror(errno));
    }
    if (rc == 0) throw ConnectTimeout("timed out waiting for bridge response");

    char chunk[4096];
    ssize_t n = ::read(read_fd_, chunk, sizeof(chunk));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("bridge read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      if (buffer_.empty()) return std::nullopt;
      std::string line = std::move(buffer_);
      buffer_.clear();
      return line;
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

ProcessTransport::ProcessTransport(const std::string& command) {
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0 || ::pipe(from_child) != 0) {
    throw ProtocolError("cannot create pipes for bridge child");
  }
  pid_ = ::fork();
  if (pid_ < 0) throw ProtocolError("fork failed for bridge child");
  if (pid_ == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);
  set_cloexec(to_child[1]);
  set_cloexec(from_child[0]);
  io_ = std::make_unique<FdTransport>(from_child[0], to_child[1]);
}

ProcessTransport::~ProcessTransport() { close(); }

void ProcessTransport::send_line(const std::string& line) { io_->send_line(line); }

std::optional<std::string> ProcessTransport::recv_line(int timeout_ms) {
  return io_->recv_line(timeout_ms);
}

void ProcessTransport::close() {
  if (io_) io_->close();
  if (pid_ > 0) {
    int status = 0;
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(10'000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }
}

std::unique_ptr<Transport> connect_tcp(const std::string& host, int port, int timeout_ms) {
  struct addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  struct addrinfo* result = nullptr;
  if (::getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &result) != 0) {
    throw ConnectTimeout("cannot resolve bridge host: " + host);
  }
  int fd = -1;
  for (struct addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    int flags = ::fcntl(fd, F_GETFL, 0);
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
    int rc = ::connect(fd, ai->ai_addr, ai->ai_addrlen);
    if (rc != 0 && errno == EINPROGRESS) {
      struct pollfd pfd{fd, POLLOUT, 0};
      rc = ::poll(&pfd, 1, timeout_ms) == 1 ? 0 : -1;
      if (rc == 0) {
        int err = 0;
        socklen_t len = sizeof(err);
        ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
        if (err != 0) rc = -1;
      }
    }
    if (rc == 0) {
      ::fcntl(fd, F_SETFL, flags);
      break;
    }
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(result);
  if (fd < 0) throw ConnectTimeout("cannot connect to bridge endpoint " + host + ":" +
                                   std::to_string(port));
  return std::make_unique<FdTransport>(fd, fd);
}

std::pair<std::unique_ptr<Transport>, std::unique_ptr<Transport>> make_transport_pair() {
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
    throw ProtocolError("socketpair failed");
  }
  return {std::make_unique<FdTransport>(fds[0], fds[0]),
          std::make_unique<FdTransport>(fds[1], fds[1])};
}

BridgeSession::BridgeSession(std::unique_ptr<Transport> transport, BridgeConfig cfg)
    : transport_(std::move(transport)), cfg_(cfg) {
  json hello{{"type", "hello"}, {"protocol_version", kProtocolVersion}};
  transport_->send_line(hello.dump());
  auto line = transport_->recv_line(cfg_.connect_timeout_ms);
  if (!line) throw ConnectTimeout("bridge endpoint closed during handshake");
  json ack;
  try {
    ack = json::parse(*line);
  } catch (const json::exception&) {
    throw ProtocolError("malformed handshake response: " + *line);
  }
  if (ack.value("type", "") != "ack" ||
      ack.value("protocol_version", -1) != kProtocolVersion) {
    throw VersionMismatch("bridge handshake failed: " + *line);
  }
  open_ = true;
}

BridgeSession::~BridgeSession() {
  try {
    close();
  } catch (...) {
    // destructor must not throw
  }
}

json BridgeSession::roundtrip(const json& request) {
  if (!open_) throw ProtocolError("session closed");
  transport_->send_line(request.dump());
  auto line = transport_->recv_line(cfg_.io_timeout_ms);
  if (!line) throw ProtocolError("bridge endpoint closed mid-session");
  try {
    return json::parse(*line);
  } catch (const json::exception&) {
    throw ProtocolError("malformed bridge response: " + *line);
  }
}

namespace {

Observation observation_from_response(const json& response) {
  if (response.value("type", "") == "error") {
    throw ProtocolError("bridge error: " + response.value("message", "unknown"));
  }
  if (response.value("type", "") != "observation" || !response.contains("text") ||
      !response.contains("score") || !response.contains("done")) {
    throw ProtocolError("response is not a valid observation: " + response.dump());
  }
  Observation obs;
  obs.text = response.at("text").get<std::string>();
  obs.score = response.at("score").get<double>();
  obs.done = response.at("done").get<bool>();
  if (obs.score < 0.0 || obs.score > 1.0) {
    throw ProtocolError("bridge score outside [0,1]");
  }
  return obs;
}

}  // namespace

Observation BridgeSession::reset(const std::string& task_id, std::uint64_t seed) {
  json request{{"type", "reset"}, {"task_id", task_id}, {"seed", seed}};
  Observation obs = observation_from_response(roundtrip(request));
  reset_task_ = task_id;
  return obs;
}

Observation BridgeSession::step(const std::string& task_id, const std::string& action) {
  if (reset_task_ != task_id) {
    throw EpisodeNotReset("step for task " + task_id + " before reset");
  }
  json request{{"type", "step"}, {"task_id", task_id}, {"action", action}};
  return observation_from_response(roundtrip(request));
}

void BridgeSession::close() {
  if (!open_) return;
  open_ = false;
  try {
    transport_->send_line(json{{"type", "close"}}.dump());
    transport_->recv_line(500);
  } catch (...) {
    // best effort
  }
  transport_->close();
}

std::unique_ptr<BridgeSession> bridge_connect(const std::string& endpoint, BridgeConfig cfg) {
  if (endpoint.rfind("cmd:", 0) == 0) {
    return std::make_unique<BridgeSession>(
        std::make_unique<ProcessTransport>(endpoint.substr(4)), cfg);
  }
  if (endpoint.rfind("tcp:", 0) == 0) {
    std::string rest = endpoint.substr(4);
    std::size_t colon = rest.rfind(':');
    if (colon == std::string::npos) {
      throw Error("tcp endpoint must be tcp:<host>:<port>: " + endpoint);
    }
    std::string host = rest.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
      throw Error("tcp endpoint port is not a number: " + endpoint);
    }
    return std::make_unique<BridgeSession>(connect_tcp(host, port, cfg.connect_timeout_ms),
                                           cfg);
  }
  throw Error("unknown bridge endpoint spec (want cmd:... or tcp:host:port): " + endpoint);
}

void serve_env(Transport& transport, const std::vector<craft::CraftTask>& tasks,
               craft::CraftConfig cfg) {
  std::map<std::string, const craft::CraftTask*> index;
  for (const auto& t : tasks) index[t.instruction.task_id] = &t;
  std::map<std::string, std::unique_ptr<craft::CraftEnv>> envs;

  auto error = [&](const std::string& message) {
    transport.send_line(json{{"type", "error"}, {"message", message}}.dump());
  };
  auto observation = [&](const Observation& obs) {
    transport.send_line(json{{"type", "observation"},
                             {"text", obs.text},
                             {"score", obs.score},
                             {"done", obs.done}}
                            .dump());
  };

  while (true) {
    std::optional<std::string> line;
    try {
      line = transport.recv_line(0);
    } catch (const Error&) {
      return;
    }
    if (!line) return;
    if (line->empty()) continue;

    json request;
    try {
      request = json::parse(*line);
    } catch (const json::exception&) {
      error("malformed request");
      continue;
    }
    const std::string type = request.value("type", "");
    try {
      if (type == "hello") {
        int version = request.value("protocol_version", -1);
        if (version != kProtocolVersion) {
          error("unsupported protocol version " + std::to_string(version));
        } else {
          transport.send_line(
              json{{"type", "ack"}, {"protocol_version", kProtocolVersion}}.dump());
        }
      } else if (type == "reset") {
        const std::string task_id = request.value("task_id", "");
        auto it = index.find(task_id);
        if (it == index.end()) {
          error("unknown task_id: " + task_id);
          continue;
        }
        auto env = std::make_unique<craft::CraftEnv>(*it->second, cfg);
        Observation obs = env->reset(request.value("seed", std::uint64_t{0}));
        envs[task_id] = std::move(env);
        observation(obs);
      } else if (type == "step") {
        const std::string task_id = request.value("task_id", "");
        auto it = envs.find(task_id);
        if (it == envs.end()) {
          error("episode not reset for task_id: " + task_id);
          continue;
        }
        if (!request.contains("action")) {
          error("step request missing action");
          continue;
        }
        observation(it->second->step_command(request.at("action").get<std::string>()));
      } else if (type == "close") {
        transport.send_line(
            json{{"type", "ack"}, {"protocol_version", kProtocolVersion}}.dump());
        return;
      } else {
        error("unknown request type: " + type);
      }
    } catch (const Error& e) {
      error(e.what());
    }
  }
}

void serve_env_tcp(const std::string& host, int port,
                   const std::vector<craft::CraftTask>& tasks, craft::CraftConfig cfg,
                   int max_sessions) {
  int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw ProtocolError("cannot create listener socket");
  int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  struct sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(listener);
    throw Error("serve-env host must be an IPv4 address: " + host);
  }
  if (::bind(listener, reinterpret_cast<struct sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listener, 16) != 0) {
    ::close(listener);
    throw ProtocolError("cannot bind/listen on " + host + ":" + std::to_string(port));
  }
  int served = 0;
  while (max_sessions == 0 || served < max_sessions) {
    int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;
    }
    FdTransport transport(fd, fd);
    serve_env(transport, tasks, cfg);
    ++served;
  }
  ::close(listener);
}

}  // namespace cgi::bridge
