// Copyright 2026 The evoseed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Client side of the "evoseed/1" backend protocol.
//
// One JSON object per line, newline (0x0A) terminated, strict
// request/response alternation over a child process's stdio or a TCP stream.
//
//   -> {"id":0,"op":"hello"}
//   <- {"id":0,"protocol_version":"evoseed/1","latent_length":n,
//       "image_shape":[H,W,C],"num_labels":K,"capabilities":["generate","classify"]}
//   -> {"id":i,"op":"generate","latents":[T...],"conditions":[c...]}
//   <- {"id":i,"images":[T...]}
//   -> {"id":i,"op":"classify","images":[T...]}
//   <- {"id":i,"probs":[T...]}
//   <- {"id":i,"error":{"code":"bad_request|shape_mismatch|model_failure|unsupported_op",
//                       "message":"..."}}
//
// where T is a tensor payload {"shape":[...],"b64":"..."} (see codec.hpp).

#ifndef EVOSEED_BACKEND_HPP_
#define EVOSEED_BACKEND_HPP_

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include "evoseed/codec.hpp"
#include "evoseed/errors.hpp"
#include "evoseed/models.hpp"
#include "evoseed/tensor.hpp"
#include "json.hpp"

extern char** environ;

namespace evoseed::backend {

using json = nlohmann::json;

inline constexpr std::string_view kProtocolVersion = "evoseed/1";
inline constexpr std::size_t kDefaultBatchCap = 4096;
inline constexpr double kBoundarySumTolerance = 1e-4;
inline constexpr std::chrono::milliseconds kDefaultTimeout{30'000};
inline constexpr const char* kTimeoutEnvVar = "EVOSEED_BACKEND_TIMEOUT_SECS";

/// Timeout from EVOSEED_BACKEND_TIMEOUT_SECS, or 30 s.
inline std::chrono::milliseconds timeout_from_env() {
  const char* raw = std::getenv(kTimeoutEnvVar);
  if (raw == nullptr || *raw == '\0') return kDefaultTimeout;
  char* end = nullptr;
  const double secs = std::strtod(raw, &end);
  if (end == raw || *end != '\0' || !(secs > 0.0) || !std::isfinite(secs)) {
    throw ConfigError(std::string(kTimeoutEnvVar) + " must be a positive number of seconds, got '" +
                      raw + "'");
  }
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::ceil(secs * 1000.0)));
}

/// Line-oriented byte stream.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Writes `line` followed by '\n'.
  virtual void write_line(std::string_view line) = 0;
  /// Reads up to and excluding the next '\n'.
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

namespace detail {

/// Buffered reader/writer over a pair of file descriptors.
class FdLineStream {
 public:
  FdLineStream(int read_fd, int write_fd, bool is_socket)
      : read_fd_(read_fd), write_fd_(write_fd), is_socket_(is_socket) {}

  void write_all(std::string_view data) {
    while (!data.empty()) {
      const ssize_t n = is_socket_ ? ::send(write_fd_, data.data(), data.size(), MSG_NOSIGNAL)
                                   : ::write(write_fd_, data.data(), data.size());
      if (n < 0) {
        if (errno == EINTR) continue;
        throw ConnectionError(std::string("backend write failed: ") + std::strerror(errno));
      }
      data.remove_prefix(static_cast<std::size_t>(n));
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      const auto nl = buffer_.find('\n', scanned_);
      if (nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        scanned_ = 0;
        return line;
      }
      scanned_ = buffer_.size();
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) {
        throw ConnectionError("backend did not answer within " +
                              std::to_string(timeout.count()) + " ms");
      }
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left.count(), 1 << 30)));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw ConnectionError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) continue;
      char chunk[65536];
      const ssize_t n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw ConnectionError(std::string("backend read failed: ") + std::strerror(errno));
      }
      if (n == 0) throw ConnectionError("backend closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  int read_fd_;
  int write_fd_;
  bool is_socket_;
  std::string buffer_;
  std::size_t scanned_ = 0;
};

}  // namespace detail

/// Child process spoken to over its stdin/stdout. Ignores SIGPIPE process-wide
/// so a dying child surfaces as a ConnectionError instead of a signal.
class SubprocessTransport final : public Transport {
 public:
  explicit SubprocessTransport(std::vector<std::string> argv) {
    if (argv.empty()) throw ConfigError("backend command is empty");
    ::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (::pipe2(to_child, O_CLOEXEC) != 0 || ::pipe2(from_child, O_CLOEXEC) != 0) {
      throw ConnectionError(std::string("pipe failed: ") + std::strerror(errno));
    }
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, to_child[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, from_child[1], STDOUT_FILENO);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    const int rc = ::posix_spawnp(&pid_, args[0], &actions, nullptr, args.data(), environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(to_child[0]);
    ::close(from_child[1]);
    if (rc != 0) {
      ::close(to_child[1]);
      ::close(from_child[0]);
      throw ConnectionError("cannot start backend '" + argv[0] + "': " + std::strerror(rc));
    }
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
    stream_.emplace(read_fd_, write_fd_, false);
  }

  SubprocessTransport(const SubprocessTransport&) = delete;
  SubprocessTransport& operator=(const SubprocessTransport&) = delete;

  ~SubprocessTransport() override {
    if (write_fd_ >= 0) ::close(write_fd_);
    // EOF on stdin asks the child to exit; give it a moment before killing.
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        break;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (pid_ > 0) {
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, &status, 0);
    }
    if (read_fd_ >= 0) ::close(read_fd_);
  }

  void write_line(std::string_view line) override {
    std::string framed(line);
    framed += '\n';
    stream_->write_all(framed);
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    return stream_->read_line(timeout);
  }

 private:
  pid_t pid_ = -1;
  int write_fd_ = -1;
  int read_fd_ = -1;
  std::optional<detail::FdLineStream> stream_;
};

class TcpTransport final : public Transport {
 public:
  TcpTransport(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* found = nullptr;
    const std::string service = std::to_string(port);
    if (const int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &found); rc != 0) {
      throw ConnectionError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    std::unique_ptr<addrinfo, decltype(&::freeaddrinfo)> guard(found, &::freeaddrinfo);
    for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
      const int fd = ::socket(a->ai_family, a->ai_socktype | SOCK_CLOEXEC, a->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) {
        fd_ = fd;
        break;
      }
      ::close(fd);
    }
    if (fd_ < 0) {
      throw ConnectionError("cannot connect to " + host + ":" + service + ": " +
                            std::strerror(errno));
    }
    stream_.emplace(fd_, fd_, true);
  }

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;
  ~TcpTransport() override {
    if (fd_ >= 0) ::close(fd_);
  }

  void write_line(std::string_view line) override {
    std::string framed(line);
    framed += '\n';
    stream_->write_all(framed);
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    return stream_->read_line(timeout);
  }

 private:
  int fd_ = -1;
  std::optional<detail::FdLineStream> stream_;
};

/// "host:port" -> TCP; anything else is split on spaces into a command line.
struct Endpoint {
  enum class Kind { kCommand, kTcp } kind = Kind::kCommand;
  std::vector<std::string> command;
  std::string host;
  std::uint16_t port = 0;

  static Endpoint command_line(std::vector<std::string> argv) {
    Endpoint e;
    e.command = std::move(argv);
    return e;
  }

  static Endpoint tcp(std::string host, std::uint16_t port) {
    Endpoint e;
    e.kind = Kind::kTcp;
    e.host = std::move(host);
    e.port = port;
    return e;
  }

  /// Parses "tcp://host:port".
  static Endpoint parse_tcp(std::string_view address) {
    constexpr std::string_view prefix = "tcp://";
    if (address.starts_with(prefix)) address.remove_prefix(prefix.size());
    const auto colon = address.rfind(':');
    if (colon == std::string_view::npos || colon == 0) {
      throw ConfigError("TCP endpoint must look like host:port, got '" + std::string(address) + "'");
    }
    const std::string port_text(address.substr(colon + 1));
    char* end = nullptr;
    const long port = std::strtol(port_text.c_str(), &end, 10);
    if (port_text.empty() || *end != '\0' || port <= 0 || port > 65535) {
      throw ConfigError("invalid TCP port '" + port_text + "'");
    }
    return tcp(std::string(address.substr(0, colon)), static_cast<std::uint16_t>(port));
  }

  std::unique_ptr<Transport> open() const {
    if (kind == Kind::kTcp) return std::make_unique<TcpTransport>(host, port);
    return std::make_unique<SubprocessTransport>(command);
  }
};

struct BackendInfo {
  std::string protocol_version;
  std::size_t latent_length = 0;
  ImageShape image_shape;
  std::size_t num_labels = 0;
  std::set<std::string> capabilities;

  bool can(std::string_view op) const { return capabilities.contains(std::string(op)); }
};

struct ConnectionOptions {
  std::chrono::milliseconds timeout = kDefaultTimeout;
  std::size_t batch_cap = kDefaultBatchCap;
};

inline json to_payload(std::span<const std::size_t> shape, std::span<const float> values) {
  return json{{"shape", std::vector<std::size_t>(shape.begin(), shape.end())},
              {"b64", codec::encode_floats(values)}};
}

struct Payload {
  std::vector<std::size_t> shape;
  std::vector<float> values;
};

inline Payload from_payload(const json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("b64") || !j["shape"].is_array() ||
      !j["b64"].is_string()) {
    throw ContractViolationError("tensor payload must be {\"shape\":[...],\"b64\":\"...\"}");
  }
  Payload p;
  std::size_t count = 1;
  for (const auto& d : j["shape"]) {
    if (!d.is_number_unsigned()) throw ContractViolationError("tensor shape entries must be unsigned");
    p.shape.push_back(d.get<std::size_t>());
    count *= p.shape.back();
  }
  p.values = codec::decode_floats(j["b64"].get<std::string>());
  if (p.values.size() != count) {
    throw ContractViolationError("tensor payload has " + std::to_string(p.values.size()) +
                                 " values for shape product " + std::to_string(count));
  }
  return p;
}

/// One synchronous protocol session. Calls from several threads are serialized;
/// requests are never pipelined.
class BackendConnection {
 public:
  /// Opens the transport and performs the hello handshake.
  static std::shared_ptr<BackendConnection> handshake(std::unique_ptr<Transport> transport,
                                                      ConnectionOptions options = {}) {
    auto conn = std::shared_ptr<BackendConnection>(
        new BackendConnection(std::move(transport), options));
    conn->hello();
    return conn;
  }

  static std::shared_ptr<BackendConnection> handshake(const Endpoint& endpoint,
                                                      ConnectionOptions options = {}) {
    return handshake(endpoint.open(), options);
  }

  const BackendInfo& info() const noexcept { return info_; }
  const ConnectionOptions& options() const noexcept { return options_; }
  std::uint64_t next_request_id() const noexcept { return next_id_; }

  std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                    std::span<const ConditionLabel> conditions) {
    if (latents.size() != conditions.size()) {
      throw InvalidInputError("generate: " + std::to_string(latents.size()) + " latents vs " +
                              std::to_string(conditions.size()) + " conditions");
    }
    if (latents.empty()) return {};
    check_batch(latents.size());
    json request_latents = json::array();
    json request_conditions = json::array();
    const std::size_t shape[] = {info_.latent_length};
    for (std::size_t i = 0; i < latents.size(); ++i) {
      if (latents[i].size() != info_.latent_length) {
        throw DimensionError("latent " + std::to_string(i) + " has length " +
                             std::to_string(latents[i].size()) + ", backend expects " +
                             std::to_string(info_.latent_length));
      }
      if (conditions[i].index >= info_.num_labels) {
        throw DimensionError("condition " + std::to_string(conditions[i].index) +
                             " >= backend K=" + std::to_string(info_.num_labels));
      }
      request_latents.push_back(to_payload(shape, latents[i].values()));
      request_conditions.push_back(conditions[i].index);
    }
    const json response = call("generate", {{"latents", std::move(request_latents)},
                                            {"conditions", std::move(request_conditions)}});
    const auto& images = field_array(response, "images", latents.size());
    std::vector<ImageTensor> out;
    out.reserve(images.size());
    const auto& s = info_.image_shape;
    for (std::size_t i = 0; i < images.size(); ++i) {
      Payload p = from_payload(images[i]);
      if (p.shape != std::vector<std::size_t>{s.height, s.width, s.channels}) {
        throw ContractViolationError("image " + std::to_string(i) + " has the wrong shape");
      }
      for (float v : p.values) {
        if (!(v >= 0.0f && v <= 1.0f)) {
          throw ContractViolationError("image " + std::to_string(i) +
                                       " has a pixel outside [0,1]: " + std::to_string(v));
        }
      }
      out.emplace_back(s, std::move(p.values));
    }
    return out;
  }

  std::vector<ProbabilityVector> classify(std::span<const ImageTensor> images) {
    if (images.empty()) return {};
    check_batch(images.size());
    json request_images = json::array();
    const auto& s = info_.image_shape;
    const std::size_t shape[] = {s.height, s.width, s.channels};
    for (std::size_t i = 0; i < images.size(); ++i) {
      if (!(images[i].shape() == s)) {
        throw DimensionError("image " + std::to_string(i) + " has shape " +
                             to_string(images[i].shape()) + ", backend expects " + to_string(s));
      }
      request_images.push_back(to_payload(shape, images[i].data()));
    }
    const json response = call("classify", {{"images", std::move(request_images)}});
    const auto& probs = field_array(response, "probs", images.size());
    std::vector<ProbabilityVector> out;
    out.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
      Payload p = from_payload(probs[i]);
      if (p.values.size() != info_.num_labels) {
        throw ContractViolationError("probability vector " + std::to_string(i) + " has " +
                                     std::to_string(p.values.size()) + " entries, expected K=" +
                                     std::to_string(info_.num_labels));
      }
      out.push_back(renormalize(p.values, i));
    }
    return out;
  }

  /// Accepts sums within 1e-4 of one and renormalizes locally.
  static ProbabilityVector renormalize(std::span<const float> raw, std::size_t index = 0) {
    std::vector<double> probs(raw.begin(), raw.end());
    double sum = 0.0;
    for (double p : probs) {
      if (!std::isfinite(p) || p < 0.0) {
        throw ContractViolationError("probability vector " + std::to_string(index) +
                                     " has a negative or non-finite entry");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kBoundarySumTolerance) {
      throw ContractViolationError("probability vector " + std::to_string(index) + " sums to " +
                                   std::to_string(sum));
    }
    return ProbabilityVector::normalized(std::move(probs));
  }

 private:
  BackendConnection(std::unique_ptr<Transport> transport, ConnectionOptions options)
      : transport_(std::move(transport)), options_(options) {}

  void hello() {
    const json r = call("hello", json::object());
    if (!r.contains("protocol_version") || !r["protocol_version"].is_string()) {
      throw ProtocolError("hello response lacks protocol_version", 0);
    }
    info_.protocol_version = r["protocol_version"].get<std::string>();
    if (info_.protocol_version != kProtocolVersion) {
      throw IncompatibleBackendError("backend speaks '" + info_.protocol_version +
                                     "', expected '" + std::string(kProtocolVersion) + "'");
    }
    try {
      info_.latent_length = r.at("latent_length").get<std::size_t>();
      const auto shape = r.at("image_shape").get<std::vector<std::size_t>>();
      if (shape.size() != 3) throw IncompatibleBackendError("image_shape must have 3 entries");
      info_.image_shape = {shape[0], shape[1], shape[2]};
      info_.num_labels = r.at("num_labels").get<std::size_t>();
      for (const auto& c : r.at("capabilities")) info_.capabilities.insert(c.get<std::string>());
    } catch (const json::exception& e) {
      throw IncompatibleBackendError(std::string("malformed hello response: ") + e.what());
    }
    if (info_.latent_length == 0 || !info_.image_shape.valid() || info_.num_labels == 0) {
      throw IncompatibleBackendError("backend advertised a non-positive shape");
    }
  }

  void check_batch(std::size_t size) const {
    if (size > options_.batch_cap) {
      throw InvalidInputError("batch of " + std::to_string(size) + " exceeds the cap of " +
                              std::to_string(options_.batch_cap));
    }
  }

  json call(std::string_view op, json body) {
    std::lock_guard lock(mutex_);
    if (op != "hello" && !info_.can(op)) {
      throw IncompatibleBackendError("backend does not advertise '" + std::string(op) + "'");
    }
    const std::uint64_t id = next_id_++;
    json request = {{"id", id}, {"op", op}};
    request.update(body);
    transport_->write_line(request.dump());
    const std::string line = transport_->read_line(options_.timeout);
    json response;
    try {
      response = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ProtocolError("malformed backend message: " + std::string(e.what()), e.byte);
    }
    if (!response.is_object()) throw ProtocolError("backend message is not an object", 0);
    if (!response.contains("id") || !response["id"].is_number_unsigned() ||
        response["id"].get<std::uint64_t>() != id) {
      throw ProtocolError("response id does not match request id " + std::to_string(id), 0);
    }
    if (response.contains("error")) {
      const auto& err = response["error"];
      std::string code = "unknown";
      std::string message;
      if (err.is_object()) {
        if (err.contains("code") && err["code"].is_string()) code = err["code"].get<std::string>();
        if (err.contains("message") && err["message"].is_string()) {
          message = err["message"].get<std::string>();
        }
      }
      throw RemoteModelError(code, message);
    }
    return response;
  }

  static const json& field_array(const json& response, const char* name, std::size_t expected) {
    if (!response.contains(name) || !response[name].is_array()) {
      throw ProtocolError(std::string("response lacks array '") + name + "'", 0);
    }
    const auto& arr = response[name];
    if (arr.size() != expected) {
      throw ContractViolationError(std::string("response '") + name + "' has " +
                                   std::to_string(arr.size()) + " entries for a batch of " +
                                   std::to_string(expected));
    }
    return arr;
  }

  std::unique_ptr<Transport> transport_;
  ConnectionOptions options_;
  BackendInfo info_;
  std::uint64_t next_id_ = 0;
  std::mutex mutex_;
};

class BackendGenerator final : public GeneratorModel {
 public:
  explicit BackendGenerator(std::shared_ptr<BackendConnection> conn) : conn_(std::move(conn)) {}
  std::size_t latent_length() const override { return conn_->info().latent_length; }
  ImageShape image_shape() const override { return conn_->info().image_shape; }
  std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                    std::span<const ConditionLabel> conditions) override {
    return conn_->generate(latents, conditions);
  }

 private:
  std::shared_ptr<BackendConnection> conn_;
};

class BackendClassifier final : public ClassifierModel {
 public:
  explicit BackendClassifier(std::shared_ptr<BackendConnection> conn) : conn_(std::move(conn)) {}
  std::size_t num_labels() const override { return conn_->info().num_labels; }
  ImageShape image_shape() const override { return conn_->info().image_shape; }
  std::vector<ProbabilityVector> classify(std::span<const ImageTensor> images) override {
    return conn_->classify(images);
  }

 private:
  std::shared_ptr<BackendConnection> conn_;
};

}  // namespace evoseed::backend

#endif  // EVOSEED_BACKEND_HPP_
