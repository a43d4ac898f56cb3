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

// Scriptable protocol server for the client tests.
//
//   test_backend [--mode M] [--tcp PORT_FILE] [--n N] [--shape H W C] [--k K]
//
// Modes:
//   echo        generate: pixel 0 = batch index / 1024, rest 0
//               classify: one-hot at (batch index mod K)
//   world       serves the default builtin world
//   version2    hello answers "evoseed/2"
//   garbage     answers every request after hello with a broken line
//   sum=S       classify answers a vector summing to S
//   error=CODE  answers every request after hello with an error
//   badpixel    generate answers a pixel of 1.5
//   silent      never answers after hello
//   wrongid     answers with a mismatched id after hello
//
// With --tcp the server listens on an ephemeral port, writes the port number
// to PORT_FILE and serves one connection.

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evoseed/backend.hpp"
#include "evoseed/codec.hpp"
#include "evoseed/synthetic.hpp"
#include "json.hpp"

namespace {

using json = nlohmann::json;
using evoseed::backend::from_payload;
using evoseed::backend::to_payload;

struct Settings {
  std::string mode = "echo";
  std::size_t n = 4;
  std::size_t h = 2, w = 2, c = 1;
  std::size_t k = 3;
};

class Server {
 public:
  explicit Server(Settings s) : s_(std::move(s)) {
    if (s_.mode == "world") {
      world_ = std::make_shared<const evoseed::synthetic::PrototypeWorld>(
          evoseed::synthetic::WorldParams{});
      s_.n = world_->latent_length();
      s_.h = world_->image_shape().height;
      s_.w = world_->image_shape().width;
      s_.c = world_->image_shape().channels;
      s_.k = world_->num_labels();
    }
  }

  /// Returns the reply line, or nothing to stay silent.
  std::optional<std::string> handle(const std::string& line) {
    json req = json::parse(line);
    const auto id = req.at("id");
    const std::string op = req.at("op").get<std::string>();
    if (op == "hello") {
      return json{{"id", id},
                  {"protocol_version", s_.mode == "version2" ? "evoseed/2" : "evoseed/1"},
                  {"latent_length", s_.n},
                  {"image_shape", {s_.h, s_.w, s_.c}},
                  {"num_labels", s_.k},
                  {"capabilities", {"generate", "classify"}}}
          .dump();
    }
    if (s_.mode == "silent") return std::nullopt;
    if (s_.mode == "garbage") return std::string("{\"id\": 1, oops");
    if (s_.mode == "wrongid") return json{{"id", id.get<std::uint64_t>() + 7}, {"probs", json::array()}}.dump();
    if (s_.mode.rfind("error=", 0) == 0) {
      return json{{"id", id}, {"error", {{"code", s_.mode.substr(6)}, {"message", "scripted"}}}}
          .dump();
    }
    if (op == "generate") return json{{"id", id}, {"images", generate(req)}}.dump();
    if (op == "classify") return json{{"id", id}, {"probs", classify(req)}}.dump();
    return json{{"id", id}, {"error", {{"code", "unsupported_op"}, {"message", op}}}}.dump();
  }

 private:
  json generate(const json& req) {
    json images = json::array();
    const auto& latents = req.at("latents");
    const std::size_t shape[] = {s_.h, s_.w, s_.c};
    for (std::size_t i = 0; i < latents.size(); ++i) {
      auto p = from_payload(latents[i]);
      std::vector<float> pixels(s_.h * s_.w * s_.c, 0.0f);
      if (world_) {
        const evoseed::LatentVector z(std::move(p.values));
        const evoseed::ConditionLabel cond{req.at("conditions")[i].get<std::size_t>(), {}};
        const auto x = world_->generate(z, cond);
        pixels.assign(x.data().begin(), x.data().end());
      } else {
        pixels[0] = static_cast<float>(i) / 1024.0f;
        if (s_.mode == "badpixel") pixels[0] = 1.5f;
      }
      images.push_back(to_payload(shape, pixels));
    }
    return images;
  }

  json classify(const json& req) {
    json probs = json::array();
    const auto& images = req.at("images");
    const std::size_t shape[] = {s_.k};
    for (std::size_t i = 0; i < images.size(); ++i) {
      auto p = from_payload(images[i]);
      std::vector<float> out(s_.k, 0.0f);
      if (world_) {
        const evoseed::ImageTensor x({s_.h, s_.w, s_.c}, std::move(p.values));
        const auto pv = world_->classify(x);
        for (std::size_t j = 0; j < s_.k; ++j) out[j] = static_cast<float>(pv[j]);
      } else if (s_.mode.rfind("sum=", 0) == 0) {
        const float total = std::strtof(s_.mode.c_str() + 4, nullptr);
        out[0] = total;
      } else {
        out[i % s_.k] = 1.0f;
      }
      probs.push_back(to_payload(shape, out));
    }
    return probs;
  }

  Settings s_;
  std::shared_ptr<const evoseed::synthetic::PrototypeWorld> world_;
};

void serve_fd(Server& server, int in_fd, int out_fd) {
  std::string buffer;
  char chunk[65536];
  for (;;) {
    const ssize_t got = ::read(in_fd, chunk, sizeof chunk);
    if (got <= 0) return;
    buffer.append(chunk, static_cast<std::size_t>(got));
    for (auto nl = buffer.find('\n'); nl != std::string::npos; nl = buffer.find('\n')) {
      const std::string line = buffer.substr(0, nl);
      buffer.erase(0, nl + 1);
      if (auto reply = server.handle(line)) {
        std::string framed = *reply + "\n";
        std::size_t off = 0;
        while (off < framed.size()) {
          const ssize_t put = ::write(out_fd, framed.data() + off, framed.size() - off);
          if (put <= 0) return;
          off += static_cast<std::size_t>(put);
        }
      }
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  Settings s;
  std::string port_file;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--mode" && i + 1 < argc) {
      s.mode = argv[++i];
    } else if (a == "--tcp" && i + 1 < argc) {
      port_file = argv[++i];
    } else if (a == "--n" && i + 1 < argc) {
      s.n = std::stoul(argv[++i]);
    } else if (a == "--k" && i + 1 < argc) {
      s.k = std::stoul(argv[++i]);
    } else if (a == "--shape" && i + 3 < argc) {
      s.h = std::stoul(argv[++i]);
      s.w = std::stoul(argv[++i]);
      s.c = std::stoul(argv[++i]);
    } else {
      std::cerr << "unknown argument " << a << '\n';
      return 2;
    }
  }
  Server server(s);
  if (port_file.empty()) {
    serve_fd(server, STDIN_FILENO, STDOUT_FILENO);
    return 0;
  }
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listener, 1) != 0) {
    std::perror("listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
  {
    std::ofstream tmp(port_file + ".tmp");
    tmp << ntohs(addr.sin_port) << '\n';
  }
  std::rename((port_file + ".tmp").c_str(), port_file.c_str());
  const int conn = ::accept(listener, nullptr, nullptr);
  if (conn < 0) return 1;
  serve_fd(server, conn, conn);
  ::close(conn);
  ::close(listener);
  return 0;
}
