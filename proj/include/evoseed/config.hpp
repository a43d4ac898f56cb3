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

// Campaign configuration: one JSON object, strict keys.
//
//   {
//     "generator":  {"builtin": {<world params>}}
//                 | {"backend": {"command": ["prog", "arg"...]} | {"tcp": "host:port"}},
//     "classifier": {"name": "...", "builtin": {"jitter": 0, "seed": 0, "temperature": T}}
//                 | {"name": "...", "backend": {...}},
//     "search": {"epsilon": 0.3, "tau": 100, "lambda": 0, "sigma0": 1.0,
//                "rng_seed": 0, "algorithm": "evoseed"},
//     "pair_count": 100,
//     "output_dir": ".",
//     "parallelism": 1
//   }
//
// Only "generator", "classifier" and "search.epsilon" are required. A
// builtin classifier reads the generator's world, so it needs a builtin
// generator.

#ifndef EVOSEED_CONFIG_HPP_
#define EVOSEED_CONFIG_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <unistd.h>

#include "evoseed/backend.hpp"
#include "evoseed/errors.hpp"
#include "evoseed/models.hpp"
#include "evoseed/search.hpp"
#include "evoseed/synthetic.hpp"
#include "json.hpp"

namespace evoseed::campaign {

using json = nlohmann::json;

struct BackendSpec {
  std::vector<std::string> command;
  std::string tcp;

  backend::Endpoint endpoint() const {
    return tcp.empty() ? backend::Endpoint::command_line(command)
                       : backend::Endpoint::parse_tcp(tcp);
  }
  friend bool operator==(const BackendSpec&, const BackendSpec&) = default;
};

struct BuiltinClassifierSpec {
  double jitter = 0.0;
  std::uint64_t seed = 0;
  /// Empty: the world's temperature.
  std::optional<double> temperature;
  friend bool operator==(const BuiltinClassifierSpec&, const BuiltinClassifierSpec&) = default;
};

struct GeneratorSpec {
  std::variant<synthetic::WorldParams, BackendSpec> source;
  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

struct ClassifierSpec {
  std::string name;
  std::variant<BuiltinClassifierSpec, BackendSpec> source;
  friend bool operator==(const ClassifierSpec&, const ClassifierSpec&) = default;
};

struct CampaignConfig {
  GeneratorSpec generator;
  ClassifierSpec classifier;
  SearchConfig search;
  std::size_t pair_count = 100;
  std::filesystem::path output_dir = ".";
  std::size_t parallelism = 1;
};

namespace detail {

inline std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Strict view of one JSON object: every key must be consumed or listed.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::initializer_list<std::string_view> allowed)
      : j_(j), path_(std::move(path)), allowed_(allowed.begin(), allowed.end()) {
    if (!j_.is_object()) throw ConfigError(label() + " must be an object");
    for (const auto& [key, value] : j_.items()) {
      if (allowed_.contains(key)) continue;
      std::string message = "unknown key " + join(key);
      std::string best;
      std::size_t best_distance = std::numeric_limits<std::size_t>::max();
      for (const auto& candidate : allowed_) {
        const auto d = edit_distance(key, candidate);
        if (d < best_distance) {
          best_distance = d;
          best = candidate;
        }
      }
      if (best_distance <= 2) message += " (did you mean \"" + best + "\"?)";
      throw ConfigError(message);
    }
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  const json& at(const std::string& key) const {
    if (!j_.contains(key)) throw ConfigError("missing key " + join(key));
    return j_.at(key);
  }
  std::string join(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  double number(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_number()) throw ConfigError(join(key) + " must be a number");
    return v.get<double>();
  }
  double number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
  }
  std::uint64_t unsigned_int(const std::string& key) const {
    const auto& v = at(key);
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
    if (!ok) throw ConfigError(join(key) + " must be a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  std::uint64_t unsigned_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? unsigned_int(key) : fallback;
  }
  std::string text(const std::string& key) const {
    const auto& v = at(key);
    if (!v.is_string()) throw ConfigError(join(key) + " must be a string");
    return v.get<std::string>();
  }

 private:
  std::string label() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string, std::less<>> allowed_;
};

inline synthetic::WorldParams parse_world(const json& j, const std::string& path) {
  ObjectReader r(j, path,
                 {"seed", "latent_length", "height", "width", "channels", "num_labels", "gain",
                  "temperature", "separation", "background_spread"});
  synthetic::WorldParams p;
  p.seed = r.unsigned_or("seed", p.seed);
  p.latent_length = r.unsigned_or("latent_length", p.latent_length);
  p.height = r.unsigned_or("height", p.height);
  p.width = r.unsigned_or("width", p.width);
  p.channels = r.unsigned_or("channels", p.channels);
  p.num_labels = r.unsigned_or("num_labels", p.num_labels);
  p.gain = r.number_or("gain", p.gain);
  p.temperature = r.number_or("temperature", p.temperature);
  p.separation = r.number_or("separation", p.separation);
  p.background_spread = r.number_or("background_spread", p.background_spread);
  try {
    synthetic::validate(p);
  } catch (const Error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return p;
}

/// True when `program` names an executable file, directly or via PATH.
inline bool resolvable(const std::string& program) {
  if (program.find('/') != std::string::npos) return ::access(program.c_str(), X_OK) == 0;
  const char* env = std::getenv("PATH");
  std::istringstream dirs(env ? env : "");
  for (std::string dir; std::getline(dirs, dir, ':');) {
    const auto candidate = (dir.empty() ? std::string(".") : dir) + "/" + program;
    if (::access(candidate.c_str(), X_OK) == 0) return true;
  }
  return false;
}

inline BackendSpec parse_backend(const json& j, const std::string& path) {
  ObjectReader r(j, path, {"command", "tcp"});
  BackendSpec spec;
  if (r.has("command") == r.has("tcp")) {
    throw ConfigError(path + " needs exactly one of \"command\" or \"tcp\"");
  }
  if (r.has("command")) {
    const auto& cmd = r.at("command");
    if (cmd.is_string()) {
      std::istringstream words(cmd.get<std::string>());
      for (std::string w; words >> w;) spec.command.push_back(w);
    } else if (cmd.is_array()) {
      for (const auto& w : cmd) {
        if (!w.is_string()) throw ConfigError(path + ".command entries must be strings");
        spec.command.push_back(w.get<std::string>());
      }
    } else {
      throw ConfigError(path + ".command must be a string or an array of strings");
    }
    if (spec.command.empty()) throw ConfigError(path + ".command is empty");
    if (!resolvable(spec.command.front())) {
      throw ConfigError(path + ".command: cannot find executable '" + spec.command.front() + "'");
    }
  } else {
    spec.tcp = r.text("tcp");
    (void)backend::Endpoint::parse_tcp(spec.tcp);
  }
  return spec;
}

}  // namespace detail

inline SearchConfig parse_search(const json& j, const std::string& path = "search") {
  detail::ObjectReader r(j, path, {"epsilon", "tau", "lambda", "sigma0", "rng_seed", "algorithm"});
  SearchConfig s;
  s.epsilon = r.number("epsilon");
  if (!(s.epsilon >= 0.0)) throw ConfigError(path + ".epsilon must be ≥ 0");
  s.tau = r.unsigned_or("tau", s.tau);
  s.lambda = r.unsigned_or("lambda", s.lambda);
  s.sigma0 = r.number_or("sigma0", s.sigma0);
  s.rng_seed = r.unsigned_or("rng_seed", s.rng_seed);
  if (r.has("algorithm")) s.algorithm = parse_algorithm(r.text("algorithm"));
  s.validate();
  return s;
}

inline json search_to_json(const SearchConfig& s) {
  return {{"epsilon", s.epsilon}, {"tau", s.tau},           {"lambda", s.lambda},
          {"sigma0", s.sigma0},   {"rng_seed", s.rng_seed}, {"algorithm", to_string(s.algorithm)}};
}

inline json world_to_json(const synthetic::WorldParams& p) {
  return {{"seed", p.seed},
          {"latent_length", p.latent_length},
          {"height", p.height},
          {"width", p.width},
          {"channels", p.channels},
          {"num_labels", p.num_labels},
          {"gain", p.gain},
          {"temperature", p.temperature},
          {"separation", p.separation},
          {"background_spread", p.background_spread}};
}

inline json backend_to_json(const BackendSpec& b) {
  return b.tcp.empty() ? json{{"command", b.command}} : json{{"tcp", b.tcp}};
}

inline GeneratorSpec parse_generator(const json& j, const std::string& path = "generator") {
  detail::ObjectReader r(j, path, {"builtin", "backend"});
  if (r.has("builtin") == r.has("backend")) {
    throw ConfigError(path + " needs exactly one of \"builtin\" or \"backend\"");
  }
  if (r.has("builtin")) return {detail::parse_world(r.at("builtin"), r.join("builtin"))};
  return {detail::parse_backend(r.at("backend"), r.join("backend"))};
}

inline ClassifierSpec parse_classifier(const json& j, const std::string& path = "classifier") {
  detail::ObjectReader r(j, path, {"name", "builtin", "backend"});
  if (r.has("builtin") == r.has("backend")) {
    throw ConfigError(path + " needs exactly one of \"builtin\" or \"backend\"");
  }
  ClassifierSpec spec;
  if (r.has("builtin")) {
    detail::ObjectReader b(r.at("builtin"), r.join("builtin"), {"jitter", "seed", "temperature"});
    BuiltinClassifierSpec builtin;
    builtin.jitter = b.number_or("jitter", 0.0);
    builtin.seed = b.unsigned_or("seed", 0);
    if (b.has("temperature")) builtin.temperature = b.number("temperature");
    if (!(builtin.jitter >= 0.0)) throw ConfigError(b.join("jitter") + " must be ≥ 0");
    if (builtin.temperature && !(*builtin.temperature > 0.0)) {
      throw ConfigError(b.join("temperature") + " must be > 0");
    }
    spec.source = builtin;
    spec.name = "builtin";
  } else {
    spec.source = detail::parse_backend(r.at("backend"), r.join("backend"));
    spec.name = "backend";
  }
  if (r.has("name")) spec.name = r.text("name");
  return spec;
}

inline json generator_to_json(const GeneratorSpec& g) {
  if (const auto* w = std::get_if<synthetic::WorldParams>(&g.source)) {
    return {{"builtin", world_to_json(*w)}};
  }
  return {{"backend", backend_to_json(std::get<BackendSpec>(g.source))}};
}

inline json classifier_to_json(const ClassifierSpec& c) {
  json out = {{"name", c.name}};
  if (const auto* b = std::get_if<BuiltinClassifierSpec>(&c.source)) {
    json builtin = {{"jitter", b->jitter}, {"seed", b->seed}};
    if (b->temperature) builtin["temperature"] = *b->temperature;
    out["builtin"] = builtin;
  } else {
    out["backend"] = backend_to_json(std::get<BackendSpec>(c.source));
  }
  return out;
}

inline CampaignConfig parse_config_json(const json& j) {
  detail::ObjectReader r(j, "", {"generator", "classifier", "search", "pair_count", "output_dir",
                                 "parallelism"});
  CampaignConfig c;
  c.generator = parse_generator(r.at("generator"));
  c.classifier = parse_classifier(r.at("classifier"));
  c.search = parse_search(r.at("search"));
  c.pair_count = r.unsigned_or("pair_count", c.pair_count);
  if (r.has("output_dir")) c.output_dir = r.text("output_dir");
  c.parallelism = r.unsigned_or("parallelism", c.parallelism);
  if (c.parallelism < 1) throw ConfigError("parallelism must be ≥ 1");
  if (std::holds_alternative<BuiltinClassifierSpec>(c.classifier.source) &&
      !std::holds_alternative<synthetic::WorldParams>(c.generator.source)) {
    throw ConfigError("classifier.builtin requires generator.builtin (it classifies against the "
                      "generator's prototypes)");
  }
  return c;
}

inline CampaignConfig parse_config_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config_json(j);
}

inline CampaignConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str());
}

inline json config_to_json(const CampaignConfig& c) {
  return {{"generator", generator_to_json(c.generator)},
          {"classifier", classifier_to_json(c.classifier)},
          {"search", search_to_json(c.search)},
          {"pair_count", c.pair_count},
          {"output_dir", c.output_dir.string()},
          {"parallelism", c.parallelism}};
}

/// Live models built from a config.
struct ModelSet {
  std::shared_ptr<const synthetic::PrototypeWorld> world;
  std::shared_ptr<GeneratorModel> generator;
  std::shared_ptr<ClassifierModel> classifier;
};

inline std::shared_ptr<ClassifierModel> build_classifier(
    const ClassifierSpec& spec, const std::shared_ptr<const synthetic::PrototypeWorld>& world,
    backend::ConnectionOptions options) {
  if (const auto* b = std::get_if<BuiltinClassifierSpec>(&spec.source)) {
    if (!world) throw ConfigError("builtin classifier needs a builtin generator world");
    if (b->jitter == 0.0 && !b->temperature) {
      return std::make_shared<synthetic::PrototypeClassifier>(world);
    }
    return std::make_shared<synthetic::PrototypeClassifier>(
        world, b->seed, b->jitter, b->temperature.value_or(world->params().temperature));
  }
  auto conn = backend::BackendConnection::handshake(std::get<BackendSpec>(spec.source).endpoint(),
                                                    options);
  return std::make_shared<backend::BackendClassifier>(std::move(conn));
}

/// Builds (and for backends, connects to) the configured models. A backend
/// generator and classifier with the same endpoint share one connection.
inline ModelSet build_models(const GeneratorSpec& gen, const ClassifierSpec& cls,
                             backend::ConnectionOptions options = {}) {
  ModelSet m;
  std::shared_ptr<backend::BackendConnection> gen_conn;
  if (const auto* w = std::get_if<synthetic::WorldParams>(&gen.source)) {
    m.world = std::make_shared<const synthetic::PrototypeWorld>(*w);
    m.generator = std::make_shared<synthetic::SyntheticGenerator>(m.world);
  } else {
    gen_conn = backend::BackendConnection::handshake(std::get<BackendSpec>(gen.source).endpoint(),
                                                     options);
    m.generator = std::make_shared<backend::BackendGenerator>(gen_conn);
  }
  const auto* cls_backend = std::get_if<BackendSpec>(&cls.source);
  const auto* gen_backend = std::get_if<BackendSpec>(&gen.source);
  if (cls_backend && gen_backend && *cls_backend == *gen_backend) {
    m.classifier = std::make_shared<backend::BackendClassifier>(gen_conn);
  } else {
    m.classifier = build_classifier(cls, m.world, options);
  }
  if (!(m.generator->image_shape() == m.classifier->image_shape())) {
    throw IncompatibleModelsError("generator produces " + to_string(m.generator->image_shape()) +
                                  " images, classifier expects " +
                                  to_string(m.classifier->image_shape()));
  }
  return m;
}

inline ModelSet build_models(const CampaignConfig& c, backend::ConnectionOptions options = {}) {
  return build_models(c.generator, c.classifier, options);
}

}  // namespace evoseed::campaign

#endif  // EVOSEED_CONFIG_HPP_
