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

// evoseed command line.
//
//   evoseed pairs    --config C --out F
//   evoseed attack   --config C --pairs F [--algorithm A] [--epsilon E] --out F
//   evoseed eval     --results F... --mode summary|transfer|trace [--out F]
//   evoseed selftest [--results F...]
//
// Exit codes: 0 success, 1 runtime failure, 2 config or usage error.

#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evoseed/backend.hpp"
#include "evoseed/campaign.hpp"
#include "evoseed/config.hpp"
#include "evoseed/errors.hpp"
#include "evoseed/selftest.hpp"

namespace {

namespace ec = evoseed::campaign;
namespace fs = std::filesystem;

evoseed::backend::ConnectionOptions connection_options() {
  evoseed::backend::ConnectionOptions o;
  o.timeout = evoseed::backend::timeout_from_env();
  return o;
}

void print_nested(const std::exception& e, int depth = 0) {
  std::cerr << (depth == 0 ? "error: " : "  caused by: ") << e.what() << '\n';
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    print_nested(inner, depth + 1);
  }
}

bool is_usage_error(const std::exception& e) {
  if (dynamic_cast<const evoseed::ConfigError*>(&e) || dynamic_cast<const evoseed::UsageError*>(&e)) {
    return true;
  }
  try {
    std::rethrow_if_nested(e);
  } catch (const std::exception& inner) {
    return is_usage_error(inner);
  }
  return false;
}

int cmd_pairs(const fs::path& config_path, const fs::path& out) {
  const auto config = ec::parse_config(config_path);
  auto models = ec::build_models(config, connection_options());
  const auto batch = ec::make_pairs(config, models);
  ec::write_pairs(out, batch.pairs);
  nlohmann::json stats = {{"pairs", batch.pairs.size()},
                          {"attempts", batch.attempts},
                          {"acceptance_rate", batch.acceptance_rate}};
  std::cout << stats.dump() << '\n';
  if (batch.pairs.size() < config.pair_count) {
    std::cerr << "warning: only " << batch.pairs.size() << " of " << config.pair_count
              << " pairs accepted within " << batch.attempts << " attempts\n";
  }
  return 0;
}

int cmd_attack(const fs::path& config_path, const fs::path& pairs_path,
               const std::optional<std::string>& algorithm, const std::optional<double>& epsilon,
               const fs::path& out) {
  auto config = ec::parse_config(config_path);
  if (algorithm) config.search.algorithm = evoseed::parse_algorithm(*algorithm);
  if (epsilon) {
    if (!(*epsilon >= 0.0)) throw evoseed::ConfigError("--epsilon must be ≥ 0");
    config.search.epsilon = *epsilon;
  }
  config.search.validate();
  const auto pairs = ec::read_pairs(pairs_path);
  auto models = ec::build_models(config, connection_options());
  const auto report = ec::run_attacks(config, models, pairs, out, &std::cerr);
  if (report.resumed > 0) {
    std::cerr << "resumed: " << report.resumed << " records already present\n";
  }
  auto summary = ec::summary_to_json(report.summary);
  summary["algorithm"] = evoseed::to_string(config.search.algorithm);
  summary["epsilon"] = config.search.epsilon;
  std::cout << summary.dump() << '\n';
  return 0;
}

int cmd_eval(const std::vector<std::string>& results, const std::string& mode,
             const std::optional<fs::path>& out) {
  std::vector<fs::path> paths(results.begin(), results.end());
  const auto report_mode = ec::parse_report_mode(mode);
  if (out) {
    std::ofstream file(*out, std::ios::trunc);
    if (!file) throw evoseed::Error("cannot write " + out->string());
    ec::emit_report(paths, report_mode, file, connection_options());
  } else {
    ec::emit_report(paths, report_mode, std::cout, connection_options());
  }
  return 0;
}

int cmd_selftest(const std::vector<std::string>& results) {
  evoseed::selftest::Options options;
  options.results.assign(results.begin(), results.end());
  const auto report = evoseed::selftest::run(options);
  for (const auto& c : report.checks) {
    std::printf("%s  %-55s %s (%.2fs)\n", c.passed ? "PASS" : "FAIL", c.name.c_str(),
                c.detail.c_str(), c.seconds);
  }
  return report.passed() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Black-box seed search for adversarial generated images"};
  app.require_subcommand(1);

  std::string config_path, out_path, pairs_path, mode;
  std::optional<std::string> algorithm;
  std::optional<double> epsilon;
  std::optional<std::string> eval_out;
  std::vector<std::string> results;

  auto* pairs = app.add_subcommand("pairs", "Generate pre-filtered (seed, condition) pairs");
  pairs->add_option("--config", config_path, "Campaign config")->required();
  pairs->add_option("--out", out_path, "Pairs JSONL output")->required();

  auto* attack = app.add_subcommand("attack", "Attack every pair (resumes an existing --out)");
  attack->add_option("--config", config_path, "Campaign config")->required();
  attack->add_option("--pairs", pairs_path, "Pairs JSONL")->required();
  attack->add_option("--algorithm", algorithm, "evoseed or randseed (overrides config)")
      ->check(CLI::IsMember({"evoseed", "randseed"}));
  attack->add_option("--epsilon", epsilon, "Box radius (overrides config)");
  attack->add_option("--out", out_path, "Results JSONL")->required();

  auto* eval = app.add_subcommand("eval", "Emit a CSV report from results files");
  eval->add_option("--results", results, "Results JSONL files")->required();
  eval->add_option("--mode", mode, "summary, transfer or trace")
      ->required()
      ->check(CLI::IsMember({"summary", "transfer", "trace"}));
  eval->add_option("--out", eval_out, "CSV output (stdout when omitted)");

  auto* self = app.add_subcommand("selftest", "Optimizer and constraint self-checks");
  self->add_option("--results", results, "Results files to audit against their epsilon");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*pairs) return cmd_pairs(config_path, out_path);
    if (*attack) return cmd_attack(config_path, pairs_path, algorithm, epsilon, out_path);
    if (*eval) {
      std::optional<fs::path> out;
      if (eval_out) out = *eval_out;
      return cmd_eval(results, mode, out);
    }
    if (*self) return cmd_selftest(results);
  } catch (const std::exception& e) {
    print_nested(e);
    return is_usage_error(e) ? 2 : 1;
  }
  return 2;
}
