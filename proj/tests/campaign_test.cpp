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

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "evoseed/campaign.hpp"
#include "evoseed/config.hpp"
#include "evoseed/metrics.hpp"
#include "evoseed/tensor_io.hpp"
#include "json.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
namespace ec = evoseed::campaign;
using evoseed::ConfigError;
using nlohmann::json;

json base_config(double epsilon, std::size_t pairs = 20) {
  return {{"generator", {{"builtin", json::object()}}},
          {"classifier", {{"builtin", json::object()}}},
          {"search", {{"epsilon", epsilon}, {"rng_seed", 11}}},
          {"pair_count", pairs}};
}

std::string config_error(const json& j) {
  try {
    ec::parse_config_json(j);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::vector<std::string> csv_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  return lines;
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) out.push_back(f);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

TEST(Config, MinimalParsesWithDefaults) {
  const auto c = ec::parse_config_json(base_config(0.3));
  EXPECT_EQ(c.search.epsilon, 0.3);
  EXPECT_EQ(c.search.tau, 100u);
  EXPECT_EQ(c.search.lambda, 0u);
  EXPECT_EQ(c.search.population_size(16), 12u);
  EXPECT_EQ(c.search.sigma0, 1.0);
  EXPECT_EQ(c.classifier.name, "builtin");
  EXPECT_EQ(c.parallelism, 1u);
  // Round trip through JSON is lossless.
  const auto again = ec::parse_config_json(ec::config_to_json(c));
  EXPECT_EQ(ec::config_to_json(again), ec::config_to_json(c));
}

TEST(Config, NegativeEpsilonNamesTheField) {
  const auto message = config_error(base_config(-0.1));
  EXPECT_NE(message.find("search.epsilon"), std::string::npos) << message;
}

TEST(Config, MisspelledKeySuggestsFix) {
  auto j = base_config(0.3);
  j["search"].erase("epsilon");
  j["search"]["epslion"] = 0.3;
  const auto message = config_error(j);
  EXPECT_NE(message.find("search.epslion"), std::string::npos) << message;
  EXPECT_NE(message.find("did you mean \"epsilon\""), std::string::npos) << message;
}

TEST(Config, MissingKeyReportsPath) {
  auto j = base_config(0.3);
  j["search"].erase("epsilon");
  EXPECT_NE(config_error(j).find("missing key search.epsilon"), std::string::npos);
  auto k = base_config(0.3);
  k.erase("classifier");
  EXPECT_NE(config_error(k).find("missing key classifier"), std::string::npos);
}

TEST(Config, StructuralErrors) {
  auto j = base_config(0.3);
  j["generator"] = {{"builtin", json::object()}, {"backend", {{"tcp", "h:1"}}}};
  EXPECT_NE(config_error(j).find("exactly one"), std::string::npos);
  auto k = base_config(0.3);
  k["generator"] = {{"backend", {{"tcp", "localhost:9"}}}};
  EXPECT_NE(config_error(k).find("requires generator.builtin"), std::string::npos);
  auto m = base_config(0.3);
  m["generator"] = {{"backend", {{"command", "/no/such/backend --x"}}}};
  m["classifier"] = {{"backend", {{"tcp", "localhost:9"}}}};
  EXPECT_NE(config_error(m).find("cannot find executable"), std::string::npos);
  auto n = base_config(0.3);
  n["search"]["lambda"] = 1;
  EXPECT_NE(config_error(n).find("lambda"), std::string::npos);
  EXPECT_THROW(ec::parse_config_text("{not json"), ConfigError);
}

TEST(Config, BackendCommandResolvesOnPath) {
  auto j = base_config(0.3);
  j["generator"] = {{"backend", {{"command", {"sh", "-c", "true"}}}}};
  j["classifier"] = {{"name", "remote"}, {"backend", {{"tcp", "tcp://127.0.0.1:7"}}}};
  const auto c = ec::parse_config_json(j);
  EXPECT_EQ(c.classifier.name, "remote");
}

TEST(Pairs, JsonRoundTripAndDuplicates) {
  const auto dir = oracle::temp_dir("pairs");
  auto config = ec::parse_config_json(base_config(0.3, 5));
  auto models = ec::build_models(config);
  const auto batch = ec::make_pairs(config, models);
  ASSERT_EQ(batch.pairs.size(), 5u);
  ec::write_pairs(dir / "p.jsonl", batch.pairs);
  const auto back = ec::read_pairs(dir / "p.jsonl");
  ASSERT_EQ(back.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(back[i].pair_id, batch.pairs[i].pair_id);
    EXPECT_EQ(back[i].condition.index, batch.pairs[i].condition.index);
    EXPECT_TRUE(std::ranges::equal(back[i].seed.values(), batch.pairs[i].seed.values()));
  }
  std::vector<evoseed::AttackPair> dup = {batch.pairs[0], batch.pairs[0]};
  ec::write_pairs(dir / "dup.jsonl", dup);
  EXPECT_THROW(ec::read_pairs(dir / "dup.jsonl"), evoseed::FormatError);
  fs::remove_all(dir);
}

class CampaignTest : public ::testing::Test {
 protected:
  void SetUp() override { dir_ = oracle::temp_dir("campaign"); }
  void TearDown() override { fs::remove_all(dir_); }

  ec::CampaignConfig config(double epsilon, std::size_t pairs, const std::string& sub) {
    auto c = ec::parse_config_json(base_config(epsilon, pairs));
    c.output_dir = dir_ / sub;
    return c;
  }

  fs::path dir_;
};

TEST_F(CampaignTest, RecordsMatchPairsAndSummary) {
  const auto c = config(0.5, 20, "a");
  const auto result = ec::run_campaign(c);
  const auto file = ec::read_results(result.results_path);
  ASSERT_EQ(file.records.size(), 20u);
  EXPECT_FALSE(file.truncated_tail);
  const auto flags = std::make_unique<bool[]>(file.records.size());
  for (std::size_t i = 0; i < file.records.size(); ++i) flags[i] = file.records[i].success;
  const double asr = evoseed::metrics::attack_success_rate(
      std::span<const bool>(flags.get(), file.records.size()));
  EXPECT_EQ(result.attack.summary.asr, asr);
  const auto summary = json::parse(oracle::slurp(ec::summary_path(result.results_path)));
  EXPECT_EQ(summary.at("asr").get<double>(), asr);
  EXPECT_EQ(summary.at("pairs").get<std::size_t>(), 20u);

  // Field order is fixed.
  std::ifstream in(result.results_path);
  std::string first;
  std::getline(in, first);
  const auto j = nlohmann::ordered_json::parse(first);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  ASSERT_GE(keys.size(), 3u);
  EXPECT_EQ(keys[0], "pair_id");
  EXPECT_EQ(keys[1], "algorithm");
  EXPECT_EQ(keys[2], "epsilon");

  // Successful records point at readable artifacts that reproduce the flip.
  auto models = ec::build_models(c);
  for (const auto& r : file.records) {
    EXPECT_LE(r.max_candidate_linf, 0.5);
    if (!r.success) continue;
    ASSERT_TRUE(r.adversarial_seed_file && r.adversarial_image_file && r.ssim);
    const auto seed = evoseed::io::read_latent(result.results_path.parent_path() /
                                               *r.adversarial_seed_file);
    const evoseed::ConditionLabel cond{r.condition, {}};
    const auto image = models.generator->generate(std::span(&seed, 1), std::span(&cond, 1));
    const auto probs = models.classifier->classify(image);
    EXPECT_NE(evoseed::argmax_label(probs[0]), r.condition);
  }
}

TEST_F(CampaignTest, ByteIdenticalAcrossRunsAndParallelism) {
  auto a = config(0.3, 20, "a");
  auto b = config(0.3, 20, "b");
  auto p = config(0.3, 20, "p");
  p.parallelism = 8;
  const auto ra = ec::run_campaign(a);
  const auto rb = ec::run_campaign(b);
  const auto rp = ec::run_campaign(p);
  const auto text = oracle::slurp(ra.results_path);
  EXPECT_FALSE(text.empty());
  EXPECT_EQ(text, oracle::slurp(rb.results_path));
  EXPECT_EQ(text, oracle::slurp(rp.results_path));
  EXPECT_EQ(oracle::slurp(ra.pairs_path), oracle::slurp(rp.pairs_path));
}

TEST_F(CampaignTest, ResumeAfterTruncationMatchesCleanRun) {
  const auto clean = ec::run_campaign(config(0.3, 12, "clean"));
  const auto expected = oracle::slurp(clean.results_path);

  const auto c = config(0.3, 12, "cut");
  const auto first = ec::run_campaign(c);
  // Keep five whole lines plus half of the sixth.
  std::size_t pos = 0;
  for (int i = 0; i < 5; ++i) pos = expected.find('\n', pos) + 1;
  const auto half = pos + (expected.find('\n', pos) - pos) / 2;
  {
    std::ofstream out(first.results_path, std::ios::trunc | std::ios::binary);
    out << expected.substr(0, half);
  }
  const auto file = ec::read_results(first.results_path);
  EXPECT_TRUE(file.truncated_tail);
  EXPECT_EQ(file.records.size(), 5u);

  const auto resumed = ec::run_campaign(c);
  EXPECT_EQ(resumed.attack.resumed, 5u);
  EXPECT_EQ(resumed.attack.attacked, 7u);
  EXPECT_TRUE(resumed.attack.repaired_truncated_tail);
  EXPECT_EQ(oracle::slurp(resumed.results_path), expected);

  // A complete file resumes to a no-op.
  const auto again = ec::run_campaign(c);
  EXPECT_EQ(again.attack.attacked, 0u);
  EXPECT_EQ(oracle::slurp(again.results_path), expected);
}

TEST_F(CampaignTest, ResumeWithDifferentSettingsIsRejected) {
  auto c = config(0.3, 4, "m");
  ec::run_campaign(c);
  c.search.tau = 50;
  try {
    ec::run_campaign(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("search.tau"), std::string::npos) << e.what();
  }
}

TEST_F(CampaignTest, SummaryReportGroupsByAlgorithmAndEpsilon) {
  std::vector<fs::path> results;
  for (const auto& [algo, eps] : std::vector<std::pair<std::string, double>>{
           {"evoseed", 0.1}, {"evoseed", 0.3}, {"randseed", 0.3}}) {
    auto c = config(eps, 8, algo + std::to_string(eps));
    c.search.algorithm = evoseed::parse_algorithm(algo);
    results.push_back(ec::run_campaign(c).results_path);
  }
  std::ostringstream csv;
  ec::emit_report(results, ec::ReportMode::kSummary, csv);
  const auto lines = csv_lines(csv.str());
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_EQ(lines[0],
            "algorithm,epsilon,pairs,successes,asr,mean_generations_to_success,"
            "mean_evaluations,mean_ssim");
  EXPECT_EQ(split(lines[1])[0], "evoseed");
  EXPECT_EQ(split(lines[1])[1], "0.1");
  EXPECT_EQ(split(lines[2])[1], "0.3");
  EXPECT_EQ(split(lines[3])[0], "randseed");
  for (std::size_t i = 1; i < 4; ++i) {
    const auto f = split(lines[i]);
    EXPECT_EQ(f[2], "8");
    EXPECT_DOUBLE_EQ(std::stod(f[4]), std::stod(f[3]) / 8.0);
  }
}

TEST_F(CampaignTest, IncompatibleRunsListConflicts) {
  auto a = config(0.3, 3, "x");
  auto b = config(0.3, 3, "y");
  b.search.tau = 40;
  b.search.sigma0 = 0.5;
  const std::vector<fs::path> results = {ec::run_campaign(a).results_path,
                                         ec::run_campaign(b).results_path};
  std::ostringstream csv;
  try {
    ec::emit_report(results, ec::ReportMode::kSummary, csv);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string m = e.what();
    EXPECT_NE(m.find("search.tau"), std::string::npos) << m;
    EXPECT_NE(m.find("search.sigma0"), std::string::npos) << m;
  }
}

TEST_F(CampaignTest, TransferReportHasUnitDiagonal) {
  auto a = config(0.5, 15, "base");
  auto b = config(0.5, 15, "variant");
  b.classifier.name = "variant";
  b.classifier.source = ec::BuiltinClassifierSpec{0.05, 7, 2.0};
  const std::vector<fs::path> results = {ec::run_campaign(a).results_path,
                                         ec::run_campaign(b).results_path};
  std::ostringstream csv;
  ec::emit_report(results, ec::ReportMode::kTransfer, csv);
  const auto lines = csv_lines(csv.str());
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "source,builtin,variant");
  EXPECT_EQ(split(lines[1])[0], "builtin");
  EXPECT_EQ(std::stod(split(lines[1])[1]), 1.0);
  EXPECT_EQ(std::stod(split(lines[2])[2]), 1.0);
  const double off = std::stod(split(lines[1])[2]);
  EXPECT_GE(off, 0.0);
  EXPECT_LE(off, 1.0);
}

TEST_F(CampaignTest, TraceReportOfFailureIsMonotone) {
  const auto r = ec::run_campaign(config(0.0, 1, "t"));
  const auto file = ec::read_results(r.results_path);
  ASSERT_EQ(file.records.size(), 1u);
  ASSERT_FALSE(file.records[0].success);
  std::ostringstream csv;
  const std::vector<fs::path> results = {r.results_path};
  ec::emit_report(results, ec::ReportMode::kTrace, csv);
  const auto lines = csv_lines(csv.str());
  ASSERT_EQ(lines.size(), 101u);
  EXPECT_EQ(lines[0], "source,pair_id,generation,best,best_so_far,evaluations");
  double prev = 2.0;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto f = split(lines[i]);
    EXPECT_EQ(std::stoul(f[2]), i);
    const double best_so_far = std::stod(f[4]);
    EXPECT_LE(best_so_far, prev);
    EXPECT_LE(best_so_far, std::stod(f[3]));
    prev = best_so_far;
  }
}

TEST_F(CampaignTest, TruncatedResultsAreNotReported) {
  const auto r = ec::run_campaign(config(0.3, 2, "r"));
  {
    std::ofstream out(r.results_path, std::ios::app);
    out << "{\"pair_id\": \"x";
  }
  std::ostringstream csv;
  const std::vector<fs::path> results = {r.results_path};
  EXPECT_THROW(ec::emit_report(results, ec::ReportMode::kSummary, csv), evoseed::FormatError);
}

// ------------------------------------------------------------------ CLI

int run(const std::string& args) {
  const std::string cmd = std::string(EVOSEED_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(CampaignTest, CliExitCodesAndFlow) {
  const auto cfg = dir_ / "c.json";
  {
    std::ofstream(cfg) << base_config(0.3, 4).dump();
  }
  const auto pairs = dir_ / "pairs.jsonl";
  const auto out = dir_ / "r.jsonl";
  EXPECT_EQ(run("pairs --config " + cfg.string() + " --out " + pairs.string()), 0);
  EXPECT_EQ(run("attack --config " + cfg.string() + " --pairs " + pairs.string() + " --out " +
                out.string() + " --algorithm randseed --epsilon 0.2"),
            0);
  const auto records = ec::read_results(out).records;
  ASSERT_EQ(records.size(), 4u);
  EXPECT_EQ(records[0].algorithm, evoseed::Algorithm::kRandSeed);
  EXPECT_EQ(records[0].epsilon, 0.2);
  EXPECT_EQ(run("eval --results " + out.string() + " --mode summary --out " + (dir_ / "s.csv").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "s.csv"));

  // Usage and configuration problems exit 2, runtime problems 1.
  EXPECT_EQ(run("bogus"), 2);
  EXPECT_EQ(run("attack --config " + cfg.string() + " --pairs " + pairs.string() + " --out " +
                out.string() + " --epsilon -1"),
            2);
  EXPECT_EQ(run("eval --results " + out.string() + " --mode sideways"), 2);
  const auto bad = dir_ / "bad.json";
  {
    std::ofstream(bad) << R"({"generator": {"builtin": {}}, "classifier": {"builtin": {}},
                             "search": {"epslion": 0.3}})";
  }
  EXPECT_EQ(run("pairs --config " + bad.string() + " --out " + pairs.string()), 2);
  EXPECT_EQ(run("attack --config " + cfg.string() + " --pairs " + (dir_ / "none").string() +
                " --out " + out.string()),
            1);
}

}  // namespace
