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

// Campaign orchestration and persistence.
//
// Files written for a results path R:
//   R                 one JSON record per pair, in pair order
//   R.meta.json       models and search settings the records came from
//   R.summary.json    aggregate numbers (recomputable from R)
//   R.adv/            EVT1 seed and image of every success

#ifndef EVOSEED_CAMPAIGN_HPP_
#define EVOSEED_CAMPAIGN_HPP_

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "evoseed/backend.hpp"
#include "evoseed/config.hpp"
#include "evoseed/errors.hpp"
#include "evoseed/metrics.hpp"
#include "evoseed/search.hpp"
#include "evoseed/tensor.hpp"
#include "evoseed/tensor_io.hpp"
#include "json.hpp"

namespace evoseed::campaign {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- pairs

inline json pair_to_json(const AttackPair& p) {
  const std::size_t n = p.seed.size();
  return {{"pair_id", p.pair_id},
          {"condition", p.condition.index},
          {"baseline_confidence", p.baseline_confidence},
          {"seed", backend::to_payload(std::span<const std::size_t>(&n, 1), p.seed.values())}};
}

inline AttackPair pair_from_json(const json& j) {
  try {
    AttackPair p;
    p.pair_id = j.at("pair_id").get<std::string>();
    p.condition.index = j.at("condition").get<std::size_t>();
    p.baseline_confidence = j.at("baseline_confidence").get<double>();
    auto payload = backend::from_payload(j.at("seed"));
    if (payload.shape.size() != 1) throw FormatError("pair seed must be rank 1");
    p.seed = LatentVector(std::move(payload.values));
    return p;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad pair record: ") + e.what());
  }
}

inline void write_pairs(const fs::path& path, std::span<const AttackPair> pairs) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& p : pairs) out << pair_to_json(p).dump() << '\n';
  if (!out.flush()) throw Error("write failed: " + path.string());
}

inline std::vector<AttackPair> read_pairs(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read pairs file " + path.string());
  std::vector<AttackPair> pairs;
  std::set<std::string> seen;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    pairs.push_back(pair_from_json(j));
    if (!seen.insert(pairs.back().pair_id).second) {
      throw FormatError(path.string() + ": duplicate pair_id " + pairs.back().pair_id);
    }
  }
  return pairs;
}

/// Pair generation uses its own stream so it never collides with attack streams.
inline PairBatch make_pairs(const CampaignConfig& config, ModelSet& models) {
  std::mt19937_64 rng(pair_stream_seed(config.search.rng_seed, "#pairs"));
  return generate_pairs(*models.generator, *models.classifier, config.pair_count, rng);
}

// -------------------------------------------------------------- records

struct ResultRecord {
  std::string pair_id;
  Algorithm algorithm = Algorithm::kEvoSeed;
  double epsilon = 0.0;
  std::size_t lambda = 0;
  std::size_t tau = 0;
  double sigma0 = 0.0;
  std::uint64_t rng_seed = 0;
  std::size_t condition = 0;
  double baseline_confidence = 0.0;
  bool success = false;
  std::size_t generations_used = 0;
  std::size_t evaluations_used = 0;
  double final_confidence = 0.0;
  std::optional<std::size_t> adversarial_label;
  std::vector<TraceEntry> trace;
  std::optional<std::string> adversarial_seed_file;
  std::optional<std::string> adversarial_image_file;
  double max_candidate_linf = 0.0;
  /// SSIM against the pair's unperturbed image; absent for failures and
  /// images smaller than the SSIM window.
  std::optional<double> ssim;
};

namespace detail {

template <typename T>
json optional_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<T>();
}

}  // namespace detail

/// Keys stay in schema order.
inline nlohmann::ordered_json record_to_json(const ResultRecord& r) {
  json trace = json::array();
  for (const auto& t : r.trace) {
    trace.push_back({t.generation, t.best, t.best_so_far, t.evaluations});
  }
  return nlohmann::ordered_json{
          {"pair_id", r.pair_id},
          {"algorithm", to_string(r.algorithm)},
          {"epsilon", r.epsilon},
          {"lambda", r.lambda},
          {"tau", r.tau},
          {"sigma0", r.sigma0},
          {"rng_seed", r.rng_seed},
          {"condition", r.condition},
          {"baseline_confidence", r.baseline_confidence},
          {"success", r.success},
          {"generations_used", r.generations_used},
          {"evaluations_used", r.evaluations_used},
          {"final_confidence", r.final_confidence},
          {"adversarial_label", detail::optional_json(r.adversarial_label)},
          {"trace", trace},
          {"adversarial_seed_file", detail::optional_json(r.adversarial_seed_file)},
          {"adversarial_image_file", detail::optional_json(r.adversarial_image_file)},
          {"max_candidate_linf", r.max_candidate_linf},
          {"ssim", detail::optional_json(r.ssim)}};
}

inline ResultRecord record_from_json(const json& j) {
  try {
    ResultRecord r;
    r.pair_id = j.at("pair_id").get<std::string>();
    r.algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    r.epsilon = j.at("epsilon").get<double>();
    r.lambda = j.at("lambda").get<std::size_t>();
    r.tau = j.at("tau").get<std::size_t>();
    r.sigma0 = j.at("sigma0").get<double>();
    r.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    r.condition = j.at("condition").get<std::size_t>();
    r.baseline_confidence = j.at("baseline_confidence").get<double>();
    r.success = j.at("success").get<bool>();
    r.generations_used = j.at("generations_used").get<std::size_t>();
    r.evaluations_used = j.at("evaluations_used").get<std::size_t>();
    r.final_confidence = j.at("final_confidence").get<double>();
    r.adversarial_label = detail::optional_from<std::size_t>(j, "adversarial_label");
    for (const auto& t : j.at("trace")) {
      r.trace.push_back({t.at(0).get<std::size_t>(), t.at(1).get<double>(),
                         t.at(2).get<double>(), t.at(3).get<std::size_t>()});
    }
    r.adversarial_seed_file = detail::optional_from<std::string>(j, "adversarial_seed_file");
    r.adversarial_image_file = detail::optional_from<std::string>(j, "adversarial_image_file");
    r.max_candidate_linf = j.at("max_candidate_linf").get<double>();
    r.ssim = detail::optional_from<double>(j, "ssim");
    return r;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad result record: ") + e.what());
  } catch (const Error& e) {
    throw FormatError(std::string("bad result record: ") + e.what());
  }
}

inline fs::path meta_path(const fs::path& results) { return fs::path(results.string() + ".meta.json"); }
inline fs::path summary_path(const fs::path& results) {
  return fs::path(results.string() + ".summary.json");
}
inline fs::path artifact_dir(const fs::path& results) { return fs::path(results.string() + ".adv"); }

/// Settings a results file was produced with.
struct RunMeta {
  GeneratorSpec generator;
  ClassifierSpec classifier;
  SearchConfig search;
  std::size_t lambda = 0;
};

inline json meta_to_json(const RunMeta& m) {
  return {{"generator", generator_to_json(m.generator)},
          {"classifier", classifier_to_json(m.classifier)},
          {"search", search_to_json(m.search)},
          {"lambda", m.lambda}};
}

inline RunMeta meta_from_json(const json& j) {
  detail::ObjectReader r(j, "meta", {"generator", "classifier", "search", "lambda"});
  RunMeta m;
  m.generator = parse_generator(r.at("generator"), "meta.generator");
  m.classifier = parse_classifier(r.at("classifier"), "meta.classifier");
  m.search = parse_search(r.at("search"), "meta.search");
  m.lambda = r.unsigned_int("lambda");
  return m;
}

inline RunMeta read_meta(const fs::path& results) {
  const auto path = meta_path(results);
  std::ifstream in(path);
  if (!in) throw Error("missing " + path.string());
  try {
    return meta_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Fields (dotted paths) whose values differ between two JSON documents.
inline void diff_json(const json& a, const json& b, const std::string& path,
                      std::vector<std::string>& out) {
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (const auto& [k, v] : a.items()) keys.insert(k);
    for (const auto& [k, v] : b.items()) keys.insert(k);
    for (const auto& k : keys) {
      const std::string sub = path.empty() ? k : path + "." + k;
      if (!a.contains(k) || !b.contains(k)) {
        out.push_back(sub);
      } else {
        diff_json(a.at(k), b.at(k), sub, out);
      }
    }
    return;
  }
  if (a != b) out.push_back(path);
}

struct ResultsFile {
  fs::path path;
  std::vector<ResultRecord> records;
  /// A final line was cut off (no newline or unparseable).
  bool truncated_tail = false;
  /// Length of the prefix holding complete records.
  std::uintmax_t valid_bytes = 0;
};

inline ResultsFile read_results(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read results file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  const std::string text = buffer.str();

  ResultsFile f;
  f.path = path;
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos < text.size()) {
    ++number;
    const auto nl = text.find('\n', pos);
    const bool last = nl == std::string::npos;
    const std::string line = text.substr(pos, last ? std::string::npos : nl - pos);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      if (last) {
        f.truncated_tail = true;
        break;
      }
      throw FormatError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
    if (last) {
      // Parses but was never terminated: the writer died mid-append.
      f.truncated_tail = true;
      break;
    }
    f.records.push_back(record_from_json(j));
    pos = nl + 1;
    f.valid_bytes = pos;
  }
  return f;
}

// -------------------------------------------------------------- summary

struct Summary {
  std::size_t pairs = 0;
  std::size_t successes = 0;
  double asr = 0.0;
  std::optional<double> mean_generations_to_success;
  double mean_evaluations = 0.0;
  std::size_t total_evaluations = 0;
  std::optional<double> mean_ssim;
};

inline Summary summarize(std::span<const ResultRecord> records) {
  Summary s;
  s.pairs = records.size();
  double gens = 0.0;
  double ssim_sum = 0.0;
  std::size_t ssim_count = 0;
  for (const auto& r : records) {
    s.total_evaluations += r.evaluations_used;
    if (!r.success) continue;
    ++s.successes;
    gens += double(r.generations_used);
    if (r.ssim) {
      ssim_sum += *r.ssim;
      ++ssim_count;
    }
  }
  if (s.pairs > 0) {
    s.asr = double(s.successes) / double(s.pairs);
    s.mean_evaluations = double(s.total_evaluations) / double(s.pairs);
  }
  if (s.successes > 0) s.mean_generations_to_success = gens / double(s.successes);
  if (ssim_count > 0) s.mean_ssim = ssim_sum / double(ssim_count);
  return s;
}

inline json summary_to_json(const Summary& s) {
  return {{"pairs", s.pairs},
          {"successes", s.successes},
          {"asr", s.asr},
          {"mean_generations_to_success", detail::optional_json(s.mean_generations_to_success)},
          {"mean_evaluations", s.mean_evaluations},
          {"total_evaluations", s.total_evaluations},
          {"mean_ssim", detail::optional_json(s.mean_ssim)}};
}

// -------------------------------------------------------------- attacks

struct AttackReport {
  std::size_t resumed = 0;
  std::size_t attacked = 0;
  bool repaired_truncated_tail = false;
  Summary summary;
};

namespace detail {

inline std::string relative_to(const fs::path& file, const fs::path& base_dir) {
  return file.lexically_relative(base_dir).generic_string();
}

inline ResultRecord attack_one(ModelSet& models, const AttackPair& pair, const SearchConfig& search,
                               std::size_t lambda, const fs::path& results) {
  SearchOutcome o = run_attack(*models.generator, *models.classifier, pair, search);
  ResultRecord r;
  r.pair_id = pair.pair_id;
  r.algorithm = search.algorithm;
  r.epsilon = search.epsilon;
  r.lambda = lambda;
  r.tau = search.tau;
  r.sigma0 = search.sigma0;
  r.rng_seed = search.rng_seed;
  r.condition = pair.condition.index;
  r.baseline_confidence = pair.baseline_confidence;
  r.success = o.success;
  r.generations_used = o.generations_used;
  r.evaluations_used = o.evaluations_used;
  r.final_confidence = o.final_confidence;
  r.adversarial_label = o.adversarial_label;
  r.trace = std::move(o.trace);
  r.max_candidate_linf = o.max_candidate_linf;
  if (o.success) {
    const fs::path dir = artifact_dir(results);
    fs::create_directories(dir);
    const fs::path seed_file = dir / (pair.pair_id + ".seed.evt");
    const fs::path image_file = dir / (pair.pair_id + ".image.evt");
    io::write(seed_file, *o.adversarial_seed);
    io::write(image_file, *o.adversarial_image);
    const fs::path base = results.has_parent_path() ? results.parent_path() : fs::path(".");
    r.adversarial_seed_file = relative_to(seed_file, base);
    r.adversarial_image_file = relative_to(image_file, base);
    const auto& image = *o.adversarial_image;
    if (image.height() >= metrics::kSsimWindow && image.width() >= metrics::kSsimWindow) {
      const auto original = models.generator->generate(std::span(&pair.seed, 1),
                                                       std::span(&pair.condition, 1));
      r.ssim = metrics::ssim(image, original.at(0));
    }
  }
  return r;
}

}  // namespace detail

/// Attacks every pair not already present in `results`, appending records in
/// pair order. Existing records are kept; a cut-off final line is dropped.
inline AttackReport run_attacks(const CampaignConfig& config, ModelSet& models,
                                std::span<const AttackPair> pairs, const fs::path& results,
                                std::ostream* log = nullptr) {
  config.search.validate();
  if (pairs.empty()) throw InvalidInputError("no pairs to attack");
  const std::size_t lambda = config.search.population_size(pairs.front().seed.size());

  RunMeta meta{config.generator, config.classifier, config.search, lambda};
  const json meta_json = meta_to_json(meta);
  if (results.has_parent_path()) fs::create_directories(results.parent_path());

  AttackReport report;
  std::set<std::string> done;
  if (fs::exists(results)) {
    if (!fs::exists(meta_path(results))) {
      throw ConfigError(results.string() + " exists without " + meta_path(results).string());
    }
    std::vector<std::string> diffs;
    diff_json(meta_to_json(read_meta(results)), meta_json, "", diffs);
    if (!diffs.empty()) {
      std::string fields;
      for (const auto& d : diffs) fields += (fields.empty() ? "" : ", ") + d;
      throw ConfigError("cannot resume " + results.string() +
                        ": it was produced with different settings (" + fields + ")");
    }
    auto existing = read_results(results);
    if (existing.truncated_tail) {
      if (log) *log << "warning: " << results.string() << " ends in a truncated record; dropping it\n";
      fs::resize_file(results, existing.valid_bytes);
      report.repaired_truncated_tail = true;
    }
    for (const auto& r : existing.records) done.insert(r.pair_id);
    report.resumed = done.size();
  } else {
    std::ofstream m(meta_path(results), std::ios::trunc);
    m << meta_json.dump(2) << '\n';
    if (!m.flush()) throw Error("cannot write " + meta_path(results).string());
  }

  std::vector<const AttackPair*> todo;
  for (const auto& p : pairs) {
    if (!done.contains(p.pair_id)) todo.push_back(&p);
  }

  std::ofstream out(results, std::ios::binary | std::ios::app);
  if (!out) throw Error("cannot append to " + results.string());

  std::vector<std::optional<std::string>> slots(todo.size());
  std::mutex mu;
  std::condition_variable ready;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> stop{false};
  std::exception_ptr failure;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= todo.size() || stop.load()) break;
      try {
        auto line = record_to_json(
                        detail::attack_one(models, *todo[i], config.search, lambda, results))
                        .dump();
        std::lock_guard lock(mu);
        slots[i] = std::move(line);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
        stop = true;
      }
      ready.notify_all();
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(config.parallelism, todo.size()));
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);

  // Single writer: appends strictly in pair order.
  for (std::size_t i = 0; i < todo.size(); ++i) {
    std::unique_lock lock(mu);
    ready.wait(lock, [&] { return slots[i].has_value() || stop.load(); });
    if (!slots[i]) break;
    std::string line = std::move(*slots[i]);
    slots[i].reset();
    lock.unlock();
    out << line << '\n';
    out.flush();
    ++report.attacked;
    if (log && (report.attacked % 50 == 0)) {
      *log << "  " << report.attacked << "/" << todo.size() << " pairs\n";
    }
  }
  pool.clear();
  out.close();
  if (failure) std::rethrow_exception(failure);

  const auto all = read_results(results);
  report.summary = summarize(all.records);
  std::ofstream s(summary_path(results), std::ios::trunc);
  json sj = summary_to_json(report.summary);
  sj["algorithm"] = to_string(config.search.algorithm);
  sj["epsilon"] = config.search.epsilon;
  s << sj.dump(2) << '\n';
  return report;
}

struct CampaignResult {
  fs::path pairs_path;
  fs::path results_path;
  std::size_t pair_attempts = 0;
  double acceptance_rate = 0.0;
  AttackReport attack;
};

/// Pairs plus attacks in `config.output_dir` (pairs.jsonl, results.jsonl).
inline CampaignResult run_campaign(const CampaignConfig& config, std::ostream* log = nullptr) {
  CampaignResult result;
  result.pairs_path = config.output_dir / "pairs.jsonl";
  result.results_path = config.output_dir / "results.jsonl";
  auto models = build_models(config);
  std::vector<AttackPair> pairs;
  if (fs::exists(result.pairs_path)) {
    pairs = read_pairs(result.pairs_path);
  } else {
    auto batch = make_pairs(config, models);
    result.pair_attempts = batch.attempts;
    result.acceptance_rate = batch.acceptance_rate;
    pairs = std::move(batch.pairs);
    write_pairs(result.pairs_path, pairs);
  }
  result.attack = run_attacks(config, models, pairs, result.results_path, log);
  return result;
}

// -------------------------------------------------------------- reports

enum class ReportMode { kSummary, kTransfer, kTrace };

inline ReportMode parse_report_mode(std::string_view s) {
  if (s == "summary") return ReportMode::kSummary;
  if (s == "transfer") return ReportMode::kTransfer;
  if (s == "trace") return ReportMode::kTrace;
  throw UsageError("unknown report mode '" + std::string(s) + "' (summary, transfer, trace)");
}

namespace detail {

inline std::string number(double v) { return json(v).dump(); }

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

struct LoadedRun {
  ResultsFile file;
  RunMeta meta;
};

/// Every run must agree with the first on `fields` (dotted meta paths).
inline void require_compatible(std::span<const LoadedRun> runs,
                               std::span<const std::string> fields) {
  if (runs.empty()) return;
  const json first = meta_to_json(runs[0].meta);
  std::vector<std::string> problems;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    std::vector<std::string> diffs;
    diff_json(first, meta_to_json(runs[i].meta), "", diffs);
    for (const auto& d : diffs) {
      for (const auto& f : fields) {
        if (d == f || d.starts_with(f + ".")) {
          problems.push_back(d + " (" + runs[0].file.path.string() + " vs " +
                             runs[i].file.path.string() + ")");
          break;
        }
      }
    }
  }
  if (!problems.empty()) {
    std::string message = "results come from incompatible configurations; conflicting fields:";
    for (const auto& p : problems) message += "\n  " + p;
    throw ConfigError(message);
  }
}

}  // namespace detail

/// Writes the requested CSV report for one or more results files.
inline void emit_report(std::span<const fs::path> results, ReportMode mode, std::ostream& csv,
                        backend::ConnectionOptions options = {}) {
  if (results.empty()) throw UsageError("no results files given");
  std::vector<detail::LoadedRun> runs;
  for (const auto& path : results) {
    auto file = read_results(path);
    if (file.truncated_tail) {
      throw FormatError(path.string() + " ends in a truncated record; resume the attack first");
    }
    runs.push_back({std::move(file), read_meta(path)});
  }

  if (mode == ReportMode::kSummary) {
    const std::vector<std::string> fields = {"generator", "classifier", "search.tau",
                                             "search.sigma0", "lambda"};
    detail::require_compatible(runs, fields);
    std::map<std::pair<std::string, double>, std::vector<ResultRecord>> groups;
    for (const auto& run : runs) {
      for (const auto& r : run.file.records) {
        groups[{std::string(to_string(r.algorithm)), r.epsilon}].push_back(r);
      }
    }
    csv << "algorithm,epsilon,pairs,successes,asr,mean_generations_to_success,"
           "mean_evaluations,mean_ssim\n";
    for (const auto& [key, records] : groups) {
      const auto s = summarize(records);
      csv << key.first << ',' << detail::number(key.second) << ',' << s.pairs << ','
          << s.successes << ',' << detail::number(s.asr) << ','
          << (s.mean_generations_to_success ? detail::number(*s.mean_generations_to_success) : "")
          << ',' << detail::number(s.mean_evaluations) << ','
          << (s.mean_ssim ? detail::number(*s.mean_ssim) : "") << '\n';
    }
    return;
  }

  if (mode == ReportMode::kTrace) {
    csv << "source,pair_id,generation,best,best_so_far,evaluations\n";
    for (const auto& run : runs) {
      const std::string source = detail::csv_field(run.file.path.filename().string());
      for (const auto& r : run.file.records) {
        for (const auto& t : r.trace) {
          csv << source << ',' << r.pair_id << ',' << t.generation << ','
              << detail::number(t.best) << ',' << detail::number(t.best_so_far) << ','
              << t.evaluations << '\n';
        }
      }
    }
    return;
  }

  // Transfer: rows are the classifiers attacked, columns every classifier seen.
  const std::vector<std::string> fields = {"generator"};
  detail::require_compatible(runs, fields);
  std::vector<ClassifierSpec> specs;
  for (const auto& run : runs) {
    if (std::find(specs.begin(), specs.end(), run.meta.classifier) == specs.end()) {
      for (const auto& s : specs) {
        if (s.name == run.meta.classifier.name) {
          throw ConfigError("two different classifiers are both named '" + s.name + "'");
        }
      }
      specs.push_back(run.meta.classifier);
    }
  }
  std::shared_ptr<const synthetic::PrototypeWorld> world;
  if (const auto* w = std::get_if<synthetic::WorldParams>(&runs[0].meta.generator.source)) {
    world = std::make_shared<const synthetic::PrototypeWorld>(*w);
  }
  std::vector<std::shared_ptr<ClassifierModel>> owned;
  std::vector<metrics::NamedClassifier> classifiers;
  for (const auto& s : specs) {
    owned.push_back(build_classifier(s, world, options));
    classifiers.push_back({s.name, owned.back().get()});
  }
  std::vector<metrics::TransferSource> sources(specs.size());
  for (std::size_t i = 0; i < specs.size(); ++i) sources[i].name = specs[i].name;
  for (const auto& run : runs) {
    const auto row = static_cast<std::size_t>(
        std::find(specs.begin(), specs.end(), run.meta.classifier) - specs.begin());
    const fs::path base =
        run.file.path.has_parent_path() ? run.file.path.parent_path() : fs::path(".");
    for (const auto& r : run.file.records) {
      if (!r.success || !r.adversarial_image_file) continue;
      sources[row].images.push_back({io::read_image(base / *r.adversarial_image_file), r.condition});
    }
  }
  const auto m = metrics::transfer_matrix(sources, classifiers);
  csv << "source";
  for (const auto& name : m.eval_labels) csv << ',' << detail::csv_field(name);
  csv << '\n';
  for (std::size_t i = 0; i < m.source_labels.size(); ++i) {
    csv << detail::csv_field(m.source_labels[i]);
    for (const auto& v : m.asr[i]) csv << ',' << (v ? detail::number(*v) : "");
    csv << '\n';
  }
}

}  // namespace evoseed::campaign

#endif  // EVOSEED_CAMPAIGN_HPP_
