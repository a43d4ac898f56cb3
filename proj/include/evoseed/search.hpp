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

// Seed-search attack drivers.
//
// Both drivers look for z' with ||z' - z||_inf <= epsilon such that
// argmax F(G(z', c)) != c, minimizing the confidence F(G(z', c))_c:
//
//   evoseed   CMA-ES around z, lambda candidates per generation
//   randseed  lambda independent uniform shifts z + U(-eps, eps) per generation
//
// A generation's candidates are generated and classified as one batch. The
// search stops at the first generation containing a misclassified candidate
// and returns the lowest population index among them.

#ifndef EVOSEED_SEARCH_HPP_
#define EVOSEED_SEARCH_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "evoseed/cmaes.hpp"
#include "evoseed/errors.hpp"
#include "evoseed/models.hpp"
#include "evoseed/tensor.hpp"

namespace evoseed {

enum class Algorithm { kEvoSeed, kRandSeed };

inline std::string_view to_string(Algorithm a) {
  return a == Algorithm::kEvoSeed ? "evoseed" : "randseed";
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "evoseed") return Algorithm::kEvoSeed;
  if (s == "randseed") return Algorithm::kRandSeed;
  throw ConfigError("unknown algorithm '" + std::string(s) + "' (expected evoseed|randseed)");
}

struct SearchConfig {
  double epsilon = 0.3;
  std::size_t tau = 100;
  /// 0 selects default_population_size(n).
  std::size_t lambda = 0;
  double sigma0 = 1.0;
  std::uint64_t rng_seed = 0;
  Algorithm algorithm = Algorithm::kEvoSeed;

  void validate() const {
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon)) {
      throw ConfigError("search.epsilon must be >= 0");
    }
    if (tau < 1) throw ConfigError("search.tau must be >= 1");
    if (lambda == 1) throw ConfigError("search.lambda must be 0 (auto) or >= 2");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) throw ConfigError("search.sigma0 must be > 0");
  }

  std::size_t population_size(std::size_t n) const {
    return lambda == 0 ? default_population_size(n) : lambda;
  }
};

struct AttackPair {
  std::string pair_id;
  LatentVector seed;
  ConditionLabel condition;
  /// F(G(z, c))_c of the unperturbed seed.
  double baseline_confidence = 0.0;
};

struct TraceEntry {
  std::size_t generation = 0;
  /// Lowest F(x)_c among this generation's candidates.
  double best = 0.0;
  double best_so_far = 0.0;
  /// Cumulative evaluations at the end of this generation.
  std::size_t evaluations = 0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

struct SearchOutcome {
  std::string pair_id;
  bool success = false;
  std::size_t generations_used = 0;
  std::size_t evaluations_used = 0;
  std::optional<LatentVector> adversarial_seed;
  std::optional<ImageTensor> adversarial_image;
  std::optional<std::size_t> adversarial_label;
  /// F(x)_c of the returned candidate on success, else the best confidence reached.
  double final_confidence = 0.0;
  /// Largest ||z' - z||_inf over every evaluated candidate.
  double max_candidate_linf = 0.0;
  std::vector<TraceEntry> trace;
};

/// An attack failed for a reason other than exhausting its budget. The
/// original exception is nested.
class AttackError : public Error {
 public:
  AttackError(std::string pair_id, const std::string& what)
      : Error("pair " + pair_id + ": " + what), pair_id_(std::move(pair_id)) {}
  const std::string& pair_id() const noexcept { return pair_id_; }

 private:
  std::string pair_id_;
};

/// 64-bit stream key from (rng_seed, pair_id): FNV-1a over the id, then a
/// splitmix64 finalizer mixed with the seed.
inline std::uint64_t pair_stream_seed(std::uint64_t rng_seed, std::string_view pair_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : pair_id) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::uint64_t x = h ^ (rng_seed + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2));
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace detail {

struct Evaluation {
  std::vector<ImageTensor> images;
  std::vector<ProbabilityVector> probs;
};

template <Generator G, Classifier F>
Evaluation evaluate(G& generator, F& classifier, std::span<const LatentVector> candidates,
                    const ConditionLabel& condition) {
  const std::vector<ConditionLabel> conditions(candidates.size(), condition);
  Evaluation e;
  e.images = generator.generate(candidates, conditions);
  if (e.images.size() != candidates.size()) {
    throw ContractViolationError("generator returned " + std::to_string(e.images.size()) +
                                 " images for " + std::to_string(candidates.size()) + " latents");
  }
  e.probs = classifier.classify(e.images);
  if (e.probs.size() != candidates.size()) {
    throw ContractViolationError("classifier returned " + std::to_string(e.probs.size()) +
                                 " results for " + std::to_string(candidates.size()) + " images");
  }
  const std::size_t k = classifier.num_labels();
  for (const auto& p : e.probs) {
    if (p.size() != k || condition.index >= k) {
      throw DimensionError("classifier output has " + std::to_string(p.size()) +
                           " labels, condition " + std::to_string(condition.index));
    }
  }
  return e;
}

template <Generator G, Classifier F>
void check_compatible(G& generator, F& classifier) {
  if (!(generator.image_shape() == classifier.image_shape())) {
    throw IncompatibleModelsError("generator image shape " + to_string(generator.image_shape()) +
                                  " != classifier input shape " +
                                  to_string(classifier.image_shape()));
  }
}

/// Bookkeeping shared by both drivers: trace, budget and the early finish.
class SearchRecorder {
 public:
  SearchRecorder(const AttackPair& pair, double epsilon) : pair_(pair), epsilon_(epsilon) {
    outcome_.pair_id = pair.pair_id;
    outcome_.final_confidence = std::numeric_limits<double>::infinity();
  }

  /// Records one evaluated generation. Returns true when it finished the search.
  bool record(std::size_t generation, std::span<const LatentVector> candidates,
              Evaluation& eval, std::vector<double>& fitness) {
    const std::size_t c = pair_.condition.index;
    fitness.resize(candidates.size());
    double gen_best = std::numeric_limits<double>::infinity();
    std::optional<std::size_t> hit;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const double d = linf_distance(candidates[i], pair_.seed);
      if (d > epsilon_) {
        throw NumericalError("candidate left the search box: ||z'-z||_inf = " +
                             std::to_string(d) + " > " + std::to_string(epsilon_));
      }
      outcome_.max_candidate_linf = std::max(outcome_.max_candidate_linf, d);
      fitness[i] = eval.probs[i][c];
      gen_best = std::min(gen_best, fitness[i]);
      if (!hit && argmax_label(eval.probs[i]) != c) hit = i;
    }
    outcome_.evaluations_used += candidates.size();
    outcome_.generations_used = generation;
    best_so_far_ = std::min(best_so_far_, gen_best);
    outcome_.trace.push_back({generation, gen_best, best_so_far_, outcome_.evaluations_used});
    if (hit) {
      outcome_.success = true;
      outcome_.adversarial_seed = candidates[*hit];
      outcome_.adversarial_image = std::move(eval.images[*hit]);
      outcome_.adversarial_label = argmax_label(eval.probs[*hit]);
      outcome_.final_confidence = fitness[*hit];
      return true;
    }
    outcome_.final_confidence = best_so_far_;
    return false;
  }

  SearchOutcome take() { return std::move(outcome_); }

 private:
  const AttackPair& pair_;
  double epsilon_;
  SearchOutcome outcome_;
  double best_so_far_ = std::numeric_limits<double>::infinity();
};

template <typename Fn>
decltype(auto) with_pair_context(const std::string& pair_id, Fn&& fn) {
  try {
    return fn();
  } catch (const AttackError&) {
    throw;
  } catch (const std::exception& e) {
    std::throw_with_nested(AttackError(pair_id, e.what()));
  }
}

}  // namespace detail

/// Draws (z, c) pairs with z ~ N(0, I) and c uniform, keeping those the
/// classifier already labels c.
struct PairBatch {
  std::vector<AttackPair> pairs;
  std::size_t attempts = 0;
  double acceptance_rate = 0.0;
};

inline std::string format_pair_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "pair-" + digits;
}

template <Generator G, Classifier F, typename Rng>
PairBatch generate_pairs(G& generator, F& classifier, std::size_t count, Rng& rng,
                         std::size_t batch_size = 64) {
  detail::check_compatible(generator, classifier);
  PairBatch out;
  if (count == 0) return out;
  const std::size_t n = generator.latent_length();
  const std::size_t k = classifier.num_labels();
  const std::size_t cap = 20 * count;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, k - 1);

  while (out.pairs.size() < count && out.attempts < cap) {
    const std::size_t batch = std::min(batch_size, cap - out.attempts);
    std::vector<LatentVector> latents;
    std::vector<ConditionLabel> conditions;
    latents.reserve(batch);
    conditions.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
      std::vector<float> z(n);
      for (float& v : z) v = static_cast<float>(normal(rng));
      latents.emplace_back(std::move(z));
      conditions.push_back({label(rng), {}});
    }
    const auto images = generator.generate(latents, conditions);
    const auto probs = classifier.classify(images);
    if (images.size() != batch || probs.size() != batch) {
      throw ContractViolationError("model returned a batch of the wrong length");
    }
    for (std::size_t i = 0; i < batch && out.pairs.size() < count; ++i) {
      ++out.attempts;
      if (argmax_label(probs[i]) != conditions[i].index) continue;
      out.pairs.push_back({format_pair_id(out.pairs.size()), latents[i], conditions[i],
                           probs[i][conditions[i].index]});
    }
  }
  out.acceptance_rate = double(out.pairs.size()) / double(out.attempts);
  if (out.pairs.size() < count && out.acceptance_rate < 0.05) {
    throw IncompatibleModelsError(
        "only " + std::to_string(out.pairs.size()) + " of " + std::to_string(out.attempts) +
        " generated samples were classified as their condition (acceptance " +
        std::to_string(100.0 * out.acceptance_rate) + "% < 5%)");
  }
  return out;
}

/// CMA-ES seed search (box-constrained around pair.seed).
template <Generator G, Classifier F, typename Rng>
SearchOutcome evoseed_attack(G& generator, F& classifier, const AttackPair& pair,
                             const SearchConfig& config, Rng& rng) {
  config.validate();
  return detail::with_pair_context(pair.pair_id, [&] {
    detail::check_compatible(generator, classifier);
    CmaOptions options;
    if (config.lambda != 0) options.lambda = config.lambda;
    CmaEs cma(pair.seed, config.sigma0, config.epsilon, options);
    detail::SearchRecorder recorder(pair, config.epsilon);
    std::vector<double> fitness;
    for (std::size_t gen = 1; gen <= config.tau; ++gen) {
      const auto population = cma.ask(rng);
      auto eval = detail::evaluate(generator, classifier, population, pair.condition);
      if (recorder.record(gen, population, eval, fitness)) break;
      cma.tell(std::span<const double>(fitness));
    }
    return recorder.take();
  });
}

/// Uniform random-shift baseline with the same budget semantics.
template <Generator G, Classifier F, typename Rng>
SearchOutcome randseed_attack(G& generator, F& classifier, const AttackPair& pair,
                              const SearchConfig& config, Rng& rng) {
  config.validate();
  return detail::with_pair_context(pair.pair_id, [&] {
    detail::check_compatible(generator, classifier);
    const std::size_t n = pair.seed.size();
    const std::size_t lambda = config.population_size(n);
    const SearchBox box(pair.seed, config.epsilon);
    std::uniform_real_distribution<double> shift(-config.epsilon, config.epsilon);
    detail::SearchRecorder recorder(pair, config.epsilon);
    std::vector<double> fitness;
    std::vector<float> raw(n);
    for (std::size_t gen = 1; gen <= config.tau; ++gen) {
      std::vector<LatentVector> population;
      population.reserve(lambda);
      for (std::size_t k = 0; k < lambda; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
          const double eta = config.epsilon > 0.0 ? shift(rng) : 0.0;
          raw[i] = static_cast<float>(double(pair.seed[i]) + eta);
        }
        // Only float rounding can leave the box here.
        population.emplace_back(clip_values_to_box(raw, box));
      }
      auto eval = detail::evaluate(generator, classifier, population, pair.condition);
      if (recorder.record(gen, population, eval, fitness)) break;
    }
    return recorder.take();
  });
}

/// Runs the configured algorithm on the pair's derived random stream.
template <Generator G, Classifier F>
SearchOutcome run_attack(G& generator, F& classifier, const AttackPair& pair,
                         const SearchConfig& config) {
  std::mt19937_64 rng(pair_stream_seed(config.rng_seed, pair.pair_id));
  return config.algorithm == Algorithm::kEvoSeed
             ? evoseed_attack(generator, classifier, pair, config, rng)
             : randseed_attack(generator, classifier, pair, config, rng);
}

}  // namespace evoseed

#endif  // EVOSEED_SEARCH_HPP_
