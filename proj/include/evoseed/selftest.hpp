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

#ifndef EVOSEED_SELFTEST_HPP_
#define EVOSEED_SELFTEST_HPP_

#include <chrono>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evoseed/campaign.hpp"
#include "evoseed/cmaes.hpp"
#include "evoseed/search.hpp"
#include "evoseed/synthetic.hpp"
#include "evoseed/tensor.hpp"

namespace evoseed::selftest {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct Options {
  /// Turning this off must make the sphere check fail.
  bool adapt_step_size = true;
  std::uint64_t seed = 1;
  /// Stored results to audit against their epsilon.
  std::vector<std::filesystem::path> results;
};

struct Report {
  std::vector<Check> checks;
  bool passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }
};

struct MinimizeResult {
  double best = std::numeric_limits<double>::infinity();
  std::size_t generations = 0;
};

/// Unconstrained CMA-ES on `f` until best < target or the budget runs out.
inline MinimizeResult minimize(const std::function<double(std::span<const float>)>& f,
                               const LatentVector& start, double sigma0, double target,
                               std::size_t max_generations, std::uint64_t seed,
                               bool adapt_step_size = true) {
  CmaOptions options;
  options.adapt_step_size = adapt_step_size;
  CmaEs cma(start, sigma0, std::numeric_limits<double>::infinity(), options);
  std::mt19937_64 rng(seed);
  MinimizeResult r;
  std::vector<double> fitness;
  while (r.generations < max_generations && !(r.best < target)) {
    const auto population = cma.ask(rng);
    fitness.resize(population.size());
    for (std::size_t i = 0; i < population.size(); ++i) {
      fitness[i] = f(population[i].values());
      r.best = std::min(r.best, fitness[i]);
    }
    cma.tell(std::span<const double>(fitness));
    ++r.generations;
  }
  return r;
}

namespace detail {

inline std::string format(const char* fmt, double a, double b = 0.0) {
  char buffer[160];
  std::snprintf(buffer, sizeof buffer, fmt, a, b);
  return buffer;
}

template <typename Fn>
Check timed(const std::string& name, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  Check c;
  c.name = name;
  try {
    fn(c);
  } catch (const std::exception& e) {
    c.passed = false;
    c.detail = std::string("error: ") + e.what();
  }
  c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return c;
}

}  // namespace detail

inline Report run(const Options& options = {}) {
  Report report;

  report.checks.push_back(detail::timed("sphere n=10 < 1e-9 within 1000 generations", [&](Check& c) {
    const auto r = minimize(synthetic::bench_sphere, LatentVector(std::vector<float>(10, 1.0f)),
                            0.5, 1e-9, 1000, options.seed, options.adapt_step_size);
    c.passed = r.best < 1e-9;
    c.detail = detail::format("best %.3g after %.0f generations", r.best, double(r.generations));
  }));

  report.checks.push_back(
      detail::timed("rosenbrock n=5 < 1e-6 within 5000 generations", [&](Check& c) {
        const auto r = minimize(synthetic::bench_rosenbrock,
                                LatentVector(std::vector<float>(5, 0.0f)), 0.5, 1e-6, 5000,
                                options.seed, options.adapt_step_size);
        c.passed = r.best < 1e-6;
        c.detail =
            detail::format("best %.3g after %.0f generations", r.best, double(r.generations));
      }));

  report.checks.push_back(detail::timed("box audit: every candidate inside [z-eps, z+eps]",
                                        [&](Check& c) {
    // Optimum far outside the box, so the search presses against its faces.
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<float> center(16);
    for (float& v : center) v = static_cast<float>(normal(rng));
    const LatentVector z(center);
    std::size_t violations = 0;
    std::size_t checked = 0;
    for (const double eps : {0.0, 0.01, 0.1, 0.5}) {
      CmaEs cma(z, 1.0, eps);
      std::vector<double> fitness;
      for (int gen = 0; gen < 200; ++gen) {
        const auto population = cma.ask(rng);
        fitness.clear();
        for (const auto& x : population) {
          ++checked;
          if (linf_distance(x, z) > eps) ++violations;
          double s = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - 10.0) * (x[i] - 10.0);
          fitness.push_back(s);
        }
        cma.tell(std::span<const double>(fitness));
      }
    }
    c.passed = violations == 0;
    c.detail = std::to_string(violations) + " violations in " + std::to_string(checked) +
               " candidates";
  }));

  report.checks.push_back(detail::timed("determinism: repeated attacks are identical",
                                        [&](Check& c) {
    auto world = std::make_shared<const synthetic::PrototypeWorld>(synthetic::WorldParams{});
    synthetic::SyntheticGenerator g(world);
    synthetic::PrototypeClassifier f(world);
    std::mt19937_64 rng(options.seed);
    const auto batch = generate_pairs(g, f, 4, rng);
    std::size_t mismatches = 0;
    for (const auto algorithm : {Algorithm::kEvoSeed, Algorithm::kRandSeed}) {
      SearchConfig config;
      config.epsilon = 0.3;
      config.tau = 20;
      config.rng_seed = options.seed;
      config.algorithm = algorithm;
      for (const auto& pair : batch.pairs) {
        const auto a = run_attack(g, f, pair, config);
        const auto b = run_attack(g, f, pair, config);
        if (a.trace != b.trace || a.adversarial_seed != b.adversarial_seed) ++mismatches;
      }
    }
    c.passed = mismatches == 0;
    c.detail = std::to_string(mismatches) + " mismatching reruns";
  }));

  for (const auto& path : options.results) {
    report.checks.push_back(detail::timed("epsilon audit: " + path.string(), [&](Check& c) {
      const auto file = campaign::read_results(path);
      std::size_t violations = 0;
      for (const auto& r : file.records) {
        if (r.max_candidate_linf > r.epsilon) ++violations;
      }
      c.passed = violations == 0 && !file.truncated_tail;
      c.detail = std::to_string(violations) + " violations in " +
                 std::to_string(file.records.size()) + " records" +
                 (file.truncated_tail ? " (truncated final line)" : "");
    }));
  }
  return report;
}

}  // namespace evoseed::selftest

#endif  // EVOSEED_SELFTEST_HPP_
