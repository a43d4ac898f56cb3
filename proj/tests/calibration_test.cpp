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

// Difficulty gradient of the default world, measured with the brute-force
// oracle: a wide box must almost always allow a flip, a narrow one rarely.

#include <gtest/gtest.h>

#include <atomic>
#include <memory>
#include <random>
#include <thread>
#include <vector>

#include "evoseed/search.hpp"
#include "evoseed/synthetic.hpp"
#include "oracles.hpp"

namespace {

using namespace evoseed;

double brute_flip_rate(double eps, std::size_t count) {
  auto world = std::make_shared<const synthetic::PrototypeWorld>(synthetic::WorldParams{});
  synthetic::SyntheticGenerator g(world);
  synthetic::PrototypeClassifier f(world);
  std::mt19937_64 rng(2024);
  const auto pairs = generate_pairs(g, f, count, rng).pairs;
  std::vector<char> flips(pairs.size(), 0);
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < std::max(1u, std::thread::hardware_concurrency()); ++t) {
      pool.emplace_back([&] {
        for (std::size_t i; (i = next++) < pairs.size();) {
          flips[i] = oracle::brute_force_flips(*world, pairs[i], eps, 1'000'000, 77 + i);
        }
      });
    }
  }
  std::size_t n = 0;
  for (char v : flips) n += v;
  return double(n) / double(pairs.size());
}

TEST(Calibration, WideBoxFlipsAlmostEveryPair) {
  const double rate = brute_flip_rate(0.5, 100);
  RecordProperty("flip_rate", std::to_string(rate));
  EXPECT_GE(rate, 0.95);
}

TEST(Calibration, NarrowBoxRarelyFlips) {
  const double rate = brute_flip_rate(0.05, 100);
  RecordProperty("flip_rate", std::to_string(rate));
  EXPECT_LE(rate, 0.10);
}

}  // namespace
