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

#include <memory>
#include <random>
#include <set>
#include <vector>

#include "evoseed/errors.hpp"
#include "evoseed/models.hpp"
#include "evoseed/search.hpp"
#include "evoseed/synthetic.hpp"

namespace {

using namespace evoseed;

/// Generator whose image is a constant gray, so classifiers see nothing useful.
class FlatGenerator final : public GeneratorModel {
 public:
  explicit FlatGenerator(std::size_t n = 4) : n_(n) {}
  std::size_t latent_length() const override { return n_; }
  ImageShape image_shape() const override { return {2, 2, 1}; }
  std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                    std::span<const ConditionLabel>) override {
    calls += 1;
    return std::vector<ImageTensor>(latents.size(), ImageTensor({2, 2, 1}, {0.5f, 0.5f, 0.5f, 0.5f}));
  }
  std::size_t calls = 0;

 private:
  std::size_t n_;
};

/// Always answers one-hot at a fixed label.
class FixedClassifier final : public ClassifierModel {
 public:
  FixedClassifier(std::size_t k, std::size_t label) : k_(k), label_(label) {}
  std::size_t num_labels() const override { return k_; }
  ImageShape image_shape() const override { return {2, 2, 1}; }
  std::vector<ProbabilityVector> classify(std::span<const ImageTensor> images) override {
    std::vector<double> p(k_, 0.0);
    p[label_] = 1.0;
    return std::vector<ProbabilityVector>(images.size(), ProbabilityVector(p));
  }
  void set_label(std::size_t l) { label_ = l; }

 private:
  std::size_t k_, label_;
};

/// Labels every image as its condition: used to check the acceptance filter.
class OracleStub final : public ClassifierModel {
 public:
  std::size_t num_labels() const override { return 5; }
  ImageShape image_shape() const override { return {2, 2, 1}; }
  std::vector<ProbabilityVector> classify(std::span<const ImageTensor> images) override {
    std::vector<ProbabilityVector> out;
    for (const auto& x : images) {
      std::vector<double> p(5, 0.0);
      p[std::size_t(x.data()[0] * 4.0f + 0.5f)] = 1.0;
      out.emplace_back(p);
    }
    return out;
  }
};

class ConditionEcho final : public GeneratorModel {
 public:
  std::size_t latent_length() const override { return 3; }
  ImageShape image_shape() const override { return {2, 2, 1}; }
  std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                    std::span<const ConditionLabel> c) override {
    std::vector<ImageTensor> out;
    for (std::size_t i = 0; i < latents.size(); ++i) {
      out.emplace_back(ImageShape{2, 2, 1}, std::vector<float>(4, float(c[i].index) / 4.0f));
    }
    return out;
  }
};

AttackPair flat_pair(std::size_t n = 4, std::size_t c = 0) {
  return {"pair-000000", LatentVector(std::vector<float>(n, 0.25f)), {c, {}}, 1.0};
}

TEST(SearchConfig, Validation) {
  SearchConfig c;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.tau = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lambda = 1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.sigma0 = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_EQ(SearchConfig{}.population_size(16), 12u);
  EXPECT_THROW(parse_algorithm("cmaes"), ConfigError);
}

TEST(GeneratePairs, OracleStubAcceptsEverything) {
  ConditionEcho g;
  OracleStub f;
  std::mt19937_64 rng(1);
  const auto batch = generate_pairs(g, f, 50, rng);
  EXPECT_EQ(batch.pairs.size(), 50u);
  EXPECT_EQ(batch.attempts, 50u);
  EXPECT_DOUBLE_EQ(batch.acceptance_rate, 1.0);
  std::set<std::string> ids;
  for (const auto& p : batch.pairs) {
    ids.insert(p.pair_id);
    EXPECT_EQ(p.baseline_confidence, 1.0);
  }
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(batch.pairs.front().pair_id, "pair-000000");
}

TEST(GeneratePairs, IncompatibleModelsAreRejected) {
  FlatGenerator g;
  FixedClassifier f(5, 4);
  std::mt19937_64 rng(2);
  // Only condition 4 ever passes: acceptance ~ 1/5 still above 5%.
  EXPECT_NO_THROW(generate_pairs(g, f, 10, rng));
  FixedClassifier never(50, 49);  // 2% acceptance
  EXPECT_THROW(generate_pairs(g, never, 200, rng), IncompatibleModelsError);
}

TEST(EvoSeed, ImmediateEarlyFinish) {
  FlatGenerator g;
  FixedClassifier f(3, 2);  // never says 0
  SearchConfig config;
  config.epsilon = 0.3;
  const auto o = run_attack(g, f, flat_pair(4, 0), config);
  const std::size_t lambda = config.population_size(4);
  EXPECT_TRUE(o.success);
  EXPECT_EQ(o.generations_used, 1u);
  EXPECT_LE(o.evaluations_used, lambda);
  EXPECT_EQ(o.adversarial_label, 2u);
  ASSERT_TRUE(o.adversarial_seed);
  EXPECT_LE(linf_distance(*o.adversarial_seed, flat_pair().seed), 0.3);
  EXPECT_EQ(g.calls, 1u);
}

TEST(EvoSeed, ZeroEpsilonExhaustsBudget) {
  auto world = std::make_shared<const synthetic::PrototypeWorld>(synthetic::WorldParams{});
  synthetic::SyntheticGenerator g(world);
  synthetic::PrototypeClassifier f(world);
  std::mt19937_64 rng(3);
  const auto pairs = generate_pairs(g, f, 3, rng).pairs;
  for (auto algorithm : {Algorithm::kEvoSeed, Algorithm::kRandSeed}) {
    SearchConfig config;
    config.epsilon = 0.0;
    config.tau = 7;
    config.algorithm = algorithm;
    for (const auto& p : pairs) {
      const auto o = run_attack(g, f, p, config);
      EXPECT_FALSE(o.success);
      EXPECT_EQ(o.generations_used, 7u);
      EXPECT_EQ(o.evaluations_used, 7u * config.population_size(p.seed.size()));
      EXPECT_EQ(o.max_candidate_linf, 0.0);
      EXPECT_FALSE(o.adversarial_seed);
    }
  }
}

TEST(EvoSeed, TraceIsConsistent) {
  FlatGenerator g;
  FixedClassifier f(3, 0);  // never fooled
  SearchConfig config;
  config.tau = 25;
  const auto o = run_attack(g, f, flat_pair(), config);
  ASSERT_EQ(o.trace.size(), 25u);
  for (std::size_t i = 0; i < o.trace.size(); ++i) {
    EXPECT_EQ(o.trace[i].generation, i + 1);
    EXPECT_EQ(o.trace[i].evaluations, (i + 1) * config.population_size(4));
    if (i > 0) EXPECT_LE(o.trace[i].best_so_far, o.trace[i - 1].best_so_far);
    EXPECT_LE(o.trace[i].best_so_far, o.trace[i].best);
  }
  EXPECT_EQ(o.final_confidence, 1.0);
}

TEST(EvoSeed, ModelFailureCarriesPairId) {
  class Broken final : public ClassifierModel {
   public:
    std::size_t num_labels() const override { return 3; }
    ImageShape image_shape() const override { return {2, 2, 1}; }
    std::vector<ProbabilityVector> classify(std::span<const ImageTensor>) override {
      throw RemoteModelError("model_failure", "boom");
    }
  };
  FlatGenerator g;
  Broken f;
  try {
    run_attack(g, f, flat_pair(), SearchConfig{});
    FAIL() << "expected AttackError";
  } catch (const AttackError& e) {
    EXPECT_EQ(e.pair_id(), "pair-000000");
    try {
      std::rethrow_if_nested(e);
      FAIL() << "expected a nested cause";
    } catch (const RemoteModelError& inner) {
      EXPECT_EQ(inner.code(), "model_failure");
    }
  }
}

TEST(EvoSeed, ShapeMismatchIsIncompatible) {
  class Wide final : public ClassifierModel {
   public:
    std::size_t num_labels() const override { return 3; }
    ImageShape image_shape() const override { return {3, 3, 1}; }
    std::vector<ProbabilityVector> classify(std::span<const ImageTensor>) override { return {}; }
  };
  FlatGenerator g;
  Wide f;
  try {
    run_attack(g, f, flat_pair(), SearchConfig{});
    FAIL();
  } catch (const AttackError& e) {
    EXPECT_THROW(std::rethrow_if_nested(e), IncompatibleModelsError);
  }
}

TEST(RandSeed, UniformMomentsInsideBox) {
  // Candidates over 1e5 draws: per-coordinate mean within 0.01*eps of z.
  FlatGenerator g(4);
  FixedClassifier f(3, 0);
  const double eps = 0.4;
  AttackPair pair{"p", LatentVector({0.5f, -1.0f, 2.0f, 0.0f}), {0, {}}, 1.0};

  class Recorder final : public GeneratorModel {
   public:
    std::size_t latent_length() const override { return 4; }
    ImageShape image_shape() const override { return {2, 2, 1}; }
    std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                      std::span<const ConditionLabel>) override {
      seen.insert(seen.end(), latents.begin(), latents.end());
      return std::vector<ImageTensor>(latents.size(), ImageTensor({2, 2, 1}, std::vector<float>(4, 0.5f)));
    }
    std::vector<LatentVector> seen;
  } rec;
  SearchConfig config;
  config.epsilon = eps;
  config.lambda = 1000;
  config.tau = 100;
  config.algorithm = Algorithm::kRandSeed;
  const auto o = run_attack(rec, f, pair, config);
  ASSERT_EQ(rec.seen.size(), 100000u);
  std::vector<double> mean(4, 0.0);
  for (const auto& x : rec.seen) {
    ASSERT_LE(linf_distance(x, pair.seed), eps);
    for (int i = 0; i < 4; ++i) mean[i] += x[i];
  }
  for (int i = 0; i < 4; ++i) EXPECT_NEAR(mean[i] / 1e5, pair.seed[i], 0.01 * eps);
  EXPECT_LE(o.max_candidate_linf, eps);
}

TEST(RunAttack, DerivedStreamsAreDeterministic) {
  auto world = std::make_shared<const synthetic::PrototypeWorld>(synthetic::WorldParams{});
  synthetic::SyntheticGenerator g(world);
  synthetic::PrototypeClassifier f(world);
  std::mt19937_64 rng(9);
  const auto pairs = generate_pairs(g, f, 5, rng).pairs;
  SearchConfig config;
  config.epsilon = 0.2;
  config.tau = 30;
  for (const auto& p : pairs) {
    const auto a = run_attack(g, f, p, config);
    const auto b = run_attack(g, f, p, config);
    EXPECT_EQ(a.trace, b.trace);
    EXPECT_EQ(a.adversarial_seed, b.adversarial_seed);
  }
  EXPECT_NE(pair_stream_seed(0, "pair-000000"), pair_stream_seed(0, "pair-000001"));
  EXPECT_NE(pair_stream_seed(0, "pair-000000"), pair_stream_seed(1, "pair-000000"));
}

TEST(RunAttack, SuccessIsGenuineAndBoxed) {
  auto world = std::make_shared<const synthetic::PrototypeWorld>(synthetic::WorldParams{});
  synthetic::SyntheticGenerator g(world);
  synthetic::PrototypeClassifier f(world);
  std::mt19937_64 rng(10);
  const auto pairs = generate_pairs(g, f, 30, rng).pairs;
  SearchConfig config;
  config.epsilon = 0.5;
  std::size_t successes = 0;
  for (const auto& p : pairs) {
    const auto o = run_attack(g, f, p, config);
    EXPECT_LE(o.max_candidate_linf, 0.5);
    if (!o.success) continue;
    ++successes;
    const auto x = world->generate(*o.adversarial_seed, p.condition);
    const auto label = argmax_label(world->classify(x));
    EXPECT_NE(label, p.condition.index);
    EXPECT_EQ(label, *o.adversarial_label);
    EXPECT_TRUE(std::ranges::equal(x.data(), o.adversarial_image->data()));
  }
  EXPECT_GT(successes, 20u);
}

}  // namespace
