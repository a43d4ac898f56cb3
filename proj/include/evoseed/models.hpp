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

// Generator / classifier interfaces consumed by the attack drivers.
//
// The drivers are templates constrained by the concepts below. The abstract
// GeneratorModel / ClassifierModel bases satisfy them and are what the
// campaign runner uses to switch between builtin and backend models.
//
// Generators must be pure functions of (latent, condition): any internal
// noise has to be derived from the latent.

#ifndef EVOSEED_MODELS_HPP_
#define EVOSEED_MODELS_HPP_

#include <concepts>
#include <cstddef>
#include <span>
#include <vector>

#include "evoseed/tensor.hpp"

namespace evoseed {

template <typename G>
concept Generator = requires(G& g, std::span<const LatentVector> latents,
                             std::span<const ConditionLabel> conditions) {
  { g.latent_length() } -> std::convertible_to<std::size_t>;
  { g.image_shape() } -> std::convertible_to<ImageShape>;
  { g.generate(latents, conditions) } -> std::same_as<std::vector<ImageTensor>>;
};

template <typename F>
concept Classifier = requires(F& f, std::span<const ImageTensor> images) {
  { f.num_labels() } -> std::convertible_to<std::size_t>;
  { f.image_shape() } -> std::convertible_to<ImageShape>;
  { f.classify(images) } -> std::same_as<std::vector<ProbabilityVector>>;
};

class GeneratorModel {
 public:
  virtual ~GeneratorModel() = default;
  virtual std::size_t latent_length() const = 0;
  virtual ImageShape image_shape() const = 0;
  virtual std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                            std::span<const ConditionLabel> conditions) = 0;
};

class ClassifierModel {
 public:
  virtual ~ClassifierModel() = default;
  virtual std::size_t num_labels() const = 0;
  virtual ImageShape image_shape() const = 0;
  virtual std::vector<ProbabilityVector> classify(std::span<const ImageTensor> images) = 0;
};

static_assert(Generator<GeneratorModel>);
static_assert(Classifier<ClassifierModel>);

}  // namespace evoseed

#endif  // EVOSEED_MODELS_HPP_
