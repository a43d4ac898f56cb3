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

// Desk-scale stand-ins for the generator and classifier, plus the optimizer
// benchmark functions.
//
// The prototype world generates x = clamp(prototype[c] + M z, 0, 1) with a
// fixed pseudo-random mixing matrix M, and classifies by a softmax over
// negative squared distances to the prototypes.

#ifndef EVOSEED_SYNTHETIC_HPP_
#define EVOSEED_SYNTHETIC_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "evoseed/errors.hpp"
#include "evoseed/models.hpp"
#include "evoseed/tensor.hpp"

namespace evoseed::synthetic {

struct WorldParams {
  std::uint64_t seed = 2024;
  std::size_t latent_length = 16;
  std::size_t height = 12;
  std::size_t width = 12;
  std::size_t channels = 3;
  std::size_t num_labels = 10;
  /// Scale of the mixing matrix entries.
  double gain = 0.25;
  double temperature = 4.0;
  /// Minimum pairwise L2 distance between prototypes.
  double separation = 3.0;
  /// Per-pixel spread of the shared gray background behind the prototypes.
  double background_spread = 0.1;

  ImageShape image_shape() const { return {height, width, channels}; }
  friend bool operator==(const WorldParams&, const WorldParams&) = default;
};

inline void validate(const WorldParams& p) {
  if (p.latent_length == 0) throw InvalidInputError("world latent_length must be >= 1");
  if (!p.image_shape().valid()) throw InvalidInputError("world image dims must be positive");
  if (p.num_labels < 2) throw InvalidInputError("world needs at least 2 labels");
  if (!(p.gain > 0.0) || !(p.temperature > 0.0)) {
    throw InvalidInputError("world gain and temperature must be > 0");
  }
  if (!(p.separation > 0.0) || !(p.background_spread >= 0.0)) {
    throw InvalidInputError("world separation must be > 0 and background_spread >= 0");
  }
}

/// Immutable generator/classifier pair sharing one set of prototypes.
class PrototypeWorld {
 public:
  explicit PrototypeWorld(const WorldParams& params) : params_(params) {
    validate(params_);
    const std::size_t d = params_.image_shape().size();
    const std::size_t n = params_.latent_length;
    const std::size_t k = params_.num_labels;
    std::mt19937_64 rng(params_.seed);
    std::normal_distribution<double> normal(0.0, 1.0);

    mixing_.resize(d * n);
    for (double& m : mixing_) m = params_.gain * normal(rng);

    std::vector<double> background(d);
    for (double& b : background) b = 0.5 + params_.background_spread * normal(rng);

    // Offsets of length separation/sqrt(2) are nearly orthogonal in high
    // dimension, so prototypes land roughly `separation` apart.
    std::vector<double> offsets(k * d);
    for (std::size_t label = 0; label < k; ++label) {
      double norm = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        offsets[label * d + i] = normal(rng);
        norm += offsets[label * d + i] * offsets[label * d + i];
      }
      const double scale = params_.separation / std::sqrt(2.0) / std::sqrt(norm);
      for (std::size_t i = 0; i < d; ++i) offsets[label * d + i] *= scale;
    }

    prototypes_.resize(k * d);
    double stretch = 1.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
      for (std::size_t label = 0; label < k; ++label) {
        for (std::size_t i = 0; i < d; ++i) {
          prototypes_[label * d + i] = static_cast<float>(
              std::clamp(background[i] + stretch * offsets[label * d + i], 0.0, 1.0));
        }
      }
      const double closest = min_prototype_distance();
      if (closest >= params_.separation) break;
      // Clamping shortened some offsets; push them apart and retry.
      stretch *= 1.01 * params_.separation / std::max(closest, 1e-9);
    }
    if (min_prototype_distance() < params_.separation) {
      throw InvalidInputError("cannot place prototypes " + std::to_string(params_.separation) +
                              " apart inside [0,1]^" + std::to_string(d));
    }
  }

  const WorldParams& params() const noexcept { return params_; }
  std::size_t latent_length() const noexcept { return params_.latent_length; }
  ImageShape image_shape() const noexcept { return params_.image_shape(); }
  std::size_t num_labels() const noexcept { return params_.num_labels; }
  std::size_t pixel_count() const noexcept { return params_.image_shape().size(); }

  /// Row-major (pixel, latent) mixing matrix.
  std::span<const double> mixing() const noexcept { return mixing_; }

  std::span<const float> prototype(std::size_t label) const {
    if (label >= params_.num_labels) {
      throw DimensionError("label " + std::to_string(label) + " >= K=" +
                           std::to_string(params_.num_labels));
    }
    return std::span<const float>(prototypes_).subspan(label * pixel_count(), pixel_count());
  }

  ImageTensor prototype_image(std::size_t label) const {
    const auto p = prototype(label);
    return ImageTensor(image_shape(), std::vector<float>(p.begin(), p.end()));
  }

  double min_prototype_distance() const {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t d = pixel_count();
    for (std::size_t a = 0; a < params_.num_labels; ++a) {
      for (std::size_t b = a + 1; b < params_.num_labels; ++b) {
        double s = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
          const double diff = double(prototypes_[a * d + i]) - double(prototypes_[b * d + i]);
          s += diff * diff;
        }
        best = std::min(best, std::sqrt(s));
      }
    }
    return best;
  }

  /// clamp(prototype[c] + M z, 0, 1).
  ImageTensor generate(const LatentVector& z, const ConditionLabel& c) const {
    if (z.size() != params_.latent_length) {
      throw DimensionError("latent length " + std::to_string(z.size()) + " != n=" +
                           std::to_string(params_.latent_length));
    }
    const auto base = prototype(c.index);
    const std::size_t n = params_.latent_length;
    std::vector<float> out(pixel_count());
    for (std::size_t i = 0; i < out.size(); ++i) {
      double v = base[i];
      const double* row = mixing_.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) v += row[j] * z[j];
      out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return ImageTensor(image_shape(), std::move(out));
  }

  /// softmax_k(-||x - prototype[k]||^2 / T).
  ProbabilityVector classify(const ImageTensor& x) const {
    return classify_with(x, prototypes_, params_.temperature);
  }

  /// Same rule against an arbitrary prototype set of this world's shape.
  ProbabilityVector classify_with(const ImageTensor& x, std::span<const float> prototypes,
                                  double temperature) const {
    if (!(x.shape() == image_shape())) {
      throw DimensionError("image shape " + to_string(x.shape()) + " != world shape " +
                           to_string(image_shape()));
    }
    const std::size_t d = pixel_count();
    const std::size_t k = prototypes.size() / d;
    std::vector<double> logits(k);
    const auto data = x.data();
    for (std::size_t label = 0; label < k; ++label) {
      double s = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double diff = double(data[i]) - double(prototypes[label * d + i]);
        s += diff * diff;
      }
      logits[label] = -s / temperature;
    }
    const double top = *std::max_element(logits.begin(), logits.end());
    for (double& l : logits) l = std::exp(l - top);
    return ProbabilityVector::normalized(std::move(logits));
  }

 private:
  WorldParams params_;
  std::vector<double> mixing_;
  std::vector<float> prototypes_;
};

/// Generator view of a prototype world.
class SyntheticGenerator final : public GeneratorModel {
 public:
  explicit SyntheticGenerator(std::shared_ptr<const PrototypeWorld> world)
      : world_(std::move(world)) {}

  std::size_t latent_length() const override { return world_->latent_length(); }
  ImageShape image_shape() const override { return world_->image_shape(); }

  std::vector<ImageTensor> generate(std::span<const LatentVector> latents,
                                    std::span<const ConditionLabel> conditions) override {
    if (latents.size() != conditions.size()) {
      throw DimensionError("generate: " + std::to_string(latents.size()) + " latents vs " +
                           std::to_string(conditions.size()) + " conditions");
    }
    std::vector<ImageTensor> out;
    out.reserve(latents.size());
    for (std::size_t i = 0; i < latents.size(); ++i) {
      out.push_back(world_->generate(latents[i], conditions[i]));
    }
    return out;
  }

 private:
  std::shared_ptr<const PrototypeWorld> world_;
};

/// Nearest-prototype softmax classifier. Variants with jittered prototypes
/// act as distinct classifiers over the same image distribution.
class PrototypeClassifier final : public ClassifierModel {
 public:
  explicit PrototypeClassifier(std::shared_ptr<const PrototypeWorld> world)
      : world_(std::move(world)), temperature_(world_->params().temperature) {
    const std::size_t k = world_->num_labels();
    for (std::size_t label = 0; label < k; ++label) {
      const auto p = world_->prototype(label);
      prototypes_.insert(prototypes_.end(), p.begin(), p.end());
    }
  }

  /// Prototypes moved by jitter * N(0,1) per pixel (clamped to [0,1]).
  PrototypeClassifier(std::shared_ptr<const PrototypeWorld> world, std::uint64_t seed,
                      double jitter, double temperature)
      : PrototypeClassifier(std::move(world)) {
    if (!(temperature > 0.0)) throw InvalidInputError("classifier temperature must be > 0");
    if (!(jitter >= 0.0)) throw InvalidInputError("classifier jitter must be >= 0");
    temperature_ = temperature;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (float& p : prototypes_) {
      p = static_cast<float>(std::clamp(double(p) + jitter * normal(rng), 0.0, 1.0));
    }
  }

  std::size_t num_labels() const override { return world_->num_labels(); }
  ImageShape image_shape() const override { return world_->image_shape(); }
  double temperature() const noexcept { return temperature_; }

  ProbabilityVector classify_one(const ImageTensor& x) const {
    return world_->classify_with(x, prototypes_, temperature_);
  }

  std::vector<ProbabilityVector> classify(std::span<const ImageTensor> images) override {
    std::vector<ProbabilityVector> out;
    out.reserve(images.size());
    for (const auto& x : images) out.push_back(classify_one(x));
    return out;
  }

 private:
  std::shared_ptr<const PrototypeWorld> world_;
  std::vector<float> prototypes_;
  double temperature_;
};

inline double bench_sphere(std::span<const float> x) {
  double s = 0.0;
  for (float v : x) s += double(v) * double(v);
  return s;
}

inline double bench_rosenbrock(std::span<const float> x) {
  if (x.size() < 2) throw InvalidInputError("rosenbrock needs n >= 2");
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double xi = x[i];
    const double next = x[i + 1];
    s += 100.0 * (next - xi * xi) * (next - xi * xi) + (1.0 - xi) * (1.0 - xi);
  }
  return s;
}

}  // namespace evoseed::synthetic

#endif  // EVOSEED_SYNTHETIC_HPP_
