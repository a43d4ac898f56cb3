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

// Value types shared by the optimizer, the models and the attack drivers.
//
// Latents and images are stored as 32-bit floats: that is the precision of
// the EVT1 file format and of the backend wire codec, so a seed that is
// persisted or sent to a remote model is exactly the seed that was scored.

#ifndef EVOSEED_TENSOR_HPP_
#define EVOSEED_TENSOR_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evoseed/errors.hpp"

namespace evoseed {

namespace detail {

inline void require_finite(std::span<const float> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw InvalidInputError(std::string(what) + ": non-finite entry at index " +
                              std::to_string(i));
    }
  }
}

}  // namespace detail

/// Flat latent seed vector. Never empty, always finite.
class LatentVector {
 public:
  LatentVector() = default;

  explicit LatentVector(std::vector<float> values) : values_(std::move(values)) {
    if (values_.empty()) throw InvalidInputError("latent vector must have length >= 1");
    detail::require_finite(values_, "latent vector");
  }

  LatentVector(std::initializer_list<float> values)
      : LatentVector(std::vector<float>(values)) {}

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }
  float operator[](std::size_t i) const { return values_[i]; }
  std::span<const float> values() const noexcept { return values_; }
  const std::vector<float>& vector() const noexcept { return values_; }

  friend bool operator==(const LatentVector&, const LatentVector&) = default;

 private:
  std::vector<float> values_;
};

/// Dimensions of an image, row-major (row, column, channel).
struct ImageShape {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;

  std::size_t size() const noexcept { return height * width * channels; }
  bool valid() const noexcept { return height > 0 && width > 0 && channels > 0; }

  friend bool operator==(const ImageShape&, const ImageShape&) = default;
};

inline std::string to_string(const ImageShape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" +
         std::to_string(s.channels);
}

/// Generated sample with every intensity in [0, 1].
class ImageTensor {
 public:
  ImageTensor() = default;

  ImageTensor(ImageShape shape, std::vector<float> data)
      : shape_(shape), data_(std::move(data)) {
    if (!shape_.valid()) throw InvalidInputError("image dimensions must be positive");
    if (data_.size() != shape_.size()) {
      throw DimensionError("image data length " + std::to_string(data_.size()) +
                           " does not match shape " + to_string(shape_));
    }
    for (std::size_t i = 0; i < data_.size(); ++i) {
      // NaN fails both comparisons.
      if (!(data_[i] >= 0.0f && data_[i] <= 1.0f)) {
        throw InvalidInputError("image entry " + std::to_string(i) + " outside [0,1]");
      }
    }
  }

  const ImageShape& shape() const noexcept { return shape_; }
  std::size_t height() const noexcept { return shape_.height; }
  std::size_t width() const noexcept { return shape_.width; }
  std::size_t channels() const noexcept { return shape_.channels; }
  std::size_t size() const noexcept { return data_.size(); }

  float at(std::size_t row, std::size_t col, std::size_t ch) const {
    return data_[(row * shape_.width + col) * shape_.channels + ch];
  }
  std::span<const float> data() const noexcept { return data_; }

  friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

 private:
  ImageShape shape_;
  std::vector<float> data_;
};

inline constexpr double kProbabilitySumTolerance = 1e-6;

/// Per-label classifier confidence: nonnegative, sums to one.
class ProbabilityVector {
 public:
  ProbabilityVector() = default;

  explicit ProbabilityVector(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw InvalidInputError("probability vector must be non-empty");
    double sum = 0.0;
    for (double p : probs_) {
      if (!std::isfinite(p) || p < 0.0) {
        throw InvalidInputError("probabilities must be finite and nonnegative");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      throw InvalidInputError("probabilities sum to " + std::to_string(sum) + ", not 1");
    }
  }

  /// Divides nonnegative scores by their sum.
  static ProbabilityVector normalized(std::vector<double> scores) {
    double sum = 0.0;
    for (double s : scores) {
      if (!std::isfinite(s) || s < 0.0) {
        throw InvalidInputError("scores must be finite and nonnegative");
      }
      sum += s;
    }
    if (!(sum > 0.0)) throw InvalidInputError("scores sum to zero");
    for (double& s : scores) s /= sum;
    return ProbabilityVector(std::move(scores));
  }

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> values() const noexcept { return probs_; }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  std::vector<double> probs_;
};

/// Condition c as a 0-based label index.
struct ConditionLabel {
  std::size_t index = 0;
  std::string display_name;

  friend bool operator==(const ConditionLabel&, const ConditionLabel&) = default;
};

/// L-infinity ball of radius epsilon around the unperturbed seed.
class SearchBox {
 public:
  SearchBox() = default;

  SearchBox(LatentVector center, double epsilon)
      : center_(std::move(center)), epsilon_(epsilon) {
    // +inf is allowed and means unconstrained.
    if (!(epsilon_ >= 0.0)) throw InvalidInputError("box epsilon must be >= 0");
    lower_.resize(center_.size());
    upper_.resize(center_.size());
    for (std::size_t i = 0; i < center_.size(); ++i) {
      const double c = center_[i];
      // Round each bound toward the center so it stays admissible in float.
      float lo = static_cast<float>(c - epsilon_);
      if (c - static_cast<double>(lo) > epsilon_) {
        lo = std::nextafter(lo, std::numeric_limits<float>::infinity());
      }
      float hi = static_cast<float>(c + epsilon_);
      if (static_cast<double>(hi) - c > epsilon_) {
        hi = std::nextafter(hi, -std::numeric_limits<float>::infinity());
      }
      lower_[i] = lo;
      upper_[i] = hi;
    }
  }

  const LatentVector& center() const noexcept { return center_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t size() const noexcept { return center_.size(); }

  /// Largest admissible float bounds per coordinate.
  std::span<const float> lower() const noexcept { return lower_; }
  std::span<const float> upper() const noexcept { return upper_; }

 private:
  LatentVector center_;
  double epsilon_ = 0.0;
  std::vector<float> lower_;
  std::vector<float> upper_;
};

inline double linf_distance(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) {
    throw DimensionError("linf_distance: lengths " + std::to_string(a.size()) + " and " +
                         std::to_string(b.size()));
  }
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d = std::max(d, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  }
  return d;
}

inline double linf_distance(const LatentVector& a, const LatentVector& b) {
  return linf_distance(a.values(), b.values());
}

/// Per-axis saturation into the box.
inline std::vector<float> clip_values_to_box(std::span<const float> candidate,
                                             const SearchBox& box) {
  if (candidate.size() != box.size()) {
    throw DimensionError("clip_to_box: candidate length " + std::to_string(candidate.size()) +
                         " vs box length " + std::to_string(box.size()));
  }
  detail::require_finite(candidate, "clip_to_box candidate");
  std::vector<float> out(candidate.size());
  const auto lo = box.lower();
  const auto hi = box.upper();
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    out[i] = std::min(std::max(candidate[i], lo[i]), hi[i]);
  }
  return out;
}

inline LatentVector clip_to_box(const LatentVector& candidate, const SearchBox& box) {
  return LatentVector(clip_values_to_box(candidate.values(), box));
}

inline bool inside_box(std::span<const float> candidate, const SearchBox& box) {
  return candidate.size() == box.size() &&
         linf_distance(candidate, box.center().values()) <= box.epsilon();
}

/// Smallest index attaining the maximum.
inline std::size_t argmax_label(std::span<const double> probs) {
  if (probs.empty()) throw InvalidInputError("argmax_label: empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return best;
}

inline std::size_t argmax_label(const ProbabilityVector& p) { return argmax_label(p.values()); }

}  // namespace evoseed

#endif  // EVOSEED_TENSOR_HPP_
