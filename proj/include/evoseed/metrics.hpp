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

#ifndef EVOSEED_METRICS_HPP_
#define EVOSEED_METRICS_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "evoseed/errors.hpp"
#include "evoseed/models.hpp"
#include "evoseed/search.hpp"
#include "evoseed/tensor.hpp"

namespace evoseed::metrics {

/// Fraction of successful outcomes.
inline double attack_success_rate(std::span<const SearchOutcome> outcomes) {
  if (outcomes.empty()) throw InvalidInputError("attack_success_rate: no outcomes");
  const auto hits = std::count_if(outcomes.begin(), outcomes.end(),
                                  [](const SearchOutcome& o) { return o.success; });
  return double(hits) / double(outcomes.size());
}

inline double attack_success_rate(std::span<const bool> successes) {
  if (successes.empty()) throw InvalidInputError("attack_success_rate: no outcomes");
  return double(std::count(successes.begin(), successes.end(), true)) / double(successes.size());
}

inline constexpr std::size_t kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;

namespace detail {

inline std::array<double, kSsimWindow> gaussian_window_1d() {
  std::array<double, kSsimWindow> w{};
  const double half = (kSsimWindow - 1) / 2.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < kSsimWindow; ++i) {
    const double d = double(i) - half;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

}  // namespace detail

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), C1 = (0.01 L)^2,
/// C2 = (0.03 L)^2, L = 1. Only windows fully inside the image are used;
/// the per-channel means are averaged.
inline double ssim(const ImageTensor& a, const ImageTensor& b) {
  if (!(a.shape() == b.shape())) {
    throw DimensionError("ssim: shapes " + to_string(a.shape()) + " and " + to_string(b.shape()));
  }
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw InvalidInputError("ssim: image " + to_string(a.shape()) + " is smaller than the " +
                            std::to_string(kSsimWindow) + "x" + std::to_string(kSsimWindow) +
                            " window");
  }
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  static const auto w = detail::gaussian_window_1d();
  const std::size_t rows = a.height() - kSsimWindow + 1;
  const std::size_t cols = a.width() - kSsimWindow + 1;

  double total = 0.0;
  for (std::size_t ch = 0; ch < a.channels(); ++ch) {
    double channel_sum = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        double mu_a = 0.0, mu_b = 0.0, aa = 0.0, bb = 0.0, ab = 0.0;
        for (std::size_t i = 0; i < kSsimWindow; ++i) {
          for (std::size_t j = 0; j < kSsimWindow; ++j) {
            const double wij = w[i] * w[j];
            const double va = a.at(r + i, c + j, ch);
            const double vb = b.at(r + i, c + j, ch);
            mu_a += wij * va;
            mu_b += wij * vb;
            aa += wij * va * va;
            bb += wij * vb * vb;
            ab += wij * va * vb;
          }
        }
        const double var_a = aa - mu_a * mu_a;
        const double var_b = bb - mu_b * mu_b;
        const double cov = ab - mu_a * mu_b;
        channel_sum += ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)) /
                       ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
      }
    }
    total += channel_sum / double(rows * cols);
  }
  return total / double(a.channels());
}

/// An adversarial image together with the condition it was generated for.
struct LabeledImage {
  ImageTensor image;
  std::size_t condition = 0;
};

struct TransferSource {
  std::string name;
  std::vector<LabeledImage> images;
};

struct NamedClassifier {
  std::string name;
  ClassifierModel* classifier = nullptr;
};

/// Row i: adversarial images found against source classifier i; column j:
/// evaluation classifier j. Rows with no images are absent (nullopt).
struct TransferMatrix {
  std::vector<std::string> source_labels;
  std::vector<std::string> eval_labels;
  std::vector<std::vector<std::optional<double>>> asr;
};

/// Entry (i, j) is the fraction of source-i images that classifier j labels
/// with something other than their condition.
inline TransferMatrix transfer_matrix(std::span<const TransferSource> sources,
                                      std::span<const NamedClassifier> classifiers) {
  TransferMatrix m;
  for (const auto& c : classifiers) {
    if (c.classifier == nullptr) throw InvalidInputError("transfer_matrix: null classifier");
    m.eval_labels.push_back(c.name);
  }
  for (const auto& src : sources) {
    m.source_labels.push_back(src.name);
    std::vector<std::optional<double>> row(classifiers.size());
    if (!src.images.empty()) {
      std::vector<ImageTensor> images;
      images.reserve(src.images.size());
      for (const auto& li : src.images) images.push_back(li.image);
      for (std::size_t j = 0; j < classifiers.size(); ++j) {
        const auto probs = classifiers[j].classifier->classify(images);
        if (probs.size() != images.size()) {
          throw ContractViolationError("classifier " + classifiers[j].name +
                                       " returned the wrong batch length");
        }
        std::size_t fooled = 0;
        for (std::size_t k = 0; k < probs.size(); ++k) {
          if (argmax_label(probs[k]) != src.images[k].condition) ++fooled;
        }
        row[j] = double(fooled) / double(images.size());
      }
    }
    m.asr.push_back(std::move(row));
  }
  return m;
}

/// Running minimum of per-generation best fitness.
inline std::vector<std::pair<std::size_t, double>> trace_best_so_far(
    std::span<const TraceEntry> trace) {
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(trace.size());
  double best = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    best = i == 0 ? trace[i].best : std::min(best, trace[i].best);
    out.emplace_back(trace[i].generation, best);
  }
  return out;
}

inline std::vector<double> running_minimum(std::span<const double> values) {
  std::vector<double> out(values.begin(), values.end());
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = std::min(out[i], out[i - 1]);
  return out;
}

}  // namespace evoseed::metrics

#endif  // EVOSEED_METRICS_HPP_
