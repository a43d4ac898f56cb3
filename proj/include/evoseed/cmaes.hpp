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

// Box-constrained CMA-ES with an ask/tell interface.
//
// Strategy constants are the tutorial defaults (Hansen, "The CMA Evolution
// Strategy: A Tutorial"). Samples are clipped once into the search box and
// the clipped points are what the caller scores and what the update uses.
// Candidates are float32 latents; mean, paths and covariance are double.

#ifndef EVOSEED_CMAES_HPP_
#define EVOSEED_CMAES_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "evoseed/errors.hpp"
#include "evoseed/tensor.hpp"

namespace evoseed {

inline constexpr double kSigmaFloor = 1e-12;
inline constexpr double kSigmaCeiling = 1e12;
inline constexpr double kEigenvalueFloor = 1e-14;

/// lambda = floor(4 + 3 ln n), never below 4.
inline std::size_t default_population_size(std::size_t n) {
  if (n == 0) throw InvalidInputError("population size needs dimension n >= 1");
  const auto lambda = static_cast<std::size_t>(std::floor(4.0 + 3.0 * std::log(static_cast<double>(n))));
  return std::max<std::size_t>(lambda, 4);
}

struct CmaParams {
  std::size_t n = 0;
  std::size_t lambda = 0;
  std::size_t mu = 0;
  std::vector<double> weights;
  double mu_eff = 0.0;
  double c_sigma = 0.0;
  double d_sigma = 0.0;
  double c_c = 0.0;
  double c_1 = 0.0;
  double c_mu = 0.0;
  /// E||N(0, I)||.
  double chi_n = 0.0;
  /// Generations between eigendecompositions of C.
  std::size_t eigen_interval = 1;

  static CmaParams defaults(std::size_t n, std::size_t lambda) {
    if (n == 0) throw InvalidInputError("CMA-ES dimension must be >= 1");
    if (lambda < 2) throw InvalidInputError("CMA-ES population size must be >= 2");
    CmaParams p;
    p.n = n;
    p.lambda = lambda;
    p.mu = lambda / 2;
    const double dn = static_cast<double>(n);

    p.weights.resize(p.mu);
    for (std::size_t i = 0; i < p.mu; ++i) {
      p.weights[i] = std::log((lambda + 1.0) / 2.0) - std::log(i + 1.0);
    }
    const double sum = std::accumulate(p.weights.begin(), p.weights.end(), 0.0);
    double sum_sq = 0.0;
    for (double& w : p.weights) {
      w /= sum;
      sum_sq += w * w;
    }
    p.mu_eff = 1.0 / sum_sq;

    p.c_sigma = (p.mu_eff + 2.0) / (dn + p.mu_eff + 5.0);
    p.d_sigma = 1.0 + 2.0 * std::max(0.0, std::sqrt((p.mu_eff - 1.0) / (dn + 1.0)) - 1.0) +
                p.c_sigma;
    p.c_c = (4.0 + p.mu_eff / dn) / (dn + 4.0 + 2.0 * p.mu_eff / dn);
    p.c_1 = 2.0 / ((dn + 1.3) * (dn + 1.3) + p.mu_eff);
    p.c_mu = std::min(1.0 - p.c_1, 2.0 * (p.mu_eff - 2.0 + 1.0 / p.mu_eff) /
                                       ((dn + 2.0) * (dn + 2.0) + p.mu_eff));
    p.chi_n = std::sqrt(dn) * (1.0 - 1.0 / (4.0 * dn) + 1.0 / (21.0 * dn * dn));
    p.eigen_interval = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::floor(1.0 / (10.0 * dn * (p.c_1 + p.c_mu)))));
    return p;
  }
};

struct ScoredCandidate {
  LatentVector candidate;
  /// Lower is better.
  double fitness = 0.0;
};

struct CmaOptions {
  /// Population size; default_population_size(n) when empty.
  std::optional<std::size_t> lambda;
  /// Cumulative step-size adaptation. Disabling it is only useful for
  /// checking that the benchmarks notice.
  bool adapt_step_size = true;
};

class CmaEs {
 public:
  using Vector = Eigen::VectorXd;
  using Matrix = Eigen::MatrixXd;

  CmaEs(const LatentVector& center, double sigma0, double epsilon, CmaOptions options = {})
      : options_(options) {
    if (center.empty()) throw InvalidInputError("CMA-ES center must be non-empty");
    if (!(sigma0 > 0.0) || !std::isfinite(sigma0)) {
      throw InvalidInputError("CMA-ES sigma0 must be positive and finite");
    }
    const std::size_t n = center.size();
    params_ = CmaParams::defaults(n, options.lambda.value_or(default_population_size(n)));
    box_ = SearchBox(center, epsilon);
    mean_ = Vector(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) mean_[static_cast<Eigen::Index>(i)] = center[i];
    sigma_ = sigma0;
    cov_ = Matrix::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    basis_ = cov_;
    axis_scales_ = Vector::Ones(static_cast<Eigen::Index>(n));
    p_sigma_ = Vector::Zero(static_cast<Eigen::Index>(n));
    p_c_ = Vector::Zero(static_cast<Eigen::Index>(n));
  }

  /// Draws lambda candidates, clipped into the box. Must be followed by tell().
  template <typename Rng>
  std::vector<LatentVector> ask(Rng& rng) {
    if (!pending_.empty()) throw UsageError("CMA-ES ask() called twice without tell()");
    const auto n = static_cast<Eigen::Index>(params_.n);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector xi(n);
    std::vector<float> raw(params_.n);
    pending_.reserve(params_.lambda);
    for (std::size_t k = 0; k < params_.lambda; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) xi[i] = normal(rng);
      const Vector x = mean_ + sigma_ * (basis_ * axis_scales_.cwiseProduct(xi));
      for (Eigen::Index i = 0; i < n; ++i) {
        // Clamp in double first so huge samples cannot overflow the float cast.
        const double lo = box_.lower()[static_cast<std::size_t>(i)];
        const double hi = box_.upper()[static_cast<std::size_t>(i)];
        raw[static_cast<std::size_t>(i)] = static_cast<float>(std::clamp(x[i], lo, hi));
      }
      pending_.emplace_back(clip_values_to_box(raw, box_));
    }
    return pending_;
  }

  /// Ranks the scored population and updates mean, paths, covariance and step size.
  /// Entries must be the candidates of the preceding ask(), in submission order.
  void tell(std::span<const ScoredCandidate> scored) {
    if (pending_.empty()) throw UsageError("CMA-ES tell() without a preceding ask()");
    if (scored.size() != params_.lambda) {
      throw UsageError("CMA-ES tell() expects " + std::to_string(params_.lambda) +
                       " entries, got " + std::to_string(scored.size()));
    }
    for (std::size_t k = 0; k < scored.size(); ++k) {
      if (!std::isfinite(scored[k].fitness)) {
        throw InvalidInputError("CMA-ES tell(): non-finite fitness at index " +
                                std::to_string(k));
      }
      if (!(scored[k].candidate == pending_[k])) {
        throw UsageError("CMA-ES tell(): entry " + std::to_string(k) +
                         " is not the candidate emitted by ask()");
      }
    }
    std::vector<double> fitness(scored.size());
    for (std::size_t k = 0; k < scored.size(); ++k) fitness[k] = scored[k].fitness;
    update(fitness);
  }

  /// Same as tell() with fitness listed in the order ask() returned candidates.
  void tell(std::span<const double> fitness) {
    if (pending_.empty()) throw UsageError("CMA-ES tell() without a preceding ask()");
    if (fitness.size() != params_.lambda) {
      throw UsageError("CMA-ES tell() expects " + std::to_string(params_.lambda) +
                       " fitness values, got " + std::to_string(fitness.size()));
    }
    for (std::size_t k = 0; k < fitness.size(); ++k) {
      if (!std::isfinite(fitness[k])) {
        throw InvalidInputError("CMA-ES tell(): non-finite fitness at index " +
                                std::to_string(k));
      }
    }
    update(fitness);
  }

  const CmaParams& params() const noexcept { return params_; }
  const SearchBox& box() const noexcept { return box_; }
  const Vector& mean() const noexcept { return mean_; }
  double sigma() const noexcept { return sigma_; }
  const Matrix& covariance() const noexcept { return cov_; }
  const Vector& p_sigma() const noexcept { return p_sigma_; }
  const Vector& p_c() const noexcept { return p_c_; }
  std::size_t generation() const noexcept { return generation_; }
  std::size_t lambda() const noexcept { return params_.lambda; }
  std::size_t dimension() const noexcept { return params_.n; }

 private:
  void update(std::span<const double> fitness) {
    const auto n = static_cast<Eigen::Index>(params_.n);
    const std::size_t lambda = params_.lambda;

    std::vector<std::size_t> order(lambda);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return fitness[a] < fitness[b]; });

    // Steps of the best mu (clipped) candidates, in units of sigma.
    Matrix steps(n, static_cast<Eigen::Index>(params_.mu));
    for (std::size_t i = 0; i < params_.mu; ++i) {
      const auto& x = pending_[order[i]];
      for (Eigen::Index j = 0; j < n; ++j) {
        steps(j, static_cast<Eigen::Index>(i)) =
            (static_cast<double>(x[static_cast<std::size_t>(j)]) - mean_[j]) / sigma_;
      }
    }
    const Eigen::Map<const Vector> w(params_.weights.data(),
                                     static_cast<Eigen::Index>(params_.mu));
    const Vector y_w = steps * w;
    mean_ += sigma_ * y_w;

    // C^{-1/2} y_w via the cached eigenbasis.
    const Vector inv_sqrt_y = basis_ * (basis_.transpose() * y_w).cwiseQuotient(axis_scales_);
    const double cs = params_.c_sigma;
    p_sigma_ = (1.0 - cs) * p_sigma_ + std::sqrt(cs * (2.0 - cs) * params_.mu_eff) * inv_sqrt_y;

    ++generation_;
    const double ps_norm = p_sigma_.norm();
    const double decay = 1.0 - std::pow(1.0 - cs, 2.0 * static_cast<double>(generation_));
    const bool h_sigma = ps_norm / std::sqrt(decay) <
                         (1.4 + 2.0 / (static_cast<double>(params_.n) + 1.0)) * params_.chi_n;

    const double cc = params_.c_c;
    p_c_ = (1.0 - cc) * p_c_;
    if (h_sigma) p_c_ += std::sqrt(cc * (2.0 - cc) * params_.mu_eff) * y_w;

    const double c1 = params_.c_1;
    const double cmu = params_.c_mu;
    const double delta_h = h_sigma ? 0.0 : cc * (2.0 - cc);
    Matrix rank_mu = steps * w.asDiagonal() * steps.transpose();
    cov_ = (1.0 - c1 - cmu + c1 * delta_h) * cov_ + c1 * (p_c_ * p_c_.transpose()) +
           cmu * rank_mu;
    cov_ = 0.5 * (cov_ + cov_.transpose());

    if (options_.adapt_step_size) {
      sigma_ *= std::exp((cs / params_.d_sigma) * (ps_norm / params_.chi_n - 1.0));
    }
    sigma_ = std::clamp(sigma_, kSigmaFloor, kSigmaCeiling);

    if (generation_ - last_decomposition_ >= params_.eigen_interval) decompose();
    pending_.clear();
  }

  void decompose() {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(cov_);
    if (solver.info() != Eigen::Success || !solver.eigenvalues().allFinite()) {
      throw NumericalError("CMA-ES eigendecomposition failed at generation " +
                           std::to_string(generation_) + " (sigma=" + std::to_string(sigma_) +
                           ", trace(C)=" + std::to_string(cov_.trace()) + ")");
    }
    Vector eig = solver.eigenvalues();
    const bool floored = eig.minCoeff() < kEigenvalueFloor;
    eig = eig.cwiseMax(kEigenvalueFloor);
    basis_ = solver.eigenvectors();
    if (floored) {
      cov_ = basis_ * eig.asDiagonal() * basis_.transpose();
      cov_ = 0.5 * (cov_ + cov_.transpose());
    }
    axis_scales_ = eig.cwiseSqrt();
    last_decomposition_ = generation_;
  }

  CmaOptions options_;
  CmaParams params_;
  SearchBox box_;
  Vector mean_;
  double sigma_ = 1.0;
  Matrix cov_;
  // Eigenbasis B and axis lengths D of C, possibly a few generations stale.
  Matrix basis_;
  Vector axis_scales_;
  Vector p_sigma_;
  Vector p_c_;
  std::size_t generation_ = 0;
  std::size_t last_decomposition_ = 0;
  std::vector<LatentVector> pending_;
};

}  // namespace evoseed

#endif  // EVOSEED_CMAES_HPP_
