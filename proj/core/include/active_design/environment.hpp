#pragma once

// Synthetic responses Y = X_k^T beta* + eps for simulation, and instance
// generators.

#include "active_design/design_core.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

namespace active_design {

/// Counter-based 64-bit stream: output i is a splitmix64 finalization of
/// (key, i). Identical keys give identical streams on every platform.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : key_(key) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() { return at(counter_++); }
  /// Output at an absolute position, without advancing.
  result_type at(std::uint64_t position) const;

  /// Uniform in the open interval (0, 1).
  double uniform() { return to_unit(operator()()); }
  /// Standard normal by Box-Muller on two consecutive outputs.
  double normal();

  std::uint64_t position() const { return counter_; }

  static double to_unit(result_type bits);

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// Mixes a base seed with a stream label into an independent key.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class NoiseModel { gaussian, uniform, rademacher };

std::string_view to_string(NoiseModel model);
/// Accepts "gaussian", "uniform", "rademacher" (also "rademacher-scaled").
NoiseModel parse_noise_model(std::string_view name);

/// kappa^2 implied by the noise law at variance sigma^2: sigma^2 for the
/// Gaussian and scaled Rademacher laws, a^2 = 3 sigma^2 for uniform on [-a, a].
double implied_subgaussian(NoiseModel model, double variance);
Vector implied_subgaussian(NoiseModel model, const Vector& variances);

/// One episode's data source. Each query consumes exactly one logical draw
/// from a single counter stream, so (seed, query sequence) fixes every output.
class Environment {
 public:
  Environment(DesignProblem problem, NoiseModel model, std::uint64_t seed);

  /// X_k^T beta* plus a fresh centered draw with variance sigma_k^2.
  double query(std::size_t arm);

  const DesignProblem& problem() const { return problem_; }
  NoiseModel noise_model() const { return model_; }
  std::uint64_t draws() const { return draws_; }

 private:
  DesignProblem problem_;
  NoiseModel model_;
  Vector means_;
  Vector scales_;
  CounterRng rng_;
  std::uint64_t draws_ = 0;
};

/// d = 1, K = 2, X_1 = X_2 = 1, sigma^2 = (1, 1 + gap). The loss is
/// (1 + gap) / (1 + gap p_1) with optimum p* = (1, 0).
DesignProblem make_hard_instance(double gap);

struct RandomInstanceOptions {
  std::size_t dimension = 3;
  std::size_t arms = 3;
  std::uint64_t seed = 0;
  double variance_min = 0.5;
  double variance_max = 2.0;
  NoiseModel noise = NoiseModel::gaussian;
  /// Use the canonical basis (requires K = d): the multi-armed bandit case.
  bool canonical = false;
  /// Required smallest singular value of the covariate matrix.
  double min_singular_value = 0.1;
  int max_attempts = 100;
};

/// Unit covariates uniform on the sphere, i.i.d. uniform variances in the
/// given range, standard normal beta*.
DesignProblem make_random_instance(const RandomInstanceOptions& options);

/// Appends a copy of covariate `arm` whose variance is larger by `variance_gap`.
/// With a positive gap the copy is dominated and p* lies on the boundary.
DesignProblem make_duplicate_instance(const DesignProblem& base, std::size_t arm,
                                      double variance_gap, NoiseModel noise = NoiseModel::gaussian);

}  // namespace active_design
