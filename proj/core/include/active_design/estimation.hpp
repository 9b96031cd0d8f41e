#pragma once

// Streaming per-arm moments and the concentration quantities consumed by the
// sampling policies.

#include "active_design/design_core.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>

namespace active_design {

/// Universal constant of the sub-Gaussian variance concentration bound,
/// c = (e - 1) / (2e (2e - 1)) ≈ 0.0712.
double concentration_constant();

/// Running count, mean and sum of squared deviations (Welford).
class ArmStats {
 public:
  void update(double y);

  std::uint64_t count() const { return n_; }
  double mean() const { return mean_; }
  double m2() const { return m2_; }
  /// Population variance M2 / n, defined for n >= 2.
  std::optional<double> variance() const;

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct ConfidenceParams {
  double delta;            ///< Global failure probability in (0, 1).
  Vector subgaussian;      ///< kappa_k^2 per arm.

  ConfidenceParams(double delta, Vector subgaussian);
  std::size_t arms() const { return static_cast<std::size_t>(subgaussian.size()); }
  /// delta / K, the per-arm share.
  double per_arm_delta() const { return delta / static_cast<double>(arms()); }
};

/// |σ̂² - σ²| radius holding with probability 1 - delta after n >= 2 samples:
/// 3 kappa^2 max(r, sqrt(r)) with r = log(4/delta) / (c n).
double variance_radius(std::uint64_t n, double kappa2, double delta);

/// Smallest n = ceil(72 kappa^4 / (c sigma^4) log(2T)) after which the
/// empirical variance is within sigma^2 / 2 with probability 1 - 1/T^2.
std::uint64_t halving_sample_count(double kappa2, double sigma2, std::uint64_t horizon);

/// Lower-confidence variance max(σ̂² - scale * radius, 1e-12 kappa^2).
/// Throws ValidationError when fewer than two samples were seen.
double lcb_variance(const ArmStats& stats, double kappa2, double delta_share,
                    double radius_scale = 1.0);

/// Exploration bonus multiplier * sqrt(inner * log(t) / T_k) of the
/// gradient-UCB rule; the printed rule is multiplier = 2, inner = 3.
double gradient_bonus(std::uint64_t t, std::uint64_t pulls, double multiplier = 2.0,
                      double inner = 3.0);

/// High-probability bound on |∂_i L - ∂_i L̂| after T_i samples of arm i:
///
///   678 K (σ_max / σ_min^4) (max_k σ_k^2 / p_k / (σ_i λ_min))^3 κ_max^2 max(r, sqrt(r)),
///   r = log(4 T K / delta) / T_i.
///
/// Diagnostic only; the policies use gradient_bonus.
double gradient_deviation_bound(const DesignProblem& problem, const SimplexWeights& p,
                                std::size_t arm, std::uint64_t pulls, std::uint64_t horizon,
                                double delta);

}  // namespace active_design
