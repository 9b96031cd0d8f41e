#include "active_design/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace active_design {

namespace {

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

double deviation_scale(double r) { return std::max(r, std::sqrt(r)); }

}  // namespace

double concentration_constant() {
  constexpr double e = std::numbers::e;
  return (e - 1.0) / (2.0 * e * (2.0 * e - 1.0));
}

void ArmStats::update(double y) {
  ++n_;
  const double delta = y - mean_;
  mean_ += delta / static_cast<double>(n_);
  m2_ += delta * (y - mean_);
  if (m2_ < 0.0) m2_ = 0.0;
}

std::optional<double> ArmStats::variance() const {
  if (n_ < 2) return std::nullopt;
  return m2_ / static_cast<double>(n_);
}

ConfidenceParams::ConfidenceParams(double delta_, Vector subgaussian_)
    : delta(delta_), subgaussian(std::move(subgaussian_)) {
  require(delta > 0.0 && delta < 1.0, "confidence delta must lie in (0, 1)");
  require(subgaussian.size() > 0, "confidence params need at least one arm");
  require(subgaussian.allFinite() && subgaussian.minCoeff() > 0.0,
          "sub-Gaussian parameters must be positive");
}

double variance_radius(std::uint64_t n, double kappa2, double delta) {
  require(n >= 2, "variance radius needs n >= 2");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");
  require(kappa2 > 0.0, "kappa^2 must be positive");
  const double r = std::log(4.0 / delta) / (concentration_constant() * static_cast<double>(n));
  return 3.0 * kappa2 * deviation_scale(r);
}

std::uint64_t halving_sample_count(double kappa2, double sigma2, std::uint64_t horizon) {
  require(sigma2 > 0.0 && kappa2 >= sigma2, "halving count needs kappa^2 >= sigma^2 > 0");
  require(horizon >= 2, "halving count needs T >= 2");
  const double ratio = kappa2 / sigma2;
  const double n = 72.0 * ratio * ratio / concentration_constant() *
                   std::log(2.0 * static_cast<double>(horizon));
  return static_cast<std::uint64_t>(std::ceil(n));
}

double lcb_variance(const ArmStats& stats, double kappa2, double delta_share,
                    double radius_scale) {
  const auto var = stats.variance();
  if (!var) throw ValidationError("insufficient samples for a variance estimate");
  require(radius_scale >= 0.0, "radius scale must be nonnegative");
  const double floor = 1e-12 * kappa2;
  const double radius = radius_scale == 0.0 ? 0.0 : variance_radius(stats.count(), kappa2, delta_share);
  return std::max(*var - radius_scale * radius, floor);
}

double gradient_bonus(std::uint64_t t, std::uint64_t pulls, double multiplier, double inner) {
  require(t >= 2, "gradient bonus needs t >= 2");
  require(pulls >= 1, "gradient bonus needs T_k >= 1");
  return multiplier *
         std::sqrt(inner * std::log(static_cast<double>(t)) / static_cast<double>(pulls));
}

double gradient_deviation_bound(const DesignProblem& problem, const SimplexWeights& p,
                                std::size_t arm, std::uint64_t pulls, std::uint64_t horizon,
                                double delta) {
  const std::size_t k_arms = problem.arms();
  require(p.size() == k_arms, "weight vector length must equal K");
  require(arm < k_arms, "arm index out of range");
  require(p.min() > 0.0, "gradient deviation bound diverges when some p_k = 0");
  require(pulls >= 1, "gradient deviation bound needs T_i >= 1");
  require(horizon >= 1, "horizon must be positive");
  require(delta > 0.0 && delta < 1.0, "delta must lie in (0, 1)");

  const NoiseSpec& noise = problem.noise();
  const Vector& s2 = noise.variances();
  const double s_min = noise.sigma_min();
  const double s_max = noise.sigma_max();
  const double kappa_max = noise.kappa_max();
  const CovariateSet& x = problem.covariates();
  const double lambda_min = symmetric_lambda_min(x.matrix() * x.matrix().transpose());
  const double sigma_i = std::sqrt(s2[static_cast<Eigen::Index>(arm)]);
  const double worst = s2.cwiseQuotient(p.values()).maxCoeff();
  const double cubed = std::pow(worst / (sigma_i * lambda_min), 3);
  const auto k = static_cast<double>(k_arms);
  const double r = std::log(4.0 * static_cast<double>(horizon) * k / delta) /
                   static_cast<double>(pulls);
  return 678.0 * k * (s_max / std::pow(s_min, 4)) * cubed * kappa_max * kappa_max *
         deviation_scale(r);
}

}  // namespace active_design
