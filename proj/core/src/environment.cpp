#include "active_design/environment.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace active_design {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace

CounterRng::result_type CounterRng::at(std::uint64_t position) const {
  return mix64(key_ + (position + 1) * kGolden);
}

double CounterRng::to_unit(result_type bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

double CounterRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed ^ 0x6A09E667F3BCC908ULL) + stream * kGolden);
}

std::string_view to_string(NoiseModel model) {
  switch (model) {
    case NoiseModel::gaussian: return "gaussian";
    case NoiseModel::uniform: return "uniform";
    case NoiseModel::rademacher: return "rademacher";
  }
  return "unknown";
}

NoiseModel parse_noise_model(std::string_view name) {
  if (name == "gaussian") return NoiseModel::gaussian;
  if (name == "uniform") return NoiseModel::uniform;
  if (name == "rademacher" || name == "rademacher-scaled") return NoiseModel::rademacher;
  throw ValidationError("unknown noise model '" + std::string(name) + "'");
}

double implied_subgaussian(NoiseModel model, double variance) {
  return model == NoiseModel::uniform ? 3.0 * variance : variance;
}

Vector implied_subgaussian(NoiseModel model, const Vector& variances) {
  return variances.unaryExpr([model](double v) { return implied_subgaussian(model, v); });
}

Environment::Environment(DesignProblem problem, NoiseModel model, std::uint64_t seed)
    : problem_(std::move(problem)), model_(model), rng_(seed) {
  if (!problem_.beta_star()) throw ValidationError("environment requires hidden parameter");
  means_ = problem_.covariates().matrix().transpose() * *problem_.beta_star();
  const Vector& s2 = problem_.noise().variances();
  scales_ = s2.cwiseSqrt();
  if (model_ == NoiseModel::uniform) scales_ *= std::sqrt(3.0);
}

double Environment::query(std::size_t arm) {
  require(arm < problem_.arms(), "arm index out of range");
  const auto k = static_cast<Eigen::Index>(arm);
  // One logical step: the counter advances by two outputs for every model.
  const double u1 = CounterRng::to_unit(rng_());
  const double u2 = CounterRng::to_unit(rng_());
  double eps = 0.0;
  switch (model_) {
    case NoiseModel::gaussian:
      eps = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      break;
    case NoiseModel::uniform:
      eps = 2.0 * u1 - 1.0;
      break;
    case NoiseModel::rademacher:
      eps = u1 < 0.5 ? -1.0 : 1.0;
      break;
  }
  ++draws_;
  return means_[k] + scales_[k] * eps;
}

DesignProblem make_hard_instance(double gap) {
  require(gap > 0.0 && gap <= 1.0, "hard instance gap must lie in (0, 1]");
  Matrix x(1, 2);
  x << 1.0, 1.0;
  Vector s2(2);
  s2 << 1.0, 1.0 + gap;
  Vector beta(1);
  beta << 1.0;
  return DesignProblem(CovariateSet(x), NoiseSpec(s2), beta);
}

DesignProblem make_random_instance(const RandomInstanceOptions& o) {
  require(o.dimension >= 1, "dimension must be positive");
  require(o.arms >= o.dimension, "random instance needs K >= d");
  require(o.variance_min > 0.0 && o.variance_max >= o.variance_min,
          "variance range must satisfy 0 < min <= max");
  require(!o.canonical || o.arms == o.dimension, "canonical covariates require K = d");

  const auto d = static_cast<Eigen::Index>(o.dimension);
  const auto k = static_cast<Eigen::Index>(o.arms);
  CounterRng rng(derive_seed(o.seed, 0x1157));

  Matrix x(d, k);
  if (o.canonical) {
    x.setIdentity();
  } else {
    bool spanning = false;
    for (int attempt = 0; attempt < o.max_attempts && !spanning; ++attempt) {
      for (Eigen::Index j = 0; j < k; ++j) {
        double norm = 0.0;
        while (norm < 1e-12) {
          for (Eigen::Index i = 0; i < d; ++i) x(i, j) = rng.normal();
          norm = x.col(j).norm();
        }
        x.col(j) /= norm;
      }
      Eigen::JacobiSVD<Matrix> svd(x);
      spanning = svd.singularValues()(d - 1) > o.min_singular_value;
    }
    if (!spanning)
      throw ValidationError("could not draw spanning covariates after " +
                            std::to_string(o.max_attempts) + " attempts");
  }

  Vector s2(k);
  for (Eigen::Index j = 0; j < k; ++j)
    s2[j] = o.variance_min + (o.variance_max - o.variance_min) * rng.uniform();
  Vector beta(d);
  for (Eigen::Index i = 0; i < d; ++i) beta[i] = rng.normal();

  return DesignProblem(CovariateSet(x), NoiseSpec(s2, implied_subgaussian(o.noise, s2)), beta);
}

DesignProblem make_duplicate_instance(const DesignProblem& base, std::size_t arm,
                                      double variance_gap, NoiseModel noise) {
  require(arm < base.arms(), "duplicated arm index out of range");
  require(variance_gap >= 0.0, "variance gap must be nonnegative");
  const Matrix& xb = base.covariates().matrix();
  Matrix x(xb.rows(), xb.cols() + 1);
  x.leftCols(xb.cols()) = xb;
  x.col(xb.cols()) = xb.col(static_cast<Eigen::Index>(arm));
  const Vector& sb = base.noise().variances();
  Vector s2(sb.size() + 1);
  s2.head(sb.size()) = sb;
  s2[sb.size()] = sb[static_cast<Eigen::Index>(arm)] + variance_gap;
  return DesignProblem(CovariateSet(x), NoiseSpec(s2, implied_subgaussian(noise, s2)),
                       base.beta_star());
}

}  // namespace active_design
