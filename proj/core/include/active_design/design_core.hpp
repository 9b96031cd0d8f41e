#pragma once

// Information matrix, A-optimal loss and gradient, closed-form optimum and
// problem constants for the heteroscedastic linear model
//
//   Y_k = X_k^T beta + eps_k,   Var(eps_k) = sigma_k^2,
//
// where an allocation p in the simplex gives the information matrix
//
//   Omega(p) = sum_k (p_k / sigma_k^2) X_k X_k^T
//
// and the loss L(p) = Tr(Omega(p)^{-1}). The loss is +infinity when Omega(p)
// is numerically singular.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace active_design {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Invalid input: bad shapes, out-of-range parameters, malformed instances.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Omega(p) is not invertible, so the parameter is not identifiable at p.
class SingularDesignError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Relative eigenvalue threshold below which Omega(p) counts as singular.
inline constexpr double kSingularityThreshold = 1e-12;
/// Largest supported dimension for the dense core.
inline constexpr std::size_t kDefaultMaxDimension = 512;

/// K unit-norm covariates in R^d, stored as the columns of a d x K matrix.
///
/// Columns are renormalized on construction. Construction fails on a zero
/// column or when the columns do not span R^d.
class CovariateSet {
 public:
  explicit CovariateSet(Matrix columns,
                        std::size_t max_dimension = kDefaultMaxDimension);

  std::size_t dimension() const { return static_cast<std::size_t>(x_.rows()); }
  std::size_t count() const { return static_cast<std::size_t>(x_.cols()); }
  const Matrix& matrix() const { return x_; }
  auto column(std::size_t k) const { return x_.col(static_cast<Eigen::Index>(k)); }

  /// Largest deviation |‖X_k‖ - 1| seen before renormalization.
  double max_norm_deviation() const { return max_norm_deviation_; }

 private:
  Matrix x_;
  double max_norm_deviation_ = 0.0;
};

/// Per-arm noise variance sigma_k^2 and sub-Gaussian parameter kappa_k^2.
class NoiseSpec {
 public:
  /// kappa^2 defaults to sigma^2 (the Gaussian case).
  explicit NoiseSpec(Vector variances);
  NoiseSpec(Vector variances, Vector subgaussian);

  std::size_t count() const { return static_cast<std::size_t>(variances_.size()); }
  const Vector& variances() const { return variances_; }
  const Vector& subgaussian() const { return subgaussian_; }

  double sigma_min() const;
  double sigma_max() const;
  double kappa_max() const;

 private:
  Vector variances_;
  Vector subgaussian_;
};

/// A fully specified instance: covariates, noise and (optionally) the hidden
/// regression parameter used for simulation.
class DesignProblem {
 public:
  DesignProblem(CovariateSet covariates, NoiseSpec noise,
                std::optional<Vector> beta_star = std::nullopt);

  const CovariateSet& covariates() const { return covariates_; }
  const NoiseSpec& noise() const { return noise_; }
  const std::optional<Vector>& beta_star() const { return beta_star_; }

  std::size_t dimension() const { return covariates_.dimension(); }
  std::size_t arms() const { return covariates_.count(); }

  /// Same covariates and hidden parameter, different noise variances.
  DesignProblem with_variances(const Vector& variances) const;

 private:
  CovariateSet covariates_;
  NoiseSpec noise_;
  std::optional<Vector> beta_star_;
};

/// A point of the probability simplex.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit SimplexWeights(Vector p);

  /// Divides by the sum; entries must be nonnegative with positive sum.
  static SimplexWeights normalized(const Vector& w);
  static SimplexWeights uniform(std::size_t k);
  static SimplexWeights vertex(std::size_t k, std::size_t index);
  static SimplexWeights from_counts(std::span<const std::size_t> counts);

  std::size_t size() const { return static_cast<std::size_t>(p_.size()); }
  double operator[](std::size_t k) const { return p_[static_cast<Eigen::Index>(k)]; }
  const Vector& values() const { return p_; }
  double min() const { return p_.minCoeff(); }

 private:
  Vector p_;
};

/// Gram-matrix derived constants. mu, eta, the closed-form smoothness bound
/// and the cofactors are only defined when K = d.
struct ProblemConstants {
  Matrix gram;                      ///< Gamma = X^T X (K x K).
  double gram_det = 0.0;
  double lambda_min = 0.0;          ///< λ_min(X X^T); equals λ_min(Gamma) when K = d.
  std::optional<Vector> cofactors;  ///< Cof(Gamma)_kk.
  std::optional<double> mu;         ///< Strong convexity on the simplex.
  std::optional<double> eta;        ///< Distance of p* to the simplex boundary.
  std::optional<double> smoothness; ///< 432-form bound on C_S.
  /// max_i ∇²_ii L over {p >= floor/2}; present when a floor vector is given.
  std::optional<double> hessian_bound;
};

// Low-level forms taking explicit variances. Plug-in estimates of sigma^2
// (empirical, lower-confidence, posterior draws) go through these.

Matrix info_matrix(const CovariateSet& x, const Vector& variances, const Vector& p);
double loss(const CovariateSet& x, const Vector& variances, const Vector& p);
/// Throws SingularDesignError when Omega(p) is singular.
Vector gradient(const CovariateSet& x, const Vector& variances, const Vector& p);
/// Loss and gradient from one factorization; loss is +inf and the gradient
/// empty when singular.
std::pair<double, Vector> loss_and_gradient(const CovariateSet& x, const Vector& variances,
                                            const Vector& p);

Matrix info_matrix(const DesignProblem& problem, const SimplexWeights& p);
double loss(const DesignProblem& problem, const SimplexWeights& p);
Vector gradient(const DesignProblem& problem, const SimplexWeights& p);

/// Diagonal cofactors of the Gram matrix of a square (K = d) design.
Vector gram_cofactors(const CovariateSet& x);

/// L(p) = det(Gamma)^{-1} sum_k (sigma_k^2 / p_k) Cof(Gamma)_kk. Requires
/// K = d and every p_k > 0.
double loss_closed_form(const DesignProblem& problem, const SimplexWeights& p);

/// p*_k ∝ sigma_k sqrt(Cof(Gamma)_kk) for an arbitrary variance vector.
SimplexWeights optimal_weights_closed_form(const CovariateSet& x, const Vector& variances);
SimplexWeights optimal_weights_closed_form(const DesignProblem& problem);

ProblemConstants problem_constants(const DesignProblem& problem,
                                   const std::optional<SimplexWeights>& floor = std::nullopt);

/// min_k (p_k / sigma_k^2) * λ_min(X X^T), a lower bound on λ_min(Omega(p)).
double lambda_min_lower_bound(const DesignProblem& problem, const SimplexWeights& p);

/// Smallest eigenvalue of a symmetric matrix.
double symmetric_lambda_min(const Matrix& m);

struct RegretEvaluation {
  double value = 0.0;
  bool clamped = false;  ///< A tiny negative value was clamped to zero.
};

/// Tolerance below zero accepted (and clamped) for regret values.
inline constexpr double kRegretClampTolerance = 1e-9;

/// R(T) = (L(p_T) - L(p*)) / T. Values in [-1e-9, 0) are clamped to zero;
/// anything more negative throws.
RegretEvaluation evaluate_regret(const DesignProblem& problem, const SimplexWeights& p_final,
                                 long long horizon, const SimplexWeights& p_star);
double regret(const DesignProblem& problem, const SimplexWeights& p_final, long long horizon,
              const SimplexWeights& p_star);
/// Same, from a precomputed L(p*).
RegretEvaluation evaluate_regret_from_loss(double loss_final, double loss_star, long long horizon);

struct Observation {
  std::size_t arm;
  double y;
};

/// Weighted least squares from per-arm sample means with weights n_k / sigma_k^2
/// (the true variances are used). Throws when the sampled arms do not span R^d.
Vector ols_fit(const DesignProblem& problem, std::span<const Observation> samples);

}  // namespace active_design
