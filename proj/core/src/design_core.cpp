#include "active_design/design_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace active_design {

namespace {

constexpr double kInfinity = std::numeric_limits<double>::infinity();

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

// Factorization of a symmetric PSD matrix that refuses numerically singular
// input (λ_min <= threshold * λ_max).
class SpdSolver {
 public:
  explicit SpdSolver(const Matrix& omega) {
    if (!all_finite(omega) || omega.rows() == 0) return;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(omega, Eigen::EigenvaluesOnly);
    if (eig.info() != Eigen::Success) return;
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    if (!(hi > 0.0) || lo <= kSingularityThreshold * hi) return;
    ldlt_.compute(omega);
    ok_ = ldlt_.info() == Eigen::Success;
  }

  bool ok() const { return ok_; }
  Matrix solve(const Matrix& rhs) const { return ldlt_.solve(rhs); }

 private:
  Eigen::LDLT<Matrix> ldlt_;
  bool ok_ = false;
};

void check_shapes(const CovariateSet& x, const Vector& variances, const Vector& p) {
  require(static_cast<std::size_t>(variances.size()) == x.count(),
          "variance vector length must equal the number of arms");
  require(static_cast<std::size_t>(p.size()) == x.count(),
          "weight vector length must equal the number of arms");
}

double determinant_minor(const Matrix& m, Eigen::Index skip) {
  const Eigen::Index n = m.rows();
  if (n == 1) return 1.0;
  Matrix minor(n - 1, n - 1);
  for (Eigen::Index i = 0, r = 0; i < n; ++i) {
    if (i == skip) continue;
    for (Eigen::Index j = 0, c = 0; j < n; ++j) {
      if (j == skip) continue;
      minor(r, c++) = m(i, j);
    }
    ++r;
  }
  return minor.fullPivLu().determinant();
}

}  // namespace

// ---------------------------------------------------------------- types

CovariateSet::CovariateSet(Matrix columns, std::size_t max_dimension) : x_(std::move(columns)) {
  require(x_.rows() >= 1, "covariate dimension must be positive");
  require(static_cast<std::size_t>(x_.rows()) <= max_dimension,
          "covariate dimension exceeds the configured maximum of " +
              std::to_string(max_dimension));
  require(x_.cols() >= x_.rows(), "covariates cannot span R^d: K < d");
  require(all_finite(x_), "covariates must be finite");
  for (Eigen::Index k = 0; k < x_.cols(); ++k) {
    const double norm = x_.col(k).norm();
    require(norm > 0.0, "covariate " + std::to_string(k) + " is the zero vector");
    max_norm_deviation_ = std::max(max_norm_deviation_, std::abs(norm - 1.0));
    x_.col(k) /= norm;
  }
  Eigen::JacobiSVD<Matrix> svd(x_);
  const double smallest = svd.singularValues()(svd.singularValues().size() - 1);
  require(smallest > 1e-10, "covariates do not span R^d");
}

NoiseSpec::NoiseSpec(Vector variances) : NoiseSpec(variances, variances) {}

NoiseSpec::NoiseSpec(Vector variances, Vector subgaussian)
    : variances_(std::move(variances)), subgaussian_(std::move(subgaussian)) {
  require(variances_.size() > 0, "noise spec needs at least one arm");
  require(variances_.size() == subgaussian_.size(),
          "variance and sub-Gaussian parameter vectors differ in length");
  for (Eigen::Index k = 0; k < variances_.size(); ++k) {
    require(std::isfinite(variances_[k]) && variances_[k] > 0.0,
            "noise variance of arm " + std::to_string(k) + " must be positive and finite");
    require(std::isfinite(subgaussian_[k]) && subgaussian_[k] >= variances_[k],
            "sub-Gaussian parameter of arm " + std::to_string(k) +
                " must dominate its variance");
  }
}

double NoiseSpec::sigma_min() const { return std::sqrt(variances_.minCoeff()); }
double NoiseSpec::sigma_max() const { return std::sqrt(variances_.maxCoeff()); }
double NoiseSpec::kappa_max() const { return std::sqrt(subgaussian_.maxCoeff()); }

DesignProblem::DesignProblem(CovariateSet covariates, NoiseSpec noise,
                             std::optional<Vector> beta_star)
    : covariates_(std::move(covariates)),
      noise_(std::move(noise)),
      beta_star_(std::move(beta_star)) {
  require(noise_.count() == covariates_.count(), "noise arm count must equal K");
  if (beta_star_) {
    require(static_cast<std::size_t>(beta_star_->size()) == covariates_.dimension(),
            "hidden parameter length must equal d");
    require(beta_star_->allFinite(), "hidden parameter must be finite");
  }
}

DesignProblem DesignProblem::with_variances(const Vector& variances) const {
  // Keep kappa^2 >= sigma^2 when the replacement exceeds the stored bound.
  const Vector kappa = noise_.subgaussian().cwiseMax(variances);
  return DesignProblem(covariates_, NoiseSpec(variances, kappa), beta_star_);
}

SimplexWeights::SimplexWeights(Vector p) : p_(std::move(p)) {
  require(p_.size() > 0, "simplex weights must be nonempty");
  require(p_.allFinite(), "simplex weights must be finite");
  require(p_.minCoeff() >= 0.0, "simplex weights must be nonnegative");
  require(std::abs(p_.sum() - 1.0) <= kSumTolerance, "simplex weights must sum to 1");
}

SimplexWeights SimplexWeights::normalized(const Vector& w) {
  require(w.size() > 0 && w.allFinite() && w.minCoeff() >= 0.0,
          "weights must be finite and nonnegative");
  const double total = w.sum();
  require(total > 0.0, "weights must have a positive sum");
  Vector p = w / total;
  // One correction pass keeps |sum - 1| at rounding level.
  p /= p.sum();
  return SimplexWeights(std::move(p));
}

SimplexWeights SimplexWeights::uniform(std::size_t k) {
  require(k > 0, "simplex dimension must be positive");
  return SimplexWeights(Vector::Constant(static_cast<Eigen::Index>(k), 1.0 / static_cast<double>(k)));
}

SimplexWeights SimplexWeights::vertex(std::size_t k, std::size_t index) {
  require(index < k, "vertex index out of range");
  Vector p = Vector::Zero(static_cast<Eigen::Index>(k));
  p[static_cast<Eigen::Index>(index)] = 1.0;
  return SimplexWeights(std::move(p));
}

SimplexWeights SimplexWeights::from_counts(std::span<const std::size_t> counts) {
  Vector w(static_cast<Eigen::Index>(counts.size()));
  for (std::size_t k = 0; k < counts.size(); ++k) w[static_cast<Eigen::Index>(k)] = static_cast<double>(counts[k]);
  return normalized(w);
}

// ---------------------------------------------------------------- loss

Matrix info_matrix(const CovariateSet& x, const Vector& variances, const Vector& p) {
  check_shapes(x, variances, p);
  const Vector w = p.cwiseQuotient(variances);
  const Matrix& xm = x.matrix();
  return xm * w.asDiagonal() * xm.transpose();
}

std::pair<double, Vector> loss_and_gradient(const CovariateSet& x, const Vector& variances,
                                            const Vector& p) {
  const Matrix omega = info_matrix(x, variances, p);
  const SpdSolver solver(omega);
  if (!solver.ok()) return {kInfinity, Vector()};
  const Matrix inv = solver.solve(Matrix::Identity(omega.rows(), omega.cols()));
  const Matrix z = inv * x.matrix();  // Omega^{-1} X
  Vector g = -(z.colwise().squaredNorm().transpose().cwiseQuotient(variances));
  return {inv.trace(), std::move(g)};
}

double loss(const CovariateSet& x, const Vector& variances, const Vector& p) {
  const Matrix omega = info_matrix(x, variances, p);
  const SpdSolver solver(omega);
  if (!solver.ok()) return kInfinity;
  return solver.solve(Matrix::Identity(omega.rows(), omega.cols())).trace();
}

Vector gradient(const CovariateSet& x, const Vector& variances, const Vector& p) {
  const Matrix omega = info_matrix(x, variances, p);
  const SpdSolver solver(omega);
  if (!solver.ok()) throw SingularDesignError("design not identifiable at p");
  const Matrix z = solver.solve(x.matrix());
  return -(z.colwise().squaredNorm().transpose().cwiseQuotient(variances));
}

Matrix info_matrix(const DesignProblem& problem, const SimplexWeights& p) {
  return info_matrix(problem.covariates(), problem.noise().variances(), p.values());
}

double loss(const DesignProblem& problem, const SimplexWeights& p) {
  return loss(problem.covariates(), problem.noise().variances(), p.values());
}

Vector gradient(const DesignProblem& problem, const SimplexWeights& p) {
  return gradient(problem.covariates(), problem.noise().variances(), p.values());
}

// ---------------------------------------------------------------- closed forms

Vector gram_cofactors(const CovariateSet& x) {
  require(x.count() == x.dimension(), "cofactor closed form requires K = d");
  const Matrix gram = x.matrix().transpose() * x.matrix();
  const Eigen::Index n = gram.rows();
  const double det = gram.fullPivLu().determinant();
  Vector cof(n);
  const Eigen::LDLT<Matrix> ldlt(gram);
  if (ldlt.info() == Eigen::Success && ldlt.rcond() > kSingularityThreshold) {
    cof = det * ldlt.solve(Matrix::Identity(n, n)).diagonal();
  } else {
    for (Eigen::Index k = 0; k < n; ++k) cof[k] = determinant_minor(gram, k);
  }
  return cof;
}

double loss_closed_form(const DesignProblem& problem, const SimplexWeights& p) {
  const CovariateSet& x = problem.covariates();
  require(x.count() == x.dimension(), "closed-form loss requires K = d");
  require(p.min() > 0.0, "closed-form loss requires every p_k > 0");
  const Matrix gram = x.matrix().transpose() * x.matrix();
  const double det = gram.fullPivLu().determinant();
  const Vector cof = gram_cofactors(x);
  const Vector& s2 = problem.noise().variances();
  double total = 0.0;
  for (Eigen::Index k = 0; k < cof.size(); ++k) total += s2[k] / p.values()[k] * cof[k];
  return total / det;
}

SimplexWeights optimal_weights_closed_form(const CovariateSet& x, const Vector& variances) {
  require(x.count() == x.dimension(),
          "closed-form optimum requires K = d; use the simplex solver for K > d");
  require(static_cast<std::size_t>(variances.size()) == x.count(),
          "variance vector length must equal the number of arms");
  const Vector cof = gram_cofactors(x);
  const Vector w = variances.cwiseSqrt().cwiseProduct(cof.cwiseSqrt());
  return SimplexWeights::normalized(w);
}

SimplexWeights optimal_weights_closed_form(const DesignProblem& problem) {
  return optimal_weights_closed_form(problem.covariates(), problem.noise().variances());
}

double symmetric_lambda_min(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

ProblemConstants problem_constants(const DesignProblem& problem,
                                   const std::optional<SimplexWeights>& floor) {
  const CovariateSet& x = problem.covariates();
  ProblemConstants c;
  c.gram = x.matrix().transpose() * x.matrix();
  c.gram_det = c.gram.fullPivLu().determinant();
  c.lambda_min = symmetric_lambda_min(x.matrix() * x.matrix().transpose());
  if (x.count() != x.dimension()) return c;

  const Vector cof = gram_cofactors(x);
  const Vector& s2 = problem.noise().variances();
  const Vector sigma = s2.cwiseSqrt();
  const double det = c.gram_det;
  const auto k = static_cast<double>(x.count());

  c.cofactors = cof;
  c.mu = 2.0 / det * cof.cwiseProduct(s2).minCoeff();

  const SimplexWeights p_star = optimal_weights_closed_form(problem);
  // A single arm has no boundary inside its (zero-dimensional) simplex.
  c.eta = x.count() == 1 ? 1.0 : std::sqrt(k / (k - 1.0)) * p_star.min();

  const double weighted = sigma.cwiseProduct(cof.cwiseSqrt()).sum();
  const double s_max = sigma.maxCoeff();
  const double s_min = sigma.minCoeff();
  c.smoothness = 432.0 * s_max * s_max * std::pow(weighted, 3) /
                 (det * std::pow(s_min, 3) * std::sqrt(cof.minCoeff()));

  if (floor) {
    require(floor->size() == x.count(), "floor vector length must equal K");
    require(floor->min() > 0.0, "floor vector must be strictly positive");
    double bound = 0.0;
    for (Eigen::Index i = 0; i < cof.size(); ++i) {
      const double half = floor->values()[i] / 2.0;
      bound = std::max(bound, 2.0 * cof[i] * s2[i] / (det * half * half * half));
    }
    c.hessian_bound = bound;
  }
  return c;
}

double lambda_min_lower_bound(const DesignProblem& problem, const SimplexWeights& p) {
  const CovariateSet& x = problem.covariates();
  require(p.size() == x.count(), "weight vector length must equal K");
  const double ratio = p.values().cwiseQuotient(problem.noise().variances()).minCoeff();
  return ratio * symmetric_lambda_min(x.matrix() * x.matrix().transpose());
}

// ---------------------------------------------------------------- regret, OLS

RegretEvaluation evaluate_regret_from_loss(double loss_final, double loss_star, long long horizon) {
  require(horizon >= 1, "regret horizon must be at least 1");
  const double r = (loss_final - loss_star) / static_cast<double>(horizon);
  if (std::isnan(r)) throw ValidationError("regret is undefined (NaN loss)");
  if (r >= 0.0) return {r, false};
  if (r >= -kRegretClampTolerance) return {0.0, true};
  throw ValidationError("negative regret " + std::to_string(r) +
                        ": reference optimum is not optimal");
}

RegretEvaluation evaluate_regret(const DesignProblem& problem, const SimplexWeights& p_final,
                                 long long horizon, const SimplexWeights& p_star) {
  return evaluate_regret_from_loss(loss(problem, p_final), loss(problem, p_star), horizon);
}

double regret(const DesignProblem& problem, const SimplexWeights& p_final, long long horizon,
              const SimplexWeights& p_star) {
  return evaluate_regret(problem, p_final, horizon, p_star).value;
}

Vector ols_fit(const DesignProblem& problem, std::span<const Observation> samples) {
  const CovariateSet& x = problem.covariates();
  const auto k_arms = static_cast<Eigen::Index>(x.count());
  Vector sums = Vector::Zero(k_arms);
  Vector counts = Vector::Zero(k_arms);
  for (const auto& s : samples) {
    require(s.arm < x.count(), "observation arm index out of range");
    require(std::isfinite(s.y), "observation must be finite");
    sums[static_cast<Eigen::Index>(s.arm)] += s.y;
    counts[static_cast<Eigen::Index>(s.arm)] += 1.0;
  }
  const Vector& s2 = problem.noise().variances();
  const auto d = static_cast<Eigen::Index>(x.dimension());
  Matrix a = Matrix::Zero(d, d);
  Vector b = Vector::Zero(d);
  for (Eigen::Index k = 0; k < k_arms; ++k) {
    if (counts[k] == 0.0) continue;
    const double w = counts[k] / s2[k];
    const auto col = x.matrix().col(k);
    a.noalias() += w * col * col.transpose();
    b.noalias() += w * (sums[k] / counts[k]) * col;
  }
  const SpdSolver solver(a);
  if (!solver.ok()) throw SingularDesignError("sampled covariates do not span R^d");
  return solver.solve(b);
}

}  // namespace active_design
