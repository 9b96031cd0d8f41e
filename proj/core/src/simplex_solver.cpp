#include "active_design/simplex_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace active_design {

namespace {

constexpr int kMaxBacktracks = 80;
constexpr int kNewtonBudget = 200;

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

/// Gap max_j (p - s_j)^T g over the floored vertices s_j.
double floored_gap(const Vector& p, const Vector& g, double floor, Eigen::Index* vertex = nullptr) {
  Eigen::Index j = 0;
  const double g_min = g.minCoeff(&j);
  if (vertex) *vertex = j;
  const auto k = static_cast<double>(p.size());
  const double s_dot_g = floor * g.sum() + (1.0 - k * floor) * g_min;
  return p.dot(g) - s_dot_g;
}

Vector floored_vertex(Eigen::Index arms, Eigen::Index j, double floor) {
  Vector s = Vector::Constant(arms, floor);
  s[j] += 1.0 - static_cast<double>(arms) * floor;
  return s;
}

void renormalize(Vector& p, double floor) {
  p = p.cwiseMax(floor);
  p /= p.sum();
}

class Minimizer {
 public:
  Minimizer(const LossOracle& loss, const GradientOracle& gradient,
            const std::optional<HessianOracle>& hessian, const SolverConfig& config,
            Eigen::Index arms)
      : loss_(loss), gradient_(gradient), hessian_(hessian), config_(config), arms_(arms) {}

  SolverResult run() {
    p_ = Vector::Constant(arms_, 1.0 / static_cast<double>(arms_));
    f_ = loss_(p_);
    if (!std::isfinite(f_)) throw ValidationError("loss is not finite at the solver start point");

    bool done = frank_wolfe(std::min(config_.warm_start_iterations, config_.max_iterations));
    if (!done && hessian_) done = newton_polish();
    if (!done) frank_wolfe(config_.max_iterations - iterations_);

    renormalize(p_, config_.floor);
    SolverResult result{SimplexWeights(p_), loss_(p_), 0.0, iterations_, false, config_.floor};
    result.gap = floored_gap(p_, gradient_(p_), config_.floor);
    result.converged = result.gap <= config_.tolerance * std::max(1.0, std::abs(result.objective));
    return result;
  }

 private:
  double tolerance() const { return config_.tolerance * std::max(1.0, std::abs(f_)); }

  // Returns true once the gap is below tolerance.
  bool frank_wolfe(int budget) {
    for (int it = 0; it < budget; ++it) {
      const Vector g = gradient_(p_);
      Eigen::Index j = 0;
      const double gap = floored_gap(p_, g, config_.floor, &j);
      if (gap <= tolerance()) return true;
      const Vector dir = floored_vertex(arms_, j, config_.floor) - p_;
      const double dir_sq = dir.squaredNorm();
      if (lipschitz_ <= 0.0) {
        // Initial curvature estimate from a short secant step.
        const double h = 1e-3;
        const Vector g2 = gradient_(p_ + h * dir);
        lipschitz_ = std::max((g2 - g).norm() / (h * std::sqrt(dir_sq)), 1e-12);
      }
      lipschitz_ *= 0.9;

      bool accepted = false;
      for (int bt = 0; bt < kMaxBacktracks; ++bt) {
        const double step = std::min(gap / (lipschitz_ * dir_sq), 1.0);
        const Vector q = p_ + step * dir;
        const double fq = loss_(q);
        const double model = f_ - step * gap + 0.5 * step * step * lipschitz_ * dir_sq;
        if (std::isfinite(fq) && fq <= model) {
          // Below rounding level the model test can pass without a decrease.
          if (fq <= f_) {
            p_ = q;
            f_ = fq;
          }
          accepted = true;
          break;
        }
        lipschitz_ *= 2.0;
      }
      ++iterations_;
      if (!accepted) return false;
    }
    return false;
  }

  // Primal active-set Newton on the face where the arms outside `free` sit at
  // the floor. Returns true when the full gap is below tolerance.
  bool newton_polish() {
    const double floor = config_.floor;
    std::vector<bool> free(static_cast<std::size_t>(arms_));
    for (Eigen::Index k = 0; k < arms_; ++k) free[static_cast<std::size_t>(k)] = p_[k] > 2.0 * floor;

    for (int it = 0; it < kNewtonBudget; ++it) {
      const Vector g = gradient_(p_);
      if (floored_gap(p_, g, floor) <= tolerance()) return true;

      std::vector<Eigen::Index> s;
      for (Eigen::Index k = 0; k < arms_; ++k)
        if (free[static_cast<std::size_t>(k)]) s.push_back(k);
      if (s.empty()) return false;
      const auto m = static_cast<Eigen::Index>(s.size());

      Vector g_s(m), p_s(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        g_s[i] = g[s[i]];
        p_s[i] = p_[s[i]];
      }
      const double face_gap = p_s.dot(g_s) - p_s.sum() * g_s.minCoeff();
      if (face_gap <= 0.1 * tolerance()) {
        // Face optimum: admit the arm that most undercuts the face multiplier.
        Eigen::Index best = -1;
        double best_g = g_s.minCoeff();
        for (Eigen::Index k = 0; k < arms_; ++k)
          if (!free[static_cast<std::size_t>(k)] && g[k] < best_g) {
            best_g = g[k];
            best = k;
          }
        if (best < 0) return false;
        free[static_cast<std::size_t>(best)] = true;
        ++iterations_;
        continue;
      }

      Vector step_dir = Vector::Zero(arms_);
      if (m > 1) {
        const Matrix h = (*hessian_)(p_);
        Matrix h_s(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
          for (Eigen::Index j = 0; j < m; ++j) h_s(i, j) = h(s[i], s[j]);
        const double reg = 1e-13 * std::max(h_s.trace() / static_cast<double>(m), 1e-300);
        h_s.diagonal().array() += reg;
        const Eigen::LDLT<Matrix> ldlt(h_s);
        if (ldlt.info() != Eigen::Success) return false;
        const Vector a = ldlt.solve(g_s);
        const Vector b = ldlt.solve(Vector::Ones(m));
        const double nu = a.sum() / b.sum();
        const Vector delta = -(a - nu * b);
        if (!delta.allFinite()) return false;
        for (Eigen::Index i = 0; i < m; ++i) step_dir[s[i]] = delta[i];
      }
      // The step sums to zero, so centering g removes the cancellation.
      const double g_mean = g_s.mean();
      double slope = 0.0;
      for (Eigen::Index k : s) slope += (g[k] - g_mean) * step_dir[k];
      const bool rounding_level = std::abs(slope) <= 1e-10 * std::max(1.0, std::abs(f_));
      if (!(slope < 0.0) && !rounding_level) {
        // Not a descent direction (degenerate curvature); fall back to FW.
        return false;
      }

      double alpha_max = std::numeric_limits<double>::infinity();
      Eigen::Index blocking = -1;
      for (Eigen::Index k : s)
        if (step_dir[k] < 0.0) {
          const double room = (p_[k] - floor) / -step_dir[k];
          if (room < alpha_max) {
            alpha_max = room;
            blocking = k;
          }
        }
      double alpha = std::min(1.0, alpha_max);
      bool accepted = false;
      if (alpha == 1.0 && rounding_level) {
        // Decrement at rounding level: the loss cannot resolve the decrease,
        // so take the full Newton step.
        p_ += step_dir;
        renormalize(p_, floor);
        f_ = loss_(p_);
        ++iterations_;
        continue;
      }
      for (int bt = 0; bt < 60; ++bt) {
        const Vector q = p_ + alpha * step_dir;
        const double fq = loss_(q);
        if (std::isfinite(fq) && fq <= f_ + 1e-4 * alpha * slope) {
          const bool hit_boundary = blocking >= 0 && alpha == alpha_max;
          p_ = q;
          if (hit_boundary) {
            p_[blocking] = floor;
            free[static_cast<std::size_t>(blocking)] = false;
          }
          renormalize(p_, floor);
          f_ = loss_(p_);
          accepted = true;
          break;
        }
        alpha *= 0.5;
      }
      ++iterations_;
      if (!accepted) return floored_gap(p_, gradient_(p_), floor) <= tolerance();
    }
    return false;
  }

  const LossOracle& loss_;
  const GradientOracle& gradient_;
  const std::optional<HessianOracle>& hessian_;
  const SolverConfig& config_;
  Eigen::Index arms_;
  Vector p_;
  double f_ = 0.0;
  double lipschitz_ = -1.0;
  int iterations_ = 0;
};

}  // namespace

Vector SolverResult::certificate_weights() const {
  Vector p = weights.values();
  for (Eigen::Index k = 0; k < p.size(); ++k)
    if (p[k] < 10.0 * floor) p[k] = 0.0;
  return p;
}

SolverResult minimize(const LossOracle& loss, const GradientOracle& gradient, std::size_t arms,
                      const SolverConfig& config, const std::optional<HessianOracle>& hessian) {
  require(arms >= 1, "simplex dimension must be positive");
  require(config.tolerance > 0.0, "solver tolerance must be positive");
  require(config.max_iterations >= 1, "solver needs at least one iteration");
  require(config.floor >= 0.0 && static_cast<double>(arms) * config.floor < 1.0,
          "solver floor must satisfy K * floor < 1");
  return Minimizer(loss, gradient, hessian, config, static_cast<Eigen::Index>(arms)).run();
}

Matrix loss_hessian(const CovariateSet& x, const Vector& variances, const Vector& p) {
  const Matrix omega = info_matrix(x, variances, p);
  const Eigen::LDLT<Matrix> ldlt(omega);
  const Matrix v = x.matrix() * variances.cwiseSqrt().cwiseInverse().asDiagonal();
  const Matrix a_v = ldlt.solve(v);     // Omega^{-1} V
  const Matrix inner = v.transpose() * a_v;        // V^T Omega^{-1} V
  const Matrix outer = a_v.transpose() * a_v;      // V^T Omega^{-2} V
  return 2.0 * inner.cwiseProduct(outer);
}

SolverResult minimize_design_loss(const CovariateSet& x, const Vector& variances,
                                  const SolverConfig& config) {
  auto f = [&](const Vector& p) { return loss(x, variances, p); };
  auto g = [&](const Vector& p) { return gradient(x, variances, p); };
  const std::optional<HessianOracle> h =
      HessianOracle([&](const Vector& p) { return loss_hessian(x, variances, p); });
  return minimize(f, g, x.count(), config, h);
}

SimplexWeights reference_optimum(const DesignProblem& problem, const SolverConfig& config) {
  if (problem.arms() == problem.dimension()) return optimal_weights_closed_form(problem);
  const SolverResult r = minimize_design_loss(problem.covariates(), problem.noise().variances(), config);
  // Floor-level entries are dropped when that does not raise the loss.
  const SimplexWeights cleaned = SimplexWeights::normalized(r.certificate_weights());
  return loss(problem, cleaned) <= r.objective ? cleaned : r.weights;
}

}  // namespace active_design
