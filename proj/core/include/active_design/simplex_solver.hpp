#pragma once

// Frank-Wolfe minimization of a smooth convex function over the probability
// simplex, restricted to the floored simplex {p : p_k >= floor} so that the
// A-optimal loss and its gradient stay finite.
//
// When a Hessian oracle is available the Frank-Wolfe warm start is followed by
// an active-set Newton polish on the face it identifies: arms that hit the
// floor leave the free set, arms whose gradient undercuts the face multiplier
// re-enter it. The result is always certified by the full Frank-Wolfe gap.

#include "active_design/design_core.hpp"

#include <functional>
#include <optional>

namespace active_design {

struct SolverConfig {
  int max_iterations = 5000;
  /// Stop when the Frank-Wolfe gap drops below tolerance * max(1, |L|).
  double tolerance = 1e-9;
  /// Interior floor: p <- (1 - K floor) p + floor.
  double floor = 1e-9;
  /// Frank-Wolfe iterations before the first Newton polish attempt.
  int warm_start_iterations = 50;
};

struct SolverResult {
  SimplexWeights weights;  ///< Raw iterate, every entry >= floor.
  double objective = 0.0;
  double gap = 0.0;        ///< Frank-Wolfe gap at `weights` over the floored simplex.
  int iterations = 0;      ///< Frank-Wolfe plus Newton iterations.
  bool converged = false;  ///< false: stopped on the iteration limit.
  double floor = 0.0;

  /// Weights with entries below 10 * floor reported as exact zeros.
  Vector certificate_weights() const;
};

using LossOracle = std::function<double(const Vector&)>;
using GradientOracle = std::function<Vector(const Vector&)>;
using HessianOracle = std::function<Matrix(const Vector&)>;

/// Frank-Wolfe with an adaptive backtracking step (sufficient decrease against
/// a local quadratic model). Every accepted step decreases the objective.
/// Throws ValidationError if the loss is not finite at the uniform start.
SolverResult minimize(const LossOracle& loss, const GradientOracle& gradient, std::size_t arms,
                      const SolverConfig& config = {},
                      const std::optional<HessianOracle>& hessian = std::nullopt);

/// Hessian of L(p): 2 (V^T Omega^{-1} V) ∘ (V^T Omega^{-2} V) with V = X diag(1/sigma).
Matrix loss_hessian(const CovariateSet& x, const Vector& variances, const Vector& p);

/// minimize() on L(p) with explicit variances and the exact Hessian.
SolverResult minimize_design_loss(const CovariateSet& x, const Vector& variances,
                                  const SolverConfig& config = {});

/// Evaluation-side optimum: the closed form when K = d, otherwise the solver
/// on the true variances with floor-level weights zeroed when that is no worse.
SimplexWeights reference_optimum(const DesignProblem& problem, const SolverConfig& config = {});

}  // namespace active_design
