#pragma once

// KKT / dual-ellipsoid diagnostics. With v_k = X_k / sigma_k, a weight vector
// p is optimal iff every v_k lies in the ellipsoid {x : x^T Omega(p)^{-2} x <= λ}
// and the sampled arms lie on its boundary.

#include "active_design/design_core.hpp"

#include <vector>

namespace active_design {

struct EllipsoidCertificate {
  double level = 0.0;   ///< λ = max_k m_k over active arms.
  Vector m;             ///< m_k = ‖Omega(p)^{-1} X_k / sigma_k‖².
  Vector slack;         ///< λ - m_k.
  std::vector<bool> active;
  Vector weights;
  double tolerance = 0.0;
  bool certified = false;

  std::size_t active_count() const;
};

/// Throws SingularDesignError when Omega(p) is singular.
EllipsoidCertificate kkt_certificate(const DesignProblem& problem, const SimplexWeights& p,
                                     double active_threshold = 1e-6, double tol = 1e-5);

struct DualReport {
  bool positive_definite = false;
  double max_constraint = 0.0;  ///< max_k v_k^T W v_k with W = Omega^{-2} / λ.
  bool feasible = false;        ///< max_constraint <= 1 + tol.
  double dual_value = 0.0;      ///< Tr(sqrt(W))^2.
  double primal_value = 0.0;    ///< L(p).
  double gap = 0.0;             ///< |L - dual|.
  /// Dual value of W rescaled so the tightest constraint is active; never
  /// exceeds L(p).
  double feasible_dual_value = 0.0;
};

DualReport dual_feasibility(const DesignProblem& problem, const EllipsoidCertificate& certificate);

}  // namespace active_design
