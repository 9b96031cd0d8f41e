#include "active_design/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace active_design {

std::size_t EllipsoidCertificate::active_count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

EllipsoidCertificate kkt_certificate(const DesignProblem& problem, const SimplexWeights& p,
                                     double active_threshold, double tol) {
  if (p.size() != problem.arms()) throw ValidationError("weight vector length must equal K");
  if (!(tol > 0.0)) throw ValidationError("certificate tolerance must be positive");

  EllipsoidCertificate c;
  c.weights = p.values();
  c.tolerance = tol;
  c.m = -gradient(problem, p);

  const auto k = static_cast<Eigen::Index>(problem.arms());
  c.active.resize(static_cast<std::size_t>(k));
  c.level = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    c.active[static_cast<std::size_t>(i)] = c.weights[i] > active_threshold;
    if (c.active[static_cast<std::size_t>(i)]) c.level = std::max(c.level, c.m[i]);
  }
  c.slack = Vector::Constant(k, c.level) - c.m;

  bool ok = c.active_count() > 0;
  for (Eigen::Index i = 0; i < k && ok; ++i) {
    if (c.active[static_cast<std::size_t>(i)])
      ok = std::abs(c.slack[i]) <= tol * c.level;
    else
      ok = c.slack[i] >= -tol * c.level;
  }
  c.certified = ok;
  return c;
}

DualReport dual_feasibility(const DesignProblem& problem, const EllipsoidCertificate& certificate) {
  DualReport r;
  const SimplexWeights p(certificate.weights);
  const Matrix omega = info_matrix(problem, p);
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(omega);
  const Vector ev = eig.eigenvalues();
  r.primal_value = loss(problem, p);
  if (!(ev.minCoeff() > 0.0) || !(certificate.level > 0.0)) return r;

  // W = Omega^{-2} / λ shares Omega's eigenvectors; sqrt(W) has eigenvalues 1/(ω_i sqrt(λ)).
  const Vector w_eig = ev.array().square().inverse() / certificate.level;
  r.positive_definite = w_eig.minCoeff() > 0.0;
  r.max_constraint = certificate.m.maxCoeff() / certificate.level;
  r.feasible = r.max_constraint <= 1.0 + certificate.tolerance;
  const double trace_sqrt = w_eig.cwiseSqrt().sum();
  r.dual_value = trace_sqrt * trace_sqrt;
  r.gap = std::abs(r.primal_value - r.dual_value);
  r.feasible_dual_value = r.dual_value / r.max_constraint;
  return r;
}

}  // namespace active_design
