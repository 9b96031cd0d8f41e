#include "active_design/design_core.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <limits>
#include <random>

using namespace active_design;
using namespace active_design::test;

TEST(CovariateSet, RenormalizesColumns) {
  Matrix x(2, 2);
  x << 3.0, 0.0, 4.0, 2.0;
  const CovariateSet c(x);
  EXPECT_NEAR(c.column(0).norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.column(1).norm(), 1.0, 1e-12);
  EXPECT_NEAR(c.max_norm_deviation(), 4.0, 1e-12);
  EXPECT_NEAR(c.matrix()(0, 0), 0.6, 1e-15);
}

TEST(CovariateSet, RejectsZeroColumnAndRankDeficiency) {
  Matrix zero(2, 2);
  zero << 1.0, 0.0, 0.0, 0.0;
  EXPECT_THROW(CovariateSet{zero}, ValidationError);

  Matrix parallel(2, 3);
  parallel << 1.0, 2.0, -1.0, 0.0, 0.0, 0.0;
  EXPECT_THROW(CovariateSet{parallel}, ValidationError);
}

TEST(CovariateSet, RejectsFewerArmsThanDimensions) {
  try {
    CovariateSet c(Matrix::Identity(3, 2));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("cannot span"), std::string::npos);
  }
}

TEST(CovariateSet, EnforcesDimensionCap) {
  EXPECT_THROW(CovariateSet(Matrix::Identity(4, 4), 3), ValidationError);
}

TEST(NoiseSpec, Invariants) {
  EXPECT_THROW(NoiseSpec(vec({1.0, 0.0})), ValidationError);
  EXPECT_THROW(NoiseSpec(vec({1.0, 2.0}), vec({1.0, 1.0})), ValidationError);
  const NoiseSpec n(vec({1.0, 4.0}), vec({2.0, 4.0}));
  EXPECT_DOUBLE_EQ(n.sigma_min(), 1.0);
  EXPECT_DOUBLE_EQ(n.sigma_max(), 2.0);
  EXPECT_DOUBLE_EQ(n.kappa_max(), 2.0);
}

TEST(SimplexWeights, Validation) {
  EXPECT_THROW(SimplexWeights(vec({0.5, 0.6})), ValidationError);
  EXPECT_THROW(SimplexWeights(vec({1.5, -0.5})), ValidationError);
  const std::vector<std::size_t> counts{1, 3};
  EXPECT_DOUBLE_EQ(SimplexWeights::from_counts(counts)[1], 0.75);
  EXPECT_DOUBLE_EQ(SimplexWeights::vertex(3, 2)[2], 1.0);
  EXPECT_DOUBLE_EQ(SimplexWeights::normalized(vec({1.0, 3.0}))[0], 0.25);
}

TEST(InfoMatrix, Examples) {
  const DesignProblem p = canonical({1.0, 1.0});
  const Matrix omega = info_matrix(p, SimplexWeights::uniform(2));
  EXPECT_TRUE(omega.isApprox(0.5 * Matrix::Identity(2, 2)));

  const DesignProblem hard = make_hard_instance(1.0);
  EXPECT_NEAR(info_matrix(hard, SimplexWeights::uniform(2))(0, 0), 0.75, 1e-15);

  const DesignProblem r = random_problem(3, 4, 5);
  const Matrix atom = info_matrix(r, SimplexWeights::vertex(4, 2));
  const Vector x2 = r.covariates().column(2);
  EXPECT_TRUE(atom.isApprox(x2 * x2.transpose() / r.noise().variances()[2], 1e-14));
  EXPECT_EQ(Eigen::FullPivLU<Matrix>(atom).rank(), 1);
}

TEST(Loss, Examples) {
  EXPECT_NEAR(loss(canonical({1.0, 1.0}), SimplexWeights::uniform(2)), 4.0, 1e-14);
  EXPECT_NEAR(loss(make_hard_instance(1.0), SimplexWeights::uniform(2)), 4.0 / 3.0, 1e-14);
  EXPECT_NEAR(loss(canonical({1.0, 4.0, 9.0}), SimplexWeights(vec({1.0 / 6, 2.0 / 6, 3.0 / 6}))), 36.0,
              1e-12);
}

TEST(Loss, SingularIsInfinite) {
  const DesignProblem p = canonical({1.0, 1.0});
  EXPECT_EQ(loss(p, SimplexWeights::vertex(2, 0)), std::numeric_limits<double>::infinity());
  EXPECT_THROW(gradient(p, SimplexWeights::vertex(2, 0)), SingularDesignError);
}

TEST(Loss, GridMinimumOfDiagonalCase) {
  // Oracle: brute-force grid over the 2-simplex of sum sigma_k^2 / p_k.
  const Vector s2 = vec({1.0, 4.0, 9.0});
  double best = std::numeric_limits<double>::infinity();
  const int n = 600;
  for (int i = 1; i < n; ++i)
    for (int j = 1; i + j < n; ++j) {
      const double p1 = double(i) / n, p2 = double(j) / n, p3 = 1.0 - p1 - p2;
      best = std::min(best, s2[0] / p1 + s2[1] / p2 + s2[2] / p3);
    }
  EXPECT_NEAR(best, 36.0, 1e-9);
}

TEST(LossClosedForm, MatchesTraceFormula) {
  const DesignProblem p = canonical({1.0, 4.0});
  EXPECT_NEAR(loss_closed_form(p, SimplexWeights(vec({1.0 / 3, 2.0 / 3}))), 9.0, 1e-12);
  EXPECT_NEAR(loss_closed_form(canonical({1.0, 1.0}), SimplexWeights::uniform(2)), 4.0, 1e-12);

  std::mt19937_64 rng(11);
  for (std::uint64_t s = 0; s < 40; ++s) {
    const std::size_t d = 2 + s % 6;
    const DesignProblem r = random_problem(d, d, s);
    const SimplexWeights w(random_interior(d, rng));
    EXPECT_LT(rel_err(loss_closed_form(r, w), loss(r, w)), 1e-9) << "seed " << s;
  }
}

TEST(LossClosedForm, RejectsBadInput) {
  EXPECT_THROW(loss_closed_form(make_hard_instance(1.0), SimplexWeights::uniform(2)), ValidationError);
  EXPECT_THROW(loss_closed_form(canonical({1.0, 1.0}), SimplexWeights::vertex(2, 0)), ValidationError);
}

TEST(Gradient, Examples) {
  const Vector g = gradient(canonical({1.0, 1.0}), SimplexWeights::uniform(2));
  EXPECT_NEAR(g[0], -4.0, 1e-12);
  EXPECT_NEAR(g[1], -4.0, 1e-12);
  const Vector g2 = gradient(canonical({1.0, 4.0}), SimplexWeights(vec({1.0 / 3, 2.0 / 3})));
  EXPECT_NEAR(g2[0], -9.0, 1e-12);
  EXPECT_NEAR(g2[1], -9.0, 1e-12);
}

TEST(Gradient, MatchesCentralDifferences) {
  // Oracle: derivative along e_j - e_i by central differences of the loss.
  std::mt19937_64 rng(3);
  const double h = 1e-6;
  for (std::uint64_t s = 0; s < 60; ++s) {
    const std::size_t d = 2 + s % 5;
    const std::size_t k = d + s % 3;
    const DesignProblem r = random_problem(d, k, 100 + s);
    const Vector p = random_interior(k, rng);
    const Vector g = gradient(r.covariates(), r.noise().variances(), p);
    for (std::size_t k1 = 0; k1 < k; ++k1) EXPECT_LT(g[static_cast<Eigen::Index>(k1)], 0.0);
    const auto i = static_cast<Eigen::Index>(s % k);
    const auto j = static_cast<Eigen::Index>((s + 1) % k);
    Vector dir = Vector::Zero(static_cast<Eigen::Index>(k));
    dir[j] += 1.0;
    dir[i] -= 1.0;
    const double fd = (loss(r.covariates(), r.noise().variances(), p + h * dir) -
                       loss(r.covariates(), r.noise().variances(), p - h * dir)) /
                      (2 * h);
    EXPECT_LT(std::abs(fd - (g[j] - g[i])), 1e-5 * std::max(std::abs(g[j] - g[i]), 1e-3 * g.cwiseAbs().maxCoeff()));
  }
}

TEST(Gradient, HomogeneousInVariances) {
  const DesignProblem r = random_problem(3, 5, 9);
  const Vector p = Vector::Constant(5, 0.2);
  const Vector s2 = r.noise().variances();
  const Vector g1 = gradient(r.covariates(), s2, p);
  const Vector g3 = gradient(r.covariates(), 3.0 * s2, p);
  EXPECT_TRUE(g3.isApprox(3.0 * g1, 1e-12));
}

TEST(LossAndGradient, AgreesWithSeparateCalls) {
  const DesignProblem r = random_problem(4, 6, 2);
  const Vector p = Vector::Constant(6, 1.0 / 6);
  const auto [l, g] = loss_and_gradient(r.covariates(), r.noise().variances(), p);
  EXPECT_NEAR(l, loss(r.covariates(), r.noise().variances(), p), 1e-12 * l);
  EXPECT_TRUE(g.isApprox(gradient(r.covariates(), r.noise().variances(), p), 1e-12));
  const auto [l0, g0] = loss_and_gradient(r.covariates(), r.noise().variances(), Vector::Unit(6, 0));
  EXPECT_TRUE(std::isinf(l0));
  EXPECT_EQ(g0.size(), 0);
}

TEST(OptimalWeights, ClosedFormExamples) {
  const SimplexWeights p = optimal_weights_closed_form(canonical({1.0, 4.0, 9.0}));
  EXPECT_NEAR(p[0], 1.0 / 6, 1e-15);
  EXPECT_NEAR(p[1], 2.0 / 6, 1e-15);
  EXPECT_NEAR(p[2], 3.0 / 6, 1e-15);
  const SimplexWeights u = optimal_weights_closed_form(canonical({2.0, 2.0, 2.0, 2.0}));
  EXPECT_NEAR((u.values() - Vector::Constant(4, 0.25)).cwiseAbs().maxCoeff(), 0.0, 1e-15);

  // Orthonormal but rotated columns with equal variances: uniform.
  const Matrix q = Eigen::HouseholderQR<Matrix>(Matrix::Random(3, 3)).householderQ();
  const DesignProblem rot(CovariateSet(q), NoiseSpec(Vector::Constant(3, 1.7)));
  EXPECT_NEAR((optimal_weights_closed_form(rot).values() - Vector::Constant(3, 1.0 / 3)).cwiseAbs().maxCoeff(),
              0.0, 1e-12);
}

TEST(OptimalWeights, KktEqualizesGradient) {
  for (std::uint64_t s = 0; s < 30; ++s) {
    const std::size_t d = 2 + s % 7;
    const DesignProblem r = random_problem(d, d, 200 + s);
    const SimplexWeights p = optimal_weights_closed_form(r);
    EXPECT_GT(p.min(), 0.0);
    const Vector g = gradient(r, p);
    EXPECT_LT((g.maxCoeff() - g.minCoeff()) / g.cwiseAbs().maxCoeff(), 1e-8) << "seed " << s;
  }
}

TEST(OptimalWeights, RejectsNonSquare) {
  EXPECT_THROW(optimal_weights_closed_form(make_hard_instance(1.0)), ValidationError);
}

TEST(OptimalWeights, HomogeneityLeavesArgminUnchanged) {
  const DesignProblem r = random_problem(4, 4, 77);
  const Vector s2 = r.noise().variances();
  const SimplexWeights a = optimal_weights_closed_form(r.covariates(), s2);
  const SimplexWeights b = optimal_weights_closed_form(r.covariates(), 5.0 * s2);
  EXPECT_LT((a.values() - b.values()).cwiseAbs().maxCoeff(), 1e-14);
  const Vector p = Vector::Constant(4, 0.25);
  EXPECT_NEAR(loss(r.covariates(), 5.0 * s2, p), 5.0 * loss(r.covariates(), s2, p), 1e-10);
}

TEST(Loss, StrictlyConvex) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const DesignProblem r = random_problem(3, 3 + s % 3, 300 + s);
    const std::size_t k = r.arms();
    const Vector p = random_interior(k, rng), q = random_interior(k, rng);
    const double lam = u(rng);
    const auto& x = r.covariates();
    const Vector& s2 = r.noise().variances();
    EXPECT_LE(loss(x, s2, lam * p + (1 - lam) * q),
              lam * loss(x, s2, p) + (1 - lam) * loss(x, s2, q) - 1e-12);
  }
}

TEST(Loss, IncreasingInEachVariance) {
  const DesignProblem r = random_problem(3, 5, 8);
  const Vector p = Vector::Constant(5, 0.2);
  const Vector s2 = r.noise().variances();
  for (Eigen::Index k = 0; k < 5; ++k) {
    Vector bumped = s2;
    bumped[k] *= 1.1;
    EXPECT_GT(loss(r.covariates(), bumped, p), loss(r.covariates(), s2, p));
  }
}

TEST(ProblemConstants, CanonicalExamples) {
  const ProblemConstants a = problem_constants(canonical({1.0, 1.0}));
  EXPECT_NEAR(*a.mu, 2.0, 1e-14);
  EXPECT_NEAR(*a.eta, std::sqrt(2.0) / 2.0, 1e-14);
  EXPECT_NEAR(a.lambda_min, 1.0, 1e-14);
  EXPECT_GE(*a.smoothness, *a.mu);

  const ProblemConstants b = problem_constants(canonical({1.0, 4.0}));
  EXPECT_NEAR(*b.eta, std::sqrt(2.0) / 3.0, 1e-14);

  const ProblemConstants h = problem_constants(make_hard_instance(1.0));
  EXPECT_FALSE(h.mu.has_value());
  EXPECT_FALSE(h.eta.has_value());
  EXPECT_NEAR(h.lambda_min, 2.0, 1e-14);
}

TEST(ProblemConstants, StrongConvexityLowerBoundsHessianOnSimplex) {
  // Oracle: the Hessian of sum c_k / p_k is diag(2 c_k / p_k^3) >= 2 min c_k.
  for (std::uint64_t s = 0; s < 10; ++s) {
    const DesignProblem r = random_problem(3, 3, 400 + s);
    const ProblemConstants c = problem_constants(r, SimplexWeights::uniform(3));
    EXPECT_GT(*c.mu, 0.0);
    EXPECT_GE(*c.smoothness, *c.mu);
    EXPECT_GT(*c.eta, 0.0);
    EXPECT_LE(*c.eta, 1.0);
    EXPECT_GE(*c.hessian_bound, *c.mu);
  }
}

TEST(Cofactors, MatchExplicitMinors) {
  const DesignProblem r = random_problem(4, 4, 12);
  const Matrix g = r.covariates().matrix().transpose() * r.covariates().matrix();
  const Vector cof = gram_cofactors(r.covariates());
  for (Eigen::Index i = 0; i < 4; ++i) {
    Matrix m(3, 3);
    for (Eigen::Index a = 0, ra = 0; a < 4; ++a) {
      if (a == i) continue;
      for (Eigen::Index b = 0, cb = 0; b < 4; ++b) {
        if (b == i) continue;
        m(ra, cb++) = g(a, b);
      }
      ++ra;
    }
    EXPECT_NEAR(cof[i], m.determinant(), 1e-12);
  }
}

TEST(LambdaMinLowerBound, Examples) {
  EXPECT_NEAR(lambda_min_lower_bound(canonical({1.0, 1.0}), SimplexWeights::uniform(2)), 0.5, 1e-15);
  EXPECT_NEAR(lambda_min_lower_bound(canonical({1.0, 4.0}), SimplexWeights::uniform(2)), 0.125, 1e-15);
  std::mt19937_64 rng(1);
  for (std::uint64_t s = 0; s < 40; ++s) {
    const DesignProblem r = random_problem(2 + s % 4, 2 + s % 4 + s % 3, 500 + s);
    const SimplexWeights p(random_interior(r.arms(), rng));
    const double truth = symmetric_lambda_min(info_matrix(r, p));
    EXPECT_LE(lambda_min_lower_bound(r, p), truth * (1 + 1e-12));
  }
}

TEST(Regret, Examples) {
  const DesignProblem hard = make_hard_instance(1.0);
  EXPECT_NEAR(regret(hard, SimplexWeights::uniform(2), 100, SimplexWeights::vertex(2, 0)), 1.0 / 300,
              1e-15);
  const DesignProblem c = canonical({1.0, 1.0});
  EXPECT_NEAR(regret(c, SimplexWeights(vec({0.25, 0.75})), 10, SimplexWeights::uniform(2)), 2.0 / 15,
              1e-14);
  EXPECT_EQ(regret(c, SimplexWeights::uniform(2), 10, SimplexWeights::uniform(2)), 0.0);
}

TEST(Regret, ClampsOnlyTinyNegatives) {
  const RegretEvaluation tiny = evaluate_regret_from_loss(1.0 - 5e-10, 1.0, 1);
  EXPECT_EQ(tiny.value, 0.0);
  EXPECT_TRUE(tiny.clamped);
  EXPECT_THROW(evaluate_regret_from_loss(1.0 - 1e-6, 1.0, 1), ValidationError);
}

TEST(OlsFit, ExactWithoutNoise) {
  const DesignProblem r = random_problem(3, 5, 21);
  const Vector& beta = *r.beta_star();
  std::vector<Observation> obs;
  for (std::size_t k = 0; k < 5; ++k)
    for (int rep = 0; rep < 2; ++rep)
      obs.push_back({k, r.covariates().column(k).dot(beta)});
  EXPECT_LT((ols_fit(r, obs) - beta).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(OlsFit, OneDimensionalMean) {
  const DesignProblem p(CovariateSet(Matrix::Ones(1, 1)), NoiseSpec(vec({1.0})));
  const std::vector<Observation> obs{{0, 3.0}, {0, 5.0}};
  EXPECT_NEAR(ols_fit(p, obs)[0], 4.0, 1e-15);
}

TEST(OlsFit, RejectsNonSpanningSamples) {
  const DesignProblem p = canonical({1.0, 1.0});
  const std::vector<Observation> obs{{0, 1.0}, {0, 2.0}};
  EXPECT_THROW(ols_fit(p, obs), std::exception);
}
