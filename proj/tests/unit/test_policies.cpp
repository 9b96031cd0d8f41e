#include "active_design/policies.hpp"

#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace active_design;
using namespace active_design::test;

namespace {

PolicyContext context_for(const DesignProblem& p, std::uint64_t horizon, std::uint64_t seed = 0) {
  return PolicyContext{p.covariates(), p.noise().subgaussian(), horizon, seed, std::nullopt};
}

// Feeds each arm the given values so that the empirical variances are known.
AllocationState state_with(const std::vector<std::vector<double>>& ys) {
  AllocationState s(ys.size());
  for (std::size_t k = 0; k < ys.size(); ++k)
    for (double y : ys[k]) s.record(k, y);
  return s;
}

}  // namespace

TEST(PolicyNames, RoundTripAndAliases) {
  for (auto k : {PolicyKind::uniform, PolicyKind::naive_randomized, PolicyKind::gradient_ucb,
                 PolicyKind::thompson, PolicyKind::oracle})
    EXPECT_EQ(parse_policy_kind(to_string(k)), k);
  EXPECT_EQ(parse_policy_kind("gradient_ucb"), PolicyKind::gradient_ucb);
  EXPECT_EQ(parse_policy_kind("naive"), PolicyKind::uniform);
  EXPECT_EQ(parse_policy_kind("ts"), PolicyKind::thompson);
  EXPECT_THROW(parse_policy_kind("greedy"), ValidationError);
  EXPECT_EQ(parse_presample_mode("auto"), PresampleMode::automatic);
  EXPECT_THROW(parse_presample_mode("half"), ValidationError);
}

TEST(Presample, DefaultPhase0) {
  EXPECT_EQ(default_phase0(1), 7u);
  EXPECT_EQ(default_phase0(10000), static_cast<std::uint64_t>(std::ceil(10 * std::log(20000.0))));
}

TEST(Presample, CofactorPlanExamples) {
  const CovariateSet id2(Matrix::Identity(2, 2));
  const PresamplePlan a = presample_plan(id2, vec({1.0, 1.0}), 100);
  EXPECT_EQ(a.counts, (std::vector<std::uint64_t>{25, 25}));
  const PresamplePlan b = presample_plan(id2, vec({1.0, 9.0}), 400, 5);
  EXPECT_EQ(b.counts, (std::vector<std::uint64_t>{50, 150}));
  EXPECT_NEAR((*b.origin)[1], 0.75, 1e-15);
  EXPECT_EQ(b.total(), 200u);
  EXPECT_THROW(presample_plan(CovariateSet(Matrix::Ones(1, 2)), vec({1.0, 1.0}), 100),
               ValidationError);
}

TEST(Presample, KdPlanExamples) {
  const PresamplePlan p = kd_presample(4, 10000);
  EXPECT_EQ(p.counts, (std::vector<std::uint64_t>(4, 1000)));
  // ceil(T^{3/4}) is exact at perfect fourth powers and just above them.
  EXPECT_EQ(kd_presample(2, 81).counts[0], 27u);
  EXPECT_EQ(kd_presample(2, 82).counts[0], 28u);
  try {
    kd_presample(4, 16);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("budget too small"), std::string::npos);
  }
}

TEST(Presample, EffectiveMode) {
  PolicyConfig c;
  c.kind = PolicyKind::gradient_ucb;
  EXPECT_EQ(effective_presample(c, 3, 3), PresampleMode::cofactor);
  EXPECT_EQ(effective_presample(c, 3, 4), PresampleMode::phase0);
  c.kind = PolicyKind::uniform;
  EXPECT_EQ(effective_presample(c, 3, 3), PresampleMode::none);
  c.presample = PresampleMode::kd;
  EXPECT_EQ(effective_presample(c, 3, 3), PresampleMode::kd);
}

TEST(AllocationState, IncrementalProportionsMatchCounts) {
  AllocationState s(3);
  CounterRng rng(1);
  for (int i = 0; i < 100000; ++i) s.record(rng() % 3, 0.0);
  EXPECT_LT((s.incremental_proportions() - s.proportions()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(s.rounds(), 100000u);
  EXPECT_THROW(s.record(3, 0.0), ValidationError);
}

TEST(UniformPolicy, RoundRobin) {
  const DesignProblem p = canonical({1.0, 2.0, 3.0});
  PolicyConfig c;
  c.kind = PolicyKind::uniform;
  auto pol = make_policy(c, context_for(p, 10));
  AllocationState s(3);
  std::vector<std::size_t> seq;
  for (int i = 0; i < 6; ++i) {
    seq.push_back(pol->select(s));
    s.record(seq.back(), 0.0);
  }
  EXPECT_EQ(seq, (std::vector<std::size_t>{0, 1, 2, 0, 1, 2}));
}

TEST(OraclePolicy, TracksTarget) {
  const DesignProblem p = canonical({1.0, 4.0});
  PolicyConfig c;
  c.kind = PolicyKind::oracle;
  EXPECT_THROW(make_policy(c, context_for(p, 10)), ValidationError);
  PolicyContext ctx = context_for(p, 10);
  ctx.p_star = SimplexWeights(vec({1.0 / 3, 2.0 / 3}));
  auto pol = make_policy(c, ctx);
  AllocationState s(2);
  std::vector<std::size_t> seq;
  for (int i = 0; i < 3; ++i) {
    seq.push_back(pol->select(s));
    s.record(seq.back(), 0.0);
  }
  EXPECT_EQ(seq, (std::vector<std::size_t>{1, 0, 1}));
}

TEST(GradientUcb, TiesGoToLowestIndex) {
  const DesignProblem p = canonical({1.0, 1.0, 1.0});
  PolicyConfig c;
  auto pol = make_policy(c, context_for(p, 100));
  const AllocationState s = state_with({{0, 2}, {0, 2}, {0, 2}});
  EXPECT_EQ(pol->select(s), 0u);
}

TEST(GradientUcb, PicksMostNegativeOptimisticGradient) {
  // Equal counts: the bonus is common, so the arm with the largest sigma^2 / p^2 wins.
  const DesignProblem p = canonical({1.0, 1.0, 1.0});
  PolicyConfig c;
  auto pol = make_policy(c, context_for(p, 100));
  const AllocationState s = state_with({{0, 2}, {0, 6}, {0, 4}});
  EXPECT_EQ(pol->select(s), 1u);

  // Without the bonus an under-sampled arm with small variance still loses to a
  // high-variance arm; a large bonus reverses that.
  const AllocationState u = state_with({{0, 0.2, 0, 0.2}, {0, 4, 0, 4, 0, 4, 0, 4, 0, 4, 0, 4}});
  PolicyConfig none = c;
  none.bonus_multiplier = 0.0;
  auto greedy = make_policy(none, context_for(canonical({1.0, 1.0}), 100));
  EXPECT_EQ(greedy->select(u), 1u);
  PolicyConfig big = c;
  big.bonus_multiplier = 100.0;
  auto explorer = make_policy(big, context_for(canonical({1.0, 1.0}), 100));
  EXPECT_EQ(explorer->select(u), 0u);
}

TEST(Thompson, SymmetricArmsChosenEvenly) {
  const DesignProblem p = canonical({1.0, 1.0});
  PolicyConfig c;
  c.kind = PolicyKind::thompson;
  auto pol = make_policy(c, context_for(p, 100, 5));
  const AllocationState s = state_with({{0, 2, 0, 2}, {0, 2, 0, 2}});
  const int n = 20000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += pol->select(s) == 0 ? 1 : 0;
  EXPECT_NEAR(first / double(n), 0.5, 4.0 * std::sqrt(0.25 / n));
}

TEST(Thompson, RejectsImproperPrior) {
  PolicyConfig c;
  c.kind = PolicyKind::thompson;
  c.prior.alpha0 = 0.0;
  EXPECT_THROW(make_policy(c, context_for(canonical({1.0, 1.0}), 10)), ValidationError);
}

TEST(NaiveRandomized, SamplesClosedFormOfPlugInVariances) {
  // Zero radius and no compensation: q is the closed-form optimum of σ̂².
  const DesignProblem p = canonical({1.0, 1.0});
  PolicyConfig c;
  c.kind = PolicyKind::naive_randomized;
  c.lcb_scale = 0.0;
  c.compensate_presample = false;
  auto pol = make_policy(c, context_for(p, 1000, 3));
  const AllocationState s = state_with({{0, 2}, {0, 6}});  // σ̂² = 1, 9 -> q = (1/4, 3/4)
  pol->begin(s);
  const int n = 40000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += pol->select(s) == 0 ? 1 : 0;
  EXPECT_NEAR(first / double(n), 0.25, 4.0 * std::sqrt(0.25 * 0.75 / n));
}

TEST(NaiveRandomized, CompensatedMixtureHitsTarget) {
  // Presampled proportions (0.5, 0.5) over 100 of 1000 rounds; target (1/4, 3/4),
  // so the remaining draws use q with 0.1 * 0.5 + 0.9 q_0 = 1/4.
  const DesignProblem p = canonical({1.0, 1.0});
  PolicyConfig c;
  c.kind = PolicyKind::naive_randomized;
  c.lcb_scale = 0.0;
  std::vector<double> a, b;
  for (int i = 0; i < 50; ++i) {
    a.push_back(i % 2 ? 2.0 : 0.0);
    b.push_back(i % 2 ? 6.0 : 0.0);
  }
  const AllocationState s = state_with({a, b});
  auto pol = make_policy(c, context_for(p, 1000, 4));
  pol->begin(s);
  const double q0 = (0.25 - 0.1 * 0.5) / 0.9;
  const int n = 40000;
  int first = 0;
  for (int i = 0; i < n; ++i) first += pol->select(s) == 0 ? 1 : 0;
  EXPECT_NEAR(first / double(n), q0, 4.0 * std::sqrt(q0 * (1 - q0) / n));
}

TEST(NaiveRandomized, WaterFillLeavesOversampledArmAlone) {
  // Presampled (0.9, 0.1) over half the budget; target (1/4, 3/4) is unreachable
  // for arm 0, so every remaining draw goes to arm 1.
  const DesignProblem p = canonical({1.0, 1.0});
  PolicyConfig c;
  c.kind = PolicyKind::naive_randomized;
  c.lcb_scale = 0.0;
  std::vector<double> a, b;
  for (int i = 0; i < 90; ++i) a.push_back(i % 2 ? 2.0 : 0.0);
  for (int i = 0; i < 10; ++i) b.push_back(i % 2 ? 6.0 : 0.0);
  const AllocationState s = state_with({a, b});
  auto pol = make_policy(c, context_for(p, 200, 4));
  pol->begin(s);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(pol->select(s), 1u);
}

TEST(NaiveRandomized, NonSquareUsesSolver) {
  const DesignProblem p = make_duplicate_instance(canonical({1.0, 1.0}), 0, 1.0);
  PolicyConfig c;
  c.kind = PolicyKind::naive_randomized;
  c.lcb_scale = 0.0;
  c.compensate_presample = false;
  auto pol = make_policy(c, context_for(p, 1000, 8));
  // σ̂² = (1, 1, 2): the duplicate is dominated.
  const double r2 = std::sqrt(2.0);
  const AllocationState s = state_with({{0, 2}, {0, 2}, {0, 2 * r2}});
  pol->begin(s);
  int dup = 0;
  for (int i = 0; i < 5000; ++i) dup += pol->select(s) == 2 ? 1 : 0;
  EXPECT_LE(dup, 5);
}

TEST(CheckpointSchedule, Geometric) {
  EXPECT_EQ(checkpoint_schedule(10, 30, 1.5), (std::vector<std::uint64_t>{10, 15, 23, 30}));
  EXPECT_EQ(checkpoint_schedule(1, 3, 1.01), (std::vector<std::uint64_t>{1, 2, 3}));
  EXPECT_EQ(checkpoint_schedule(50, 20, 2.0), (std::vector<std::uint64_t>{20}));
  EXPECT_THROW(checkpoint_schedule(1, 10, 1.0), ValidationError);
}

TEST(Episode, DeterministicPerSeed) {
  const DesignProblem p = random_problem(3, 3, 1);
  for (auto kind : {PolicyKind::naive_randomized, PolicyKind::gradient_ucb, PolicyKind::thompson}) {
    PolicyConfig c;
    c.kind = kind;
    EpisodeOptions o;
    o.horizon = 3000;
    o.seed = 11;
    const RegretTrace a = run_episode(p, c, o), b = run_episode(p, c, o);
    ASSERT_EQ(a.rows.size(), b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      EXPECT_EQ(a.rows[i].regret, b.rows[i].regret);
      EXPECT_EQ(a.rows[i].counts, b.rows[i].counts);
    }
    o.seed = 12;
    EXPECT_NE(run_episode(p, c, o).final_row().counts, a.final_row().counts);
  }
}

TEST(Episode, UniformSplitsBudgetEvenly) {
  PolicyConfig c;
  c.kind = PolicyKind::uniform;
  EpisodeOptions o;
  o.horizon = 999;
  const RegretTrace t = run_episode(canonical({1.0, 2.0, 3.0}), c, o);
  EXPECT_EQ(t.plan_end, 0u);
  EXPECT_EQ(t.final_row().t, 999u);
  EXPECT_EQ(t.final_row().counts, (std::vector<std::uint64_t>{333, 333, 333}));
  EXPECT_EQ(t.rows.front().t, 3u);
}

TEST(Episode, OracleRegretIsRounding) {
  PolicyConfig c;
  c.kind = PolicyKind::oracle;
  EpisodeOptions o;
  o.horizon = 6000;
  const DesignProblem p = canonical({1.0, 4.0, 9.0});
  const RegretTrace t = run_episode(p, c, o);
  EXPECT_EQ(t.final_row().counts, (std::vector<std::uint64_t>{1000, 2000, 3000}));
  EXPECT_NEAR(t.final_row().regret, 0.0, 1e-12);
}

TEST(Episode, PlanIsExecutedBeforePolicy) {
  PolicyConfig c;
  c.kind = PolicyKind::gradient_ucb;
  EpisodeOptions o;
  o.horizon = 4000;
  o.seed = 3;
  const DesignProblem p = random_problem(3, 3, 2);
  const RegretTrace t = run_episode(p, c, o);
  ASSERT_TRUE(t.plan.origin.has_value());
  EXPECT_EQ(t.plan.phase0, default_phase0(4000));
  EXPECT_EQ(t.plan_end, t.plan.total());
  EXPECT_GE(t.rows.front().t, t.plan_end);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_GE(t.rows.front().counts[k], t.plan.counts[k]);
  for (std::size_t i = 1; i < t.rows.size(); ++i) EXPECT_GT(t.rows[i].t, t.rows[i - 1].t);
}

TEST(Episode, KdPlanTooSmallBudget) {
  PolicyConfig c;
  c.kind = PolicyKind::gradient_ucb;
  c.presample = PresampleMode::kd;
  EpisodeOptions o;
  o.horizon = 16;
  EXPECT_THROW(run_episode(random_problem(3, 4, 1), c, o), ValidationError);
}

TEST(Episode, AdaptivePoliciesBeatUniformOnSkewedInstance) {
  const DesignProblem p = canonical({0.1, 1.0, 10.0});
  EpisodeOptions o;
  o.horizon = 20000;
  double uni = 0.0, ucb = 0.0;
  for (std::uint64_t s = 0; s < 3; ++s) {
    o.seed = s;
    PolicyConfig c;
    c.kind = PolicyKind::uniform;
    uni += run_episode(p, c, o).final_row().regret;
    c.kind = PolicyKind::gradient_ucb;
    ucb += run_episode(p, c, o).final_row().regret;
  }
  EXPECT_LT(ucb, uni / 10.0);
}
