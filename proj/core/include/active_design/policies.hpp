#pragma once

// Sampling policies, presampling plans and the episode loop.
//
// A policy sees the covariates, the sub-Gaussian bounds kappa^2 and its own
// observations. Only the oracle policy is given p*. Regret is always
// evaluated with the true variances.

#include "active_design/design_core.hpp"
#include "active_design/environment.hpp"
#include "active_design/estimation.hpp"
#include "active_design/simplex_solver.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace active_design {

enum class PolicyKind { uniform, naive_randomized, gradient_ucb, thompson, oracle };

std::string_view to_string(PolicyKind kind);
/// Accepts the canonical names above (with '-' or '_') and the aliases
/// "ts" and "naive" (uniform).
PolicyKind parse_policy_kind(std::string_view name);

struct PresamplePlan {
  std::vector<std::uint64_t> counts;  ///< N_k, total samples of arm k once the plan completes.
  std::uint64_t phase0 = 0;           ///< Estimation samples per arm drawn before the plan.
  std::optional<Vector> origin;       ///< p^o for the cofactor plan.

  std::uint64_t total() const;
};

/// max(2, ceil(10 log(2T))).
std::uint64_t default_phase0(std::uint64_t horizon);

/// p^o_k ∝ σ̄_k sqrt(Cof(Gamma)_kk) and N_k = ceil(p^o_k T / 2). Requires K = d.
PresamplePlan presample_plan(const CovariateSet& x, const Vector& variance_estimates,
                             std::uint64_t horizon, std::uint64_t phase0 = 0);

/// N_k = ceil(T^{3/4}) for every arm; throws "budget too small" unless
/// K ceil(T^{3/4}) < T.
PresamplePlan kd_presample(std::size_t arms, std::uint64_t horizon);

enum class PresampleMode {
  automatic,  ///< none for uniform/oracle; otherwise cofactor when K = d, phase0 when K > d
  none,
  phase0,     ///< n0 samples per arm only
  cofactor,
  kd,         ///< n0 samples per arm, then ceil(T^{3/4}) per arm
};

std::string_view to_string(PresampleMode mode);
PresampleMode parse_presample_mode(std::string_view name);

struct ThompsonPrior {
  double mu0 = 0.0;
  double nu0 = 1.0;
  double alpha0 = 1.0;
  double beta0 = 1.0;
};

struct PolicyConfig {
  PolicyKind kind = PolicyKind::gradient_ucb;
  PresampleMode presample = PresampleMode::automatic;
  /// n0; defaults to default_phase0(T).
  std::optional<std::uint64_t> phase0;
  /// Global failure probability; defaults to 1 / T^2.
  std::optional<double> delta;
  double bonus_multiplier = 2.0;
  double bonus_inner = 3.0;
  /// Gradient-UCB on lower-confidence instead of empirical variances.
  bool use_lcb = false;
  /// Multiplier on the variance radius in the lower-confidence variances.
  double lcb_scale = 1.0;
  /// Naive randomized: minimize L̃ over the final mix of presampled and drawn
  /// proportions rather than over the drawn proportions alone.
  bool compensate_presample = true;
  /// Naive randomized: recompute argmin L̃ every `recompute_stride` rounds.
  std::uint64_t recompute_stride = 1;
  ThompsonPrior prior;
  SolverConfig solver;
};

/// Counts, per-arm moments and proportions of one episode.
class AllocationState {
 public:
  explicit AllocationState(std::size_t arms);

  void record(std::size_t arm, double y);

  std::size_t arms() const { return stats_.size(); }
  std::uint64_t rounds() const { return t_; }
  std::uint64_t count(std::size_t arm) const { return stats_[arm].count(); }
  const ArmStats& stats(std::size_t arm) const { return stats_[arm]; }
  std::vector<std::uint64_t> counts() const;
  /// T_k / t.
  Vector proportions() const;
  /// p_{t+1} = p_t + (e_k - p_t) / (t + 1).
  const Vector& incremental_proportions() const { return p_; }

 private:
  std::vector<ArmStats> stats_;
  Vector p_;
  std::uint64_t t_ = 0;
};

/// What a policy may know about the instance.
struct PolicyContext {
  CovariateSet covariates;
  Vector subgaussian;
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  std::optional<SimplexWeights> p_star;  ///< oracle policy only
};

class Policy {
 public:
  virtual ~Policy() = default;
  /// Called once, after the presampling plan has executed.
  virtual void begin(const AllocationState& /*state*/) {}
  virtual std::size_t select(const AllocationState& state) = 0;
  virtual void observe(std::size_t /*arm*/, double /*y*/) {}
};

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, const PolicyContext& context);

/// Resolves `automatic` for a policy and instance shape.
PresampleMode effective_presample(const PolicyConfig& config, std::size_t dimension,
                                  std::size_t arms);

struct TraceRow {
  std::uint64_t t = 0;
  double regret = 0.0;
  double loss_gap = 0.0;
  double p_min = 0.0;
  std::vector<std::uint64_t> counts;
};

struct RegretTrace {
  PolicyKind policy = PolicyKind::uniform;
  std::uint64_t seed = 0;
  std::uint64_t horizon = 0;
  PresamplePlan plan;
  std::uint64_t plan_end = 0;  ///< Round at which presampling completed.
  double loss_star = 0.0;
  std::vector<TraceRow> rows;
  std::size_t clamped = 0;     ///< Tiny negative regrets clamped to zero.

  const TraceRow& final_row() const { return rows.back(); }
};

/// Geometric schedule start, ceil(start r), ... capped and terminated at T.
std::vector<std::uint64_t> checkpoint_schedule(std::uint64_t start, std::uint64_t horizon,
                                               double ratio = 1.2);

struct EpisodeOptions {
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  NoiseModel noise = NoiseModel::gaussian;
  double checkpoint_ratio = 1.2;
  /// Reference optimum; computed with reference_optimum() when absent.
  std::optional<SimplexWeights> p_star;
};

/// Phase 0, presampling, then the policy loop. The environment stream is
/// derive_seed(seed, 0) and the policy stream derive_seed(seed, 1).
RegretTrace run_episode(const DesignProblem& problem, const PolicyConfig& config,
                        const EpisodeOptions& options);

}  // namespace active_design
