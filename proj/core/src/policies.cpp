#include "active_design/policies.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace active_design {

namespace {

__extension__ typedef unsigned __int128 u128;

void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

std::string normalize_name(std::string_view name) {
  std::string s(name);
  std::replace(s.begin(), s.end(), '_', '-');
  return s;
}

// Smallest n with n^4 >= T^3, i.e. ceil(T^{3/4}) without floating-point error.
std::uint64_t ceil_three_quarter_power(std::uint64_t horizon) {
  const auto t3 = static_cast<u128>(horizon) * horizon * horizon;
  auto n = static_cast<std::uint64_t>(std::ceil(std::pow(static_cast<double>(horizon), 0.75)));
  const auto fourth = [](std::uint64_t v) {
    const auto w = static_cast<u128>(v);
    return w * w * w * w;
  };
  while (n > 0 && fourth(n - 1) >= t3) --n;
  while (fourth(n) < t3) ++n;
  return n;
}

Vector safe_variances(const AllocationState& state, const Vector& subgaussian) {
  Vector s2(static_cast<Eigen::Index>(state.arms()));
  for (std::size_t k = 0; k < state.arms(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    const auto v = state.stats(k).variance();
    if (!v) throw ValidationError("insufficient samples for a variance estimate");
    s2[i] = std::max(*v, 1e-12 * subgaussian[i]);
  }
  return s2;
}

Vector lcb_variances(const AllocationState& state, const PolicyConfig& config,
                     const PolicyContext& context) {
  const auto horizon = static_cast<double>(context.horizon);
  const double delta = config.delta.value_or(1.0 / (horizon * horizon));
  const double share = delta / static_cast<double>(state.arms());
  Vector s2(static_cast<Eigen::Index>(state.arms()));
  for (std::size_t k = 0; k < state.arms(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    s2[i] = lcb_variance(state.stats(k), context.subgaussian[i], share, config.lcb_scale);
  }
  return s2;
}

std::size_t argmin_lowest(const Vector& v) {
  std::size_t best = 0;
  for (Eigen::Index k = 1; k < v.size(); ++k)
    if (v[k] < v[static_cast<Eigen::Index>(best)]) best = static_cast<std::size_t>(k);
  return best;
}

// ------------------------------------------------------------------ policies

class UniformPolicy final : public Policy {
 public:
  std::size_t select(const AllocationState& state) override {
    return static_cast<std::size_t>(state.rounds() % state.arms());
  }
};

class OraclePolicy final : public Policy {
 public:
  explicit OraclePolicy(SimplexWeights p_star) : p_star_(std::move(p_star)) {}

  std::size_t select(const AllocationState& state) override {
    const Vector& p = p_star_.values();
    if (state.rounds() == 0) return argmin_lowest(-p);
    return argmin_lowest(state.proportions() - p);
  }

 private:
  SimplexWeights p_star_;
};

class NaiveRandomizedPolicy final : public Policy {
 public:
  NaiveRandomizedPolicy(const PolicyConfig& config, const PolicyContext& context)
      : config_(config), context_(context), rng_(context.seed) {
    require(config.recompute_stride >= 1, "recompute stride must be positive");
    if (context.covariates.count() == context.covariates.dimension())
      cofactors_ = gram_cofactors(context.covariates);
  }

  void begin(const AllocationState& state) override {
    presampled_ = state.rounds();
    origin_ = state.proportions();
    const auto t = static_cast<double>(context_.horizon);
    alpha_ = config_.compensate_presample ? static_cast<double>(presampled_) / t : 0.0;
  }

  std::size_t select(const AllocationState& state) override {
    if (p_hat_.size() == 0 || (state.rounds() - presampled_) % config_.recompute_stride == 0)
      p_hat_ = optimistic_weights(state);
    const double u = rng_.uniform();
    double acc = 0.0;
    for (Eigen::Index k = 0; k < p_hat_.size(); ++k) {
      acc += p_hat_[k];
      if (u < acc) return static_cast<std::size_t>(k);
    }
    return static_cast<std::size_t>(p_hat_.size() - 1);
  }

 private:
  // argmin_q L̃(alpha p_pre + (1 - alpha) q).
  Vector optimistic_weights(const AllocationState& state) const {
    const CovariateSet& x = context_.covariates;
    Vector s2 = lcb_variances(state, config_, context_);
    if (alpha_ >= 1.0) return origin_;
    if (cofactors_) return water_fill(s2.cwiseProduct(*cofactors_).cwiseSqrt());

    // The floored LCB makes Omega too ill-conditioned for the generic loss.
    s2 = s2.cwiseMax(1e-6 * context_.subgaussian.maxCoeff());
    const double a = alpha_;
    auto mix = [&](const Vector& q) -> Vector { return a * origin_ + (1.0 - a) * q; };
    auto f = [&](const Vector& q) { return loss(x, s2, mix(q)); };
    auto g = [&](const Vector& q) -> Vector { return (1.0 - a) * gradient(x, s2, mix(q)); };
    const std::optional<HessianOracle> h = HessianOracle(
        [&](const Vector& q) -> Matrix { return (1.0 - a) * (1.0 - a) * loss_hessian(x, s2, mix(q)); });
    return minimize(f, g, x.count(), config_.solver, h).weights.values();
  }

  // K = d: L̃(r) ∝ sum_k w_k^2 / r_k with r = b + (1 - alpha) q, b = alpha p_pre.
  // The minimizer is r_k = max(b_k, s w_k) with s fixed by sum_k r_k = 1.
  Vector water_fill(const Vector& w) const {
    const Eigen::Index k = w.size();
    const Vector b = alpha_ * origin_;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < k; ++i) order[static_cast<std::size_t>(i)] = i;
    auto breakpoint = [&](Eigen::Index i) { return b[i] / w[i]; };
    std::sort(order.begin(), order.end(),
              [&](Eigen::Index i, Eigen::Index j) { return breakpoint(i) < breakpoint(j); });

    double inactive = b.sum();
    double active = 0.0;
    double s = 0.0;
    for (std::size_t j = 0; j < order.size(); ++j) {
      inactive -= b[order[j]];
      active += w[order[j]];
      s = (1.0 - inactive) / active;
      if (j + 1 == order.size() || s <= breakpoint(order[j + 1])) break;
    }
    const Vector r = b.cwiseMax(s * w);
    const Vector q = ((r - b) / (1.0 - alpha_)).cwiseMax(0.0);
    return q / q.sum();
  }

  PolicyConfig config_;
  PolicyContext context_;
  CounterRng rng_;
  std::uint64_t presampled_ = 0;
  Vector origin_;
  double alpha_ = 0.0;
  std::optional<Vector> cofactors_;
  Vector p_hat_;
};

class GradientUcbPolicy final : public Policy {
 public:
  GradientUcbPolicy(const PolicyConfig& config, const PolicyContext& context)
      : config_(config), context_(context) {}

  std::size_t select(const AllocationState& state) override {
    const Vector s2 = config_.use_lcb ? lcb_variances(state, config_, context_)
                                      : safe_variances(state, context_.subgaussian);
    Vector g = gradient(context_.covariates, s2, state.proportions());
    const std::uint64_t t = std::max<std::uint64_t>(state.rounds(), 2);
    for (std::size_t k = 0; k < state.arms(); ++k)
      g[static_cast<Eigen::Index>(k)] -=
          gradient_bonus(t, state.count(k), config_.bonus_multiplier, config_.bonus_inner);
    return argmin_lowest(g);
  }

 private:
  PolicyConfig config_;
  PolicyContext context_;
};

class ThompsonPolicy final : public Policy {
 public:
  ThompsonPolicy(const PolicyConfig& config, const PolicyContext& context)
      : prior_(config.prior), context_(context), rng_(context.seed) {
    require(prior_.nu0 > 0.0 && prior_.alpha0 > 0.0 && prior_.beta0 > 0.0,
            "Thompson prior needs nu0, alpha0, beta0 > 0");
  }

  std::size_t select(const AllocationState& state) override {
    Vector s2(static_cast<Eigen::Index>(state.arms()));
    for (std::size_t k = 0; k < state.arms(); ++k) {
      const ArmStats& s = state.stats(k);
      const auto n = static_cast<double>(s.count());
      const double nu_n = prior_.nu0 + n;
      const double alpha_n = prior_.alpha0 + 0.5 * n;
      const double dev = s.mean() - prior_.mu0;
      const double beta_n = prior_.beta0 + 0.5 * s.m2() + n * prior_.nu0 * dev * dev / (2.0 * nu_n);
      std::gamma_distribution<double> gamma(alpha_n, 1.0);
      s2[static_cast<Eigen::Index>(k)] = beta_n / gamma(rng_);
    }
    return argmin_lowest(gradient(context_.covariates, s2, state.proportions()));
  }

 private:
  ThompsonPrior prior_;
  PolicyContext context_;
  CounterRng rng_;
};

void sample_to(const std::vector<std::uint64_t>& target, AllocationState& state, Environment& env,
               std::uint64_t horizon) {
  bool pending = true;
  while (pending && state.rounds() < horizon) {
    pending = false;
    for (std::size_t k = 0; k < target.size() && state.rounds() < horizon; ++k) {
      if (state.count(k) >= target[k]) continue;
      state.record(k, env.query(k));
      pending = true;
    }
  }
}

}  // namespace

// ------------------------------------------------------------------ names

std::string_view to_string(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::uniform: return "uniform";
    case PolicyKind::naive_randomized: return "naive-randomized";
    case PolicyKind::gradient_ucb: return "gradient-ucb";
    case PolicyKind::thompson: return "thompson";
    case PolicyKind::oracle: return "oracle";
  }
  return "unknown";
}

PolicyKind parse_policy_kind(std::string_view name) {
  const std::string s = normalize_name(name);
  if (s == "uniform" || s == "naive") return PolicyKind::uniform;
  if (s == "naive-randomized") return PolicyKind::naive_randomized;
  if (s == "gradient-ucb") return PolicyKind::gradient_ucb;
  if (s == "thompson" || s == "ts") return PolicyKind::thompson;
  if (s == "oracle") return PolicyKind::oracle;
  throw ValidationError("unknown policy '" + std::string(name) + "'");
}

std::string_view to_string(PresampleMode mode) {
  switch (mode) {
    case PresampleMode::automatic: return "auto";
    case PresampleMode::none: return "none";
    case PresampleMode::phase0: return "phase0";
    case PresampleMode::cofactor: return "cofactor";
    case PresampleMode::kd: return "kd";
  }
  return "unknown";
}

PresampleMode parse_presample_mode(std::string_view name) {
  const std::string s = normalize_name(name);
  if (s == "auto" || s == "automatic") return PresampleMode::automatic;
  if (s == "none") return PresampleMode::none;
  if (s == "phase0") return PresampleMode::phase0;
  if (s == "cofactor") return PresampleMode::cofactor;
  if (s == "kd") return PresampleMode::kd;
  throw ValidationError("unknown presample mode '" + std::string(name) + "'");
}

// ------------------------------------------------------------------ plans

std::uint64_t PresamplePlan::total() const {
  std::uint64_t n = 0;
  for (auto c : counts) n += std::max(c, phase0);
  return n;
}

std::uint64_t default_phase0(std::uint64_t horizon) {
  require(horizon >= 1, "horizon must be positive");
  const auto n = static_cast<std::uint64_t>(std::ceil(10.0 * std::log(2.0 * static_cast<double>(horizon))));
  return std::max<std::uint64_t>(2, n);
}

PresamplePlan presample_plan(const CovariateSet& x, const Vector& variance_estimates,
                             std::uint64_t horizon, std::uint64_t phase0) {
  require(x.count() == x.dimension(), "cofactor presampling requires K = d");
  require(horizon >= 1, "horizon must be positive");
  const Vector p = optimal_weights_closed_form(x, variance_estimates).values();
  PresamplePlan plan;
  plan.phase0 = phase0;
  plan.origin = p;
  plan.counts.resize(x.count());
  const double half = 0.5 * static_cast<double>(horizon);
  for (std::size_t k = 0; k < x.count(); ++k)
    plan.counts[k] = static_cast<std::uint64_t>(std::ceil(p[static_cast<Eigen::Index>(k)] * half));
  return plan;
}

PresamplePlan kd_presample(std::size_t arms, std::uint64_t horizon) {
  require(arms >= 1, "arm count must be positive");
  const std::uint64_t n = ceil_three_quarter_power(horizon);
  if (static_cast<u128>(n) * arms >= horizon)
    throw ValidationError("budget too small: K ceil(T^{3/4}) = " + std::to_string(n * arms) +
                          " >= T = " + std::to_string(horizon));
  PresamplePlan plan;
  plan.counts.assign(arms, n);
  return plan;
}

// ------------------------------------------------------------------ state

AllocationState::AllocationState(std::size_t arms)
    : stats_(arms), p_(Vector::Zero(static_cast<Eigen::Index>(arms))) {
  require(arms >= 1, "arm count must be positive");
}

void AllocationState::record(std::size_t arm, double y) {
  require(arm < stats_.size(), "arm index out of range");
  stats_[arm].update(y);
  ++t_;
  Vector e = Vector::Zero(p_.size());
  e[static_cast<Eigen::Index>(arm)] = 1.0;
  p_ += (e - p_) / static_cast<double>(t_);
}

std::vector<std::uint64_t> AllocationState::counts() const {
  std::vector<std::uint64_t> c(stats_.size());
  for (std::size_t k = 0; k < stats_.size(); ++k) c[k] = stats_[k].count();
  return c;
}

Vector AllocationState::proportions() const {
  Vector p(static_cast<Eigen::Index>(stats_.size()));
  const double t = static_cast<double>(std::max<std::uint64_t>(t_, 1));
  for (std::size_t k = 0; k < stats_.size(); ++k)
    p[static_cast<Eigen::Index>(k)] = static_cast<double>(stats_[k].count()) / t;
  return p;
}

// ------------------------------------------------------------------ factory

std::unique_ptr<Policy> make_policy(const PolicyConfig& config, const PolicyContext& context) {
  require(static_cast<std::size_t>(context.subgaussian.size()) == context.covariates.count(),
          "sub-Gaussian vector length must equal K");
  switch (config.kind) {
    case PolicyKind::uniform: return std::make_unique<UniformPolicy>();
    case PolicyKind::oracle:
      if (!context.p_star) throw ValidationError("oracle policy requires p*");
      return std::make_unique<OraclePolicy>(*context.p_star);
    case PolicyKind::naive_randomized:
      return std::make_unique<NaiveRandomizedPolicy>(config, context);
    case PolicyKind::gradient_ucb: return std::make_unique<GradientUcbPolicy>(config, context);
    case PolicyKind::thompson: return std::make_unique<ThompsonPolicy>(config, context);
  }
  throw ValidationError("unknown policy");
}

PresampleMode effective_presample(const PolicyConfig& config, std::size_t dimension,
                                  std::size_t arms) {
  if (config.presample != PresampleMode::automatic) return config.presample;
  if (config.kind == PolicyKind::uniform || config.kind == PolicyKind::oracle)
    return PresampleMode::none;
  return arms == dimension ? PresampleMode::cofactor : PresampleMode::phase0;
}

// ------------------------------------------------------------------ episode

std::vector<std::uint64_t> checkpoint_schedule(std::uint64_t start, std::uint64_t horizon,
                                               double ratio) {
  require(ratio > 1.0, "checkpoint ratio must exceed 1");
  std::vector<std::uint64_t> out;
  std::uint64_t t = std::max<std::uint64_t>(start, 1);
  while (t < horizon) {
    out.push_back(t);
    const auto next = static_cast<std::uint64_t>(std::ceil(static_cast<double>(t) * ratio));
    t = std::max(next, t + 1);
  }
  out.push_back(horizon);
  return out;
}

RegretTrace run_episode(const DesignProblem& problem, const PolicyConfig& config,
                        const EpisodeOptions& options) {
  const std::uint64_t horizon = options.horizon;
  require(horizon >= 1, "horizon must be positive");
  const std::size_t arms = problem.arms();
  const SimplexWeights p_star = options.p_star ? *options.p_star : reference_optimum(problem);
  require(p_star.size() == arms, "reference optimum length must equal K");

  const CovariateSet& x = problem.covariates();
  const Vector& variances = problem.noise().variances();

  RegretTrace trace;
  trace.policy = config.kind;
  trace.seed = options.seed;
  trace.horizon = horizon;
  trace.loss_star = loss(x, variances, p_star.values());

  Environment env(problem, options.noise, derive_seed(options.seed, 0));
  AllocationState state(arms);
  PolicyContext context{x, problem.noise().subgaussian(), horizon, derive_seed(options.seed, 1),
                        std::nullopt};
  if (config.kind == PolicyKind::oracle) context.p_star = p_star;
  auto policy = make_policy(config, context);

  const PresampleMode mode = effective_presample(config, problem.dimension(), arms);
  PresamplePlan plan;
  plan.counts.assign(arms, 0);
  if (mode != PresampleMode::none) {
    const std::uint64_t n0 = config.phase0.value_or(default_phase0(horizon));
    require(n0 >= 2, "phase-0 length must be at least 2");
    sample_to(std::vector<std::uint64_t>(arms, n0), state, env, horizon);
    if (mode == PresampleMode::cofactor) {
      plan = presample_plan(x, safe_variances(state, problem.noise().subgaussian()), horizon, n0);
    } else if (mode == PresampleMode::kd) {
      plan = kd_presample(arms, horizon);
    } else {
      plan.counts.assign(arms, n0);
    }
    plan.phase0 = n0;
    sample_to(plan.counts, state, env, horizon);
  }
  trace.plan = plan;
  trace.plan_end = state.rounds();
  policy->begin(state);

  const auto schedule =
      checkpoint_schedule(std::max<std::uint64_t>(trace.plan_end, arms), horizon,
                          options.checkpoint_ratio);
  auto next = schedule.begin();
  auto record_due = [&] {
    while (next != schedule.end() && *next < state.rounds()) ++next;
    if (next == schedule.end() || *next != state.rounds()) return;
    TraceRow row;
    row.t = state.rounds();
    const Vector p = state.proportions();
    const double l = loss(x, variances, p);
    row.loss_gap = l - trace.loss_star;
    if (std::isfinite(l)) {
      const RegretEvaluation r =
          evaluate_regret_from_loss(l, trace.loss_star, static_cast<long long>(row.t));
      row.regret = r.value;
      if (r.clamped) ++trace.clamped;
    } else {
      row.regret = l;
    }
    row.p_min = p.minCoeff();
    row.counts = state.counts();
    trace.rows.push_back(std::move(row));
    ++next;
  };

  record_due();
  while (state.rounds() < horizon) {
    const std::size_t arm = policy->select(state);
    const double y = env.query(arm);
    state.record(arm, y);
    policy->observe(arm, y);
    record_due();
  }
  return trace;
}

}  // namespace active_design
