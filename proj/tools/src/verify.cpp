#include "active_design/harness/verify.hpp"

#include "active_design/estimation.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace active_design::harness {

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Empirical variance of n fresh draws from a one-arm environment.
double sample_variance(Environment& env, std::uint64_t n) {
  ArmStats stats;
  for (std::uint64_t i = 0; i < n; ++i) stats.update(env.query(0));
  return *stats.variance();
}

Environment one_arm(const VerifyConfig& config, std::uint64_t stream) {
  Matrix x(1, 1);
  x << 1.0;
  Vector s2(1);
  s2 << config.variance;
  Vector beta(1);
  beta << 0.0;
  DesignProblem problem(CovariateSet(x), NoiseSpec(s2, implied_subgaussian(config.noise, s2)), beta);
  return Environment(std::move(problem), config.noise, derive_seed(config.seed, stream));
}

CoverageRow finish(CoverageRow row, double nominal) {
  const auto n = static_cast<double>(row.trials);
  row.frequency = static_cast<double>(row.violations) / n;
  row.stderr_null = std::sqrt(nominal * (1.0 - nominal) / n);
  row.bound = nominal + 3.0 * row.stderr_null;
  row.pass = row.frequency <= row.bound;
  return row;
}

}  // namespace

std::vector<CoverageRow> verify_concentration(const VerifyConfig& config) {
  const double sigma2 = config.variance;
  const double kappa2 = implied_subgaussian(config.noise, sigma2);
  std::vector<VerifyCase> cases = config.cases;
  if (config.include_direction_check) cases.push_back({50, 0.999});

  std::vector<CoverageRow> rows;
  std::uint64_t stream = 0;
  for (const VerifyCase& c : cases) {
    Environment env = one_arm(config, stream++);
    const double radius = variance_radius(c.n, kappa2, c.delta);
    CoverageRow row;
    row.kind = "radius";
    row.n = c.n;
    row.delta = c.delta;
    row.kappa2 = kappa2;
    row.sigma2 = sigma2;
    row.trials = config.trials;
    row.informational = c.delta > 0.5;
    for (std::uint64_t i = 0; i < config.trials; ++i)
      if (std::abs(sample_variance(env, c.n) - sigma2) > radius) ++row.violations;
    rows.push_back(finish(row, c.delta));
  }

  const std::uint64_t t = config.halving_horizon;
  if (t >= 2) {
    Environment env = one_arm(config, stream++);
    CoverageRow row;
    row.kind = "halving";
    row.n = halving_sample_count(kappa2, sigma2, t);
    row.delta = 1.0 / (static_cast<double>(t) * static_cast<double>(t));
    row.kappa2 = kappa2;
    row.sigma2 = sigma2;
    row.trials = config.trials;
    for (std::uint64_t i = 0; i < config.trials; ++i)
      if (std::abs(sample_variance(env, row.n) - sigma2) > 0.5 * sigma2) ++row.violations;
    rows.push_back(finish(row, row.delta));
  }
  return rows;
}

void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows) {
  out << "kind,n,delta,kappa2,sigma2,trials,violations,frequency,stderr,bound,pass,informational\n";
  for (const CoverageRow& r : rows)
    out << r.kind << ',' << r.n << ',' << num(r.delta) << ',' << num(r.kappa2) << ',' << num(r.sigma2)
        << ',' << r.trials << ',' << r.violations << ',' << num(r.frequency) << ','
        << num(r.stderr_null) << ',' << num(r.bound) << ',' << (r.pass ? "true" : "false") << ','
        << (r.informational ? "true" : "false") << '\n';
}

}  // namespace active_design::harness
