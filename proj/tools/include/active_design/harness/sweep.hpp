#pragma once

#include "active_design/harness/config.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace active_design::harness {

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::size_t points = 0;
  std::vector<std::string> warnings;
};

struct SlopePoint {
  double horizon = 0.0;
  double regret = 0.0;
};

/// OLS of log10(regret) on log10(T). Nonpositive points are dropped with a
/// warning; fewer than three remaining points throws ValidationError.
SlopeFit fit_slope(const std::vector<SlopePoint>& points);

struct EpisodeOutcome {
  std::size_t policy = 0;
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  std::optional<RegretTrace> trace;
  std::string error;  ///< non-empty when the episode failed
};

struct SummaryRow {
  std::uint64_t horizon = 0;
  double mean_regret = 0.0;
  double stderr_regret = 0.0;
  std::size_t seeds = 0;
  std::uint64_t min_count = 0;  ///< smallest final T_k over seeds
  std::uint64_t phase0 = 0;
};

struct PolicySummary {
  std::string label;
  std::vector<SummaryRow> rows;
  std::optional<SlopeFit> slope;
  bool first_budget_excluded = false;
  double seconds = 0.0;  ///< wall clock, reported on stdout only
};

struct SweepResult {
  std::vector<EpisodeOutcome> episodes;  ///< ordered by (policy, T, seed)
  std::vector<PolicySummary> summaries;
  std::size_t failures() const;
};

enum class OutputFormat { csv, json };

struct SweepOptions {
  std::size_t threads = 0;  ///< 0: ACTIVE_DESIGN_THREADS or the hardware count
  bool write = true;
  OutputFormat format = OutputFormat::csv;
};

/// Worker count: ACTIVE_DESIGN_THREADS when set, else the hardware count.
std::size_t default_threads();

SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options = {});

/// summary_<policy>, traces/<policy>_T<T>_seed<s> and, with three or more
/// budgets, slopes.
void write_sweep(const SweepResult& result, const ExperimentConfig& config,
                 const std::filesystem::path& dir, OutputFormat format);

void write_trace_csv(std::ostream& out, const RegretTrace& trace);

}  // namespace active_design::harness
