#pragma once

#include "active_design/harness/config.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace active_design::harness {

struct CoverageRow {
  std::string kind;  ///< "radius" or "halving"
  std::uint64_t n = 0;
  double delta = 0.0;  ///< nominal failure probability (1/T^2 for halving)
  double kappa2 = 0.0;
  double sigma2 = 0.0;
  std::uint64_t trials = 0;
  std::uint64_t violations = 0;
  double frequency = 0.0;
  double stderr_null = 0.0;  ///< sqrt(delta (1 - delta) / trials)
  double bound = 0.0;        ///< delta + 3 stderr
  bool pass = false;
  bool informational = false;
};

/// Monte Carlo violation frequencies of the variance radius and of the
/// halving event.
std::vector<CoverageRow> verify_concentration(const VerifyConfig& config);

void write_coverage_csv(std::ostream& out, const std::vector<CoverageRow>& rows);

}  // namespace active_design::harness
