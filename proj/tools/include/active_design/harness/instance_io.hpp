#pragma once

// Plain-text instance files:
//
//   d K
//   K lines of d covariate components
//   one line of K variances
//   optional line of K sub-Gaussian parameters kappa^2
//   optional line of d components of beta*
//
// Blank lines and text after '#' are ignored. When d = K a single optional
// line is read as kappa^2.

#include "active_design/design_core.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace active_design::harness {

struct LoadedInstance {
  DesignProblem problem;
  std::vector<std::string> warnings;
};

/// Throws ValidationError("<path>:<line>: ...") on malformed input.
LoadedInstance load_instance(const std::filesystem::path& path);
LoadedInstance parse_instance(std::istream& in, const std::string& name = "<input>");

void save_instance(const std::filesystem::path& path, const DesignProblem& problem);
void write_instance(std::ostream& out, const DesignProblem& problem);

}  // namespace active_design::harness
