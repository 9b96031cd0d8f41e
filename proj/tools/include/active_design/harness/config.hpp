#pragma once

// Experiment description read from a JSON file. Keys:
//
//   instance     object, see InstanceSource
//   noise        "gaussian" | "uniform" | "rademacher"       (default gaussian)
//   policies     array of names or objects {"name": ..., hyperparameters}
//   budgets      increasing array of horizons T
//   seeds        array of distinct seeds, or a count n meaning 0..n-1 (default 25)
//   checkpoints  ratio, or {"ratio": r}                       (default 1.2)
//   output       output directory
//   verify       concentration study, see VerifyConfig

#include "active_design/environment.hpp"
#include "active_design/policies.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace active_design::harness {

/// Where the problem instance comes from.
///
///   {"file": "path"}                                  instance file
///   {"generator": "random", "dimension", "arms", "seed",
///    "variance_min", "variance_max", "canonical"}
///   {"generator": "hard", "gap"}
///   {"generator": "duplicate", "base": {...}, "arm", "gap"}   gap may be "inv_sqrt_T"
///   {"covariates": [[...], ...], "variances": [...],
///    "subgaussian": [...], "beta": [...]}             inline
struct InstanceSource {
  enum class Kind { file, random, hard, duplicate, inline_spec };
  Kind kind = Kind::random;
  std::filesystem::path file;
  RandomInstanceOptions random;
  double gap = 1.0;
  bool gap_inv_sqrt_horizon = false;
  std::size_t arm = 0;
  std::shared_ptr<InstanceSource> base;
  Matrix covariates;
  Vector variances;
  std::optional<Vector> subgaussian;
  std::optional<Vector> beta;

  /// True when the instance changes with the horizon.
  bool depends_on_horizon() const;
};

struct NamedPolicy {
  std::string label;  ///< used in file names
  PolicyConfig config;
};

struct VerifyCase {
  std::uint64_t n = 50;
  double delta = 0.05;
};

struct VerifyConfig {
  std::vector<VerifyCase> cases{{50, 0.05}, {200, 0.01}};
  std::uint64_t trials = 1000;
  std::uint64_t halving_horizon = 100;
  double variance = 1.0;
  NoiseModel noise = NoiseModel::gaussian;
  std::uint64_t seed = 0;
  bool include_direction_check = true;  ///< adds a delta = 0.999 row
};

struct ExperimentConfig {
  InstanceSource instance;
  NoiseModel noise = NoiseModel::gaussian;
  std::vector<NamedPolicy> policies;
  std::vector<std::uint64_t> budgets;
  std::vector<std::uint64_t> seeds;
  double checkpoint_ratio = 1.2;
  std::filesystem::path output = "out";
  VerifyConfig verify;
};

/// Throws ValidationError with the offending key on schema violations.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Builds the instance for horizon T.
DesignProblem build_instance(const InstanceSource& source, NoiseModel noise, std::uint64_t horizon,
                             std::vector<std::string>* warnings = nullptr);

}  // namespace active_design::harness
