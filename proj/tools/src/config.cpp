#include "active_design/harness/config.hpp"

#include "active_design/harness/instance_io.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace active_design::harness {

namespace {

using Json = nlohmann::json;

[[noreturn]] void fail(const std::string& key, const std::string& what) {
  throw ValidationError("config: " + key + ": " + what);
}

void check_keys(const Json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      fail(where, "unknown key '" + key + "'");
  }
}

template <typename T>
T get(const Json& j, const char* key, const std::string& where, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception&) {
    fail(where + "." + key, "wrong type");
  }
}

std::uint64_t get_count(const Json& j, const char* key, const std::string& where,
                        std::uint64_t fallback) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    fail(where + "." + key, "must be a nonnegative integer");
  return v.get<std::uint64_t>();
}

Vector to_vector(const Json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "must be an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(where, "must be an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

InstanceSource parse_instance_source(const Json& j, const std::filesystem::path& base_dir,
                                     const std::string& where) {
  if (!j.is_object()) fail(where, "must be an object");
  InstanceSource s;
  if (j.contains("file")) {
    check_keys(j, where, {"file"});
    s.kind = InstanceSource::Kind::file;
    const std::filesystem::path p = get<std::string>(j, "file", where, "");
    s.file = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    return s;
  }
  if (j.contains("covariates")) {
    check_keys(j, where, {"covariates", "variances", "subgaussian", "beta"});
    s.kind = InstanceSource::Kind::inline_spec;
    const Json& cols = j.at("covariates");
    if (!cols.is_array() || cols.empty()) fail(where + ".covariates", "must be a nonempty array");
    const Vector first = to_vector(cols[0], where + ".covariates");
    s.covariates.resize(first.size(), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
      const Vector c = to_vector(cols[k], where + ".covariates");
      if (c.size() != first.size()) fail(where + ".covariates", "rows must have equal length");
      s.covariates.col(static_cast<Eigen::Index>(k)) = c;
    }
    if (!j.contains("variances")) fail(where, "missing 'variances'");
    s.variances = to_vector(j.at("variances"), where + ".variances");
    if (j.contains("subgaussian")) s.subgaussian = to_vector(j.at("subgaussian"), where + ".subgaussian");
    if (j.contains("beta")) s.beta = to_vector(j.at("beta"), where + ".beta");
    return s;
  }
  const std::string gen = get<std::string>(j, "generator", where, "");
  if (gen == "random") {
    check_keys(j, where, {"generator", "dimension", "arms", "seed", "variance_min", "variance_max",
                          "canonical"});
    s.kind = InstanceSource::Kind::random;
    RandomInstanceOptions& o = s.random;
    o.dimension = get_count(j, "dimension", where, o.dimension);
    o.arms = get_count(j, "arms", where, o.dimension);
    o.seed = get_count(j, "seed", where, o.seed);
    o.variance_min = get<double>(j, "variance_min", where, o.variance_min);
    o.variance_max = get<double>(j, "variance_max", where, o.variance_max);
    o.canonical = get<bool>(j, "canonical", where, o.canonical);
  } else if (gen == "hard") {
    check_keys(j, where, {"generator", "gap"});
    s.kind = InstanceSource::Kind::hard;
    if (j.contains("gap") && j.at("gap").is_string()) {
      if (j.at("gap").get<std::string>() != "inv_sqrt_T") fail(where + ".gap", "unknown gap rule");
      s.gap_inv_sqrt_horizon = true;
    } else {
      s.gap = get<double>(j, "gap", where, 1.0);
    }
  } else if (gen == "duplicate") {
    check_keys(j, where, {"generator", "base", "arm", "gap"});
    s.kind = InstanceSource::Kind::duplicate;
    if (!j.contains("base")) fail(where, "missing 'base'");
    s.base = std::make_shared<InstanceSource>(parse_instance_source(j.at("base"), base_dir, where + ".base"));
    s.arm = get_count(j, "arm", where, 0);
    if (j.contains("gap") && j.at("gap").is_string()) {
      if (j.at("gap").get<std::string>() != "inv_sqrt_T") fail(where + ".gap", "unknown gap rule");
      s.gap_inv_sqrt_horizon = true;
    } else {
      s.gap = get<double>(j, "gap", where, 1.0);
    }
  } else {
    fail(where, "needs 'file', 'covariates' or a generator (random, hard, duplicate)");
  }
  return s;
}

NamedPolicy parse_policy(const Json& j, const std::string& where) {
  NamedPolicy p;
  if (j.is_string()) {
    p.config.kind = parse_policy_kind(j.get<std::string>());
    p.label = std::string(to_string(p.config.kind));
    return p;
  }
  if (!j.is_object()) fail(where, "must be a name or an object");
  check_keys(j, where, {"name", "label", "presample", "phase0", "delta", "bonus_multiplier",
                        "bonus_inner", "use_lcb", "lcb_scale", "compensate_presample",
                        "recompute_stride", "prior", "solver"});
  if (!j.contains("name")) fail(where, "missing 'name'");
  PolicyConfig& c = p.config;
  c.kind = parse_policy_kind(get<std::string>(j, "name", where, ""));
  p.label = get<std::string>(j, "label", where, std::string(to_string(c.kind)));
  if (j.contains("presample")) c.presample = parse_presample_mode(get<std::string>(j, "presample", where, ""));
  if (j.contains("phase0")) c.phase0 = get_count(j, "phase0", where, 0);
  if (j.contains("delta")) {
    c.delta = get<double>(j, "delta", where, 0.0);
    if (!(*c.delta > 0.0 && *c.delta < 1.0)) fail(where + ".delta", "must lie in (0, 1)");
  }
  c.bonus_multiplier = get<double>(j, "bonus_multiplier", where, c.bonus_multiplier);
  c.bonus_inner = get<double>(j, "bonus_inner", where, c.bonus_inner);
  c.use_lcb = get<bool>(j, "use_lcb", where, c.use_lcb);
  c.lcb_scale = get<double>(j, "lcb_scale", where, c.lcb_scale);
  if (c.lcb_scale < 0.0) fail(where + ".lcb_scale", "must be nonnegative");
  c.compensate_presample = get<bool>(j, "compensate_presample", where, c.compensate_presample);
  c.recompute_stride = get_count(j, "recompute_stride", where, c.recompute_stride);
  if (c.recompute_stride < 1) fail(where + ".recompute_stride", "must be positive");
  if (j.contains("prior")) {
    const Json& pr = j.at("prior");
    check_keys(pr, where + ".prior", {"mu0", "nu0", "alpha0", "beta0"});
    c.prior.mu0 = get<double>(pr, "mu0", where + ".prior", c.prior.mu0);
    c.prior.nu0 = get<double>(pr, "nu0", where + ".prior", c.prior.nu0);
    c.prior.alpha0 = get<double>(pr, "alpha0", where + ".prior", c.prior.alpha0);
    c.prior.beta0 = get<double>(pr, "beta0", where + ".prior", c.prior.beta0);
  }
  if (j.contains("solver")) {
    const Json& sv = j.at("solver");
    check_keys(sv, where + ".solver", {"max_iterations", "tolerance", "floor"});
    c.solver.max_iterations = get<int>(sv, "max_iterations", where + ".solver", c.solver.max_iterations);
    c.solver.tolerance = get<double>(sv, "tolerance", where + ".solver", c.solver.tolerance);
    c.solver.floor = get<double>(sv, "floor", where + ".solver", c.solver.floor);
  }
  return p;
}

VerifyConfig parse_verify(const Json& j) {
  const std::string where = "verify";
  check_keys(j, where, {"cases", "trials", "halving_horizon", "variance", "noise", "seed",
                        "direction_check"});
  VerifyConfig v;
  if (j.contains("cases")) {
    v.cases.clear();
    for (const Json& c : j.at("cases")) {
      check_keys(c, where + ".cases", {"n", "delta"});
      VerifyCase vc;
      vc.n = get_count(c, "n", where + ".cases", vc.n);
      vc.delta = get<double>(c, "delta", where + ".cases", vc.delta);
      if (vc.n < 2) fail(where + ".cases.n", "must be at least 2");
      if (!(vc.delta > 0.0 && vc.delta < 1.0)) fail(where + ".cases.delta", "must lie in (0, 1)");
      v.cases.push_back(vc);
    }
  }
  v.trials = get_count(j, "trials", where, v.trials);
  v.halving_horizon = get_count(j, "halving_horizon", where, v.halving_horizon);
  v.variance = get<double>(j, "variance", where, v.variance);
  if (j.contains("noise")) v.noise = parse_noise_model(get<std::string>(j, "noise", where, ""));
  v.seed = get_count(j, "seed", where, v.seed);
  v.include_direction_check = get<bool>(j, "direction_check", where, v.include_direction_check);
  if (v.trials < 1) fail(where + ".trials", "must be positive");
  if (!(v.variance > 0.0)) fail(where + ".variance", "must be positive");
  return v;
}

}  // namespace

bool InstanceSource::depends_on_horizon() const {
  return gap_inv_sqrt_horizon || (base && base->depends_on_horizon());
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  Json j;
  try {
    j = Json::parse(json_text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  if (!j.is_object()) fail("<root>", "must be an object");
  check_keys(j, "<root>", {"instance", "noise", "policies", "budgets", "seeds", "checkpoints",
                           "output", "verify", "description"});

  ExperimentConfig c;
  if (j.contains("instance")) c.instance = parse_instance_source(j.at("instance"), base_dir, "instance");
  if (j.contains("noise")) c.noise = parse_noise_model(get<std::string>(j, "noise", "<root>", ""));

  if (j.contains("policies")) {
    const Json& ps = j.at("policies");
    if (!ps.is_array()) fail("policies", "must be an array");
    std::set<std::string> labels;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      NamedPolicy p = parse_policy(ps[i], "policies[" + std::to_string(i) + "]");
      if (!labels.insert(p.label).second)
        fail("policies", "duplicate label '" + p.label + "' (set 'label')");
      c.policies.push_back(std::move(p));
    }
  }

  if (j.contains("budgets")) {
    const Json& b = j.at("budgets");
    if (!b.is_array()) fail("budgets", "must be an array");
    for (const Json& t : b) {
      if (!t.is_number_integer() || t.get<long long>() < 1) fail("budgets", "must be positive integers");
      c.budgets.push_back(t.get<std::uint64_t>());
    }
    for (std::size_t i = 1; i < c.budgets.size(); ++i)
      if (c.budgets[i] <= c.budgets[i - 1]) fail("budgets", "must be strictly increasing");
  }

  if (!j.contains("seeds")) {
    for (std::uint64_t s = 0; s < 25; ++s) c.seeds.push_back(s);
  } else if (j.at("seeds").is_number_integer()) {
    const long long n = j.at("seeds").get<long long>();
    if (n < 1) fail("seeds", "count must be positive");
    for (long long s = 0; s < n; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  } else if (j.at("seeds").is_array()) {
    std::set<std::uint64_t> seen;
    for (const Json& s : j.at("seeds")) {
      if (!s.is_number_integer() || s.get<long long>() < 0) fail("seeds", "must be nonnegative integers");
      if (!seen.insert(s.get<std::uint64_t>()).second) fail("seeds", "must be distinct");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  } else {
    fail("seeds", "must be a count or an array");
  }

  if (j.contains("checkpoints")) {
    const Json& cp = j.at("checkpoints");
    if (cp.is_number()) {
      c.checkpoint_ratio = cp.get<double>();
    } else {
      check_keys(cp, "checkpoints", {"ratio"});
      c.checkpoint_ratio = get<double>(cp, "ratio", "checkpoints", c.checkpoint_ratio);
    }
    if (!(c.checkpoint_ratio > 1.0)) fail("checkpoints", "ratio must exceed 1");
  }
  if (j.contains("output")) c.output = get<std::string>(j, "output", "<root>", "");
  if (j.contains("verify")) c.verify = parse_verify(j.at("verify"));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), path.parent_path());
}

DesignProblem build_instance(const InstanceSource& source, NoiseModel noise, std::uint64_t horizon,
                             std::vector<std::string>* warnings) {
  const double gap = source.gap_inv_sqrt_horizon
                         ? 1.0 / std::sqrt(static_cast<double>(std::max<std::uint64_t>(horizon, 1)))
                         : source.gap;
  switch (source.kind) {
    case InstanceSource::Kind::file: {
      LoadedInstance loaded = load_instance(source.file);
      if (warnings) warnings->insert(warnings->end(), loaded.warnings.begin(), loaded.warnings.end());
      return loaded.problem;
    }
    case InstanceSource::Kind::random: {
      RandomInstanceOptions o = source.random;
      o.noise = noise;
      return make_random_instance(o);
    }
    case InstanceSource::Kind::hard: {
      const DesignProblem p = make_hard_instance(gap);
      const Vector& s2 = p.noise().variances();
      return DesignProblem(p.covariates(), NoiseSpec(s2, implied_subgaussian(noise, s2)),
                           p.beta_star());
    }
    case InstanceSource::Kind::duplicate:
      return make_duplicate_instance(build_instance(*source.base, noise, horizon, warnings), source.arm,
                                     gap, noise);
    case InstanceSource::Kind::inline_spec: {
      CovariateSet x(source.covariates);
      if (warnings && x.max_norm_deviation() > 1e-6)
        warnings->push_back("instance: covariates renormalized to unit norm");
      const Vector kappa = source.subgaussian.value_or(implied_subgaussian(noise, source.variances));
      return DesignProblem(std::move(x), NoiseSpec(source.variances, kappa), source.beta);
    }
  }
  throw ValidationError("unknown instance source");
}

}  // namespace active_design::harness
