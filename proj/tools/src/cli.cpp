#include "active_design/harness/cli.hpp"

#include "active_design/geometry.hpp"
#include "active_design/harness/config.hpp"
#include "active_design/harness/instance_io.hpp"
#include "active_design/harness/sweep.hpp"
#include "active_design/harness/verify.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace active_design::harness {

namespace {

using Json = nlohmann::json;

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  bool quiet = false;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

Json to_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

// An instance file, or a JSON config whose instance is built for its first budget.
DesignProblem read_problem(const std::string& path, bool quiet) {
  std::vector<std::string> warnings;
  DesignProblem problem = [&] {
    if (std::filesystem::path(path).extension() == ".json") {
      const ExperimentConfig config = load_config(path);
      const std::uint64_t t = config.budgets.empty() ? 1 : config.budgets.front();
      return build_instance(config.instance, config.noise, t, &warnings);
    }
    LoadedInstance loaded = load_instance(path);
    warnings = loaded.warnings;
    return loaded.problem;
  }();
  if (!quiet)
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return problem;
}

void print_certificate(std::ostream& out, const EllipsoidCertificate& c) {
  out << "arm  p_k              m_k              slack            active\n";
  for (Eigen::Index k = 0; k < c.m.size(); ++k) {
    char line[128];
    std::snprintf(line, sizeof line, "%-4ld %-16.10g %-16.10g %-16.10g %s\n", static_cast<long>(k),
                  c.weights[k], c.m[k], c.slack[k], c.active[static_cast<std::size_t>(k)] ? "yes" : "no");
    out << line;
  }
  out << "level " << num(c.level) << "  certified " << (c.certified ? "yes" : "no") << '\n';
}

Json certificate_json(const EllipsoidCertificate& c) {
  return {{"level", c.level},       {"m", to_json(c.m)},
          {"slack", to_json(c.slack)}, {"weights", to_json(c.weights)},
          {"active", c.active},     {"certified", c.certified}};
}

int cmd_solve(const std::string& path, const GlobalOptions& g) {
  const DesignProblem problem = read_problem(path, g.quiet);
  const bool square = problem.arms() == problem.dimension();
  SimplexWeights p_star = SimplexWeights::uniform(problem.arms());
  std::optional<SolverResult> solved;
  if (square) {
    p_star = optimal_weights_closed_form(problem);
  } else {
    solved = minimize_design_loss(problem.covariates(), problem.noise().variances());
    p_star = reference_optimum(problem);
  }
  const double l_star = loss(problem, p_star);
  const ProblemConstants pc = problem_constants(problem);
  const EllipsoidCertificate cert = kkt_certificate(problem, p_star);

  if (g.format == "json") {
    Json j{{"dimension", problem.dimension()}, {"arms", problem.arms()},
           {"p_star", to_json(p_star.values())}, {"loss", l_star},
           {"lambda_min", pc.lambda_min}, {"certificate", certificate_json(cert)}};
    if (solved) j["solver"] = {{"gap", solved->gap}, {"iterations", solved->iterations},
                               {"converged", solved->converged},
                               {"weights", to_json(solved->certificate_weights())}};
    if (pc.mu) j["mu"] = *pc.mu;
    if (pc.eta) j["eta"] = *pc.eta;
    if (pc.smoothness) j["smoothness"] = *pc.smoothness;
    std::cout << j.dump(2) << '\n';
    return 0;
  }
  std::cout << "d " << problem.dimension() << "  K " << problem.arms() << '\n';
  std::cout << "p*";
  const Vector& shown = p_star.values();
  for (Eigen::Index k = 0; k < shown.size(); ++k) std::cout << ' ' << num(shown[k]);
  std::cout << "\nL(p*) " << num(l_star) << '\n';
  if (solved)
    std::cout << "solver gap " << num(solved->gap) << "  iterations " << solved->iterations
              << (solved->converged ? "" : "  (iteration limit)") << '\n';
  std::cout << "lambda_min " << num(pc.lambda_min) << '\n';
  if (pc.mu) std::cout << "mu " << num(*pc.mu) << '\n';
  if (pc.eta) std::cout << "eta " << num(*pc.eta) << '\n';
  if (pc.smoothness) std::cout << "C_S " << num(*pc.smoothness) << '\n';
  print_certificate(std::cout, cert);
  return 0;
}

int cmd_geometry(const std::string& path, const GlobalOptions& g) {
  const DesignProblem problem = read_problem(path, g.quiet);
  const SimplexWeights p_star = reference_optimum(problem);
  const EllipsoidCertificate cert = kkt_certificate(problem, p_star);
  const DualReport dual = dual_feasibility(problem, cert);
  if (g.format == "json") {
    std::cout << Json{{"certificate", certificate_json(cert)},
                      {"dual",
                       {{"positive_definite", dual.positive_definite},
                        {"max_constraint", dual.max_constraint},
                        {"feasible", dual.feasible},
                        {"dual_value", dual.dual_value},
                        {"primal_value", dual.primal_value},
                        {"gap", dual.gap},
                        {"feasible_dual_value", dual.feasible_dual_value}}}}
                     .dump(2)
              << '\n';
    return 0;
  }
  print_certificate(std::cout, cert);
  std::cout << "W = Omega^-2 / level  positive definite " << (dual.positive_definite ? "yes" : "no")
            << '\n'
            << "max v_k^T W v_k " << num(dual.max_constraint) << (dual.feasible ? "" : "  (infeasible)")
            << '\n'
            << "dual Tr(sqrt W)^2 " << num(dual.dual_value) << '\n'
            << "primal L(p) " << num(dual.primal_value) << '\n'
            << "duality gap " << num(dual.gap) << '\n';
  return 0;
}

int cmd_simulate(const std::string& path, const GlobalOptions& g, const std::string& policy_label,
                 std::optional<std::uint64_t> horizon) {
  ExperimentConfig config = load_config(path);
  if (config.policies.empty()) throw ValidationError("config: policies: at least one policy required");
  const NamedPolicy* policy = &config.policies.front();
  if (!policy_label.empty()) {
    policy = nullptr;
    for (const auto& p : config.policies)
      if (p.label == policy_label) policy = &p;
    if (!policy) throw ValidationError("no policy labelled '" + policy_label + "'");
  }
  const std::uint64_t t = horizon ? *horizon : (config.budgets.empty() ? 0 : config.budgets.front());
  if (t == 0) throw ValidationError("config: budgets: a horizon is required");
  const DesignProblem problem = build_instance(config.instance, config.noise, t);
  EpisodeOptions eo;
  eo.horizon = t;
  eo.seed = g.seed ? *g.seed : config.seeds.front();
  eo.noise = config.noise;
  eo.checkpoint_ratio = config.checkpoint_ratio;
  const RegretTrace trace = run_episode(problem, policy->config, eo);

  std::ostringstream body;
  if (g.format == "json") {
    Json rows = Json::array();
    for (const TraceRow& r : trace.rows)
      rows.push_back({{"t", r.t}, {"regret", r.regret}, {"loss_gap", r.loss_gap}, {"p_min", r.p_min}});
    body << Json{{"policy", policy->label}, {"T", t}, {"seed", eo.seed}, {"rows", rows}}.dump(2) << '\n';
  } else {
    write_trace_csv(body, trace);
  }
  if (g.out.empty()) {
    std::cout << body.str();
  } else {
    std::filesystem::create_directories(g.out);
    const auto file = std::filesystem::path(g.out) /
                      (policy->label + "_T" + std::to_string(t) + "_seed" + std::to_string(eo.seed) +
                       (g.format == "json" ? ".json" : ".csv"));
    std::ofstream(file, std::ios::binary) << body.str();
    if (!g.quiet) std::cout << "wrote " << file.string() << '\n';
  }
  return 0;
}

int cmd_sweep(const std::string& path, const GlobalOptions& g) {
  ExperimentConfig config = load_config(path);
  if (!g.out.empty()) config.output = g.out;
  if (g.seed) config.seeds = {*g.seed};
  SweepOptions options;
  options.format = g.format == "json" ? OutputFormat::json : OutputFormat::csv;
  const SweepResult result = run_sweep(config, options);
  if (!g.quiet) {
    std::cout << "policy               T          mean_regret      stderr           seeds\n";
    for (const PolicySummary& s : result.summaries) {
      for (const SummaryRow& r : s.rows) {
        char line[160];
        std::snprintf(line, sizeof line, "%-20s %-10llu %-16.6e %-16.6e %zu\n", s.label.c_str(),
                      static_cast<unsigned long long>(r.horizon), r.mean_regret, r.stderr_regret, r.seeds);
        std::cout << line;
      }
    }
    for (const PolicySummary& s : result.summaries) {
      std::cout << s.label << ": ";
      if (s.slope)
        std::cout << "slope " << num(s.slope->slope) << "  R^2 " << num(s.slope->r_squared)
                  << (s.first_budget_excluded ? "  (smallest budget excluded)" : "");
      else
        std::cout << "no slope (needs three budgets)";
      std::cout << "  time " << num(s.seconds) << " s\n";
    }
    std::cout << "outputs in " << config.output.string() << '\n';
  }
  if (result.failures() > 0) {
    std::cerr << result.failures() << " episode(s) failed; see failures file\n";
    return 2;
  }
  return 0;
}

int cmd_verify(const std::string& path, const GlobalOptions& g) {
  ExperimentConfig config = load_config(path);
  if (g.seed) config.verify.seed = *g.seed;
  const std::vector<CoverageRow> rows = verify_concentration(config.verify);
  std::ostringstream body;
  if (g.format == "json") {
    Json arr = Json::array();
    for (const CoverageRow& r : rows)
      arr.push_back({{"kind", r.kind}, {"n", r.n}, {"delta", r.delta}, {"kappa2", r.kappa2},
                     {"sigma2", r.sigma2}, {"trials", r.trials}, {"violations", r.violations},
                     {"frequency", r.frequency}, {"stderr", r.stderr_null}, {"bound", r.bound},
                     {"pass", r.pass}, {"informational", r.informational}});
    body << arr.dump(2) << '\n';
  } else {
    write_coverage_csv(body, rows);
  }
  if (g.out.empty()) {
    std::cout << body.str();
  } else {
    std::filesystem::create_directories(g.out);
    const auto file = std::filesystem::path(g.out) / (g.format == "json" ? "coverage.json" : "coverage.csv");
    std::ofstream(file, std::ios::binary) << body.str();
    if (!g.quiet) std::cout << "wrote " << file.string() << '\n';
  }
  bool ok = true;
  for (const CoverageRow& r : rows) ok = ok && (r.pass || r.informational);
  return ok ? 0 : 2;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Online A-optimal design for heteroscedastic active linear regression"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Episode seed (simulate) or single seed (sweep)");
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--quiet", g.quiet, "Suppress progress output");

  std::string target;
  std::string policy_label;
  std::uint64_t horizon = 0;
  auto* solve = app.add_subcommand("solve", "Optimal design, constants and KKT table for an instance");
  solve->add_option("instance", target, "Instance file or JSON config")->required();
  auto* simulate = app.add_subcommand("simulate", "Run one episode and emit its trace");
  simulate->add_option("config", target, "JSON config")->required();
  simulate->add_option("--policy", policy_label, "Policy label (default: first)");
  auto* horizon_opt = simulate->add_option("--horizon", horizon, "Horizon T (default: first budget)");
  auto* sweep = app.add_subcommand("sweep", "Multi-policy, multi-budget, multi-seed study");
  sweep->add_option("config", target, "JSON config")->required();
  auto* verify = app.add_subcommand("verify", "Monte Carlo coverage of the concentration bounds");
  verify->add_option("config", target, "JSON config")->required();
  auto* geometry = app.add_subcommand("geometry", "Dual ellipsoid report at the reference optimum");
  geometry->add_option("instance", target, "Instance file or JSON config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*solve) return cmd_solve(target, g);
    if (*simulate)
      return cmd_simulate(target, g, policy_label,
                          *horizon_opt ? std::optional<std::uint64_t>(horizon) : std::nullopt);
    if (*sweep) return cmd_sweep(target, g);
    if (*verify) return cmd_verify(target, g);
    if (*geometry) return cmd_geometry(target, g);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace active_design::harness
