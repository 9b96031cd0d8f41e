#include "active_design/harness/sweep.hpp"

#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <stdexcept>
#include <thread>

namespace active_design::harness {

namespace {

using Json = nlohmann::json;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Json json_num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  return out;
}

std::string trace_stem(const std::string& label, std::uint64_t horizon, std::uint64_t seed) {
  return label + "_T" + std::to_string(horizon) + "_seed" + std::to_string(seed);
}

struct Prepared {
  DesignProblem problem;
  SimplexWeights p_star;
};

}  // namespace

SlopeFit fit_slope(const std::vector<SlopePoint>& points) {
  SlopeFit fit;
  std::vector<double> xs, ys;
  for (const SlopePoint& p : points) {
    if (!(p.regret > 0.0) || !(p.horizon > 0.0) || !std::isfinite(p.regret)) {
      fit.warnings.push_back("excluded nonpositive point at T=" + num(p.horizon));
      continue;
    }
    xs.push_back(std::log10(p.horizon));
    ys.push_back(std::log10(p.regret));
  }
  if (xs.size() < 3) throw ValidationError("slope fit needs at least 3 positive points");
  const auto n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("slope fit needs distinct horizons");
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy > 0.0 ? sxy * sxy / (sxx * syy) : 1.0;
  fit.points = xs.size();
  return fit;
}

std::size_t SweepResult::failures() const {
  std::size_t n = 0;
  for (const auto& e : episodes) n += e.error.empty() ? 0 : 1;
  return n;
}

std::size_t default_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("ACTIVE_DESIGN_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v >= 1) n = static_cast<std::size_t>(v);
  }
  return n;
}

SweepResult run_sweep(const ExperimentConfig& config, const SweepOptions& options) {
  if (config.policies.empty()) throw ValidationError("config: policies: at least one policy required");
  if (config.budgets.empty()) throw ValidationError("config: budgets: at least one budget required");
  if (config.seeds.empty()) throw ValidationError("config: seeds: at least one seed required");

  // Instances and reference optima, one per horizon when the instance depends on T.
  std::map<std::uint64_t, Prepared> prepared;
  for (std::uint64_t t : config.budgets) {
    if (!config.instance.depends_on_horizon() && !prepared.empty()) {
      prepared.emplace(t, prepared.begin()->second);
      continue;
    }
    DesignProblem problem = build_instance(config.instance, config.noise, t);
    SimplexWeights p_star = reference_optimum(problem);
    prepared.emplace(t, Prepared{std::move(problem), std::move(p_star)});
  }

  SweepResult result;
  for (std::size_t p = 0; p < config.policies.size(); ++p)
    for (std::uint64_t t : config.budgets)
      for (std::uint64_t s : config.seeds) result.episodes.push_back({p, t, s, std::nullopt, {}});

  std::vector<double> seconds(config.policies.size(), 0.0);
  std::vector<double> elapsed(result.episodes.size(), 0.0);

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < result.episodes.size(); i = next++) {
      EpisodeOutcome& e = result.episodes[i];
      const Prepared& prep = prepared.at(e.horizon);
      EpisodeOptions eo;
      eo.horizon = e.horizon;
      eo.seed = e.seed;
      eo.noise = config.noise;
      eo.checkpoint_ratio = config.checkpoint_ratio;
      eo.p_star = prep.p_star;
      const auto start = std::chrono::steady_clock::now();
      try {
        e.trace = run_episode(prep.problem, config.policies[e.policy].config, eo);
      } catch (const std::exception& ex) {
        e.error = ex.what();
      }
      elapsed[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };
  const std::size_t threads =
      std::min(options.threads ? options.threads : default_threads(), result.episodes.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (std::size_t i = 0; i < result.episodes.size(); ++i)
    seconds[result.episodes[i].policy] += elapsed[i];

  for (std::size_t p = 0; p < config.policies.size(); ++p) {
    const NamedPolicy& policy = config.policies[p];
    PolicySummary summary;
    summary.label = policy.label;
    summary.seconds = seconds[p];
    for (std::uint64_t t : config.budgets) {
      SummaryRow row;
      row.horizon = t;
      const DesignProblem& problem = prepared.at(t).problem;
      const PresampleMode mode = effective_presample(policy.config, problem.dimension(), problem.arms());
      row.phase0 = mode == PresampleMode::none ? 0 : policy.config.phase0.value_or(default_phase0(t));
      std::vector<double> values;
      row.min_count = std::numeric_limits<std::uint64_t>::max();
      for (const EpisodeOutcome& e : result.episodes) {
        if (e.policy != p || e.horizon != t || !e.trace) continue;
        values.push_back(e.trace->final_row().regret);
        for (auto c : e.trace->final_row().counts) row.min_count = std::min(row.min_count, c);
      }
      if (values.empty()) row.min_count = 0;
      row.seeds = values.size();
      double mean = 0.0;
      for (double v : values) mean += v;
      mean = values.empty() ? std::numeric_limits<double>::quiet_NaN() : mean / static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      row.mean_regret = mean;
      row.stderr_regret = values.size() > 1
                              ? std::sqrt(var / static_cast<double>(values.size() - 1) /
                                          static_cast<double>(values.size()))
                              : 0.0;
      summary.rows.push_back(row);
    }
    if (summary.rows.size() >= 3) {
      std::vector<SlopePoint> points;
      for (const SummaryRow& r : summary.rows)
        points.push_back({static_cast<double>(r.horizon), r.mean_regret});
      const SummaryRow& first = summary.rows.front();
      if (first.phase0 > 0 && first.min_count < 2 * first.phase0 && points.size() > 3) {
        points.erase(points.begin());
        summary.first_budget_excluded = true;
      }
      try {
        summary.slope = fit_slope(points);
      } catch (const ValidationError&) {
        summary.slope.reset();
      }
    }
    result.summaries.push_back(std::move(summary));
  }

  if (options.write) write_sweep(result, config, config.output, options.format);
  return result;
}

void write_trace_csv(std::ostream& out, const RegretTrace& trace) {
  out << "t,regret,loss_gap,p_min\n";
  for (const TraceRow& r : trace.rows)
    out << r.t << ',' << num(r.regret) << ',' << num(r.loss_gap) << ',' << num(r.p_min) << '\n';
}

void write_sweep(const SweepResult& result, const ExperimentConfig& config,
                 const std::filesystem::path& dir, OutputFormat format) {
  std::filesystem::create_directories(dir / "traces");
  const bool json = format == OutputFormat::json;
  const std::string ext = json ? ".json" : ".csv";

  for (const EpisodeOutcome& e : result.episodes) {
    if (!e.trace) continue;
    const std::string& label = config.policies[e.policy].label;
    auto out = open_out(dir / "traces" / (trace_stem(label, e.horizon, e.seed) + ext));
    if (!json) {
      write_trace_csv(out, *e.trace);
      continue;
    }
    Json rows = Json::array();
    for (const TraceRow& r : e.trace->rows)
      rows.push_back({{"t", r.t}, {"regret", json_num(r.regret)}, {"loss_gap", json_num(r.loss_gap)},
                      {"p_min", json_num(r.p_min)}});
    out << Json{{"policy", label}, {"T", e.horizon}, {"seed", e.seed}, {"rows", rows}}.dump(2) << '\n';
  }

  for (const PolicySummary& s : result.summaries) {
    auto out = open_out(dir / ("summary_" + s.label + ext));
    if (!json) {
      out << "T,mean_regret,stderr,n_seeds\n";
      for (const SummaryRow& r : s.rows)
        out << r.horizon << ',' << num(r.mean_regret) << ',' << num(r.stderr_regret) << ',' << r.seeds
            << '\n';
      continue;
    }
    Json rows = Json::array();
    for (const SummaryRow& r : s.rows)
      rows.push_back({{"T", r.horizon}, {"mean_regret", json_num(r.mean_regret)},
                      {"stderr", json_num(r.stderr_regret)}, {"n_seeds", r.seeds}});
    out << Json{{"policy", s.label}, {"rows", rows}}.dump(2) << '\n';
  }

  if (config.budgets.size() >= 3) {
    auto out = open_out(dir / ("slopes" + ext));
    if (!json) out << "policy,slope,intercept,r_squared,points,first_budget_excluded\n";
    Json rows = Json::array();
    for (const PolicySummary& s : result.summaries) {
      if (!s.slope) continue;
      if (json) {
        rows.push_back({{"policy", s.label}, {"slope", s.slope->slope}, {"intercept", s.slope->intercept},
                        {"r_squared", s.slope->r_squared}, {"points", s.slope->points},
                        {"first_budget_excluded", s.first_budget_excluded}});
      } else {
        out << s.label << ',' << num(s.slope->slope) << ',' << num(s.slope->intercept) << ','
            << num(s.slope->r_squared) << ',' << s.slope->points << ','
            << (s.first_budget_excluded ? "true" : "false") << '\n';
      }
    }
    if (json) out << rows.dump(2) << '\n';
  }

  if (result.failures() > 0) {
    auto out = open_out(dir / ("failures" + ext));
    if (!json) out << "policy,T,seed,error\n";
    Json rows = Json::array();
    for (const EpisodeOutcome& e : result.episodes) {
      if (e.error.empty()) continue;
      const std::string& label = config.policies[e.policy].label;
      if (json)
        rows.push_back({{"policy", label}, {"T", e.horizon}, {"seed", e.seed}, {"error", e.error}});
      else
        out << label << ',' << e.horizon << ',' << e.seed << ",\"" << e.error << "\"\n";
    }
    if (json) out << rows.dump(2) << '\n';
  }
}

}  // namespace active_design::harness
