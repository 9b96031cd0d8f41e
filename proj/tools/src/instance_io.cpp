#include "active_design/harness/instance_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace active_design::harness {

namespace {

struct Line {
  std::size_t number;
  std::vector<double> values;
};

[[noreturn]] void fail(const std::string& name, std::size_t line, const std::string& what) {
  throw ValidationError(name + ":" + std::to_string(line) + ": " + what);
}

std::vector<Line> tokenize(std::istream& in, const std::string& name) {
  std::vector<Line> lines;
  std::string text;
  for (std::size_t number = 1; std::getline(in, text); ++number) {
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    std::istringstream words(text);
    std::string word;
    Line line{number, {}};
    while (words >> word) {
      double v = 0.0;
      const auto [end, ec] = std::from_chars(word.data(), word.data() + word.size(), v);
      if (ec != std::errc() || end != word.data() + word.size())
        fail(name, number, "not a number: '" + word + "'");
      if (!std::isfinite(v)) fail(name, number, "non-finite value '" + word + "'");
      line.values.push_back(v);
    }
    if (!line.values.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

Vector to_vector(const Line& line) {
  return Eigen::Map<const Vector>(line.values.data(), static_cast<Eigen::Index>(line.values.size()));
}

}  // namespace

LoadedInstance parse_instance(std::istream& in, const std::string& name) {
  const std::vector<Line> lines = tokenize(in, name);
  if (lines.empty()) fail(name, 1, "empty instance file");
  const Line& header = lines[0];
  if (header.values.size() != 2) fail(name, header.number, "header must be 'd K'");
  const double dv = header.values[0];
  const double kv = header.values[1];
  if (dv < 1 || kv < 1 || dv != std::floor(dv) || kv != std::floor(kv))
    fail(name, header.number, "d and K must be positive integers");
  const auto d = static_cast<std::size_t>(dv);
  const auto k = static_cast<std::size_t>(kv);
  if (k < d) fail(name, header.number, "covariates cannot span R^d: K < d");

  if (lines.size() < 1 + k + 1)
    fail(name, lines.back().number, "expected " + std::to_string(k) +
                                        " covariate lines and a variance line");
  Matrix x(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k));
  for (std::size_t j = 0; j < k; ++j) {
    const Line& line = lines[1 + j];
    if (line.values.size() != d)
      fail(name, line.number, "covariate needs " + std::to_string(d) + " components");
    x.col(static_cast<Eigen::Index>(j)) = to_vector(line);
  }
  const Line& var_line = lines[1 + k];
  if (var_line.values.size() != k)
    fail(name, var_line.number, "variance line needs " + std::to_string(k) + " values");
  const Vector variances = to_vector(var_line);

  std::optional<Vector> kappa;
  std::optional<Vector> beta;
  std::size_t next = 2 + k;
  const std::size_t extra = lines.size() - next;
  if (extra > 2) fail(name, lines[next + 2].number, "unexpected trailing line");
  if (extra >= 1) {
    // K values read as kappa^2; this also decides the d = K case.
    if (lines[next].values.size() == k) kappa = to_vector(lines[next++]);
  }
  if (next < lines.size()) {
    const Line& line = lines[next];
    if (line.values.size() != d)
      fail(name, line.number, "beta* line needs " + std::to_string(d) + " values");
    beta = to_vector(line);
    ++next;
  }
  if (next < lines.size()) fail(name, lines[next].number, "unexpected trailing line");

  LoadedInstance out{[&] {
                       try {
                         CovariateSet cov(x);
                         NoiseSpec noise = kappa ? NoiseSpec(variances, *kappa) : NoiseSpec(variances);
                         return DesignProblem(std::move(cov), std::move(noise), beta);
                       } catch (const ValidationError& e) {
                         fail(name, header.number, e.what());
                       }
                     }(),
                     {}};
  const double dev = out.problem.covariates().max_norm_deviation();
  if (dev > 1e-6) {
    std::ostringstream msg;
    msg << name << ": covariates renormalized to unit norm (max deviation " << dev << ")";
    out.warnings.push_back(msg.str());
  }
  return out;
}

LoadedInstance load_instance(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open instance file '" + path.string() + "'");
  return parse_instance(in, path.string());
}

void write_instance(std::ostream& out, const DesignProblem& problem) {
  const Matrix& x = problem.covariates().matrix();
  const auto row = [&out](const auto& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) out << (i ? " " : "") << v[i];
    out << '\n';
  };
  out << std::setprecision(17);
  out << x.rows() << ' ' << x.cols() << '\n';
  for (Eigen::Index j = 0; j < x.cols(); ++j) row(Vector(x.col(j)));
  row(problem.noise().variances());
  row(problem.noise().subgaussian());
  if (problem.beta_star()) row(*problem.beta_star());
}

void save_instance(const std::filesystem::path& path, const DesignProblem& problem) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write instance file '" + path.string() + "'");
  write_instance(out, problem);
}

}  // namespace active_design::harness
