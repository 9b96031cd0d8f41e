#include "active_design/design_core.hpp"
#include "active_design/environment.hpp"
#include "active_design/policies.hpp"
#include "active_design/simplex_solver.hpp"

#include <benchmark/benchmark.h>

using namespace active_design;

namespace {

DesignProblem instance(std::size_t d, std::size_t k) {
  RandomInstanceOptions o;
  o.dimension = d;
  o.arms = k;
  o.seed = 1;
  o.min_singular_value = 1e-3;
  return make_random_instance(o);
}

void BM_LossAndGradient(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const DesignProblem p = instance(d, d + 1);
  const Vector w = Vector::Constant(static_cast<Eigen::Index>(d + 1), 1.0 / static_cast<double>(d + 1));
  for (auto _ : state)
    benchmark::DoNotOptimize(loss_and_gradient(p.covariates(), p.noise().variances(), w));
}
BENCHMARK(BM_LossAndGradient)->Arg(3)->Arg(10)->Arg(50);

void BM_ClosedForm(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const DesignProblem p = instance(d, d);
  for (auto _ : state) benchmark::DoNotOptimize(optimal_weights_closed_form(p));
}
BENCHMARK(BM_ClosedForm)->Arg(3)->Arg(10)->Arg(50);

void BM_Solver(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  const DesignProblem p = instance(d, 2 * d);
  for (auto _ : state)
    benchmark::DoNotOptimize(minimize_design_loss(p.covariates(), p.noise().variances()));
}
BENCHMARK(BM_Solver)->Arg(3)->Arg(10)->Arg(30)->Unit(benchmark::kMicrosecond);

// One full episode per iteration; the per-step cost is time / T.
void BM_Episode(benchmark::State& state, PolicyKind kind) {
  const DesignProblem p = instance(3, 3);
  PolicyConfig c;
  c.kind = kind;
  EpisodeOptions o;
  o.horizon = 10000;
  o.p_star = reference_optimum(p);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    o.seed = seed++;
    benchmark::DoNotOptimize(run_episode(p, c, o));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(o.horizon));
}
BENCHMARK_CAPTURE(BM_Episode, uniform, PolicyKind::uniform)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Episode, gradient_ucb, PolicyKind::gradient_ucb)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Episode, naive_randomized, PolicyKind::naive_randomized)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Episode, thompson, PolicyKind::thompson)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
