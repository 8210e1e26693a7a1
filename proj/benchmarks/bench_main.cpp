#include <benchmark/benchmark.h>

#include <random>

#include "batchrl/autodiff.hpp"
#include "batchrl/integrators.hpp"
#include "batchrl/nmpc.hpp"
#include "batchrl/policy.hpp"
#include "batchrl/reinforce.hpp"

using namespace batchrl;

namespace {

// Dense tanh network of the default policy size built directly on the tape.
ad::Graph dense_graph(std::size_t inputs, std::size_t width, std::size_t layers) {
  ad::Graph g;
  std::vector<ad::NodeId> h;
  for (std::size_t i = 0; i < inputs; ++i) h.push_back(g.input());
  for (std::size_t l = 0; l < layers; ++l) {
    std::vector<ad::NodeId> next;
    for (std::size_t r = 0; r < width; ++r) {
      std::vector<ad::NodeId> w;
      for (std::size_t c = 0; c < h.size(); ++c) w.push_back(g.parameter());
      next.push_back(g.tanh(g.affine(g.parameter(), w, h)));
    }
    h = next;
  }
  g.add_output(g.sum(h));
  return g;
}

void BM_GraphForwardBackward(benchmark::State& state) {
  const auto width = static_cast<std::size_t>(state.range(0));
  ad::Graph g = dense_graph(5, width, 2);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 0.3);
  std::vector<double> params(g.parameter_count());
  for (double& p : params) p = n(rng);
  const std::vector<double> x{0.1, 0.2, 0.3, 0.4, 0.5};
  for (auto _ : state) {
    g.forward(x, params);
    benchmark::DoNotOptimize(g.backward(0));
  }
  state.counters["params"] = static_cast<double>(params.size());
}
BENCHMARK(BM_GraphForwardBackward)->Arg(10)->Arg(20)->Arg(40);

void BM_PolicyRollout(benchmark::State& state) {
  const auto plant = make_plant(PlantKind::Cs1Approx);
  const PolicyParams params = PolicyParams::initialize(PolicyConfig{}, 1);
  PolicyEvaluator ev(params.config());
  Rng rng(7);
  const RolloutOptions options{ActionMode::Sample, 1.0, state.range(0) != 0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rollout(ev, params, *plant, rng, options).total_return);
  }
}
BENCHMARK(BM_PolicyRollout)->Arg(0)->Arg(1);

void BM_Rk4Cs1(benchmark::State& state) {
  const std::vector<double> u{1.0, 2.0};
  auto rhs = [](std::span<const double> y, std::span<const double> uu, std::span<double> dy) {
    cs1_plant_rhs<double>(y, uu, dy);
  };
  std::vector<double> y{1.0, 0.0};
  for (auto _ : state) {
    benchmark::DoNotOptimize(rk4_step<double>(rhs, y, u, 0.1, static_cast<int>(state.range(0))));
  }
}
BENCHMARK(BM_Rk4Cs1)->Arg(20)->Arg(100);

void BM_OcpSolveCs1(benchmark::State& state) {
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  OcpProblem p;
  p.model = &ode;
  p.state = ode.nominal_initial_state();
  NlpSettings s;
  s.multistarts = 1;
  for (auto _ : state) {
    Rng rng(3);
    benchmark::DoNotOptimize(solve_ocp(p, s, rng).objective);
  }
}
BENCHMARK(BM_OcpSolveCs1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
