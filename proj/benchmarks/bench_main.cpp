#include "slipuq/coeff_solvers.hpp"
#include "slipuq/design.hpp"
#include "slipuq/forward_swe.hpp"
#include "slipuq/inference.hpp"
#include "slipuq/pc_basis.hpp"

#include <benchmark/benchmark.h>

#include <random>

using namespace slipuq;

namespace {

Eigen::MatrixXd uniform_points(int n, int dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd p(n, dim);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng);
  return p;
}

void BM_BasisEvaluate(benchmark::State& state) {
  const PCBasis basis(6, static_cast<int>(state.range(0)));
  const std::vector<double> xi = {0.1, -0.3, 0.5, 0.7, -0.9, 0.2};
  std::vector<double> out(basis.size());
  for (auto _ : state) {
    basis.evaluate(xi, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(basis.size()));
}
BENCHMARK(BM_BasisEvaluate)->DenseRange(3, 5);

void BM_SmolyakGrid(benchmark::State& state) {
  const int level = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto q = smolyak_grid(6, level);
    benchmark::DoNotOptimize(q.weights.data());
  }
}
BENCHMARK(BM_SmolyakGrid)->DenseRange(2, 5)->Unit(benchmark::kMillisecond);

ModelConfig desk_model() {
  ModelConfig cfg = default_model_config();
  cfg.nx = 100;
  cfg.ny = 75;
  return cfg;
}

void BM_SweStep(benchmark::State& state) {
  ModelConfig cfg = default_model_config();
  cfg.nx = static_cast<int>(state.range(0));
  cfg.ny = cfg.nx * 3 / 4;
  const std::vector<double> slip = {2.7, 23.0, 0.3, 6.5, 21.5, 0.3};
  ShallowWaterSolver solver(cfg, initial_state(slip, cfg));
  for (auto _ : state) solver.step(solver.stable_dt());
  state.SetItemsProcessed(state.iterations() * cfg.nx * cfg.ny);
}
BENCHMARK(BM_SweStep)->Arg(100)->Arg(200);

void BM_Simulate(benchmark::State& state) {
  const ModelConfig cfg = desk_model();
  const std::vector<double> slip = {2.7, 23.0, 0.3, 6.5, 21.5, 0.3};
  for (auto _ : state) {
    auto recs = simulate(cfg, slip);
    benchmark::DoNotOptimize(recs.data());
  }
}
BENCHMARK(BM_Simulate)->Unit(benchmark::kMillisecond);

void BM_BpdnSolve(benchmark::State& state) {
  const PCBasis basis(6, static_cast<int>(state.range(0)));
  const Eigen::MatrixXd psi = basis.design_matrix(uniform_points(300, 6, 1));
  Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(basis.size()));
  for (Eigen::Index k = 0; k < c.size(); k += 7) c[k] = 1.0 / (1.0 + static_cast<double>(k));
  const Eigen::VectorXd g = psi * c;
  for (auto _ : state) {
    auto sol = bpdn_solve(psi, g, 1e-3 * g.norm());
    benchmark::DoNotOptimize(sol.coefficients.data());
  }
}
BENCHMARK(BM_BpdnSolve)->DenseRange(3, 5)->Unit(benchmark::kMillisecond);

void BM_AdaptiveMetropolis(benchmark::State& state) {
  const int d = 10;
  const LogDensity target = [](const Eigen::VectorXd& x) { return -0.5 * x.squaredNorm(); };
  AdaptiveMetropolisOptions opts;
  opts.iterations = 10000;
  opts.initial_step = Eigen::VectorXd::Constant(d, 0.5);
  for (auto _ : state) {
    auto chain = adaptive_metropolis(target, Eigen::VectorXd::Zero(d), 1, opts);
    benchmark::DoNotOptimize(chain.samples.data());
  }
  state.SetItemsProcessed(state.iterations() * opts.iterations);
}
BENCHMARK(BM_AdaptiveMetropolis)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
