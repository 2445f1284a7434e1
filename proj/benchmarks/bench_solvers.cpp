#include <benchmark/benchmark.h>

#include "slipform/solvers.hpp"

namespace {

using namespace slipform;

StepContext shear_context(const SlipCatalogue& catalogue, double f12) {
  StepContext ctx;
  ctx.F = Eigen::Matrix3d::Identity();
  ctx.F(0, 1) = f12;
  ctx.prev = CrystalState::virgin(catalogue.size(),
                                  rotation_from_euler(0.5235987755982988,
                                                      0.7853981633974483, 0.0).rotation);
  ctx.micromorphic = MicromorphicPoint::zero(catalogue.size());
  ctx.material = MaterialParams{};
  ctx.integrator = Integrator::ExpMap;
  ctx.catalogue = &catalogue;
  return ctx;
}

void BM_GradientFcc24(benchmark::State& state) {
  const SlipCatalogue catalogue = fcc_catalogue();
  const StepContext ctx = shear_context(catalogue, 0.04);
  const Eigen::VectorXd dl = Eigen::VectorXd::Constant(24, 1e-3);
  Eigen::VectorXd grad;
  for (auto _ : state) {
    d_i_inc(ctx, dl, grad);
    benchmark::DoNotOptimize(grad);
  }
}
BENCHMARK(BM_GradientFcc24);

void BM_HessianFcc24(benchmark::State& state) {
  const SlipCatalogue catalogue = fcc_catalogue();
  const StepContext ctx = shear_context(catalogue, 0.04);
  const Eigen::VectorXd dl = Eigen::VectorXd::Constant(24, 1e-3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(d2_i_inc(ctx, dl));
  }
}
BENCHMARK(BM_HessianFcc24);

void BM_SolveStep(benchmark::State& state) {
  const SlipCatalogue catalogue = fcc_catalogue();
  const StepContext ctx = shear_context(catalogue, 0.04);
  SolverParams params = SolverParams::defaults_for(ctx.material);
  params.algorithm = static_cast<Algorithm>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(solve_local(ctx, params));
  }
}
BENCHMARK(BM_SolveStep)->DenseRange(0, 3)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
