// Micro benchmarks for the per-evaluation costs of the sequential likelihood.

#include <benchmark/benchmark.h>

#include "strucgp/datasets.hpp"
#include "strucgp/mmte_kernel.hpp"
#include "strucgp/sequential_inference.hpp"
#include "strucgp/truncated_factorization.hpp"

using namespace strucgp;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kDt = 0.25;

StructuralSystem frame() {
  StructuralSystem s = build_scaled_shear_frame(VectorXd::Ones(3), VectorXd::Constant(3, 6.0), {1, 2},
                                                VectorXd::Ones(2), RayleighDamping{0.02, 2e-5}, kDt);
  s.input_map = MatrixXd::Zero(3, 1);
  s.input_map(2, 0) = 1.0;
  s.observed_dofs = {2};
  return s;
}

HyperState hyper() {
  HyperState h;
  h.mu_theta = VectorXd::Ones(2);
  h.sigma_theta_sq = VectorXd::Constant(2, 1e-4);
  h.phi.variance = (VectorXd(2) << 0.02, 0.01).finished();
  h.phi.len_sq = (VectorXd(2) << 300.0, 100.0).finished();
  h.phi.omega = (VectorXd(2) << 1.1, 3.0).finished();
  h.phi.noise = 5e-3;
  return h;
}

Partition partition(Index n) {
  const StructuralSystem s = frame();
  const Excitation x = generate_gwn_excitation(n, kDt, 1.0, 1);
  const TimeSeries y = add_measurement_noise(simulate_response(s, x, VectorXd::Ones(2)), 0.05, 2);
  return partition_dataset(x, y, n).partitions.front();
}

void BM_AssembleBlock(benchmark::State& state) {
  const Index n = state.range(0);
  const TimeGrid grid{0.0, kDt, 0, n};
  const MmteParams phi = hyper().phi;
  for (auto _ : state) benchmark::DoNotOptimize(assemble_block(grid, grid, phi, true));
  state.SetComplexityN(n);
}
BENCHMARK(BM_AssembleBlock)->RangeMultiplier(2)->Range(128, 1024)->Complexity(benchmark::oNSquared);

void BM_DensityTerms(benchmark::State& state) {
  const Index n = state.range(0);
  const TimeGrid grid{0.0, kDt, 0, n};
  const MatrixXd cov = assemble_block(grid, grid, hyper().phi, true);
  const VectorXd r = VectorXd::Ones(n);
  const double tol = state.range(1) == 0 ? kInferenceTruncation : TruncatedFactorization::default_tolerance;
  for (auto _ : state) {
    benchmark::DoNotOptimize(truncated_density_terms(cov, r, tol, DensityConvention::eigenvalue_floor));
  }
  state.SetComplexityN(n);
}
BENCHMARK(BM_DensityTerms)->ArgsProduct({{128, 256, 512, 1024}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Simulate(benchmark::State& state) {
  const Partition p = partition(state.range(0));
  const StructuralSystem s = frame();
  for (auto _ : state) {
    benchmark::DoNotOptimize(simulate(s, p.excitation(), VectorXd::Ones(2), VectorXd(), true));
  }
}
BENCHMARK(BM_Simulate)->Arg(500)->Arg(2000);

void BM_NegativeLogLikelihood(benchmark::State& state) {
  const Partition p = partition(state.range(0));
  const StructuralSystem s = frame();
  const VectorXd u = hyper().to_unconstrained();
  for (auto _ : state) benchmark::DoNotOptimize(negative_log_likelihood(u, p, nullptr, s));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_NegativeLogLikelihood)
    ->RangeMultiplier(2)
    ->Range(250, 2000)
    ->Unit(benchmark::kMillisecond)
    ->Complexity(benchmark::oNCubed);

}  // namespace

BENCHMARK_MAIN();
