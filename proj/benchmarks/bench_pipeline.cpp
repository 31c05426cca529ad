#include <benchmark/benchmark.h>

#include "umblt/pipeline.hpp"
#include "umblt/uq.hpp"

namespace {

using namespace umblt;

struct Setup {
  explicit Setup(int n) : grid({}, n, n), fields(make_fields(grid)) {
    phi = forward_solve(fields.coefficients, fields.source);
    psi = adjoint_positive(fields.coefficients, std::nullopt, 1.0).psi;
    h = internal_data(fields.coefficients, *phi, *psi, fields.source).H;
  }

  static SampledFields make_fields(const Grid2D& g) {
    const auto [c, s] = experiment_coefficients(1);
    return sample_fields(c, s, g);
  }

  Grid2D grid;
  SampledFields fields;
  std::optional<NodeField> phi;
  std::optional<NodeField> psi;
  std::optional<NodeField> h;
};

void BM_AssembleForward(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_forward_matrix(s.fields.coefficients));
}
BENCHMARK(BM_AssembleForward)->Arg(51)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

void BM_AssembleInternal(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(assemble_internal_matrix(s.fields.coefficients, *s.psi));
}
BENCHMARK(BM_AssembleInternal)->Arg(51)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

void BM_ForwardSolve(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(forward_solve(s.fields.coefficients, s.fields.source));
}
BENCHMARK(BM_ForwardSolve)->Arg(51)->Arg(101)->Arg(201)->Unit(benchmark::kMillisecond);

void BM_Reconstruct(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_source(s.fields.coefficients, *s.psi, *s.h));
}
BENCHMARK(BM_Reconstruct)->Arg(51)->Arg(101)->Unit(benchmark::kMillisecond);

void BM_NormEstimateInverse(benchmark::State& state) {
  const Setup s(static_cast<int>(state.range(0)));
  const SparseMatrix a = assemble_internal_matrix(s.fields.coefficients, *s.psi).matrix;
  for (auto _ : state) benchmark::DoNotOptimize(norm2_estimate(a, NormMode::inverse, 1e-3));
}
BENCHMARK(BM_NormEstimateInverse)->Arg(21)->Arg(41)->Unit(benchmark::kMillisecond);

void BM_PerturbationDraw(benchmark::State& state) {
  const Grid2D g({}, static_cast<int>(state.range(0)), static_cast<int>(state.range(0)));
  const SampledEnsemble modes(build_perturbation_ensemble(kDefaultPceOrder, 1), g);
  double xi = -0.9;
  for (auto _ : state) {
    benchmark::DoNotOptimize(modes.draw(xi));
    xi = xi > 0.9 ? -0.9 : xi + 0.01;
  }
}
BENCHMARK(BM_PerturbationDraw)->Arg(51)->Arg(101)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
