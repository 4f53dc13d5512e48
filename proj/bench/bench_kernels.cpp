// Serial reference kernels against the blocked OpenMP kernels, plus one
// full agent update at the desk-scale shape.

#include <benchmark/benchmark.h>

#include "csac/agent.hpp"
#include "csac/kernels.hpp"
#include "csac/rng.hpp"

namespace {

using namespace csac;

struct Layer {
  std::vector<double> w, b;
  Matrix x, dz;
  Layer(std::size_t in, std::size_t out, std::size_t batch) : w(in * out), b(out) {
    Rng rng(1);
    for (double& v : w) v = rng.uniform(-0.1, 0.1);
    for (double& v : b) v = rng.uniform(-0.1, 0.1);
    x = rng.normal_matrix(in, batch);
    dz = rng.normal_matrix(out, batch);
  }
};

template <kernels::Backend B>
void BM_Forward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Layer l(n, n, static_cast<std::size_t>(state.range(1)));
  kernels::ScopedBackend scope(B);
  Matrix out;
  for (auto _ : state) {
    kernels::affine_forward(l.w, l.b, l.x, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <kernels::Backend B>
void BM_BackwardInput(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Layer l(n, n, static_cast<std::size_t>(state.range(1)));
  kernels::ScopedBackend scope(B);
  Matrix dx;
  for (auto _ : state) {
    kernels::affine_backward_input(l.w, l.dz, dx);
    benchmark::DoNotOptimize(dx.data());
  }
}

template <kernels::Backend B>
void BM_BackwardParams(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Layer l(n, n, static_cast<std::size_t>(state.range(1)));
  kernels::ScopedBackend scope(B);
  std::vector<double> dw(n * n), db(n);
  for (auto _ : state) {
    kernels::affine_backward_params(l.dz, l.x, dw, db);
    benchmark::DoNotOptimize(dw.data());
  }
}

template <kernels::Backend B>
void BM_UpdateStep(benchmark::State& state) {
  kernels::ScopedBackend scope(B);
  CsacAgent agent(3, ActionBounds::symmetric(1, 2.0), AgentConfig{}, 7);
  Rng rng(3);
  const std::size_t m = 256;
  TransitionBatch batch;
  batch.states = rng.normal_matrix(3, m);
  batch.next_states = rng.normal_matrix(3, m);
  batch.actions = Matrix(1, m);
  for (double& a : batch.actions.flat()) a = rng.uniform(-2.0, 2.0);
  batch.rewards.assign(m, -1.0);
  batch.terminal.assign(m, 0);
  for (auto _ : state) benchmark::DoNotOptimize(agent.update_step(batch));
}

constexpr auto kSerial = kernels::Backend::kSerial;
constexpr auto kOmp = kernels::Backend::kOmp;

#define SHAPES ->Args({64, 256})->Args({256, 256})->Unit(benchmark::kMicrosecond)
BENCHMARK(BM_Forward<kSerial>) SHAPES;
BENCHMARK(BM_Forward<kOmp>) SHAPES;
BENCHMARK(BM_BackwardInput<kSerial>) SHAPES;
BENCHMARK(BM_BackwardInput<kOmp>) SHAPES;
BENCHMARK(BM_BackwardParams<kSerial>) SHAPES;
BENCHMARK(BM_BackwardParams<kOmp>) SHAPES;
BENCHMARK(BM_UpdateStep<kSerial>)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_UpdateStep<kOmp>)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
