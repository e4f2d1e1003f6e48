#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "qtrust/game.hpp"
#include "qtrust/kernels.hpp"
#include "qtrust/mlp.hpp"

using namespace qtrust;

namespace {

std::vector<double> gaussian(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<double> v(n);
  for (double& x : v) x = g(rng);
  return v;
}

constexpr std::size_t kDim = 64;

template <auto Nearest>
void BM_Nearest(benchmark::State& state) {
  const auto rows = static_cast<std::size_t>(state.range(0));
  const auto matrix = gaussian(rows * kDim, 1);
  const auto query = gaussian(kDim, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Nearest(matrix, kDim, query));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(rows));
}

template <auto Forward>
void BM_ForwardBatch(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  // Observation width of the standard board, default hidden sizes.
  const int in = static_cast<int>(game::observation_size(game::BoardSpec::standard()));
  const auto net = nn::Mlp::initialized(in, {256, 64}, game::kActionCount, 3);
  const auto inputs = gaussian(batch * static_cast<std::size_t>(in), 4);
  for (auto _ : state) benchmark::DoNotOptimize(Forward(net, inputs, kernels::Output::Values));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}

}  // namespace

BENCHMARK(BM_Nearest<kernels::serial::nearest>)->Name("nearest/serial")->Arg(1000)->Arg(10000);
BENCHMARK(BM_Nearest<kernels::parallel::nearest>)->Name("nearest/parallel")->Arg(1000)->Arg(10000)->UseRealTime();
BENCHMARK(BM_ForwardBatch<kernels::serial::forward_batch>)->Name("forward_batch/serial")->Arg(32)->Arg(256);
BENCHMARK(BM_ForwardBatch<kernels::parallel::forward_batch>)
    ->Name("forward_batch/parallel")
    ->Arg(32)
    ->Arg(256)
    ->UseRealTime();

BENCHMARK_MAIN();
