#include <benchmark/benchmark.h>

#include <numeric>
#include <random>

#include "mlnet/memory_bank.hpp"
#include "mlnet/trainer.hpp"

using namespace mlnet;

namespace {

Matrix random_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

MemoryBank filled_bank(Index n, Index d, NeighborMode mode, Rng& rng) {
  MemoryBank bank(n, d, 10.0, 0.875, mode, 5);
  std::vector<int> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), 0);
  bank.update(all, random_matrix(n, d, rng));
  return bank;
}

void BM_MlpForwardBackward(benchmark::State& state) {
  Rng rng(1);
  Mlp mlp = make_mlp(16, {64}, 32, Activation::Tanh, rng);
  Matrix x = random_matrix(36, 16, rng);
  Matrix grad = random_matrix(36, 32, rng);
  for (auto _ : state) {
    MlpActivations acts = mlp_forward(mlp, x);
    MlpGradients g = mlp_backprop(mlp, acts, grad);
    benchmark::DoNotOptimize(g.layers.front().weight(0, 0));
  }
}
BENCHMARK(BM_MlpForwardBackward);

void BM_AllNeighborhoodsAdaptive(benchmark::State& state) {
  Rng rng(2);
  MemoryBank bank = filled_bank(state.range(0), 32, NeighborMode::Adaptive, rng);
  for (auto _ : state) {
    auto sets = all_neighborhoods(bank);
    benchmark::DoNotOptimize(sets.front().size());
  }
}
BENCHMARK(BM_AllNeighborhoodsAdaptive)->Arg(256)->Arg(900);

void BM_AllNeighborhoodsKnn(benchmark::State& state) {
  Rng rng(3);
  MemoryBank bank = filled_bank(state.range(0), 32, NeighborMode::Knn, rng);
  for (auto _ : state) {
    auto sets = all_neighborhoods(bank);
    benchmark::DoNotOptimize(sets.front().size());
  }
}
BENCHMARK(BM_AllNeighborhoodsKnn)->Arg(256)->Arg(900);

void BM_BruteForceNeighbors(benchmark::State& state) {
  Rng rng(4);
  Matrix raw = random_matrix(state.range(0), 32, rng);
  for (auto _ : state) {
    auto set = brute_force_neighbors(raw, 0, NeighborMode::Adaptive, 0.875, 5);
    benchmark::DoNotOptimize(set.size());
  }
}
BENCHMARK(BM_BruteForceNeighbors)->Arg(256)->Arg(900);

void BM_ObjectiveWithGradients(benchmark::State& state) {
  Rng rng(5);
  NetworkParams net = make_network(16, {64}, 32, 9, Activation::Tanh, rng);
  BatchInputs batch;
  batch.source_x = random_matrix(36, 16, rng);
  for (Index i = 0; i < 36; ++i)
    batch.source_labels.push_back(static_cast<int>(i % 9));
  batch.target_x = random_matrix(36, 16, rng);
  for (Index i = 0; i < 36; ++i)
    batch.target_indices.push_back(static_cast<int>(i));
  std::uniform_real_distribution<double> u(0.05, 0.95);
  for (Index i = 0; i < 36; ++i) batch.lambdas.push_back(u(rng));

  MemoryBank bank(900, 32);
  std::vector<int> all(900);
  std::iota(all.begin(), all.end(), 0);
  bank.update(all, random_matrix(900, 32, rng));
  bank.update(batch.target_indices, extract_features(net, batch.target_x));
  auto nbrs = all_neighborhoods(bank);

  ObjectiveOptions opts;
  NetworkGradients grads;
  for (auto _ : state) {
    LossBreakdown lb =
        compute_objective(net, batch, &bank, &nbrs, opts, &grads);
    benchmark::DoNotOptimize(lb.total);
  }
}
BENCHMARK(BM_ObjectiveWithGradients);

}  // namespace

BENCHMARK_MAIN();
