#include "genefield/generate.hpp"
#include "genefield/graph.hpp"
#include "genefield/infer.hpp"
#include "genefield/model.hpp"
#include "genefield/rng.hpp"
#include "genefield/stats.hpp"

#include <benchmark/benchmark.h>

#include <vector>

using namespace genefield;

namespace {

GeneExpressionMatrix sphere_expr(Index n_spots, Index n_genes, std::uint64_t seed) {
  Rng rng(seed);
  GeneExpressionMatrix expr;
  expr.values.resize(n_spots, n_genes);
  for (Index i = 0; i < n_spots; ++i) {
    for (Index j = 0; j < n_genes; ++j) expr.values(i, j) = rng.normal();
    expr.values.row(i) /= expr.values.row(i).norm();
  }
  for (Index i = 0; i < n_spots; ++i) expr.spot_ids.push_back(std::to_string(i));
  for (Index j = 0; j < n_genes; ++j) expr.gene_names.push_back("g" + std::to_string(j));
  expr.sphere_normalized = true;
  return expr;
}

void BM_SufficientStatistics(benchmark::State& state) {
  const Index s_count = state.range(0);
  const Index n = state.range(1);
  SpatialGraph graph = radius_graph(grid_coordinates(static_cast<int>(std::sqrt(s_count))), 1.5);
  GeneExpressionMatrix expr = sphere_expr(graph.n_spots, n, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sufficient_statistics(expr, graph));
  }
}
BENCHMARK(BM_SufficientStatistics)->Args({400, 4})->Args({2500, 16})->Args({2500, 64});

void BM_NllGrad(benchmark::State& state) {
  const Index n = state.range(0);
  SpatialGraph graph = radius_graph(grid_coordinates(20), 1.5);
  GeneExpressionMatrix expr = sphere_expr(graph.n_spots, n, 2);
  SufficientStatistics stats = sufficient_statistics(expr, graph);
  InteractionModel model = init_model(n, 1, InitScheme::uniform, 3, 0.1);
  model.q_shells[0] = mean_degree(graph.base());
  for (auto _ : state) {
    benchmark::DoNotOptimize(nll(stats, model));
    benchmark::DoNotOptimize(nll_grad(stats, model));
  }
}
BENCHMARK(BM_NllGrad)->Arg(4)->Arg(16)->Arg(64);

void BM_GenerateStep(benchmark::State& state) {
  SpatialGraph graph = radius_graph(grid_coordinates(20), 1.5);
  InteractionModel model = init_model(4, 1, InitScheme::uniform, 5, 0.1);
  model.q_shells[0] = mean_degree(graph.base());
  GenerateConfig cfg;
  cfg.max_steps = static_cast<int>(state.range(0));
  cfg.seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(generate(model, graph, cfg));
  }
}
BENCHMARK(BM_GenerateStep)->Arg(10)->Arg(100);

void BM_PermutationNull(benchmark::State& state) {
  Rng rng(11);
  std::vector<double> x(state.range(0)), y(state.range(0));
  for (auto& v : x) v = rng.normal();
  for (auto& v : y) v = rng.normal();
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::permutation_null(x, y, 1000, 3));
  }
}
BENCHMARK(BM_PermutationNull)->Arg(16)->Arg(256);

}  // namespace

BENCHMARK_MAIN();
