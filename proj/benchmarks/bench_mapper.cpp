#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "myofeat/mapper.hpp"
#include "myofeat/rng.hpp"

namespace {

using namespace myofeat;

Eigen::MatrixXd gaussian(int n, int d, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  return x;
}

void bm_pca(benchmark::State& state) {
  const auto x = gaussian(static_cast<int>(state.range(0)), 1000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mapper::pca_reduce(x));
}
BENCHMARK(bm_pca)->Arg(79)->Arg(463)->Unit(benchmark::kMillisecond);

void bm_tsne(benchmark::State& state) {
  const auto x = gaussian(static_cast<int>(state.range(0)), 20, 2);
  mapper::TsneConfig config;
  config.perplexity = 20.0;
  for (auto _ : state) benchmark::DoNotOptimize(mapper::tsne_embed(x, config));
}
BENCHMARK(bm_tsne)->Arg(79)->Arg(463)->Unit(benchmark::kMillisecond);

void bm_ward(benchmark::State& state) {
  const auto x = gaussian(static_cast<int>(state.range(0)), 10, 3);
  for (auto _ : state) benchmark::DoNotOptimize(mapper::ward_linkage(x));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(bm_ward)->RangeMultiplier(2)->Range(32, 512)->Complexity();

void bm_mapper_graph(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const auto space = gaussian(n, 10, 4);
  const Eigen::MatrixXd lens = space.leftCols(2);
  std::vector<std::string> labels;
  for (int i = 0; i < n; ++i) labels.push_back(i % 2 ? "a" : "b");
  const mapper::MapperConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(mapper::mapper_graph(space, lens, labels, config));
}
BENCHMARK(bm_mapper_graph)->Arg(79)->Arg(463)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
