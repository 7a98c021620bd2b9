#include <benchmark/benchmark.h>

#include <string>
#include <vector>

#include "myofeat/dataio.hpp"
#include "myofeat/features.hpp"
#include "myofeat/rng.hpp"

namespace {

using namespace myofeat;

std::vector<double> noise_channel(std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> x(dataio::kWindowLength);
  for (auto& v : x) v = rng.normal(0.0, 50.0);
  return x;
}

void bm_bandpass(benchmark::State& state) {
  Rng rng(1);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = rng.normal();
  for (auto _ : state) benchmark::DoNotOptimize(dataio::bandpass_filter(x));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_bandpass)->Arg(1000)->Arg(10000);

// One method on one channel of one window.
void bm_method(benchmark::State& state, std::string method) {
  const auto x = noise_channel(2);
  const features::FeatureConfig config;
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_method(method, x, config));
}
BENCHMARK_CAPTURE(bm_method, mav, std::string("MAV"));
BENCHMARK_CAPTURE(bm_method, ar, std::string("AR"));
BENCHMARK_CAPTURE(bm_method, sampen, std::string("SAMPEN"));
BENCHMARK_CAPTURE(bm_method, mnf, std::string("MNF"));

// All 79 descriptors for one channel.
void bm_channel(benchmark::State& state) {
  const auto x = noise_channel(3);
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_channel(x));
}
BENCHMARK(bm_channel);

void bm_extract_all(benchmark::State& state) {
  const auto windows = dataio::preprocess_all(dataio::synth_generate(2, 2, 4));
  const std::vector<dataio::Window> subset(windows.begin(), windows.begin() + state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(features::extract_all(subset));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(bm_extract_all)->Arg(16)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
