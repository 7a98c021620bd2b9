#include <benchmark/benchmark.h>

#include <vector>

#include "myofeat/convnet.hpp"
#include "myofeat/dataio.hpp"

namespace {

using namespace myofeat;
using convnet::ConvNet;

convnet::Mat<float> noise_batch(const convnet::Architecture& arch, int batch) {
  Rng rng(1);
  convnet::Mat<float> x(1, batch * arch.channels * arch.length);
  for (Eigen::Index i = 0; i < x.size(); ++i) x(0, i) = static_cast<float>(rng.normal(0.0, 50.0));
  return x;
}

convnet::Architecture arch_with(int maps) {
  convnet::Architecture a;
  a.maps = maps;
  return a;
}

void bm_forward_train(benchmark::State& state) {
  const auto arch = arch_with(static_cast<int>(state.range(0)));
  const int batch = static_cast<int>(state.range(1));
  ConvNet<float> net(arch, 1);
  const auto x = noise_batch(arch, batch);
  Rng rng(2);
  convnet::ForwardOptions f;
  f.mode = convnet::Mode::Train;
  f.update_stats = false;
  f.domain_head = true;
  f.rng = &rng;
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x, batch, f));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_forward_train)->Args({16, 32})->Args({64, 8})->Unit(benchmark::kMillisecond);

void bm_train_step(benchmark::State& state) {
  const auto arch = arch_with(static_cast<int>(state.range(0)));
  const int batch = static_cast<int>(state.range(1));
  ConvNet<float> net(arch, 1);
  const auto x = noise_batch(arch, batch);
  std::vector<int> labels, domains;
  for (int n = 0; n < batch; ++n) {
    labels.push_back(n % arch.gestures);
    domains.push_back(n % 2);
  }
  Rng rng(3);
  convnet::ForwardOptions f;
  f.mode = convnet::Mode::Train;
  f.update_stats = false;
  f.domain_head = true;
  f.rng = &rng;
  std::vector<float> grad(net.parameter_count());
  convnet::Adam<float> adam(net.parameter_count());
  convnet::BackwardOptions b;
  b.reversal = -1.0;
  for (auto _ : state) {
    const auto tape = net.forward(x, batch, f);
    convnet::Mat<float> dg, dd;
    convnet::softmax_cross_entropy<float>(tape.gesture_logits, labels, dg);
    convnet::softmax_cross_entropy<float>(tape.domain_logits, domains, dd);
    std::fill(grad.begin(), grad.end(), 0.0f);
    net.backward(tape, dg, &dd, grad, b);
    adam.step(net.parameters(), grad, 1e-4, net.groups());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_train_step)->Args({16, 32})->Args({64, 8})->Unit(benchmark::kMillisecond);

void bm_infer(benchmark::State& state) {
  const auto arch = arch_with(static_cast<int>(state.range(0)));
  ConvNet<float> net(arch, 1);
  const int batch = 64;
  const auto x = noise_batch(arch, batch);
  net.estimate_stats(convnet::kSharedDomain, x, batch);
  for (auto _ : state) benchmark::DoNotOptimize(net.infer(x, batch, convnet::kSharedDomain, false));
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(bm_infer)->Arg(16)->Arg(64)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
