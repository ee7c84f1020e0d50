#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "csanet/attention.hpp"
#include "csanet/model.hpp"
#include "csanet/ops.hpp"
#include "csanet/psd.hpp"
#include "csanet/rng.hpp"

using namespace csanet;

namespace {

Tensor<float> random_tensor(Shape shape, Rng& rng) {
  Tensor<float> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<float>(rng.uniform(-1, 1));
  return t;
}

// Temporal convolution of one branch: [B, 1, C, T] with a 1 x K kernel.
void BM_TemporalConv(benchmark::State& state) {
  const auto k = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const auto x = random_tensor({16, 1, 8, 256}, rng);
  const auto w = random_tensor({16, 1, 1, k}, rng);
  Conv2dOptions opt;
  opt.padding = {0, 0, (k - 1) / 2, k / 2};
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, w, Tensor<float>(), opt));
}
BENCHMARK(BM_TemporalConv)->Arg(8)->Arg(32)->Arg(64);

void BM_SparseAttention(benchmark::State& state) {
  Rng rng(2);
  AttentionConfig cfg;
  const auto x = random_tensor({16, cfg.embed_dim, 17}, rng);
  const auto y = random_tensor({16, cfg.embed_dim, 17}, rng);
  const auto params = init_attention_params<float>(cfg.embed_dim, true, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(msca_forward(x, y, params, cfg));
}
BENCHMARK(BM_SparseAttention);

void BM_ModelForward(benchmark::State& state) {
  ModelConfig cfg;
  CsanetModel<float> model(cfg, 0);
  Rng rng(3);
  const auto x = random_tensor({16, 1, cfg.channels, cfg.time_steps}, rng);
  NoGradGuard guard;
  for (auto _ : state) benchmark::DoNotOptimize(model.forward(x, false, nullptr));
}
BENCHMARK(BM_ModelForward)->Unit(benchmark::kMillisecond);

void BM_ModelTrainStep(benchmark::State& state) {
  ModelConfig cfg;
  CsanetModel<float> model(cfg, 0);
  Rng rng(4), drop(5);
  const auto x = random_tensor({16, 1, cfg.channels, cfg.time_steps}, rng);
  std::vector<std::size_t> y(16);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = i % cfg.n_classes;
  for (auto _ : state) {
    auto loss = cross_entropy(model.forward(x, true, &drop), y);
    loss.backward();
    benchmark::DoNotOptimize(loss.data()[0]);
  }
}
BENCHMARK(BM_ModelTrainStep)->Unit(benchmark::kMillisecond);

void BM_Welch(benchmark::State& state) {
  std::vector<double> s(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = std::sin(0.1 * static_cast<double>(i));
  for (auto _ : state) benchmark::DoNotOptimize(welch_psd(s, 250.0));
}
BENCHMARK(BM_Welch)->Arg(1000)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
