#include <benchmark/benchmark.h>

#include "wvi/data.hpp"
#include "wvi/ot.hpp"
#include "wvi/trainer.hpp"

using namespace wvi;

namespace {

Tensor random_cost(std::size_t n, Rng& rng) {
  std::vector<double> v(n * n);
  for (auto& x : v) x = rng.uniform();
  return Tensor::matrix(n, n, std::move(v));
}

void BM_Sinkhorn(benchmark::State& state) {
  Rng rng(1);
  const Tensor c = random_cost(static_cast<std::size_t>(state.range(0)), rng);
  SinkhornConfig cfg;
  cfg.log_domain = state.range(1) != 0;
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(c, cfg).value.item());
}
BENCHMARK(BM_Sinkhorn)->ArgsProduct({{8, 32, 128}, {0, 1}});

void BM_SinkhornBackward(benchmark::State& state) {
  Rng rng(2);
  const Tensor c = random_cost(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) {
    Tape tape;
    const Tensor v = tape.variable(c);
    benchmark::DoNotOptimize(tape.backward(sinkhorn(v, SinkhornConfig{}).value).size());
  }
}
BENCHMARK(BM_SinkhornBackward)->Arg(8)->Arg(32)->Arg(128);

void BM_ExactAssignment(benchmark::State& state) {
  Rng rng(3);
  const Tensor c = random_cost(static_cast<std::size_t>(state.range(0)), rng);
  for (auto _ : state) benchmark::DoNotOptimize(exact_ot(c));
}
BENCHMARK(BM_ExactAssignment)->Arg(8)->Arg(64)->Arg(256);

void BM_TrainStep(benchmark::State& state) {
  const std::size_t dim = static_cast<std::size_t>(state.range(0));
  ModelConfig mc;
  mc.latent_dim = dim == 2 ? 2 : 8;
  Rng init(4);
  ModelPair models = ModelPair::create(mc, dim, init);
  Rng data_rng(5);
  std::vector<double> v(500 * dim);
  for (auto& x : v) x = data_rng.uniform();
  const Tensor data = Tensor::matrix(500, dim, std::move(v));
  TrainConfig tc;
  AdamState st;
  Rng rng(6);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(models, data, tc, st, rng).loss);
}
BENCHMARK(BM_TrainStep)->Arg(2)->Arg(196)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
