#include <benchmark/benchmark.h>

#include <random>

#include "mpvit/metrics.hpp"
#include "mpvit/model.hpp"
#include "mpvit/synth.hpp"
#include "mpvit/train.hpp"
#include "mpvit/volume.hpp"

using namespace mpvit;

namespace {

template <typename T>
Tensor<T> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  Tensor<T> t(Shape{r, c});
  for (auto& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

template <typename T>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = random_matrix<T>(n, n, 1), b = random_matrix<T>(n, n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * n * n * n, benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}
BENCHMARK(BM_Matmul<float>)->Arg(64)->Arg(192)->Arg(512);
BENCHMARK(BM_Matmul<double>)->Arg(64)->Arg(192)->Arg(512);

void BM_Softmax(benchmark::State& state) {
  auto x = random_matrix<float>(33, 33, 3);
  for (auto _ : state) benchmark::DoNotOptimize(ops::softmax(x, 1));
}
BENCHMARK(BM_Softmax);

struct DeskFixture {
  ModelConfig config = preset("desk-tiny");
  ParameterSet<float> params = init_parameters<float>(config, 0);
  Dataset<float> data;

  explicit DeskFixture(std::size_t n) {
    SynthSpec spec;
    spec.ratio = 1.0;
    data = synth_in_memory<float>(spec, 0, Split::train, n, config);
  }
};

void BM_DeskPredict(benchmark::State& state) {
  static DeskFixture fx(1);
  for (auto _ : state) benchmark::DoNotOptimize(predict(fx.config, fx.params, fx.data[0]));
}
BENCHMARK(BM_DeskPredict)->Unit(benchmark::kMillisecond);

void BM_DeskForwardBackward(benchmark::State& state) {
  static DeskFixture fx(8);
  const auto n = static_cast<std::size_t>(state.range(0));
  Batch<float> batch;
  for (std::size_t i = 0; i < n; ++i) batch.push_back(&fx.data[i]);
  for (auto _ : state) benchmark::DoNotOptimize(batch_loss_and_grad(fx.config, fx.params, batch));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}
BENCHMARK(BM_DeskForwardBackward)->Arg(1)->Arg(8)->Unit(benchmark::kMillisecond);

void BM_SynthSubject(benchmark::State& state) {
  SynthSpec spec;
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(synth_subject(spec, 0, Split::train, i++, 1));
}
BENCHMARK(BM_SynthSubject)->Unit(benchmark::kMillisecond);

void BM_Resample(benchmark::State& state) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 1);
  Tensor<double> v(Shape{64, 64, 64});
  for (auto& x : v.data()) x = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(resample(v, Grid{32, 32, 16}));
}
BENCHMARK(BM_Resample)->Unit(benchmark::kMillisecond);

void BM_Auc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = u(rng);
    y[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(auc(s, y));
  state.SetComplexityN(static_cast<std::int64_t>(n));
}
BENCHMARK(BM_Auc)->RangeMultiplier(8)->Range(64, 1 << 18)->Complexity(benchmark::oNLogN);

}  // namespace

BENCHMARK_MAIN();
