#include <benchmark/benchmark.h>

#include "greybox/batch.h"
#include "greybox/gp.h"
#include "greybox/rng.h"

namespace {

using namespace greybox;

PointSet points(int n, int d, std::uint64_t seed) { return scrambled_halton(n, d, seed); }

Kernel kernel(int d) { return Kernel(KernelFamily::Matern52, Vector::Constant(d, 0.3), 1.0); }

void BM_GramSerial(benchmark::State& state) {
  const PointSet x = points(static_cast<int>(state.range(0)), 4, 1);
  const Kernel k = kernel(4);
  for (auto _ : state) benchmark::DoNotOptimize(serial::gram(k, x));
}

void BM_GramParallel(benchmark::State& state) {
  const PointSet x = points(static_cast<int>(state.range(0)), 4, 1);
  const Kernel k = kernel(4);
  for (auto _ : state) benchmark::DoNotOptimize(parallel::gram(k, x));
}

void BM_CrossGramSerial(benchmark::State& state) {
  const PointSet a = points(200, 4, 1);
  const PointSet b = points(static_cast<int>(state.range(0)), 4, 2);
  const Kernel k = kernel(4);
  for (auto _ : state) benchmark::DoNotOptimize(serial::cross_gram(k, a, b));
}

void BM_CrossGramParallel(benchmark::State& state) {
  const PointSet a = points(200, 4, 1);
  const PointSet b = points(static_cast<int>(state.range(0)), 4, 2);
  const Kernel k = kernel(4);
  for (auto _ : state) benchmark::DoNotOptimize(parallel::cross_gram(k, a, b));
}

GpPosterior posterior() {
  const PointSet x = points(100, 4, 3);
  Vector y(x.cols());
  for (Eigen::Index i = 0; i < x.cols(); ++i) y(i) = std::sin(3.0 * x.col(i).sum());
  return GpPosterior(kernel(4), MeanFunction::zero(), Dataset(x, y));
}

void BM_PredictSerial(benchmark::State& state) {
  const GpPosterior gp = posterior();
  const PointSet q = points(static_cast<int>(state.range(0)), 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(serial::predict(gp, q));
}

void BM_PredictParallel(benchmark::State& state) {
  const GpPosterior gp = posterior();
  const PointSet q = points(static_cast<int>(state.range(0)), 4, 4);
  for (auto _ : state) benchmark::DoNotOptimize(parallel::predict(gp, q));
}

BENCHMARK(BM_GramSerial)->Arg(100)->Arg(400);
BENCHMARK(BM_GramParallel)->Arg(100)->Arg(400);
BENCHMARK(BM_CrossGramSerial)->Arg(1000)->Arg(4000);
BENCHMARK(BM_CrossGramParallel)->Arg(1000)->Arg(4000);
BENCHMARK(BM_PredictSerial)->Arg(1000)->Arg(4000);
BENCHMARK(BM_PredictParallel)->Arg(1000)->Arg(4000);

}  // namespace

BENCHMARK_MAIN();
