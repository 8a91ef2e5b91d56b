// OpenMP kernels against their serial references.
#include <benchmark/benchmark.h>

#include "uigauge/kernels.hpp"

namespace {

using uigauge::Matrix;

Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed) {
  uigauge::Rng rng(seed);
  Matrix m(n, d);
  for (double& v : m.data) v = rng.normal();
  return m;
}

Matrix joint_p(std::size_t n) {
  Matrix X = random_matrix(n, 32, 1);
  auto aff = uigauge::calibrate_affinities(uigauge::squared_distances(X), 30.0);
  Matrix P(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      P.at(i, j) = (aff.conditional.at(i, j) + aff.conditional.at(j, i)) / (2.0 * static_cast<double>(n));
    }
  }
  return P;
}

template <Matrix (*Fn)(const Matrix&)>
void BM_distances(benchmark::State& state) {
  Matrix X = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(X));
}

template <uigauge::Affinities (*Fn)(const Matrix&, double, double, int)>
void BM_affinities(benchmark::State& state) {
  Matrix D = uigauge::serial::squared_distances(random_matrix(static_cast<std::size_t>(state.range(0)), 64, 3));
  for (auto _ : state) benchmark::DoNotOptimize(Fn(D, 30.0, 1e-5, 200));
}

template <double (*Fn)(const Matrix&, const Matrix&, double, Matrix&)>
void BM_gradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Matrix P = joint_p(n);
  Matrix Y = random_matrix(n, 2, 4);
  Matrix grad(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(Fn(P, Y, 12.0, grad));
}

template <void (*Fn)(const Matrix&, const Matrix&, std::vector<int>&, std::vector<double>&)>
void BM_assign(benchmark::State& state) {
  Matrix X = random_matrix(static_cast<std::size_t>(state.range(0)), 64, 5);
  Matrix C = random_matrix(16, 64, 6);
  std::vector<int> labels;
  std::vector<double> dist;
  for (auto _ : state) {
    Fn(X, C, labels, dist);
    benchmark::DoNotOptimize(labels.data());
  }
}

BENCHMARK(BM_distances<uigauge::squared_distances>)->Name("distances/omp")->Arg(500)->Arg(2000);
BENCHMARK(BM_distances<uigauge::serial::squared_distances>)->Name("distances/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_affinities<uigauge::calibrate_affinities>)->Name("affinities/omp")->Arg(500)->Arg(2000);
BENCHMARK(BM_affinities<uigauge::serial::calibrate_affinities>)->Name("affinities/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_gradient<uigauge::tsne_kl_gradient>)->Name("kl_gradient/omp")->Arg(500)->Arg(2000);
BENCHMARK(BM_gradient<uigauge::serial::tsne_kl_gradient>)->Name("kl_gradient/serial")->Arg(500)->Arg(2000);
BENCHMARK(BM_assign<uigauge::assign_nearest>)->Name("assign_nearest/omp")->Arg(10000)->Arg(50000);
BENCHMARK(BM_assign<uigauge::serial::assign_nearest>)->Name("assign_nearest/serial")->Arg(10000)->Arg(50000);

}  // namespace

BENCHMARK_MAIN();
