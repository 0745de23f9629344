#include <benchmark/benchmark.h>

#include <random>

#include "lipspline/linear.hpp"
#include "lipspline/ops.hpp"
#include "lipspline/spline.hpp"
#include "lipspline/tensor.hpp"

using namespace lipspline;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = n(rng);
  return t;
}

void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor a = random_tensor({n, n}, 1);
  const Tensor b = random_tensor({n, n}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ops::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(2 * n * n * n));
}
BENCHMARK(BM_Gemm)->Arg(16)->Arg(64)->Arg(256);

void BM_Conv2d(benchmark::State& state) {
  const auto s = static_cast<std::size_t>(state.range(0));
  const Tensor x = random_tensor({16, 16, s, s}, 3);
  const Tensor k = random_tensor({16, 16, 3, 3}, 4);
  for (auto _ : state) benchmark::DoNotOptimize(ops::conv2d(x, k));
}
BENCHMARK(BM_Conv2d)->Arg(32)->Arg(64);

void BM_SplineForward(benchmark::State& state) {
  const std::size_t c = 64;
  const std::size_t k = 53;
  const Tensor x = random_tensor({256, c}, 5);
  const Tensor coeffs = random_tensor({c, k}, 6);
  const Tensor alpha({c}, 1.0);
  const ops::SplineGrid grid{0.04, -25};
  for (auto _ : state) benchmark::DoNotOptimize(ops::spline_forward(x, coeffs, alpha, grid));
}
BENCHMARK(BM_SplineForward);

void BM_SplineProj(benchmark::State& state) {
  const Tensor c = random_tensor({static_cast<std::size_t>(state.range(0))}, 7);
  for (auto _ : state) benchmark::DoNotOptimize(spline_proj(c.data(), 0.1));
}
BENCHMARK(BM_SplineProj)->Arg(21)->Arg(101)->Arg(1001);

void BM_PowerIteration(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor w = random_tensor({n, n}, 8);
  const DenseOperator op(w);
  std::mt19937_64 rng(10);
  const Tensor v0 = random_unit(op.input_shape(), rng);
  for (auto _ : state) benchmark::DoNotOptimize(power_iteration(op, 100, v0));
}
BENCHMARK(BM_PowerIteration)->Arg(16)->Arg(64);

void BM_Bjorck(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Tensor w = random_tensor({n, n}, 11);
  const Tensor scaled = spectral_normalize(w, dense_spectral_norm(w));
  for (auto _ : state) benchmark::DoNotOptimize(bjorck_orthonormalize(scaled, 20));
}
BENCHMARK(BM_Bjorck)->Arg(16)->Arg(64);

void BM_ConvSpectralNorm(benchmark::State& state) {
  const Tensor k = random_tensor({16, 16, 3, 3}, 9);
  const auto s = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(conv_spectral_norm(k, s, s));
}
BENCHMARK(BM_ConvSpectralNorm)->Arg(32)->Arg(64);

}  // namespace

BENCHMARK_MAIN();
