#include <benchmark/benchmark.h>

#include <random>

#include "pfci/metrics.hpp"
#include "pfci/models.hpp"
#include "pfci/nn/ops.hpp"
#include "pfci/phantom.hpp"
#include "pfci/projection.hpp"

using namespace pfci;

namespace {

CtVolume noise_volume(int n) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> hu(-2048, 1500);
  const Dims3 d{n, n, n};
  std::vector<std::int16_t> v(d.count());
  for (auto& x : v) x = static_cast<std::int16_t>(hu(rng));
  return CtVolume(d, {1.0, 1.0, 1.0}, std::move(v));
}

FloatImage noise_image(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> px(static_cast<std::size_t>(n) * n);
  for (auto& p : px) p = u(rng);
  return FloatImage(n, n, std::move(px));
}

}  // namespace

static void BM_Cwrs(benchmark::State& state) {
  const CtVolume vol = noise_volume(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cwrs(vol));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(vol.dims().count()));
}
BENCHMARK(BM_Cwrs)->Arg(64)->Arg(128)->Arg(256);

static void BM_PseudoCxr(benchmark::State& state) {
  const CtVolume vol = noise_volume(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(pseudo_cxr(vol));
}
BENCHMARK(BM_PseudoCxr)->Arg(64)->Arg(128);

static void BM_Phantom(benchmark::State& state) {
  PhantomParams p;
  const int n = static_cast<int>(state.range(0));
  p.dims = {n, n, n};
  std::uint64_t seed = 0;
  for (auto _ : state) benchmark::DoNotOptimize(generate_phantom(seed++, p));
}
BENCHMARK(BM_Phantom)->Arg(64)->Unit(benchmark::kMillisecond);

static void BM_SsimGlobal(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FloatImage a = noise_image(n, 1), b = noise_image(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssim_global(a, b));
}
BENCHMARK(BM_SsimGlobal)->Arg(64)->Arg(256);

static void BM_SsimWindowed(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const FloatImage a = noise_image(n, 1), b = noise_image(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(ssim_windowed(a, b));
}
BENCHMARK(BM_SsimWindowed)->Arg(64)->Arg(256);

static void BM_Conv2dForwardBackward(benchmark::State& state) {
  using namespace pfci::nn;
  const int c = static_cast<int>(state.range(0)), hw = static_cast<int>(state.range(1));
  std::mt19937_64 rng(3);
  std::normal_distribution<float> g(0, 1);
  auto filled = [&](Shape s) {
    Tensor<float> t(s);
    for (auto& v : t.span()) v = g(rng);
    return t;
  };
  const Var<float> x(filled(Shape{1, c, hw, hw}), true);
  const Var<float> w(filled(Shape{c, c, 3, 3}), true);
  const Var<float> b(filled(Shape{1, c, 1, 1}), true);
  for (auto _ : state) {
    Var<float> y = mse_const(conv2d(x, w, b, 1, 1), 0.0);
    backward(y);
    benchmark::DoNotOptimize(w.grad());
  }
}
BENCHMARK(BM_Conv2dForwardBackward)->Args({16, 64})->Args({64, 16})->Unit(benchmark::kMicrosecond);

static void BM_CycleGanTranslate(benchmark::State& state) {
  NetConfig n;
  n.input_size = 64;
  n.base_width = 16;
  n.disc_base_width = 16;
  const CycleGanModel model(init_cyclegan_checkpoint(n, TrainConfig{}));
  const FloatImage x = normalize_pm1(noise_image(64, 4));
  for (auto _ : state) benchmark::DoNotOptimize(model.translate(x, Direction::AtoB));
}
BENCHMARK(BM_CycleGanTranslate)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
