// kernels:: (OpenMP / GEMM) against reference:: (serial loops).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mapprior/kernels.hpp"
#include "mapprior/maps.hpp"
#include "mapprior/target.hpp"

using namespace mapprior;

namespace {

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = u(rng);
  return v;
}

ConvShape conv_shape(benchmark::State& state) {
  ConvShape s;
  s.in_channels = static_cast<int>(state.range(1));
  s.out_channels = static_cast<int>(state.range(1));
  s.height = s.width = static_cast<int>(state.range(0));
  s.kernel = 3;
  s.pad = 1;
  return s;
}

struct ConvData {
  std::vector<float> in, w, b, out, gin, gw, gb;
  explicit ConvData(const ConvShape& s)
      : in(random_vec(s.input_size(), 1)),
        w(random_vec(s.weight_size(), 2)),
        b(random_vec(static_cast<std::size_t>(s.out_channels), 3)),
        out(random_vec(s.output_size(), 4)),
        gin(s.input_size()),
        gw(s.weight_size()),
        gb(static_cast<std::size_t>(s.out_channels)) {}
};

void BM_ConvForward_Kernels(benchmark::State& state) {
  const ConvShape s = conv_shape(state);
  ConvData d(s);
  std::vector<float> scratch;
  for (auto _ : state) {
    kernels::conv2d_forward<float>(s, d.in, d.w, d.b, d.out, scratch);
    benchmark::DoNotOptimize(d.out.data());
  }
}

void BM_ConvForward_Reference(benchmark::State& state) {
  const ConvShape s = conv_shape(state);
  ConvData d(s);
  for (auto _ : state) {
    reference::conv2d_forward<float>(s, d.in, d.w, d.b, d.out);
    benchmark::DoNotOptimize(d.out.data());
  }
}

void BM_ConvBackward_Kernels(benchmark::State& state) {
  const ConvShape s = conv_shape(state);
  ConvData d(s);
  std::vector<float> scratch;
  for (auto _ : state) {
    kernels::conv2d_backward<float>(s, d.in, d.w, d.out, d.gin, d.gw, d.gb, scratch);
    benchmark::DoNotOptimize(d.gw.data());
  }
}

void BM_ConvBackward_Reference(benchmark::State& state) {
  const ConvShape s = conv_shape(state);
  ConvData d(s);
  for (auto _ : state) {
    reference::conv2d_backward<float>(s, d.in, d.w, d.out, d.gin, d.gw, d.gb);
    benchmark::DoNotOptimize(d.gw.data());
  }
}

template <bool Parallel>
void BM_Score(benchmark::State& state) {
  const int side = static_cast<int>(state.range(0)), c = 32;
  const auto f = random_vec(static_cast<std::size_t>(c) * side * side, 5);
  const auto v = random_vec(static_cast<std::size_t>(c), 6);
  std::vector<double> out(static_cast<std::size_t>(side) * side);
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::score_heatmap(f, c, side, side, v, out);
    else
      reference::score_heatmap(f, c, side, side, v, out);
    benchmark::DoNotOptimize(out.data());
  }
}

template <bool Parallel>
void BM_CrossCorrelate(benchmark::State& state) {
  const OccupancyMap m = maps::corridor_rooms();
  std::vector<Vec2> pts{{0, 0}};
  for (int i = 1; i < static_cast<int>(state.range(0)); ++i) pts.push_back({1.3 * i, 0.3 * (i % 3)});
  const TrajectoryKernel k = rasterize_kernel({pts}, m.resolution());
  Grid<double> out;
  for (auto _ : state) {
    if constexpr (Parallel)
      kernels::cross_correlate(m, k, out);
    else
      reference::cross_correlate(m, k, out);
    benchmark::DoNotOptimize(out.storage().data());
  }
}

}  // namespace

BENCHMARK(BM_ConvForward_Kernels)->Args({64, 16})->Args({256, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward_Reference)->Args({64, 16})->Args({256, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward_Kernels)->Args({64, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackward_Reference)->Args({64, 16})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Score<true>)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Score<false>)->Arg(256)->Arg(512)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CrossCorrelate<true>)->Arg(5)->Arg(20)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CrossCorrelate<false>)->Arg(5)->Arg(20)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
