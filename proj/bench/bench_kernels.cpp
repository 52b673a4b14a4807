// Serial reference kernels against their OpenMP versions.

#include <benchmark/benchmark.h>

#include <numeric>

#include "scanstat/harness.hpp"
#include "scanstat/kernels.hpp"
#include "scanstat/scan.hpp"

using namespace scanstat;

namespace {

struct Fixture {
  Geometry g;
  DistanceMatrix dm;
  WindowSet ws;
  std::vector<Count> y;

  explicit Fixture(std::size_t m) {
    g = synth_geometry(m, {}, 11, 2.7, 1.2);
    dm = distance_matrix(g.regions);
    ws = enumerate_windows(dm, g.population, 0.5);
    const double total = std::accumulate(g.population.begin(), g.population.end(), 0.0);
    Rng rng = make_rng(3);
    y = simulate_null_model1(g.population, static_cast<Count>(total * 0.05), rng);
  }
};

const Fixture& fixture(std::size_t m) {
  static Fixture f32(32), f128(128), f512(512);
  return m == 32 ? f32 : m == 128 ? f128 : f512;
}

void BM_MaxLlrSerial(benchmark::State& s) {
  const auto& f = fixture(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::serial::max_llr(f.ws, f.g.population, f.y));
  s.counters["windows"] = static_cast<double>(f.ws.size());
}

void BM_MaxLlrOmp(benchmark::State& s) {
  const auto& f = fixture(static_cast<std::size_t>(s.range(0)));
  for (auto _ : s) benchmark::DoNotOptimize(kernels::omp::max_llr(f.ws, f.g.population, f.y, 0));
  s.counters["windows"] = static_cast<double>(f.ws.size());
}

void BM_ReferenceSerial(benchmark::State& s) {
  const auto& f = fixture(static_cast<std::size_t>(s.range(0)));
  const Count total = std::accumulate(f.y.begin(), f.y.end(), Count{0});
  const auto sim = model1_simulator(f.g.population, total);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::serial::reference_distribution(f.ws, f.g.population, sim, 199, 5));
}

void BM_ReferenceOmp(benchmark::State& s) {
  const auto& f = fixture(static_cast<std::size_t>(s.range(0)));
  const Count total = std::accumulate(f.y.begin(), f.y.end(), Count{0});
  const auto sim = model1_simulator(f.g.population, total);
  for (auto _ : s) benchmark::DoNotOptimize(kernels::omp::reference_distribution(f.ws, f.g.population, sim, 199, 5, 0));
}

}  // namespace

BENCHMARK(BM_MaxLlrSerial)->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_MaxLlrOmp)->Arg(32)->Arg(128)->Arg(512);
BENCHMARK(BM_ReferenceSerial)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ReferenceOmp)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
