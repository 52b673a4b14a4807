#include "scanstat/kernels.hpp"

#include <algorithm>
#include <exception>

#include <omp.h>

#include "llr_inline.hpp"

namespace scanstat::kernels {

namespace {

double center_max(const WindowSet& ws, std::size_t c, std::span<const double> population, std::span<const Count> cases,
                  Count total_cases, double total_pop) {
  const auto ord = ws.order(c);
  const std::size_t len = ws.max_length(c);
  Count y = 0;
  double n = 0.0;
  double best = 0.0;
  for (std::size_t k = 0; k < len; ++k) {
    y += cases[ord[k]];
    n += population[ord[k]];
    if (ws.emitted(c, k + 1)) best = std::max(best, detail::llr_unchecked(y, n, total_cases, total_pop));
  }
  return best;
}

Count sum_cases(std::span<const Count> cases) {
  Count s = 0;
  for (Count c : cases) s += c;
  return s;
}

double sum_pop(std::span<const double> population) {
  double s = 0.0;
  for (double p : population) s += p;
  return s;
}

}  // namespace

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

double max_llr(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases) {
  return serial::max_llr(ws, population, cases);
}

namespace serial {

double max_llr(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases) {
  const Count yg = sum_cases(cases);
  if (yg == 0) return 0.0;
  const double ng = sum_pop(population);
  double best = 0.0;
  for (std::size_t c = 0; c < ws.num_regions(); ++c)
    best = std::max(best, center_max(ws, c, population, cases, yg, ng));
  return best;
}

std::vector<double> reference_distribution(const WindowSet& ws, std::span<const double> population,
                                           const NullSimulator& simulator, int mc_size, std::uint64_t seed) {
  std::vector<double> out(static_cast<std::size_t>(mc_size));
  for (int r = 0; r < mc_size; ++r) {
    Rng rng = make_rng(seed, {static_cast<std::uint64_t>(r)});
    const auto counts = simulator(rng);
    out[static_cast<std::size_t>(r)] = max_llr(ws, population, counts);
  }
  return out;
}

}  // namespace serial

namespace omp {

double max_llr(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases, int threads) {
  const Count yg = sum_cases(cases);
  if (yg == 0) return 0.0;
  const double ng = sum_pop(population);
  const auto m = static_cast<std::int64_t>(ws.num_regions());
  double best = 0.0;
#pragma omp parallel for schedule(static) reduction(max : best) num_threads(resolve_threads(threads))
  for (std::int64_t c = 0; c < m; ++c)
    best = std::max(best, center_max(ws, static_cast<std::size_t>(c), population, cases, yg, ng));
  return best;
}

std::vector<double> reference_distribution(const WindowSet& ws, std::span<const double> population,
                                           const NullSimulator& simulator, int mc_size, std::uint64_t seed,
                                           int threads) {
  std::vector<double> out(static_cast<std::size_t>(mc_size));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic, 8) num_threads(resolve_threads(threads))
  for (int r = 0; r < mc_size; ++r) {
    try {
      Rng rng = make_rng(seed, {static_cast<std::uint64_t>(r)});
      const auto counts = simulator(rng);
      out[static_cast<std::size_t>(r)] = serial::max_llr(ws, population, counts);
    } catch (...) {
#pragma omp critical(scanstat_reference_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace omp

}  // namespace scanstat::kernels
