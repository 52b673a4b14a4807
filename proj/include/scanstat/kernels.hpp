#pragma once

// Hot loops of the Monte Carlo machinery. Each kernel has a straightforward
// serial version, kept as the reference the tests compare against, and an
// OpenMP version that must produce bit-identical output.

#include <cstdint>
#include <span>
#include <vector>

#include "scanstat/region_model.hpp"
#include "scanstat/scan.hpp"

namespace scanstat::kernels {

// Largest log_lr over the windows of the set. Uses the same summation order
// as window_llrs, so the two agree bit for bit.
double max_llr(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases);

namespace serial {

double max_llr(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases);
std::vector<double> reference_distribution(const WindowSet& ws, std::span<const double> population,
                                           const NullSimulator& simulator, int mc_size, std::uint64_t seed);

}  // namespace serial

namespace omp {

// Parallel over centers.
double max_llr(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases,
               int threads = 0);
// Parallel over replicates.
std::vector<double> reference_distribution(const WindowSet& ws, std::span<const double> population,
                                           const NullSimulator& simulator, int mc_size, std::uint64_t seed,
                                           int threads = 0);

}  // namespace omp

// 0 means "use the OpenMP default".
int resolve_threads(int threads);

}  // namespace scanstat::kernels
