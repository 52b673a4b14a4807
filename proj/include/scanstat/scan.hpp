#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "scanstat/region_model.hpp"
#include "scanstat/rng.hpp"

namespace scanstat {

// Log of Kulldorff's normalized Poisson likelihood ratio for a window with
// cases_in / pop_in against the whole region. Zero unless the inside rate is
// strictly higher than the outside rate. Requires 0 <= cases_in <= total_cases
// and 0 < pop_in < total_pop.
double log_lr(Count cases_in, double pop_in, Count total_cases, double total_pop);

struct ClusterReport {
  CandidateCluster window;
  Count cases = 0;
  double population = 0.0;
  double expected = 0.0;  // total_cases * population / total_pop
  double llr = 0.0;
  std::optional<double> p_value;
};

struct ScanResult {
  double llr_star = 0.0;
  std::optional<ClusterReport> primary;
  std::vector<ClusterReport> secondaries;
  std::optional<double> p_value;
  int mc_size = 0;
};

// Monte Carlo p-value r/(M+1), kept as the integer pair.
struct McPValue {
  std::int64_t rank = 1;  // 1 + number of simulated values >= observed
  std::int64_t mc_size = 0;
  double value() const noexcept { return static_cast<double>(rank) / static_cast<double>(mc_size + 1); }
};

// llr of every window for one period (same order as ws.windows()); windows
// that cover the entire study population get 0.
std::vector<double> window_llrs(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases);

// Maximizes log_lr over the windows. Ties go to the smaller window, then to the
// lexicographically smaller member list. Secondaries are picked greedily in
// decreasing llr among windows disjoint from everything already chosen.
ScanResult scan(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases);
ScanResult scan(const StudyRegion& sr, const WindowSet& ws, std::size_t period);

// Produces one simulated count vector per call. Must be callable concurrently.
using NullSimulator = std::function<std::vector<Count>(Rng&)>;

// Model I null: total_cases distributed multinomially with probabilities
// population_i / total population.
std::vector<Count> simulate_null_model1(std::span<const double> population, Count total_cases, Rng& rng);
std::vector<Count> simulate_null_model1(const StudyRegion& sr, std::size_t period, std::uint64_t seed);
NullSimulator model1_simulator(std::vector<double> population, Count total_cases);

// Maximized llr of M simulated datasets; replicate r uses the seed stream
// derive_seed(seed, {r}). Identical results for any thread count.
std::vector<double> reference_distribution(const WindowSet& ws, std::span<const double> population,
                                           const NullSimulator& simulator, int mc_size, std::uint64_t seed,
                                           int threads = 0);

McPValue mc_pvalue(double observed_llr, std::span<const double> reference);
McPValue mc_pvalue(double observed_llr, const WindowSet& ws, std::span<const double> population, int mc_size,
                   const NullSimulator& simulator, std::uint64_t seed, int threads = 0);

// Fills p-values of primary and secondaries from a reference sample.
void assign_pvalues(ScanResult& result, std::span<const double> reference);

// Classical scan with Model I Monte Carlo p-values.
ScanResult classical_scan(const StudyRegion& sr, const WindowSet& ws, std::size_t period, int mc_size,
                          std::uint64_t seed, int threads = 0);

}  // namespace scanstat
