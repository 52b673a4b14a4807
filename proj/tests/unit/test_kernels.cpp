#include "doctest.h"

#include <algorithm>
#include <numeric>

#include "scanstat/harness.hpp"
#include "scanstat/kernels.hpp"
#include "scanstat/scan.hpp"

using namespace scanstat;

namespace {

struct Setup {
  Geometry g;
  WindowSet ws;
  std::vector<Count> y;
  Count total = 0;
};

Setup make(std::size_t m, std::uint64_t seed) {
  Setup s;
  s.g = synth_geometry(m, {}, seed, 3.0, 1.0);
  s.ws = enumerate_windows(distance_matrix(s.g.regions), s.g.population, 0.5);
  Rng rng = make_rng(seed + 1);
  const double n = std::accumulate(s.g.population.begin(), s.g.population.end(), 0.0);
  s.y = simulate_null_model1(s.g.population, static_cast<Count>(0.05 * n) + 1, rng);
  s.total = std::accumulate(s.y.begin(), s.y.end(), Count{0});
  return s;
}

}  // namespace

TEST_CASE("max_llr agrees with window_llrs bit for bit") {
  for (std::size_t m : {1u, 5u, 40u, 90u}) {
    const auto s = make(m, m);
    const auto all = window_llrs(s.ws, s.g.population, s.y);
    const double ref = all.empty() ? 0.0 : std::max(0.0, *std::max_element(all.begin(), all.end()));
    CHECK(kernels::serial::max_llr(s.ws, s.g.population, s.y) == ref);
    for (int t : {1, 2, 4}) CHECK(kernels::omp::max_llr(s.ws, s.g.population, s.y, t) == ref);
  }
}

TEST_CASE("reference distribution: serial and parallel identical") {
  const auto s = make(30, 3);
  const auto sim = model1_simulator(s.g.population, s.total);
  const auto ref = kernels::serial::reference_distribution(s.ws, s.g.population, sim, 57, 99);
  REQUIRE(ref.size() == 57);
  for (int t : {1, 2, 3, 8}) CHECK(kernels::omp::reference_distribution(s.ws, s.g.population, sim, 57, 99, t) == ref);
  CHECK(reference_distribution(s.ws, s.g.population, sim, 57, 99, 2) == ref);
  CHECK(kernels::serial::reference_distribution(s.ws, s.g.population, sim, 57, 100) != ref);
}

TEST_CASE("thread count resolution") {
  CHECK(kernels::resolve_threads(3) == 3);
  CHECK(kernels::resolve_threads(0) >= 1);
}
