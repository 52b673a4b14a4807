#include "scanstat/scan.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include <boost/random/binomial_distribution.hpp>

#include "llr_inline.hpp"
#include "scanstat/errors.hpp"
#include "scanstat/kernels.hpp"

namespace scanstat {

double log_lr(Count cases_in, double pop_in, Count total_cases, double total_pop) {
  if (cases_in < 0 || cases_in > total_cases) throw std::invalid_argument("log_lr: need 0 <= cases_in <= total_cases");
  if (!(pop_in > 0.0)) throw std::invalid_argument("log_lr: window population must be positive");
  if (!(pop_in < total_pop)) throw std::invalid_argument("log_lr: window must not cover the whole study region");
  if (total_cases == 0) return 0.0;
  return detail::llr_unchecked(cases_in, pop_in, total_cases, total_pop);
}

std::vector<double> window_llrs(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases) {
  const Count yg = std::accumulate(cases.begin(), cases.end(), Count{0});
  const double ng = std::accumulate(population.begin(), population.end(), 0.0);
  std::vector<double> out(ws.size(), 0.0);
  if (yg == 0) return out;
  for (std::size_t w = 0; w < ws.size(); ++w) {
    const auto ord = ws.order(ws.window(w).center);
    Count y = 0;
    double n = 0.0;
    for (std::size_t k = 0; k < ws.window_length(w); ++k) {
      y += cases[ord[k]];
      n += population[ord[k]];
    }
    out[w] = detail::llr_unchecked(y, n, yg, ng);
  }
  return out;
}

namespace {

ClusterReport make_report(const CandidateCluster& c, std::span<const double> population, std::span<const Count> cases,
                          Count yg, double ng, double llr) {
  ClusterReport r;
  r.window = c;
  for (std::size_t i : c.members) {
    r.cases += cases[i];
    r.population += population[i];
  }
  r.expected = static_cast<double>(yg) * r.population / ng;
  r.llr = llr;
  return r;
}

// Strict weak order: higher llr first, then fewer members, then lexicographic members.
bool ranks_before(const CandidateCluster& a, double la, const CandidateCluster& b, double lb) {
  if (la != lb) return la > lb;
  if (a.members.size() != b.members.size()) return a.members.size() < b.members.size();
  return a.members < b.members;
}

}  // namespace

ScanResult scan(const WindowSet& ws, std::span<const double> population, std::span<const Count> cases) {
  if (population.size() != ws.num_regions() || cases.size() != ws.num_regions())
    throw InputError("scan: data length does not match the window set");
  ScanResult result;
  const Count yg = std::accumulate(cases.begin(), cases.end(), Count{0});
  const double ng = std::accumulate(population.begin(), population.end(), 0.0);
  if (yg == 0 || ws.size() == 0) return result;

  const auto llr = window_llrs(ws, population, cases);
  std::vector<std::size_t> idx;
  for (std::size_t w = 0; w < ws.size(); ++w)
    if (llr[w] > 0.0) idx.push_back(w);
  if (idx.empty()) return result;
  std::sort(idx.begin(), idx.end(),
            [&](std::size_t a, std::size_t b) { return ranks_before(ws.window(a), llr[a], ws.window(b), llr[b]); });

  result.llr_star = llr[idx.front()];
  result.primary = make_report(ws.window(idx.front()), population, cases, yg, ng, llr[idx.front()]);

  std::vector<char> used(ws.num_regions(), 0);
  for (std::size_t i : result.primary->window.members) used[i] = 1;
  for (std::size_t k = 1; k < idx.size(); ++k) {
    const auto& c = ws.window(idx[k]);
    if (std::any_of(c.members.begin(), c.members.end(), [&](std::size_t i) { return used[i] != 0; })) continue;
    for (std::size_t i : c.members) used[i] = 1;
    result.secondaries.push_back(make_report(c, population, cases, yg, ng, llr[idx[k]]));
  }
  return result;
}

ScanResult scan(const StudyRegion& sr, const WindowSet& ws, std::size_t period) {
  return scan(ws, sr.population(period), sr.cases(period));
}

std::vector<Count> simulate_null_model1(std::span<const double> population, Count total_cases, Rng& rng) {
  std::vector<Count> out(population.size(), 0);
  double remaining_pop = std::accumulate(population.begin(), population.end(), 0.0);
  Count remaining = total_cases;
  // Multinomial as a chain of conditional binomials.
  for (std::size_t i = 0; i + 1 < population.size() && remaining > 0; ++i) {
    const double p = std::clamp(population[i] / remaining_pop, 0.0, 1.0);
    boost::random::binomial_distribution<Count, double> draw(remaining, p);
    out[i] = draw(rng);
    remaining -= out[i];
    remaining_pop -= population[i];
  }
  if (!population.empty()) out.back() += remaining;
  return out;
}

std::vector<Count> simulate_null_model1(const StudyRegion& sr, std::size_t period, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return simulate_null_model1(sr.population(period), sr.total_cases(period), rng);
}

NullSimulator model1_simulator(std::vector<double> population, Count total_cases) {
  return [pop = std::move(population), total_cases](Rng& rng) { return simulate_null_model1(pop, total_cases, rng); };
}

std::vector<double> reference_distribution(const WindowSet& ws, std::span<const double> population,
                                           const NullSimulator& simulator, int mc_size, std::uint64_t seed,
                                           int threads) {
  if (mc_size < 1) throw InputError("Monte Carlo size must be at least 1");
  if (kernels::resolve_threads(threads) == 1)
    return kernels::serial::reference_distribution(ws, population, simulator, mc_size, seed);
  return kernels::omp::reference_distribution(ws, population, simulator, mc_size, seed, threads);
}

McPValue mc_pvalue(double observed_llr, std::span<const double> reference) {
  McPValue p;
  p.mc_size = static_cast<std::int64_t>(reference.size());
  p.rank = 1 + std::count_if(reference.begin(), reference.end(), [&](double v) { return v >= observed_llr; });
  return p;
}

McPValue mc_pvalue(double observed_llr, const WindowSet& ws, std::span<const double> population, int mc_size,
                   const NullSimulator& simulator, std::uint64_t seed, int threads) {
  const auto ref = reference_distribution(ws, population, simulator, mc_size, seed, threads);
  return mc_pvalue(observed_llr, ref);
}

void assign_pvalues(ScanResult& result, std::span<const double> reference) {
  result.mc_size = static_cast<int>(reference.size());
  result.p_value = mc_pvalue(result.llr_star, reference).value();
  if (result.primary) result.primary->p_value = result.p_value;
  for (auto& s : result.secondaries) s.p_value = mc_pvalue(s.llr, reference).value();
}

ScanResult classical_scan(const StudyRegion& sr, const WindowSet& ws, std::size_t period, int mc_size,
                          std::uint64_t seed, int threads) {
  auto result = scan(sr, ws, period);
  if (sr.total_cases(period) == 0) {
    // Nothing to simulate: every replicate is empty and scores 0.
    std::vector<double> ref(static_cast<std::size_t>(mc_size), 0.0);
    assign_pvalues(result, ref);
    return result;
  }
  const std::vector<double> pop(sr.population(period).begin(), sr.population(period).end());
  const auto ref = reference_distribution(ws, pop, model1_simulator(pop, sr.total_cases(period)), mc_size, seed, threads);
  assign_pvalues(result, ref);
  return result;
}

}  // namespace scanstat
