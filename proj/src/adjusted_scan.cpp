#include "scanstat/adjusted_scan.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <boost/random/poisson_distribution.hpp>
#include <boost/random/uniform_int_distribution.hpp>

#include "scanstat/errors.hpp"

namespace scanstat {

namespace {

constexpr double kMaxRate = 1e15;

std::vector<Count> poisson_counts(std::span<const double> population, double beta, const Eigen::VectorXd& z,
                                  Rng& rng) {
  std::vector<Count> out(population.size(), 0);
  for (std::size_t i = 0; i < population.size(); ++i) {
    const double rate = population[i] * std::exp(beta + z(static_cast<Eigen::Index>(i)));
    if (!std::isfinite(rate) || rate > kMaxRate)
      throw NumericalError("Model II simulation: rate overflow in region " + std::to_string(i) +
                           " (beta + Z = " + std::to_string(beta + z(static_cast<Eigen::Index>(i))) + ")");
    if (rate > 0.0) out[i] = boost::random::poisson_distribution<Count, double>(rate)(rng);
  }
  return out;
}

}  // namespace

std::vector<Count> simulate_model2_counts(std::span<const double> population, double beta, const CovFactor& f,
                                          Rng& rng) {
  if (f.dim() != population.size()) throw InputError("Model II simulation: factor does not match the regions");
  const Eigen::VectorXd z = simulate_grf(f, rng);
  return poisson_counts(population, beta, z, rng);
}

std::vector<Count> simulate_model2_counts(std::span<const double> population, double beta, const CovFactor& f,
                                          std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return simulate_model2_counts(population, beta, f, rng);
}

NullSimulator model2_simulator(std::vector<double> population, double beta, CovFactor factor) {
  return [pop = std::move(population), beta, f = std::move(factor)](Rng& rng) {
    return simulate_model2_counts(pop, beta, f, rng);
  };
}

double recentered_beta(Count total_cases, std::span<const double> population, const CovFactor& f) {
  if (total_cases <= 0) throw InputError("cannot re-centre the intercept on a period with no cases");
  double s = 0.0;
  for (std::size_t i = 0; i < population.size(); ++i) {
    const double var = f.lower.row(static_cast<Eigen::Index>(i)).squaredNorm();
    s += population[i] * std::exp(0.5 * var);
  }
  return std::log(static_cast<double>(total_cases)) - std::log(s);
}

NullSimulator model2_posterior_simulator(std::vector<double> population, const ModelIIFit& fit,
                                         const DistanceMatrix& dm, std::optional<Count> total_cases) {
  if (fit.draws.empty()) throw InputError("posterior simulator: fit has no draws");
  struct Draw {
    double beta, sigma, rho;
  };
  std::vector<Draw> draws;
  for (const auto& d : fit.draws) draws.push_back({d.beta, d.sigma, d.rho});
  return [pop = std::move(population), draws = std::move(draws), dm, nu = fit.nu, form = fit.form,
          total_cases](Rng& rng) {
    boost::random::uniform_int_distribution<std::size_t> pick(0, draws.size() - 1);
    const Draw& d = draws[pick(rng)];
    const CovFactor f = cholesky(build_cov(dm, MaternParams{d.sigma, d.rho, nu}, form));
    const double beta = total_cases ? recentered_beta(*total_cases, pop, f) : d.beta;
    return simulate_model2_counts(pop, beta, f, rng);
  };
}

void AdjustedConfig::validate() const {
  if (!(alpha_screen > 0.0 && alpha_screen < 1.0)) throw InputError("alpha_screen must lie in (0, 1)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("alpha must lie in (0, 1)");
  if (mc_size < 99) throw InputError("adjusted scan needs at least 99 Monte Carlo replicates");
  if (max_iter < 1) throw InputError("max_iter must be at least 1");
  prior.validate();
  mcmc.validate();
}

ReferenceSummary summarize_reference(std::span<const double> reference) {
  ReferenceSummary s;
  if (reference.empty()) return s;
  std::vector<double> v(reference.begin(), reference.end());
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.q50 = q(0.5);
  s.q90 = q(0.9);
  s.q95 = q(0.95);
  s.q99 = q(0.99);
  s.max = v.back();
  return s;
}

namespace {

std::vector<ClusterReport> clusters_of(const ScanResult& r) {
  std::vector<ClusterReport> out;
  if (r.primary) out.push_back(*r.primary);
  out.insert(out.end(), r.secondaries.begin(), r.secondaries.end());
  return out;
}

std::set<std::vector<std::size_t>> significant_sets(const std::vector<ClusterReport>& clusters, double alpha) {
  std::set<std::vector<std::size_t>> out;
  for (const auto& c : clusters)
    if (c.p_value && *c.p_value <= alpha) out.insert(c.window.members);
  return out;
}

}  // namespace

AdjustedScanResult adjusted_scan(const StudyRegion& sr, const WindowSet& ws, std::size_t period,
                                 const DistanceMatrix& dm, const AdjustedConfig& cfg) {
  cfg.validate();
  if (ws.num_regions() != sr.size() || dm.size() != sr.size())
    throw InputError("adjusted_scan: window set / distances do not match the study region");
  const Count total = sr.total_cases(period);
  if (total <= 0) throw InputError("adjusted_scan: period has no cases");

  AdjustedScanResult result;
  result.classical = classical_scan(sr, ws, period, cfg.mc_size, derive_seed(cfg.seed, {0}), cfg.threads);
  const std::vector<double> pop(sr.population(period).begin(), sr.population(period).end());

  auto previous = significant_sets(clusters_of(result.classical), cfg.alpha_screen);
  for (int iter = 1; iter <= cfg.max_iter; ++iter) {
    IterationRecord rec;
    std::vector<char> out(sr.size(), 0);
    for (const auto& members : previous)
      for (std::size_t i : members) out[i] = 1;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < sr.size(); ++i) {
      if (out[i]) rec.excluded.push_back(i);
      else keep.push_back(i);
    }
    if (keep.size() < 5)
      throw InputError("only " + std::to_string(keep.size()) +
                       " regions remain outside the detected clusters; Model II needs at least 5. "
                       "Use a larger study region or a higher screening threshold.");

    const auto iter_u = static_cast<std::uint64_t>(iter);
    ModelIIFit fit =
        fit_model2(sr, period, dm, cfg.prior, cfg.nu, cfg.mcmc, derive_seed(cfg.seed, {1, iter_u}), keep, cfg.form);
    rec.fit = posterior_means(fit);
    const CovFactor factor = cholesky(build_cov(dm, MaternParams{rec.fit.sigma, rec.fit.rho, cfg.nu}, cfg.form));
    rec.beta_sim = cfg.recenter_beta ? recentered_beta(total, pop, factor) : rec.fit.beta;

    const NullSimulator sim = cfg.posterior_mixing
                                  ? model2_posterior_simulator(pop, fit, dm, cfg.recenter_beta ? std::optional<Count>(total)
                                                                                               : std::nullopt)
                                  : model2_simulator(pop, rec.beta_sim, factor);
    auto reference = reference_distribution(ws, pop, sim, cfg.mc_size, derive_seed(cfg.seed, {2, iter_u}), cfg.threads);
    rec.reference = summarize_reference(reference);

    ScanResult adjusted = result.classical;
    assign_pvalues(adjusted, reference);
    rec.clusters = clusters_of(adjusted);
    const auto current = significant_sets(rec.clusters, cfg.alpha_screen);

    result.iterations.push_back(std::move(rec));
    result.final_reference = std::move(reference);
    result.final_fit = std::move(fit);
    if (current == previous) {
      result.converged = true;
      break;
    }
    previous = current;
  }
  result.final_clusters = result.iterations.back().clusters;
  return result;
}

TrainTestResult train_test_adjusted_scan(const StudyRegion& sr, const DistanceMatrix& dm,
                                         std::span<const std::size_t> train_periods,
                                         std::span<const std::size_t> test_periods, double max_fraction,
                                         const AdjustedConfig& cfg) {
  cfg.validate();
  if (train_periods.empty() || test_periods.empty()) throw InputError("need at least one training and one test period");
  for (std::size_t t : test_periods)
    if (std::find(train_periods.begin(), train_periods.end(), t) != train_periods.end())
      throw InputError("period '" + sr.periods().at(t) + "' is both a training and a test period");

  std::string label;
  for (std::size_t t : train_periods) label += (label.empty() ? "" : "+") + sr.periods().at(t);
  const StudyRegion train = sr.aggregate(train_periods, label);
  if (train.total_cases(0) <= 0) throw InputError("training period has no cases");

  TrainTestResult result;
  result.train_label = label;
  result.fit = fit_model2(train, 0, dm, cfg.prior, cfg.nu, cfg.mcmc, derive_seed(cfg.seed, {1}), {}, cfg.form);
  result.means = posterior_means(result.fit);
  const CovFactor factor =
      cholesky(build_cov(dm, MaternParams{result.means.sigma, result.means.rho, cfg.nu}, cfg.form));

  for (std::size_t k = 0; k < test_periods.size(); ++k) {
    const std::size_t t = test_periods[k];
    const auto ku = static_cast<std::uint64_t>(k);
    PeriodAssessment pa;
    pa.label = sr.periods().at(t);
    const std::vector<double> pop(sr.population(t).begin(), sr.population(t).end());
    const WindowSet ws = enumerate_windows(dm, pop, max_fraction);
    ScanResult observed = scan(sr, ws, t);
    pa.llr_star = observed.llr_star;
    const Count total = sr.total_cases(t);
    if (total == 0) {
      result.periods.push_back(std::move(pa));
      continue;
    }

    const auto classical_ref =
        reference_distribution(ws, pop, model1_simulator(pop, total), cfg.mc_size, derive_seed(cfg.seed, {3, ku}), cfg.threads);
    pa.classical_p = mc_pvalue(observed.llr_star, classical_ref).value();

    pa.beta_sim = cfg.recenter_beta ? recentered_beta(total, pop, factor) : result.means.beta;
    const NullSimulator sim =
        cfg.posterior_mixing
            ? model2_posterior_simulator(pop, result.fit, dm, cfg.recenter_beta ? std::optional<Count>(total) : std::nullopt)
            : model2_simulator(pop, pa.beta_sim, factor);
    const auto reference = reference_distribution(ws, pop, sim, cfg.mc_size, derive_seed(cfg.seed, {4, ku}), cfg.threads);
    pa.reference = summarize_reference(reference);
    assign_pvalues(observed, reference);
    pa.adjusted_p = observed.p_value.value_or(1.0);
    pa.primary = observed.primary;
    pa.secondaries = observed.secondaries;
    result.periods.push_back(std::move(pa));
  }
  return result;
}

}  // namespace scanstat
