#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "scanstat/glmm.hpp"
#include "scanstat/matern.hpp"
#include "scanstat/region_model.hpp"
#include "scanstat/scan.hpp"

namespace scanstat {

// Y_i ~ Poisson(n_i exp(beta + Z_i)), Z = L eps. Unconditional on the total.
// Throws NumericalError naming the region whose rate is not finite.
std::vector<Count> simulate_model2_counts(std::span<const double> population, double beta, const CovFactor& f,
                                          Rng& rng);
std::vector<Count> simulate_model2_counts(std::span<const double> population, double beta, const CovFactor& f,
                                          std::uint64_t seed);

NullSimulator model2_simulator(std::vector<double> population, double beta, CovFactor factor);

// Draws (beta, sigma, rho) from a random retained posterior draw for every
// simulation instead of plugging in the posterior means. The intercept of each
// draw is re-centred the same way as the plug-in intercept when `total_cases`
// is given.
NullSimulator model2_posterior_simulator(std::vector<double> population, const ModelIIFit& fit,
                                         const DistanceMatrix& dm, std::optional<Count> total_cases);

// Intercept for which E[sum of simulated counts] equals total_cases:
// log(total_cases) - log(sum_i n_i exp(Sigma_ii / 2)), with Sigma_ii taken from
// the factor (so any jitter is included).
double recentered_beta(Count total_cases, std::span<const double> population, const CovFactor& f);

struct AdjustedConfig {
  double alpha_screen = 0.1;
  double alpha = 0.05;
  int mc_size = 999;
  int max_iter = 5;
  PriorSpec prior;
  double nu = 1.0;
  MaternForm form = MaternForm::standard;
  McmcConfig mcmc;
  bool recenter_beta = true;
  bool posterior_mixing = false;
  std::uint64_t seed = 1;
  int threads = 0;
  void validate() const;
};

struct ReferenceSummary {
  double mean = 0.0;
  double q50 = 0.0;
  double q90 = 0.0;
  double q95 = 0.0;
  double q99 = 0.0;
  double max = 0.0;
};
ReferenceSummary summarize_reference(std::span<const double> reference);

struct IterationRecord {
  std::vector<std::size_t> excluded;  // regions left out of the fit
  PosteriorMeans fit;
  double beta_sim = 0.0;  // intercept used for the reference simulations
  ReferenceSummary reference;
  std::vector<ClusterReport> clusters;  // primary first, adjusted p-values
};

struct AdjustedScanResult {
  ScanResult classical;  // Model I p-values
  std::vector<IterationRecord> iterations;
  bool converged = false;
  std::vector<ClusterReport> final_clusters;  // from the last iteration
  std::vector<double> final_reference;        // llr* sample of the last iteration
  ModelIIFit final_fit;
};

// Detect clusters classically, fit Model II outside them, rebuild the llr*
// reference from Model II simulations, re-assess, and repeat until the set of
// clusters significant at alpha_screen stops changing.
AdjustedScanResult adjusted_scan(const StudyRegion& sr, const WindowSet& ws, std::size_t period,
                                 const DistanceMatrix& dm, const AdjustedConfig& cfg);

struct PeriodAssessment {
  std::string label;
  double llr_star = 0.0;
  std::optional<ClusterReport> primary;
  std::vector<ClusterReport> secondaries;  // with adjusted p-values
  double classical_p = 1.0;
  double adjusted_p = 1.0;
  double beta_sim = 0.0;
  ReferenceSummary reference;
};

struct TrainTestResult {
  std::string train_label;
  ModelIIFit fit;
  PosteriorMeans means;
  std::vector<PeriodAssessment> periods;
};

// One Model II fit on the (aggregated) training periods, then, for every test
// period, a Model II reference with the intercept re-centred to that period.
// Windows are enumerated from each test period's populations.
TrainTestResult train_test_adjusted_scan(const StudyRegion& sr, const DistanceMatrix& dm,
                                         std::span<const std::size_t> train_periods,
                                         std::span<const std::size_t> test_periods, double max_fraction,
                                         const AdjustedConfig& cfg);

}  // namespace scanstat
