#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "scanstat/matern.hpp"
#include "scanstat/region_model.hpp"

namespace scanstat {

// Flat priors on beta and sigma, uniform discrete prior on rho in {1, ..., rho_max}.
struct PriorSpec {
  int rho_max = 70;
  std::vector<double> rho_grid() const;
  void validate() const;
};

struct McmcConfig {
  long iterations = 55000;
  long burn_in = 5000;
  long thin = 10;
  int rho_every = 1;  // Gibbs update of rho every k-th iteration
  int adapt_batch = 50;
  double target_accept = 0.44;
  double sigma_init = 0.1;
  long divergence_window = 1000;
  double divergence_factor = 10.0;
  void validate() const;
};

struct ModelIIDraw {
  double beta = 0.0;
  double sigma = 0.0;
  double rho = 0.0;
  std::vector<double> z;
};

struct ParameterSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
  double ess = 0.0;
};

struct AcceptanceRates {
  double z = 0.0;  // averaged over components
  double beta = 0.0;
  double sigma = 0.0;
  double scale = 0.0;  // joint (sigma, Z) rescaling move
};

struct ModelIIFit {
  std::vector<ModelIIDraw> draws;
  ParameterSummary beta, sigma, rho;
  AcceptanceRates acceptance;
  double rho_boundary_fraction = 0.0;  // share of rho draws in the top 5% of the grid
  bool low_ess = false;                // ESS(beta) < 100
  McmcConfig config;
  PriorSpec prior;
  double nu = 1.0;
  MaternForm form = MaternForm::standard;
  std::uint64_t seed = 0;
  double max_jitter = 0.0;  // largest diagonal jitter used for any grid rho
};

struct PosteriorMeans {
  double beta = 0.0;
  double sigma = 0.0;
  double rho = 0.0;
  double rho_grid = 0.0;  // rho rounded to the nearest grid point
};

// Unit-variance Matern correlation matrices for every rho on the prior grid,
// with inverse and log-determinant. Geometry is fixed during a fit, so this is
// computed once.
class CorrelationGrid {
 public:
  CorrelationGrid(const DistanceMatrix& dm, std::vector<double> rho, double nu, MaternForm form);

  std::size_t size() const noexcept { return rho_.size(); }
  double rho(std::size_t g) const { return rho_[g]; }
  const Eigen::MatrixXd& inverse(std::size_t g) const { return inverse_[g]; }
  const Eigen::VectorXd& inverse_ones(std::size_t g) const { return inverse_ones_[g]; }
  double ones_quadratic(std::size_t g) const { return ones_quad_[g]; }
  double log_det(std::size_t g) const { return log_det_[g]; }
  double max_jitter() const noexcept { return max_jitter_; }

 private:
  std::vector<double> rho_;
  std::vector<Eigen::MatrixXd> inverse_;
  std::vector<Eigen::VectorXd> inverse_ones_;
  std::vector<double> ones_quad_;
  std::vector<double> log_det_;
  double max_jitter_ = 0.0;
};

// Log posterior of Model II up to an additive constant:
//   sum_i [y_i (beta + log n_i + z_i) - n_i exp(beta + z_i)]
//   - z' (sigma^2 R)^-1 z / 2 - log|sigma^2 R| / 2 - log(rho_max)
// Returns -infinity when the value is not finite (rate overflow) or rho is off the grid.
double log_posterior(double beta, double sigma, double rho, std::span<const double> z,
                     std::span<const double> population, std::span<const Count> cases, const DistanceMatrix& dm,
                     double nu, const PriorSpec& prior, MaternForm form = MaternForm::standard);

// Metropolis-within-Gibbs fit of Model II. Deterministic given the seed.
ModelIIFit fit_model2(std::span<const double> population, std::span<const Count> cases, const DistanceMatrix& dm,
                      const PriorSpec& prior, double nu, const McmcConfig& config, std::uint64_t seed,
                      MaternForm form = MaternForm::standard);

// Fit on one period, optionally restricted to a subset of regions.
ModelIIFit fit_model2(const StudyRegion& sr, std::size_t period, const DistanceMatrix& dm, const PriorSpec& prior,
                      double nu, const McmcConfig& config, std::uint64_t seed,
                      std::span<const std::size_t> regions = {}, MaternForm form = MaternForm::standard);

// Independent chains with derived seeds, run in parallel.
std::vector<ModelIIFit> fit_model2_chains(std::span<const double> population, std::span<const Count> cases,
                                          const DistanceMatrix& dm, const PriorSpec& prior, double nu,
                                          const McmcConfig& config, std::uint64_t seed, int chains, int threads = 0,
                                          MaternForm form = MaternForm::standard);

// Gelman-Rubin potential scale reduction for one parameter across chains.
enum class Parameter { beta, sigma, rho };
double gelman_rubin(std::span<const ModelIIFit> chains, Parameter which);

PosteriorMeans posterior_means(const ModelIIFit& fit);

// Summary helpers, exposed for tests.
double effective_sample_size(std::span<const double> x);
ParameterSummary summarize(std::span<const double> x);

}  // namespace scanstat
