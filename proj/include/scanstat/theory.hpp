#pragma once

// Poisson versus mixed-Poisson tails: the lognormal rate mixture of Model II
// against the Poisson with the same mean, the second-order expansion of the
// difference, and its sign.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "scanstat/region_model.hpp"

namespace scanstat {

double poisson_pmf(Count k, double lambda);
// Pr(Y >= k) for Y ~ Poisson(lambda), via the regularized incomplete gamma.
double poisson_tail(Count k, double lambda);

struct MonteCarlo {
  std::size_t samples = 1'000'000;
  std::uint64_t seed = 1;
  int threads = 0;
};
// Gauss-Hermite in the single lognormal factor; only for one region.
struct Quadrature {
  int nodes = 96;
};
using TailMethod = std::variant<MonteCarlo, Quadrature>;

struct TailEstimate {
  double value = 0.0;
  double se = 0.0;  // 0 for quadrature and for the degenerate mixture
};

// E[poisson_tail(k, lambda_A)] with lambda_A = exp(beta) sum_i N_i exp(Z_i),
// Z ~ N(0, sigma). Monte Carlo uses lambda_A as a control variate.
TailEstimate mixture_tail(Count k, double beta, std::span<const double> populations, const Eigen::MatrixXd& sigma,
                          const TailMethod& method);

// E[lambda_A] = exp(beta) sum_i N_i exp(sigma_ii / 2).
double mean_rate(double beta, std::span<const double> populations, const Eigen::MatrixXd& sigma);

// Var(sum_i N_i Z_i) = N' sigma N.
double weighted_variance(std::span<const double> populations, const Eigen::MatrixXd& sigma);

// (P_{k-2} - P_{k-1}) exp(2 beta) V_n / (2n), pmf at lambda_bar. Written as
// P_{k-2} (k - 1 - lambda_bar) / (k - 1) so the sign is exact.
double prop2_correction(Count k, double lambda_bar, double beta, double v_n, double n);

struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;  // for weight function exp(-x^2)
};
GaussHermite gauss_hermite(int n);

struct TailComparison {
  Count k = 0;
  double lambda_bar = 0.0;
  double beta = 0.0;
  std::vector<double> populations;
  Eigen::MatrixXd sigma;  // covariance of Z at this n
  double n = 1.0;
  double v_n = 0.0;
  double p1_tail = 0.0;
  double p2_tail = 0.0;
  double p2_se = 0.0;
  double correction = 0.0;
  double remainder() const { return p2_tail - p1_tail - correction; }
};

// base_sigma is the covariance at n = 1; the comparison uses base_sigma / n.
TailComparison compare_tails(Count k, double beta, std::span<const double> populations,
                             const Eigen::MatrixXd& base_sigma, double n, const TailMethod& method);

struct Prop2Setup {
  Count k = 12;
  double beta = 0.5;
  std::vector<double> populations{4.0};
  Eigen::MatrixXd base_sigma = Eigen::MatrixXd::Constant(1, 1, 0.49);
  std::vector<double> n_grid{1e2, 1e3, 1e4};
};

struct Prop2Report {
  std::vector<TailComparison> rows;
  std::vector<double> abs_remainder;
  std::optional<double> slope;  // least-squares slope of log|remainder| on log n
};

// Throws InputError when a Monte Carlo SE exceeds a tenth of the correction.
Prop2Report verify_prop2(const Prop2Setup& setup, const TailMethod& method);

struct Prop1Result {
  double lambda_bar = 0.0;
  Count k_lo = 0, k_hi = 0;  // searched range [lambda_bar, lambda_bar + 10 sqrt(lambda_bar)]
  std::vector<double> diff;   // p2 - p1 for k_lo..k_hi
  std::optional<Count> k_star;  // heavier mixture tail from here to k_hi
};

Prop1Result check_prop1(double beta, std::span<const double> populations, const Eigen::MatrixXd& sigma,
                        const TailMethod& method);

struct CorollaryCell {
  double lambda_bar = 0.0;
  Count k = 0;
  double correction = 0.0;
  bool ok = false;
};

// Sign of the correction against sign(k - lambda_bar - 1) on a grid; at
// equality the correction must be within 1e-14 of zero.
std::vector<CorollaryCell> check_corollary(std::span<const double> lambdas, Count k_min, Count k_max);

}  // namespace scanstat
