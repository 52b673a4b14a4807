#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "scanstat/region_model.hpp"
#include "scanstat/rng.hpp"

namespace scanstat {

struct MaternParams {
  double sigma = 1.0;  // standard deviation of the field
  double rho = 1.0;    // range, in map units
  double nu = 1.0;     // smoothness
  void validate() const;
};

// standard: sigma^2 / (2^(nu-1) Gamma(nu)) (d/rho)^nu K_nu(d/rho), unit
// variance at d = 0.
// scaled_power: the variant with sqrt(nu) inside the power term only,
// (sqrt(nu) d/rho)^nu K_nu(d/rho). Identical to standard at nu = 1; kept for
// sensitivity runs.
enum class MaternForm { standard, scaled_power };

double matern_cov(double d, const MaternParams& p, MaternForm form = MaternForm::standard);
// Unit-variance correlation, matern_cov with sigma = 1.
double matern_corr(double d, double rho, double nu, MaternForm form = MaternForm::standard);

Eigen::MatrixXd build_cov(const DistanceMatrix& dm, const MaternParams& p, MaternForm form = MaternForm::standard);

// Lower-triangular factor with sigma = L L' (+ jitter on the diagonal).
struct CovFactor {
  Eigen::MatrixXd lower;
  double jitter = 0.0;  // absolute amount added to the diagonal
  std::size_t dim() const noexcept { return static_cast<std::size_t>(lower.rows()); }
  double log_det() const;
};

// Tries jitter {0, 1e-10, 1e-8, 1e-6} * scale in turn; scale defaults to the
// largest diagonal entry. Throws NotPositiveDefinite naming the failing
// leading minor if every rung fails.
CovFactor cholesky(const Eigen::MatrixXd& sigma, double scale = 0.0);

// Z = L eps with eps i.i.d. standard normal.
Eigen::VectorXd simulate_grf(const CovFactor& f, Rng& rng);
Eigen::VectorXd simulate_grf(const CovFactor& f, std::uint64_t seed);

// eps ~ N(0, I), the draws simulate_grf multiplies by L.
Eigen::VectorXd standard_normals(std::size_t n, Rng& rng);

}  // namespace scanstat
