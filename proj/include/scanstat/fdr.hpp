#pragma once

// Local false discovery rate over per-period p-values: z = Phi^-1(p), a
// Poisson-regression spline fit of the z histogram for f, a normal empirical
// null f0 by central matching, and fdr = f0 / f.

#include <optional>
#include <span>
#include <vector>

namespace scanstat {

// Inverse standard normal CDF. With mc_size given, p = 1 (the top of the Monte
// Carlo grid) is moved to 1 - 1/(2(M+1)). Throws InputError for p outside (0, 1).
double p_to_z(double p, std::optional<int> mc_size = std::nullopt);

struct DensityFit {
  std::vector<double> edges;   // bins + 1 equal-width edges
  std::vector<double> counts;  // histogram
  std::vector<double> grid;    // bin midpoints
  std::vector<double> f;       // fitted density at the midpoints, integrates to 1
  std::vector<double> coef;
  int iterations = 0;
  double deviance = 0.0;
};

// bins = max(20, ceil(n/5)) capped at 60.
int default_bins(std::size_t n);

// Histogram on [min z - 0.5, max z + 0.5], then Poisson IRLS of counts on a
// natural cubic spline basis with spline_df + 1 columns (intercept included).
// Needs at least 30 values. Throws NumericalError if IRLS does not converge
// in 100 iterations.
DensityFit fit_empirical_density(std::span<const double> z, int bins, int spline_df = 5);

struct EmpiricalNull {
  double delta0 = 0.0;
  double sigma0 = 1.0;
  double mode = 0.0;
};

// Quadratic least-squares fit of log f over grid points within halfwidth of
// the grid mode. Throws NumericalError when the fit is not concave.
EmpiricalNull fit_empirical_null(std::span<const double> grid, std::span<const double> f, double halfwidth = 1.0);

struct FdrConfig {
  int bins = 0;  // 0 = default_bins
  int spline_df = 5;
  double halfwidth = 1.0;
  double cutoff = 0.1;  // reporting threshold only
  double p0_bound = 0.9;
};

struct FdrValue {
  double fdr = 1.0;
  bool clamped = false;  // z outside the grid, evaluated at the nearest end
};

class FdrModel {
 public:
  FdrModel(std::vector<double> z, DensityFit density, EmpiricalNull null, FdrConfig cfg);

  // f0(z) / f(z), f log-linearly interpolated, capped at 1.
  FdrValue local_fdr(double z) const;
  double null_density(double z) const;
  double density(double z, bool* clamped = nullptr) const;

  const std::vector<double>& z() const noexcept { return z_; }
  const DensityFit& fit() const noexcept { return density_; }
  const EmpiricalNull& null() const noexcept { return null_; }
  const FdrConfig& config() const noexcept { return cfg_; }
  const std::vector<FdrValue>& fdr() const noexcept { return fdr_; }

 private:
  std::vector<double> z_;
  DensityFit density_;
  EmpiricalNull null_;
  FdrConfig cfg_;
  std::vector<FdrValue> fdr_;
};

FdrModel fit_fdr(std::span<const double> z, const FdrConfig& cfg = {});

}  // namespace scanstat
