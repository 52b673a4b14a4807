#include "scanstat/fdr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "scanstat/errors.hpp"

namespace scanstat {

double p_to_z(double p, std::optional<int> mc_size) {
  if (mc_size && p == 1.0) p = 1.0 - 1.0 / (2.0 * (*mc_size + 1));
  if (!(p > 0.0 && p < 1.0)) throw InputError("p-value " + std::to_string(p) + " is outside (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

int default_bins(std::size_t n) {
  const auto b = static_cast<int>((n + 4) / 5);
  return std::clamp(b, 20, 60);
}

namespace {

// Natural cubic spline basis (intercept, x, K-2 truncated-power terms).
Eigen::MatrixXd ns_basis(const Eigen::VectorXd& x, const std::vector<double>& knots) {
  const auto k = static_cast<Eigen::Index>(knots.size());
  Eigen::MatrixXd b(x.size(), k);
  auto cube = [](double v) { return v > 0.0 ? v * v * v : 0.0; };
  const double last = knots.back();
  auto d = [&](Eigen::Index j, double v) {
    return (cube(v - knots[static_cast<std::size_t>(j)]) - cube(v - last)) / (last - knots[static_cast<std::size_t>(j)]);
  };
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x(i);
    b(i, 0) = 1.0;
    b(i, 1) = v;
    for (Eigen::Index j = 0; j + 2 < k; ++j) b(i, j + 2) = d(j, v) - d(k - 2, v);
  }
  return b;
}

double poisson_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (y(i) > 0) dev += y(i) * std::log(y(i) / mu(i));
    dev -= y(i) - mu(i);
  }
  return 2.0 * dev;
}

}  // namespace

DensityFit fit_empirical_density(std::span<const double> z, int bins, int spline_df) {
  if (z.size() < 30) throw InputError("fdr: need at least 30 z-values, got " + std::to_string(z.size()));
  if (bins < 3) throw InputError("fdr: need at least 3 bins");
  if (spline_df < 1 || spline_df + 1 > bins) throw InputError("fdr: spline_df must lie in [1, bins - 1]");
  for (double v : z)
    if (!std::isfinite(v)) throw InputError("fdr: non-finite z-value");
  const auto [lo_it, hi_it] = std::minmax_element(z.begin(), z.end());
  if (*lo_it == *hi_it) throw InputError("fdr: all z-values are equal, the histogram has zero width");

  DensityFit fit;
  const double lo = *lo_it - 0.5, hi = *hi_it + 0.5;
  const double w = (hi - lo) / bins;
  for (int b = 0; b <= bins; ++b) fit.edges.push_back(lo + w * b);
  fit.edges.back() = hi;
  fit.counts.assign(static_cast<std::size_t>(bins), 0.0);
  for (double v : z) {
    auto b = static_cast<int>((v - lo) / w);
    fit.counts[static_cast<std::size_t>(std::clamp(b, 0, bins - 1))] += 1.0;
  }
  Eigen::VectorXd x(bins), y(bins);
  for (int b = 0; b < bins; ++b) {
    fit.grid.push_back(0.5 * (fit.edges[static_cast<std::size_t>(b)] + fit.edges[static_cast<std::size_t>(b) + 1]));
    y(b) = fit.counts[static_cast<std::size_t>(b)];
  }
  // Standardize so the cubic terms stay well scaled.
  const double centre = 0.5 * (fit.grid.front() + fit.grid.back());
  const double scale = 0.5 * (fit.grid.back() - fit.grid.front());
  for (int b = 0; b < bins; ++b) x(b) = (fit.grid[static_cast<std::size_t>(b)] - centre) / scale;

  std::vector<double> knots;
  const int nk = spline_df + 1;
  for (int j = 0; j < nk; ++j) knots.push_back(-1.0 + 2.0 * j / (nk - 1));
  const Eigen::MatrixXd basis = ns_basis(x, knots);

  Eigen::VectorXd mu = (y.array() + 0.5).matrix();
  Eigen::VectorXd eta = mu.array().log().matrix();
  double dev = poisson_deviance(y, mu);
  Eigen::VectorXd coef;
  for (int it = 1; it <= 100; ++it) {
    const Eigen::VectorXd sw = mu.array().sqrt().matrix();
    const Eigen::VectorXd work = eta + ((y - mu).array() / mu.array()).matrix();
    const Eigen::MatrixXd a = sw.asDiagonal() * basis;
    coef = a.colPivHouseholderQr().solve((sw.array() * work.array()).matrix());
    eta = basis * coef;
    mu = eta.array().exp().matrix();
    if (!mu.allFinite()) throw NumericalError("fdr: IRLS diverged at iteration " + std::to_string(it));
    const double dev_new = poisson_deviance(y, mu);
    const double change = std::abs(dev_new - dev) / (std::abs(dev_new) + 0.1);
    dev = dev_new;
    if (change <= 1e-8) {
      fit.iterations = it;
      fit.deviance = dev;
      fit.coef.assign(coef.data(), coef.data() + coef.size());
      const double mass = mu.sum() * w;
      for (int b = 0; b < bins; ++b) fit.f.push_back(mu(b) / mass);
      return fit;
    }
  }
  throw NumericalError("fdr: IRLS did not converge in 100 iterations (last deviance " + std::to_string(dev) +
                       ", bins " + std::to_string(bins) + ", spline_df " + std::to_string(spline_df) + ")");
}

EmpiricalNull fit_empirical_null(std::span<const double> grid, std::span<const double> f, double halfwidth) {
  if (grid.size() != f.size() || grid.size() < 3) throw InputError("empirical null: need a grid of at least 3 points");
  const auto mode_at = static_cast<std::size_t>(std::max_element(f.begin(), f.end()) - f.begin());
  if (mode_at == 0 || mode_at + 1 == f.size())
    throw NumericalError("empirical null: the density has no interior mode");
  const double mode = grid[mode_at];
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (std::abs(grid[i] - mode) <= halfwidth + 1e-12 && f[i] > 0.0) {
      xs.push_back(grid[i] - mode);
      ys.push_back(std::log(f[i]));
    }
  }
  if (xs.size() < 3) throw NumericalError("empirical null: fewer than 3 grid points in the central window");
  Eigen::MatrixXd a(static_cast<Eigen::Index>(xs.size()), 3);
  Eigen::VectorXd b(static_cast<Eigen::Index>(xs.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    a(r, 0) = 1.0;
    a(r, 1) = xs[i];
    a(r, 2) = xs[i] * xs[i];
    b(r) = ys[i];
  }
  const Eigen::Vector3d c = a.colPivHouseholderQr().solve(b);
  if (!(c(2) < 0.0)) throw NumericalError("empirical null: central fit of log f is not concave");
  EmpiricalNull n;
  n.mode = mode;
  n.delta0 = mode - c(1) / (2.0 * c(2));
  n.sigma0 = 1.0 / std::sqrt(-2.0 * c(2));
  return n;
}

FdrModel::FdrModel(std::vector<double> z, DensityFit density, EmpiricalNull null, FdrConfig cfg)
    : z_(std::move(z)), density_(std::move(density)), null_(null), cfg_(cfg) {
  fdr_.reserve(z_.size());
  for (double v : z_) fdr_.push_back(local_fdr(v));
}

double FdrModel::null_density(double z) const {
  const double u = (z - null_.delta0) / null_.sigma0;
  return std::exp(-0.5 * u * u) / (null_.sigma0 * std::sqrt(2.0 * std::numbers::pi));
}

double FdrModel::density(double z, bool* clamped) const {
  const auto& g = density_.grid;
  const auto& f = density_.f;
  bool out = false;
  double value;
  if (z <= g.front()) {
    out = z < g.front();
    value = f.front();
  } else if (z >= g.back()) {
    out = z > g.back();
    value = f.back();
  } else {
    const auto j = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), z) - g.begin());
    const double t = (z - g[j - 1]) / (g[j] - g[j - 1]);
    value = std::exp((1.0 - t) * std::log(f[j - 1]) + t * std::log(f[j]));
  }
  if (clamped) *clamped = out;
  return value;
}

FdrValue FdrModel::local_fdr(double z) const {
  FdrValue v;
  const double zz = std::clamp(z, density_.grid.front(), density_.grid.back());
  v.clamped = zz != z;
  const double ratio = null_density(zz) / density(zz);
  v.fdr = std::clamp(ratio, std::numeric_limits<double>::min(), 1.0);
  return v;
}

FdrModel fit_fdr(std::span<const double> z, const FdrConfig& cfg) {
  const int bins = cfg.bins > 0 ? cfg.bins : default_bins(z.size());
  DensityFit fit = fit_empirical_density(z, bins, cfg.spline_df);
  const EmpiricalNull null = fit_empirical_null(fit.grid, fit.f, cfg.halfwidth);
  return FdrModel(std::vector<double>(z.begin(), z.end()), std::move(fit), null, cfg);
}

}  // namespace scanstat
