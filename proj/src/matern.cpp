#include "scanstat/matern.hpp"

#include <cmath>
#include <string>

#include <boost/random/normal_distribution.hpp>

#include "scanstat/errors.hpp"

namespace scanstat {

void MaternParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw InputError("Matern sigma must be positive and finite");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw InputError("Matern rho must be positive and finite");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw InputError("Matern nu must be positive and finite");
}

double matern_corr(double d, double rho, double nu, MaternForm form) {
  if (d < 0.0) throw std::invalid_argument("matern: negative distance");
  if (d == 0.0) return 1.0;
  const double x = d / rho;
  const double k = std::cyl_bessel_k(nu, x);
  const double base = form == MaternForm::standard ? x : std::sqrt(nu) * x;
  const double log_c = (1.0 - nu) * std::log(2.0) - std::lgamma(nu) + nu * std::log(base);
  return std::exp(log_c) * k;
}

double matern_cov(double d, const MaternParams& p, MaternForm form) {
  return p.sigma * p.sigma * matern_corr(d, p.rho, p.nu, form);
}

Eigen::MatrixXd build_cov(const DistanceMatrix& dm, const MaternParams& p, MaternForm form) {
  p.validate();
  const auto m = static_cast<Eigen::Index>(dm.size());
  Eigen::MatrixXd s(m, m);
  const double var = p.sigma * p.sigma;
  for (Eigen::Index i = 0; i < m; ++i) {
    s(i, i) = var;
    for (Eigen::Index j = i + 1; j < m; ++j)
      s(i, j) = s(j, i) = var * matern_corr(dm.matrix()(i, j), p.rho, p.nu, form);
  }
  return s;
}

double CovFactor::log_det() const { return 2.0 * lower.diagonal().array().log().sum(); }

namespace {

// In-place Cholesky of the lower triangle; returns 0 on success or the 1-based
// index of the first non-positive pivot.
std::size_t try_cholesky(const Eigen::MatrixXd& a, double jitter, Eigen::MatrixXd& l) {
  const Eigen::Index n = a.rows();
  l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double diag = a(j, j) + jitter - l.row(j).head(j).squaredNorm();
    if (!(diag > 0.0) || !std::isfinite(diag)) return static_cast<std::size_t>(j + 1);
    const double ljj = std::sqrt(diag);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
  }
  return 0;
}

}  // namespace

CovFactor cholesky(const Eigen::MatrixXd& sigma, double scale) {
  if (sigma.rows() != sigma.cols()) throw std::invalid_argument("cholesky: matrix not square");
  if (!(scale > 0.0)) scale = sigma.rows() > 0 ? sigma.diagonal().maxCoeff() : 1.0;
  if (!(scale > 0.0)) scale = 1.0;
  static constexpr double kLadder[] = {0.0, 1e-10, 1e-8, 1e-6};
  CovFactor f;
  std::size_t failed = 0;
  for (double rung : kLadder) {
    failed = try_cholesky(sigma, rung * scale, f.lower);
    if (failed == 0) {
      f.jitter = rung * scale;
      return f;
    }
  }
  throw NotPositiveDefinite("covariance matrix is not positive definite (leading minor " + std::to_string(failed) +
                                " fails even with jitter 1e-6)",
                            failed);
}

Eigen::VectorXd standard_normals(std::size_t n, Rng& rng) {
  boost::random::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd eps(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = normal(rng);
  return eps;
}

Eigen::VectorXd simulate_grf(const CovFactor& f, Rng& rng) {
  const Eigen::VectorXd eps = standard_normals(f.dim(), rng);
  return f.lower.triangularView<Eigen::Lower>() * eps;
}

Eigen::VectorXd simulate_grf(const CovFactor& f, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  return simulate_grf(f, rng);
}

}  // namespace scanstat
