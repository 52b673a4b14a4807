#include "scanstat/theory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "scanstat/errors.hpp"
#include "scanstat/kernels.hpp"
#include "scanstat/matern.hpp"
#include "scanstat/rng.hpp"

namespace scanstat {

double poisson_pmf(Count k, double lambda) {
  if (k < 0) return 0.0;
  if (lambda == 0.0) return k == 0 ? 1.0 : 0.0;
  const double kd = static_cast<double>(k);
  return std::exp(kd * std::log(lambda) - lambda - std::lgamma(kd + 1.0));
}

double poisson_tail(Count k, double lambda) {
  if (k <= 0) return 1.0;
  if (lambda <= 0.0) return 0.0;
  return boost::math::gamma_p(static_cast<double>(k), lambda);
}

double mean_rate(double beta, std::span<const double> populations, const Eigen::MatrixXd& sigma) {
  double s = 0.0;
  for (std::size_t i = 0; i < populations.size(); ++i)
    s += populations[i] * std::exp(0.5 * sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
  return std::exp(beta) * s;
}

double weighted_variance(std::span<const double> populations, const Eigen::MatrixXd& sigma) {
  const Eigen::Map<const Eigen::VectorXd> n(populations.data(), static_cast<Eigen::Index>(populations.size()));
  return n.dot(sigma * n);
}

double prop2_correction(Count k, double lambda_bar, double beta, double v_n, double n) {
  if (k < 2) throw std::invalid_argument("prop2_correction: k must be at least 2");
  const double km1 = static_cast<double>(k - 1);
  const double diff = poisson_pmf(k - 2, lambda_bar) * (km1 - lambda_bar) / km1;
  return diff * std::exp(2.0 * beta) * v_n / (2.0 * n);
}

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n must be positive");
  // Newton on the orthonormal Hermite recurrence, roots found from the largest down.
  const double pim4 = 1.0 / std::pow(std::numbers::pi, 0.25);
  GaussHermite gh;
  gh.nodes.assign(static_cast<std::size_t>(n), 0.0);
  gh.weights.assign(static_cast<std::size_t>(n), 0.0);
  const int m = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < m; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * gh.nodes[0];
    else if (i == 3) z = 1.91 * z - 0.91 * gh.nodes[1];
    else z = 2.0 * z - gh.nodes[static_cast<std::size_t>(i - 2)];
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = pim4, p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    gh.nodes[static_cast<std::size_t>(i)] = z;
    gh.nodes[static_cast<std::size_t>(n - 1 - i)] = -z;
    gh.weights[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
    gh.weights[static_cast<std::size_t>(n - 1 - i)] = 2.0 / (pp * pp);
  }
  return gh;
}

namespace {

constexpr std::size_t kBatch = 10'000;

struct BatchSums {
  double n = 0, sy = 0, sx = 0, syy = 0, sxx = 0, sxy = 0;
};

TailEstimate monte_carlo_tail(Count k, double beta, std::span<const double> populations,
                              const Eigen::MatrixXd& sigma, const MonteCarlo& mc) {
  if (mc.samples < 2) throw InputError("mixture_tail: need at least two Monte Carlo samples");
  const CovFactor f = cholesky(sigma);
  const double mean_x = mean_rate(beta, populations, sigma);
  const double eb = std::exp(beta);
  const std::size_t batches = (mc.samples + kBatch - 1) / kBatch;
  std::vector<BatchSums> sums(batches);
  const int threads = kernels::resolve_threads(mc.threads);
  const auto nb = static_cast<long>(batches);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long b = 0; b < nb; ++b) {
    Rng rng = make_rng(mc.seed, {static_cast<std::uint64_t>(b)});
    const std::size_t lo = static_cast<std::size_t>(b) * kBatch;
    const std::size_t hi = std::min(mc.samples, lo + kBatch);
    BatchSums s;
    for (std::size_t r = lo; r < hi; ++r) {
      const Eigen::VectorXd z = f.lower.triangularView<Eigen::Lower>() * standard_normals(f.dim(), rng);
      double lam = 0.0;
      for (std::size_t i = 0; i < populations.size(); ++i)
        lam += populations[i] * std::exp(z(static_cast<Eigen::Index>(i)));
      lam *= eb;
      const double y = poisson_tail(k, lam);
      const double x = lam - mean_x;
      s.n += 1;
      s.sy += y;
      s.sx += x;
      s.syy += y * y;
      s.sxx += x * x;
      s.sxy += x * y;
    }
    sums[static_cast<std::size_t>(b)] = s;
  }
  BatchSums t;
  for (const auto& s : sums) {
    t.n += s.n;
    t.sy += s.sy;
    t.sx += s.sx;
    t.syy += s.syy;
    t.sxx += s.sxx;
    t.sxy += s.sxy;
  }
  const double my = t.sy / t.n, mx = t.sx / t.n;
  const double vxx = t.sxx / t.n - mx * mx;
  const double vxy = t.sxy / t.n - mx * my;
  const double vyy = t.syy / t.n - my * my;
  const double c = vxx > 0.0 ? vxy / vxx : 0.0;
  TailEstimate e;
  e.value = my - c * mx;
  const double resid = std::max(0.0, vyy - c * vxy);
  e.se = std::sqrt(resid / (t.n - 1.0));
  return e;
}

}  // namespace

TailEstimate mixture_tail(Count k, double beta, std::span<const double> populations, const Eigen::MatrixXd& sigma,
                          const TailMethod& method) {
  if (populations.empty()) throw InputError("mixture_tail: no populations");
  if (sigma.rows() != static_cast<Eigen::Index>(populations.size()) || sigma.cols() != sigma.rows())
    throw InputError("mixture_tail: covariance does not match the populations");
  double total = 0.0;
  for (double n : populations) total += n;
  if (sigma.cwiseAbs().maxCoeff() == 0.0) return {poisson_tail(k, std::exp(beta) * total), 0.0};

  if (const auto* q = std::get_if<Quadrature>(&method)) {
    if (populations.size() != 1) throw InputError("quadrature is only available for a single region");
    if (q->nodes < 64) throw InputError("quadrature needs at least 64 nodes");
    const GaussHermite gh = gauss_hermite(q->nodes);
    const double s = std::sqrt(sigma(0, 0));
    const double c = std::exp(beta) * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i)
      acc += gh.weights[i] * poisson_tail(k, c * std::exp(std::numbers::sqrt2 * s * gh.nodes[i]));
    return {acc / std::sqrt(std::numbers::pi), 0.0};
  }
  return monte_carlo_tail(k, beta, populations, sigma, std::get<MonteCarlo>(method));
}

TailComparison compare_tails(Count k, double beta, std::span<const double> populations,
                             const Eigen::MatrixXd& base_sigma, double n, const TailMethod& method) {
  if (!(n > 0.0)) throw InputError("compare_tails: n must be positive");
  TailComparison t;
  t.k = k;
  t.beta = beta;
  t.populations.assign(populations.begin(), populations.end());
  t.sigma = base_sigma / n;
  t.n = n;
  t.lambda_bar = mean_rate(beta, populations, t.sigma);
  t.v_n = n * weighted_variance(populations, t.sigma);
  t.p1_tail = poisson_tail(k, t.lambda_bar);
  const TailEstimate e = mixture_tail(k, beta, populations, t.sigma, method);
  t.p2_tail = e.value;
  t.p2_se = e.se;
  t.correction = prop2_correction(k, t.lambda_bar, beta, t.v_n, n);
  return t;
}

Prop2Report verify_prop2(const Prop2Setup& setup, const TailMethod& method) {
  if (setup.n_grid.empty()) throw InputError("verify_prop2: empty n grid");
  Prop2Report rep;
  bool all_positive = true;
  for (double n : setup.n_grid) {
    TailComparison t = compare_tails(setup.k, setup.beta, setup.populations, setup.base_sigma, n, method);
    if (t.p2_se > 0.1 * std::abs(t.correction))
      throw InputError("Monte Carlo SE " + std::to_string(t.p2_se) + " at n = " + std::to_string(n) +
                       " is too large against the correction " + std::to_string(t.correction) +
                       "; raise the number of samples");
    const double r = std::abs(t.remainder());
    all_positive = all_positive && r > 0.0;
    rep.abs_remainder.push_back(r);
    rep.rows.push_back(std::move(t));
  }
  if (all_positive && setup.n_grid.size() >= 2) {
    double mx = 0, my = 0;
    const double m = static_cast<double>(setup.n_grid.size());
    for (std::size_t i = 0; i < setup.n_grid.size(); ++i) {
      mx += std::log(setup.n_grid[i]);
      my += std::log(rep.abs_remainder[i]);
    }
    mx /= m;
    my /= m;
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < setup.n_grid.size(); ++i) {
      const double dx = std::log(setup.n_grid[i]) - mx;
      sxy += dx * (std::log(rep.abs_remainder[i]) - my);
      sxx += dx * dx;
    }
    rep.slope = sxy / sxx;
  }
  return rep;
}

Prop1Result check_prop1(double beta, std::span<const double> populations, const Eigen::MatrixXd& sigma,
                        const TailMethod& method) {
  Prop1Result r;
  r.lambda_bar = mean_rate(beta, populations, sigma);
  r.k_lo = static_cast<Count>(std::floor(r.lambda_bar));
  r.k_hi = static_cast<Count>(std::ceil(r.lambda_bar + 10.0 * std::sqrt(r.lambda_bar)));
  for (Count k = r.k_lo; k <= r.k_hi; ++k)
    r.diff.push_back(mixture_tail(k, beta, populations, sigma, method).value - poisson_tail(k, r.lambda_bar));
  for (std::size_t i = r.diff.size(); i-- > 0;) {
    if (!(r.diff[i] > 0.0)) break;
    r.k_star = r.k_lo + static_cast<Count>(i);
  }
  return r;
}

std::vector<CorollaryCell> check_corollary(std::span<const double> lambdas, Count k_min, Count k_max) {
  std::vector<CorollaryCell> out;
  for (double lam : lambdas) {
    for (Count k = std::max<Count>(2, k_min); k <= k_max; ++k) {
      CorollaryCell c;
      c.lambda_bar = lam;
      c.k = k;
      c.correction = prop2_correction(k, lam, 0.0, 1.0, 1.0);
      const double d = static_cast<double>(k) - lam - 1.0;
      if (d > 0) c.ok = c.correction > 0.0;
      else if (d < 0) c.ok = c.correction < 0.0;
      else c.ok = std::abs(c.correction) <= 1e-14;
      out.push_back(c);
    }
  }
  return out;
}

}  // namespace scanstat
