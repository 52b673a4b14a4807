#include "scanstat/glmm.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <numeric>
#include <queue>
#include <string>

#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>

#include "scanstat/errors.hpp"
#include "scanstat/kernels.hpp"

namespace scanstat {

std::vector<double> PriorSpec::rho_grid() const {
  validate();
  std::vector<double> g(static_cast<std::size_t>(rho_max));
  std::iota(g.begin(), g.end(), 1.0);
  return g;
}

void PriorSpec::validate() const {
  if (rho_max < 2) throw InputError("rho prior upper bound U must be at least 2");
}

void McmcConfig::validate() const {
  if (iterations <= 0 || burn_in < 0 || thin <= 0) throw InputError("MCMC: iterations/thin must be positive");
  if (burn_in >= iterations) throw InputError("MCMC: burn-in must be shorter than the chain");
  if (rho_every <= 0 || adapt_batch <= 0) throw InputError("MCMC: rho_every and adapt_batch must be positive");
  if (!(sigma_init > 0.0)) throw InputError("MCMC: sigma_init must be positive");
}

CorrelationGrid::CorrelationGrid(const DistanceMatrix& dm, std::vector<double> rho, double nu, MaternForm form)
    : rho_(std::move(rho)) {
  const auto m = static_cast<Eigen::Index>(dm.size());
  const Eigen::VectorXd ones = Eigen::VectorXd::Ones(m);
  for (double r : rho_) {
    const Eigen::MatrixXd corr = build_cov(dm, MaternParams{1.0, r, nu}, form);
    const CovFactor f = cholesky(corr, 1.0);
    max_jitter_ = std::max(max_jitter_, f.jitter);
    const Eigen::MatrixXd linv =
        f.lower.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(m, m));
    Eigen::MatrixXd inv = linv.transpose() * linv;
    inv = 0.5 * (inv + inv.transpose()).eval();
    inverse_ones_.push_back(inv * ones);
    ones_quad_.push_back(inverse_ones_.back().sum());
    inverse_.push_back(std::move(inv));
    log_det_.push_back(f.log_det());
  }
}

double log_posterior(double beta, double sigma, double rho, std::span<const double> z,
                     std::span<const double> population, std::span<const Count> cases, const DistanceMatrix& dm,
                     double nu, const PriorSpec& prior, MaternForm form) {
  constexpr double kReject = -std::numeric_limits<double>::infinity();
  const std::size_t m = z.size();
  if (population.size() != m || cases.size() != m || dm.size() != m)
    throw std::invalid_argument("log_posterior: inconsistent dimensions");
  if (!(sigma > 0.0)) return kReject;
  if (rho != std::round(rho) || rho < 1.0 || rho > prior.rho_max) return kReject;

  double loglik = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double eta = beta + z[i];
    loglik += static_cast<double>(cases[i]) * (eta + std::log(population[i])) - population[i] * std::exp(eta);
  }
  const CovFactor f = cholesky(build_cov(dm, MaternParams{1.0, rho, nu}, form), 1.0);
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), static_cast<Eigen::Index>(m));
  const Eigen::VectorXd w = f.lower.triangularView<Eigen::Lower>().solve(zv);
  const double var = sigma * sigma;
  const double gauss = -0.5 * w.squaredNorm() / var - 0.5 * (static_cast<double>(m) * std::log(var) + f.log_det());
  const double value = loglik + gauss - std::log(static_cast<double>(prior.rho_max));
  return std::isfinite(value) ? value : kReject;
}

// ---------------------------------------------------------------------------
// Summaries

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 4) return static_cast<double>(n);
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double c0 = 0.0;
  for (double v : x) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);
  auto acov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) s += (x[i] - mean) * (x[i + lag] - mean);
    return s / static_cast<double>(n);
  };
  // Geyer's initial monotone sequence estimator.
  double sum = 0.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = (k == 0 ? c0 : acov(2 * k)) + acov(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    prev_pair = pair;
    sum += pair;
  }
  const double tau = (2.0 * sum - c0) / c0;
  return std::min(static_cast<double>(n), static_cast<double>(n) / std::max(tau, 1e-12));
}

namespace {

double quantile_sorted(const std::vector<double>& s, double q) {
  const double pos = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (pos - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace

ParameterSummary summarize(std::span<const double> x) {
  ParameterSummary out;
  if (x.empty()) return out;
  const double n = static_cast<double>(x.size());
  out.mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : x) ss += (v - out.mean) * (v - out.mean);
  out.sd = x.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> s(x.begin(), x.end());
  std::sort(s.begin(), s.end());
  out.q05 = quantile_sorted(s, 0.05);
  out.q25 = quantile_sorted(s, 0.25);
  out.q50 = quantile_sorted(s, 0.50);
  out.q75 = quantile_sorted(s, 0.75);
  out.q95 = quantile_sorted(s, 0.95);
  out.ess = effective_sample_size(x);
  return out;
}

// ---------------------------------------------------------------------------
// Sampler

namespace {

class RunningMedian {
 public:
  void push(double v) {
    if (low_.empty() || v <= low_.top()) low_.push(v);
    else high_.push(v);
    if (low_.size() > high_.size() + 1) {
      high_.push(low_.top());
      low_.pop();
    } else if (high_.size() > low_.size()) {
      low_.push(high_.top());
      high_.pop();
    }
  }
  double median() const {
    if (low_.size() == high_.size()) return 0.5 * (low_.top() + high_.top());
    return low_.top();
  }

 private:
  std::priority_queue<double> low_;
  std::priority_queue<double, std::vector<double>, std::greater<>> high_;
};

// Robbins-Monro style scale adaptation, applied per batch during burn-in.
struct AdaptiveScale {
  double log_scale = 0.0;
  long accepted = 0;
  long proposed = 0;
  long total_accepted = 0;
  long total_proposed = 0;

  double scale() const { return std::exp(log_scale); }
  void record(bool ok, bool counting) {
    accepted += ok;
    ++proposed;
    if (counting) {
      total_accepted += ok;
      ++total_proposed;
    }
  }
  void adapt(long batch_index, double target) {
    if (proposed == 0) return;
    const double rate = static_cast<double>(accepted) / static_cast<double>(proposed);
    const double step = std::min(0.5, 1.0 / std::sqrt(static_cast<double>(batch_index)));
    log_scale += rate > target ? step : -step;
    accepted = proposed = 0;
  }
  void reset_batch() { accepted = proposed = 0; }
  double rate() const {
    return total_proposed ? static_cast<double>(total_accepted) / static_cast<double>(total_proposed) : 0.0;
  }
};

class Sampler {
 public:
  Sampler(std::span<const double> population, std::span<const Count> cases, const CorrelationGrid& grid,
          const McmcConfig& cfg, std::uint64_t seed)
      : pop_(population), cases_(cases), grid_(grid), cfg_(cfg), rng_(make_rng(seed)), m_(population.size()) {
    double yg = 0.0, ng = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      yg += static_cast<double>(cases_[i]);
      ng += pop_[i];
    }
    total_cases_ = yg;
    beta_ = std::log(yg / ng);
    sigma_ = cfg.sigma_init;
    g_ = grid_.size() / 2;
    if (grid_.size() % 2 == 0 && g_ > 0) --g_;  // lower median
    z_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(m_));
    refresh_quadratic();

    z_scale_.resize(m_);
    const auto& rinv = grid_.inverse(g_);
    for (std::size_t i = 0; i < m_; ++i) {
      const double info = pop_[i] * std::exp(beta_) + rinv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) /
                                                          (sigma_ * sigma_);
      z_scale_[i].log_scale = std::log(2.4 / std::sqrt(info));
    }
    beta_scale_.log_scale = std::log(1.0 / std::sqrt(total_cases_));
    sigma_scale_.log_scale = std::log(0.3);
    scale_move_.log_scale = std::log(0.05);
  }

  ModelIIFit run() {
    ModelIIFit fit;
    RunningMedian median;
    long above = 0;
    long batch = 0;
    for (long it = 0; it < cfg_.iterations; ++it) {
      const bool counting = it >= cfg_.burn_in;
      update_z(counting);
      update_beta(counting);
      update_shift();
      update_sigma(counting);
      update_scale(counting);
      if (it % cfg_.rho_every == 0) update_rho();

      if (!counting && (it + 1) % cfg_.adapt_batch == 0) {
        ++batch;
        for (auto& s : z_scale_) s.adapt(batch, cfg_.target_accept);
        beta_scale_.adapt(batch, cfg_.target_accept);
        sigma_scale_.adapt(batch, cfg_.target_accept);
        scale_move_.adapt(batch, cfg_.target_accept);
      }
      if (it + 1 == cfg_.burn_in) {
        for (auto& s : z_scale_) s.reset_batch();
        beta_scale_.reset_batch();
        sigma_scale_.reset_batch();
        scale_move_.reset_batch();
      }

      median.push(sigma_);
      above = sigma_ > cfg_.divergence_factor * median.median() ? above + 1 : 0;
      if (above >= cfg_.divergence_window)
        throw NumericalError("MCMC diverging: sigma stayed above " + std::to_string(cfg_.divergence_factor) +
                             "x its running median for " + std::to_string(cfg_.divergence_window) +
                             " iterations (posterior may be improper for these data)");

      if (counting && (it - cfg_.burn_in) % cfg_.thin == 0) {
        ModelIIDraw d;
        d.beta = beta_;
        d.sigma = sigma_;
        d.rho = grid_.rho(g_);
        d.z.assign(z_.data(), z_.data() + z_.size());
        fit.draws.push_back(std::move(d));
      }
    }

    double z_rate = 0.0;
    for (const auto& s : z_scale_) z_rate += s.rate();
    fit.acceptance.z = m_ ? z_rate / static_cast<double>(m_) : 0.0;
    fit.acceptance.beta = beta_scale_.rate();
    fit.acceptance.sigma = sigma_scale_.rate();
    fit.acceptance.scale = scale_move_.rate();
    return fit;
  }

 private:
  double uniform() { return boost::random::uniform_01<double>()(rng_); }
  double normal() { return boost::random::normal_distribution<double>()(rng_); }
  bool accept(double log_ratio) { return std::isfinite(log_ratio) && std::log(uniform()) < log_ratio; }

  void refresh_quadratic() {
    v_ = grid_.inverse(g_) * z_;
    q_ = z_.dot(v_);
  }

  // Componentwise random-walk on Z. Keeps v = R^-1 z and q = z' R^-1 z current.
  void update_z(bool counting) {
    const auto& rinv = grid_.inverse(g_);
    const double prec = 1.0 / (sigma_ * sigma_);
    const double eb = std::exp(beta_);
    for (std::size_t i = 0; i < m_; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double d = z_scale_[i].scale() * normal();
      const double zi = z_(ii);
      const double dlik = static_cast<double>(cases_[i]) * d - pop_[i] * eb * (std::exp(zi + d) - std::exp(zi));
      const double dprior = -prec * (d * v_(ii) + 0.5 * d * d * rinv(ii, ii));
      const bool ok = accept(dlik + dprior);
      z_scale_[i].record(ok, counting);
      if (ok) {
        q_ += 2.0 * d * v_(ii) + d * d * rinv(ii, ii);
        z_(ii) = zi + d;
        v_ += d * rinv.col(ii);
      }
    }
  }

  double weighted_exp_sum() const {
    double s = 0.0;
    for (std::size_t i = 0; i < m_; ++i) s += pop_[i] * std::exp(z_(static_cast<Eigen::Index>(i)));
    return s;
  }

  void update_beta(bool counting) {
    const double prop = beta_ + beta_scale_.scale() * normal();
    const double s = weighted_exp_sum();
    const double dlik = total_cases_ * (prop - beta_) - s * (std::exp(prop) - std::exp(beta_));
    const bool ok = accept(dlik);
    beta_scale_.record(ok, counting);
    if (ok) beta_ = prop;
  }

  // Exact Gibbs draw along (beta + c, z - c 1): the likelihood is constant on
  // this line, so c only sees the Gaussian prior of z.
  void update_shift() {
    const double a = grid_.ones_quadratic(g_);
    const double b = v_.sum();
    const double c = b / a + sigma_ / std::sqrt(a) * normal();
    beta_ += c;
    z_.array() -= c;
    q_ += -2.0 * c * b + c * c * a;
    v_ -= c * grid_.inverse_ones(g_);
  }

  // Random walk on log sigma; the flat prior on sigma contributes the Jacobian.
  void update_sigma(bool counting) {
    const double step = sigma_scale_.scale() * normal();
    const double prop = sigma_ * std::exp(step);
    const double md = static_cast<double>(m_);
    const double lr = (1.0 - md) * step - 0.5 * q_ * (1.0 / (prop * prop) - 1.0 / (sigma_ * sigma_));
    const bool ok = accept(lr);
    sigma_scale_.record(ok, counting);
    if (ok) sigma_ = prop;
  }

  // Joint move (sigma, z) -> (t sigma, t z). The Gaussian exponent is invariant;
  // what remains is the likelihood ratio and a factor t.
  void update_scale(bool counting) {
    const double log_t = scale_move_.scale() * normal();
    const double t = std::exp(log_t);
    const double eb = std::exp(beta_);
    double dlik = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const double zi = z_(static_cast<Eigen::Index>(i));
      dlik += static_cast<double>(cases_[i]) * (t - 1.0) * zi - pop_[i] * eb * (std::exp(t * zi) - std::exp(zi));
    }
    const bool ok = accept(dlik + log_t);
    scale_move_.record(ok, counting);
    if (ok) {
      sigma_ *= t;
      z_ *= t;
      v_ *= t;
      q_ *= t * t;
    }
  }

  // Exact Gibbs over the discrete rho grid.
  void update_rho() {
    const std::size_t n = grid_.size();
    lp_.resize(n);
    const double var = sigma_ * sigma_;
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < n; ++g) {
      const double quad = z_.dot(grid_.inverse(g).selfadjointView<Eigen::Lower>() * z_);
      lp_[g] = -0.5 * quad / var - 0.5 * grid_.log_det(g);
      best = std::max(best, lp_[g]);
    }
    double total = 0.0;
    for (auto& v : lp_) {
      v = std::exp(v - best);
      total += v;
    }
    double u = uniform() * total;
    std::size_t pick = n - 1;
    for (std::size_t g = 0; g < n; ++g) {
      u -= lp_[g];
      if (u <= 0.0) {
        pick = g;
        break;
      }
    }
    g_ = pick;
    refresh_quadratic();
  }

  std::span<const double> pop_;
  std::span<const Count> cases_;
  const CorrelationGrid& grid_;
  const McmcConfig& cfg_;
  Rng rng_;
  std::size_t m_;
  double total_cases_ = 0.0;

  double beta_ = 0.0;
  double sigma_ = 0.1;
  std::size_t g_ = 0;
  Eigen::VectorXd z_;
  Eigen::VectorXd v_;
  double q_ = 0.0;
  std::vector<double> lp_;

  std::vector<AdaptiveScale> z_scale_;
  AdaptiveScale beta_scale_, sigma_scale_, scale_move_;
};

}  // namespace

ModelIIFit fit_model2(std::span<const double> population, std::span<const Count> cases, const DistanceMatrix& dm,
                      const PriorSpec& prior, double nu, const McmcConfig& config, std::uint64_t seed,
                      MaternForm form) {
  prior.validate();
  config.validate();
  const std::size_t m = population.size();
  if (cases.size() != m || dm.size() != m) throw InputError("fit_model2: inconsistent dimensions");
  if (m < 5) throw InputError("Model II fit needs at least 5 regions (got " + std::to_string(m) + ")");
  const Count total = std::accumulate(cases.begin(), cases.end(), Count{0});
  if (total <= 0) throw InputError("Model II fit needs at least one case: the intercept is not identifiable");
  if (!(nu > 0.0)) throw InputError("nu must be positive");

  const CorrelationGrid grid(dm, prior.rho_grid(), nu, form);
  Sampler sampler(population, cases, grid, config, seed);
  ModelIIFit fit = sampler.run();
  fit.config = config;
  fit.prior = prior;
  fit.nu = nu;
  fit.form = form;
  fit.seed = seed;
  fit.max_jitter = grid.max_jitter();

  std::vector<double> b, s, r;
  for (const auto& d : fit.draws) {
    b.push_back(d.beta);
    s.push_back(d.sigma);
    r.push_back(d.rho);
  }
  fit.beta = summarize(b);
  fit.sigma = summarize(s);
  fit.rho = summarize(r);
  fit.low_ess = fit.beta.ess < 100.0;
  const double top = 0.95 * static_cast<double>(prior.rho_max);
  fit.rho_boundary_fraction =
      r.empty() ? 0.0
                : static_cast<double>(std::count_if(r.begin(), r.end(), [&](double v) { return v > top; })) /
                      static_cast<double>(r.size());
  return fit;
}

ModelIIFit fit_model2(const StudyRegion& sr, std::size_t period, const DistanceMatrix& dm, const PriorSpec& prior,
                      double nu, const McmcConfig& config, std::uint64_t seed, std::span<const std::size_t> regions,
                      MaternForm form) {
  if (regions.empty()) return fit_model2(sr.population(period), sr.cases(period), dm, prior, nu, config, seed, form);
  const StudyRegion sub = sr.subset(regions);
  return fit_model2(sub.population(period), sub.cases(period), dm.subset(regions), prior, nu, config, seed, form);
}

std::vector<ModelIIFit> fit_model2_chains(std::span<const double> population, std::span<const Count> cases,
                                          const DistanceMatrix& dm, const PriorSpec& prior, double nu,
                                          const McmcConfig& config, std::uint64_t seed, int chains, int threads,
                                          MaternForm form) {
  if (chains < 1) throw InputError("need at least one chain");
  std::vector<ModelIIFit> out(static_cast<std::size_t>(chains));
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) num_threads(kernels::resolve_threads(threads))
  for (int c = 0; c < chains; ++c) {
    try {
      out[static_cast<std::size_t>(c)] = fit_model2(population, cases, dm, prior, nu, config,
                                                    derive_seed(seed, {static_cast<std::uint64_t>(c)}), form);
    } catch (...) {
#pragma omp critical(scanstat_chain_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double gelman_rubin(std::span<const ModelIIFit> chains, Parameter which) {
  if (chains.size() < 2) return 1.0;
  std::size_t n = chains.front().draws.size();
  for (const auto& c : chains) n = std::min(n, c.draws.size());
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  auto value = [&](const ModelIIDraw& d) {
    switch (which) {
      case Parameter::beta: return d.beta;
      case Parameter::sigma: return d.sigma;
      case Parameter::rho: return d.rho;
    }
    return 0.0;
  };
  const double k = static_cast<double>(chains.size());
  const double nn = static_cast<double>(n);
  std::vector<double> means;
  double within = 0.0;
  for (const auto& c : chains) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += value(c.draws[i]);
    mean /= nn;
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (value(c.draws[i]) - mean) * (value(c.draws[i]) - mean);
    within += ss / (nn - 1.0);
    means.push_back(mean);
  }
  within /= k;
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / k;
  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= nn / (k - 1.0);
  if (!(within > 0.0)) return 1.0;
  const double var_plus = (nn - 1.0) / nn * within + between / nn;
  return std::sqrt(var_plus / within);
}

PosteriorMeans posterior_means(const ModelIIFit& fit) {
  if (fit.draws.empty()) throw InputError("posterior_means: fit has no retained draws");
  PosteriorMeans pm;
  for (const auto& d : fit.draws) {
    pm.beta += d.beta;
    pm.sigma += d.sigma;
    pm.rho += d.rho;
  }
  const double n = static_cast<double>(fit.draws.size());
  pm.beta /= n;
  pm.sigma /= n;
  pm.rho /= n;
  pm.rho_grid = std::clamp(std::round(pm.rho), 1.0, static_cast<double>(std::max(fit.prior.rho_max, 1)));
  return pm;
}

}  // namespace scanstat
