#include "scanstat/harness.hpp"

#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <numeric>
#include <tuple>

#include <boost/random/lognormal_distribution.hpp>
#include <boost/random/uniform_real_distribution.hpp>

#include "scanstat/errors.hpp"
#include "scanstat/kernels.hpp"
#include "scanstat/rng.hpp"
#include "scanstat/scan.hpp"

namespace scanstat {

Geometry synth_geometry(std::size_t m, const BoundingBox& box, std::uint64_t seed, double pop_meanlog,
                        double pop_sdlog) {
  if (m < 1) throw InputError("synthetic geometry needs at least one site");
  if (!(box.xmax > box.xmin) || !(box.ymax > box.ymin)) throw InputError("bounding box is empty");
  if (!(pop_sdlog >= 0.0)) throw InputError("population sdlog must be nonnegative");
  Rng rng = make_rng(seed);
  boost::random::uniform_real_distribution<double> ux(box.xmin, box.xmax), uy(box.ymin, box.ymax);
  Geometry g;
  for (std::size_t i = 0; i < m; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "S%03zu", i + 1);
    const double x = ux(rng);
    const double y = uy(rng);
    g.regions.push_back({id, x, y});
  }
  if (pop_sdlog > 0.0) {
    boost::random::lognormal_distribution<double> ln(pop_meanlog, pop_sdlog);
    for (std::size_t i = 0; i < m; ++i) g.population.push_back(ln(rng));
  } else {
    g.population.assign(m, std::exp(pop_meanlog));
  }
  return g;
}

StudyRegion make_study_region(const Geometry& g, std::vector<Count> cases, std::string label) {
  return StudyRegion(g.regions, {std::move(label)}, {g.population}, {std::move(cases)});
}

CovFactor field_factor(const DistanceMatrix& dm, double sigma, double rho, double nu, MaternForm form) {
  if (sigma == 0.0) {
    CovFactor f;
    const auto m = static_cast<Eigen::Index>(dm.size());
    f.lower = Eigen::MatrixXd::Zero(m, m);
    return f;
  }
  return cholesky(build_cov(dm, MaternParams{sigma, rho, nu}, form));
}

McmcConfig study_mcmc_defaults() {
  McmcConfig c;
  c.iterations = 6000;
  c.burn_in = 1000;
  c.thin = 5;
  return c;
}

std::string to_string(StudyMode m) {
  switch (m) {
    case StudyMode::classical: return "classical";
    case StudyMode::adjusted_fitted: return "adjusted_fitted";
    case StudyMode::adjusted_true_params: return "adjusted_true_params";
  }
  return "classical";
}

StudyMode study_mode_from_string(const std::string& s) {
  if (s == "classical") return StudyMode::classical;
  if (s == "adjusted_fitted") return StudyMode::adjusted_fitted;
  if (s == "adjusted_true_params") return StudyMode::adjusted_true_params;
  throw InputError("unknown study mode '" + s + "' (classical, adjusted_fitted, adjusted_true_params)");
}

void ExperimentConfig::validate() const {
  if (replicates < 1) throw InputError("replicates must be at least 1");
  if (mc_size < 19) throw InputError("mc_size must be at least 19");
  if (sigma.empty() || rho.empty() || nu.empty() || alphas.empty()) throw InputError("parameter grids must be nonempty");
  for (double s : sigma)
    if (!(s >= 0.0) || !std::isfinite(s)) throw InputError("sigma values must be finite and >= 0");
  for (double r : rho)
    if (!(r > 0.0)) throw InputError("rho values must be positive");
  for (double n : nu)
    if (!(n > 0.0)) throw InputError("nu values must be positive");
  for (double a : alphas)
    if (!(a > 0.0 && a < 1.0)) throw InputError("alpha values must lie in (0, 1)");
  if (!(max_fraction > 0.0 && max_fraction <= 1.0)) throw InputError("max_fraction must lie in (0, 1]");
  if (!beta && !(expected_total > 0.0)) throw InputError("expected_total must be positive");
  prior.validate();
  mcmc.validate();
}

Geometry study_geometry(const ExperimentConfig& cfg) {
  if (cfg.geometry) return *cfg.geometry;
  return synth_geometry(cfg.sites, cfg.box, cfg.geometry_seed, cfg.pop_meanlog, cfg.pop_sdlog);
}

double study_beta(const ExperimentConfig& cfg, const Geometry& g) {
  if (cfg.beta) return *cfg.beta;
  const double total = std::accumulate(g.population.begin(), g.population.end(), 0.0);
  return std::log(cfg.expected_total / total);
}

ProportionTable tabulate(std::vector<ReplicateRecord> archive, const std::vector<double>& alphas, double beta) {
  ProportionTable t;
  t.beta = beta;
  // Cells in first-appearance order.
  std::map<std::tuple<double, double, double, int>, std::size_t> index;
  std::vector<std::vector<const ReplicateRecord*>> groups;
  for (const auto& r : archive) {
    const auto key = std::make_tuple(r.sigma, r.rho, r.nu, static_cast<int>(r.mode));
    auto [it, inserted] = index.emplace(key, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(&r);
  }
  for (const auto& g : groups) {
    for (double a : alphas) {
      ProportionRow row;
      row.sigma = g.front()->sigma;
      row.rho = g.front()->rho;
      row.nu = g.front()->nu;
      row.mode = g.front()->mode;
      row.alpha = a;
      for (const auto* r : g) {
        if (!r->ok) {
          ++row.dropped;
          continue;
        }
        ++row.n;
        if (r->p_value <= a + 1e-12) ++row.count;
      }
      if (row.n > 0) {
        row.proportion = static_cast<double>(row.count) / row.n;
        row.se = std::sqrt(row.proportion * (1.0 - row.proportion) / row.n);
      }
      t.rows.push_back(row);
    }
  }
  t.archive = std::move(archive);
  return t;
}

namespace {

struct Cell {
  double sigma, rho, nu;
  CovFactor factor;
};

ReplicateRecord run_replicate(const ExperimentConfig& cfg, StudyMode mode, const Geometry& g, const DistanceMatrix& dm,
                              const WindowSet& ws, double beta, const Cell& cell, std::uint64_t c, int r) {
  ReplicateRecord rec;
  rec.sigma = cell.sigma;
  rec.rho = cell.rho;
  rec.nu = cell.nu;
  rec.replicate = r;
  rec.mode = mode;
  const auto ru = static_cast<std::uint64_t>(r);
  try {
    const std::vector<Count> y = simulate_model2_counts(g.population, beta, cell.factor, derive_seed(cfg.seed, {c, ru, 0}));
    rec.total_cases = std::accumulate(y.begin(), y.end(), Count{0});
    const ScanResult obs = scan(ws, g.population, y);
    rec.llr_star = obs.llr_star;
    if (rec.total_cases == 0) return rec;  // nothing to detect, p = 1

    std::vector<double> reference;
    switch (mode) {
      case StudyMode::classical:
        reference = reference_distribution(ws, g.population, model1_simulator(g.population, rec.total_cases),
                                           cfg.mc_size, derive_seed(cfg.seed, {c, ru, 1}), 1);
        break;
      case StudyMode::adjusted_true_params:
        rec.beta_sim = beta;
        reference = reference_distribution(ws, g.population, model2_simulator(g.population, beta, cell.factor),
                                           cfg.mc_size, derive_seed(cfg.seed, {c, ru, 2}), 1);
        break;
      case StudyMode::adjusted_fitted: {
        const ModelIIFit fit =
            fit_model2(g.population, y, dm, cfg.prior, cell.nu, cfg.mcmc, derive_seed(cfg.seed, {c, ru, 3}), cfg.form);
        const PosteriorMeans pm = posterior_means(fit);
        rec.fit = pm;
        const CovFactor hat = field_factor(dm, pm.sigma, pm.rho, cell.nu, cfg.form);
        rec.beta_sim = recentered_beta(rec.total_cases, g.population, hat);
        reference = reference_distribution(ws, g.population, model2_simulator(g.population, rec.beta_sim, hat),
                                           cfg.mc_size, derive_seed(cfg.seed, {c, ru, 2}), 1);
        break;
      }
    }
    rec.p_value = mc_pvalue(obs.llr_star, reference).value();
  } catch (const NumericalError& e) {
    rec.ok = false;
    rec.error = e.what();
  } catch (const InputError& e) {
    rec.ok = false;
    rec.error = e.what();
  }
  return rec;
}

ProportionTable study(const ExperimentConfig& cfg, StudyMode mode) {
  cfg.validate();
  const Geometry g = study_geometry(cfg);
  const DistanceMatrix dm = distance_matrix(g.regions);
  const WindowSet ws = enumerate_windows(dm, g.population, cfg.max_fraction);
  const double beta = study_beta(cfg, g);

  std::vector<Cell> cells;
  for (double s : cfg.sigma)
    for (double r : cfg.rho)
      for (double n : cfg.nu) cells.push_back({s, r, n, field_factor(dm, s, r, n, cfg.form)});

  const long total = static_cast<long>(cells.size()) * cfg.replicates;
  std::vector<ReplicateRecord> archive(static_cast<std::size_t>(total));
  std::exception_ptr failure;
  const int threads = kernels::resolve_threads(cfg.threads);
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (long t = 0; t < total; ++t) {
    const auto c = static_cast<std::size_t>(t / cfg.replicates);
    const int r = static_cast<int>(t % cfg.replicates);
    try {
      archive[static_cast<std::size_t>(t)] = run_replicate(cfg, mode, g, dm, ws, beta, cells[c], c, r);
    } catch (...) {
#pragma omp critical(scanstat_study_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return tabulate(std::move(archive), cfg.alphas, beta);
}

}  // namespace

ProportionTable type1_study(const ExperimentConfig& cfg) {
  if (cfg.mode != StudyMode::classical) throw InputError("type1_study runs the classical mode only");
  return study(cfg, StudyMode::classical);
}

ProportionTable adjusted_study(const ExperimentConfig& cfg) {
  if (cfg.mode == StudyMode::classical) throw InputError("adjusted_study needs mode adjusted_fitted or adjusted_true_params");
  return study(cfg, cfg.mode);
}

ProportionTable run_study(const ExperimentConfig& cfg) { return study(cfg, cfg.mode); }

SurveillanceReport surveillance_run(const StudyRegion& sr, const DistanceMatrix& dm,
                                    const std::vector<std::size_t>& train_periods,
                                    const std::vector<std::size_t>& test_periods, double max_fraction,
                                    const AdjustedConfig& cfg, const FdrConfig& fdr_cfg) {
  if (sr.num_periods() < 2) throw InputError("surveillance needs at least two periods");
  SurveillanceReport rep;
  rep.train_test = train_test_adjusted_scan(sr, dm, train_periods, test_periods, max_fraction, cfg);
  std::vector<double> z;
  for (const auto& pa : rep.train_test.periods) {
    SurveillancePeriod sp;
    sp.assessment = pa;
    sp.z = p_to_z(pa.adjusted_p, cfg.mc_size);
    z.push_back(sp.z);
    rep.periods.push_back(std::move(sp));
  }
  if (z.size() < 30) {
    rep.fdr_note = "only " + std::to_string(z.size()) + " test periods; the empirical null needs at least 30, fdr set to 1";
    return rep;
  }
  try {
    FdrModel model = fit_fdr(z, fdr_cfg);
    for (std::size_t i = 0; i < rep.periods.size(); ++i) {
      rep.periods[i].fdr = model.fdr()[i].fdr;
      rep.periods[i].fdr_clamped = model.fdr()[i].clamped;
    }
    rep.fdr_fitted = true;
    rep.fdr_model = std::move(model);
  } catch (const NumericalError& e) {
    rep.fdr_note = std::string("empirical null fit failed: ") + e.what() + "; fdr set to 1";
  }
  return rep;
}

}  // namespace scanstat
