// Acceptance suite. Prints one line per criterion and exits nonzero when any
// criterion fails. Criterion numbers may be passed as arguments to run a subset.
//
// Criterion 7 needs the New Mexico files (nm.geo, nm.pop, nm.cas in the loader's
// format) in the directory named by SCANSTAT_NM_DIR; without it the criterion is
// reported as SKIPPED and criterion 8 stands in for it.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "scanstat/adjusted_scan.hpp"
#include "scanstat/fdr.hpp"
#include "scanstat/glmm.hpp"
#include "scanstat/harness.hpp"
#include "scanstat/rng.hpp"
#include "scanstat/scan.hpp"
#include "scanstat/theory.hpp"

using namespace scanstat;

namespace {

enum class Status { pass, fail, skipped };

struct Outcome {
  Status status = Status::fail;
  std::string detail;
};

Outcome verdict(bool ok, const std::ostringstream& os) { return {ok ? Status::pass : Status::fail, os.str()}; }

double proportion_at(const ProportionTable& t, double alpha) {
  for (const auto& r : t.rows)
    if (std::abs(r.alpha - alpha) < 1e-12) return r.proportion;
  throw std::runtime_error("alpha not tabulated");
}

// The figure-style setting shared by criteria 2 to 4.
ExperimentConfig field_setting(StudyMode mode) {
  ExperimentConfig c;
  c.sigma = {0.1};
  c.rho = {50.0};
  c.nu = {1.0};
  c.alphas = {0.05};
  c.replicates = 200;
  c.mc_size = 199;
  c.mode = mode;
  c.seed = 2024;
  return c;
}

// Computed once, shared by criteria 2 to 4.
struct FieldStudies {
  std::optional<double> classical, true_params, fitted;
  double run(StudyMode mode) {
    auto& slot = mode == StudyMode::classical ? classical : mode == StudyMode::adjusted_true_params ? true_params : fitted;
    if (!slot) slot = proportion_at(run_study(field_setting(mode)), 0.05);
    return *slot;
  }
} field;

Outcome null_calibration() {
  ExperimentConfig c;
  c.sigma = {0.0};
  c.alphas = {0.05};
  c.replicates = 500;
  c.mc_size = 199;
  c.mode = StudyMode::classical;
  c.seed = 11;
  const double rate = proportion_at(run_study(c), 0.05);
  std::ostringstream os;
  os << "type-I rate " << rate << " (band [0.032, 0.072])";
  return verdict(rate >= 0.032 && rate <= 0.072, os);
}

Outcome elevation() {
  const double p = field.run(StudyMode::classical);
  std::ostringstream os;
  os << "classical proportion " << p << " (need > 0.20)";
  return verdict(p > 0.20, os);
}

Outcome true_params_correction() {
  const double p = field.run(StudyMode::adjusted_true_params);
  std::ostringstream os;
  os << "adjusted proportion with true parameters " << p << " (band [0.02, 0.10])";
  return verdict(p >= 0.02 && p <= 0.10, os);
}

Outcome fitted_ordering() {
  const double lo = field.run(StudyMode::adjusted_true_params);
  const double hi = field.run(StudyMode::classical);
  const double p = field.run(StudyMode::adjusted_fitted);
  std::ostringstream os;
  os << "fitted " << p << " against true-parameter " << lo << " and classical " << hi;
  return verdict(p > lo && p < hi, os);
}

Outcome remainder_order() {
  const auto r = verify_prop2(Prop2Setup{}, Quadrature{96});
  const double ratio = r.abs_remainder.back() / std::abs(r.rows.back().correction);
  std::ostringstream os;
  os << "slope " << (r.slope ? *r.slope : NAN) << " (need <= -1.25), remainder/correction at n=1e4 " << ratio
     << " (need <= 0.01)";
  return verdict(r.slope && *r.slope <= -1.25 && ratio <= 0.01, os);
}

Outcome corollary_sign() {
  const std::vector<double> lambdas{1, 2, 5, 10, 20};
  const auto cells = check_corollary(lambdas, 2, 40);
  std::size_t bad = 0;
  for (const auto& c : cells) {
    const double d = static_cast<double>(c.k) - c.lambda_bar - 1;
    const bool sign_ok = d > 0 ? c.correction > 0 : d < 0 ? c.correction < 0 : std::abs(c.correction) <= 1e-14;
    bad += !(c.ok && sign_ok);
  }
  std::ostringstream os;
  os << cells.size() << " cells, " << bad << " with the wrong sign";
  return verdict(cells.size() == 5 * 39 && bad == 0, os);
}

std::string county_key(std::string s) {
  std::string k;
  for (char ch : s)
    if (std::isalpha(static_cast<unsigned char>(ch))) k += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  if (k == "bernallillo") k = "bernalillo";
  if (k == "santefe") k = "santafe";
  return k;
}

Outcome new_mexico() {
  const char* dir = std::getenv("SCANSTAT_NM_DIR");
  if (!dir || !*dir) return {Status::skipped, "SCANSTAT_NM_DIR not set; unexecuted, criterion 8 stands in"};
  const std::filesystem::path d(dir);
  const auto sr = load_study_region(d / "nm.geo", d / "nm.pop", d / "nm.cas");
  std::vector<std::size_t> train, test;
  for (std::size_t t = 0; t < sr.num_periods(); ++t) {
    const int year = std::stoi(sr.periods()[t]);
    if (year >= 1973 && year <= 1982) train.push_back(t);
    if (year >= 1983 && year <= 1991) test.push_back(t);
  }
  if (train.empty() || test.empty()) return {Status::fail, "expected yearly periods covering 1973-1991"};
  const auto tr = sr.aggregate(train, "1973-1982");
  const auto te = sr.aggregate(test, "1983-1991");
  const std::vector<Region> regions(sr.regions().begin(), sr.regions().end());
  const StudyRegion both(regions, {"1973-1982", "1983-1991"},
                         {std::vector<double>(tr.population(0).begin(), tr.population(0).end()),
                          std::vector<double>(te.population(0).begin(), te.population(0).end())},
                         {std::vector<Count>(tr.cases(0).begin(), tr.cases(0).end()),
                          std::vector<Count>(te.cases(0).begin(), te.cases(0).end())});
  const auto dm = distance_matrix(both);
  const auto ws = enumerate_windows(both, dm, 0.5, 1);
  const auto classical = classical_scan(both, ws, 1, 999, 7);

  const std::set<std::string> expected{"bernalillo", "sanmiguel", "sandoval", "santafe",
                                       "socorro",    "torrance",  "valencia"};
  std::set<std::string> found;
  if (classical.primary)
    for (auto i : classical.primary->window.members) found.insert(county_key(both.region(i).id));
  const double p_classical = classical.p_value.value_or(1.0);
  const bool cluster_ok = found == expected && p_classical <= 0.05;

  AdjustedConfig cfg;
  cfg.mc_size = 999;
  cfg.seed = 7;
  const std::vector<std::size_t> fit_on{0}, assess{1};
  const auto tt = train_test_adjusted_scan(both, dm, fit_on, assess, 0.5, cfg);
  const auto near = [](double v, double ref) { return std::abs(v - ref) <= 0.3 * std::abs(ref); };
  const bool fit_ok = near(tt.means.beta, -0.834) && near(tt.means.sigma, 0.176) && near(tt.means.rho, 20.94);
  const double p_adj = tt.periods.at(0).adjusted_p;

  std::ostringstream os;
  os << "primary has " << found.size() << " counties" << (found == expected ? " (the expected seven)" : "")
     << ", classical p " << p_classical << "; fit (" << tt.means.beta << ", " << tt.means.sigma << ", "
     << tt.means.rho << "); adjusted p " << p_adj << " (need > 0.10)";
  return verdict(cluster_ok && fit_ok && p_adj > 0.10, os);
}

Outcome glmm_calibration() {
  const ExperimentConfig geo;
  const auto g = study_geometry(geo);
  const auto dm = distance_matrix(g.regions);
  const double beta = -0.8, sigma = 0.15, rho = 50.0;
  const auto f = field_factor(dm, sigma, rho, 1.0);
  McmcConfig mcmc;
  mcmc.iterations = 22000;
  mcmc.burn_in = 2000;
  mcmc.thin = 10;
  int cover_beta = 0, cover_sigma = 0;
  double bias = 0;
  const int n = 50;
  for (int r = 0; r < n; ++r) {
    const auto y = simulate_model2_counts(g.population, beta, f, derive_seed(808, {static_cast<std::uint64_t>(r)}));
    const auto fit = fit_model2(g.population, y, dm, PriorSpec{}, 1.0, mcmc, derive_seed(909, {static_cast<std::uint64_t>(r)}));
    cover_beta += fit.beta.q05 <= beta && beta <= fit.beta.q95;
    cover_sigma += fit.sigma.q05 <= sigma && sigma <= fit.sigma.q95;
    bias += (fit.beta.mean - beta) / n;
  }
  std::ostringstream os;
  os << "90% intervals cover beta " << cover_beta << "/50, sigma " << cover_sigma << "/50 (need >= 40); beta bias "
     << bias << " (need |bias| < 0.1)";
  return verdict(cover_beta >= 40 && cover_sigma >= 40 && std::abs(bias) < 0.1, os);
}

Outcome fdr_round_trip() {
  std::vector<double> grid, dens;
  for (int i = -400; i <= 400; ++i) {
    grid.push_back(i * 0.01);
    dens.push_back(oracle::normal_pdf(grid.back(), -0.07, 0.55));
  }
  const auto exact = fit_empirical_null(grid, dens);
  const bool exact_ok = std::abs(exact.delta0 + 0.07) <= 1e-3 && std::abs(exact.sigma0 - 0.55) <= 1e-3;

  Rng rng = make_rng(99);
  std::normal_distribution<double> nd;
  std::vector<double> z(10000);
  for (auto& v : z) v = nd(rng);
  const auto m = fit_fdr(z);
  std::size_t small = 0;
  for (const auto& v : m.fdr()) small += v.fdr < 0.5;
  const double frac = static_cast<double>(small) / static_cast<double>(z.size());
  const auto& e = m.null();
  const bool sim_ok = std::abs(e.delta0) <= 0.1 && e.sigma0 >= 0.85 && e.sigma0 <= 1.15 && frac <= 0.05;

  std::ostringstream os;
  os << "exact input gives (" << exact.delta0 << ", " << exact.sigma0 << "); 1e4 N(0,1) gives (" << e.delta0 << ", "
     << e.sigma0 << ") with fdr<0.5 for " << frac;
  return verdict(exact_ok && sim_ok, os);
}

Outcome oracle_equivalence() {
  std::mt19937 g(4711);
  std::uniform_real_distribution<double> u(0, 20);
  std::uniform_int_distribution<int> pi(1, 1000), yi(0, 30);
  int mismatches = 0;
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t m = 1 + rep % 8;
    std::vector<Region> r;
    std::vector<double> x, y, pop;
    std::vector<long> cases;
    for (std::size_t i = 0; i < m; ++i) {
      x.push_back(std::round(u(g)));
      y.push_back(std::round(u(g)));
      pop.push_back(pi(g));
      cases.push_back(yi(g));
      r.push_back({"R" + std::to_string(i), x.back(), y.back()});
    }
    const auto ws = enumerate_windows(distance_matrix(r), pop, 0.5);
    const std::vector<Count> yc(cases.begin(), cases.end());
    const auto s = scan(ws, pop, yc);
    const auto best = oracle::brute_force_scan(x, y, pop, cases, 0.5, [](long c, double n, long C, double N) {
      return log_lr(c, n, C, N);
    });
    bool same = s.llr_star == best.llr;
    if (best.llr > 0) same = same && s.primary && s.primary->window.members == best.members;
    mismatches += !same;
  }

  double worst = 0;
  const std::vector<double> one{4.0}, three{3, 2, 4};
  for (double beta : {-1.0, 0.0, 0.7})
    for (Count k = 0; k <= 40; ++k) {
      worst = std::max(worst, std::abs(mixture_tail(k, beta, one, Eigen::MatrixXd::Zero(1, 1), Quadrature{96}).value -
                                       poisson_tail(k, std::exp(beta) * 4.0)));
      worst = std::max(worst, std::abs(mixture_tail(k, beta, three, Eigen::MatrixXd::Zero(3, 3), MonteCarlo{}).value -
                                       poisson_tail(k, std::exp(beta) * 9.0)));
    }
  std::ostringstream os;
  os << mismatches << "/50 scans differ from brute force; max |mixture - Poisson| at zero covariance " << worst;
  return verdict(mismatches == 0 && worst <= 1e-12, os);
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<int, std::function<Outcome()>>> criteria{
      {1, null_calibration}, {2, elevation},        {3, true_params_correction}, {4, fitted_ordering},
      {5, remainder_order},  {6, corollary_sign},   {7, new_mexico},             {8, glmm_calibration},
      {9, fdr_round_trip},   {10, oracle_equivalence}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const char* tag = o.status == Status::pass ? "PASS" : o.status == Status::fail ? "FAIL" : "SKIPPED";
    std::cout << "criterion " << id << ": " << tag << "  " << o.detail << "  [" << std::round(secs) << " s]"
              << std::endl;
    failed += o.status == Status::fail;
  }
  return failed == 0 ? 0 : 1;
}
