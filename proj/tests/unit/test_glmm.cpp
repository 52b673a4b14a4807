#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "scanstat/adjusted_scan.hpp"
#include "scanstat/errors.hpp"
#include "scanstat/glmm.hpp"
#include "scanstat/harness.hpp"

using namespace scanstat;

namespace {

McmcConfig short_chain() {
  McmcConfig c;
  c.iterations = 6000;
  c.burn_in = 1000;
  c.thin = 5;
  return c;
}

}  // namespace

TEST_CASE("log posterior, one region, no cases") {
  const std::vector<Region> r{{"A", 0, 0}};
  const auto dm = distance_matrix(r);
  const std::vector<double> pop{40}, z{0.0};
  const std::vector<Count> y{0};
  PriorSpec prior;
  prior.rho_max = 10;
  const double beta = -1.3, sigma = 0.5;
  const double hand = -40 * std::exp(beta) - std::log(sigma * sigma) / 2 - std::log(10.0);
  CHECK(log_posterior(beta, sigma, 3, z, pop, y, dm, 1.0, prior) == doctest::Approx(hand).epsilon(1e-13));
}

TEST_CASE("log posterior against the naive oracle") {
  std::mt19937 g(5);
  std::uniform_real_distribution<double> u(0, 30), zz(-0.5, 0.5);
  std::uniform_int_distribution<int> yi(0, 12);
  PriorSpec prior;
  prior.rho_max = 20;
  for (int rep = 0; rep < 10; ++rep) {
    const std::size_t m = 3 + rep;
    std::vector<Region> r;
    std::vector<double> pop, z;
    std::vector<Count> y;
    std::vector<long> yl;
    for (std::size_t i = 0; i < m; ++i) {
      r.push_back({"R" + std::to_string(i), u(g), u(g)});
      pop.push_back(5 + u(g));
      z.push_back(zz(g));
      y.push_back(yi(g));
      yl.push_back(y.back());
    }
    const auto dm = distance_matrix(r);
    const double beta = -1.0 + 0.1 * rep, sigma = 0.3 + 0.05 * rep, rho = 1 + rep % 5;
    const Eigen::MatrixXd corr = build_cov(dm, {1.0, rho, 1.0});
    const double ours = log_posterior(beta, sigma, rho, z, pop, y, dm, 1.0, prior);
    const double ref = oracle::log_posterior(beta, sigma, corr, z, pop, yl, prior.rho_max);
    CHECK(std::abs(ours - ref) <= 1e-10 * std::max(1.0, std::abs(ref)));
  }
}

TEST_CASE("shifting beta against Z only moves the Gaussian term") {
  const std::vector<Region> r{{"A", 0, 0}, {"B", 4, 1}, {"C", 2, 6}, {"D", 9, 3}};
  const auto dm = distance_matrix(r);
  const std::vector<double> pop{10, 20, 15, 30}, z{0.1, -0.2, 0.05, 0.3};
  const std::vector<Count> y{2, 5, 1, 9};
  PriorSpec prior;
  prior.rho_max = 10;
  const double beta = -1.2, sigma = 0.4, rho = 4, c = 0.37;
  std::vector<double> zc(z);
  for (double& v : zc) v -= c;
  const double a = log_posterior(beta, sigma, rho, z, pop, y, dm, 1.0, prior);
  const double b = log_posterior(beta + c, sigma, rho, zc, pop, y, dm, 1.0, prior);
  const Eigen::MatrixXd inv = (sigma * sigma * build_cov(dm, {1.0, rho, 1.0})).inverse();
  const Eigen::Map<const Eigen::VectorXd> zv(z.data(), 4), zcv(zc.data(), 4);
  const double expected = 0.5 * (zv.dot(inv * zv) - zcv.dot(inv * zcv));
  CHECK(b - a == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("log posterior edge cases") {
  const std::vector<Region> r{{"A", 0, 0}, {"B", 4, 1}};
  const auto dm = distance_matrix(r);
  const std::vector<double> pop{10, 20};
  const std::vector<Count> y{1, 2};
  PriorSpec prior;
  prior.rho_max = 5;
  const std::vector<double> z{0.2, -0.1}, zbig{800, 0};
  CHECK(log_posterior(0, 1, 2.5, z, pop, y, dm, 1, prior) == -std::numeric_limits<double>::infinity());
  CHECK(log_posterior(0, 1, 2, zbig, pop, y, dm, 1, prior) == -std::numeric_limits<double>::infinity());
  // The Gaussian penalty grows as Z is pushed away from zero.
  const std::vector<double> z2{0.4, -0.2}, z3{0.8, -0.4};
  const std::vector<Count> y0{0, 0};
  const double a = log_posterior(-5, 0.3, 2, z2, pop, y0, dm, 1, prior);
  const double b = log_posterior(-5, 0.3, 2, z3, pop, y0, dm, 1, prior);
  CHECK(b < a);
}

TEST_CASE("posterior means") {
  ModelIIFit f;
  f.draws.push_back({0.5, 1.0, 3.0, {}});
  auto m = posterior_means(f);
  CHECK(m.beta == 0.5);
  CHECK(m.sigma == 1.0);
  CHECK(m.rho == 3.0);
  f.draws.push_back({0.5, 2.0, 4.0, {}});
  m = posterior_means(f);
  CHECK(m.sigma == 1.5);
  CHECK(m.rho == 3.5);
  CHECK((m.rho_grid == 3.0 || m.rho_grid == 4.0));
}

TEST_CASE("summaries") {
  std::vector<double> x(1000);
  for (int i = 0; i < 1000; ++i) x[i] = i;
  const auto s = summarize(x);
  CHECK(s.mean == doctest::Approx(499.5));
  CHECK(s.q50 == doctest::Approx(499.5).epsilon(1e-3));
  std::mt19937 g(1);
  std::normal_distribution<double> n;
  std::vector<double> iid(4000);
  for (double& v : iid) v = n(g);
  CHECK(effective_sample_size(iid) > 2500);
  std::vector<double> ar(4000);
  ar[0] = 0;
  for (int i = 1; i < 4000; ++i) ar[i] = 0.95 * ar[i - 1] + n(g);
  CHECK(effective_sample_size(ar) < 400);
}

TEST_CASE("fit validation errors") {
  const auto g = synth_geometry(6, {}, 1, 3, 0.5);
  const auto dm = distance_matrix(g.regions);
  const std::vector<Count> zeros(6, 0);
  CHECK_THROWS_AS(fit_model2(g.population, zeros, dm, {}, 1.0, short_chain(), 1), InputError);
  const auto g4 = synth_geometry(4, {}, 1, 3, 0.5);
  const std::vector<Count> some(4, 3);
  CHECK_THROWS_AS(fit_model2(g4.population, some, distance_matrix(g4.regions), {}, 1.0, short_chain(), 1), InputError);
  PriorSpec bad;
  bad.rho_max = 1;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

TEST_CASE("fit on Model I data") {
  const auto g = synth_geometry(32, {}, 7, std::log(15.0), 1.2);
  const auto dm = distance_matrix(g.regions);
  Rng rng = make_rng(17);
  const auto y = simulate_null_model1(g.population, 400, rng);
  PriorSpec prior;
  prior.rho_max = 70;
  const auto fit = fit_model2(g.population, y, dm, prior, 1.0, short_chain(), 3);
  const double n = std::accumulate(g.population.begin(), g.population.end(), 0.0);
  CHECK(std::abs(fit.beta.mean - std::log(400.0 / n)) <= 3 * fit.beta.sd);
  CHECK(fit.draws.size() == 1000);
  for (const auto& d : fit.draws) {
    CHECK(d.sigma > 0);
    CHECK(d.rho == std::round(d.rho));
    CHECK(d.rho >= 1);
    CHECK(d.rho <= 70);
  }
  CHECK(fit.acceptance.z >= 0.2);
  CHECK(fit.acceptance.z <= 0.6);
  CHECK(fit.acceptance.beta >= 0.2);
  CHECK(fit.acceptance.beta <= 0.6);
  CHECK(fit.beta.ess > 0);
  CHECK(fit.sigma.ess > 0);
  CHECK(fit.rho.ess > 0);

  SUBCASE("bit-for-bit reproducible") {
    const auto again = fit_model2(g.population, y, dm, prior, 1.0, short_chain(), 3);
    REQUIRE(again.draws.size() == fit.draws.size());
    for (std::size_t i = 0; i < fit.draws.size(); ++i) {
      CHECK(again.draws[i].beta == fit.draws[i].beta);
      CHECK(again.draws[i].z == fit.draws[i].z);
    }
  }
}

TEST_CASE("sigma stays away from zero on overdispersed data") {
  const auto g = synth_geometry(32, {}, 7, std::log(60.0), 0.8);
  const auto dm = distance_matrix(g.regions);
  const auto f = field_factor(dm, 0.5, 20, 1.0);
  const auto y = simulate_model2_counts(g.population, -2.0, f, 9);
  PriorSpec prior;
  prior.rho_max = 70;
  const auto fit = fit_model2(g.population, y, dm, prior, 1.0, short_chain(), 5);
  std::size_t above = 0;
  for (const auto& d : fit.draws) above += d.sigma > 0.1;
  CHECK(static_cast<double>(above) / fit.draws.size() > 0.95);
}

TEST_CASE("independent chains and Gelman-Rubin") {
  const auto g = synth_geometry(12, {}, 2, std::log(40.0), 0.8);
  const auto dm = distance_matrix(g.regions);
  Rng rng = make_rng(4);
  const auto y = simulate_null_model1(g.population, 300, rng);
  PriorSpec prior;
  prior.rho_max = 30;
  const auto chains = fit_model2_chains(g.population, y, dm, prior, 1.0, short_chain(), 8, 3, 2);
  REQUIRE(chains.size() == 3);
  CHECK(chains[0].draws.front().beta != chains[1].draws.front().beta);
  CHECK(gelman_rubin(chains, Parameter::beta) < 1.1);
  const auto serial = fit_model2_chains(g.population, y, dm, prior, 1.0, short_chain(), 8, 3, 1);
  CHECK(serial[2].draws.back().beta == chains[2].draws.back().beta);
}
