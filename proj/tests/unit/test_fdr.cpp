#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scanstat/errors.hpp"
#include "scanstat/fdr.hpp"

using namespace scanstat;

namespace {

std::vector<double> normals(std::size_t n, double mu, double sd, unsigned seed) {
  std::mt19937_64 g(seed);
  std::normal_distribution<double> d(mu, sd);
  std::vector<double> z(n);
  for (double& v : z) v = d(g);
  return z;
}

}  // namespace

TEST_CASE("p to z") {
  CHECK(p_to_z(0.5) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p_to_z(0.025) == doctest::Approx(-1.959963984540054).epsilon(1e-10));
  CHECK(p_to_z(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-10));
  for (double p : {1e-6, 0.013, 0.2, 0.77, 0.999})
    CHECK(std::abs(p_to_z(p) - oracle::inverse_normal(p)) <= 1e-9);
  CHECK(p_to_z(1.0, 999) == doctest::Approx(oracle::inverse_normal(1 - 1.0 / 2000)).epsilon(1e-9));
  CHECK_THROWS_AS(p_to_z(1.0), InputError);
  CHECK_THROWS_AS(p_to_z(0.0), InputError);
  CHECK_THROWS_AS(p_to_z(1.5, 99), InputError);
}

TEST_CASE("default bin count") {
  CHECK(default_bins(30) == 20);
  CHECK(default_bins(129) == 26);
  CHECK(default_bins(100000) == 60);
}

TEST_CASE("density fit recovers the standard normal") {
  const auto z = normals(10000, 0, 1, 1);
  const auto d = fit_empirical_density(z, default_bins(z.size()));
  double counted = 0;
  for (double c : d.counts) counted += c;
  CHECK(counted == 10000);
  double integral = 0;
  double worst = 0;
  for (std::size_t b = 0; b < d.grid.size(); ++b) {
    CHECK(d.f[b] > 0);
    integral += d.f[b] * (d.edges[b + 1] - d.edges[b]);
    if (std::abs(d.grid[b]) <= 2) worst = std::max(worst, std::abs(d.f[b] - oracle::normal_pdf(d.grid[b], 0, 1)));
  }
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(worst <= 0.02);
}

TEST_CASE("density fit errors") {
  const std::vector<double> same(50, 0.3);
  CHECK_THROWS_AS(fit_empirical_density(same, 20), InputError);
  const std::vector<double> few(10, 0.1);
  CHECK_THROWS_AS(fit_empirical_density(few, 20), InputError);
}

TEST_CASE("density fit shows a left shoulder") {
  auto z = normals(9500, 0, 1, 2);
  const auto alt = normals(500, -3, 1, 3);
  z.insert(z.end(), alt.begin(), alt.end());
  const auto m = fit_fdr(z);
  const double f = m.density(-3.0);
  CHECK(f >= 2 * m.null_density(-3.0));
}

TEST_CASE("central matching on exact densities") {
  std::vector<double> grid, f, g;
  for (double x = -4; x <= 4 + 1e-9; x += 0.1) {
    grid.push_back(x);
    f.push_back(oracle::normal_pdf(x, 0, 1));
    g.push_back(oracle::normal_pdf(x, -0.07, 0.55));
  }
  const auto a = fit_empirical_null(grid, f);
  CHECK(std::abs(a.delta0) <= 1e-6);
  CHECK(std::abs(a.sigma0 - 1) <= 1e-6);
  const auto b = fit_empirical_null(grid, g);
  CHECK(std::abs(b.delta0 + 0.07) <= 1e-3);
  CHECK(std::abs(b.sigma0 - 0.55) <= 1e-3);

  std::vector<double> rising;
  for (double x : grid) rising.push_back(std::exp(x));
  CHECK_THROWS_AS(fit_empirical_null(grid, rising), NumericalError);
  std::vector<double> convex;
  for (double x : grid) convex.push_back(std::exp(0.5 * x * x) * (std::abs(x) < 3 ? 1.0 : 0.5));
  CHECK_THROWS_AS(fit_empirical_null(grid, convex), NumericalError);
}

TEST_CASE("end-to-end null data") {
  const auto z = normals(10000, 0, 1, 4);
  const auto m = fit_fdr(z);
  CHECK(std::abs(m.null().delta0) <= 0.1);
  CHECK(m.null().sigma0 >= 0.85);
  CHECK(m.null().sigma0 <= 1.15);
  std::size_t low = 0;
  for (const auto& v : m.fdr()) {
    CHECK(v.fdr > 0.0);
    CHECK(v.fdr <= 1.0);
    low += v.fdr < 0.5;
  }
  CHECK(low <= 500);
}

TEST_CASE("location equivariance") {
  auto z = normals(5000, 0, 1, 5);
  const auto a = fit_fdr(z);
  for (double& v : z) v += 1.3;
  const auto b = fit_fdr(z);
  CHECK(std::abs(b.null().delta0 - a.null().delta0 - 1.3) <= 1e-3);
}

TEST_CASE("fdr ratio definition and clamping") {
  const auto z = normals(2000, 0, 1, 6);
  const auto m = fit_fdr(z);
  const double x = 0.4;
  const double expected = std::min(1.0, m.null_density(x) / m.density(x));
  CHECK(m.local_fdr(x).fdr == doctest::Approx(expected).epsilon(1e-12));
  CHECK(!m.local_fdr(x).clamped);
  const auto far = m.local_fdr(50.0);
  CHECK(far.clamped);
  CHECK(far.fdr > 0.0);
  CHECK(far.fdr <= 1.0);
}
