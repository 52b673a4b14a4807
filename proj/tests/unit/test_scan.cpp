#include "doctest.h"

#include <cmath>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "scanstat/kernels.hpp"
#include "scanstat/scan.hpp"
#include "test_util.hpp"

using namespace scanstat;

TEST_CASE("log_lr values") {
  CHECK(log_lr(2, 20, 10, 100) == 0.0);
  CHECK(log_lr(5, 20, 10, 100) == doctest::Approx(2.2314355131).epsilon(1e-9));
  CHECK(log_lr(10, 50, 10, 100) == doctest::Approx(10 * std::log(2.0)).epsilon(1e-12));
  CHECK(log_lr(1, 50, 10, 100) == 0.0);
  CHECK(log_lr(0, 10, 0, 100) == 0.0);

  std::mt19937 g(1);
  std::uniform_int_distribution<int> cc(0, 200);
  std::uniform_real_distribution<double> nn(1, 99);
  for (int i = 0; i < 500; ++i) {
    const Count total = 200;
    const Count c = cc(g);
    const double n = nn(g);
    const double ours = log_lr(c, n, total, 100.0);
    const double ref = static_cast<double>(oracle::log_lr(c, n, total, 100.0L));
    CHECK(ours >= 0.0);
    CHECK(std::abs(ours - ref) <= 1e-10 * std::max(1.0, ref));
  }
}

TEST_CASE("log_lr is nondecreasing in inside cases above expectation") {
  double prev = 0.0;
  for (Count c = 20; c <= 100; ++c) {
    const double v = log_lr(c, 20, 100, 100);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("scan on trivial data") {
  const std::vector<Region> r{{"A", 0, 0}, {"B", 1, 0}, {"C", 3, 0}, {"D", 7, 1}};
  const std::vector<double> pop{10, 20, 30, 40};
  const auto ws = enumerate_windows(distance_matrix(r), pop, 0.5);
  SUBCASE("proportional counts") {
    const std::vector<Count> y{1, 2, 3, 4};
    const auto s = scan(ws, pop, y);
    CHECK(s.llr_star == 0.0);
    CHECK(s.secondaries.empty());
  }
  SUBCASE("one dominant cell") {
    const std::vector<Count> y{0, 0, 9, 0};
    const auto s = scan(ws, pop, y);
    REQUIRE(s.primary);
    CHECK(s.primary->window.members == std::vector<std::size_t>{2});
    CHECK(s.primary->cases == 9);
  }
}

TEST_CASE("scan matches exhaustive enumeration") {
  std::mt19937 g(21);
  std::uniform_real_distribution<double> u(0, 20);
  std::uniform_int_distribution<int> pi(1, 1000), yi(0, 30);
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
    CHECK(s.llr_star == best.llr);
    if (best.llr > 0) {
      REQUIRE(s.primary);
      CHECK(s.primary->window.members == best.members);
    }
    CHECK(kernels::max_llr(ws, pop, yc) == s.llr_star);
  }
}

TEST_CASE("secondaries are disjoint and ordered") {
  const auto r = testutil::grid_regions(24);
  std::vector<double> pop(24, 100.0);
  std::vector<Count> y(24, 5);
  y[0] = 30;
  y[23] = 25;
  const auto ws = enumerate_windows(distance_matrix(r), pop, 0.3);
  const auto s = scan(ws, pop, y);
  REQUIRE(s.primary);
  std::vector<int> used(24, 0);
  for (auto i : s.primary->window.members) used[i] = 1;
  double prev = s.llr_star;
  for (const auto& c : s.secondaries) {
    CHECK(c.llr <= prev);
    CHECK(c.llr > 0.0);
    prev = c.llr;
    for (auto i : c.window.members) {
      CHECK(used[i] == 0);
      used[i] = 1;
    }
  }
  CHECK(!s.secondaries.empty());
}

TEST_CASE("Model I null simulation") {
  SUBCASE("single region takes everything") {
    const std::vector<double> pop{7};
    Rng rng = make_rng(1);
    CHECK(simulate_null_model1(pop, 42, rng) == std::vector<Count>{42});
  }
  SUBCASE("binomial concentration") {
    const std::vector<double> pop{5, 5};
    Rng rng = make_rng(2);
    const auto y = simulate_null_model1(pop, 1'000'000, rng);
    CHECK(y[0] + y[1] == 1'000'000);
    CHECK(std::abs(static_cast<double>(y[0]) - 500000.0) <= 5 * 500.0);
  }
  SUBCASE("multinomial means") {
    const std::vector<double> pop{1, 2, 3, 10};
    const Count total = 50;
    Rng rng = make_rng(3);
    std::vector<double> s(4, 0.0);
    const int draws = 100000;
    for (int d = 0; d < draws; ++d) {
      const auto y = simulate_null_model1(pop, total, rng);
      for (int i = 0; i < 4; ++i) s[i] += static_cast<double>(y[i]);
    }
    for (int i = 0; i < 4; ++i) {
      const double p = pop[i] / 16.0;
      const double se = std::sqrt(total * p * (1 - p) / draws);
      CHECK(std::abs(s[i] / draws - total * p) <= 4 * se);
    }
  }
}

TEST_CASE("Monte Carlo p-values") {
  std::vector<double> ref(999);
  for (int i = 0; i < 999; ++i) ref[i] = i * 0.001;
  CHECK(mc_pvalue(5.0, ref).value() == doctest::Approx(0.001));
  CHECK(mc_pvalue(0.0, ref).value() == 1.0);
  const std::vector<double> zeros(99, 0.0);
  CHECK(mc_pvalue(0.0, zeros).value() == 1.0);
  CHECK(mc_pvalue(0.5, ref).rank == 1 + 499);
}

TEST_CASE("classical scan is deterministic and thread independent") {
  const auto r = testutil::grid_regions(18);
  std::vector<double> pop(18);
  for (std::size_t i = 0; i < 18; ++i) pop[i] = 50.0 + 10.0 * i;
  std::vector<std::vector<double>> pops{pop};
  StudyRegion sr(r, {"1"}, pops, {std::vector<Count>(18, 3)});
  sr = sr.with_cases(0, simulate_null_model1(sr, 0, 5));
  const auto ws = enumerate_windows(sr, distance_matrix(sr), 0.5);
  const auto a = classical_scan(sr, ws, 0, 99, 11, 1);
  const auto b = classical_scan(sr, ws, 0, 99, 11, 3);
  CHECK(a.llr_star == b.llr_star);
  CHECK(a.p_value == b.p_value);
  CHECK(a.mc_size == 99);
  REQUIRE(a.p_value);
  const double k = *a.p_value * 100.0;
  CHECK(std::abs(k - std::round(k)) < 1e-9);
}
