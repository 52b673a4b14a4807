#include "doctest.h"

#include <filesystem>

#include "scanstat/config.hpp"
#include "scanstat/errors.hpp"
#include "scanstat/io.hpp"
#include "test_util.hpp"

using namespace scanstat;

TEST_CASE("overrides") {
  auto cfg = default_config();
  apply_override(cfg, "scan.mc_size=99");
  CHECK(cfg["scan"]["mc_size"] == 99);
  apply_override(cfg, "data.period=1991");
  CHECK(cfg["data"]["period"] == "1991");
  apply_override(cfg, "study.sigma=0.2");
  CHECK(cfg["study"]["sigma"] == Json::array({0.2}));
  apply_override(cfg, "study.sigma=[0,0.1]");
  CHECK(cfg["study"]["sigma"].size() == 2);
  CHECK_THROWS_AS(apply_override(cfg, "scan.nope=1"), InputError);
  CHECK_THROWS_AS(apply_override(cfg, "nosection.x=1"), InputError);
  CHECK_THROWS_AS(apply_override(cfg, "scan.mc_size"), InputError);
  CHECK_THROWS_AS(apply_override(cfg, "scan.mc_size=abc"), InputError);
}

TEST_CASE("config files merge into the defaults") {
  testutil::TempDir d("cfg");
  testutil::write_file(d / "ok.json", R"({"mcmc": {"iterations": 1234}, "prior": {"rho_max": 30}})");
  testutil::write_file(d / "bad.json", R"({"mcmc": {"iterationz": 1}})");
  testutil::write_file(d / "broken.json", "{");
  auto cfg = default_config();
  merge_config_file(cfg, d / "ok.json");
  CHECK(mcmc_from(cfg).iterations == 1234);
  CHECK(prior_from(cfg).rho_max == 30);
  CHECK_THROWS_AS(merge_config_file(cfg, d / "bad.json"), InputError);
  CHECK_THROWS(merge_config_file(cfg, d / "broken.json"));
}

TEST_CASE("builders read the sections") {
  auto cfg = default_config();
  apply_override(cfg, "study.mode=adjusted_true_params");
  apply_override(cfg, "study.replicates=3");
  apply_override(cfg, "fdr.cutoff=0.2");
  const auto e = experiment_from(cfg);
  CHECK(e.mode == StudyMode::adjusted_true_params);
  CHECK(e.replicates == 3);
  CHECK(fdr_from(cfg).cutoff == 0.2);
  CHECK(prop2_from(cfg).k == 12);
  CHECK(adjusted_from(cfg).mc_size == 999);
}

TEST_CASE("atomic writes and hashing") {
  testutil::TempDir d("io");
  const auto p = d / "sub" / "x.txt";
  write_atomic(p, "hello");
  CHECK(read_text(p) == "hello");
  write_atomic(p, "again");
  CHECK(read_text(p) == "again");
  for (const auto& e : std::filesystem::directory_iterator(d / "sub")) CHECK(e.path().filename() == "x.txt");
  CHECK(content_hash("a") == content_hash("a"));
  CHECK(content_hash("a") != content_hash("b"));
  CHECK(content_hash("").size() == 16);
  CHECK(content_hash("") == "cbf29ce484222325");
}

TEST_CASE("number formatting round trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 12345678.9})
    CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv output") {
  CsvWriter w({"a", "b"});
  w.row({"1", "x,y"});
  CHECK(w.str().find("a,b\n") == 0);
  CHECK(w.str().find("\"x,y\"") != std::string::npos);
  CHECK_THROWS(w.row({"only one"}));
}

TEST_CASE("p-value files") {
  testutil::TempDir d("pv");
  testutil::write_file(d / "ok.csv", "period,p\n1,0.5\n2,0.01\n");
  testutil::write_file(d / "bare.csv", "a,0.3\n");
  testutil::write_file(d / "bad.csv", "a,0.3\nb,1.5\n");
  const auto v = read_pvalue_csv(d / "ok.csv");
  REQUIRE(v.size() == 2);
  CHECK(v[1].label == "2");
  CHECK(v[1].p == 0.01);
  CHECK(read_pvalue_csv(d / "bare.csv").size() == 1);
  CHECK_THROWS_AS(read_pvalue_csv(d / "bad.csv"), InputError);
}

TEST_CASE("geometry and case files round trip") {
  testutil::TempDir d("geo");
  const auto g = synth_geometry(5, {}, 2, 3, 1);
  write_geometry(d / "g.geo", d / "g.pop", g);
  const auto sr0 = make_study_region(g, {1, 2, 3, 4, 5});
  write_cases(d / "g.cas", sr0);
  const auto sr = load_study_region(d / "g.geo", d / "g.pop", d / "g.cas");
  REQUIRE(sr.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(sr.region(i).x == sr0.region(i).x);
    CHECK(sr.population(0)[i] == sr0.population(0)[i]);
    CHECK(sr.cases(0)[i] == sr0.cases(0)[i]);
  }
}
