// scanstat command line. Every subcommand reads the same JSON configuration
// (defaults < --config file < --set overrides < dedicated flags) and writes a
// JSON manifest plus CSV tables named by a hash of the effective config.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scanstat/adjusted_scan.hpp"
#include "scanstat/config.hpp"
#include "scanstat/errors.hpp"
#include "scanstat/fdr.hpp"
#include "scanstat/glmm.hpp"
#include "scanstat/harness.hpp"
#include "scanstat/io.hpp"
#include "scanstat/region_model.hpp"
#include "scanstat/report.hpp"
#include "scanstat/scan.hpp"
#include "scanstat/theory.hpp"

namespace fs = std::filesystem;
using namespace scanstat;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitNotConverged = 4;

struct Run {
  std::string command;
  Json cfg;
  std::string tag;
  fs::path out_dir;
  Json manifest;
  std::vector<std::string> warnings;      // escalated by --strict
  std::vector<std::string> notes;

  void begin() {
    out_dir = cfg["run"]["out_dir"].get<std::string>();
    // Thread count and output location do not change results, so they stay out of the name.
    Json keyed = cfg;
    keyed["run"].erase("threads");
    keyed["run"].erase("out_dir");
    tag = command + "-" + content_hash(command + "\n" + keyed.dump()).substr(0, 12);
    manifest = Json{{"command", command}, {"config", cfg}, {"outputs", Json::array()}};
  }
  fs::path path(const std::string& suffix) const { return out_dir / (tag + suffix); }
  void write(const std::string& suffix, const std::string& content) {
    write_atomic(path(suffix), content);
    manifest["outputs"].push_back(path(suffix).filename().string());
  }
  int finish() {
    manifest["warnings"] = warnings;
    manifest["notes"] = notes;
    const fs::path m = path(".json");
    write_atomic(m, manifest.dump(2) + "\n");
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    for (const auto& n : notes) std::cerr << "note: " << n << "\n";
    std::cout << "wrote " << m.string() << "\n";
    if (!warnings.empty() && cfg["run"]["strict"].get<bool>()) return kExitNotConverged;
    return kExitOk;
  }
};

StudyRegion load_data(const Json& cfg) {
  const auto& d = cfg["data"];
  const auto geo = d["geo"].get<std::string>(), pop = d["pop"].get<std::string>(), cas = d["cas"].get<std::string>();
  if (geo.empty() || pop.empty() || cas.empty())
    throw InputError("data.geo, data.pop and data.cas are required (use --geo/--pop/--cas)");
  return load_study_region(geo, pop, cas);
}

std::vector<std::size_t> period_indices(const StudyRegion& sr, const Json& labels) {
  std::vector<std::size_t> out;
  for (const auto& l : labels) out.push_back(sr.period_index(l.is_string() ? l.get<std::string>() : l.dump()));
  return out;
}

// data.period if given, the only period if there is one, otherwise all periods summed.
StudyRegion single_period(const StudyRegion& sr, const Json& cfg) {
  const auto label = cfg["data"]["period"].get<std::string>();
  std::vector<std::size_t> idx;
  if (!label.empty()) {
    idx.push_back(sr.period_index(label));
    return sr.aggregate(idx, label);
  }
  if (sr.num_periods() == 1) return sr;
  for (std::size_t t = 0; t < sr.num_periods(); ++t) idx.push_back(t);
  return sr.aggregate(idx, "all");
}

void fit_warnings(Run& run, const ModelIIFit& f, const std::string& what) {
  if (f.low_ess)
    run.warnings.push_back(what + ": effective sample size of beta is " + std::to_string(f.beta.ess) +
                           " (< 100); lengthen the chain");
  if (f.rho_boundary_fraction > 0.25)
    run.notes.push_back(what + ": " + std::to_string(f.rho_boundary_fraction) +
                        " of the rho draws lie in the top 5% of the grid; consider a larger prior.rho_max");
}

int cmd_scan(Run& run) {
  const StudyRegion all = load_data(run.cfg);
  const StudyRegion sr = single_period(all, run.cfg);
  const DistanceMatrix dm = distance_matrix(sr);
  const WindowSet ws = enumerate_windows(sr, dm, run.cfg["data"]["max_fraction"].get<double>());
  const ScanResult r = classical_scan(sr, ws, 0, run.cfg["scan"]["mc_size"].get<int>(),
                                      run.cfg["run"]["seed"].get<std::uint64_t>(), run.cfg["run"]["threads"].get<int>());
  run.manifest["period"] = sr.periods()[0];
  run.manifest["windows"] = ws.size();
  run.manifest["result"] = to_json(r, sr);
  std::vector<ClusterReport> cs;
  if (r.primary) cs.push_back(*r.primary);
  cs.insert(cs.end(), r.secondaries.begin(), r.secondaries.end());
  run.write("-clusters.csv", cluster_map_csv(sr, cs));
  std::cout << "llr* " << r.llr_star << "  p " << (r.p_value ? format_double(*r.p_value) : "n/a") << "\n";
  return run.finish();
}

int cmd_fit(Run& run) {
  const StudyRegion all = load_data(run.cfg);
  const Json& train = run.cfg["data"]["train"];
  StudyRegion sr;
  if (!train.empty()) {
    const auto idx = period_indices(all, train);
    sr = all.aggregate(idx, "train");
  } else {
    sr = single_period(all, run.cfg);
  }
  const DistanceMatrix dm = distance_matrix(sr);
  const PriorSpec prior = prior_from(run.cfg);
  const McmcConfig mc = mcmc_from(run.cfg);
  const double nu = run.cfg["matern"]["nu"].get<double>();
  const auto seed = run.cfg["run"]["seed"].get<std::uint64_t>();
  const int chains = run.cfg["mcmc"]["chains"].get<int>();
  std::vector<ModelIIFit> fits;
  if (chains > 1) {
    fits = fit_model2_chains(sr.population(0), sr.cases(0), dm, prior, nu, mc, seed, chains,
                             run.cfg["run"]["threads"].get<int>(), form_from(run.cfg));
    run.manifest["gelman_rubin"] = {{"beta", gelman_rubin(fits, Parameter::beta)},
                                    {"sigma", gelman_rubin(fits, Parameter::sigma)},
                                    {"rho", gelman_rubin(fits, Parameter::rho)}};
  } else {
    fits.push_back(fit_model2(sr, 0, dm, prior, nu, mc, seed, {}, form_from(run.cfg)));
  }
  Json chains_json = Json::array();
  for (std::size_t c = 0; c < fits.size(); ++c) {
    Json j = to_json(fits[c]);
    j["posterior_means"] = to_json(posterior_means(fits[c]));
    chains_json.push_back(std::move(j));
    fit_warnings(run, fits[c], "chain " + std::to_string(c + 1));
    if (run.cfg["mcmc"]["write_draws"].get<bool>())
      run.write("-draws" + (fits.size() > 1 ? std::to_string(c + 1) : std::string()) + ".csv", draws_csv(fits[c]));
  }
  run.manifest["period"] = sr.periods()[0];
  run.manifest["fits"] = chains_json;
  const PosteriorMeans pm = posterior_means(fits[0]);
  std::cout << "beta " << pm.beta << "  sigma " << pm.sigma << "  rho " << pm.rho << "\n";
  return run.finish();
}

int cmd_adjusted_scan(Run& run) {
  const StudyRegion all = load_data(run.cfg);
  const StudyRegion sr = single_period(all, run.cfg);
  const DistanceMatrix dm = distance_matrix(sr);
  const WindowSet ws = enumerate_windows(sr, dm, run.cfg["data"]["max_fraction"].get<double>());
  const AdjustedConfig ac = adjusted_from(run.cfg);
  const AdjustedScanResult r = adjusted_scan(sr, ws, 0, dm, ac);
  run.manifest["period"] = sr.periods()[0];
  run.manifest["result"] = to_json(r, sr);
  if (!r.converged)
    run.warnings.push_back("significant cluster set still changing after " + std::to_string(ac.max_iter) + " iterations");
  fit_warnings(run, r.final_fit, "final fit");
  run.write("-reference.csv", reference_csv(r.final_reference));
  run.write("-clusters.csv", cluster_map_csv(sr, r.final_clusters));
  if (run.cfg["mcmc"]["write_draws"].get<bool>()) run.write("-draws.csv", draws_csv(r.final_fit));
  std::cout << "classical p " << (r.classical.p_value ? format_double(*r.classical.p_value) : "n/a");
  if (!r.final_clusters.empty() && r.final_clusters.front().p_value)
    std::cout << "  adjusted p " << *r.final_clusters.front().p_value;
  std::cout << "  iterations " << r.iterations.size() << (r.converged ? "" : " (not converged)") << "\n";
  return run.finish();
}

int cmd_surveil(Run& run) {
  const StudyRegion sr = load_data(run.cfg);
  const DistanceMatrix dm = distance_matrix(sr);
  const auto train = period_indices(sr, run.cfg["data"]["train"]);
  if (train.empty()) throw InputError("surveil needs data.train (--train)");
  auto test = period_indices(sr, run.cfg["data"]["test"]);
  if (test.empty())
    for (std::size_t t = 0; t < sr.num_periods(); ++t)
      if (std::find(train.begin(), train.end(), t) == train.end()) test.push_back(t);
  const SurveillanceReport r = surveillance_run(sr, dm, train, test, run.cfg["data"]["max_fraction"].get<double>(),
                                                adjusted_from(run.cfg), fdr_from(run.cfg));
  run.manifest["result"] = to_json(r, sr);
  fit_warnings(run, r.train_test.fit, "training fit");
  if (!r.fdr_note.empty()) run.notes.push_back(r.fdr_note);
  run.write("-periods.csv", surveillance_csv(r));
  if (r.fdr_model) run.write("-fdr-histogram.csv", fdr_histogram_csv(*r.fdr_model));
  const double cutoff = run.cfg["fdr"]["cutoff"].get<double>();
  for (const auto& p : r.periods)
    if (r.fdr_fitted && p.fdr < cutoff)
      std::cout << "period " << p.assessment.label << "  adjusted p " << p.assessment.adjusted_p << "  fdr " << p.fdr
                << "\n";
  return run.finish();
}

int cmd_study(Run& run, bool adjusted) {
  ExperimentConfig ec = experiment_from(run.cfg);
  if (!adjusted) {
    if (ec.mode != StudyMode::classical) throw InputError("type1-study runs study.mode=classical only");
  } else if (ec.mode == StudyMode::classical) {
    throw InputError("adjusted-study needs study.mode adjusted_fitted or adjusted_true_params");
  }
  const ProportionTable t = run_study(ec);
  run.manifest["result"] = to_json(t);
  run.write("-table.csv", table_csv(t));
  run.write("-archive.csv", archive_csv(t));
  for (const auto& r : t.rows) {
    std::printf("sigma %-6g rho %-6g nu %-4g alpha %-5g %s  %d/%d = %.3f (se %.3f)%s\n", r.sigma, r.rho, r.nu, r.alpha,
                to_string(r.mode).c_str(), r.count, r.n, r.proportion, r.se,
                r.dropped ? ("  dropped " + std::to_string(r.dropped)).c_str() : "");
  }
  int dropped = 0;
  for (const auto& r : t.archive) dropped += r.ok ? 0 : 1;
  if (dropped) run.warnings.push_back(std::to_string(dropped) + " replicate(s) failed and were dropped");
  return run.finish();
}

int cmd_fdr(Run& run) {
  const auto input = run.cfg["fdr"]["input"].get<std::string>();
  if (input.empty()) throw InputError("fdr needs fdr.input (--input), a CSV of period_label,p_value");
  const auto rows = read_pvalue_csv(input);
  const int mc = run.cfg["fdr"]["mc_size"].get<int>();
  std::vector<double> z;
  for (const auto& r : rows) z.push_back(p_to_z(r.p, mc > 0 ? std::optional<int>(mc) : std::nullopt));
  const FdrModel m = fit_fdr(z, fdr_from(run.cfg));
  CsvWriter w({"period_label", "z", "fdr"});
  const double cutoff = run.cfg["fdr"]["cutoff"].get<double>();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    w.row({rows[i].label, format_double(z[i]), format_double(m.fdr()[i].fdr)});
    if (m.fdr()[i].fdr < cutoff) std::cout << rows[i].label << "  z " << z[i] << "  fdr " << m.fdr()[i].fdr << "\n";
  }
  run.write("-fdr.csv", w.str());
  run.write("-histogram.csv", fdr_histogram_csv(m));
  run.manifest["result"] = to_json(m);
  if (z.size() < 100) run.notes.push_back("fewer than 100 z-values; the density fit is rough");
  std::cout << "delta0 " << m.null().delta0 << "  sigma0 " << m.null().sigma0 << "\n";
  return run.finish();
}

int cmd_check_theory(Run& run) {
  const Json& t = run.cfg["theory"];
  Json checks = Json::array();
  bool all = true;
  auto record = [&](const std::string& name, bool ok, Json detail) {
    all = all && ok;
    std::cout << (ok ? "PASS " : "FAIL ") << name << "\n";
    checks.push_back(Json{{"check", name}, {"pass", ok}, {"detail", std::move(detail)}});
  };

  const Prop2Setup setup = prop2_from(run.cfg);
  const bool single = setup.populations.size() == 1;
  const TailMethod method = single ? TailMethod(Quadrature{t["nodes"].get<int>()})
                                   : TailMethod(MonteCarlo{static_cast<std::size_t>(t["mc_samples"].get<long>()),
                                                           run.cfg["run"]["seed"].get<std::uint64_t>(),
                                                           run.cfg["run"]["threads"].get<int>()});

  {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(setup.populations.size()),
                                                       static_cast<Eigen::Index>(setup.populations.size()));
    const double a = mixture_tail(setup.k, setup.beta, setup.populations, zero, method).value;
    double total = 0;
    for (double n : setup.populations) total += n;
    const double b = poisson_tail(setup.k, std::exp(setup.beta) * total);
    record("degenerate mixture equals Poisson tail", std::abs(a - b) <= 1e-12, Json{{"mixture", a}, {"poisson", b}});
  }
  {
    const Prop1Result p1 = check_prop1(setup.beta, setup.populations, setup.base_sigma, method);
    record("mixture tail heavier beyond some K in [lambda, lambda + 10 sqrt(lambda)]", p1.k_star.has_value(), to_json(p1));
  }
  {
    const Prop2Report rep = verify_prop2(setup, method);
    const auto& last = rep.rows.back();
    const bool ok = rep.slope && *rep.slope <= -1.25 && std::abs(last.remainder()) <= 0.01 * std::abs(last.correction);
    record("second-order tail expansion (slope <= -1.25, last remainder <= 1% of correction)", ok, to_json(rep));
  }
  {
    Prop2Setup mcs;
    mcs.k = t["mc_k"].get<Count>();
    mcs.beta = t["mc_beta"].get<double>();
    mcs.populations = t["mc_populations"].get<std::vector<double>>();
    const auto rows = t["mc_sigma2"].get<std::vector<std::vector<double>>>();
    mcs.base_sigma.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != rows.size()) throw InputError("theory.mc_sigma2 must be square");
      for (std::size_t j = 0; j < rows.size(); ++j)
        mcs.base_sigma(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    if (mcs.populations.size() != rows.size()) throw InputError("theory.mc_populations and mc_sigma2 disagree in size");
    mcs.n_grid = setup.n_grid;
    const MonteCarlo mc{static_cast<std::size_t>(t["mc_samples"].get<long>()), run.cfg["run"]["seed"].get<std::uint64_t>(),
                        run.cfg["run"]["threads"].get<int>()};
    const Prop2Report rep = verify_prop2(mcs, mc);
    bool ok = true;
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      const double prev = std::abs(rep.rows[i - 1].remainder()), cur = std::abs(rep.rows[i].remainder());
      ok = ok && (cur < prev || cur <= 3.0 * rep.rows[i].p2_se);
    }
    record("correlated regions, Monte Carlo: remainder shrinks in n beyond noise", ok, to_json(rep));
  }
  {
    const auto lambdas = t["lambdas"].get<std::vector<double>>();
    const auto cells = check_corollary(lambdas, t["k_min"].get<Count>(), t["k_max"].get<Count>());
    Json bad = Json::array();
    for (const auto& c : cells)
      if (!c.ok) bad.push_back(Json{{"lambda", c.lambda_bar}, {"k", c.k}, {"correction", c.correction}});
    record("correction sign equals sign(k - lambda - 1)", bad.empty(), Json{{"cells", cells.size()}, {"failures", bad}});
  }
  run.manifest["checks"] = checks;
  const int rc = run.finish();
  return all ? rc : kExitNumerical;
}

int cmd_synth_geo(Run& run) {
  const Json& s = run.cfg["synth"];
  const auto bb = s["bbox"].get<std::vector<double>>();
  if (bb.size() != 4) throw InputError("synth.bbox needs [xmin, xmax, ymin, ymax]");
  const Geometry g = synth_geometry(s["m"].get<std::size_t>(), {bb[0], bb[1], bb[2], bb[3]},
                                    s["seed"].get<std::uint64_t>(), s["pop_meanlog"].get<double>(),
                                    s["pop_sdlog"].get<double>());
  write_geometry(run.path("-geo.txt"), run.path("-pop.txt"), g);
  run.manifest["outputs"].push_back(run.path("-geo.txt").filename().string());
  run.manifest["outputs"].push_back(run.path("-pop.txt").filename().string());
  const int periods = s["periods"].get<int>();
  if (periods > 0) {
    const DistanceMatrix dm = distance_matrix(g.regions);
    const CovFactor f = field_factor(dm, s["sigma"].get<double>(), s["rho"].get<double>(), s["nu"].get<double>(),
                                     form_from(run.cfg));
    double total = 0;
    for (double n : g.population) total += n;
    const double beta =
        s["beta"].is_null() ? std::log(s["expected_total"].get<double>() / total) : s["beta"].get<double>();
    std::vector<std::string> labels;
    std::vector<std::vector<double>> pops;
    std::vector<std::vector<Count>> cases;
    for (int t = 0; t < periods; ++t) {
      labels.push_back(std::to_string(t + 1));
      pops.push_back(g.population);
      cases.push_back(simulate_model2_counts(g.population, beta, f,
                                             derive_seed(run.cfg["run"]["seed"].get<std::uint64_t>(),
                                                         {static_cast<std::uint64_t>(t)})));
    }
    const StudyRegion sr(g.regions, labels, pops, cases);
    write_cases(run.path("-cas.txt"), sr);
    run.manifest["outputs"].push_back(run.path("-cas.txt").filename().string());
    run.manifest["beta"] = beta;
  }
  return run.finish();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial scan statistics with a spatial-GLMM adjusted null"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::vector<std::string> sets;
  bool strict = false;
  app.add_option("--config", config_file, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads (0 = all)");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_option("--set", sets, "override a config key: section.key=value");
  app.add_flag("--strict", strict, "exit with code 4 on non-convergence warnings");

  // Dedicated flags are shorthands for --set.
  std::string geo, pop, cas, period, input, mode;
  std::vector<std::string> train, test;
  auto data_opts = [&](CLI::App* sub) {
    sub->add_option("--geo", geo, "geo file: id x y");
    sub->add_option("--pop", pop, "population file: id [period] population");
    sub->add_option("--cas", cas, "case file: id [period] count");
    sub->add_option("--period", period, "period label (default: the only period, or all summed)");
  };
  auto* scan_cmd = app.add_subcommand("scan", "classical Poisson scan with Monte Carlo p-values");
  data_opts(scan_cmd);
  auto* fit_cmd = app.add_subcommand("fit", "MCMC fit of the spatial GLMM");
  data_opts(fit_cmd);
  fit_cmd->add_option("--train", train, "periods to sum for the fit");
  auto* adj_cmd = app.add_subcommand("adjusted-scan", "scan with a reference distribution from the fitted GLMM");
  data_opts(adj_cmd);
  auto* surveil_cmd = app.add_subcommand("surveil", "train on some periods, scan the others, local fdr on the p-values");
  data_opts(surveil_cmd);
  surveil_cmd->add_option("--train", train, "training period labels");
  surveil_cmd->add_option("--test", test, "test period labels (default: all others)");
  auto* t1_cmd = app.add_subcommand("type1-study", "false-alarm rate of the classical scan under correlated data");
  auto* as_cmd = app.add_subcommand("adjusted-study", "false-alarm rate of the adjusted scan");
  as_cmd->add_option("--mode", mode, "adjusted_fitted or adjusted_true_params");
  auto* fdr_cmd = app.add_subcommand("fdr", "local fdr for a CSV of period_label,p_value");
  fdr_cmd->add_option("--input", input, "CSV of period_label,p_value");
  auto* theory_cmd = app.add_subcommand("check-theory", "numerical checks of the Poisson mixture tail results");
  auto* synth_cmd = app.add_subcommand("synth-geo", "write a synthetic geometry (and optionally simulated counts)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  Run run;
  try {
    run.cfg = default_config();
    if (!config_file.empty()) merge_config_file(run.cfg, config_file);
    for (const auto& s : sets) apply_override(run.cfg, s);
    if (seed) run.cfg["run"]["seed"] = *seed;
    if (threads) run.cfg["run"]["threads"] = *threads;
    if (!out_dir.empty()) run.cfg["run"]["out_dir"] = out_dir;
    if (strict) run.cfg["run"]["strict"] = true;
    if (!geo.empty()) run.cfg["data"]["geo"] = geo;
    if (!pop.empty()) run.cfg["data"]["pop"] = pop;
    if (!cas.empty()) run.cfg["data"]["cas"] = cas;
    if (!period.empty()) run.cfg["data"]["period"] = period;
    if (!train.empty()) run.cfg["data"]["train"] = train;
    if (!test.empty()) run.cfg["data"]["test"] = test;
    if (!input.empty()) run.cfg["fdr"]["input"] = input;
    if (!mode.empty()) run.cfg["study"]["mode"] = mode;
    if (as_cmd->parsed() && mode.empty() && run.cfg["study"]["mode"] == "classical")
      run.cfg["study"]["mode"] = "adjusted_fitted";

    CLI::App* sub = app.get_subcommands().front();
    run.command = sub->get_name();
    run.begin();
    if (sub == scan_cmd) return cmd_scan(run);
    if (sub == fit_cmd) return cmd_fit(run);
    if (sub == adj_cmd) return cmd_adjusted_scan(run);
    if (sub == surveil_cmd) return cmd_surveil(run);
    if (sub == t1_cmd) return cmd_study(run, false);
    if (sub == as_cmd) return cmd_study(run, true);
    if (sub == fdr_cmd) return cmd_fdr(run);
    if (sub == theory_cmd) return cmd_check_theory(run);
    if (sub == synth_cmd) return cmd_synth_geo(run);
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Json::exception& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::invalid_argument& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitOk;
}
