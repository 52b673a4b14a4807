#include "scanstat/report.hpp"

#include "scanstat/io.hpp"

namespace scanstat {

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json member_ids(const std::vector<std::size_t>& members, const StudyRegion& sr) {
  Json a = Json::array();
  for (std::size_t i : members) a.push_back(sr.region(i).id);
  return a;
}

Json clusters_json(const std::vector<ClusterReport>& cs, const StudyRegion& sr) {
  Json a = Json::array();
  for (const auto& c : cs) a.push_back(to_json(c, sr));
  return a;
}

std::string num(double v) { return format_double(v); }

}  // namespace

Json to_json(const ClusterReport& c, const StudyRegion& sr) {
  return Json{{"center", sr.region(c.window.center).id},
              {"members", member_ids(c.window.members, sr)},
              {"radius", c.window.radius},
              {"cases", c.cases},
              {"population", c.population},
              {"expected", c.expected},
              {"relative_risk", c.expected > 0 ? static_cast<double>(c.cases) / c.expected : 0.0},
              {"llr", c.llr},
              {"p_value", optional_number(c.p_value)}};
}

Json to_json(const ScanResult& r, const StudyRegion& sr) {
  return Json{{"llr_star", r.llr_star},
              {"p_value", optional_number(r.p_value)},
              {"mc_size", r.mc_size},
              {"primary", r.primary ? to_json(*r.primary, sr) : Json(nullptr)},
              {"secondaries", clusters_json(r.secondaries, sr)}};
}

Json to_json(const ParameterSummary& s) {
  return Json{{"mean", s.mean}, {"sd", s.sd},   {"q05", s.q05}, {"q25", s.q25},
              {"q50", s.q50},   {"q75", s.q75}, {"q95", s.q95}, {"ess", s.ess}};
}

Json to_json(const PosteriorMeans& m) {
  return Json{{"beta", m.beta}, {"sigma", m.sigma}, {"rho", m.rho}, {"rho_grid", m.rho_grid}};
}

Json to_json(const McmcConfig& c) {
  return Json{{"iterations", c.iterations},
              {"burn_in", c.burn_in},
              {"thin", c.thin},
              {"rho_every", c.rho_every},
              {"adapt_batch", c.adapt_batch},
              {"target_accept", c.target_accept},
              {"sigma_init", c.sigma_init},
              {"divergence_window", c.divergence_window},
              {"divergence_factor", c.divergence_factor}};
}

Json to_json(const ModelIIFit& f) {
  return Json{{"draws", f.draws.size()},
              {"beta", to_json(f.beta)},
              {"sigma", to_json(f.sigma)},
              {"rho", to_json(f.rho)},
              {"acceptance",
               {{"z", f.acceptance.z}, {"beta", f.acceptance.beta}, {"sigma", f.acceptance.sigma},
                {"scale", f.acceptance.scale}}},
              {"rho_boundary_fraction", f.rho_boundary_fraction},
              {"low_ess", f.low_ess},
              {"rho_max", f.prior.rho_max},
              {"nu", f.nu},
              {"form", f.form == MaternForm::standard ? "standard" : "scaled_power"},
              {"seed", f.seed},
              {"max_jitter", f.max_jitter},
              {"mcmc", to_json(f.config)}};
}

Json to_json(const ReferenceSummary& s) {
  return Json{{"mean", s.mean}, {"q50", s.q50}, {"q90", s.q90}, {"q95", s.q95}, {"q99", s.q99}, {"max", s.max}};
}

Json to_json(const AdjustedScanResult& r, const StudyRegion& sr) {
  Json its = Json::array();
  for (const auto& it : r.iterations) {
    its.push_back(Json{{"excluded", member_ids(it.excluded, sr)},
                       {"fit", to_json(it.fit)},
                       {"beta_sim", it.beta_sim},
                       {"reference", to_json(it.reference)},
                       {"clusters", clusters_json(it.clusters, sr)}});
  }
  return Json{{"classical", to_json(r.classical, sr)},
              {"iterations", its},
              {"converged", r.converged},
              {"final_clusters", clusters_json(r.final_clusters, sr)},
              {"final_fit", to_json(r.final_fit)}};
}

Json to_json(const PeriodAssessment& p, const StudyRegion& sr) {
  return Json{{"period", p.label},
              {"llr_star", p.llr_star},
              {"classical_p", p.classical_p},
              {"adjusted_p", p.adjusted_p},
              {"beta_sim", p.beta_sim},
              {"reference", to_json(p.reference)},
              {"primary", p.primary ? to_json(*p.primary, sr) : Json(nullptr)},
              {"secondaries", clusters_json(p.secondaries, sr)}};
}

Json to_json(const SurveillanceReport& r, const StudyRegion& sr) {
  Json periods = Json::array();
  for (const auto& p : r.periods) {
    Json j = to_json(p.assessment, sr);
    j["z"] = p.z;
    j["fdr"] = p.fdr;
    j["fdr_clamped"] = p.fdr_clamped;
    periods.push_back(std::move(j));
  }
  Json out{{"train", r.train_test.train_label},
           {"fit", to_json(r.train_test.fit)},
           {"posterior_means", to_json(r.train_test.means)},
           {"periods", periods},
           {"fdr_fitted", r.fdr_fitted},
           {"fdr_note", r.fdr_note}};
  if (r.fdr_model) out["fdr_model"] = to_json(*r.fdr_model);
  return out;
}

Json to_json(const ProportionTable& t) {
  Json rows = Json::array();
  for (const auto& r : t.rows) {
    rows.push_back(Json{{"sigma", r.sigma},
                        {"rho", r.rho},
                        {"nu", r.nu},
                        {"alpha", r.alpha},
                        {"mode", to_string(r.mode)},
                        {"count", r.count},
                        {"n", r.n},
                        {"dropped", r.dropped},
                        {"proportion", r.proportion},
                        {"se", r.se}});
  }
  return Json{{"beta", t.beta}, {"rows", rows}};
}

Json to_json(const TailComparison& t) {
  return Json{{"k", t.k},           {"n", t.n},           {"lambda_bar", t.lambda_bar}, {"v_n", t.v_n},
              {"p1_tail", t.p1_tail}, {"p2_tail", t.p2_tail}, {"p2_se", t.p2_se},
              {"correction", t.correction}, {"remainder", t.remainder()}};
}

Json to_json(const Prop2Report& r) {
  Json rows = Json::array();
  for (const auto& t : r.rows) rows.push_back(to_json(t));
  return Json{{"rows", rows}, {"slope", optional_number(r.slope)}};
}

Json to_json(const Prop1Result& r) {
  return Json{{"lambda_bar", r.lambda_bar},
              {"k_lo", r.k_lo},
              {"k_hi", r.k_hi},
              {"diff", r.diff},
              {"k_star", r.k_star ? Json(*r.k_star) : Json(nullptr)}};
}

Json to_json(const FdrModel& m) {
  return Json{{"delta0", m.null().delta0},
              {"sigma0", m.null().sigma0},
              {"mode", m.null().mode},
              {"bins", m.fit().counts.size()},
              {"spline_df", m.config().spline_df},
              {"irls_iterations", m.fit().iterations},
              {"deviance", m.fit().deviance},
              {"cutoff", m.config().cutoff},
              {"p0_bound", m.config().p0_bound}};
}

std::string draws_csv(const ModelIIFit& f) {
  std::vector<std::string> head{"draw", "beta", "sigma", "rho"};
  const std::size_t m = f.draws.empty() ? 0 : f.draws.front().z.size();
  for (std::size_t i = 0; i < m; ++i) head.push_back("z" + std::to_string(i + 1));
  CsvWriter w(head);
  for (std::size_t d = 0; d < f.draws.size(); ++d) {
    const auto& x = f.draws[d];
    std::vector<std::string> row{std::to_string(d), num(x.beta), num(x.sigma), num(x.rho)};
    for (double z : x.z) row.push_back(num(z));
    w.row(row);
  }
  return w.str();
}

std::string reference_csv(std::span<const double> reference) {
  CsvWriter w({"replicate", "llr_star"});
  for (std::size_t i = 0; i < reference.size(); ++i) w.row({std::to_string(i), num(reference[i])});
  return w.str();
}

std::string table_csv(const ProportionTable& t) {
  CsvWriter w({"sigma", "rho", "nu", "alpha", "mode", "count", "n", "dropped", "proportion", "se"});
  for (const auto& r : t.rows)
    w.row({num(r.sigma), num(r.rho), num(r.nu), num(r.alpha), to_string(r.mode), std::to_string(r.count),
           std::to_string(r.n), std::to_string(r.dropped), num(r.proportion), num(r.se)});
  return w.str();
}

std::string archive_csv(const ProportionTable& t) {
  CsvWriter w({"sigma", "rho", "nu", "mode", "replicate", "ok", "total_cases", "llr_star", "p_value", "beta_sim",
               "fit_beta", "fit_sigma", "fit_rho", "error"});
  for (const auto& r : t.archive) {
    w.row({num(r.sigma), num(r.rho), num(r.nu), to_string(r.mode), std::to_string(r.replicate), r.ok ? "1" : "0",
           std::to_string(r.total_cases), num(r.llr_star), num(r.p_value), num(r.beta_sim),
           r.fit ? num(r.fit->beta) : "", r.fit ? num(r.fit->sigma) : "", r.fit ? num(r.fit->rho) : "", r.error});
  }
  return w.str();
}

std::string cluster_map_csv(const StudyRegion& sr, const std::vector<ClusterReport>& clusters) {
  std::vector<int> rank(sr.size(), 0);
  std::vector<std::string> p(sr.size());
  for (std::size_t c = 0; c < clusters.size(); ++c)
    for (std::size_t i : clusters[c].window.members) {
      if (rank[i] != 0) continue;
      rank[i] = static_cast<int>(c + 1);
      if (clusters[c].p_value) p[i] = num(*clusters[c].p_value);
    }
  CsvWriter w({"id", "x", "y", "cluster", "p_value"});
  for (std::size_t i = 0; i < sr.size(); ++i)
    w.row({sr.region(i).id, num(sr.region(i).x), num(sr.region(i).y), std::to_string(rank[i]), p[i]});
  return w.str();
}

std::string surveillance_csv(const SurveillanceReport& r) {
  CsvWriter w({"period", "llr_star", "classical_p", "adjusted_p", "z", "fdr"});
  for (const auto& p : r.periods)
    w.row({p.assessment.label, num(p.assessment.llr_star), num(p.assessment.classical_p), num(p.assessment.adjusted_p),
           num(p.z), num(p.fdr)});
  return w.str();
}

std::string fdr_histogram_csv(const FdrModel& m) {
  CsvWriter w({"bin_lo", "bin_hi", "midpoint", "count", "f", "f0"});
  const auto& d = m.fit();
  for (std::size_t b = 0; b < d.counts.size(); ++b)
    w.row({num(d.edges[b]), num(d.edges[b + 1]), num(d.grid[b]), num(d.counts[b]), num(d.f[b]),
           num(m.null_density(d.grid[b]))});
  return w.str();
}

}  // namespace scanstat
