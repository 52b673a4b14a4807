#include "scanstat/config.hpp"

#include <cmath>
#include <string>

#include "scanstat/errors.hpp"
#include "scanstat/io.hpp"
#include "scanstat/region_model.hpp"

namespace scanstat {

Json default_config() {
  const McmcConfig mc;
  const McmcConfig smc = study_mcmc_defaults();
  const ExperimentConfig ex;
  return Json{
      {"run", {{"seed", 1}, {"threads", 0}, {"out_dir", "out"}, {"strict", false}}},
      {"data",
       {{"geo", ""},
        {"pop", ""},
        {"cas", ""},
        {"period", ""},
        {"train", Json::array()},
        {"test", Json::array()},
        {"max_fraction", 0.5}}},
      {"scan", {{"mc_size", 999}}},
      {"matern", {{"nu", 1.0}, {"form", "standard"}}},
      {"prior", {{"rho_max", 70}}},
      {"mcmc",
       {{"iterations", mc.iterations},
        {"burn_in", mc.burn_in},
        {"thin", mc.thin},
        {"rho_every", mc.rho_every},
        {"adapt_batch", mc.adapt_batch},
        {"target_accept", mc.target_accept},
        {"sigma_init", mc.sigma_init},
        {"divergence_window", mc.divergence_window},
        {"divergence_factor", mc.divergence_factor},
        {"chains", 1},
        {"write_draws", true}}},
      {"adjusted",
       {{"alpha_screen", 0.1},
        {"alpha", 0.05},
        {"mc_size", 999},
        {"max_iter", 5},
        {"recenter_beta", true},
        {"posterior_mixing", false}}},
      {"fdr",
       {{"input", ""},
        {"bins", 0},
        {"spline_df", 5},
        {"halfwidth", 1.0},
        {"cutoff", 0.1},
        {"p0_bound", 0.9},
        {"mc_size", 0}}},
      {"study",
       {{"geo", ""},
        {"pop", ""},
        {"sites", ex.sites},
        {"bbox", {ex.box.xmin, ex.box.xmax, ex.box.ymin, ex.box.ymax}},
        {"geometry_seed", ex.geometry_seed},
        {"pop_meanlog", ex.pop_meanlog},
        {"pop_sdlog", ex.pop_sdlog},
        {"beta", nullptr},
        {"expected_total", ex.expected_total},
        {"sigma", ex.sigma},
        {"rho", ex.rho},
        {"nu", ex.nu},
        {"alphas", ex.alphas},
        {"replicates", ex.replicates},
        {"mc_size", ex.mc_size},
        {"max_fraction", ex.max_fraction},
        {"mode", "classical"},
        {"iterations", smc.iterations},
        {"burn_in", smc.burn_in},
        {"thin", smc.thin}}},
      {"theory",
       {{"k", 12},
        {"beta", 0.5},
        {"populations", {4.0}},
        {"sigma2", {{0.49}}},
        {"n_grid", {1e2, 1e3, 1e4}},
        {"nodes", 96},
        {"lambdas", {1.0, 2.0, 5.0, 10.0, 20.0}},
        {"k_min", 2},
        {"k_max", 40},
        {"mc_k", 14},
        {"mc_beta", 0.0},
        {"mc_populations", {3.0, 2.0, 4.0}},
        {"mc_sigma2", {{0.49, 0.3, 0.2}, {0.3, 0.49, 0.3}, {0.2, 0.3, 0.49}}},
        {"mc_samples", 400000}}},
      {"synth",
       {{"m", 32},
        {"bbox", {8.0, 162.0, 8.0, 162.0}},
        {"seed", 7},
        {"pop_meanlog", ex.pop_meanlog},
        {"pop_sdlog", ex.pop_sdlog},
        {"periods", 0},
        {"beta", nullptr},
        {"expected_total", 1175.0},
        {"sigma", 0.1},
        {"rho", 50.0},
        {"nu", 1.0}}},
  };
}

namespace {

bool compatible(const Json& def, const Json& v) {
  if (def.is_null()) return v.is_null() || v.is_number();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) return v.is_array();
  return false;
}

void set_key(Json& cfg, const std::string& section, const std::string& key, Json value, std::string_view origin) {
  if (!cfg.contains(section)) throw InputError(std::string(origin) + ": unknown config section '" + section + "'");
  Json& sec = cfg[section];
  if (!sec.contains(key)) throw InputError(std::string(origin) + ": unknown config key '" + section + "." + key + "'");
  Json& slot = sec[key];
  if (slot.is_array() && !value.is_array()) value = Json::array({value});
  if (!compatible(slot, value))
    throw InputError(std::string(origin) + ": '" + section + "." + key + "' expects a value like " + slot.dump() +
                     ", got " + value.dump());
  if (slot.is_number_integer() && value.is_number_float()) {
    const double d = value.get<double>();
    if (d != std::floor(d)) throw InputError(std::string(origin) + ": '" + section + "." + key + "' must be an integer");
    value = static_cast<long long>(d);
  }
  slot = std::move(value);
}

}  // namespace

void merge_config(Json& cfg, const Json& user, std::string_view origin) {
  if (!user.is_object()) throw InputError(std::string(origin) + ": config must be a JSON object of sections");
  for (const auto& [section, body] : user.items()) {
    if (!body.is_object()) throw InputError(std::string(origin) + ": section '" + section + "' must be an object");
    for (const auto& [key, value] : body.items()) set_key(cfg, section, key, value, origin);
  }
}

void merge_config_file(Json& cfg, const std::filesystem::path& file) {
  Json user;
  try {
    user = Json::parse(read_text(file));
  } catch (const Json::parse_error& e) {
    throw InputError(file.string() + ": " + e.what());
  }
  merge_config(cfg, user, file.string());
}

void apply_override(Json& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string_view::npos || dot == std::string_view::npos || dot > eq)
    throw InputError("--set expects section.key=value, got '" + std::string(assignment) + "'");
  const std::string section(assignment.substr(0, dot));
  const std::string key(assignment.substr(dot + 1, eq - dot - 1));
  const std::string raw(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  // Labels such as "1991" stay strings where a string is expected.
  if (cfg.contains(section) && cfg[section].contains(key) && cfg[section][key].is_string()) value = raw;
  set_key(cfg, section, key, std::move(value), "--set");
}

PriorSpec prior_from(const Json& cfg) {
  PriorSpec p;
  p.rho_max = cfg["prior"]["rho_max"].get<int>();
  return p;
}

McmcConfig mcmc_from(const Json& cfg) {
  const Json& s = cfg["mcmc"];
  McmcConfig m;
  m.iterations = s["iterations"].get<long>();
  m.burn_in = s["burn_in"].get<long>();
  m.thin = s["thin"].get<long>();
  m.rho_every = s["rho_every"].get<int>();
  m.adapt_batch = s["adapt_batch"].get<int>();
  m.target_accept = s["target_accept"].get<double>();
  m.sigma_init = s["sigma_init"].get<double>();
  m.divergence_window = s["divergence_window"].get<long>();
  m.divergence_factor = s["divergence_factor"].get<double>();
  return m;
}

MaternForm form_from(const Json& cfg) {
  const auto f = cfg["matern"]["form"].get<std::string>();
  if (f == "standard") return MaternForm::standard;
  if (f == "scaled_power") return MaternForm::scaled_power;
  throw InputError("matern.form must be 'standard' or 'scaled_power', got '" + f + "'");
}

AdjustedConfig adjusted_from(const Json& cfg) {
  const Json& s = cfg["adjusted"];
  AdjustedConfig a;
  a.alpha_screen = s["alpha_screen"].get<double>();
  a.alpha = s["alpha"].get<double>();
  a.mc_size = s["mc_size"].get<int>();
  a.max_iter = s["max_iter"].get<int>();
  a.recenter_beta = s["recenter_beta"].get<bool>();
  a.posterior_mixing = s["posterior_mixing"].get<bool>();
  a.prior = prior_from(cfg);
  a.nu = cfg["matern"]["nu"].get<double>();
  a.form = form_from(cfg);
  a.mcmc = mcmc_from(cfg);
  a.seed = cfg["run"]["seed"].get<std::uint64_t>();
  a.threads = cfg["run"]["threads"].get<int>();
  return a;
}

FdrConfig fdr_from(const Json& cfg) {
  const Json& s = cfg["fdr"];
  FdrConfig f;
  f.bins = s["bins"].get<int>();
  f.spline_df = s["spline_df"].get<int>();
  f.halfwidth = s["halfwidth"].get<double>();
  f.cutoff = s["cutoff"].get<double>();
  f.p0_bound = s["p0_bound"].get<double>();
  return f;
}

ExperimentConfig experiment_from(const Json& cfg) {
  const Json& s = cfg["study"];
  ExperimentConfig e;
  const auto geo = s["geo"].get<std::string>();
  const auto pop = s["pop"].get<std::string>();
  if (!geo.empty() || !pop.empty()) {
    if (geo.empty() || pop.empty()) throw InputError("study.geo and study.pop must be given together");
    // The loader wants a case file; an empty one gives zero counts everywhere.
    const auto empty_cas = std::filesystem::temp_directory_path() / ("scanstat-empty-" + content_hash(geo + pop) + ".txt");
    write_atomic(empty_cas, "");
    const StudyRegion sr = load_study_region(geo, pop, empty_cas);
    std::filesystem::remove(empty_cas);
    Geometry g;
    g.regions.assign(sr.regions().begin(), sr.regions().end());
    g.population.assign(sr.population(0).begin(), sr.population(0).end());
    e.geometry = std::move(g);
  }
  e.sites = s["sites"].get<std::size_t>();
  const auto bb = s["bbox"].get<std::vector<double>>();
  if (bb.size() != 4) throw InputError("study.bbox needs [xmin, xmax, ymin, ymax]");
  e.box = {bb[0], bb[1], bb[2], bb[3]};
  e.geometry_seed = s["geometry_seed"].get<std::uint64_t>();
  e.pop_meanlog = s["pop_meanlog"].get<double>();
  e.pop_sdlog = s["pop_sdlog"].get<double>();
  if (!s["beta"].is_null()) e.beta = s["beta"].get<double>();
  e.expected_total = s["expected_total"].get<double>();
  e.sigma = s["sigma"].get<std::vector<double>>();
  e.rho = s["rho"].get<std::vector<double>>();
  e.nu = s["nu"].get<std::vector<double>>();
  e.alphas = s["alphas"].get<std::vector<double>>();
  e.replicates = s["replicates"].get<int>();
  e.mc_size = s["mc_size"].get<int>();
  e.max_fraction = s["max_fraction"].get<double>();
  e.mode = study_mode_from_string(s["mode"].get<std::string>());
  e.form = form_from(cfg);
  e.prior = prior_from(cfg);
  e.mcmc = mcmc_from(cfg);
  e.mcmc.iterations = s["iterations"].get<long>();
  e.mcmc.burn_in = s["burn_in"].get<long>();
  e.mcmc.thin = s["thin"].get<long>();
  e.seed = cfg["run"]["seed"].get<std::uint64_t>();
  e.threads = cfg["run"]["threads"].get<int>();
  return e;
}

namespace {

Eigen::MatrixXd matrix_from(const Json& j, std::size_t n, const std::string& name) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.size() != n) throw InputError(name + " must be " + std::to_string(n) + " x " + std::to_string(n));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw InputError(name + " must be square");
    for (std::size_t k = 0; k < n; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  }
  return m;
}

}  // namespace

Prop2Setup prop2_from(const Json& cfg) {
  const Json& s = cfg["theory"];
  Prop2Setup p;
  p.k = s["k"].get<Count>();
  p.beta = s["beta"].get<double>();
  p.populations = s["populations"].get<std::vector<double>>();
  p.base_sigma = matrix_from(s["sigma2"], p.populations.size(), "theory.sigma2");
  p.n_grid = s["n_grid"].get<std::vector<double>>();
  return p;
}

}  // namespace scanstat
