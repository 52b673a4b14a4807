#pragma once

// Simulation studies of the scan's false-alarm rate, the multi-period
// surveillance workflow, and synthetic geometries.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scanstat/adjusted_scan.hpp"
#include "scanstat/fdr.hpp"
#include "scanstat/glmm.hpp"
#include "scanstat/matern.hpp"
#include "scanstat/region_model.hpp"

namespace scanstat {

struct BoundingBox {
  double xmin = 8.0, xmax = 162.0, ymin = 8.0, ymax = 162.0;
};

struct Geometry {
  std::vector<Region> regions;
  std::vector<double> population;
};

// Uniform centroids in the box, lognormal populations. Ids are "S001", ...
Geometry synth_geometry(std::size_t m, const BoundingBox& box, std::uint64_t seed, double pop_meanlog,
                        double pop_sdlog);

// Single-period study region over a geometry.
StudyRegion make_study_region(const Geometry& g, std::vector<Count> cases, std::string label = "all");

// Lower factor of the Matern covariance; all zeros when sigma is 0.
CovFactor field_factor(const DistanceMatrix& dm, double sigma, double rho, double nu,
                       MaternForm form = MaternForm::standard);

// Shorter chains than a standalone fit: every replicate of a fitted study runs one.
McmcConfig study_mcmc_defaults();

enum class StudyMode { classical, adjusted_fitted, adjusted_true_params };
std::string to_string(StudyMode m);
StudyMode study_mode_from_string(const std::string& s);

struct ExperimentConfig {
  // Geometry: file (geo + one pop column) or synthetic.
  std::optional<Geometry> geometry;
  std::size_t sites = 32;
  BoundingBox box;
  std::uint64_t geometry_seed = 7;
  double pop_meanlog = 2.70805020110221;  // log 15
  double pop_sdlog = 1.2;

  std::optional<double> beta;   // default log(expected_total / N_G)
  double expected_total = 1175.0;
  std::vector<double> sigma{0.1};
  std::vector<double> rho{50.0};
  std::vector<double> nu{1.0};
  std::vector<double> alphas{0.01, 0.05, 0.1};
  int replicates = 200;
  int mc_size = 199;
  double max_fraction = 0.5;
  StudyMode mode = StudyMode::classical;
  MaternForm form = MaternForm::standard;
  PriorSpec prior;
  McmcConfig mcmc = study_mcmc_defaults();
  std::uint64_t seed = 1;
  int threads = 0;

  void validate() const;
};

struct ProportionRow {
  double sigma = 0, rho = 0, nu = 0, alpha = 0;
  StudyMode mode = StudyMode::classical;
  int count = 0;      // replicates with p <= alpha
  int n = 0;          // replicates that completed
  int dropped = 0;    // replicates whose fit failed
  double proportion = 0;
  double se = 0;
};

struct ReplicateRecord {
  double sigma = 0, rho = 0, nu = 0;
  int replicate = 0;
  StudyMode mode = StudyMode::classical;
  bool ok = true;
  std::string error;
  Count total_cases = 0;
  double llr_star = 0;
  double p_value = 1;
  double beta_sim = 0;
  std::optional<PosteriorMeans> fit;
};

struct ProportionTable {
  std::vector<ProportionRow> rows;
  std::vector<ReplicateRecord> archive;
  double beta = 0;  // generating intercept
};

// Rebuilds the table from archived p-values.
ProportionTable tabulate(std::vector<ReplicateRecord> archive, const std::vector<double>& alphas, double beta);

// Replicate r of cell c draws its data from derive_seed(seed, {c, r}), so all
// modes see the same datasets.
ProportionTable type1_study(const ExperimentConfig& cfg);
ProportionTable adjusted_study(const ExperimentConfig& cfg);
ProportionTable run_study(const ExperimentConfig& cfg);

Geometry study_geometry(const ExperimentConfig& cfg);
double study_beta(const ExperimentConfig& cfg, const Geometry& g);

struct SurveillancePeriod {
  PeriodAssessment assessment;
  double z = 0;
  double fdr = 1;
  bool fdr_clamped = false;
};

struct SurveillanceReport {
  TrainTestResult train_test;
  std::vector<SurveillancePeriod> periods;
  bool fdr_fitted = false;
  std::string fdr_note;
  std::optional<FdrModel> fdr_model;
};

// Fewer than 30 test periods: no empirical null, fdr reported as 1.
SurveillanceReport surveillance_run(const StudyRegion& sr, const DistanceMatrix& dm,
                                    const std::vector<std::size_t>& train_periods,
                                    const std::vector<std::size_t>& test_periods, double max_fraction,
                                    const AdjustedConfig& cfg, const FdrConfig& fdr_cfg);

}  // namespace scanstat
