#pragma once

// JSON and CSV renderings of results. Region indices are translated to ids
// whenever a StudyRegion is supplied.

#include <span>
#include <string>
#include <vector>

#include "scanstat/adjusted_scan.hpp"
#include "scanstat/config.hpp"
#include "scanstat/fdr.hpp"
#include "scanstat/glmm.hpp"
#include "scanstat/harness.hpp"
#include "scanstat/scan.hpp"
#include "scanstat/theory.hpp"

namespace scanstat {

Json to_json(const ClusterReport& c, const StudyRegion& sr);
Json to_json(const ScanResult& r, const StudyRegion& sr);
Json to_json(const ParameterSummary& s);
Json to_json(const PosteriorMeans& m);
Json to_json(const McmcConfig& c);
// Summaries only; draws go to draws_csv.
Json to_json(const ModelIIFit& f);
Json to_json(const ReferenceSummary& s);
Json to_json(const AdjustedScanResult& r, const StudyRegion& sr);
Json to_json(const PeriodAssessment& p, const StudyRegion& sr);
Json to_json(const SurveillanceReport& r, const StudyRegion& sr);
Json to_json(const ProportionTable& t);
Json to_json(const TailComparison& t);
Json to_json(const Prop2Report& r);
Json to_json(const Prop1Result& r);
Json to_json(const FdrModel& m);

std::string draws_csv(const ModelIIFit& f);
std::string reference_csv(std::span<const double> reference);
std::string table_csv(const ProportionTable& t);
std::string archive_csv(const ProportionTable& t);
// One row per region: id, x, y, and the rank of the cluster holding it (0 = none).
std::string cluster_map_csv(const StudyRegion& sr, const std::vector<ClusterReport>& clusters);
std::string surveillance_csv(const SurveillanceReport& r);
std::string fdr_histogram_csv(const FdrModel& m);

}  // namespace scanstat
