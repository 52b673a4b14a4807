#pragma once

// Run configuration: a JSON object of sections, every key with a default.
// Files and --set overrides may only touch keys that exist in the defaults.

#include <filesystem>
#include <string_view>

#include "json.hpp"

#include "scanstat/adjusted_scan.hpp"
#include "scanstat/fdr.hpp"
#include "scanstat/glmm.hpp"
#include "scanstat/harness.hpp"
#include "scanstat/theory.hpp"

namespace scanstat {

using Json = nlohmann::json;

Json default_config();

// Merges a JSON file into the defaults. Unknown sections or keys and type
// mismatches are InputErrors.
void merge_config_file(Json& cfg, const std::filesystem::path& file);
void merge_config(Json& cfg, const Json& user, std::string_view origin);

// "section.key=value"; the value is read as JSON when it parses, otherwise as
// a string. A scalar given for a list key becomes a one-element list.
void apply_override(Json& cfg, std::string_view assignment);

PriorSpec prior_from(const Json& cfg);
McmcConfig mcmc_from(const Json& cfg);
MaternForm form_from(const Json& cfg);
AdjustedConfig adjusted_from(const Json& cfg);
FdrConfig fdr_from(const Json& cfg);
ExperimentConfig experiment_from(const Json& cfg);
Prop2Setup prop2_from(const Json& cfg);

}  // namespace scanstat
