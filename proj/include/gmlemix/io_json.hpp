#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "gmlemix/ci.hpp"
#include "gmlemix/estimators.hpp"
#include "gmlemix/grid.hpp"
#include "gmlemix/npmle.hpp"
#include "gmlemix/sim.hpp"

// JSON persistence for the public result types plus the campaign config
// schema consumed by the simulate command.

namespace gmlemix {

nlohmann::json to_json(const MixingDistribution& mix);
MixingDistribution mixing_from_json(const nlohmann::json& j);

nlohmann::json to_json(const EmReport& report, bool include_trace = false);
nlohmann::json to_json(const EstimateSet& estimates);
nlohmann::json to_json(const CiResult& result);
nlohmann::json to_json(const SimResult& result);

// One campaign: a named population plus the run protocol.
struct CampaignFile {
    std::string name;
    PopulationSpec population;
    CampaignConfig config;
};

// Accepts either a single campaign object or an array of them.
std::vector<CampaignFile> parse_campaign_file(const nlohmann::json& j);

// Plain-text table of campaign results: one row per campaign, estimator
// columns formatted "mean, (sd)".
std::string format_campaign_table(const std::vector<std::string>& labels,
                                  const std::vector<SimResult>& results);

}  // namespace gmlemix
