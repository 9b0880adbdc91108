#include "gmlemix/io_json.hpp"

#include <algorithm>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "gmlemix/errors.hpp"

namespace gmlemix {

using nlohmann::json;

json to_json(const MixingDistribution& mix) {
    json atoms = json::array();
    const std::size_t dim = mix.grid ? mix.grid->dim : 2;
    if (mix.grid) {
        for (const auto& atom : mix.grid->atoms) {
            json point = json::array();
            for (std::size_t d = 0; d < dim; ++d) point.push_back(atom[d]);
            atoms.push_back(point);
        }
    }
    return json{{"atoms", atoms}, {"weights", mix.weights}};
}

MixingDistribution mixing_from_json(const json& j) {
    if (!j.contains("atoms") || !j.contains("weights"))
        throw InputError("mixing distribution JSON requires 'atoms' and 'weights'");
    auto grid = std::make_shared<ParameterGrid>();
    for (const json& point : j.at("atoms")) {
        if (point.empty() || point.size() > 2)
            throw InputError("mixing distribution JSON: atoms must have 1 or 2 coordinates");
        grid->dim = std::max(grid->dim, point.size());
        std::array<double, 2> atom{0.0, 0.0};
        for (std::size_t d = 0; d < point.size(); ++d) atom[d] = point[d].get<double>();
        grid->atoms.push_back(atom);
    }
    MixingDistribution mix;
    mix.grid = grid;
    mix.weights = j.at("weights").get<std::vector<double>>();
    validate(mix);
    return mix;
}

json to_json(const EmReport& report, bool include_trace) {
    json j{{"weights", to_json(report.weights)},
           {"final_log_likelihood", report.final_log_likelihood},
           {"iterations", report.iterations_run},
           {"fixed_point_residual", report.fixed_point_residual}};
    if (include_trace) j["loglik_trace"] = report.loglik_trace;
    return j;
}

json to_json(const EstimateSet& estimates) {
    json j;
    j["naive"] = estimates.naive.defined() ? json(*estimates.naive.value) : json(nullptr);
    j["empty_strata"] = estimates.naive.empty_strata;
    j["extreme_collapse"] = estimates.extreme_collapse.defined()
                                ? json(*estimates.extreme_collapse.value)
                                : json(nullptr);
    j["gmle"] = estimates.gmle;
    j["posterior_means"] = estimates.posterior_means;
    return j;
}

json to_json(const CiResult& result) {
    return json{{"eta_lower", result.eta_lower},
                {"eta_upper", result.eta_upper},
                {"alpha", result.alpha},
                {"constraint_slack_at_bounds",
                 {result.constraint_slack_at_bounds[0], result.constraint_slack_at_bounds[1]}},
                {"solver_iterations", result.solver_iterations}};
}

namespace {

json to_json(const EstimatorSummary& summary) {
    return json{{"mean", summary.mean}, {"sd", summary.sd}, {"undefined", summary.undefined_count}};
}

}  // namespace

json to_json(const SimResult& result) {
    json reps = json::array();
    for (const ReplicationEstimates& rep : result.per_replication) {
        json r;
        r["naive"] = rep.naive ? json(*rep.naive) : json(nullptr);
        r["extreme_collapse"] = rep.extreme_collapse ? json(*rep.extreme_collapse) : json(nullptr);
        r["gmle"] = rep.gmle;
        r["empty_strata"] = rep.empty_strata;
        reps.push_back(r);
    }
    return json{{"replications", result.replications},
                {"seed", result.seed},
                {"naive", to_json(result.naive)},
                {"extreme_collapse", to_json(result.extreme_collapse)},
                {"gmle", to_json(result.gmle)},
                {"per_replication", reps}};
}

namespace {

UniformLaw law_from_json(const json& j, const char* field) {
    if (!j.is_array() || j.size() != 2)
        throw InputError(std::string("campaign config: '") + field + "' must be [lo, hi]");
    UniformLaw law{j[0].get<double>(), j[1].get<double>()};
    if (!(law.lo <= law.hi))
        throw InputError(std::string("campaign config: '") + field + "' requires lo <= hi");
    return law;
}

CampaignFile parse_single_campaign(const json& j) {
    CampaignFile file;
    file.name = j.value("name", "campaign");

    const std::string model = j.value("model", "");
    if (model == "poisson_sizes")
        file.population.model = ModelFamily::poisson_sizes;
    else if (model == "binomial_sizes")
        file.population.model = ModelFamily::binomial_sizes;
    else
        throw InputError("campaign config: unknown model '" + model +
                         "' (expected poisson_sizes or binomial_sizes)");

    if (!j.contains("groups") || !j.at("groups").is_array() || j.at("groups").empty())
        throw InputError("campaign config: 'groups' array required");
    for (const json& g : j.at("groups")) {
        GroupSpec group;
        group.n_strata = g.value("n_strata", std::size_t(0));
        const char* axis1_name =
            file.population.model == ModelFamily::poisson_sizes ? "lambda" : "pi";
        if (!g.contains(axis1_name))
            throw InputError(std::string("campaign config: group requires '") + axis1_name + "'");
        group.axis1 = law_from_json(g.at(axis1_name), axis1_name);
        if (!g.contains("p")) throw InputError("campaign config: group requires 'p'");
        group.axis2 = law_from_json(g.at("p"), "p");
        if (file.population.model == ModelFamily::binomial_sizes)
            group.kappa = g.value("kappa", 0);
        file.population.groups.push_back(group);
    }

    if (j.contains("grid")) {
        for (const json& axis : j.at("grid").at("axes")) {
            if (!axis.is_array() || axis.size() != 3)
                throw InputError("campaign config: grid axes must be [lo, hi, count]");
            file.config.grid_axes.push_back(
                {axis[0].get<double>(), axis[1].get<double>(), axis[2].get<std::size_t>()});
        }
    } else if (file.population.model == ModelFamily::poisson_sizes) {
        file.config.grid_axes = {{0.02, 6.0, 40}, {0.02, 6.0, 40}};
    } else {
        file.config.grid_axes = {{0.0, 1.0, 40}, {0.0, 1.0, 40}};
    }

    if (j.contains("em")) {
        file.config.em.max_iters = j.at("em").value("max_iters", std::size_t(1000));
        file.config.em.stop_tol = j.at("em").value("stop_tol", 0.0);
    }
    file.config.replications = j.value("replications", std::size_t(50));
    file.config.seed = j.value("seed", std::uint64_t(1));
    if (j.contains("naive_empty_strata")) {
        const std::string rule = j.at("naive_empty_strata").get<std::string>();
        if (rule == "drop")
            file.config.naive_rule = NaiveEmptyRule::drop_empty;
        else if (rule == "impute_half")
            file.config.naive_rule = NaiveEmptyRule::impute_half;
        else
            throw InputError("campaign config: naive_empty_strata must be 'drop' or 'impute_half'");
    }

    validate(file.population);
    return file;
}

}  // namespace

std::vector<CampaignFile> parse_campaign_file(const json& j) {
    std::vector<CampaignFile> campaigns;
    if (j.is_array()) {
        for (const json& entry : j) campaigns.push_back(parse_single_campaign(entry));
    } else if (j.is_object() && j.contains("campaigns")) {
        for (const json& entry : j.at("campaigns")) campaigns.push_back(parse_single_campaign(entry));
    } else {
        campaigns.push_back(parse_single_campaign(j));
    }
    if (campaigns.empty()) throw InputError("campaign config: no campaigns found");
    return campaigns;
}

std::string format_campaign_table(const std::vector<std::string>& labels,
                                  const std::vector<SimResult>& results) {
    if (labels.size() != results.size())
        throw std::invalid_argument("format_campaign_table: label/result size mismatch");
    std::size_t width = 10;
    for (const std::string& label : labels) width = std::max(width, label.size());

    const auto cell = [](const EstimatorSummary& s) {
        char buffer[64];
        std::snprintf(buffer, sizeof(buffer), "%.3f, (%.3f)", s.mean, s.sd);
        return std::string(buffer);
    };

    std::string out;
    char line[256];
    std::snprintf(line, sizeof(line), "%-*s  %-16s  %-16s\n", int(width), "config", "naive",
                  "gmle");
    out += line;
    for (std::size_t i = 0; i < results.size(); ++i) {
        std::snprintf(line, sizeof(line), "%-*s  %-16s  %-16s\n", int(width), labels[i].c_str(),
                      cell(results[i].naive).c_str(), cell(results[i].gmle).c_str());
        out += line;
    }
    return out;
}

}  // namespace gmlemix
