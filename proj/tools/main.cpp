// gmlemix: grid-based generalized maximum likelihood estimation of mixing
// distributions for stratified count data, with simulation campaigns and
// likelihood-ratio confidence intervals.
//
// Exit codes: 0 success, 2 malformed input, 3 solver failure, 4 infeasible
// confidence region.

#include <algorithm>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gmlemix/ci.hpp"
#include "gmlemix/errors.hpp"
#include "gmlemix/estimators.hpp"
#include "gmlemix/grid.hpp"
#include "gmlemix/io_json.hpp"
#include "gmlemix/npmle.hpp"
#include "gmlemix/rng.hpp"
#include "gmlemix/sim.hpp"

namespace {

using nlohmann::json;

struct DatasetRow {
    std::string stratum_id;
    gmlemix::CountObservation obs;
};

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& line, char sep) {
    std::vector<std::string> fields;
    std::stringstream stream(line);
    std::string field;
    while (std::getline(stream, field, sep)) fields.push_back(trim(field));
    return fields;
}

int parse_count(const std::string& text, const std::string& row_context, const char* field) {
    try {
        std::size_t used = 0;
        const int value = std::stoi(text, &used);
        if (used != text.size() || value < 0) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw gmlemix::InputError(row_context + ": field '" + field + "' must be a nonnegative "
                                  "integer, got '" + text + "'");
    }
}

// CSV with required header: stratum_id,x,k
std::vector<DatasetRow> read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw gmlemix::InputError("cannot open dataset file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw gmlemix::InputError("dataset '" + path + "' is empty");
    const std::vector<std::string> header = split(line, ',');
    if (header.size() != 3 || header[0] != "stratum_id" || header[1] != "x" || header[2] != "k")
        throw gmlemix::InputError("dataset '" + path + "': header must be 'stratum_id,x,k'");

    std::vector<DatasetRow> rows;
    std::vector<std::string> seen_ids;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const std::string context = "row " + std::to_string(line_no);
        const std::vector<std::string> fields = split(line, ',');
        if (fields.size() != 3)
            throw gmlemix::InputError(context + ": expected 3 fields, got " +
                                      std::to_string(fields.size()));
        DatasetRow row;
        row.stratum_id = fields[0];
        if (row.stratum_id.empty()) throw gmlemix::InputError(context + ": empty stratum_id");
        row.obs.x = parse_count(fields[1], context, "x");
        row.obs.k = parse_count(fields[2], context, "k");
        if (row.obs.x > row.obs.k)
            throw gmlemix::InputError(context + " (stratum '" + row.stratum_id +
                                      "'): x > k is inconsistent");
        rows.push_back(row);
    }
    if (rows.empty()) throw gmlemix::InputError("dataset '" + path + "' has no data rows");

    std::vector<std::string> ids;
    ids.reserve(rows.size());
    for (const DatasetRow& row : rows) ids.push_back(row.stratum_id);
    std::sort(ids.begin(), ids.end());
    const auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end())
        throw gmlemix::InputError("dataset '" + path + "': duplicate stratum_id '" + *dup + "'");
    return rows;
}

std::vector<gmlemix::AxisSpec> parse_grid_flag(const std::string& text) {
    std::vector<gmlemix::AxisSpec> axes;
    for (const std::string& part : split(text, ',')) {
        const std::vector<std::string> pieces = split(part, ':');
        if (pieces.size() != 3)
            throw gmlemix::InputError("--grid: each axis must be lo:hi:count, got '" + part + "'");
        try {
            axes.push_back({std::stod(pieces[0]), std::stod(pieces[1]),
                            std::size_t(std::stoul(pieces[2]))});
        } catch (const std::exception&) {
            throw gmlemix::InputError("--grid: cannot parse axis '" + part + "'");
        }
    }
    return axes;
}

struct ModelChoice {
    gmlemix::ModelKernel kernel;
    std::vector<gmlemix::AxisSpec> default_axes;
};

ModelChoice resolve_model(const std::string& name, int kappa,
                          const std::vector<gmlemix::CountObservation>& data) {
    if (name == "poisson") {
        const auto [lo, hi] = gmlemix::default_xi_range(data);
        return {gmlemix::ModelKernel::poisson_stratum(),
                {{lo, hi, 40}, {lo, hi, 40}}};
    }
    if (name == "binomial") {
        if (kappa < 1)
            throw gmlemix::InputError("--model binomial requires --kappa >= 1");
        return {gmlemix::ModelKernel::binomial_stratum(kappa), {{0.0, 1.0, 40}, {0.0, 1.0, 40}}};
    }
    throw gmlemix::InputError("unknown model '" + name + "' (expected poisson or binomial)");
}

// Keep each row as a stratum but retain each sampled individual independently
// with probability gamma: x' ~ B(x, gamma), (k'-x') ~ B(k-x, gamma). Under
// Poisson sample sizes this turns rate lambda into gamma*lambda.
std::vector<DatasetRow> thin_dataset(const std::vector<DatasetRow>& rows, double gamma,
                                     std::uint64_t seed) {
    if (!(gamma > 0.0 && gamma <= 1.0))
        throw gmlemix::InputError("--retain-prob must lie in (0, 1]");
    std::vector<DatasetRow> thinned = rows;
    gmlemix::RngStream rng = gmlemix::RngStream::root(seed).child(0x7411);
    for (DatasetRow& row : thinned) {
        const int kept_x = rng.binomial(row.obs.x, gamma);
        const int kept_fail = rng.binomial(row.obs.k - row.obs.x, gamma);
        row.obs = {kept_x, kept_x + kept_fail};
    }
    return thinned;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw gmlemix::InputError("cannot write output file '" + path + "'");
    out << text;
}

std::size_t resolve_threads(std::size_t flag_value) {
    if (flag_value > 0) return flag_value;
    if (const char* env = std::getenv("GMLE_MIX_THREADS")) {
        const long parsed = std::strtol(env, nullptr, 10);
        if (parsed > 0) return std::size_t(parsed);
    }
    return 0;  // let the library pick hardware concurrency
}

std::vector<gmlemix::CountObservation> observations(const std::vector<DatasetRow>& rows) {
    std::vector<gmlemix::CountObservation> data;
    data.reserve(rows.size());
    for (const DatasetRow& row : rows) data.push_back(row.obs);
    return data;
}

// --- subcommands -------------------------------------------------------------

struct FitOptions {
    std::string data_path;
    std::string model = "poisson";
    int kappa = 0;
    std::string grid_flag;
    std::size_t iters = 1000;
    double stop_tol = 0.0;
    std::uint64_t seed = 1;
    double retain_prob = 1.0;
    std::string output;
    std::string posterior_csv;
    bool include_trace = false;
};

int cmd_fit(const FitOptions& opt) {
    std::vector<DatasetRow> rows = read_dataset(opt.data_path);
    if (opt.retain_prob < 1.0) rows = thin_dataset(rows, opt.retain_prob, opt.seed);
    const std::vector<gmlemix::CountObservation> data = observations(rows);

    const ModelChoice model = resolve_model(opt.model, opt.kappa, data);
    const std::vector<gmlemix::AxisSpec> axes =
        opt.grid_flag.empty() ? model.default_axes : parse_grid_flag(opt.grid_flag);
    const gmlemix::GridPtr grid = gmlemix::make_product_grid(axes);

    const gmlemix::LikelihoodMatrix matrix =
        gmlemix::build_likelihood_matrix(model.kernel, data, *grid);
    const gmlemix::EmConfig em{opt.iters, opt.stop_tol};
    const gmlemix::EmReport report = gmlemix::em_fit_uniform(matrix, grid, em);
    const std::vector<double> etas = gmlemix::eta_values(model.kernel, *grid);

    gmlemix::EstimateSet estimates;
    estimates.naive = gmlemix::naive_estimator(data);
    estimates.extreme_collapse = gmlemix::extreme_collapse_estimator(data);
    estimates.gmle = gmlemix::gmle_plug_in(report.weights, etas);
    estimates.posterior_means = gmlemix::posterior_means(matrix, report.weights.weights, etas);

    std::cout << "strata: " << data.size() << " (" << estimates.naive.empty_strata
              << " empty)\n";
    if (estimates.naive.defined())
        std::cout << "naive: " << *estimates.naive.value << "\n";
    else
        std::cout << "naive: undefined (" << estimates.naive.empty_strata
                  << " empty strata)\n";
    if (estimates.extreme_collapse.defined())
        std::cout << "extreme_collapse: " << *estimates.extreme_collapse.value << "\n";
    else
        std::cout << "extreme_collapse: undefined\n";
    std::cout << "gmle: " << estimates.gmle << "\n";

    if (!opt.output.empty()) {
        json report_json;
        report_json["model"] = opt.model;
        report_json["seed"] = opt.seed;
        if (opt.retain_prob < 1.0) report_json["retain_prob"] = opt.retain_prob;
        report_json["grid_axes"] = json::array();
        for (const auto& axis : axes)
            report_json["grid_axes"].push_back({axis.lo, axis.hi, axis.count});
        report_json["estimates"] = gmlemix::to_json(estimates);
        report_json["em"] = gmlemix::to_json(report, opt.include_trace);
        write_text_file(opt.output, report_json.dump(2) + "\n");
    }
    if (!opt.posterior_csv.empty()) {
        std::ostringstream csv;
        csv << "stratum_id,x,k,posterior_mean\n";
        csv.precision(17);
        for (std::size_t i = 0; i < rows.size(); ++i)
            csv << rows[i].stratum_id << ',' << rows[i].obs.x << ',' << rows[i].obs.k << ','
                << estimates.posterior_means[i] << '\n';
        write_text_file(opt.posterior_csv, csv.str());
    }
    return 0;
}

struct CiOptions {
    std::string data_path;
    std::string model = "poisson";
    int kappa = 0;
    std::string grid_flag;
    std::size_t iters = 1000;
    double alpha = 0.05;
    std::string output;
};

int cmd_ci(const CiOptions& opt) {
    const std::vector<DatasetRow> rows = read_dataset(opt.data_path);
    const std::vector<gmlemix::CountObservation> data = observations(rows);

    const ModelChoice model = resolve_model(opt.model, opt.kappa, data);
    const std::vector<gmlemix::AxisSpec> axes =
        opt.grid_flag.empty() ? model.default_axes : parse_grid_flag(opt.grid_flag);
    const gmlemix::GridPtr grid = gmlemix::make_product_grid(axes);

    const gmlemix::CellScheme scheme = gmlemix::default_cell_scheme(model.kernel, data);
    const gmlemix::CellCounts counts = gmlemix::tabulate_cells(scheme, data);
    const gmlemix::CellMatrix cells = gmlemix::cell_probabilities(model.kernel, *grid, scheme);
    const std::vector<double> etas = gmlemix::eta_values(model.kernel, *grid);

    const gmlemix::CiResult result = gmlemix::ci_bounds(cells, counts, etas, opt.alpha);

    std::cout << "eta in [" << result.eta_lower << ", " << result.eta_upper << "] at level "
              << 1.0 - opt.alpha << " (" << scheme.cell_count() << " cells)\n";
    if (!opt.output.empty()) {
        json j = gmlemix::to_json(result);
        j["cells"] = scheme.cell_count();
        write_text_file(opt.output, j.dump(2) + "\n");
    }
    return 0;
}

struct SimulateOptions {
    std::string config_path;
    std::string output_dir;
    std::size_t threads = 0;
};

int cmd_simulate(const SimulateOptions& opt) {
    std::ifstream in(opt.config_path);
    if (!in) throw gmlemix::InputError("cannot open config file '" + opt.config_path + "'");
    json config_json;
    try {
        in >> config_json;
    } catch (const json::exception& e) {
        throw gmlemix::InputError("config '" + opt.config_path + "': " + e.what());
    }

    std::vector<gmlemix::CampaignFile> campaigns = gmlemix::parse_campaign_file(config_json);
    std::vector<std::string> labels;
    std::vector<gmlemix::SimResult> results;
    for (gmlemix::CampaignFile& campaign : campaigns) {
        campaign.config.threads = resolve_threads(opt.threads);
        const gmlemix::SimResult result =
            gmlemix::run_campaign(campaign.population, campaign.config);
        labels.push_back(campaign.name);
        results.push_back(result);
        if (!opt.output_dir.empty()) {
            json j = gmlemix::to_json(result);
            j["name"] = campaign.name;
            j["true_eta"] = gmlemix::true_eta(campaign.population);
            write_text_file(opt.output_dir + "/" + campaign.name + ".json", j.dump(2) + "\n");
        }
    }
    std::cout << gmlemix::format_campaign_table(labels, results);
    return 0;
}

struct ProbeOptions {
    std::string model = "poisson";
    int kappa = 1;
    std::string theta_flag = "2,0.4;1,0.6";
    std::string schedule_flag = "100,400,1600";
    std::string grid_flag;
    std::size_t iters = 1000;
    std::uint64_t seed = 1;
};

int cmd_probe(const ProbeOptions& opt) {
    const gmlemix::ModelFamily family = opt.model == "poisson"
                                            ? gmlemix::ModelFamily::poisson_sizes
                                            : gmlemix::ModelFamily::binomial_sizes;
    if (opt.model != "poisson" && opt.model != "binomial")
        throw gmlemix::InputError("unknown model '" + opt.model + "'");

    std::vector<gmlemix::StratumParam> thetas;
    for (const std::string& entry : split(opt.theta_flag, ';')) {
        const std::vector<std::string> pair = split(entry, ',');
        if (pair.size() != 2)
            throw gmlemix::InputError("--theta entries must be 'axis1,p', got '" + entry + "'");
        thetas.push_back({std::stod(pair[0]), std::stod(pair[1]), opt.kappa});
    }

    std::vector<std::size_t> schedule;
    for (const std::string& entry : split(opt.schedule_flag, ','))
        schedule.push_back(std::size_t(std::stoul(entry)));

    gmlemix::ProbeConfig config;
    config.em.max_iters = opt.iters;
    if (!opt.grid_flag.empty()) {
        config.grid_axes = parse_grid_flag(opt.grid_flag);
    } else if (family == gmlemix::ModelFamily::poisson_sizes) {
        config.grid_axes = {{0.02, 6.0, 40}, {0.02, 6.0, 40}};
    } else {
        config.grid_axes = {{0.0, 1.0, 40}, {0.0, 1.0, 40}};
    }

    const std::vector<gmlemix::ProbePoint> points =
        gmlemix::weak_convergence_probe(thetas, family, config, schedule, opt.seed);
    std::cout << "seed: " << opt.seed << "\n";
    for (const gmlemix::ProbePoint& point : points)
        std::cout << "n=" << point.n << " max_discrepancy=" << point.max_discrepancy
                  << " mean1=" << point.per_function[0] << " mean2=" << point.per_function[1]
                  << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grid-based GMLE of mixing distributions for stratified count data"};
    app.require_subcommand(1);

    FitOptions fit;
    CLI::App* fit_cmd = app.add_subcommand("fit", "Fit the grid GMLE to a CSV dataset");
    fit_cmd->add_option("data", fit.data_path, "CSV file with header stratum_id,x,k")->required();
    fit_cmd->add_option("--model", fit.model, "poisson (post-stratification) or binomial");
    fit_cmd->add_option("--kappa", fit.kappa, "design sample size per stratum (binomial model)");
    fit_cmd->add_option("--grid", fit.grid_flag,
                        "grid axes lo:hi:count[,lo:hi:count]; the default range is a "
                        "convention, not a fitted quantity");
    fit_cmd->add_option("--iters", fit.iters, "EM iterations (default 1000)");
    fit_cmd->add_option("--stop-tol", fit.stop_tol,
                        "stop when the log-likelihood gain drops below this (0 disables)");
    fit_cmd->add_option("--seed", fit.seed, "random seed (used by --retain-prob thinning)");
    fit_cmd->add_option("--retain-prob", fit.retain_prob,
                        "keep each sampled individual with this probability before fitting");
    fit_cmd->add_option("--output", fit.output, "write the fit report as JSON");
    fit_cmd->add_option("--posterior-csv", fit.posterior_csv,
                        "write per-stratum posterior means as CSV");
    fit_cmd->add_flag("--trace", fit.include_trace, "include the log-likelihood trace in the JSON");

    CiOptions ci;
    CLI::App* ci_cmd = app.add_subcommand("ci", "Likelihood-ratio confidence interval for eta");
    ci_cmd->add_option("data", ci.data_path, "CSV file with header stratum_id,x,k")->required();
    ci_cmd->add_option("--model", ci.model, "poisson or binomial");
    ci_cmd->add_option("--kappa", ci.kappa, "design sample size per stratum (binomial model)");
    ci_cmd->add_option("--grid", ci.grid_flag, "grid axes lo:hi:count[,lo:hi:count]");
    ci_cmd->add_option("--iters", ci.iters, "EM iterations for diagnostics");
    ci_cmd->add_option("--alpha", ci.alpha, "1 - confidence level (default 0.05)");
    ci_cmd->add_option("--output", ci.output, "write the interval as JSON");

    SimulateOptions simulate;
    CLI::App* sim_cmd = app.add_subcommand("simulate", "Run Monte-Carlo campaigns from a config");
    sim_cmd->add_option("config", simulate.config_path, "campaign config JSON")->required();
    sim_cmd->add_option("--output", simulate.output_dir, "directory for per-campaign JSON files");
    sim_cmd->add_option("--threads", simulate.threads,
                        "worker threads (falls back to GMLE_MIX_THREADS, then all cores)");

    ProbeOptions probe;
    CLI::App* probe_cmd =
        app.add_subcommand("probe-convergence", "Empirical weak-convergence probe");
    probe_cmd->add_option("--model", probe.model, "poisson or binomial");
    probe_cmd->add_option("--kappa", probe.kappa, "design sample size (binomial model)");
    probe_cmd->add_option("--theta", probe.theta_flag, "base parameters 'axis1,p;axis1,p;...'");
    probe_cmd->add_option("--schedule", probe.schedule_flag, "sample sizes n1,n2,...");
    probe_cmd->add_option("--grid", probe.grid_flag, "grid axes lo:hi:count[,lo:hi:count]");
    probe_cmd->add_option("--iters", probe.iters, "EM iterations");
    probe_cmd->add_option("--seed", probe.seed, "random seed");

    try {
        app.parse(argc, argv);
        if (fit_cmd->parsed()) return cmd_fit(fit);
        if (ci_cmd->parsed()) return cmd_ci(ci);
        if (sim_cmd->parsed()) return cmd_simulate(simulate);
        if (probe_cmd->parsed()) return cmd_probe(probe);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const gmlemix::InfeasibleRegionError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    } catch (const gmlemix::SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const gmlemix::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
