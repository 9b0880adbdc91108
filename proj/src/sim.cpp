#include "gmlemix/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>

#include "gmlemix/errors.hpp"

namespace gmlemix {

std::size_t PopulationSpec::total_strata() const {
    std::size_t total = 0;
    for (const GroupSpec& group : groups) total += group.n_strata;
    return total;
}

void validate(const PopulationSpec& spec) {
    if (spec.groups.empty() || spec.total_strata() == 0)
        throw InputError("population spec: at least one stratum required");
    for (const GroupSpec& group : spec.groups) {
        if (!(group.axis1.lo <= group.axis1.hi) || !(group.axis2.lo <= group.axis2.hi))
            throw InputError("population spec: uniform laws require lo <= hi");
        if (!(group.axis2.lo >= 0.0 && group.axis2.hi <= 1.0))
            throw InputError("population spec: p laws must stay in [0, 1]");
        if (spec.model == ModelFamily::poisson_sizes) {
            if (group.axis1.lo < 0.0)
                throw InputError("population spec: lambda laws must be nonnegative");
        } else {
            if (!(group.axis1.lo >= 0.0 && group.axis1.hi <= 1.0))
                throw InputError("population spec: pi laws must stay in [0, 1]");
            if (group.kappa < 1)
                throw InputError("population spec: binomial groups require kappa >= 1");
        }
    }
}

double true_eta(const PopulationSpec& spec) {
    validate(spec);
    double weighted = 0.0;
    for (const GroupSpec& group : spec.groups)
        weighted += double(group.n_strata) * group.axis2.midpoint();
    return weighted / double(spec.total_strata());
}

std::vector<StratumParam> draw_population(const PopulationSpec& spec, RngStream& rng) {
    validate(spec);
    std::vector<StratumParam> params;
    params.reserve(spec.total_strata());
    for (const GroupSpec& group : spec.groups) {
        for (std::size_t s = 0; s < group.n_strata; ++s) {
            StratumParam param;
            param.axis1 = group.axis1.fixed() ? group.axis1.lo
                                              : rng.uniform(group.axis1.lo, group.axis1.hi);
            param.p = group.axis2.fixed() ? group.axis2.lo
                                          : rng.uniform(group.axis2.lo, group.axis2.hi);
            param.kappa = group.kappa;
            params.push_back(param);
        }
    }
    return params;
}

std::vector<CountObservation> draw_observations(const std::vector<StratumParam>& params,
                                                ModelFamily model, RngStream& rng) {
    std::vector<CountObservation> data;
    data.reserve(params.size());
    for (const StratumParam& param : params) {
        const int k = model == ModelFamily::poisson_sizes ? rng.poisson(param.axis1)
                                                          : rng.binomial(param.kappa, param.axis1);
        const int x = rng.binomial(k, param.p);
        data.push_back({x, k});
    }
    return data;
}

NaiveEmptyRule default_naive_rule(ModelFamily model) {
    return model == ModelFamily::poisson_sizes ? NaiveEmptyRule::drop_empty
                                               : NaiveEmptyRule::impute_half;
}

namespace {

std::optional<double> naive_under_rule(const std::vector<CountObservation>& data,
                                       NaiveEmptyRule rule) {
    double total = 0.0;
    std::size_t nonempty = 0;
    for (const CountObservation& obs : data) {
        if (obs.k > 0) {
            total += double(obs.x) / double(obs.k);
            ++nonempty;
        } else if (rule == NaiveEmptyRule::impute_half) {
            total += 0.5;
        }
    }
    if (rule == NaiveEmptyRule::drop_empty) {
        if (nonempty == 0) return std::nullopt;
        return total / double(nonempty);
    }
    return total / double(data.size());
}

ModelKernel kernel_for(const PopulationSpec& spec, int kappa) {
    return spec.model == ModelFamily::poisson_sizes ? ModelKernel::poisson_stratum()
                                                    : ModelKernel::binomial_stratum(kappa);
}

// One full replication: draw the population and data, fit the grid GMLE, and
// evaluate every estimator. Groups with different kappa get their likelihood
// rows built with their own kernel and stacked over the shared grid.
ReplicationEstimates run_replication(const PopulationSpec& spec, const CampaignConfig& config,
                                     const GridPtr& grid, NaiveEmptyRule rule,
                                     std::uint64_t replication) {
    RngStream stream = RngStream::root(config.seed).child(replication);
    RngStream pop_rng = stream.child(0);
    RngStream obs_rng = stream.child(1);

    const std::vector<StratumParam> params = draw_population(spec, pop_rng);
    const std::vector<CountObservation> data = draw_observations(params, spec.model, obs_rng);

    LikelihoodMatrix matrix;
    if (spec.model == ModelFamily::poisson_sizes) {
        matrix = build_likelihood_matrix(ModelKernel::poisson_stratum(), data, *grid);
    } else {
        matrix.cols = grid->size();
        std::size_t offset = 0;
        for (const GroupSpec& group : spec.groups) {
            const std::vector<CountObservation> slice(data.begin() + long(offset),
                                                      data.begin() + long(offset + group.n_strata));
            const LikelihoodMatrix block =
                build_likelihood_matrix(ModelKernel::binomial_stratum(group.kappa), slice, *grid);
            matrix.values.insert(matrix.values.end(), block.values.begin(), block.values.end());
            matrix.row_log_scale.insert(matrix.row_log_scale.end(), block.row_log_scale.begin(),
                                        block.row_log_scale.end());
            matrix.rows += block.rows;
            offset += group.n_strata;
        }
    }

    const EmReport report = em_fit_uniform(matrix, grid, config.em);
    const std::vector<double> etas =
        eta_values(kernel_for(spec, spec.groups.front().kappa), *grid);

    ReplicationEstimates estimates;
    estimates.naive = naive_under_rule(data, rule);
    const RatioEstimate collapse = extreme_collapse_estimator(data);
    estimates.extreme_collapse = collapse.value;
    estimates.empty_strata = collapse.empty_strata;
    estimates.gmle = gmle_plug_in(report.weights, etas);
    return estimates;
}

EstimatorSummary summarize(const std::vector<std::optional<double>>& values) {
    EstimatorSummary summary;
    double total = 0.0;
    std::size_t defined = 0;
    for (const auto& v : values) {
        if (!v) {
            ++summary.undefined_count;
            continue;
        }
        total += *v;
        ++defined;
    }
    if (defined > 0) summary.mean = total / double(defined);
    if (defined > 1) {
        double ss = 0.0;
        for (const auto& v : values)
            if (v) ss += (*v - summary.mean) * (*v - summary.mean);
        summary.sd = std::sqrt(ss / double(defined - 1));
    }
    return summary;
}

}  // namespace

SimResult run_campaign(const PopulationSpec& spec, const CampaignConfig& config) {
    validate(spec);
    if (config.replications == 0) throw InputError("run_campaign: replications must be >= 1");
    if (config.grid_axes.empty()) throw InputError("run_campaign: grid axes required");

    const GridPtr grid = make_product_grid(config.grid_axes);
    const NaiveEmptyRule rule = config.naive_rule.value_or(default_naive_rule(spec.model));

    SimResult result;
    result.replications = config.replications;
    result.seed = config.seed;
    result.per_replication.assign(config.replications, {});

    std::size_t worker_count = config.threads > 0
                                   ? config.threads
                                   : std::max<std::size_t>(1, std::thread::hardware_concurrency());
    worker_count = std::min(worker_count, config.replications);

    std::atomic<std::size_t> next{0};
    std::mutex failure_mutex;
    std::string failure;

    const auto worker = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= config.replications) return;
            try {
                result.per_replication[r] = run_replication(spec, config, grid, rule, r);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (failure.empty())
                    failure = "replication " + std::to_string(r) + " failed: " + e.what();
                return;
            }
        }
    };

    if (worker_count <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(worker_count);
        for (std::size_t t = 0; t < worker_count; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    if (!failure.empty()) throw SolverError("run_campaign: " + failure);

    std::vector<std::optional<double>> naive, collapse, gmle;
    naive.reserve(config.replications);
    collapse.reserve(config.replications);
    gmle.reserve(config.replications);
    for (const ReplicationEstimates& rep : result.per_replication) {
        naive.push_back(rep.naive);
        collapse.push_back(rep.extreme_collapse);
        gmle.push_back(rep.gmle);
    }
    result.naive = summarize(naive);
    result.extreme_collapse = summarize(collapse);
    result.gmle = summarize(gmle);
    return result;
}

std::vector<ProbePoint> weak_convergence_probe(const std::vector<StratumParam>& base_thetas,
                                               ModelFamily model, const ProbeConfig& config,
                                               const std::vector<std::size_t>& n_schedule,
                                               std::uint64_t seed) {
    if (base_thetas.empty()) throw InputError("weak_convergence_probe: empty theta array");
    if (config.grid_axes.empty()) throw InputError("weak_convergence_probe: grid axes required");

    const GridPtr grid = make_product_grid(config.grid_axes);
    const ModelKernel kernel = model == ModelFamily::poisson_sizes
                                   ? ModelKernel::poisson_stratum()
                                   : ModelKernel::binomial_stratum(base_thetas.front().kappa);

    // Grid coordinates of a stratum parameter: (xi1, xi2) for Poisson sizes,
    // (pi, p) for binomial sizes.
    const auto coords = [&](const StratumParam& theta) -> std::array<double, 2> {
        if (model == ModelFamily::poisson_sizes)
            return {theta.axis1 * theta.p, theta.axis1 * (1.0 - theta.p)};
        return {theta.axis1, theta.p};
    };
    const double eps = config.eta_epsilon;
    const auto battery = [&](const std::array<double, 2>& c) -> std::array<double, 5> {
        const double total = c[0] + c[1];
        const double smoothed = total > 0.0 ? c[0] / (total + eps) : 0.0;
        return {c[0], c[1], c[0] * c[0], c[1] * c[1],
                model == ModelFamily::poisson_sizes ? smoothed : c[1]};
    };

    RngStream root = RngStream::root(seed);
    std::vector<ProbePoint> points;
    points.reserve(n_schedule.size());

    for (std::size_t step = 0; step < n_schedule.size(); ++step) {
        const std::size_t n = n_schedule[step];
        if (n == 0) throw InputError("weak_convergence_probe: n must be >= 1");

        std::vector<StratumParam> tiled(n);
        for (std::size_t i = 0; i < n; ++i) tiled[i] = base_thetas[i % base_thetas.size()];

        std::array<double, 5> empirical{};
        for (const StratumParam& theta : tiled) {
            const auto f = battery(coords(theta));
            for (std::size_t q = 0; q < f.size(); ++q) empirical[q] += f[q];
        }
        for (double& value : empirical) value /= double(n);

        RngStream obs_rng = root.child(step);
        const std::vector<CountObservation> data = draw_observations(tiled, model, obs_rng);
        const LikelihoodMatrix matrix = build_likelihood_matrix(kernel, data, *grid);
        const EmReport report = em_fit_uniform(matrix, grid, config.em);

        std::array<double, 5> fitted{};
        for (std::size_t j = 0; j < grid->size(); ++j) {
            const auto f = battery(grid->atoms[j]);
            for (std::size_t q = 0; q < f.size(); ++q)
                fitted[q] += report.weights.weights[j] * f[q];
        }

        ProbePoint point;
        point.n = n;
        for (std::size_t q = 0; q < 5; ++q) {
            point.per_function[q] = std::fabs(fitted[q] - empirical[q]);
            point.max_discrepancy = std::max(point.max_discrepancy, point.per_function[q]);
        }
        points.push_back(point);
    }
    return points;
}

}  // namespace gmlemix
