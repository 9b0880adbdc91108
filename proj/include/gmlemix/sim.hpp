#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "gmlemix/estimators.hpp"
#include "gmlemix/grid.hpp"
#include "gmlemix/models.hpp"
#include "gmlemix/npmle.hpp"
#include "gmlemix/rng.hpp"

// Monte-Carlo harness: generates stratified populations from the two sampling
// models, runs the full estimation pipeline per replication, and tabulates
// estimator performance. Every replication owns a child random stream indexed
// by its replication number, so results are independent of execution order
// and byte-reproducible for a fixed seed.

namespace gmlemix {

enum class ModelFamily { poisson_sizes, binomial_sizes };

// Per-axis parameter law of one group of strata: uniform on [lo, hi], or a
// fixed atom when lo == hi.
struct UniformLaw {
    double lo = 0.0;
    double hi = 0.0;

    bool fixed() const { return lo == hi; }
    double midpoint() const { return 0.5 * (lo + hi); }
};

// axis1 is lambda (poisson_sizes) or pi (binomial_sizes); axis2 is p.
struct GroupSpec {
    std::size_t n_strata = 0;
    UniformLaw axis1;
    UniformLaw axis2;
    int kappa = 0;  // binomial_sizes design size
};

struct PopulationSpec {
    ModelFamily model = ModelFamily::poisson_sizes;
    std::vector<GroupSpec> groups;

    std::size_t total_strata() const;
};

void validate(const PopulationSpec& spec);

// The estimand: group-weighted average of p (uniform laws contribute their
// midpoint).
double true_eta(const PopulationSpec& spec);

struct StratumParam {
    double axis1 = 0.0;  // lambda or pi
    double p = 0.0;
    int kappa = 0;
};

std::vector<StratumParam> draw_population(const PopulationSpec& spec, RngStream& rng);
std::vector<CountObservation> draw_observations(const std::vector<StratumParam>& params,
                                                ModelFamily model, RngStream& rng);

// How the per-replication naive estimator treats empty strata. The strict
// estimator is undefined as soon as one stratum is empty, which under Poisson
// sample sizes is nearly every replication; published comparisons instead
// either average over the non-empty strata or score an empty stratum as 1/2.
enum class NaiveEmptyRule { drop_empty, impute_half };

struct CampaignConfig {
    std::vector<AxisSpec> grid_axes;
    EmConfig em;
    std::size_t replications = 50;
    std::uint64_t seed = 1;
    std::optional<NaiveEmptyRule> naive_rule;  // default: drop_empty for
                                               // poisson_sizes, impute_half
                                               // for binomial_sizes
    std::size_t threads = 0;                   // 0: hardware concurrency
};

NaiveEmptyRule default_naive_rule(ModelFamily model);

struct ReplicationEstimates {
    std::optional<double> naive;
    std::optional<double> extreme_collapse;
    double gmle = 0.0;
    std::size_t empty_strata = 0;
};

struct EstimatorSummary {
    double mean = 0.0;  // over the replications where the estimator is defined
    double sd = 0.0;    // sample standard deviation (n-1)
    std::size_t undefined_count = 0;
};

struct SimResult {
    EstimatorSummary naive;
    EstimatorSummary extreme_collapse;
    EstimatorSummary gmle;
    std::size_t replications = 0;
    std::uint64_t seed = 0;
    std::vector<ReplicationEstimates> per_replication;
};

SimResult run_campaign(const PopulationSpec& spec, const CampaignConfig& config);

// Empirical check of the weak-convergence behaviour for fixed parameter
// arrays: per sample size n, tile the base parameters to length n, draw one
// observation per stratum, fit, and compare grid-mixture moments against the
// exact moments of the tiled empirical distribution.
struct ProbePoint {
    std::size_t n = 0;
    double max_discrepancy = 0.0;
    // coordinate means, coordinate second moments, smoothed proportion
    std::array<double, 5> per_function{};
};

struct ProbeConfig {
    std::vector<AxisSpec> grid_axes;
    EmConfig em;
    double eta_epsilon = 0.01;  // smoothing of the proportion functional at the origin
};

std::vector<ProbePoint> weak_convergence_probe(const std::vector<StratumParam>& base_thetas,
                                               ModelFamily model, const ProbeConfig& config,
                                               const std::vector<std::size_t>& n_schedule,
                                               std::uint64_t seed);

}  // namespace gmlemix
