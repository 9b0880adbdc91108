#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "gmlemix/grid.hpp"
#include "gmlemix/models.hpp"
#include "gmlemix/npmle.hpp"

// Every estimator of the population proportion: the naive per-stratum mean,
// the extreme-collapse pooled ratio, the GMLE plug-in, per-stratum posterior
// means, and the reweighting that recovers the full mixing distribution from
// a responders-only fit in the truncated model.

namespace gmlemix {

// A ratio estimator that may be undefined; empty_strata counts the strata
// with k = 0 that made it so (or that were present in the data).
struct RatioEstimate {
    std::optional<double> value;
    std::size_t empty_strata = 0;

    bool defined() const { return value.has_value(); }
};

// (1/n) sum x_i / k_i; undefined as soon as any stratum is empty.
RatioEstimate naive_estimator(const std::vector<CountObservation>& data);

// sum x_i / sum k_i; undefined only when every stratum is empty.
RatioEstimate extreme_collapse_estimator(const std::vector<CountObservation>& data);

// E_G(eta | Y_i) = sum_j eta_j w_j L_ij / sum_j w_j L_ij.
double posterior_mean(const LikelihoodMatrix& matrix, const std::vector<double>& weights,
                      const std::vector<double>& eta_values, std::size_t i);

// All observations in one pass, sharing the (Lw) vector.
std::vector<double> posterior_means(const LikelihoodMatrix& matrix,
                                    const std::vector<double>& weights,
                                    const std::vector<double>& eta_values);

// E_G eta(theta); same as functional_mean.
double gmle_plug_in(const MixingDistribution& mix, const std::vector<double>& eta_values);

struct ReweightResult {
    MixingDistribution weights;
    // Positively weighted atoms whose response probability P(kappa <= kappa0)
    // fell below 1e-3: the reweighting is near-singular there.
    std::vector<std::size_t> near_singular_atoms;
};

// Recover the mixing distribution over all individuals from the fit over
// responders: w_j <- w_j / (1 - (1 - pi_j)^kappa0), renormalized. Atoms are
// (pi, p) points; errors out if any positively weighted atom has pi = 0.
ReweightResult truncated_reweight(const MixingDistribution& responders_fit, int kappa0);

struct EstimateSet {
    RatioEstimate naive;
    RatioEstimate extreme_collapse;
    double gmle = 0.0;
    std::vector<double> posterior_means;
};

// build_likelihood_matrix -> em_fit (uniform init) -> every estimator.
EstimateSet estimate_all(const ModelKernel& kernel, const std::vector<CountObservation>& data,
                         GridPtr grid, const EmConfig& config = {});

}  // namespace gmlemix
