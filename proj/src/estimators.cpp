#include "gmlemix/estimators.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "gmlemix/errors.hpp"

namespace gmlemix {

RatioEstimate naive_estimator(const std::vector<CountObservation>& data) {
    if (data.empty()) throw InputError("naive_estimator: empty data");
    RatioEstimate estimate;
    double total = 0.0;
    for (const CountObservation& obs : data) {
        validate(obs);
        if (obs.k == 0)
            ++estimate.empty_strata;
        else
            total += double(obs.x) / double(obs.k);
    }
    if (estimate.empty_strata == 0) estimate.value = total / double(data.size());
    return estimate;
}

RatioEstimate extreme_collapse_estimator(const std::vector<CountObservation>& data) {
    if (data.empty()) throw InputError("extreme_collapse_estimator: empty data");
    RatioEstimate estimate;
    long long sum_x = 0, sum_k = 0;
    for (const CountObservation& obs : data) {
        validate(obs);
        if (obs.k == 0) ++estimate.empty_strata;
        sum_x += obs.x;
        sum_k += obs.k;
    }
    if (sum_k > 0) estimate.value = double(sum_x) / double(sum_k);
    return estimate;
}

double posterior_mean(const LikelihoodMatrix& matrix, const std::vector<double>& weights,
                      const std::vector<double>& eta_values, std::size_t i) {
    if (i >= matrix.rows) throw std::invalid_argument("posterior_mean: row index out of range");
    if (weights.size() != matrix.cols || eta_values.size() != matrix.cols)
        throw std::invalid_argument("posterior_mean: vector sizes do not match the matrix");
    const double* row = matrix.values.data() + i * matrix.cols;
    double numer = 0.0, denom = 0.0;
    for (std::size_t j = 0; j < matrix.cols; ++j) {
        const double wl = weights[j] * row[j];
        numer += eta_values[j] * wl;
        denom += wl;
    }
    if (!(denom > 0.0))
        throw SolverError("posterior_mean: observation " + std::to_string(i) +
                          " has zero likelihood under the mixture");
    return numer / denom;
}

std::vector<double> posterior_means(const LikelihoodMatrix& matrix,
                                    const std::vector<double>& weights,
                                    const std::vector<double>& eta_values) {
    if (weights.size() != matrix.cols || eta_values.size() != matrix.cols)
        throw std::invalid_argument("posterior_means: vector sizes do not match the matrix");
    std::vector<double> means(matrix.rows);
    for (std::size_t i = 0; i < matrix.rows; ++i)
        means[i] = posterior_mean(matrix, weights, eta_values, i);
    return means;
}

double gmle_plug_in(const MixingDistribution& mix, const std::vector<double>& eta_values) {
    return functional_mean(mix, eta_values);
}

ReweightResult truncated_reweight(const MixingDistribution& responders_fit, int kappa0) {
    if (kappa0 < 1) throw std::invalid_argument("truncated_reweight requires kappa0 >= 1");
    if (!responders_fit.grid)
        throw std::invalid_argument("truncated_reweight: mixing distribution has no grid");
    if (responders_fit.weights.size() != responders_fit.grid->size())
        throw std::invalid_argument("truncated_reweight: weight vector size mismatch");
    // The input need not be normalized: the reweighting renormalizes anyway,
    // so any positive rescaling of the responders' fit gives the same result.
    double input_mass = 0.0;
    for (double w : responders_fit.weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("truncated_reweight: weights must be finite, >= 0");
        input_mass += w;
    }
    if (!(input_mass > 0.0))
        throw std::invalid_argument("truncated_reweight: weights are all zero");

    const ParameterGrid& grid = *responders_fit.grid;
    std::string zero_response;
    ReweightResult result;
    result.weights.grid = responders_fit.grid;
    result.weights.weights.assign(responders_fit.size(), 0.0);

    double total = 0.0;
    for (std::size_t j = 0; j < responders_fit.size(); ++j) {
        const double w = responders_fit.weights[j];
        if (w == 0.0) continue;
        const double pi = grid.atoms[j][0];
        const double response_prob = 1.0 - std::pow(1.0 - pi, kappa0);
        if (response_prob <= 0.0) {
            zero_response += (zero_response.empty() ? "" : ", ") + std::to_string(j);
            continue;
        }
        if (response_prob < 1e-3) result.near_singular_atoms.push_back(j);
        result.weights.weights[j] = w / response_prob;
        total += result.weights.weights[j];
    }
    if (!zero_response.empty())
        throw SolverError("truncated_reweight: positively weighted atoms with pi = 0 "
                          "(indices " + zero_response + ") cannot be reweighted");
    for (double& w : result.weights.weights) w /= total;
    return result;
}

EstimateSet estimate_all(const ModelKernel& kernel, const std::vector<CountObservation>& data,
                         GridPtr grid, const EmConfig& config) {
    EstimateSet set;
    set.naive = naive_estimator(data);
    set.extreme_collapse = extreme_collapse_estimator(data);

    const LikelihoodMatrix matrix = build_likelihood_matrix(kernel, data, *grid);
    const EmReport report = em_fit_uniform(matrix, grid, config);
    const std::vector<double> etas = eta_values(kernel, *grid);
    set.gmle = gmle_plug_in(report.weights, etas);
    set.posterior_means = posterior_means(matrix, report.weights.weights, etas);
    return set;
}

}  // namespace gmlemix
