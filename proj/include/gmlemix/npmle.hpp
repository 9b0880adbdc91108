#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "gmlemix/grid.hpp"
#include "gmlemix/models.hpp"

// The grid-constrained generalized maximum likelihood estimator of a mixing
// distribution, computed by EM on a fixed likelihood matrix, plus a
// brute-force simplex-scan oracle for small instances.

namespace gmlemix {

// n x m matrix of kernel values f(Y_i | atom_j). Rows whose largest entry
// would underflow are stored rescaled; row_log_scale records the log factor
// taken out, so log-likelihoods stay comparable across grids. Rescaling a row
// by a positive constant does not move the maximizer.
struct LikelihoodMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;         // row-major
    std::vector<double> row_log_scale;  // 0 for rows stored at natural scale

    double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }
    std::span<const double> row(std::size_t i) const {
        return {values.data() + i * cols, cols};
    }
};

LikelihoodMatrix build_likelihood_matrix(const ModelKernel& kernel,
                                         const std::vector<Observation>& data,
                                         const ParameterGrid& grid);
// Count-data overload; caches kernel rows per distinct (x, k) pair.
LikelihoodMatrix build_likelihood_matrix(const ModelKernel& kernel,
                                         const std::vector<CountObservation>& data,
                                         const ParameterGrid& grid);

struct EmConfig {
    std::size_t max_iters = 1000;  // the table-reproduction protocol
    double stop_tol = 0.0;         // 0 disables the convergence check entirely
};

struct EmReport {
    MixingDistribution weights;
    std::vector<double> loglik_trace;  // entry 0 is the initial log-likelihood
    std::size_t iterations_run = 0;
    // max_j | w_j * (n^-1 sum_i L_ij / (Lw)_i) - w_j | at the final weights.
    double fixed_point_residual = 0.0;
    double final_log_likelihood = 0.0;
};

// Multiplicative EM updates w_j <- w_j * (1/n) sum_i L_ij / (Lw)_i until
// max_iters, or until the per-iteration log-likelihood gain drops below
// stop_tol when stop_tol > 0. EM cannot revive an atom whose initial weight
// is zero. Identical rows are pooled internally; the iterate sequence is the
// same as for the unpooled matrix up to floating-point summation order.
EmReport em_fit(const LikelihoodMatrix& matrix, const MixingDistribution& init,
                const EmConfig& config = {});
EmReport em_fit_uniform(const LikelihoodMatrix& matrix, GridPtr grid,
                        const EmConfig& config = {});

// sum_i log((Lw)_i), with the row scales added back. Throws SolverError if
// some observation has zero likelihood under the mixture.
double log_likelihood(const LikelihoodMatrix& matrix, const std::vector<double>& weights);

// Exhaustive weight-simplex search at resolution 1e-3, refined once at 1e-5
// around the best point. Test oracle; restricted to m <= 3 atoms.
MixingDistribution brute_force_gmle(const LikelihoodMatrix& matrix, GridPtr grid);

}  // namespace gmlemix
