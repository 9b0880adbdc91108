#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "gmlemix/grid.hpp"
#include "gmlemix/models.hpp"

// Conservative confidence interval for a linear functional of the mixing
// distribution: the range of eta.w over the set of grid mixtures whose
// multinomial cell log-likelihood stays within half a chi-square quantile of
// the empirical maximum.

namespace gmlemix {

// A partition of the (x, k) sample space into explicit outcome cells plus an
// implicit catch-all tail. M = cells.size() + 1 and must be >= 2.
struct CellScheme {
    std::vector<std::vector<CountObservation>> cells;

    std::size_t cell_count() const { return cells.size() + 1; }
    // Index of the cell containing obs; the tail is cells.size().
    std::size_t cell_index(const CountObservation& obs) const;
};

// Throws unless the explicit cells are nonempty, disjoint, and at least one.
void validate(const CellScheme& scheme);

struct CellCounts {
    std::vector<std::size_t> counts;  // length M, tail last
    std::size_t total = 0;
};

CellCounts tabulate_cells(const CellScheme& scheme, const std::vector<CountObservation>& data);

// M x m matrix C with C(j, k) = P_atom_k(cell j); the tail row absorbs the
// remaining mass so every column sums to 1 exactly.
struct CellMatrix {
    std::size_t rows = 0;  // M
    std::size_t cols = 0;  // grid atoms
    std::vector<double> values;

    double at(std::size_t j, std::size_t k) const { return values[j * cols + k]; }
};

CellMatrix cell_probabilities(const ModelKernel& kernel, const ParameterGrid& grid,
                              const CellScheme& scheme);

// (1 - level) upper quantile solved from the regularized incomplete gamma,
// seeded by the Wilson-Hilferty approximation. Relative accuracy ~1e-10.
double chi2_quantile(unsigned df, double level);

struct CiSolverConfig {
    double outer_rel_tol = 1e-6;         // |ell(w) - T| <= tol * max(1, |T|)
    std::size_t outer_max_iters = 200;   // bisection steps on the multiplier
    double inner_gain_tol = 1e-13;       // relative objective-gain stop
    std::size_t inner_max_iters = 200000;
};

struct CiResult {
    double eta_lower = 0.0;
    double eta_upper = 0.0;
    double alpha = 0.0;
    // ell(w) - T at the weight vectors attaining each bound (lower, upper).
    std::array<double, 2> constraint_slack_at_bounds{0.0, 0.0};
    std::size_t solver_iterations = 0;
};

// min/max of eta.w over {w in simplex : sum_j n_j log((Cw)_j) >= T} with
// T = sum_{n_j>0} n_j log(n_j / n) - chi2_quantile(M-1, 1-alpha) / 2.
// Each direction is scalarized as max eta.w + mu * ell(w), solved by
// multiplicative updates, with bisection on mu to activate the constraint;
// when the unconstrained extremum is already feasible it is returned as is.
// Throws InfeasibleRegionError when no simplex point attains ell(w) >= T.
CiResult ci_bounds(const CellMatrix& cells, const CellCounts& counts,
                   const std::vector<double>& eta_values, double alpha,
                   const CiSolverConfig& config = {});

// Explicit cells for every distinct observed outcome with 1 <= k <= k_cap
// (k_cap: 95th percentile of the observed k), rarest outcomes merged into the
// tail to cap M at 30. Outcomes with k = 0 always belong to the tail, except
// when the data contain nothing else.
CellScheme default_cell_scheme(const ModelKernel& kernel,
                               const std::vector<CountObservation>& data);

}  // namespace gmlemix
