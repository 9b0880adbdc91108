#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "gmlemix/models.hpp"

// Finite parameter grids and mixing distributions over them. A grid is
// immutable after construction and shared by reference; a mixing distribution
// is a plain weight vector over the grid's atoms.

namespace gmlemix {

struct AxisSpec {
    double lo = 0.0;
    double hi = 0.0;
    std::size_t count = 0;
};

struct ParameterGrid {
    std::vector<AxisSpec> axes;               // empty when reconstructed from atoms alone
    std::vector<std::array<double, 2>> atoms;  // 1-d grids use only the first coordinate
    std::size_t dim = 0;

    std::size_t size() const { return atoms.size(); }
};

using GridPtr = std::shared_ptr<const ParameterGrid>;

// Cartesian product of equally spaced per-axis points, both endpoints
// included; a single-point axis sits at its lower bound.
ParameterGrid build_product_grid(const std::vector<AxisSpec>& axis_specs);
GridPtr make_product_grid(const std::vector<AxisSpec>& axis_specs);

// Default (lo, hi) for each xi axis of the Poisson-sizes model: a fixed small
// floor keeping the origin out of the support, and a high end that places the
// largest observed count comfortably inside the rate range. A convention, not
// a fitted quantity.
std::pair<double, double> default_xi_range(const std::vector<CountObservation>& data);

struct MixingDistribution {
    GridPtr grid;
    std::vector<double> weights;

    std::size_t size() const { return weights.size(); }
};

// Throws if the weights are negative, non-finite, sized inconsistently with
// the grid, or do not sum to 1 within 1e-10.
void validate(const MixingDistribution& mix);

MixingDistribution uniform_mixing(GridPtr grid);

// E_G eta(theta) = sum_j w_j eta(atom_j).
double functional_mean(const MixingDistribution& mix, const std::vector<double>& eta_values);
double functional_mean(const MixingDistribution& mix,
                       const std::function<double(const std::array<double, 2>&)>& eta);

// eta evaluated at every atom of the grid, in atom order.
std::vector<double> eta_values(const ModelKernel& kernel, const ParameterGrid& grid);

}  // namespace gmlemix
