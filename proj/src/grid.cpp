#include "gmlemix/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gmlemix/errors.hpp"

namespace gmlemix {

namespace {

std::vector<double> axis_points(const AxisSpec& axis) {
    if (axis.count == 0) throw std::invalid_argument("grid axis requires count >= 1");
    if (!(axis.lo <= axis.hi)) throw std::invalid_argument("grid axis requires lo <= hi");
    if (axis.count == 1) return {axis.lo};
    if (axis.lo == axis.hi)
        throw std::invalid_argument("zero-width grid axis requires count == 1");
    std::vector<double> points(axis.count);
    const double step = (axis.hi - axis.lo) / double(axis.count - 1);
    for (std::size_t i = 0; i < axis.count; ++i) points[i] = axis.lo + double(i) * step;
    points.back() = axis.hi;
    return points;
}

}  // namespace

ParameterGrid build_product_grid(const std::vector<AxisSpec>& axis_specs) {
    if (axis_specs.empty() || axis_specs.size() > 2)
        throw std::invalid_argument("product grid supports 1 or 2 axes");

    ParameterGrid grid;
    grid.axes = axis_specs;
    grid.dim = axis_specs.size();

    const std::vector<double> first = axis_points(axis_specs[0]);
    if (grid.dim == 1) {
        grid.atoms.reserve(first.size());
        for (double a : first) grid.atoms.push_back({a, 0.0});
        return grid;
    }
    const std::vector<double> second = axis_points(axis_specs[1]);
    grid.atoms.reserve(first.size() * second.size());
    for (double a : first)
        for (double b : second) grid.atoms.push_back({a, b});
    return grid;
}

GridPtr make_product_grid(const std::vector<AxisSpec>& axis_specs) {
    return std::make_shared<const ParameterGrid>(build_product_grid(axis_specs));
}

std::pair<double, double> default_xi_range(const std::vector<CountObservation>& data) {
    if (data.empty()) throw InputError("default_xi_range: empty data");
    int max_count = 0;
    for (const CountObservation& obs : data) {
        validate(obs);
        max_count = std::max({max_count, obs.x, obs.k - obs.x});
    }
    const double hi = double(max_count) + 3.0 * std::sqrt(double(max_count) + 1.0);
    return {0.02, hi};
}

void validate(const MixingDistribution& mix) {
    if (mix.grid && mix.weights.size() != mix.grid->size())
        throw std::invalid_argument("mixing distribution size does not match its grid");
    double total = 0.0;
    for (double w : mix.weights) {
        if (!(w >= 0.0) || !std::isfinite(w))
            throw std::invalid_argument("mixing weights must be finite and nonnegative");
        total += w;
    }
    if (std::fabs(total - 1.0) > 1e-10)
        throw std::invalid_argument("mixing weights must sum to 1 within 1e-10");
}

MixingDistribution uniform_mixing(GridPtr grid) {
    if (!grid || grid->size() == 0) throw std::invalid_argument("uniform_mixing: empty grid");
    MixingDistribution mix;
    mix.weights.assign(grid->size(), 1.0 / double(grid->size()));
    mix.grid = std::move(grid);
    return mix;
}

double functional_mean(const MixingDistribution& mix, const std::vector<double>& eta_values) {
    if (eta_values.size() != mix.weights.size())
        throw std::invalid_argument("functional_mean: eta vector size mismatch");
    double mean = 0.0;
    for (std::size_t j = 0; j < mix.weights.size(); ++j) mean += mix.weights[j] * eta_values[j];
    return mean;
}

double functional_mean(const MixingDistribution& mix,
                       const std::function<double(const std::array<double, 2>&)>& eta) {
    if (!mix.grid) throw std::invalid_argument("functional_mean: mixing distribution has no grid");
    if (mix.weights.size() != mix.grid->size())
        throw std::invalid_argument("functional_mean: weight vector size mismatch");
    double mean = 0.0;
    for (std::size_t j = 0; j < mix.weights.size(); ++j)
        mean += mix.weights[j] * eta(mix.grid->atoms[j]);
    return mean;
}

std::vector<double> eta_values(const ModelKernel& kernel, const ParameterGrid& grid) {
    std::vector<double> values;
    values.reserve(grid.size());
    for (const auto& atom : grid.atoms) values.push_back(kernel.eta(atom));
    return values;
}

}  // namespace gmlemix
