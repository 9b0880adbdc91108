#include "gmlemix/ci.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

#include "gmlemix/errors.hpp"
#include "gmlemix/special.hpp"

namespace gmlemix {

std::size_t CellScheme::cell_index(const CountObservation& obs) const {
    for (std::size_t j = 0; j < cells.size(); ++j)
        for (const CountObservation& member : cells[j])
            if (member == obs) return j;
    return cells.size();
}

void validate(const CellScheme& scheme) {
    if (scheme.cells.empty())
        throw std::invalid_argument("cell scheme requires at least one explicit cell (M >= 2)");
    std::map<std::pair<int, int>, bool> seen;
    for (const auto& cell : scheme.cells) {
        if (cell.empty()) throw std::invalid_argument("cell scheme contains an empty cell");
        for (const CountObservation& obs : cell) {
            validate(obs);
            if (!seen.emplace(std::make_pair(obs.k, obs.x), true).second)
                throw std::invalid_argument("cell scheme cells are not disjoint");
        }
    }
}

CellCounts tabulate_cells(const CellScheme& scheme, const std::vector<CountObservation>& data) {
    validate(scheme);
    CellCounts counts;
    counts.counts.assign(scheme.cell_count(), 0);
    for (const CountObservation& obs : data) {
        validate(obs);
        ++counts.counts[scheme.cell_index(obs)];
        ++counts.total;
    }
    return counts;
}

CellMatrix cell_probabilities(const ModelKernel& kernel, const ParameterGrid& grid,
                              const CellScheme& scheme) {
    validate(scheme);
    if (kernel.kind != ModelKind::poisson_stratum && kernel.kind != ModelKind::binomial_stratum)
        throw std::invalid_argument("cell_probabilities supports the discrete count models only");

    const std::size_t M = scheme.cell_count();
    const std::size_t m = grid.size();
    CellMatrix matrix;
    matrix.rows = M;
    matrix.cols = m;
    matrix.values.assign(M * m, 0.0);

    for (std::size_t k = 0; k < m; ++k) {
        double explicit_mass = 0.0;
        for (std::size_t j = 0; j + 1 < M; ++j) {
            double prob = 0.0;
            for (const CountObservation& obs : scheme.cells[j])
                prob += kernel.density(obs, grid.atoms[k]);
            matrix.values[j * m + k] = prob;
            explicit_mass += prob;
        }
        const double tail = 1.0 - explicit_mass;
        if (tail < -1e-8)
            throw std::invalid_argument(
                "cell probabilities exceed 1 at atom " + std::to_string(k) +
                "; the scheme does not partition the sample space");
        matrix.values[(M - 1) * m + k] = std::max(tail, 0.0);
    }
    return matrix;
}

double chi2_quantile(unsigned df, double level) {
    if (df < 1) throw std::domain_error("chi2_quantile: df must be >= 1");
    if (!(level > 0.0 && level < 1.0))
        throw std::domain_error("chi2_quantile: level must lie in (0, 1)");

    const double a = 0.5 * double(df);
    const auto cdf = [a](double x) { return lower_regularized_gamma(a, 0.5 * x); };

    // Wilson-Hilferty starting point.
    const double z = normal_quantile(level);
    const double c = 2.0 / (9.0 * double(df));
    double x = double(df) * std::pow(std::max(1.0 - c + z * std::sqrt(c), 1e-8), 3);

    double lo = 0.0;
    double hi = std::max(x, 1.0);
    while (cdf(hi) < level) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw SolverError("chi2_quantile: failed to bracket the quantile");
    }
    x = std::clamp(x, lo + 1e-12, hi);

    const double log_gamma_a = std::lgamma(a);
    for (int iter = 0; iter < 200; ++iter) {
        const double f = cdf(x) - level;
        if (f > 0.0)
            hi = x;
        else
            lo = x;
        const double log_pdf = (a - 1.0) * std::log(0.5 * x) - 0.5 * x - log_gamma_a;
        const double pdf = 0.5 * std::exp(log_pdf);
        double next = pdf > 0.0 ? x - f / pdf : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::fabs(next - x) <= 1e-12 * std::max(x, 1e-300)) return next;
        x = next;
    }
    return x;
}

namespace {

// Rows of the cell matrix restricted to cells with positive counts; the only
// part of the problem the constraint can see (empty cells contribute zero to
// both the cell log-likelihood and its threshold).
struct ActiveCells {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;  // row-major
    std::vector<double> counts;
    double total = 0.0;
};

ActiveCells restrict_to_observed(const CellMatrix& cells, const CellCounts& counts) {
    ActiveCells active;
    active.cols = cells.cols;
    for (std::size_t j = 0; j < cells.rows; ++j) {
        if (counts.counts[j] == 0) continue;
        active.values.insert(active.values.end(), cells.values.begin() + j * cells.cols,
                             cells.values.begin() + (j + 1) * cells.cols);
        active.counts.push_back(double(counts.counts[j]));
        active.total += double(counts.counts[j]);
        ++active.rows;
    }
    return active;
}

struct InnerSolution {
    std::vector<double> w;
    double ell = 0.0;
    std::size_t iterations = 0;
};

// Maximize direction.w + mu * cell_loglik(w) over the simplex. The base step
// is the multiplicative update w_k <- w_k g_k / (w.g) with g the gradient; it
// is an MM step (Jensen on the mixture terms, x >= 1 + log x on the linear
// term), so the objective never decreases. Plain iteration crawls on flat
// problems, so steps are taken in squared-extrapolation cycles (two base
// steps, extrapolate, one stabilizing base step) with a fallback to the plain
// step whenever extrapolation does not help; monotonicity is preserved.
// direction must be elementwise nonnegative; pass empty for zero.
InnerSolution maximize_augmented(const ActiveCells& active, const std::vector<double>& direction,
                                 double mu, std::vector<double> w, double gain_tol,
                                 std::size_t max_iters) {
    const std::size_t m = active.cols;

    // mix = (Cw) over the observed cells; false if some cell gets zero mass.
    const auto compute_mix = [&](const std::vector<double>& point, std::vector<double>& mix) {
        mix.resize(active.rows);
        for (std::size_t j = 0; j < active.rows; ++j) {
            const double* row = active.values.data() + j * active.cols;
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += row[k] * point[k];
            if (!(acc > 0.0)) return false;
            mix[j] = acc;
        }
        return true;
    };
    const auto objective_of = [&](const std::vector<double>& point,
                                  const std::vector<double>& mix) {
        double obj = 0.0;
        for (std::size_t j = 0; j < active.rows; ++j) obj += active.counts[j] * std::log(mix[j]);
        obj *= mu;
        if (!direction.empty())
            for (std::size_t k = 0; k < m; ++k) obj += direction[k] * point[k];
        return obj;
    };
    std::vector<double> g(m);
    const auto base_step = [&](const std::vector<double>& point, const std::vector<double>& mix,
                               std::vector<double>& out) {
        if (direction.empty())
            g.assign(m, 0.0);
        else
            g = direction;
        for (std::size_t j = 0; j < active.rows; ++j) {
            const double* row = active.values.data() + j * active.cols;
            const double factor = mu * active.counts[j] / mix[j];
            for (std::size_t k = 0; k < m; ++k) g[k] += factor * row[k];
        }
        double z = 0.0;
        for (std::size_t k = 0; k < m; ++k) z += point[k] * g[k];
        out.resize(m);
        double total = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            out[k] = point[k] * g[k] / z;
            total += out[k];
        }
        for (double& v : out) v /= total;
    };

    std::vector<double> mix_w;
    if (!compute_mix(w, mix_w))
        throw SolverError("ci solver: an observed cell has zero probability under the "
                          "current mixture");
    double obj = objective_of(w, mix_w);

    std::vector<double> x1, x2, mix_x1, mix_x2, extrapolated, stabilized, mix_tmp;
    InnerSolution solution;
    while (solution.iterations < max_iters) {
        base_step(w, mix_w, x1);
        if (!compute_mix(x1, mix_x1))
            throw SolverError("ci solver: multiplicative step produced a zero cell");
        base_step(x1, mix_x1, x2);
        if (!compute_mix(x2, mix_x2))
            throw SolverError("ci solver: multiplicative step produced a zero cell");
        solution.iterations += 2;
        const double obj_x2 = objective_of(x2, mix_x2);

        double r_norm2 = 0.0, v_norm2 = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double r = x1[k] - w[k];
            const double v = x2[k] - 2.0 * x1[k] + w[k];
            r_norm2 += r * r;
            v_norm2 += v * v;
        }

        double next_obj;
        if (v_norm2 > 0.0) {
            const double alpha = std::min(-1.0, -std::sqrt(r_norm2 / v_norm2));
            extrapolated.resize(m);
            double total = 0.0;
            for (std::size_t k = 0; k < m; ++k) {
                const double r = x1[k] - w[k];
                const double v = x2[k] - 2.0 * x1[k] + w[k];
                const double value = w[k] - 2.0 * alpha * r + alpha * alpha * v;
                extrapolated[k] = std::max(value, 1e-300);
                total += extrapolated[k];
            }
            for (double& v : extrapolated) v /= total;

            // Stabilizing base step at the extrapolated point; fall back to
            // the plain cycle unless it genuinely improves the objective.
            bool accepted = false;
            if (compute_mix(extrapolated, mix_tmp)) {
                base_step(extrapolated, mix_tmp, stabilized);
                ++solution.iterations;
                if (compute_mix(stabilized, mix_tmp) &&
                    objective_of(stabilized, mix_tmp) >= obj_x2) {
                    w.swap(stabilized);
                    mix_w.swap(mix_tmp);
                    next_obj = objective_of(w, mix_w);
                    accepted = true;
                }
            }
            if (!accepted) {
                w.swap(x2);
                mix_w.swap(mix_x2);
                next_obj = obj_x2;
            }
        } else {
            w.swap(x2);
            mix_w.swap(mix_x2);
            next_obj = obj_x2;
        }

        const double gain = next_obj - obj;
        obj = next_obj;
        if (gain <= gain_tol * (1.0 + std::fabs(next_obj))) break;
    }

    solution.ell = 0.0;
    for (std::size_t j = 0; j < active.rows; ++j)
        solution.ell += active.counts[j] * std::log(mix_w[j]);
    solution.w = std::move(w);
    return solution;
}

// Maximize the cell log-likelihood over mixtures supported on a subset of
// atoms; returns the solution embedded in the full atom space.
InnerSolution maximize_ell_on_support(const ActiveCells& active,
                                      const std::vector<std::size_t>& support, double gain_tol,
                                      std::size_t max_iters) {
    ActiveCells reduced;
    reduced.rows = active.rows;
    reduced.cols = support.size();
    reduced.counts = active.counts;
    reduced.total = active.total;
    reduced.values.resize(active.rows * support.size());
    for (std::size_t j = 0; j < active.rows; ++j)
        for (std::size_t s = 0; s < support.size(); ++s)
            reduced.values[j * support.size() + s] = active.values[j * active.cols + support[s]];

    std::vector<double> w0(support.size(), 1.0 / double(support.size()));
    InnerSolution reduced_sol;
    try {
        reduced_sol = maximize_augmented(reduced, {}, 1.0, std::move(w0), gain_tol, max_iters);
    } catch (const SolverError&) {
        // Some observed cell is impossible on this support.
        reduced_sol.ell = kNegInf;
        reduced_sol.w.assign(support.size(), 1.0 / double(support.size()));
    }
    InnerSolution embedded;
    embedded.ell = reduced_sol.ell;
    embedded.iterations = reduced_sol.iterations;
    embedded.w.assign(active.cols, 0.0);
    for (std::size_t s = 0; s < support.size(); ++s) embedded.w[support[s]] = reduced_sol.w[s];
    return embedded;
}

struct DirectionResult {
    double value = 0.0;
    double slack = 0.0;
    std::size_t iterations = 0;
};

std::vector<double> blend_with_uniform(const std::vector<double>& w) {
    // Warm starts keep a tiny floor under every atom so later subproblems can
    // regrow it; the floor is small enough not to disturb convergence.
    std::vector<double> blended(w.size());
    const double floor_mass = 1e-6 / double(w.size());
    double total = 0.0;
    for (std::size_t k = 0; k < w.size(); ++k) {
        blended[k] = (1.0 - 1e-6) * w[k] + floor_mass;
        total += blended[k];
    }
    for (double& b : blended) b /= total;
    return blended;
}

// Maximize eta_dir.w subject to ell(w) >= T. anchor maximizes ell over the
// whole simplex and is known to satisfy anchor.ell > T.
DirectionResult solve_direction(const ActiveCells& active, const std::vector<double>& eta_dir,
                                const std::vector<double>& eta_original, double T,
                                const InnerSolution& anchor, const CiSolverConfig& cfg) {
    const std::size_t m = active.cols;
    const double tol_T = cfg.outer_rel_tol * std::max(1.0, std::fabs(T));
    DirectionResult result;

    const auto bound_value = [&](const std::vector<double>& w) {
        double v = 0.0;
        for (std::size_t k = 0; k < m; ++k) v += eta_original[k] * w[k];
        return v;
    };

    const double dir_max = *std::max_element(eta_dir.begin(), eta_dir.end());
    const double dir_min = *std::min_element(eta_dir.begin(), eta_dir.end());
    const double spread = dir_max - dir_min;

    // Constraint inactive: the best ell attainable on the face of maximizing
    // atoms already clears the threshold.
    std::vector<std::size_t> face;
    for (std::size_t k = 0; k < m; ++k)
        if (eta_dir[k] >= dir_max - 1e-12 * std::max(1.0, std::fabs(dir_max))) face.push_back(k);
    InnerSolution face_sol =
        maximize_ell_on_support(active, face, cfg.inner_gain_tol, cfg.inner_max_iters);
    result.iterations += face_sol.iterations;
    if (face_sol.ell >= T) {
        result.value = bound_value(face_sol.w);
        result.slack = face_sol.ell - T;
        return result;
    }

    // Shifted direction keeps the multiplicative gradient nonnegative; the
    // shift adds a constant to the objective and moves nothing.
    std::vector<double> d(m);
    const double delta = 1e-9 * std::max(1.0, spread);
    for (std::size_t k = 0; k < m; ++k) d[k] = eta_dir[k] - dir_min + delta;

    const auto objective_pieces = [&](const std::vector<double>& w, double& linear,
                                      std::vector<double>& q) {
        linear = 0.0;
        for (std::size_t k = 0; k < m; ++k) linear += d[k] * w[k];
        q.assign(active.rows, 0.0);
        for (std::size_t j = 0; j < active.rows; ++j) {
            const double* row = active.values.data() + j * active.cols;
            for (std::size_t k = 0; k < m; ++k) q[j] += row[k] * w[k];
        }
    };

    // One complete root search over the multiplier at a given inner budget.
    // Near a support change, mass moves between competing atom sets only
    // slowly under multiplicative updates, so each evaluation also solves
    // from the face maximizer, line-searches the segment between the two
    // candidates (the objective is concave along it and the segment spans the
    // slow transport direction), and polishes the best blend.
    const auto root_search = [&](double gain_tol,
                                 std::size_t max_iters) -> std::optional<DirectionResult> {
        const auto solve_at = [&](double mu, const std::vector<double>& warm) {
            InnerSolution sol = maximize_augmented(active, d, mu, blend_with_uniform(warm),
                                                   gain_tol, max_iters);
            InnerSolution alt = maximize_augmented(active, d, mu, blend_with_uniform(face_sol.w),
                                                   gain_tol, max_iters / 4 + 1);
            result.iterations += sol.iterations + alt.iterations;

            double lin_a, lin_b;
            std::vector<double> q_a, q_b;
            objective_pieces(sol.w, lin_a, q_a);
            objective_pieces(alt.w, lin_b, q_b);
            const auto blend_objective = [&](double t) {
                double value = (1.0 - t) * lin_a + t * lin_b;
                for (std::size_t j = 0; j < active.rows; ++j) {
                    const double qj = (1.0 - t) * q_a[j] + t * q_b[j];
                    if (!(qj > 0.0)) return -std::numeric_limits<double>::infinity();
                    value += mu * active.counts[j] * std::log(qj);
                }
                return value;
            };
            // Golden-section search for the best phase mix.
            const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
            double lo = 0.0, hi = 1.0;
            double t1 = hi - golden * (hi - lo), t2 = lo + golden * (hi - lo);
            double f1 = blend_objective(t1), f2 = blend_objective(t2);
            for (int step = 0; step < 60; ++step) {
                if (f1 < f2) {
                    lo = t1;
                    t1 = t2;
                    f1 = f2;
                    t2 = lo + golden * (hi - lo);
                    f2 = blend_objective(t2);
                } else {
                    hi = t2;
                    t2 = t1;
                    f2 = f1;
                    t1 = hi - golden * (hi - lo);
                    f1 = blend_objective(t1);
                }
            }
            const double t_star = f1 > f2 ? t1 : t2;
            std::vector<double> blend(m);
            for (std::size_t k = 0; k < m; ++k)
                blend[k] = (1.0 - t_star) * sol.w[k] + t_star * alt.w[k];
            InnerSolution polished = maximize_augmented(active, d, mu, blend_with_uniform(blend),
                                                        gain_tol, max_iters / 4 + 1);
            result.iterations += polished.iterations;

            const auto augmented = [&](const InnerSolution& s) {
                double value = mu * s.ell;
                for (std::size_t k = 0; k < m; ++k) value += d[k] * s.w[k];
                return value;
            };
            const InnerSolution* best = &sol;
            if (augmented(alt) > augmented(*best)) best = &alt;
            if (augmented(polished) > augmented(*best)) best = &polished;
            return *best;
        };

        // Bracket the multiplier: ell(w(mu)) increases with mu toward
        // anchor.ell > T.
        double mu_lo = 0.0;
        double h_lo = face_sol.ell - T;  // ell at the mu -> 0 limit
        double mu_hi = 1.0;
        InnerSolution sol_hi = solve_at(mu_hi, anchor.w);
        while (sol_hi.ell < T) {
            mu_lo = mu_hi;
            h_lo = sol_hi.ell - T;
            mu_hi *= 2.0;
            if (mu_hi > 1e30)
                throw SolverError("ci solver: could not activate the likelihood constraint");
            sol_hi = solve_at(mu_hi, sol_hi.w);
        }

        // Shrink toward the root from the feasible side (secant step with a
        // bisection fallback when progress stalls), so the reported weights
        // are always feasible.
        std::size_t outer = 0;
        bool force_bisect = false;
        while (sol_hi.ell - T > tol_T && outer < cfg.outer_max_iters) {
            ++outer;
            const double h_hi = sol_hi.ell - T;
            const double width = mu_hi - mu_lo;
            double mu_mid;
            if (force_bisect || !(h_hi > h_lo)) {
                mu_mid = mu_lo + 0.5 * width;
            } else {
                mu_mid = mu_hi - h_hi * width / (h_hi - h_lo);
                const double margin = 1e-3 * width;
                mu_mid = std::clamp(mu_mid, mu_lo + margin, mu_hi - margin);
            }
            InnerSolution sol_mid = solve_at(mu_mid, sol_hi.w);
            const double h_mid = sol_mid.ell - T;
            if (h_mid >= 0.0) {
                mu_hi = mu_mid;
                sol_hi = std::move(sol_mid);
            } else {
                mu_lo = mu_mid;
                h_lo = h_mid;
            }
            force_bisect = (mu_hi - mu_lo) > 0.7 * width;
        }
        if (sol_hi.ell - T > 10.0 * tol_T) return std::nullopt;

        DirectionResult pinned = result;
        pinned.value = bound_value(sol_hi.w);
        pinned.slack = sol_hi.ell - T;
        return pinned;
    };

    if (const auto pinned = root_search(cfg.inner_gain_tol, cfg.inner_max_iters)) return *pinned;
    if (const auto pinned =
            root_search(std::max(cfg.inner_gain_tol * 1e-3, 1e-15), cfg.inner_max_iters * 10))
        return *pinned;
    throw SolverError("ci solver: root finding failed to pin the constraint within the "
                      "iteration budget");
}

}  // namespace

CiResult ci_bounds(const CellMatrix& cells, const CellCounts& counts,
                   const std::vector<double>& eta_values, double alpha,
                   const CiSolverConfig& cfg) {
    if (cells.rows < 2) throw std::invalid_argument("ci_bounds: need at least 2 cells");
    if (counts.counts.size() != cells.rows)
        throw std::invalid_argument("ci_bounds: counts do not match the cell matrix");
    if (eta_values.size() != cells.cols)
        throw std::invalid_argument("ci_bounds: eta vector does not match the cell matrix");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::domain_error("ci_bounds: alpha must lie in (0, 1)");
    std::size_t tallied = 0;
    for (std::size_t c : counts.counts) tallied += c;
    if (tallied != counts.total || counts.total == 0)
        throw std::invalid_argument("ci_bounds: cell counts are inconsistent");

    const ActiveCells active = restrict_to_observed(cells, counts);
    for (std::size_t j = 0; j < active.rows; ++j) {
        double best = 0.0;
        for (std::size_t k = 0; k < active.cols; ++k)
            best = std::max(best, active.values[j * active.cols + k]);
        if (!(best > 0.0))
            throw InfeasibleRegionError(
                "ci_bounds: an observed cell has probability zero at every grid atom");
    }

    const double n = double(counts.total);
    double empirical_ell = 0.0;
    for (double c : active.counts) empirical_ell += c * std::log(c / n);
    const double T =
        empirical_ell - 0.5 * chi2_quantile(unsigned(cells.rows - 1), 1.0 - alpha);
    const double tol_T = cfg.outer_rel_tol * std::max(1.0, std::fabs(T));

    CiResult result;
    result.alpha = alpha;

    std::vector<double> w0(active.cols, 1.0 / double(active.cols));
    InnerSolution anchor =
        maximize_augmented(active, {}, 1.0, std::move(w0), cfg.inner_gain_tol, cfg.inner_max_iters);
    result.solver_iterations += anchor.iterations;
    if (anchor.ell < T + tol_T) {
        // Borderline: make sure the verdict is not an artifact of the budget.
        InnerSolution refined =
            maximize_augmented(active, {}, 1.0, blend_with_uniform(anchor.w),
                               std::max(cfg.inner_gain_tol * 1e-3, 1e-15),
                               cfg.inner_max_iters * 25);
        result.solver_iterations += refined.iterations;
        if (refined.ell > anchor.ell) anchor = std::move(refined);
    }

    if (anchor.ell < T - tol_T)
        throw InfeasibleRegionError(
            "ci_bounds: no grid mixture attains the likelihood threshold (max ell = " +
            std::to_string(anchor.ell) + ", T = " + std::to_string(T) + ")");

    const auto anchor_value = [&]() {
        double v = 0.0;
        for (std::size_t k = 0; k < active.cols; ++k) v += eta_values[k] * anchor.w[k];
        return v;
    };

    if (anchor.ell <= T + tol_T) {
        // The feasible set has collapsed to the cell-likelihood maximizer.
        result.eta_lower = result.eta_upper = anchor_value();
        result.constraint_slack_at_bounds = {anchor.ell - T, anchor.ell - T};
        return result;
    }

    double eta_abs_max = 0.0;
    for (double e : eta_values) eta_abs_max = std::max(eta_abs_max, std::fabs(e));
    const double eta_spread = *std::max_element(eta_values.begin(), eta_values.end()) -
                              *std::min_element(eta_values.begin(), eta_values.end());
    if (eta_spread <= 1e-14 * std::max(1.0, eta_abs_max)) {
        result.eta_lower = result.eta_upper = anchor_value();
        result.constraint_slack_at_bounds = {anchor.ell - T, anchor.ell - T};
        return result;
    }

    std::vector<double> negated(eta_values.size());
    for (std::size_t k = 0; k < eta_values.size(); ++k) negated[k] = -eta_values[k];

    const DirectionResult upper = solve_direction(active, eta_values, eta_values, T, anchor, cfg);
    const DirectionResult lower = solve_direction(active, negated, eta_values, T, anchor, cfg);
    result.solver_iterations += upper.iterations + lower.iterations;

    result.eta_lower = std::min(lower.value, upper.value);
    result.eta_upper = std::max(lower.value, upper.value);
    result.constraint_slack_at_bounds = {lower.slack, upper.slack};
    return result;
}

CellScheme default_cell_scheme(const ModelKernel& kernel,
                               const std::vector<CountObservation>& data) {
    if (kernel.kind != ModelKind::poisson_stratum && kernel.kind != ModelKind::binomial_stratum)
        throw std::invalid_argument("default_cell_scheme supports the discrete count models only");
    if (data.empty()) throw InputError("default_cell_scheme: empty data");

    std::vector<int> ks;
    ks.reserve(data.size());
    for (const CountObservation& obs : data) {
        validate(obs);
        ks.push_back(obs.k);
    }
    std::sort(ks.begin(), ks.end());
    const std::size_t rank =
        std::size_t(std::ceil(0.95 * double(ks.size()))) - 1;  // nearest-rank percentile
    const int k_cap = ks[std::min(rank, ks.size() - 1)];

    std::map<std::pair<int, int>, std::size_t> outcome_counts;  // (k, x) -> frequency
    for (const CountObservation& obs : data)
        if (obs.k >= 1 && obs.k <= k_cap) ++outcome_counts[{obs.k, obs.x}];

    CellScheme scheme;
    if (outcome_counts.empty()) {
        scheme.cells.push_back({CountObservation{0, 0}});
        return scheme;
    }

    std::vector<std::pair<std::pair<int, int>, std::size_t>> ranked(outcome_counts.begin(),
                                                                    outcome_counts.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    constexpr std::size_t kMaxCells = 30;  // M cap, counting the tail
    if (ranked.size() > kMaxCells - 1) ranked.resize(kMaxCells - 1);

    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (const auto& [outcome, count] : ranked)
        scheme.cells.push_back({CountObservation{outcome.second, outcome.first}});
    return scheme;
}

}  // namespace gmlemix
