#include "gmlemix/npmle.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "gmlemix/errors.hpp"
#include "gmlemix/special.hpp"

namespace gmlemix {

namespace {

// Rows whose max log-kernel falls below this are stored rescaled by their max.
constexpr double kRowRescaleLogMax = -600.0;

void append_row(LikelihoodMatrix& matrix, const std::vector<double>& log_row,
                std::size_t obs_index) {
    double max_log = kNegInf;
    for (double v : log_row) max_log = std::max(max_log, v);
    if (max_log == kNegInf)
        throw InputError("likelihood matrix: observation " + std::to_string(obs_index) +
                         " has zero likelihood at every grid atom");
    const double scale = max_log < kRowRescaleLogMax ? max_log : 0.0;
    matrix.row_log_scale.push_back(scale);
    for (double v : log_row) matrix.values.push_back(std::exp(v - scale));
    ++matrix.rows;
}

struct PooledMatrix {
    std::size_t rows = 0;           // distinct rows
    std::size_t cols = 0;
    std::vector<double> values;     // row-major
    std::vector<double> counts;     // multiplicity of each distinct row
    std::vector<double> log_scale;  // row_log_scale of each distinct row
    double total = 0.0;             // sum of counts = original row count
};

// Pool identical rows (same bytes and same scale) with multiplicities. The EM
// update only sees rows through sums weighted by their multiplicity, so the
// pooled iteration is the exact update of the full matrix up to summation
// order.
PooledMatrix pool_rows(const LikelihoodMatrix& matrix) {
    PooledMatrix pooled;
    pooled.cols = matrix.cols;
    pooled.total = double(matrix.rows);
    std::unordered_map<std::string, std::size_t> seen;
    seen.reserve(matrix.rows * 2);
    const std::size_t row_bytes = matrix.cols * sizeof(double);
    std::string key(row_bytes + sizeof(double), '\0');
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        std::memcpy(key.data(), matrix.values.data() + i * matrix.cols, row_bytes);
        std::memcpy(key.data() + row_bytes, &matrix.row_log_scale[i], sizeof(double));
        auto [it, inserted] = seen.emplace(key, pooled.rows);
        if (inserted) {
            pooled.values.insert(pooled.values.end(), matrix.values.begin() + i * matrix.cols,
                                 matrix.values.begin() + (i + 1) * matrix.cols);
            pooled.counts.push_back(1.0);
            pooled.log_scale.push_back(matrix.row_log_scale[i]);
            ++pooled.rows;
        } else {
            pooled.counts[it->second] += 1.0;
        }
    }
    return pooled;
}

// (Lw)_i for the pooled rows; throws if some observation has zero mixture
// likelihood (EM cannot proceed and the log-likelihood is -inf).
void mixture_likelihoods(const PooledMatrix& pooled, const std::vector<double>& w,
                         std::vector<double>& mix) {
    mix.assign(pooled.rows, 0.0);
    for (std::size_t i = 0; i < pooled.rows; ++i) {
        const double* row = pooled.values.data() + i * pooled.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < pooled.cols; ++j) acc += row[j] * w[j];
        if (!(acc > 0.0))
            throw SolverError("mixture likelihood is zero for some observation; "
                              "the initial weights cannot explain the data");
        mix[i] = acc;
    }
}

double pooled_log_likelihood(const PooledMatrix& pooled, const std::vector<double>& mix) {
    double ll = 0.0;
    for (std::size_t i = 0; i < pooled.rows; ++i)
        ll += pooled.counts[i] * (std::log(mix[i]) + pooled.log_scale[i]);
    return ll;
}

// g_j = (1/n) sum_i c_i L_ij / (Lw)_i: the multiplier of the EM update.
void em_multipliers(const PooledMatrix& pooled, const std::vector<double>& mix,
                    std::vector<double>& g) {
    g.assign(pooled.cols, 0.0);
    for (std::size_t i = 0; i < pooled.rows; ++i) {
        const double* row = pooled.values.data() + i * pooled.cols;
        const double factor = pooled.counts[i] / (mix[i] * pooled.total);
        for (std::size_t j = 0; j < pooled.cols; ++j) g[j] += factor * row[j];
    }
}

}  // namespace

LikelihoodMatrix build_likelihood_matrix(const ModelKernel& kernel,
                                         const std::vector<Observation>& data,
                                         const ParameterGrid& grid) {
    if (data.empty()) throw InputError("likelihood matrix: empty data");
    if (grid.size() == 0) throw InputError("likelihood matrix: empty grid");
    LikelihoodMatrix matrix;
    matrix.cols = grid.size();
    matrix.values.reserve(data.size() * grid.size());
    std::vector<double> log_row(grid.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        for (std::size_t j = 0; j < grid.size(); ++j)
            log_row[j] = kernel.log_density(data[i], grid.atoms[j]);
        append_row(matrix, log_row, i);
    }
    return matrix;
}

LikelihoodMatrix build_likelihood_matrix(const ModelKernel& kernel,
                                         const std::vector<CountObservation>& data,
                                         const ParameterGrid& grid) {
    if (data.empty()) throw InputError("likelihood matrix: empty data");
    if (grid.size() == 0) throw InputError("likelihood matrix: empty grid");
    LikelihoodMatrix matrix;
    matrix.cols = grid.size();
    matrix.values.reserve(data.size() * grid.size());

    // Count data repeats heavily; evaluate the kernel once per distinct pair.
    std::unordered_map<long long, std::vector<double>> cache;
    std::vector<double> log_row(grid.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        validate(data[i]);
        const long long code = (long long)(data[i].k) * 1000000LL + data[i].x;
        auto it = cache.find(code);
        if (it == cache.end()) {
            const Observation obs = data[i];
            for (std::size_t j = 0; j < grid.size(); ++j)
                log_row[j] = kernel.log_density(obs, grid.atoms[j]);
            it = cache.emplace(code, log_row).first;
        }
        append_row(matrix, it->second, i);
    }
    return matrix;
}

EmReport em_fit(const LikelihoodMatrix& matrix, const MixingDistribution& init,
                const EmConfig& config) {
    if (init.weights.size() != matrix.cols)
        throw std::invalid_argument("em_fit: initial weights do not match the matrix columns");
    validate(init);

    const PooledMatrix pooled = pool_rows(matrix);
    std::vector<double> w = init.weights;
    std::vector<double> mix, g;

    EmReport report;
    report.loglik_trace.reserve(config.max_iters + 1);
    mixture_likelihoods(pooled, w, mix);
    double ll = pooled_log_likelihood(pooled, mix);
    report.loglik_trace.push_back(ll);

    for (std::size_t iter = 0; iter < config.max_iters; ++iter) {
        em_multipliers(pooled, mix, g);
        double total = 0.0;
        for (std::size_t j = 0; j < pooled.cols; ++j) {
            w[j] *= g[j];
            total += w[j];
        }
        for (double& wj : w) wj /= total;

        mixture_likelihoods(pooled, w, mix);
        const double next_ll = pooled_log_likelihood(pooled, mix);
        report.loglik_trace.push_back(next_ll);
        ++report.iterations_run;
        const double gain = next_ll - ll;
        ll = next_ll;
        if (config.stop_tol > 0.0 && gain < config.stop_tol) break;
    }

    em_multipliers(pooled, mix, g);
    double residual = 0.0;
    for (std::size_t j = 0; j < pooled.cols; ++j)
        residual = std::max(residual, std::fabs(w[j] * g[j] - w[j]));

    report.weights = MixingDistribution{init.grid, std::move(w)};
    report.fixed_point_residual = residual;
    report.final_log_likelihood = ll;
    return report;
}

EmReport em_fit_uniform(const LikelihoodMatrix& matrix, GridPtr grid, const EmConfig& config) {
    if (!grid || grid->size() != matrix.cols)
        throw std::invalid_argument("em_fit_uniform: grid does not match the matrix columns");
    return em_fit(matrix, uniform_mixing(std::move(grid)), config);
}

double log_likelihood(const LikelihoodMatrix& matrix, const std::vector<double>& weights) {
    if (weights.size() != matrix.cols)
        throw std::invalid_argument("log_likelihood: weight vector does not match the matrix");
    double ll = 0.0;
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        const double* row = matrix.values.data() + i * matrix.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < matrix.cols; ++j) acc += row[j] * weights[j];
        if (!(acc > 0.0))
            throw SolverError("log_likelihood is -inf: observation " + std::to_string(i) +
                              " has zero likelihood under the mixture");
        ll += std::log(acc) + matrix.row_log_scale[i];
    }
    return ll;
}

namespace {

double log_likelihood_or_neg_inf(const LikelihoodMatrix& matrix, const std::vector<double>& w) {
    double ll = 0.0;
    for (std::size_t i = 0; i < matrix.rows; ++i) {
        const double* row = matrix.values.data() + i * matrix.cols;
        double acc = 0.0;
        for (std::size_t j = 0; j < matrix.cols; ++j) acc += row[j] * w[j];
        if (!(acc > 0.0)) return kNegInf;
        ll += std::log(acc) + matrix.row_log_scale[i];
    }
    return ll;
}

}  // namespace

MixingDistribution brute_force_gmle(const LikelihoodMatrix& matrix, GridPtr grid) {
    const std::size_t m = matrix.cols;
    if (m > 3) throw std::invalid_argument("brute_force_gmle supports at most 3 atoms");
    if (grid && grid->size() != m)
        throw std::invalid_argument("brute_force_gmle: grid does not match the matrix");

    std::vector<double> best{1.0};
    if (m == 1) return MixingDistribution{std::move(grid), std::move(best)};

    double best_ll = kNegInf;
    std::vector<double> w(m, 0.0);
    const auto consider = [&](double w1, double w2) {
        w[0] = w1;
        w[1] = w2;
        if (m == 3) w[2] = 1.0 - w1 - w2;
        const double ll = log_likelihood_or_neg_inf(matrix, w);
        if (ll > best_ll) {
            best_ll = ll;
            best = w;
        }
    };

    const auto scan = [&](double lo1, double hi1, double lo2, double hi2, double step) {
        lo1 = std::max(lo1, 0.0);
        lo2 = std::max(lo2, 0.0);
        for (double w1 = lo1; w1 <= std::min(hi1, 1.0) + step / 2; w1 += step) {
            const double w1c = std::min(w1, 1.0);
            if (m == 2) {
                consider(w1c, 1.0 - w1c);
            } else {
                const double cap = 1.0 - w1c;
                for (double w2 = lo2; w2 <= std::min(hi2, cap) + step / 2; w2 += step)
                    consider(w1c, std::min(w2, cap));
            }
        }
    };

    const double coarse = 1e-3;
    scan(0.0, 1.0, 0.0, 1.0, coarse);
    best.resize(m);
    const std::vector<double> anchor = best;
    scan(anchor[0] - coarse, anchor[0] + coarse,
         m == 3 ? anchor[1] - coarse : 0.0, m == 3 ? anchor[1] + coarse : 1.0, 1e-5);

    return MixingDistribution{std::move(grid), std::move(best)};
}

}  // namespace gmlemix
