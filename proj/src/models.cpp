#include "gmlemix/models.hpp"

#include <cmath>
#include <stdexcept>

#include "gmlemix/special.hpp"

namespace gmlemix {

namespace {

// log Pois(w; rate) with the degenerate-at-zero convention Pois(0; 0) = 1.
double log_poisson_pmf(int w, double rate) {
    if (w < 0) return kNegInf;
    if (rate == 0.0) return w == 0 ? 0.0 : kNegInf;
    return -rate + w * std::log(rate) - log_factorial(w);
}

// log B(k; n, p) with 0^0 = 1 at the probability boundaries.
double log_binomial_pmf(int k, int n, double p) {
    if (k < 0 || k > n) return kNegInf;
    if (p == 0.0) return k == 0 ? 0.0 : kNegInf;
    if (p == 1.0) return k == n ? 0.0 : kNegInf;
    return log_choose(n, k) + k * std::log(p) + (n - k) * std::log1p(-p);
}

// base^e with 0^0 = 1, in log space.
double log_pow_conv(double base, int e) {
    if (e == 0) return 0.0;
    if (base == 0.0) return kNegInf;
    return e * std::log(base);
}

}  // namespace

void validate(const CountObservation& obs) {
    if (obs.x < 0 || obs.k < obs.x)
        throw std::invalid_argument("count observation requires 0 <= x <= k");
}

void validate(const PoissonStratumParam& param) {
    if (!(param.xi1 >= 0.0) || !(param.xi2 >= 0.0) || !std::isfinite(param.xi1) ||
        !std::isfinite(param.xi2))
        throw std::invalid_argument("poisson stratum parameter requires finite xi1, xi2 >= 0");
}

void validate(const BinomialStratumParam& param) {
    if (!(param.pi >= 0.0 && param.pi <= 1.0) || !(param.p >= 0.0 && param.p <= 1.0))
        throw std::invalid_argument("binomial stratum parameter requires pi, p in [0, 1]");
}

double log_poisson_stratum_kernel(const CountObservation& obs, const PoissonStratumParam& param) {
    validate(obs);
    validate(param);
    return log_poisson_pmf(obs.x, param.xi1) + log_poisson_pmf(obs.k - obs.x, param.xi2);
}

double poisson_stratum_kernel(const CountObservation& obs, const PoissonStratumParam& param) {
    return std::exp(log_poisson_stratum_kernel(obs, param));
}

double log_binomial_stratum_kernel(const CountObservation& obs, const BinomialStratumParam& param,
                                   int kappa) {
    validate(obs);
    validate(param);
    if (kappa < 1) throw std::invalid_argument("binomial stratum kernel requires kappa >= 1");
    if (obs.k > kappa)
        throw std::invalid_argument("observation has k > kappa: inconsistent with the design");
    return log_binomial_pmf(obs.k, kappa, param.pi) + log_binomial_pmf(obs.x, obs.k, param.p);
}

double binomial_stratum_kernel(const CountObservation& obs, const BinomialStratumParam& param,
                               int kappa) {
    return std::exp(log_binomial_stratum_kernel(obs, param, kappa));
}

double log_truncated_geometric_kernel(const TruncatedInterviewObservation& obs,
                                      const BinomialStratumParam& param, int kappa0) {
    validate(param);
    if (kappa0 < 1) throw std::invalid_argument("truncated geometric kernel requires kappa0 >= 1");
    if (!obs.answered) return log_pow_conv(1.0 - param.pi, kappa0);
    if (obs.kappa < 1 || obs.kappa > kappa0)
        throw std::invalid_argument("answered outcome requires 1 <= kappa <= kappa0");
    if (obs.z != 0 && obs.z != 1)
        throw std::invalid_argument("answered outcome requires z in {0, 1}");
    const double log_attempt =
        log_pow_conv(1.0 - param.pi, obs.kappa - 1) + log_pow_conv(param.pi, 1);
    const double log_answer = log_pow_conv(param.p, obs.z) + log_pow_conv(1.0 - param.p, 1 - obs.z);
    return log_attempt + log_answer;
}

double truncated_geometric_kernel(const TruncatedInterviewObservation& obs,
                                  const BinomialStratumParam& param, int kappa0) {
    return std::exp(log_truncated_geometric_kernel(obs, param, kappa0));
}

double log_expfam_kernel(ExpFamily family, const ScalarObservation& obs, double atom) {
    switch (family) {
        case ExpFamily::normal_unit_variance: {
            if (!std::isfinite(atom)) throw std::domain_error("normal kernel: mean must be finite");
            const double r = obs.y - atom;
            return -0.5 * std::log(2.0 * M_PI) - 0.5 * r * r;
        }
        case ExpFamily::poisson: {
            if (!(atom > 0.0) || !std::isfinite(atom))
                throw std::domain_error("poisson kernel: mean must be positive");
            const double rounded = std::round(obs.y);
            if (rounded < 0.0 || std::fabs(obs.y - rounded) > 1e-9)
                throw std::invalid_argument("poisson kernel: y must be a nonnegative integer");
            return log_poisson_pmf(int(rounded), atom);
        }
        case ExpFamily::bernoulli: {
            if (!(atom >= 0.0 && atom <= 1.0))
                throw std::domain_error("bernoulli kernel: mean must lie in [0, 1]");
            if (obs.y != 0.0 && obs.y != 1.0)
                throw std::invalid_argument("bernoulli kernel: y must be 0 or 1");
            return log_binomial_pmf(int(obs.y), 1, atom);
        }
    }
    throw std::logic_error("unreachable");
}

double expfam_kernel(ExpFamily family, const ScalarObservation& obs, double atom) {
    return std::exp(log_expfam_kernel(family, obs, atom));
}

double eta_proportion(const PoissonStratumParam& param, double epsilon) {
    validate(param);
    if (epsilon < 0.0) throw std::invalid_argument("eta_proportion: epsilon must be >= 0");
    const double total = param.xi1 + param.xi2;
    if (total <= 0.0) return 0.0;
    return param.xi1 / (total + epsilon);
}

double eta_proportion(const BinomialStratumParam& param) {
    validate(param);
    return param.p;
}

ModelKernel ModelKernel::poisson_stratum(double epsilon) {
    ModelKernel k;
    k.kind = ModelKind::poisson_stratum;
    k.epsilon = epsilon;
    return k;
}

ModelKernel ModelKernel::binomial_stratum(int kappa) {
    if (kappa < 1) throw std::invalid_argument("binomial stratum model requires kappa >= 1");
    ModelKernel k;
    k.kind = ModelKind::binomial_stratum;
    k.kappa = kappa;
    return k;
}

ModelKernel ModelKernel::truncated_geometric(int kappa0) {
    if (kappa0 < 1) throw std::invalid_argument("truncated geometric model requires kappa0 >= 1");
    ModelKernel k;
    k.kind = ModelKind::truncated_geometric;
    k.kappa0 = kappa0;
    return k;
}

ModelKernel ModelKernel::expfam(ExpFamily family) {
    ModelKernel k;
    switch (family) {
        case ExpFamily::normal_unit_variance: k.kind = ModelKind::expfam_normal; break;
        case ExpFamily::poisson: k.kind = ModelKind::expfam_poisson; break;
        case ExpFamily::bernoulli: k.kind = ModelKind::expfam_bernoulli; break;
    }
    return k;
}

std::size_t ModelKernel::param_dim() const {
    switch (kind) {
        case ModelKind::poisson_stratum:
        case ModelKind::binomial_stratum:
        case ModelKind::truncated_geometric: return 2;
        default: return 1;
    }
}

std::string ModelKernel::sample_space() const {
    switch (kind) {
        case ModelKind::poisson_stratum: return "(x, k) count pairs, 0 <= x <= k";
        case ModelKind::binomial_stratum: return "(x, k) count pairs, 0 <= x <= k <= kappa";
        case ModelKind::truncated_geometric:
            return "answered(z, kappa) with kappa <= kappa0, or null";
        case ModelKind::expfam_normal: return "real line";
        case ModelKind::expfam_poisson: return "nonnegative integers";
        case ModelKind::expfam_bernoulli: return "{0, 1}";
    }
    return {};
}

namespace {

template <typename T>
const T& expect(const Observation& obs, const char* model) {
    const T* typed = std::get_if<T>(&obs);
    if (!typed) throw std::invalid_argument(std::string(model) + ": observation type mismatch");
    return *typed;
}

}  // namespace

double ModelKernel::log_density(const Observation& obs, const std::array<double, 2>& atom) const {
    switch (kind) {
        case ModelKind::poisson_stratum:
            return log_poisson_stratum_kernel(expect<CountObservation>(obs, "poisson_stratum"),
                                              {atom[0], atom[1]});
        case ModelKind::binomial_stratum:
            return log_binomial_stratum_kernel(expect<CountObservation>(obs, "binomial_stratum"),
                                               {atom[0], atom[1]}, kappa);
        case ModelKind::truncated_geometric:
            return log_truncated_geometric_kernel(
                expect<TruncatedInterviewObservation>(obs, "truncated_geometric"),
                {atom[0], atom[1]}, kappa0);
        case ModelKind::expfam_normal:
            return log_expfam_kernel(ExpFamily::normal_unit_variance,
                                     expect<ScalarObservation>(obs, "expfam_normal"), atom[0]);
        case ModelKind::expfam_poisson:
            return log_expfam_kernel(ExpFamily::poisson,
                                     expect<ScalarObservation>(obs, "expfam_poisson"), atom[0]);
        case ModelKind::expfam_bernoulli:
            return log_expfam_kernel(ExpFamily::bernoulli,
                                     expect<ScalarObservation>(obs, "expfam_bernoulli"), atom[0]);
    }
    throw std::logic_error("unreachable");
}

double ModelKernel::density(const Observation& obs, const std::array<double, 2>& atom) const {
    return std::exp(log_density(obs, atom));
}

double ModelKernel::eta(const std::array<double, 2>& atom) const {
    switch (kind) {
        case ModelKind::poisson_stratum: return eta_proportion({atom[0], atom[1]}, epsilon);
        case ModelKind::binomial_stratum:
        case ModelKind::truncated_geometric: return eta_proportion(BinomialStratumParam{atom[0], atom[1]});
        default: return atom[0];
    }
}

}  // namespace gmlemix
