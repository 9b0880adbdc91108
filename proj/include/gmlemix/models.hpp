#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <variant>

// Parametric kernels for the sampling models: per-stratum counts with
// binomial or Poisson sample sizes, the truncated-interview model, and the
// scalar exponential families. Kernels are pure functions evaluated in log
// space; the linear-scale wrappers exponentiate at the end.

namespace gmlemix {

// (xi1, xi2): rates of the independent success/failure Poisson counts in the
// post-stratification model. lambda = xi1 + xi2 and p = xi1 / lambda are
// recoverable whenever lambda > 0.
struct PoissonStratumParam {
    double xi1 = 0.0;
    double xi2 = 0.0;

    double lambda() const { return xi1 + xi2; }
};

// (pi, p): response probability and trait proportion of one stratum in the
// stratified-sampling model. Both live in [0, 1].
struct BinomialStratumParam {
    double pi = 0.0;
    double p = 0.0;
};

// (x, k): trait count among the k responders of one stratum; 0 <= x <= k.
struct CountObservation {
    int x = 0;
    int k = 0;

    friend bool operator==(const CountObservation&, const CountObservation&) = default;
};

// Outcome of repeatedly attempting to interview one individual: either an
// answer z on attempt kappa (1 <= kappa <= kappa0), or no response at all.
struct TruncatedInterviewObservation {
    bool answered = false;
    int z = 0;
    int kappa = 0;

    static TruncatedInterviewObservation respond(int z, int kappa) {
        return {true, z, kappa};
    }
    static TruncatedInterviewObservation null() { return {}; }
};

// A single draw from a scalar exponential-family kernel.
struct ScalarObservation {
    double y = 0.0;
};

void validate(const CountObservation& obs);
void validate(const PoissonStratumParam& param);
void validate(const BinomialStratumParam& param);

enum class ExpFamily { normal_unit_variance, poisson, bernoulli };

// --- kernel evaluations -----------------------------------------------------

// Pois(x; xi1) * Pois(k - x; xi2), with Pois(0; 0) = 1.
double log_poisson_stratum_kernel(const CountObservation& obs, const PoissonStratumParam& param);
double poisson_stratum_kernel(const CountObservation& obs, const PoissonStratumParam& param);

// B(k; kappa, pi) * B(x; k, p), with the 0^0 = 1 convention so that boundary
// atoms (pi or p in {0, 1}) are legal mixture support.
double log_binomial_stratum_kernel(const CountObservation& obs, const BinomialStratumParam& param,
                                   int kappa);
double binomial_stratum_kernel(const CountObservation& obs, const BinomialStratumParam& param,
                               int kappa);

// Answered(z, kappa): (1-pi)^(kappa-1) * pi * p^z (1-p)^(1-z);
// Null: (1-pi)^kappa0.
double log_truncated_geometric_kernel(const TruncatedInterviewObservation& obs,
                                      const BinomialStratumParam& param, int kappa0);
double truncated_geometric_kernel(const TruncatedInterviewObservation& obs,
                                  const BinomialStratumParam& param, int kappa0);

// Scalar exponential families in the mean parametrization, so grid atoms are
// means: the whole real line for the normal kernel, positive rates for the
// Poisson, [0, 1] for the Bernoulli.
double log_expfam_kernel(ExpFamily family, const ScalarObservation& obs, double atom);
double expfam_kernel(ExpFamily family, const ScalarObservation& obs, double atom);

// --- target functionals -----------------------------------------------------

// Trait proportion p = xi1 / (xi1 + xi2 + epsilon) when lambda > 0, else 0.
double eta_proportion(const PoissonStratumParam& param, double epsilon = 0.0);
double eta_proportion(const BinomialStratumParam& param);

// --- the enumerated kernel object -------------------------------------------

enum class ModelKind {
    poisson_stratum,
    binomial_stratum,
    truncated_geometric,
    expfam_normal,
    expfam_poisson,
    expfam_bernoulli,
};

using Observation = std::variant<CountObservation, TruncatedInterviewObservation, ScalarObservation>;

// A sampling model bundled with its fixed design constants. Atoms are points
// of the model's parameter grid: (xi1, xi2), (pi, p), or a scalar mean in the
// first coordinate.
struct ModelKernel {
    ModelKind kind = ModelKind::poisson_stratum;
    int kappa = 0;         // design sample size, binomial_stratum only
    int kappa0 = 0;        // attempt cap, truncated_geometric only
    double epsilon = 0.0;  // smoothing constant of the proportion functional

    static ModelKernel poisson_stratum(double epsilon = 0.0);
    static ModelKernel binomial_stratum(int kappa);
    static ModelKernel truncated_geometric(int kappa0);
    static ModelKernel expfam(ExpFamily family);

    std::size_t param_dim() const;
    std::string sample_space() const;

    double log_density(const Observation& obs, const std::array<double, 2>& atom) const;
    double density(const Observation& obs, const std::array<double, 2>& atom) const;

    // The default target functional eta(atom) for this model: the trait
    // proportion for the sampling models, the mean for exponential families.
    double eta(const std::array<double, 2>& atom) const;
};

}  // namespace gmlemix
