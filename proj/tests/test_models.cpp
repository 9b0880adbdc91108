#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "gmlemix/models.hpp"
#include "gmlemix/rng.hpp"

using namespace gmlemix;

namespace {

// Independent oracle: Poisson pmf via plain factorial arithmetic.
double naive_poisson_pmf(int w, double rate) {
    if (rate == 0.0) return w == 0 ? 1.0 : 0.0;
    double factorial = 1.0;
    for (int i = 2; i <= w; ++i) factorial *= i;
    return std::exp(-rate) * std::pow(rate, w) / factorial;
}

double naive_choose(int n, int k) {
    double result = 1.0;
    for (int i = 0; i < k; ++i) result = result * double(n - i) / double(i + 1);
    return result;
}

}  // namespace

TEST_CASE("poisson stratum kernel matches closed forms") {
    CHECK(poisson_stratum_kernel({0, 0}, {1.0, 1.0}) == doctest::Approx(std::exp(-2.0)).epsilon(1e-12));
    CHECK(poisson_stratum_kernel({0, 0}, {0.0, 0.0}) == doctest::Approx(1.0));
    CHECK(poisson_stratum_kernel({2, 3}, {2.0, 1.0}) ==
          doctest::Approx(2.0 * std::exp(-3.0)).epsilon(1e-12));
}

TEST_CASE("poisson stratum kernel agrees with a naive factorial implementation") {
    RngStream rng = RngStream::root(11);
    for (int trial = 0; trial < 200; ++trial) {
        const int x = int(rng.uniform01() * 8);
        const int k = x + int(rng.uniform01() * 8);
        const PoissonStratumParam param{rng.uniform(0.0, 5.0), rng.uniform(0.0, 5.0)};
        const double expected = naive_poisson_pmf(x, param.xi1) * naive_poisson_pmf(k - x, param.xi2);
        CHECK(poisson_stratum_kernel({x, k}, param) == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("binomial stratum kernel matches closed forms") {
    CHECK(binomial_stratum_kernel({1, 1}, {0.5, 0.5}, 1) == doctest::Approx(0.25));
    CHECK(binomial_stratum_kernel({0, 0}, {0.5, 0.9}, 1) == doctest::Approx(0.5));
    CHECK(binomial_stratum_kernel({1, 2}, {0.5, 0.5}, 4) == doctest::Approx(0.1875).epsilon(1e-12));
    // C(4,2) 0.5^4 * C(2,1) 0.5^2 computed independently
    CHECK(binomial_stratum_kernel({1, 2}, {0.5, 0.5}, 4) ==
          doctest::Approx(naive_choose(4, 2) * std::pow(0.5, 4) * naive_choose(2, 1) *
                          std::pow(0.5, 2)));
}

TEST_CASE("binomial stratum kernel rejects observations beyond the design") {
    CHECK_THROWS_AS(binomial_stratum_kernel({1, 3}, {0.5, 0.5}, 2), std::invalid_argument);
    CHECK_THROWS_AS(binomial_stratum_kernel({2, 1}, {0.5, 0.5}, 2), std::invalid_argument);
}

TEST_CASE("binomial stratum kernel handles boundary atoms with 0^0 = 1") {
    CHECK(binomial_stratum_kernel({1, 1}, {1.0, 1.0}, 1) == doctest::Approx(1.0));
    CHECK(binomial_stratum_kernel({0, 0}, {0.0, 0.5}, 3) == doctest::Approx(1.0));
    CHECK(binomial_stratum_kernel({0, 2}, {1.0, 0.0}, 2) == doctest::Approx(1.0));
    CHECK(binomial_stratum_kernel({1, 1}, {1.0, 0.0}, 1) == doctest::Approx(0.0));
}

TEST_CASE("truncated geometric kernel matches closed forms") {
    CHECK(truncated_geometric_kernel(TruncatedInterviewObservation::null(), {0.5, 0.3}, 2) ==
          doctest::Approx(0.25));
    CHECK(truncated_geometric_kernel(TruncatedInterviewObservation::respond(1, 1), {1.0, 0.3}, 3) ==
          doctest::Approx(0.3));
}

TEST_CASE("truncated geometric kernel sums to one over the outcome space") {
    const BinomialStratumParam param{0.4, 0.7};
    const int kappa0 = 3;
    double total = truncated_geometric_kernel(TruncatedInterviewObservation::null(), param, kappa0);
    for (int kappa = 1; kappa <= kappa0; ++kappa)
        for (int z = 0; z <= 1; ++z)
            total += truncated_geometric_kernel(TruncatedInterviewObservation::respond(z, kappa),
                                                param, kappa0);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exponential family kernels match closed forms") {
    CHECK(expfam_kernel(ExpFamily::normal_unit_variance, {0.0}, 0.0) ==
          doctest::Approx(1.0 / std::sqrt(2.0 * M_PI)).epsilon(1e-12));
    CHECK(expfam_kernel(ExpFamily::bernoulli, {1.0}, 0.5) == doctest::Approx(0.5));
    CHECK(expfam_kernel(ExpFamily::poisson, {3.0}, 2.0) ==
          doctest::Approx(std::exp(-2.0) * 8.0 / 6.0).epsilon(1e-12));
}

TEST_CASE("exponential family kernels reject atoms outside the mean space") {
    CHECK_THROWS_AS(expfam_kernel(ExpFamily::poisson, {1.0}, 0.0), std::domain_error);
    CHECK_THROWS_AS(expfam_kernel(ExpFamily::poisson, {1.0}, -2.0), std::domain_error);
    CHECK_THROWS_AS(expfam_kernel(ExpFamily::bernoulli, {1.0}, 1.5), std::domain_error);
    CHECK_NOTHROW(expfam_kernel(ExpFamily::bernoulli, {1.0}, 1.0));
    CHECK_NOTHROW(expfam_kernel(ExpFamily::bernoulli, {0.0}, 0.0));
}

TEST_CASE("eta_proportion") {
    CHECK(eta_proportion(PoissonStratumParam{1.0, 1.0}, 0.0) == doctest::Approx(0.5));
    CHECK(eta_proportion(PoissonStratumParam{0.0, 0.0}, 0.0) == 0.0);
    CHECK(eta_proportion(PoissonStratumParam{0.0, 0.0}, 0.5) == 0.0);
    CHECK(eta_proportion(BinomialStratumParam{0.3, 0.8}) == doctest::Approx(0.8));
}

TEST_CASE("eta_proportion is scale invariant at epsilon = 0") {
    RngStream rng = RngStream::root(5);
    for (int trial = 0; trial < 100; ++trial) {
        const double xi1 = rng.uniform(0.01, 4.0);
        const double xi2 = rng.uniform(0.01, 4.0);
        const double c = rng.uniform(0.1, 10.0);
        CHECK(eta_proportion(PoissonStratumParam{c * xi1, c * xi2}, 0.0) ==
              doctest::Approx(eta_proportion(PoissonStratumParam{xi1, xi2}, 0.0)).epsilon(1e-12));
    }
}

TEST_CASE("discrete kernels sum to one over the sample space") {
    SUBCASE("binomial stratum model") {
        for (const int kappa : {1, 4}) {
            const ModelKernel kernel = ModelKernel::binomial_stratum(kappa);
            RngStream rng = RngStream::root(21);
            for (int trial = 0; trial < 20; ++trial) {
                const std::array<double, 2> atom{rng.uniform01(), rng.uniform01()};
                double total = 0.0;
                for (int k = 0; k <= kappa; ++k)
                    for (int x = 0; x <= k; ++x) total += kernel.density(CountObservation{x, k}, atom);
                CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            }
        }
    }
    SUBCASE("poisson stratum model, tails truncated far out") {
        const ModelKernel kernel = ModelKernel::poisson_stratum();
        RngStream rng = RngStream::root(22);
        for (int trial = 0; trial < 10; ++trial) {
            const std::array<double, 2> atom{rng.uniform(0.0, 4.0), rng.uniform(0.0, 4.0)};
            const double rate = atom[0] + atom[1];
            const int k_max = int(rate + 20.0 * std::sqrt(rate + 1.0)) + 30;
            double total = 0.0;
            for (int k = 0; k <= k_max; ++k)
                for (int x = 0; x <= k; ++x) total += kernel.density(CountObservation{x, k}, atom);
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("log kernels agree with direct arithmetic on small cases") {
    const CountObservation obs{1, 3};
    const PoissonStratumParam param{0.7, 1.3};
    const double direct = naive_poisson_pmf(1, 0.7) * naive_poisson_pmf(2, 1.3);
    CHECK(std::exp(log_poisson_stratum_kernel(obs, param)) ==
          doctest::Approx(direct).epsilon(1e-12));

    const double direct_binom = naive_choose(4, 3) * std::pow(0.6, 3) * 0.4 *
                                naive_choose(3, 1) * 0.2 * std::pow(0.8, 2);
    CHECK(std::exp(log_binomial_stratum_kernel(obs, {0.6, 0.2}, 4)) ==
          doctest::Approx(direct_binom).epsilon(1e-12));
}

TEST_CASE("model kernel dispatch checks observation types") {
    const ModelKernel kernel = ModelKernel::poisson_stratum();
    CHECK_THROWS_AS(kernel.log_density(ScalarObservation{1.0}, {1.0, 1.0}), std::invalid_argument);
    CHECK(kernel.param_dim() == 2);
    CHECK(ModelKernel::expfam(ExpFamily::poisson).param_dim() == 1);
}

TEST_CASE("model kernel eta dispatch") {
    CHECK(ModelKernel::poisson_stratum().eta({1.0, 1.0}) == doctest::Approx(0.5));
    CHECK(ModelKernel::binomial_stratum(2).eta({0.3, 0.8}) == doctest::Approx(0.8));
    CHECK(ModelKernel::expfam(ExpFamily::normal_unit_variance).eta({1.7, 0.0}) ==
          doctest::Approx(1.7));
}

TEST_CASE("count observation validation") {
    CHECK_THROWS_AS(validate(CountObservation{3, 2}), std::invalid_argument);
    CHECK_THROWS_AS(validate(CountObservation{-1, 2}), std::invalid_argument);
    CHECK_NOTHROW(validate(CountObservation{0, 0}));
}
