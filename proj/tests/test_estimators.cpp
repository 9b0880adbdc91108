#include <doctest.h>

#include <cmath>
#include <memory>

#include "gmlemix/errors.hpp"
#include "gmlemix/estimators.hpp"
#include "gmlemix/rng.hpp"
#include "gmlemix/sim.hpp"

using namespace gmlemix;

namespace {

LikelihoodMatrix literal_matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    LikelihoodMatrix matrix;
    matrix.rows = rows;
    matrix.cols = cols;
    matrix.values = std::move(values);
    matrix.row_log_scale.assign(rows, 0.0);
    return matrix;
}

GridPtr pi_p_atoms(std::vector<std::array<double, 2>> atoms) {
    auto grid = std::make_shared<ParameterGrid>();
    grid->dim = 2;
    grid->atoms = std::move(atoms);
    return grid;
}

}  // namespace

TEST_CASE("naive estimator") {
    CHECK(*naive_estimator({{1, 2}, {0, 1}}).value == doctest::Approx(0.25));
    CHECK(*naive_estimator({{1, 1}}).value == doctest::Approx(1.0));
    const RatioEstimate undefined = naive_estimator({{0, 0}, {1, 1}});
    CHECK(!undefined.defined());
    CHECK(undefined.empty_strata == 1);
}

TEST_CASE("extreme collapse estimator") {
    CHECK(*extreme_collapse_estimator({{1, 2}, {0, 1}}).value == doctest::Approx(1.0 / 3.0));
    CHECK(!extreme_collapse_estimator({{0, 0}, {0, 0}}).defined());
    CHECK(*extreme_collapse_estimator({{2, 4}}).value == doctest::Approx(0.5));
}

TEST_CASE("posterior mean") {
    SUBCASE("degenerate weights return eta at the atom") {
        const LikelihoodMatrix matrix = literal_matrix(2, 2, {0.3, 0.9, 0.8, 0.2});
        CHECK(posterior_mean(matrix, {0.0, 1.0}, {5.0, 7.0}, 0) == doctest::Approx(7.0));
        CHECK(posterior_mean(matrix, {0.0, 1.0}, {5.0, 7.0}, 1) == doctest::Approx(7.0));
    }
    SUBCASE("constant eta is returned unchanged") {
        const LikelihoodMatrix matrix = literal_matrix(1, 3, {0.2, 0.3, 0.5});
        CHECK(posterior_mean(matrix, {0.2, 0.5, 0.3}, {4.0, 4.0, 4.0}, 0) == doctest::Approx(4.0));
    }
    SUBCASE("hand-computed two-atom case") {
        const LikelihoodMatrix matrix = literal_matrix(1, 2, {0.2, 0.8});
        CHECK(posterior_mean(matrix, {0.5, 0.5}, {0.0, 1.0}, 0) == doctest::Approx(0.8));
    }
    SUBCASE("zero mixture likelihood is an error") {
        const LikelihoodMatrix matrix = literal_matrix(1, 2, {0.0, 0.4});
        CHECK_THROWS_AS(posterior_mean(matrix, {1.0, 0.0}, {0.0, 1.0}, 0), SolverError);
    }
}

TEST_CASE("posterior means batch equals per-observation calls") {
    const LikelihoodMatrix matrix = literal_matrix(3, 2, {0.2, 0.8, 0.5, 0.5, 0.9, 0.1});
    const std::vector<double> w{0.4, 0.6};
    const std::vector<double> etas{0.0, 1.0};
    const std::vector<double> batch = posterior_means(matrix, w, etas);
    REQUIRE(batch.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(batch[i] == doctest::Approx(posterior_mean(matrix, w, etas, i)));
        CHECK(batch[i] >= 0.0);  // posterior means stay within the eta range
        CHECK(batch[i] <= 1.0);
    }
}

TEST_CASE("gmle plug-in delegates to the functional mean") {
    const GridPtr grid = make_product_grid({{0.0, 1.0, 2}});
    CHECK(gmle_plug_in({grid, {0.5, 0.5}}, {0.0, 1.0}) == doctest::Approx(0.5));
    CHECK(gmle_plug_in({grid, {0.0, 1.0}}, {0.3, 0.9}) == doctest::Approx(0.9));
}

TEST_CASE("truncated reweighting") {
    SUBCASE("certain response leaves the weights unchanged") {
        const GridPtr grid = pi_p_atoms({{1.0, 0.2}, {1.0, 0.9}});
        const ReweightResult result = truncated_reweight({grid, {0.3, 0.7}}, 3);
        CHECK(result.weights.weights[0] == doctest::Approx(0.3));
        CHECK(result.weights.weights[1] == doctest::Approx(0.7));
        CHECK(result.near_singular_atoms.empty());
    }
    SUBCASE("hand-computed reweighting") {
        const GridPtr grid = pi_p_atoms({{0.5, 0.2}, {1.0, 0.7}});
        const ReweightResult result = truncated_reweight({grid, {0.5, 0.5}}, 1);
        CHECK(result.weights.weights[0] == doctest::Approx(2.0 / 3.0));
        CHECK(result.weights.weights[1] == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("weighted atom with pi = 0 is an error") {
        const GridPtr grid = pi_p_atoms({{0.0, 0.2}, {0.5, 0.7}});
        CHECK_THROWS_AS(truncated_reweight({grid, {0.5, 0.5}}, 2), SolverError);
    }
    SUBCASE("unweighted atom with pi = 0 is fine") {
        const GridPtr grid = pi_p_atoms({{0.0, 0.2}, {0.5, 0.7}});
        const ReweightResult result = truncated_reweight({grid, {0.0, 1.0}}, 2);
        CHECK(result.weights.weights[1] == doctest::Approx(1.0));
    }
    SUBCASE("near-singular response probabilities are flagged") {
        const GridPtr grid = pi_p_atoms({{1e-4, 0.2}, {0.9, 0.7}});
        const ReweightResult result = truncated_reweight({grid, {0.5, 0.5}}, 1);
        REQUIRE(result.near_singular_atoms.size() == 1);
        CHECK(result.near_singular_atoms[0] == 0);
    }
}

TEST_CASE("reweighting is invariant to positive rescaling of the input") {
    const GridPtr grid = pi_p_atoms({{0.4, 0.1}, {0.8, 0.6}, {0.6, 0.9}});
    const std::vector<double> base{0.2, 0.5, 0.3};
    std::vector<double> scaled;
    for (double w : base) scaled.push_back(3.7 * w);
    const ReweightResult a = truncated_reweight({grid, base}, 2);
    const ReweightResult b = truncated_reweight({grid, scaled}, 2);
    const std::vector<double> etas{0.1, 0.6, 0.9};
    CHECK(functional_mean(a.weights, etas) ==
          doctest::Approx(functional_mean(b.weights, etas)).epsilon(1e-12));
}

TEST_CASE("estimate_all matches its component calls") {
    PopulationSpec spec;
    spec.model = ModelFamily::poisson_sizes;
    spec.groups = {{40, {1.5, 1.5}, {0.4, 0.4}, 0}, {40, {1.0, 1.0}, {0.6, 0.6}, 0}};
    RngStream root = RngStream::root(31);
    RngStream pop_rng = root.child(0);
    RngStream obs_rng = root.child(1);
    const auto params = draw_population(spec, pop_rng);
    const auto data = draw_observations(params, spec.model, obs_rng);

    const GridPtr grid = make_product_grid({{0.05, 3.0, 8}, {0.05, 3.0, 8}});
    const ModelKernel kernel = ModelKernel::poisson_stratum();
    const EmConfig config{300, 0.0};
    const EstimateSet set = estimate_all(kernel, data, grid, config);

    const LikelihoodMatrix matrix = build_likelihood_matrix(kernel, data, *grid);
    const EmReport report = em_fit_uniform(matrix, grid, config);
    const std::vector<double> etas = eta_values(kernel, *grid);
    CHECK(set.gmle == doctest::Approx(gmle_plug_in(report.weights, etas)).epsilon(1e-12));
    CHECK(set.posterior_means.size() == data.size());

    const RatioEstimate naive = naive_estimator(data);
    CHECK(set.naive.defined() == naive.defined());
    CHECK(set.naive.empty_strata == naive.empty_strata);
    CHECK(*set.extreme_collapse.value == *extreme_collapse_estimator(data).value);
}

TEST_CASE("empty strata leave the gmle defined while the naive estimator is not") {
    const std::vector<CountObservation> data{{0, 0}, {1, 2}, {2, 3}, {0, 0}, {1, 1}};
    const GridPtr grid = make_product_grid({{0.05, 4.0, 6}, {0.05, 4.0, 6}});
    const EstimateSet set = estimate_all(ModelKernel::poisson_stratum(), data, grid, {200, 0.0});
    CHECK(!set.naive.defined());
    CHECK(set.naive.empty_strata == 2);
    CHECK(set.gmle >= 0.0);
    CHECK(set.gmle <= 1.0);
}

TEST_CASE("single stratum: naive equals extreme collapse equals x/k") {
    const std::vector<CountObservation> data{{3, 4}};
    const GridPtr grid = make_product_grid({{0.05, 8.0, 6}, {0.05, 8.0, 6}});
    const EstimateSet set = estimate_all(ModelKernel::poisson_stratum(), data, grid, {100, 0.0});
    CHECK(*set.naive.value == doctest::Approx(0.75));
    CHECK(*set.extreme_collapse.value == doctest::Approx(0.75));
}

TEST_CASE("plug-in mean equals the average posterior mean at an em fixed point") {
    PopulationSpec spec;
    spec.model = ModelFamily::binomial_sizes;
    spec.groups = {{60, {0.3, 0.7}, {0.2, 0.8}, 3}};
    RngStream root = RngStream::root(77);
    RngStream pop_rng = root.child(0);
    RngStream obs_rng = root.child(1);
    const auto params = draw_population(spec, pop_rng);
    const auto data = draw_observations(params, spec.model, obs_rng);

    const GridPtr grid = make_product_grid({{0.0, 1.0, 6}, {0.0, 1.0, 6}});
    const ModelKernel kernel = ModelKernel::binomial_stratum(3);
    const LikelihoodMatrix matrix = build_likelihood_matrix(kernel, data, *grid);

    EmReport report = em_fit_uniform(matrix, grid, {5000, 0.0});
    for (int round = 0; round < 40 && report.fixed_point_residual >= 1e-9; ++round)
        report = em_fit(matrix, report.weights, {5000, 0.0});
    REQUIRE(report.fixed_point_residual < 1e-9);

    const std::vector<double> etas = eta_values(kernel, *grid);
    const std::vector<double> posts = posterior_means(matrix, report.weights.weights, etas);
    double avg = 0.0;
    for (double v : posts) avg += v;
    avg /= double(posts.size());
    CHECK(std::fabs(gmle_plug_in(report.weights, etas) - avg) <= 1e-6);
}

TEST_CASE("bernoulli data on a grid containing the sample mean matches the moment identity") {
    const GridPtr grid = make_product_grid({{0.1, 0.9, 5}});  // contains 0.3
    std::vector<Observation> data;
    for (int i = 0; i < 7; ++i) data.push_back(ScalarObservation{0.0});
    for (int i = 0; i < 3; ++i) data.push_back(ScalarObservation{1.0});
    const ModelKernel kernel = ModelKernel::expfam(ExpFamily::bernoulli);
    const LikelihoodMatrix matrix = build_likelihood_matrix(kernel, data, *grid);

    EmReport report = em_fit_uniform(matrix, grid, {20000, 0.0});
    for (int round = 0; round < 20 && report.fixed_point_residual >= 1e-12; ++round)
        report = em_fit(matrix, report.weights, {20000, 0.0});

    const std::vector<double> etas = eta_values(kernel, *grid);
    CHECK(std::fabs(gmle_plug_in(report.weights, etas) - 0.3) <= 1e-6);
}
