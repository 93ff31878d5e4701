#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "meancurve/simulation.hpp"

using namespace meancurve;

namespace {

EnumerationInstance tiny_instance(EstimatorTag tag, ResponseModel model, SamplingDesign design,
                                  std::uint64_t pop_seed = 7) {
    const TimeGrid grid = TimeGrid::uniform(1.0, 2);
    auto pop = generate_population(pop_seed, design.population_size(), grid, 1, 1.0);
    return EnumerationInstance{std::move(pop),
                               std::move(design),
                               std::move(model),
                               KernelSpec(Kernel::Epanechnikov, 1.2),
                               tag,
                               {0.0, 0.4, 1.0},
                               "tiny"};
}

} // namespace

TEST_CASE("exact_moments: census plus full response is deterministic") {
    auto inst = tiny_instance(EstimatorTag::HT, ResponseModel::full_response(3),
                              SamplingDesign::srswor(3, 3));
    const auto report = exact_moments(inst);
    CHECK(report.probability_total == Catch::Approx(1.0).margin(1e-12));
    for (std::size_t e = 0; e < report.eval_points.size(); ++e) {
        CHECK(report.exact_mean[e] == Catch::Approx(report.formula_mean[e]).margin(1e-14));
        CHECK(report.exact_variance[e] == Catch::Approx(0.0).margin(1e-20));
    }
}

TEST_CASE("exact_moments: HT is unbiased and the exact variance formula matches") {
    for (int variant = 0; variant < 2; ++variant) {
        const auto model =
            variant == 0
                ? ResponseModel::homogeneous_groups(std::vector<int>(4, 0),
                                                    MatrixRd::Constant(1, 2, 0.7))
                : ResponseModel::markov_gap(std::vector<int>(4, 0), {0.8}, {0.5});
        auto inst = tiny_instance(EstimatorTag::HT, model, SamplingDesign::srswor(4, 2));
        const auto joint = exact_moments(inst, 1e6, EnumStrategy::JointMask);
        const auto factored = exact_moments(inst, 1e6, EnumStrategy::PerUnitFactored);
        CHECK(joint.probability_total == Catch::Approx(1.0).margin(1e-12));
        CHECK(joint.max_mean_discrepancy < 1e-12);      // unbiased for mu_tilde
        CHECK(joint.max_variance_discrepancy < 1e-12);  // exact variance formula
        for (std::size_t e = 0; e < joint.eval_points.size(); ++e) {
            CHECK(joint.exact_mean[e] == Catch::Approx(factored.exact_mean[e]).margin(1e-12));
            CHECK(joint.exact_variance[e] ==
                  Catch::Approx(factored.exact_variance[e]).margin(1e-12));
            CHECK(joint.defined_probability[e] == Catch::Approx(1.0).margin(1e-12));
        }
    }
}

TEST_CASE("exact_moments: Poisson designs and stratified designs") {
    {
        const auto model = ResponseModel::homogeneous_groups(std::vector<int>(3, 0),
                                                             MatrixRd::Constant(1, 2, 0.6));
        auto inst = tiny_instance(EstimatorTag::HT, model,
                                  SamplingDesign::poisson({0.4, 0.7, 0.6}));
        const auto report = exact_moments(inst);
        CHECK(report.max_mean_discrepancy < 1e-12);
        CHECK(report.max_variance_discrepancy < 1e-12);
    }
    {
        // exactness of the stratified variance formula against the oracle
        const TimeGrid grid = TimeGrid::uniform(1.0, 2);
        auto pop = generate_population(3, 5, grid, 2, 1.0);
        const auto design = SamplingDesign::stratified(pop.strata, {1, 2});
        const auto model = ResponseModel::markov_gap(pop.strata, {0.75, 0.85}, {0.4, 0.2});
        EnumerationInstance inst{pop,
                                 design,
                                 model,
                                 KernelSpec(Kernel::Epanechnikov, 1.2),
                                 EstimatorTag::HT,
                                 {0.25, 0.6},
                                 "stratified tiny"};
        const auto report = exact_moments(inst);
        CHECK(report.max_mean_discrepancy < 1e-12);
        CHECK(report.max_variance_discrepancy < 1e-12);
        for (std::size_t e = 0; e < inst.eval_points.size(); ++e) {
            const auto strat = variance_stratified(EstimatorTag::HT, inst.pop, design, model,
                                                   inst.spec, inst.eval_points[e]);
            CHECK(strat.total == Catch::Approx(report.exact_variance[e]).margin(1e-12));
        }
    }
}

TEST_CASE("exact_moments: hajek tags condition on definedness") {
    const auto model = ResponseModel::homogeneous_groups(std::vector<int>(4, 0),
                                                         MatrixRd::Constant(1, 2, 0.6));
    auto inst = tiny_instance(EstimatorTag::Hajek1, model, SamplingDesign::srswor(4, 2));
    const auto report = exact_moments(inst);
    // the all-nonresponse mask has probability (1-theta)^(n d) > 0
    for (double p : report.defined_probability) {
        CHECK(p < 1.0);
        CHECK(p > 0.8);
    }
    const auto factored = exact_moments(inst, 1e6, EnumStrategy::PerUnitFactored);
    for (std::size_t e = 0; e < report.eval_points.size(); ++e)
        CHECK(report.exact_mean[e] == Catch::Approx(factored.exact_mean[e]).margin(1e-12));
}

TEST_CASE("exact_moments: enumeration caps") {
    auto inst = tiny_instance(EstimatorTag::HT,
                              ResponseModel::full_response(20), SamplingDesign::srswor(20, 10));
    REQUIRE_THROWS_AS(exact_moments(inst, 1e4), TooLargeToEnumerate);
}

TEST_CASE("monte_carlo: determinism and degenerate replicate count") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 6);
    auto pop = generate_population(100, 40, grid, 1, 1.0);
    MonteCarloScenario scenario{std::move(pop),
                                SamplingDesign::srswor(40, 10),
                                ResponseModel::markov_gap(std::vector<int>(40, 0), {0.8}, {0.4}),
                                KernelSpec(Kernel::Epanechnikov, 0.3),
                                {0.3, 0.6},
                                {EstimatorTag::HT, EstimatorTag::Hajek2},
                                {LinearVariant::U2},
                                false,
                                Hajek2Policy::Strict,
                                "determinism"};
    const auto a = monte_carlo(scenario, 50, 99);
    const auto b = monte_carlo(scenario, 50, 99);
    REQUIRE(a.tags.size() == b.tags.size());
    for (std::size_t t = 0; t < a.tags.size(); ++t) {
        CHECK(a.tags[t].empirical_mean == b.tags[t].empirical_mean);
        CHECK(a.tags[t].empirical_variance == b.tags[t].empirical_variance);
    }
    CHECK(a.plugins[0].mean_estimate == b.plugins[0].mean_estimate);

    const auto tiny = monte_carlo(scenario, 2, 1);
    for (double v : tiny.tags[0].empirical_variance) CHECK(std::isfinite(v));

    REQUIRE_THROWS_AS(monte_carlo(scenario, 1, 1), InvalidConfig);
}

TEST_CASE("monte_carlo: HT unbiasedness and variance convergence at scale") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 12);
    auto pop = generate_population(321, 300, grid, 1, 1.0);
    MonteCarloScenario scenario{std::move(pop),
                                SamplingDesign::srswor(300, 40),
                                ResponseModel::markov_gap(std::vector<int>(300, 0), {0.85}, {0.5}),
                                KernelSpec(Kernel::Epanechnikov, 0.15),
                                {0.25, 0.4, 0.5, 0.6, 0.75},
                                {EstimatorTag::HT},
                                {},
                                false,
                                Hajek2Policy::Strict,
                                "ht at scale"};
    const auto report = monte_carlo(scenario, 5000, 7);
    const auto& tr = report.tags[0];
    for (std::size_t e = 0; e < report.eval_points.size(); ++e) {
        CHECK(std::abs(tr.empirical_mean[e] - report.mu_tilde[e]) <= 4.0 * tr.se_mean[e]);
        // exact variance within 3 jackknife standard errors of the empirical one
        CHECK(std::abs(tr.formula_variance[e] - tr.empirical_variance[e]) <=
              3.0 * tr.se_variance[e]);
    }
}
