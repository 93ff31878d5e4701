#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "meancurve/grid.hpp"
#include "meancurve/kernel.hpp"

using namespace meancurve;

TEST_CASE("time grid construction and invariants") {
    const TimeGrid grid = TimeGrid::uniform(2.0, 5);
    REQUIRE(grid.size() == 5);
    REQUIRE(grid[0] == 0.0);
    REQUIRE(grid[4] == 2.0);
    REQUIRE(grid.spacing() == Catch::Approx(0.5));

    REQUIRE_THROWS_AS(TimeGrid::uniform(0.0, 5), InvalidConfig);
    REQUIRE_THROWS_AS(TimeGrid::uniform(1.0, 1), InvalidConfig);
    REQUIRE_THROWS_AS(TimeGrid::from_instants({0.0, 0.1, 0.5, 1.0}), InvalidConfig);
    REQUIRE_THROWS_AS(TimeGrid::from_instants({0.1, 0.5, 1.0}), InvalidConfig);
    REQUIRE_NOTHROW(TimeGrid::from_instants({0.0, 0.25, 0.5, 0.75, 1.0}));
}

TEST_CASE("kernel values") {
    const KernelSpec epa(Kernel::Epanechnikov, 1.0);
    CHECK(kernel_value(epa, 0.0) == 0.75);
    CHECK(kernel_value(epa, 1.0) == 0.0);
    CHECK(kernel_value(epa, -1.5) == 0.0);
    const KernelSpec gauss(Kernel::Gaussian, 1.0);
    CHECK(kernel_value(gauss, 0.0) == Catch::Approx(0.3989423).margin(1e-7));
    const KernelSpec unif(Kernel::Uniform, 1.0);
    CHECK(kernel_value(unif, 0.3) == 0.5);
    CHECK(kernel_value(unif, 1.01) == 0.0);

    // symmetry
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (int i = 0; i < 200; ++i) {
        const double x = dist(rng);
        CHECK(kernel_value(epa, x) == kernel_value(epa, -x));
        CHECK(kernel_value(gauss, x) == kernel_value(gauss, -x));
        CHECK(kernel_value(unif, x) == kernel_value(unif, -x));
    }

    REQUIRE_THROWS_AS(KernelSpec(Kernel::Epanechnikov, 0.0), InvalidConfig);
}

TEST_CASE("smoothing weights: degenerate neighbor case") {
    const TimeGrid grid = TimeGrid::from_instants({0.0, 0.5, 1.0});
    const auto w = smoothing_weights(grid, KernelSpec(Kernel::Epanechnikov, 0.5), 0.5);
    CHECK(w.values[0] == 0.0);
    CHECK(w.values[1] == 1.0);
    CHECK(w.values[2] == 0.0);
}

TEST_CASE("smoothing weights: hand-derived Epanechnikov values") {
    // K(5/6) / (2 K(5/6) + K(0)) = 11/58 and K(0) / (...) = 18/29,
    // precomputed with an independent scalar script
    const TimeGrid grid = TimeGrid::from_instants({0.0, 0.5, 1.0});
    const auto w = smoothing_weights(grid, KernelSpec(Kernel::Epanechnikov, 0.6), 0.5);
    CHECK(w.values[0] == Catch::Approx(11.0 / 58.0).margin(1e-15));
    CHECK(w.values[1] == Catch::Approx(18.0 / 29.0).margin(1e-15));
    CHECK(w.values[2] == Catch::Approx(11.0 / 58.0).margin(1e-15));
}

TEST_CASE("smoothing weights: normalization, locality, errors") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 25);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> tdist(0.0, 1.0);
    for (Kernel family : {Kernel::Epanechnikov, Kernel::Gaussian, Kernel::Uniform}) {
        for (double h : {0.05, 0.13, 0.4}) {
            const KernelSpec spec(family, h);
            for (int i = 0; i < 50; ++i) {
                const double t = tdist(rng);
                const auto w = smoothing_weights(grid, spec, t);
                double sum = 0.0;
                for (double v : w.values) {
                    REQUIRE(v >= 0.0);
                    sum += v;
                }
                REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
                if (has_bounded_support(family)) {
                    for (int j = 0; j < grid.size(); ++j)
                        if (std::abs(t - grid[j]) >= h) CHECK(w.values[static_cast<std::size_t>(j)] == 0.0);
                }
                // constant reproduction
                const std::vector<double> ones(static_cast<std::size_t>(grid.size()), 3.25);
                CHECK(w.smooth(ones) == Catch::Approx(3.25).margin(1e-12));
            }
        }
    }

    // all kernel values vanish: t between grid points, support too narrow
    const TimeGrid coarse = TimeGrid::from_instants({0.0, 0.5, 1.0});
    REQUIRE_THROWS_AS(smoothing_weights(coarse, KernelSpec(Kernel::Epanechnikov, 0.1), 0.25),
                      AllWeightsZero);
    REQUIRE_THROWS_AS(smoothing_weights(coarse, KernelSpec(Kernel::Epanechnikov, 0.1), -0.5),
                      InvalidConfig);
}

TEST_CASE("approximation error bound: formula and A3 gate") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 201);
    const KernelSpec spec(Kernel::Epanechnikov, 0.05);
    CHECK(approximation_error_bound(grid, spec, 1.0, 1.0) == Catch::Approx(0.1).margin(1e-15));
    CHECK(approximation_error_bound(grid, spec, 1.0, 0.0) == 0.0);

    const KernelSpec tiny(Kernel::Epanechnikov, 0.002); // 2h < 1/200
    REQUIRE_THROWS_AS(approximation_error_bound(grid, tiny, 1.0, 1.0), AssumptionA3Violated);
    REQUIRE_THROWS_AS(approximation_error_bound(grid, spec, 1.5, 1.0), InvalidConfig);
    REQUIRE_THROWS_AS(approximation_error_bound(grid, spec, 0.0, 1.0), InvalidConfig);
}

TEST_CASE("Hoelder bound holds for |t - 0.5| at d=201, h=0.02") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 201);
    const KernelSpec spec(Kernel::Epanechnikov, 0.02);
    std::vector<double> mu(static_cast<std::size_t>(grid.size()));
    for (int j = 0; j < grid.size(); ++j) mu[static_cast<std::size_t>(j)] = std::abs(grid[j] - 0.5);

    const double bound = approximation_error_bound(grid, spec, 1.0, 1.0);
    REQUIRE(bound == Catch::Approx(0.04).margin(1e-15));
    double sup_err = 0.0;
    for (int i = 0; i <= 10000; ++i) {
        const double t = static_cast<double>(i) / 10000.0;
        const double smoothed = smoothing_weights(grid, spec, t).smooth(mu);
        sup_err = std::max(sup_err, std::abs(smoothed - std::abs(t - 0.5)));
    }
    CHECK(sup_err <= bound);

    // constant mean: exact reproduction (C = 0)
    const std::vector<double> c(static_cast<std::size_t>(grid.size()), 1.7);
    double sup_c = 0.0;
    for (int i = 0; i <= 1000; ++i) {
        const double t = static_cast<double>(i) / 1000.0;
        sup_c = std::max(sup_c, std::abs(smoothing_weights(grid, spec, t).smooth(c) - 1.7));
    }
    CHECK(sup_c <= 1e-12);
}
