#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "meancurve/bandwidth.hpp"
#include "meancurve/population.hpp"
#include "meancurve/simulation.hpp"

using namespace meancurve;

namespace {

//! Scratch recomputation of CV(h): rebuild every leave-one-out estimator via
//! the estimator library on the reduced sample, no shared bookkeeping.
double cv_scratch(const MatrixRd& values, const ObservationMask& mask, const ThetaSource& theta,
                  const Sample& sample, const SamplingDesign& design, const TimeGrid& grid,
                  const KernelSpec& spec, EstimatorTag tag) {
    const int n = sample.size();
    const int d = grid.size();
    double cv = 0.0;
    for (int i = 0; i < n; ++i) {
        // reduced sample without row i
        Sample reduced;
        MatrixRd rows(n - 1, d);
        ObservationMask rmask;
        int r = 0;
        for (int i2 = 0; i2 < n; ++i2) {
            if (i2 == i) continue;
            reduced.indices.push_back(sample.indices[static_cast<std::size_t>(i2)]);
            rows.row(r) = values.row(i2);
            rmask.units.push_back(sample.indices[static_cast<std::size_t>(i2)]);
            ++r;
        }
        rmask.entries.resize(n - 1, d);
        r = 0;
        for (int i2 = 0; i2 < n; ++i2) {
            if (i2 == i) continue;
            rmask.entries.row(r++) = mask.entries.row(i2);
        }
        const auto loo = stratified_mean(tag, rows, rmask, theta, reduced, design, grid, spec,
                                         grid.instants());
        const int unit = sample.indices[static_cast<std::size_t>(i)];
        const int lam = design.stratum_of(unit);
        const double weight = static_cast<double>(design.stratum_size(lam)) /
                              static_cast<double>(design.stratum_sample_size(lam));
        for (int j = 0; j < d; ++j) {
            if (!mask.entries(i, j)) continue;
            const double resid = values(i, j) - loo.values[static_cast<std::size_t>(j)];
            cv += weight * resid * resid / theta.theta(unit, j);
        }
    }
    return cv;
}

} // namespace

TEST_CASE("cv_score: identical curves are predicted perfectly") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 6);
    const auto design = SamplingDesign::srswor(10, 4);
    const Sample sample = draw_sample(design, 2);
    const auto mask = ObservationMask::all_ones(sample.indices, 6);
    const auto theta = ThetaSource::known(ResponseModel::full_response(10));

    // constant curves: reproduced by any valid bandwidth
    const MatrixRd constant = MatrixRd::Constant(4, 6, 4.5);
    for (double h : {0.21, 0.35, 0.5})
        CHECK(cv_score(constant, mask, theta, sample, design, grid,
                       KernelSpec(Kernel::Epanechnikov, h)) == Catch::Approx(0.0).margin(1e-22));

    // arbitrary identical curves: reproduced when the weights are degenerate
    // (Epanechnikov with h equal to the spacing vanishes at the neighbors)
    MatrixRd rows(4, 6);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 6; ++j) rows(i, j) = 1.0 + std::sin(5.0 * grid[j]);
    CHECK(cv_score(rows, mask, theta, sample, design, grid,
                   KernelSpec(Kernel::Epanechnikov, grid.spacing())) ==
          Catch::Approx(0.0).margin(1e-22));
}

TEST_CASE("cv_score: masked instants contribute nothing") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 4);
    const auto design = SamplingDesign::srswor(8, 3);
    Sample sample;
    sample.indices = {1, 4, 6};
    MatrixRd rows(3, 4);
    rows << 1.0, 2.0, 3.0, 4.0,
            1.5, 2.5, 3.5, 4.5,
            0.5, 1.5, 2.5, 3.5;
    ObservationMask mask = ObservationMask::all_ones(sample.indices, 4);
    const auto theta = ThetaSource::known(ResponseModel::full_response(8));
    const KernelSpec spec(Kernel::Epanechnikov, 0.4);
    const double base = cv_score(rows, mask, theta, sample, design, grid, spec);

    // masking one cell of unit 0 and corrupting the hidden value changes the
    // criterion only through the removed residual and the changed LOO fits of
    // the other units; the (k, j) term itself must vanish
    ObservationMask masked = mask;
    masked.entries(0, 2) = 0;
    MatrixRd corrupted = rows;
    corrupted(0, 2) = 1e9; // must never be read
    const double with_gap = cv_score(corrupted, masked, theta, sample, design, grid, spec);
    CHECK(std::isfinite(with_gap));
    CHECK(with_gap != base);

    // same computation with a benign hidden value agrees exactly
    MatrixRd benign = rows;
    benign(0, 2) = -123.0;
    CHECK(cv_score(benign, masked, theta, sample, design, grid, spec) ==
          Catch::Approx(with_gap).margin(1e-18));
}

TEST_CASE("cv_score: hand instance equals an independent flat-loop recomputation") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 2);
    const auto design = SamplingDesign::srswor(6, 3);
    Sample sample;
    sample.indices = {0, 2, 5};
    MatrixRd rows(3, 2);
    rows << 1.0, 3.0,
            2.0, 1.0,
            4.0, 2.0;
    ObservationMask mask;
    mask.units = sample.indices;
    mask.entries.resize(3, 2);
    mask.entries << 1, 1,
                    1, 0,
                    1, 1;
    MatrixRd theta_m(1, 2);
    theta_m << 0.8, 0.6;
    const auto theta = ThetaSource::known(
        ResponseModel::homogeneous_groups(std::vector<int>(6, 0), theta_m));
    const KernelSpec spec(Kernel::Epanechnikov, 0.9);

    // flat loop: for each unit, rebuild the Hajek(2) leave-one-out estimator
    const auto w0 = smoothing_weights(grid, spec, 0.0);
    const auto w1 = smoothing_weights(grid, spec, 1.0);
    const double pi = 0.5;
    double expected = 0.0;
    for (int i = 0; i < 3; ++i) {
        double num[2] = {0.0, 0.0}, den[2] = {0.0, 0.0};
        for (int i2 = 0; i2 < 3; ++i2) {
            if (i2 == i) continue;
            for (int j = 0; j < 2; ++j) {
                if (!mask.entries(i2, j)) continue;
                num[j] += rows(i2, j) / (theta_m(0, j) * pi);
                den[j] += 1.0 / (theta_m(0, j) * pi);
            }
        }
        const double ratio0 = num[0] / den[0];
        const double ratio1 = num[1] / den[1];
        const double fit[2] = {w0.values[0] * ratio0 + w0.values[1] * ratio1,
                               w1.values[0] * ratio0 + w1.values[1] * ratio1};
        for (int j = 0; j < 2; ++j) {
            if (!mask.entries(i, j)) continue;
            const double resid = rows(i, j) - fit[j];
            expected += (6.0 / 3.0) * resid * resid / theta_m(0, j);
        }
    }
    CHECK(cv_score(rows, mask, theta, sample, design, grid, spec) ==
          Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("cv_score: incremental bookkeeping equals scratch recomputation") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 8);
    const auto pop = generate_population(55, 30, grid, 2, 1.0);
    const auto design = SamplingDesign::stratified(pop.strata, {6, 7});
    const Sample sample = draw_sample(design, 12);
    const MatrixRd rows = sample_rows(pop, sample);
    const auto model = ResponseModel::markov_gap(pop.strata, {0.8, 0.9}, {0.4, 0.2});
    const auto theta = ThetaSource::known(model);
    const auto mask = simulate_mask(model, sample, grid, 19);
    for (EstimatorTag tag : {EstimatorTag::Hajek2, EstimatorTag::HT, EstimatorTag::Hajek1}) {
        CVConfig config;
        config.estimator = tag;
        for (double h : {0.2, 0.35}) {
            const KernelSpec spec(Kernel::Epanechnikov, h);
            const double incremental =
                cv_score(rows, mask, theta, sample, design, grid, spec, config);
            if (tag == EstimatorTag::Hajek2) {
                const double scratch =
                    cv_scratch(rows, mask, theta, sample, design, grid, spec, tag);
                CHECK(incremental == Catch::Approx(scratch).margin(1e-10 * (1.0 + scratch)));
            }
            CHECK(incremental >= 0.0);
        }
    }
}

TEST_CASE("cv_score preconditions") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 4);
    const MatrixRd rows = MatrixRd::Constant(2, 4, 1.0);
    const auto theta2 = ThetaSource::known(ResponseModel::full_response(4));
    {
        // a stratum with fewer than 2 sampled units
        const auto design = SamplingDesign::stratified({0, 0, 1, 1}, {1, 1});
        Sample sample;
        sample.indices = {0, 2};
        const auto mask = ObservationMask::all_ones(sample.indices, 4);
        REQUIRE_THROWS_AS(cv_score(rows, mask, theta2, sample, design, grid,
                                   KernelSpec(Kernel::Epanechnikov, 0.5)),
                          TooFewUnits);
    }
    {
        const auto design = SamplingDesign::poisson({0.5, 0.5, 0.5, 0.5});
        Sample sample;
        sample.indices = {0, 1};
        const auto mask = ObservationMask::all_ones(sample.indices, 4);
        REQUIRE_THROWS_AS(cv_score(rows, mask, theta2, sample, design, grid,
                                   KernelSpec(Kernel::Epanechnikov, 0.5)),
                          InvalidDesign);
    }
}

TEST_CASE("select_bandwidth: selection rules") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 10);
    const auto pop = generate_population(777, 40, grid, 1, 1.0);
    const auto design = SamplingDesign::srswor(40, 12);
    const Sample sample = draw_sample(design, 9);
    const MatrixRd rows = sample_rows(pop, sample);
    const auto mask = ObservationMask::all_ones(sample.indices, 10);
    const auto theta = ThetaSource::known(ResponseModel::full_response(40));
    {
        const std::vector<double> one{0.3};
        const auto result = select_bandwidth(rows, mask, theta, sample, design, grid, one,
                                             Kernel::Epanechnikov);
        CHECK(result.selected == 0.3);
    }
    {
        // all candidates at or below the spacing have degenerate weights, so
        // their scores tie exactly and the largest bandwidth wins
        const std::vector<double> grid_h{0.06, 0.10, 0.08}; // spacing = 1/9
        const auto result = select_bandwidth(rows, mask, theta, sample, design, grid, grid_h,
                                             Kernel::Epanechnikov);
        REQUIRE(result.scores[0] == result.scores[1]);
        REQUIRE(result.scores[1] == result.scores[2]);
        CHECK(result.selected == 0.10);
    }
    {
        const auto grid_h = default_bandwidth_grid(grid);
        REQUIRE(grid_h.size() == 15);
        CHECK(grid_h.front() == Catch::Approx(grid.spacing()));
        CHECK(grid_h.back() == Catch::Approx(0.25));
        const auto result = select_bandwidth(rows, mask, theta, sample, design, grid, grid_h,
                                             Kernel::Epanechnikov);
        CHECK(std::isfinite(result.scores[result.selected_index]));
    }
    REQUIRE_THROWS_AS(select_bandwidth(rows, mask, theta, sample, design, grid, {},
                                       Kernel::Epanechnikov),
                      InvalidConfig);
}

TEST_CASE("select_bandwidth: failing candidates are counted, all failing throws") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 5);
    const auto design = SamplingDesign::srswor(8, 3);
    Sample sample;
    sample.indices = {0, 3, 6};
    MatrixRd rows = MatrixRd::Constant(3, 5, 1.0);
    // instant t_3 has no respondents at all: strict Hajek(2) fails per candidate
    ObservationMask mask = ObservationMask::all_ones(sample.indices, 5);
    mask.entries.col(2).setZero();
    rows.col(2).setConstant(std::numeric_limits<double>::quiet_NaN());
    MatrixRd theta_m = MatrixRd::Constant(1, 5, 0.8);
    const auto theta = ThetaSource::known(
        ResponseModel::homogeneous_groups(std::vector<int>(8, 0), theta_m));

    const std::vector<double> candidates{0.3, 0.4};
    REQUIRE_THROWS_AS(select_bandwidth(rows, mask, theta, sample, design, grid, candidates,
                                       Kernel::Epanechnikov),
                      AllCandidatesFailed);

    // the renormalize policy rescues every candidate
    CVConfig renorm;
    renorm.policy = Hajek2Policy::Renormalize;
    const auto ok = select_bandwidth(rows, mask, theta, sample, design, grid, candidates,
                                     Kernel::Epanechnikov, renorm);
    CHECK(ok.failures[0] == 0);
    CHECK(ok.failures[1] == 0);
    CHECK(std::isfinite(ok.scores[0]));
}

TEST_CASE("estimator evaluation points are order-independent") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 7);
    const auto pop = generate_population(71, 20, grid, 1, 1.0);
    const auto design = SamplingDesign::srswor(20, 8);
    const Sample sample = draw_sample(design, 2);
    const MatrixRd rows = sample_rows(pop, sample);
    const auto model = ResponseModel::markov_gap(std::vector<int>(20, 0), {0.8}, {0.4});
    const auto theta = ThetaSource::known(model);
    const auto mask = simulate_mask(model, sample, grid, 14);
    const KernelSpec spec(Kernel::Epanechnikov, 0.3);
    const std::vector<double> forward{0.2, 0.5, 0.8};
    const std::vector<double> backward{0.8, 0.2, 0.5};
    const auto a = hajek1_mean_nr(rows, mask, theta, sample, design, grid, spec, forward);
    const auto b = hajek1_mean_nr(rows, mask, theta, sample, design, grid, spec, backward);
    CHECK(std::abs(a.values[0] - b.values[1]) < 1e-10);
    CHECK(std::abs(a.values[1] - b.values[2]) < 1e-10);
    CHECK(std::abs(a.values[2] - b.values[0]) < 1e-10);
}
