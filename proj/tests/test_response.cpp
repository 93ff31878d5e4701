#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "meancurve/design.hpp"
#include "meancurve/response.hpp"

using namespace meancurve;

namespace {

Sample iota_sample(int n) {
    Sample s;
    s.indices.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) s.indices[static_cast<std::size_t>(i)] = i;
    return s;
}

} // namespace

TEST_CASE("theta: marginals per model kind") {
    const auto full = ResponseModel::full_response(3);
    CHECK(full.theta(0, 0) == 1.0);
    CHECK(full.theta(2, 5) == 1.0);

    const auto groups =
        ResponseModel::homogeneous_groups({0, 0, 1}, MatrixRd::Constant(2, 4, 0.8));
    for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 4; ++j) CHECK(groups.theta(k, j) == 0.8);

    const auto markov = ResponseModel::markov_gap({0, 0}, {0.9}, {0.5});
    for (int j = 0; j < 6; ++j) CHECK(markov.theta(0, j) == 0.9);

    REQUIRE_THROWS_AS(ResponseModel::homogeneous_groups({0}, MatrixRd::Constant(1, 2, 0.0)),
                      InvalidConfig);
    REQUIRE_THROWS_AS(ResponseModel::markov_gap({0}, {0.5}, {1.0}), InvalidConfig);
}

TEST_CASE("theta_joint: diagonal convention, product rule, Frechet bounds") {
    const auto groups =
        ResponseModel::homogeneous_groups({0}, MatrixRd::Constant(1, 3, 0.8));
    CHECK(groups.theta_joint(0, 1, 1) == 0.8);
    CHECK(groups.theta_joint(0, 0, 2) == Catch::Approx(0.64).margin(1e-15));

    const auto markov = ResponseModel::markov_gap({0}, {0.7}, {0.4});
    CHECK(markov.theta_joint(0, 2, 2) == 0.7);
    for (int j = 0; j < 5; ++j) {
        for (int jp = 0; jp < 5; ++jp) {
            const double joint = markov.theta_joint(0, j, jp);
            CHECK(joint == markov.theta_joint(0, jp, j));
            const double a = markov.theta(0, j), b = markov.theta(0, jp);
            CHECK(joint >= std::max(0.0, a + b - 1.0) - 1e-15);
            CHECK(joint <= std::min(a, b) + 1e-15);
        }
    }

    // independent-Bernoulli joint: covariance factor exactly 0 off-diagonal
    for (int j = 0; j < 3; ++j)
        for (int jp = 0; jp < 3; ++jp)
            if (j != jp)
                CHECK(groups.theta_joint(0, j, jp) - groups.theta(0, j) * groups.theta(0, jp) ==
                      0.0);
}

TEST_CASE("markov joint matches empirical pair frequencies") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 4);
    const double theta = 0.9, rho = 0.5;
    const int reps = 1000000;
    const auto model = ResponseModel::markov_gap(std::vector<int>(1, 0), {theta}, {rho});
    const Sample sample = iota_sample(1);
    double joint01 = 0.0, joint03 = 0.0, marg1 = 0.0;
    auto rng = make_rng(777);
    std::vector<std::uint8_t> row(4);
    for (int r = 0; r < reps; ++r) {
        model.simulate_row(0, rng, row);
        joint01 += row[0] * row[1];
        joint03 += row[0] * row[3];
        marg1 += row[1];
    }
    const auto within3se = [&](double freq, double p) {
        const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(reps));
        return std::abs(freq / reps - p) <= 3.0 * se;
    };
    CHECK(within3se(marg1, theta));
    CHECK(within3se(joint01, model.theta_joint(0, 0, 1)));
    CHECK(within3se(joint03, model.theta_joint(0, 0, 3)));
}

TEST_CASE("simulate_mask: full response, Bernoulli rate, determinism") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 5);
    const Sample sample = iota_sample(3);
    const auto full = ResponseModel::full_response(3);
    const auto ones = simulate_mask(full, sample, grid, 1);
    CHECK(ones.entries.cast<int>().sum() == 15);

    const auto half = ResponseModel::homogeneous_groups(std::vector<int>(200, 0),
                                                        MatrixRd::Constant(1, 5, 0.5));
    const Sample big = iota_sample(200);
    long hits = 0;
    const int reps = 1000;
    for (int r = 0; r < reps; ++r)
        hits += simulate_mask(half, big, grid, static_cast<std::uint64_t>(r)).entries.cast<int>().sum();
    const double cells = 200.0 * 5.0 * reps; // 10^6 simulated cells
    const double se = std::sqrt(0.25 / cells);
    CHECK(std::abs(static_cast<double>(hits) / cells - 0.5) <= 3.0 * se);

    const auto markov = ResponseModel::markov_gap(std::vector<int>(3, 0), {0.8}, {0.6});
    const auto a = simulate_mask(markov, sample, grid, 42);
    const auto b = simulate_mask(markov, sample, grid, 42);
    CHECK(a.entries == b.entries);
}

TEST_CASE("simulate_mask: gap run lengths match chain theory") {
    const double theta = 0.8, rho = 0.6;
    const int d = 200000;
    const TimeGrid grid = TimeGrid::uniform(1.0, d);
    const auto markov = ResponseModel::markov_gap(std::vector<int>(1, 0), {theta}, {rho});
    const Sample sample = iota_sample(1);
    const auto mask = simulate_mask(markov, sample, grid, 2718);
    // interior zero-runs are geometric with mean 1/(1 - p00)
    std::vector<int> runs;
    int run = 0;
    for (int j = 0; j < d; ++j) {
        if (mask.entries(0, j) == 0) {
            ++run;
        } else {
            if (run > 0) runs.push_back(run);
            run = 0;
        }
    }
    REQUIRE(runs.size() > 100);
    double mean_run = 0.0, var_run = 0.0;
    for (int r : runs) mean_run += r;
    mean_run /= static_cast<double>(runs.size());
    for (int r : runs) var_run += (r - mean_run) * (r - mean_run);
    var_run /= static_cast<double>(runs.size() - 1);
    const double p00 = rho + (1.0 - rho) * (1.0 - theta);
    const double expected = 1.0 / (1.0 - p00);
    const double se = std::sqrt(var_run / static_cast<double>(runs.size()));
    CHECK(std::abs(mean_run - expected) <= 3.0 * se);
}

TEST_CASE("estimate_theta_group: counts and zero responders") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 2);
    const Sample sample = iota_sample(4);
    ObservationMask mask;
    mask.units = sample.indices;
    mask.entries.resize(4, 2);
    // rows (1,1), (1,0), (0,1), (0,0)
    mask.entries << 1, 1,
                    1, 0,
                    0, 1,
                    0, 0;
    const auto est = estimate_theta_group(mask, sample, {0, 0, 0, 0});
    CHECK(est.marginal(0, 0) == 0.5);
    CHECK(est.marginal(0, 1) == 0.5);
    CHECK(est.joint[0](0, 1) == Catch::Approx(0.25).margin(1e-15)); // only unit 0 has both

    const auto all_ones = ObservationMask::all_ones(sample.indices, 2);
    const auto est1 = estimate_theta_group(all_ones, sample, {0, 1, 0, 1});
    CHECK(est1.marginal(0, 0) == 1.0);
    CHECK(est1.marginal(1, 1) == 1.0);

    ObservationMask dead;
    dead.units = sample.indices;
    dead.entries = MaskMatrix::Zero(4, 2);
    dead.entries.col(0).setOnes();
    REQUIRE_THROWS_AS(estimate_theta_group(dead, sample, {0, 0, 0, 0}), ZeroResponders);
}

TEST_CASE("estimate_theta_stationary: pooled rates and lags") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 4);
    const Sample sample = iota_sample(1);
    ObservationMask alt;
    alt.units = sample.indices;
    alt.entries.resize(1, 4);
    alt.entries << 1, 0, 1, 0;
    const auto est = estimate_theta_stationary(alt, sample, {0}, grid);
    CHECK(est.theta[0] == 0.5);
    CHECK(est.theta_lag(0, 0) == 0.5);
    CHECK(est.theta_lag(0, 1) == 0.0);
    CHECK(est.theta_lag(0, 2) == 0.5);

    const auto ones = ObservationMask::all_ones(sample.indices, 4);
    const auto est1 = estimate_theta_stationary(ones, sample, {0}, grid);
    CHECK(est1.theta[0] == 1.0);
    for (int m = 0; m < 4; ++m) CHECK(est1.theta_lag(0, m) == 1.0);
}

TEST_CASE("estimate_theta_stationary: consistency against the Markov law") {
    const int n = 500, d = 48;
    const TimeGrid grid = TimeGrid::uniform(1.0, d);
    const double theta = 0.85, rho = 0.6;
    const auto model = ResponseModel::markov_gap(std::vector<int>(n, 0), {theta}, {rho});
    const Sample sample = iota_sample(n);
    const auto mask = simulate_mask(model, sample, grid, 31415);
    const auto est = estimate_theta_stationary(mask, sample, std::vector<int>(n, 0), grid);
    for (int m : {0, 1, 2, 5, 10}) {
        const double truth = model.theta_joint(0, 0, m);
        // each lag pools n (d - m) Bernoulli-ish terms; rows are dependent so
        // use a conservative 3-sigma bound treating only rows as independent
        const double se = std::sqrt(truth * (1.0 - truth) / static_cast<double>(n));
        CHECK(std::abs(est.theta_lag(0, m) - truth) <= 3.0 * se);
    }
}

TEST_CASE("group response rate estimates converge with group size") {
    const TimeGrid grid = TimeGrid::uniform(1.0, 6);
    MatrixRd theta(1, 6);
    theta << 0.9, 0.8, 0.7, 0.6, 0.75, 0.85;
    std::vector<double> sup_err;
    for (int n : {50, 500, 5000}) {
        const auto model = ResponseModel::homogeneous_groups(std::vector<int>(n, 0), theta);
        const Sample sample = iota_sample(n);
        double err_avg = 0.0;
        const int reps = 100;
        for (int r = 0; r < reps; ++r) {
            const auto mask = simulate_mask(model, sample, grid, derive_seed(99, 5, static_cast<std::uint64_t>(r)));
            const auto est = detail::group_response_rates(mask, sample, std::vector<int>(n, 0));
            double sup = 0.0;
            for (int j = 0; j < 6; ++j) sup = std::max(sup, std::abs(est.marginal(0, j) - theta(0, j)));
            err_avg += sup;
        }
        sup_err.push_back(err_avg / reps);
    }
    CHECK(sup_err[1] < sup_err[0]);
    CHECK(sup_err[2] < sup_err[1]);
}
