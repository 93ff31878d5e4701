#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meancurve/errors.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/kernel.hpp"
#include "meancurve/rng.hpp"
#include "meancurve/types.hpp"

namespace meancurve {

//! Finite population of N discretized curves with stratum labels.
//!
//! The population itself is always fully defined; missingness is a property
//! of observation (ObservationMask), never of U.
struct CurvePopulation {
    TimeGrid grid;
    MatrixRd values;          // N x d, all finite
    std::vector<int> strata;  // 0-based labels in {0..num_strata-1}
    int num_strata = 1;
    std::vector<int> stratum_sizes;

    CurvePopulation(TimeGrid grid_, MatrixRd values_, std::vector<int> strata_)
        : grid(std::move(grid_)), values(std::move(values_)), strata(std::move(strata_)) {
        const int n = static_cast<int>(values.rows());
        if (n < 1) throw InvalidConfig("CurvePopulation: population must be non-empty");
        if (values.cols() != grid.size())
            throw InvalidConfig("CurvePopulation: value columns must match grid size");
        if (static_cast<int>(strata.size()) != n)
            throw InvalidConfig("CurvePopulation: one stratum label per unit required");
        if (!values.allFinite())
            throw InvalidConfig("CurvePopulation: population values must all be finite");
        int max_label = 0;
        for (int lab : strata) {
            if (lab < 0) throw InvalidConfig("CurvePopulation: stratum labels must be >= 0");
            max_label = std::max(max_label, lab);
        }
        num_strata = max_label + 1;
        stratum_sizes.assign(static_cast<std::size_t>(num_strata), 0);
        for (int lab : strata) ++stratum_sizes[static_cast<std::size_t>(lab)];
        for (int lam = 0; lam < num_strata; ++lam)
            if (stratum_sizes[static_cast<std::size_t>(lam)] == 0)
                throw InvalidConfig("CurvePopulation: stratum " + std::to_string(lam + 1) +
                                    " is empty");
    }

    int size() const { return static_cast<int>(values.rows()); }
};

//! Discretized mean curve, overall and per stratum.
struct PopulationMean {
    TimeGrid grid;
    std::vector<double> overall;  // mu(t_j)
    MatrixRd by_stratum;          // num_strata x d
};

//! Exact column means, overall and per stratum.
inline PopulationMean population_mean(const CurvePopulation& pop) {
    const int d = pop.grid.size();
    PopulationMean out{pop.grid, std::vector<double>(static_cast<std::size_t>(d), 0.0),
                       MatrixRd::Zero(pop.num_strata, d)};
    for (int k = 0; k < pop.size(); ++k)
        out.by_stratum.row(pop.strata[static_cast<std::size_t>(k)]) += pop.values.row(k);
    for (int lam = 0; lam < pop.num_strata; ++lam)
        out.by_stratum.row(lam) /= static_cast<double>(pop.stratum_sizes[static_cast<std::size_t>(lam)]);
    const double n = static_cast<double>(pop.size());
    for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int lam = 0; lam < pop.num_strata; ++lam)
            acc += static_cast<double>(pop.stratum_sizes[static_cast<std::size_t>(lam)]) *
                   out.by_stratum(lam, j);
        out.overall[static_cast<std::size_t>(j)] = acc / n;
    }
    return out;
}

//! Kernel smoothing of one discretized curve at the given evaluation points.
inline std::vector<double> smooth_curve(const TimeGrid& grid, const KernelSpec& spec,
                                        std::span<const double> curve,
                                        std::span<const double> eval_points) {
    std::vector<double> out;
    out.reserve(eval_points.size());
    for (double t : eval_points) out.push_back(smoothing_weights(grid, spec, t).smooth(curve));
    return out;
}

//! mu_tilde at the evaluation points: the smoothed population mean curve.
inline std::vector<double> smooth_population_mean(const CurvePopulation& pop,
                                                  const KernelSpec& spec,
                                                  std::span<const double> eval_points) {
    const PopulationMean mean = population_mean(pop);
    return smooth_curve(pop.grid, spec, mean.overall, eval_points);
}

//! Settings for the synthetic load-curve-like generator. Shapes echo daily
//! periodicity but are configuration, not contract.
struct GeneratorConfig {
    double base_level = 2.0;
    double stratum_separation = 1.0;  // offset between consecutive stratum bases
    int harmonics = 3;
    double harmonic_amplitude = 0.5;
    double unit_amplitude_sd = 0.10;  // multiplicative perturbation
    double unit_phase_sd = 0.05;      // radians
    double unit_level_sd = 0.20;      // additive level shift
    double cusp_location = 0.5;       // fraction of T; used when beta < 1
    double cusp_amplitude = 1.0;
    bool force_positive = false;      // shift everything so min >= positive_floor
    double positive_floor = 0.1;
};

//! Deterministic synthetic population: stratum-level sinusoid base plus
//! unit-level amplitude/phase/level perturbations; a |t-a|^beta cusp is
//! added when beta < 1 so Hoelder-roughness tests have something to bite.
inline CurvePopulation generate_population(std::uint64_t seed, int population_size,
                                           const TimeGrid& grid, int num_strata,
                                           double roughness_beta,
                                           const GeneratorConfig& config = {}) {
    if (num_strata < 1 || population_size < num_strata)
        throw InvalidConfig("generate_population: need N >= num_strata >= 1");
    if (!(roughness_beta > 0.0 && roughness_beta <= 1.0))
        throw InvalidConfig("generate_population: beta must lie in (0, 1]");
    if (config.harmonics < 0 || config.unit_amplitude_sd < 0.0 || config.unit_phase_sd < 0.0 ||
        config.unit_level_sd < 0.0)
        throw InvalidConfig("generate_population: negative generator setting");

    const int d = grid.size();
    const double horizon = grid.horizon();
    auto rng = make_rng(seed);

    // Stratum-level harmonic coefficients, drawn in label order.
    MatrixRd amp(num_strata, std::max(config.harmonics, 1));
    MatrixRd phase(num_strata, std::max(config.harmonics, 1));
    for (int lam = 0; lam < num_strata; ++lam) {
        for (int m = 0; m < config.harmonics; ++m) {
            amp(lam, m) = config.harmonic_amplitude * (0.5 + 0.5 * uniform01(rng)) /
                          static_cast<double>(m + 1);
            phase(lam, m) = 6.283185307179586 * uniform01(rng);
        }
    }

    // Contiguous stratum blocks; earlier strata absorb the remainder.
    std::vector<int> strata(static_cast<std::size_t>(population_size));
    {
        const int base = population_size / num_strata;
        const int extra = population_size % num_strata;
        int k = 0;
        for (int lam = 0; lam < num_strata; ++lam) {
            const int block = base + (lam < extra ? 1 : 0);
            for (int i = 0; i < block; ++i) strata[static_cast<std::size_t>(k++)] = lam;
        }
    }

    const double cusp_at = config.cusp_location * horizon;
    MatrixRd values(population_size, d);
    for (int k = 0; k < population_size; ++k) {
        const int lam = strata[static_cast<std::size_t>(k)];
        const double unit_amp = 1.0 + config.unit_amplitude_sd * normal01(rng);
        const double unit_phase = config.unit_phase_sd * normal01(rng);
        const double unit_level = config.unit_level_sd * normal01(rng);
        for (int j = 0; j < d; ++j) {
            const double t = grid[j];
            double y = config.base_level + config.stratum_separation * static_cast<double>(lam);
            for (int m = 0; m < config.harmonics; ++m)
                y += amp(lam, m) *
                     std::sin(6.283185307179586 * static_cast<double>(m + 1) * t / horizon +
                              phase(lam, m) + unit_phase);
            y *= unit_amp;
            y += unit_level;
            if (roughness_beta < 1.0)
                y += config.cusp_amplitude * std::pow(std::abs(t - cusp_at), roughness_beta);
            values(k, j) = y;
        }
    }

    if (config.force_positive) {
        const double lo = values.minCoeff();
        if (lo < config.positive_floor) values.array() += config.positive_floor - lo;
    }
    return CurvePopulation(grid, std::move(values), std::move(strata));
}

} // namespace meancurve
