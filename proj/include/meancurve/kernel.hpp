#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "meancurve/errors.hpp"
#include "meancurve/grid.hpp"

namespace meancurve {

enum class Kernel { Epanechnikov, Gaussian, Uniform };

inline bool has_bounded_support(Kernel family) {
    return family != Kernel::Gaussian;
}

inline const char* kernel_name(Kernel family) {
    switch (family) {
        case Kernel::Epanechnikov: return "epanechnikov";
        case Kernel::Gaussian: return "gaussian";
        case Kernel::Uniform: return "uniform";
    }
    return "?";
}

//! Kernel family plus bandwidth h (same units as time).
struct KernelSpec {
    Kernel family = Kernel::Epanechnikov;
    double bandwidth = 0.0;

    KernelSpec(Kernel family_, double bandwidth_) : family(family_), bandwidth(bandwidth_) {
        if (!(bandwidth > 0.0)) throw InvalidConfig("KernelSpec: bandwidth must be positive");
    }
};

//! 2h > T/(d-1): the grid is fine enough for h, so every evaluation point
//! on [0, T] sees at least one positive kernel value (bounded supports).
inline bool satisfies_a3(const KernelSpec& spec, const TimeGrid& grid) {
    return 2.0 * spec.bandwidth > grid.spacing();
}

//! K(x) for the chosen family; symmetric around 0, normalized as usual.
inline double kernel_value(const KernelSpec& spec, double x) {
    switch (spec.family) {
        case Kernel::Epanechnikov:
            return std::abs(x) <= 1.0 ? 0.75 * (1.0 - x * x) : 0.0;
        case Kernel::Gaussian:
            return 0.3989422804014326779399461 * std::exp(-0.5 * x * x);
        case Kernel::Uniform:
            return std::abs(x) <= 1.0 ? 0.5 : 0.0;
    }
    return 0.0;
}

//! Normalized smoothing weights w_j(t) = K((t-t_j)/h) / sum_j' K((t-t_j')/h)
//! at one evaluation point. support_begin/support_end bracket the nonzero
//! entries so downstream sums can stay local for bounded kernels.
struct SmoothingWeights {
    double eval_point = 0.0;
    std::vector<double> values;
    int support_begin = 0;
    int support_end = 0; // half-open

    //! sum_j w_j(t) * curve[j]
    double smooth(std::span<const double> curve) const {
        double acc = 0.0;
        for (int j = support_begin; j < support_end; ++j)
            acc += values[static_cast<std::size_t>(j)] * curve[static_cast<std::size_t>(j)];
        return acc;
    }
};

inline SmoothingWeights smoothing_weights(const TimeGrid& grid, const KernelSpec& spec, double t) {
    if (t < 0.0 || t > grid.horizon())
        throw InvalidConfig("smoothing_weights: evaluation point outside [0, T]");
    const int d = grid.size();
    SmoothingWeights w;
    w.eval_point = t;
    w.values.assign(static_cast<std::size_t>(d), 0.0);
    double total = 0.0;
    int first = -1, last = -1;
    for (int j = 0; j < d; ++j) {
        const double v = kernel_value(spec, (t - grid[j]) / spec.bandwidth);
        if (v > 0.0) {
            if (first < 0) first = j;
            last = j;
        }
        w.values[static_cast<std::size_t>(j)] = v;
        total += v;
    }
    if (!(total > 0.0))
        throw AllWeightsZero("smoothing_weights: all kernel values vanish at t = " +
                             std::to_string(t) + " (bandwidth too small for the grid; see A3)");
    for (int j = first; j <= last; ++j) w.values[static_cast<std::size_t>(j)] /= total;
    w.support_begin = first;
    w.support_end = last + 1;
    return w;
}

//! Precomputed weights at each discretization instant; row j smooths at t_j.
inline std::vector<SmoothingWeights> smoothing_weights_at_instants(const TimeGrid& grid,
                                                                   const KernelSpec& spec) {
    std::vector<SmoothingWeights> rows;
    rows.reserve(static_cast<std::size_t>(grid.size()));
    for (int j = 0; j < grid.size(); ++j) rows.push_back(smoothing_weights(grid, spec, grid[j]));
    return rows;
}

//! Hoelder approximation bound C*(2h)^beta on sup_t |mu_tilde(t) - mu(t)|
//! for a beta-Hoelder mean with constant C; requires A3.
inline double approximation_error_bound(const TimeGrid& grid, const KernelSpec& spec, double beta,
                                        double holder_constant) {
    if (!(beta > 0.0 && beta <= 1.0))
        throw InvalidConfig("approximation_error_bound: beta must lie in (0, 1]");
    if (!(holder_constant >= 0.0))
        throw InvalidConfig("approximation_error_bound: Hoelder constant must be non-negative");
    if (!satisfies_a3(spec, grid))
        throw AssumptionA3Violated("approximation_error_bound: requires 2h > T/(d-1)");
    return holder_constant * std::pow(2.0 * spec.bandwidth, beta);
}

} // namespace meancurve
