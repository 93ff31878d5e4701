#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "meancurve/errors.hpp"

namespace meancurve {

//! Equispaced discretization instants t_j = T*(j-1)/(d-1) on [0, T].
//!
//! All data share this grid; curves are observed (possibly with gaps) at
//! these instants only.
class TimeGrid {
public:
    static TimeGrid uniform(double horizon, int size) {
        if (!(horizon > 0.0)) throw InvalidConfig("TimeGrid: horizon must be positive");
        if (size < 2) throw InvalidConfig("TimeGrid: need at least 2 instants");
        std::vector<double> instants(static_cast<std::size_t>(size));
        for (int j = 0; j < size; ++j)
            instants[static_cast<std::size_t>(j)] =
                horizon * static_cast<double>(j) / static_cast<double>(size - 1);
        instants.front() = 0.0;
        instants.back() = horizon;
        return TimeGrid(horizon, std::move(instants));
    }

    //! Validate externally supplied instants (e.g. from a CSV header).
    static TimeGrid from_instants(std::vector<double> instants) {
        if (instants.size() < 2) throw InvalidConfig("TimeGrid: need at least 2 instants");
        const double horizon = instants.back();
        if (!(horizon > 0.0)) throw InvalidConfig("TimeGrid: last instant must be positive");
        if (std::abs(instants.front()) > 1e-12 * horizon)
            throw InvalidConfig("TimeGrid: first instant must be 0");
        const double step = horizon / static_cast<double>(instants.size() - 1);
        for (std::size_t j = 1; j < instants.size(); ++j) {
            const double gap = instants[j] - instants[j - 1];
            if (!(gap > 0.0)) throw InvalidConfig("TimeGrid: instants must be strictly increasing");
            if (std::abs(gap - step) > 1e-12 * step)
                throw InvalidConfig("TimeGrid: instants must be equispaced (instant " +
                                    std::to_string(j + 1) + ")");
        }
        return TimeGrid(horizon, std::move(instants));
    }

    int size() const { return static_cast<int>(instants_.size()); }
    double horizon() const { return horizon_; }
    double spacing() const { return horizon_ / static_cast<double>(size() - 1); }
    double operator[](int j) const { return instants_[static_cast<std::size_t>(j)]; }
    const std::vector<double>& instants() const { return instants_; }

    //! Uniform evaluation grid of `count` points on [0, T]; count == 0
    //! falls back to the discretization instants themselves.
    std::vector<double> evaluation_points(int count) const {
        if (count <= 0) return instants_;
        if (count == 1) return {horizon_ / 2.0};
        std::vector<double> pts(static_cast<std::size_t>(count));
        for (int i = 0; i < count; ++i)
            pts[static_cast<std::size_t>(i)] =
                horizon_ * static_cast<double>(i) / static_cast<double>(count - 1);
        return pts;
    }

    bool operator==(const TimeGrid& other) const {
        return horizon_ == other.horizon_ && instants_ == other.instants_;
    }

private:
    TimeGrid(double horizon, std::vector<double> instants)
        : horizon_(horizon), instants_(std::move(instants)) {}

    double horizon_;
    std::vector<double> instants_;
};

} // namespace meancurve
