#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/rng.hpp"
#include "meancurve/types.hpp"

namespace meancurve {

enum class ResponseKind { FullResponse, HomogeneousGroups, MarkovGap };

//! Response (missingness) process for the population units.
//!
//! Units respond independently of each other, of the curve values and of the
//! sampling design. Within a unit's row, the law is one of:
//!  - FullResponse: r = 1 everywhere;
//!  - HomogeneousGroups: independent Bernoulli(theta_g(t_j)) per instant;
//!  - MarkovGap: stationary 2-state chain with stationary response
//!    probability theta_g and per-step autocorrelation rho_g, which models
//!    contiguous outage gaps and has the closed-form joint
//!    theta(t_j, t_j') = theta^2 + theta (1 - theta) rho^{|j - j'|}.
class ResponseModel {
public:
    static ResponseModel full_response(int population_size) {
        ResponseModel m;
        m.kind_ = ResponseKind::FullResponse;
        m.groups_.assign(static_cast<std::size_t>(population_size), 0);
        m.num_groups_ = 1;
        return m;
    }

    static ResponseModel homogeneous_groups(std::vector<int> groups, MatrixRd theta) {
        ResponseModel m;
        m.kind_ = ResponseKind::HomogeneousGroups;
        m.init_groups(std::move(groups));
        if (theta.rows() != m.num_groups_)
            throw InvalidConfig("ResponseModel: one theta row per group required");
        if ((theta.array() <= 0.0).any() || (theta.array() > 1.0).any())
            throw InvalidConfig("ResponseModel: theta values must lie in (0, 1]");
        m.theta_ = std::move(theta);
        return m;
    }

    static ResponseModel markov_gap(std::vector<int> groups, std::vector<double> theta,
                                    std::vector<double> rho) {
        ResponseModel m;
        m.kind_ = ResponseKind::MarkovGap;
        m.init_groups(std::move(groups));
        if (static_cast<int>(theta.size()) != m.num_groups_ ||
            static_cast<int>(rho.size()) != m.num_groups_)
            throw InvalidConfig("ResponseModel: one (theta, rho) pair per group required");
        for (double th : theta)
            if (!(th > 0.0 && th <= 1.0))
                throw InvalidConfig("ResponseModel: stationary theta must lie in (0, 1]");
        for (double r : rho)
            if (!(r >= 0.0 && r < 1.0))
                throw InvalidConfig("ResponseModel: persistence rho must lie in [0, 1)");
        m.markov_theta_ = std::move(theta);
        m.markov_rho_ = std::move(rho);
        return m;
    }

    ResponseKind kind() const { return kind_; }
    int population_size() const { return static_cast<int>(groups_.size()); }
    int num_groups() const { return num_groups_; }
    int group_of(int k) const { return groups_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& groups() const { return groups_; }

    //! True when theta(t_j, t_j') factorizes for j != j' (so the
    //! non-response covariance factor vanishes off the diagonal).
    bool independent_instants() const { return kind_ != ResponseKind::MarkovGap; }

    double group_theta(int g, int j) const {
        switch (kind_) {
            case ResponseKind::FullResponse: return 1.0;
            case ResponseKind::HomogeneousGroups: return theta_(g, j);
            case ResponseKind::MarkovGap: return markov_theta_[static_cast<std::size_t>(g)];
        }
        return 1.0;
    }

    double group_theta_joint(int g, int j, int jp) const {
        if (j == jp) return group_theta(g, j); // convention theta(t_j, t_j) = theta(t_j)
        switch (kind_) {
            case ResponseKind::FullResponse: return 1.0;
            case ResponseKind::HomogeneousGroups: return theta_(g, j) * theta_(g, jp);
            case ResponseKind::MarkovGap: {
                const double th = markov_theta_[static_cast<std::size_t>(g)];
                const double rho = markov_rho_[static_cast<std::size_t>(g)];
                return th * th + th * (1.0 - th) * std::pow(rho, std::abs(j - jp));
            }
        }
        return 1.0;
    }

    double theta(int k, int j) const { return group_theta(group_of(k), j); }
    double theta_joint(int k, int j, int jp) const { return group_theta_joint(group_of(k), j, jp); }

    //! Probability of one full response row for unit k (oracle support).
    double row_probability(int k, std::span<const std::uint8_t> row) const {
        const int g = group_of(k);
        switch (kind_) {
            case ResponseKind::FullResponse: {
                for (std::uint8_t r : row)
                    if (!r) return 0.0;
                return 1.0;
            }
            case ResponseKind::HomogeneousGroups: {
                double p = 1.0;
                for (std::size_t j = 0; j < row.size(); ++j) {
                    const double th = theta_(g, static_cast<int>(j));
                    p *= row[j] ? th : 1.0 - th;
                }
                return p;
            }
            case ResponseKind::MarkovGap: {
                const double th = markov_theta_[static_cast<std::size_t>(g)];
                const double rho = markov_rho_[static_cast<std::size_t>(g)];
                const double p11 = rho + (1.0 - rho) * th;
                const double p01 = (1.0 - rho) * th;
                double p = row[0] ? th : 1.0 - th;
                for (std::size_t j = 1; j < row.size(); ++j) {
                    const double step = row[j - 1] ? p11 : p01;
                    p *= row[j] ? step : 1.0 - step;
                }
                return p;
            }
        }
        return 0.0;
    }

    void simulate_row(int k, std::mt19937_64& rng, std::span<std::uint8_t> out) const {
        const int g = group_of(k);
        switch (kind_) {
            case ResponseKind::FullResponse:
                std::fill(out.begin(), out.end(), std::uint8_t{1});
                return;
            case ResponseKind::HomogeneousGroups:
                for (std::size_t j = 0; j < out.size(); ++j)
                    out[j] = uniform01(rng) < theta_(g, static_cast<int>(j)) ? 1 : 0;
                return;
            case ResponseKind::MarkovGap: {
                const double th = markov_theta_[static_cast<std::size_t>(g)];
                const double rho = markov_rho_[static_cast<std::size_t>(g)];
                const double p11 = rho + (1.0 - rho) * th;
                const double p01 = (1.0 - rho) * th;
                out[0] = uniform01(rng) < th ? 1 : 0;
                for (std::size_t j = 1; j < out.size(); ++j)
                    out[j] = uniform01(rng) < (out[j - 1] ? p11 : p01) ? 1 : 0;
                return;
            }
        }
    }

private:
    void init_groups(std::vector<int> groups) {
        if (groups.empty()) throw InvalidConfig("ResponseModel: empty group vector");
        int max_label = 0;
        for (int g : groups) {
            if (g < 0) throw InvalidConfig("ResponseModel: group labels must be >= 0");
            max_label = std::max(max_label, g);
        }
        groups_ = std::move(groups);
        num_groups_ = max_label + 1;
    }

    ResponseKind kind_ = ResponseKind::FullResponse;
    std::vector<int> groups_;
    int num_groups_ = 1;
    MatrixRd theta_;                   // HomogeneousGroups: num_groups x d
    std::vector<double> markov_theta_; // MarkovGap
    std::vector<double> markov_rho_;
};

//! Response indicators r_k(t_j) for the sampled units, row-aligned with the
//! ascending sample indices.
struct ObservationMask {
    std::vector<int> units; // population indices, ascending
    MaskMatrix entries;     // units.size() x d

    int rows() const { return static_cast<int>(entries.rows()); }
    int cols() const { return static_cast<int>(entries.cols()); }

    //! Row holding population unit k, or -1.
    int row_of(int k) const {
        auto it = std::lower_bound(units.begin(), units.end(), k);
        if (it == units.end() || *it != k) return -1;
        return static_cast<int>(it - units.begin());
    }

    static ObservationMask all_ones(const std::vector<int>& units, int d) {
        ObservationMask m;
        m.units = units;
        m.entries = MaskMatrix::Ones(static_cast<Eigen::Index>(units.size()), d);
        return m;
    }
};

//! Simulate the response process for every sampled unit; rows independent
//! across units, deterministic in the seed.
inline ObservationMask simulate_mask(const ResponseModel& model, const Sample& sample,
                                     const TimeGrid& grid, std::uint64_t seed) {
    ObservationMask mask;
    mask.units = sample.indices;
    mask.entries.resize(sample.size(), grid.size());
    auto rng = make_rng(seed);
    for (int i = 0; i < sample.size(); ++i) {
        std::span<std::uint8_t> row(mask.entries.row(i).data(),
                                    static_cast<std::size_t>(grid.size()));
        model.simulate_row(sample.indices[static_cast<std::size_t>(i)], rng, row);
    }
    return mask;
}

//! Group response rates estimated from an observed mask (response rates of
//! the homogeneous response groups).
struct GroupThetaEstimate {
    std::vector<int> group_labels;      // per sampled unit, aligned with mask rows
    MatrixRd marginal;                  // num_groups x d
    std::vector<MatrixRd> joint;        // per group, d x d
    std::vector<int> group_counts;      // n_lambda

    int num_groups() const { return static_cast<int>(marginal.rows()); }
};

namespace detail {

//! Raw group response rates, no zero-rate policy applied.
inline GroupThetaEstimate group_response_rates(const ObservationMask& mask, const Sample& sample,
                                               const std::vector<int>& groups) {
    const int n = mask.rows();
    const int d = mask.cols();
    if (static_cast<int>(groups.size()) != n)
        throw InvalidConfig("estimate_theta: one group label per sampled unit required");
    if (sample.size() != n)
        throw InvalidConfig("estimate_theta: mask rows must match the sample");
    int num_groups = 0;
    for (int g : groups) {
        if (g < 0) throw InvalidConfig("estimate_theta: group labels must be >= 0");
        num_groups = std::max(num_groups, g + 1);
    }
    GroupThetaEstimate est;
    est.group_labels = groups;
    est.group_counts.assign(static_cast<std::size_t>(num_groups), 0);
    for (int g : groups) ++est.group_counts[static_cast<std::size_t>(g)];
    for (int g = 0; g < num_groups; ++g)
        if (est.group_counts[static_cast<std::size_t>(g)] == 0)
            throw InvalidConfig("estimate_theta: group " + std::to_string(g + 1) +
                                " has no sampled units");
    est.marginal = MatrixRd::Zero(num_groups, d);
    est.joint.assign(static_cast<std::size_t>(num_groups), MatrixRd::Zero(d, d));
    for (int i = 0; i < n; ++i) {
        const int g = groups[static_cast<std::size_t>(i)];
        auto& jm = est.joint[static_cast<std::size_t>(g)];
        for (int j = 0; j < d; ++j) {
            if (!mask.entries(i, j)) continue;
            est.marginal(g, j) += 1.0;
            for (int jp = 0; jp < d; ++jp)
                if (mask.entries(i, jp)) jm(j, jp) += 1.0;
        }
    }
    for (int g = 0; g < num_groups; ++g) {
        const double n_g = static_cast<double>(est.group_counts[static_cast<std::size_t>(g)]);
        est.marginal.row(g) /= n_g;
        est.joint[static_cast<std::size_t>(g)] /= n_g;
    }
    return est;
}

} // namespace detail

//! theta_hat_lambda(t_j) = (1/n_lambda) sum_{k in s_lambda} r_k(t_j) and the
//! pairwise analogue. Zero response rates are surfaced, never imputed.
inline GroupThetaEstimate estimate_theta_group(const ObservationMask& mask, const Sample& sample,
                                               const std::vector<int>& groups) {
    GroupThetaEstimate est = detail::group_response_rates(mask, sample, groups);
    for (int g = 0; g < est.num_groups(); ++g)
        for (int j = 0; j < static_cast<int>(est.marginal.cols()); ++j)
            if (est.marginal(g, j) == 0.0)
                throw ZeroResponders("estimate_theta_group: no responders in group " +
                                     std::to_string(g + 1) + " at instant " + std::to_string(j + 1));
    return est;
}

//! Second-order-stationary variant: pooled response rate per group and a
//! pooled joint rate per lag. Both are normalized by the number of
//! contributing (unit, pair) terms so they estimate probabilities.
struct StationaryThetaEstimate {
    std::vector<double> theta;  // per group
    MatrixRd theta_lag;         // num_groups x d, column m = lag of m grid steps
};

inline StationaryThetaEstimate estimate_theta_stationary(const ObservationMask& mask,
                                                         const Sample& sample,
                                                         const std::vector<int>& groups,
                                                         const TimeGrid& grid) {
    const GroupThetaEstimate per_instant = detail::group_response_rates(mask, sample, groups);
    const int d = grid.size();
    const int num_groups = per_instant.num_groups();
    StationaryThetaEstimate est;
    est.theta.assign(static_cast<std::size_t>(num_groups), 0.0);
    est.theta_lag = MatrixRd::Zero(num_groups, d);
    for (int g = 0; g < num_groups; ++g) {
        est.theta[static_cast<std::size_t>(g)] = per_instant.marginal.row(g).mean();
        if (est.theta[static_cast<std::size_t>(g)] == 0.0)
            throw ZeroResponders("estimate_theta_stationary: no responders in group " +
                                 std::to_string(g + 1));
        const auto& jm = per_instant.joint[static_cast<std::size_t>(g)];
        for (int m = 0; m < d; ++m) {
            double acc = 0.0;
            for (int j = 0; j + m < d; ++j) acc += jm(j, j + m);
            est.theta_lag(g, m) = acc / static_cast<double>(d - m);
        }
    }
    return est;
}

//! Where estimator weights take their response probabilities from: the known
//! model, or group response rates estimated from the observed mask.
enum class ThetaOrigin { Known, Estimated };

class ThetaSource {
public:
    static ThetaSource known(ResponseModel model) {
        ThetaSource s;
        s.origin_ = ThetaOrigin::Known;
        s.source_ = std::move(model);
        return s;
    }

    static ThetaSource estimated(GroupThetaEstimate est, const Sample& sample) {
        if (static_cast<int>(est.group_labels.size()) != sample.size())
            throw InvalidConfig("ThetaSource: group labels must align with the sample");
        ThetaSource s;
        s.origin_ = ThetaOrigin::Estimated;
        s.units_ = sample.indices;
        s.source_ = std::move(est);
        return s;
    }

    ThetaOrigin origin() const { return origin_; }

    double theta(int unit, int j) const {
        if (origin_ == ThetaOrigin::Known) return std::get<ResponseModel>(source_).theta(unit, j);
        const auto& est = std::get<GroupThetaEstimate>(source_);
        return est.marginal(group_of_unit(unit), j);
    }

    double theta_joint(int unit, int j, int jp) const {
        if (j == jp) return theta(unit, j);
        if (origin_ == ThetaOrigin::Known)
            return std::get<ResponseModel>(source_).theta_joint(unit, j, jp);
        const auto& est = std::get<GroupThetaEstimate>(source_);
        return est.joint[static_cast<std::size_t>(group_of_unit(unit))](j, jp);
    }

    //! True when the joint law factorizes off the diagonal.
    bool independent_instants() const {
        return origin_ == ThetaOrigin::Known &&
               std::get<ResponseModel>(source_).independent_instants();
    }

private:
    int group_of_unit(int unit) const {
        const auto it = std::lower_bound(units_.begin(), units_.end(), unit);
        if (it == units_.end() || *it != unit)
            throw IndexOutOfRange("ThetaSource: unit " + std::to_string(unit) +
                                  " not in the estimation sample");
        const auto& est = std::get<GroupThetaEstimate>(source_);
        return est.group_labels[static_cast<std::size_t>(it - units_.begin())];
    }

    ThetaOrigin origin_ = ThetaOrigin::Known;
    std::vector<int> units_; // estimated only: ascending sample indices
    std::variant<ResponseModel, GroupThetaEstimate> source_ =
        ResponseModel::full_response(1);
    friend class ResponseModel;
};

} // namespace meancurve
