#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/kernel.hpp"
#include "meancurve/response.hpp"
#include "meancurve/types.hpp"

namespace meancurve {

enum class EstimatorTag { HT, Hajek1, Hajek2 };

inline const char* estimator_name(EstimatorTag tag) {
    switch (tag) {
        case EstimatorTag::HT: return "ht";
        case EstimatorTag::Hajek1: return "hajek1";
        case EstimatorTag::Hajek2: return "hajek2";
    }
    return "?";
}

//! What to do when Hajek(2) meets an instant with no effective respondents:
//! fail (default), or drop the instant and renormalize the remaining weights.
enum class Hajek2Policy { Strict, Renormalize };

struct EstimateMeta {
    double bandwidth = 0.0;
    DesignKind design = DesignKind::Srswor;
    ThetaOrigin theta_origin = ThetaOrigin::Known;
};

//! A mean-curve estimate evaluated on eval_points.
struct EstimatedCurve {
    std::vector<double> eval_points;
    std::vector<double> values;
    EstimatorTag tag = EstimatorTag::HT;
    EstimateMeta meta;
};

namespace detail {

inline void check_sample_inputs(const MatrixRd& values, const Sample& sample,
                                const SamplingDesign& design, const TimeGrid& grid) {
    if (values.rows() != sample.size())
        throw InvalidConfig("estimator: one value row per sampled unit required");
    if (values.cols() != grid.size())
        throw InvalidConfig("estimator: value columns must match the grid");
    for (std::size_t i = 1; i < sample.indices.size(); ++i)
        if (sample.indices[i - 1] >= sample.indices[i])
            throw InvalidConfig("estimator: sample indices must be ascending and distinct");
    if (!sample.indices.empty() &&
        (sample.indices.front() < 0 || sample.indices.back() >= design.population_size()))
        throw IndexOutOfRange("estimator: sample index outside the population");
}

inline void check_mask(const ObservationMask& mask, const Sample& sample, const TimeGrid& grid) {
    if (mask.units != sample.indices)
        throw InvalidConfig("estimator: mask rows must align with the sample");
    if (mask.cols() != grid.size())
        throw InvalidConfig("estimator: mask columns must match the grid");
}

//! Per-instant reweighted totals over the sample:
//!   y_total[j]     = sum_k r_k(t_j) Y_k(t_j) / (theta_k(t_j) pi_k)
//!   count_total[j] = sum_k r_k(t_j) / (theta_k(t_j) pi_k)
//! Masked cells are never read.
struct InstantTotals {
    std::vector<double> y_total;
    std::vector<double> count_total;
};

inline InstantTotals reweighted_totals(const MatrixRd& values, const ObservationMask& mask,
                                       const ThetaSource& theta, const Sample& sample,
                                       const SamplingDesign& design, const TimeGrid& grid) {
    const int d = grid.size();
    InstantTotals tot;
    tot.y_total.assign(static_cast<std::size_t>(d), 0.0);
    tot.count_total.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < sample.size(); ++i) {
        const int unit = sample.indices[static_cast<std::size_t>(i)];
        const double pi_k = design.pi(unit);
        for (int j = 0; j < d; ++j) {
            if (!mask.entries(i, j)) continue;
            const double th = theta.theta(unit, j);
            if (!(th > 0.0))
                throw ZeroTheta("estimator: theta = 0 at an observed cell (unit " +
                                std::to_string(unit + 1) + ", instant " + std::to_string(j + 1) + ")");
            const double w = th * pi_k;
            tot.y_total[static_cast<std::size_t>(j)] += values(i, j) / w;
            tot.count_total[static_cast<std::size_t>(j)] += 1.0 / w;
        }
    }
    return tot;
}

inline InstantTotals full_response_totals(const MatrixRd& values, const Sample& sample,
                                          const SamplingDesign& design, const TimeGrid& grid) {
    const int d = grid.size();
    InstantTotals tot;
    tot.y_total.assign(static_cast<std::size_t>(d), 0.0);
    tot.count_total.assign(static_cast<std::size_t>(d), 0.0);
    for (int i = 0; i < sample.size(); ++i) {
        const double pi_k = design.pi(sample.indices[static_cast<std::size_t>(i)]);
        for (int j = 0; j < d; ++j) {
            tot.y_total[static_cast<std::size_t>(j)] += values(i, j) / pi_k;
            tot.count_total[static_cast<std::size_t>(j)] += 1.0 / pi_k;
        }
    }
    return tot;
}

//! (1/N) sum_j w_j(t) y_total[j]
inline double ht_from_totals(const InstantTotals& tot, const SmoothingWeights& w, double big_n) {
    double acc = 0.0;
    for (int j = w.support_begin; j < w.support_end; ++j)
        acc += w.values[static_cast<std::size_t>(j)] * tot.y_total[static_cast<std::size_t>(j)];
    return acc / big_n;
}

//! sum_j w_j y_total[j] / sum_j w_j count_total[j]; the shared kernel
//! normalization cancels, so this equals the K-weighted ratio.
inline double hajek1_from_totals(const InstantTotals& tot, const SmoothingWeights& w) {
    double num = 0.0, den = 0.0;
    for (int j = w.support_begin; j < w.support_end; ++j) {
        const double wj = w.values[static_cast<std::size_t>(j)];
        num += wj * tot.y_total[static_cast<std::size_t>(j)];
        den += wj * tot.count_total[static_cast<std::size_t>(j)];
    }
    if (!(den > 0.0))
        throw ZeroDenominator("hajek1: no effective respondents near t = " +
                              std::to_string(w.eval_point));
    return num / den;
}

//! sum_j w_j * (y_total[j] / count_total[j]) with the zero-count policy.
inline double hajek2_from_totals(const InstantTotals& tot, const SmoothingWeights& w,
                                 Hajek2Policy policy) {
    double acc = 0.0, kept = 0.0;
    bool dropped = false;
    for (int j = w.support_begin; j < w.support_end; ++j) {
        const double wj = w.values[static_cast<std::size_t>(j)];
        if (wj == 0.0) continue;
        const double count = tot.count_total[static_cast<std::size_t>(j)];
        if (!(count > 0.0)) {
            if (policy == Hajek2Policy::Strict)
                throw ZeroDenominatorInstant("hajek2: no effective respondents at instant " +
                                             std::to_string(j + 1));
            dropped = true;
            continue;
        }
        acc += wj * (tot.y_total[static_cast<std::size_t>(j)] / count);
        kept += wj;
    }
    if (dropped) {
        if (!(kept > 0.0))
            throw ZeroDenominator("hajek2: every instant near t = " +
                                  std::to_string(w.eval_point) + " lacks respondents");
        acc /= kept;
    }
    return acc;
}

} // namespace detail

//! Smoothed Horvitz-Thompson estimator under full response.
inline EstimatedCurve ht_mean_full(const MatrixRd& values, const Sample& sample,
                                   const SamplingDesign& design, const TimeGrid& grid,
                                   const KernelSpec& spec, std::span<const double> eval_points) {
    detail::check_sample_inputs(values, sample, design, grid);
    const auto tot = detail::full_response_totals(values, sample, design, grid);
    EstimatedCurve out{{eval_points.begin(), eval_points.end()},
                       {},
                       EstimatorTag::HT,
                       {spec.bandwidth, design.kind(), ThetaOrigin::Known}};
    out.values.reserve(eval_points.size());
    const double big_n = static_cast<double>(design.population_size());
    for (double t : eval_points)
        out.values.push_back(detail::ht_from_totals(tot, smoothing_weights(grid, spec, t), big_n));
    return out;
}

//! Smoothed Hajek (ratio) estimator under full response; the per-instant
//! denominator sum_s 1/pi_k does not depend on j, so the smooth-then-ratio
//! and ratio-then-smooth forms coincide.
inline EstimatedCurve hajek_mean_full(const MatrixRd& values, const Sample& sample,
                                      const SamplingDesign& design, const TimeGrid& grid,
                                      const KernelSpec& spec, std::span<const double> eval_points) {
    detail::check_sample_inputs(values, sample, design, grid);
    const auto tot = detail::full_response_totals(values, sample, design, grid);
    EstimatedCurve out{{eval_points.begin(), eval_points.end()},
                       {},
                       EstimatorTag::Hajek1,
                       {spec.bandwidth, design.kind(), ThetaOrigin::Known}};
    out.values.reserve(eval_points.size());
    for (double t : eval_points)
        out.values.push_back(detail::hajek1_from_totals(tot, smoothing_weights(grid, spec, t)));
    return out;
}

//! Smoothed Horvitz-Thompson estimator reweighted for non-response:
//! (1/N) sum_j w_j(t) sum_{k in s} r_k(t_j) Y_k(t_j) / (theta_k(t_j) pi_k).
inline EstimatedCurve ht_mean_nr(const MatrixRd& values, const ObservationMask& mask,
                                 const ThetaSource& theta, const Sample& sample,
                                 const SamplingDesign& design, const TimeGrid& grid,
                                 const KernelSpec& spec, std::span<const double> eval_points) {
    detail::check_sample_inputs(values, sample, design, grid);
    detail::check_mask(mask, sample, grid);
    const auto tot = detail::reweighted_totals(values, mask, theta, sample, design, grid);
    EstimatedCurve out{{eval_points.begin(), eval_points.end()},
                       {},
                       EstimatorTag::HT,
                       {spec.bandwidth, design.kind(), theta.origin()}};
    out.values.reserve(eval_points.size());
    const double big_n = static_cast<double>(design.population_size());
    for (double t : eval_points)
        out.values.push_back(detail::ht_from_totals(tot, smoothing_weights(grid, spec, t), big_n));
    return out;
}

//! Hajek-type ratio of two globally smoothed reweighted estimators.
inline EstimatedCurve hajek1_mean_nr(const MatrixRd& values, const ObservationMask& mask,
                                     const ThetaSource& theta, const Sample& sample,
                                     const SamplingDesign& design, const TimeGrid& grid,
                                     const KernelSpec& spec, std::span<const double> eval_points) {
    detail::check_sample_inputs(values, sample, design, grid);
    detail::check_mask(mask, sample, grid);
    const auto tot = detail::reweighted_totals(values, mask, theta, sample, design, grid);
    EstimatedCurve out{{eval_points.begin(), eval_points.end()},
                       {},
                       EstimatorTag::Hajek1,
                       {spec.bandwidth, design.kind(), theta.origin()}};
    out.values.reserve(eval_points.size());
    for (double t : eval_points)
        out.values.push_back(detail::hajek1_from_totals(tot, smoothing_weights(grid, spec, t)));
    return out;
}

//! Smoothed Hajek estimator: pointwise ratio Yhat(t_j)/Nhat(t_j), then smooth.
inline EstimatedCurve hajek2_mean_nr(const MatrixRd& values, const ObservationMask& mask,
                                     const ThetaSource& theta, const Sample& sample,
                                     const SamplingDesign& design, const TimeGrid& grid,
                                     const KernelSpec& spec, std::span<const double> eval_points,
                                     Hajek2Policy policy = Hajek2Policy::Strict) {
    detail::check_sample_inputs(values, sample, design, grid);
    detail::check_mask(mask, sample, grid);
    const auto tot = detail::reweighted_totals(values, mask, theta, sample, design, grid);
    EstimatedCurve out{{eval_points.begin(), eval_points.end()},
                       {},
                       EstimatorTag::Hajek2,
                       {spec.bandwidth, design.kind(), theta.origin()}};
    out.values.reserve(eval_points.size());
    for (double t : eval_points)
        out.values.push_back(
            detail::hajek2_from_totals(tot, smoothing_weights(grid, spec, t), policy));
    return out;
}

//! Stratified estimator: mu_hat(t) = sum_lambda (N_lambda/N) mu_hat_lambda(t)
//! where each stratum uses the tagged estimator on its own subsample (SRSWOR
//! within the stratum, response groups = strata).
inline EstimatedCurve stratified_mean(EstimatorTag tag, const MatrixRd& values,
                                      const ObservationMask& mask, const ThetaSource& theta,
                                      const Sample& sample, const SamplingDesign& design,
                                      const TimeGrid& grid, const KernelSpec& spec,
                                      std::span<const double> eval_points,
                                      Hajek2Policy policy = Hajek2Policy::Strict) {
    if (design.kind() != DesignKind::StratifiedSrswor && design.kind() != DesignKind::Srswor)
        throw NotStratified("stratified_mean: requires a (stratified) SRSWOR design");
    detail::check_sample_inputs(values, sample, design, grid);
    detail::check_mask(mask, sample, grid);

    const int d = grid.size();
    const int num_strata = design.num_strata();
    std::vector<detail::InstantTotals> totals(static_cast<std::size_t>(num_strata));
    for (auto& tot : totals) {
        tot.y_total.assign(static_cast<std::size_t>(d), 0.0);
        tot.count_total.assign(static_cast<std::size_t>(d), 0.0);
    }
    for (int i = 0; i < sample.size(); ++i) {
        const int unit = sample.indices[static_cast<std::size_t>(i)];
        const auto lam = static_cast<std::size_t>(design.stratum_of(unit));
        const double pi_k = design.pi(unit);
        for (int j = 0; j < d; ++j) {
            if (!mask.entries(i, j)) continue;
            const double th = theta.theta(unit, j);
            if (!(th > 0.0))
                throw ZeroTheta("stratified_mean: theta = 0 at an observed cell (stratum " +
                                std::to_string(lam + 1) + ")");
            const double w = th * pi_k;
            totals[lam].y_total[static_cast<std::size_t>(j)] += values(i, j) / w;
            totals[lam].count_total[static_cast<std::size_t>(j)] += 1.0 / w;
        }
    }

    EstimatedCurve out{{eval_points.begin(), eval_points.end()},
                       {},
                       tag,
                       {spec.bandwidth, design.kind(), theta.origin()}};
    out.values.reserve(eval_points.size());
    const double big_n = static_cast<double>(design.population_size());
    for (double t : eval_points) {
        const SmoothingWeights w = smoothing_weights(grid, spec, t);
        double acc = 0.0;
        for (int lam = 0; lam < num_strata; ++lam) {
            const double big_n_lam = static_cast<double>(design.stratum_size(lam));
            const double share = big_n_lam / big_n;
            const auto& tot = totals[static_cast<std::size_t>(lam)];
            try {
                switch (tag) {
                    case EstimatorTag::HT:
                        acc += share * detail::ht_from_totals(tot, w, big_n_lam);
                        break;
                    case EstimatorTag::Hajek1:
                        acc += share * detail::hajek1_from_totals(tot, w);
                        break;
                    case EstimatorTag::Hajek2:
                        acc += share * detail::hajek2_from_totals(tot, w, policy);
                        break;
                }
            } catch (const ZeroDenominator& e) {
                throw ZeroDenominator("stratum " + std::to_string(lam + 1) + ": " + e.what());
            } catch (const ZeroDenominatorInstant& e) {
                throw ZeroDenominatorInstant("stratum " + std::to_string(lam + 1) + ": " + e.what());
            }
        }
        out.values.push_back(acc);
    }
    return out;
}

} // namespace meancurve
