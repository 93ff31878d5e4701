#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/estimators.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/kernel.hpp"
#include "meancurve/response.hpp"
#include "meancurve/types.hpp"

namespace meancurve {

//! Settings for the leave-one-curve-out criterion. The default estimator is
//! the stratified Hajek(2) respondent-mean form.
struct CVConfig {
    EstimatorTag estimator = EstimatorTag::Hajek2;
    Hajek2Policy policy = Hajek2Policy::Strict;
};

namespace detail {

struct CVContext {
    int num_strata = 0;
    std::vector<int> stratum_of_row;           // per sampled unit
    std::vector<double> stratum_size;          // N_lambda
    std::vector<double> share;                 // N_lambda / N
    std::vector<double> design_weight;         // N_lambda / n_lambda
    std::vector<std::vector<double>> y_sum;    // per stratum, per instant: sum r Y/(theta pi)
    std::vector<std::vector<double>> c_sum;    // per stratum, per instant: sum r/(theta pi)
};

inline CVContext cv_context(const MatrixRd& values, const ObservationMask& mask,
                            const ThetaSource& theta, const Sample& sample,
                            const SamplingDesign& design, const TimeGrid& grid) {
    if (design.kind() == DesignKind::Poisson)
        throw InvalidDesign("cv_score: the criterion is defined for (stratified) SRSWOR designs");
    check_sample_inputs(values, sample, design, grid);
    check_mask(mask, sample, grid);
    const int d = grid.size();
    CVContext ctx;
    ctx.num_strata = design.num_strata();
    ctx.share.resize(static_cast<std::size_t>(ctx.num_strata));
    ctx.design_weight.resize(static_cast<std::size_t>(ctx.num_strata));
    std::vector<int> sampled_per_stratum(static_cast<std::size_t>(ctx.num_strata), 0);
    ctx.stratum_of_row.resize(static_cast<std::size_t>(sample.indices.size()));
    for (int i = 0; i < sample.size(); ++i) {
        const int lam = design.stratum_of(sample.indices[static_cast<std::size_t>(i)]);
        ctx.stratum_of_row[static_cast<std::size_t>(i)] = lam;
        ++sampled_per_stratum[static_cast<std::size_t>(lam)];
    }
    const double pop_n = static_cast<double>(design.population_size());
    ctx.stratum_size.resize(static_cast<std::size_t>(ctx.num_strata));
    for (int lam = 0; lam < ctx.num_strata; ++lam) {
        if (sampled_per_stratum[static_cast<std::size_t>(lam)] < 2)
            throw TooFewUnits("cv_score: leave-one-out needs at least 2 sampled units in stratum " +
                              std::to_string(lam + 1));
        ctx.stratum_size[static_cast<std::size_t>(lam)] =
            static_cast<double>(design.stratum_size(lam));
        ctx.share[static_cast<std::size_t>(lam)] =
            static_cast<double>(design.stratum_size(lam)) / pop_n;
        ctx.design_weight[static_cast<std::size_t>(lam)] =
            static_cast<double>(design.stratum_size(lam)) /
            static_cast<double>(design.stratum_sample_size(lam));
    }
    ctx.y_sum.assign(static_cast<std::size_t>(ctx.num_strata),
                     std::vector<double>(static_cast<std::size_t>(d), 0.0));
    ctx.c_sum.assign(static_cast<std::size_t>(ctx.num_strata),
                     std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int i = 0; i < sample.size(); ++i) {
        const int unit = sample.indices[static_cast<std::size_t>(i)];
        const auto lam = static_cast<std::size_t>(ctx.stratum_of_row[static_cast<std::size_t>(i)]);
        const double pi_k = design.pi(unit);
        for (int j = 0; j < d; ++j) {
            if (!mask.entries(i, j)) continue;
            const double th = theta.theta(unit, j);
            if (!(th > 0.0)) throw ZeroTheta("cv_score: theta = 0 at an observed cell");
            ctx.y_sum[lam][static_cast<std::size_t>(j)] += values(i, j) / (th * pi_k);
            ctx.c_sum[lam][static_cast<std::size_t>(j)] += 1.0 / (th * pi_k);
        }
    }
    return ctx;
}

//! Smooth one per-instant value vector at t_j (row j of the instant weights),
//! skipping NaN holes and renormalizing when the policy allows it.
inline double smooth_instant_values(const SmoothingWeights& w, std::span<const double> v,
                                    Hajek2Policy policy) {
    double acc = 0.0, kept = 0.0;
    bool dropped = false;
    for (int j = w.support_begin; j < w.support_end; ++j) {
        const double wj = w.values[static_cast<std::size_t>(j)];
        if (wj == 0.0) continue;
        const double vj = v[static_cast<std::size_t>(j)];
        if (std::isnan(vj)) {
            if (policy == Hajek2Policy::Strict)
                throw ZeroDenominatorInstant(
                    "cv_score: no effective respondents at instant " + std::to_string(j + 1));
            dropped = true;
            continue;
        }
        acc += wj * vj;
        kept += wj;
    }
    if (dropped) {
        if (!(kept > 0.0))
            throw ZeroDenominator("cv_score: no respondents anywhere near t = " +
                                  std::to_string(w.eval_point));
        acc /= kept;
    }
    return acc;
}

} // namespace detail

//! Design- and response-weighted leave-one-curve-out criterion
//!   CV(h) = sum_lambda sum_{k in s_lambda} (N_lambda/n_lambda)
//!           sum_j (r_k(t_j)/theta_lambda(t_j)) (Y_k(t_j) - mu_hat^{(-k)}(t_j))^2
//! with mu_hat^{(-k)} rebuilt from per-stratum running sums (incremental
//! bookkeeping, O(n d S) per candidate).
inline double cv_score(const MatrixRd& values, const ObservationMask& mask,
                       const ThetaSource& theta, const Sample& sample,
                       const SamplingDesign& design, const TimeGrid& grid, const KernelSpec& spec,
                       const CVConfig& config = {}) {
    const detail::CVContext ctx = detail::cv_context(values, mask, theta, sample, design, grid);
    const int d = grid.size();
    const int n = sample.size();
    const std::vector<SmoothingWeights> w_rows = smoothing_weights_at_instants(grid, spec);
    const double nan = std::numeric_limits<double>::quiet_NaN();

    // Per-stratum per-instant estimator values; holes (no respondents) are NaN.
    // HT uses the reweighted mean, Hajek2 the pointwise ratio; Hajek1 keeps
    // its numerator and denominator smooths separate instead.
    std::vector<std::vector<double>> v_full(static_cast<std::size_t>(ctx.num_strata),
                                            std::vector<double>(static_cast<std::size_t>(d), 0.0));
    for (int lam = 0; lam < ctx.num_strata; ++lam) {
        const auto l = static_cast<std::size_t>(lam);
        const double big_n_lam = ctx.stratum_size[l];
        for (int j = 0; j < d; ++j) {
            const auto jj = static_cast<std::size_t>(j);
            if (config.estimator == EstimatorTag::HT) {
                v_full[l][jj] = ctx.y_sum[l][jj] / big_n_lam;
            } else if (config.estimator == EstimatorTag::Hajek2) {
                v_full[l][jj] = ctx.c_sum[l][jj] > 0.0 ? ctx.y_sum[l][jj] / ctx.c_sum[l][jj] : nan;
            }
        }
    }

    // Full-sample smoothed combination at every instant (Hajek1 handled via
    // its stratum numerator/denominator smooths).
    std::vector<std::vector<double>> m_full(static_cast<std::size_t>(ctx.num_strata),
                                            std::vector<double>(static_cast<std::size_t>(d), 0.0));
    std::vector<std::vector<double>> num_full, den_full;
    if (config.estimator == EstimatorTag::Hajek1) {
        num_full.assign(static_cast<std::size_t>(ctx.num_strata),
                        std::vector<double>(static_cast<std::size_t>(d), 0.0));
        den_full = num_full;
        for (int lam = 0; lam < ctx.num_strata; ++lam) {
            const auto l = static_cast<std::size_t>(lam);
            for (int j = 0; j < d; ++j) {
                num_full[l][static_cast<std::size_t>(j)] =
                    w_rows[static_cast<std::size_t>(j)].smooth(ctx.y_sum[l]);
                den_full[l][static_cast<std::size_t>(j)] =
                    w_rows[static_cast<std::size_t>(j)].smooth(ctx.c_sum[l]);
            }
        }
    } else {
        for (int lam = 0; lam < ctx.num_strata; ++lam) {
            const auto l = static_cast<std::size_t>(lam);
            for (int j = 0; j < d; ++j)
                m_full[l][static_cast<std::size_t>(j)] = detail::smooth_instant_values(
                    w_rows[static_cast<std::size_t>(j)], v_full[l], config.policy);
        }
    }

    double cv = 0.0;
    std::vector<double> v_adj(static_cast<std::size_t>(d), 0.0);
    std::vector<double> y_adj, c_adj;
    for (int i = 0; i < n; ++i) {
        const int unit = sample.indices[static_cast<std::size_t>(i)];
        const auto lam = static_cast<std::size_t>(ctx.stratum_of_row[static_cast<std::size_t>(i)]);
        const double pi_k = design.pi(unit);
        const double big_n_lam = ctx.stratum_size[lam];

        // adjusted per-instant values for this unit's stratum
        if (config.estimator == EstimatorTag::Hajek1) {
            y_adj = ctx.y_sum[lam];
            c_adj = ctx.c_sum[lam];
            for (int j = 0; j < d; ++j) {
                if (!mask.entries(i, j)) continue;
                const double th = theta.theta(unit, j);
                y_adj[static_cast<std::size_t>(j)] -= values(i, j) / (th * pi_k);
                c_adj[static_cast<std::size_t>(j)] -= 1.0 / (th * pi_k);
            }
        } else {
            v_adj = v_full[lam];
            for (int j = 0; j < d; ++j) {
                if (!mask.entries(i, j)) continue;
                const auto jj = static_cast<std::size_t>(j);
                const double th = theta.theta(unit, j);
                const double y_rest = ctx.y_sum[lam][jj] - values(i, j) / (th * pi_k);
                const double c_rest = ctx.c_sum[lam][jj] - 1.0 / (th * pi_k);
                if (config.estimator == EstimatorTag::HT)
                    v_adj[jj] = y_rest / big_n_lam;
                else
                    v_adj[jj] = c_rest > 0.0 ? y_rest / c_rest : nan;
            }
        }

        // accumulate the residuals at this unit's observed instants
        for (int j = 0; j < d; ++j) {
            if (!mask.entries(i, j)) continue;
            const SmoothingWeights& w = w_rows[static_cast<std::size_t>(j)];
            double own;
            if (config.estimator == EstimatorTag::Hajek1) {
                double num = w.smooth(y_adj);
                double den = w.smooth(c_adj);
                if (!(den > 0.0))
                    throw ZeroDenominator("cv_score: leave-one-out Hajek1 denominator vanished");
                own = num / den;
            } else {
                own = detail::smooth_instant_values(w, v_adj, config.policy);
            }
            double rest = 0.0;
            for (int mu = 0; mu < ctx.num_strata; ++mu) {
                const auto m = static_cast<std::size_t>(mu);
                if (m == lam) continue;
                double value;
                if (config.estimator == EstimatorTag::Hajek1) {
                    const double den = den_full[m][static_cast<std::size_t>(j)];
                    if (!(den > 0.0))
                        throw ZeroDenominator("cv_score: Hajek1 denominator vanished in stratum " +
                                              std::to_string(mu + 1));
                    value = num_full[m][static_cast<std::size_t>(j)] / den;
                } else {
                    value = m_full[m][static_cast<std::size_t>(j)];
                }
                rest += ctx.share[m] * value;
            }
            const double predicted = rest + ctx.share[lam] * own;
            const double th = theta.theta(unit, j);
            const double resid = values(i, j) - predicted;
            cv += ctx.design_weight[lam] * resid * resid / th;
        }
    }
    return cv;
}

//! Per-candidate CV trace and the selected bandwidth.
struct CVResult {
    std::vector<double> bandwidths;
    std::vector<double> scores;        // NaN when the candidate failed
    std::vector<int> failures;         // evaluation failures per candidate
    std::vector<bool> a3_valid;
    double selected = 0.0;
    std::size_t selected_index = 0;
};

//! 15 log-spaced candidates from the grid spacing to T/4.
inline std::vector<double> default_bandwidth_grid(const TimeGrid& grid, int count = 15) {
    if (count < 1) throw InvalidConfig("default_bandwidth_grid: need at least one candidate");
    const double lo = grid.spacing();
    const double hi = grid.horizon() / 4.0;
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(count));
    if (count == 1 || hi <= lo) {
        out.push_back(lo);
        return out;
    }
    for (int i = 0; i < count; ++i)
        out.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1)));
    return out;
}

//! Evaluate CV(h) over the candidate grid and pick the minimizer; ties break
//! toward the larger bandwidth.
inline CVResult select_bandwidth(const MatrixRd& values, const ObservationMask& mask,
                                 const ThetaSource& theta, const Sample& sample,
                                 const SamplingDesign& design, const TimeGrid& grid,
                                 std::span<const double> candidates, Kernel family,
                                 const CVConfig& config = {}) {
    if (candidates.empty()) throw InvalidConfig("select_bandwidth: empty candidate grid");
    CVResult result;
    bool any = false;
    double best = std::numeric_limits<double>::infinity();
    for (double h : candidates) {
        const KernelSpec spec(family, h);
        result.bandwidths.push_back(h);
        result.a3_valid.push_back(satisfies_a3(spec, grid));
        try {
            const double score = cv_score(values, mask, theta, sample, design, grid, spec, config);
            result.scores.push_back(score);
            result.failures.push_back(0);
            if (!any || score < best || (score == best && h > result.selected)) {
                any = true;
                best = score;
                result.selected = h;
                result.selected_index = result.bandwidths.size() - 1;
            }
        } catch (const TooFewUnits&) {
            throw; // structural, not a property of this candidate
        } catch (const InvalidDesign&) {
            throw;
        } catch (const Error&) {
            result.scores.push_back(std::numeric_limits<double>::quiet_NaN());
            result.failures.push_back(1);
        }
    }
    if (!any) throw AllCandidatesFailed("select_bandwidth: every candidate bandwidth failed");
    return result;
}

} // namespace meancurve
