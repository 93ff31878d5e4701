#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/estimators.hpp"
#include "meancurve/grid.hpp"
#include "meancurve/kernel.hpp"
#include "meancurve/population.hpp"
#include "meancurve/response.hpp"
#include "meancurve/types.hpp"

namespace meancurve {

enum class LinearVariant { U1, U2 };

enum class VarianceKind { ExactHT, ApproxHajek1, ApproxHajek2, PlugInEstimate, EmpiricalMC };

inline const char* variance_name(VarianceKind kind) {
    switch (kind) {
        case VarianceKind::ExactHT: return "exact_ht";
        case VarianceKind::ApproxHajek1: return "approx_hajek1";
        case VarianceKind::ApproxHajek2: return "approx_hajek2";
        case VarianceKind::PlugInEstimate: return "plugin";
        case VarianceKind::EmpiricalMC: return "empirical_mc";
    }
    return "?";
}

//! Linearized variables of the Hajek estimators at one evaluation point:
//!   U1: u_kj(t) = (1/N) w_j(t) (Y_k(t_j) - mu_tilde(t))
//!   U2: u_kj(t) = (1/N) w_j(t) (Y_k(t_j) - mu(t_j))
//! Row sums (the smoothed linearized trajectories) coincide across variants
//! because the weights sum to one.
struct LinearizedVariables {
    LinearVariant variant = LinearVariant::U1;
    MatrixRd u;                      // rows x d
    std::vector<double> u_smoothed;  // row sums
};

inline LinearizedVariables linearized_variables(LinearVariant variant, const MatrixRd& values,
                                                const SmoothingWeights& weights, double mu_tilde_t,
                                                std::span<const double> mu_instants,
                                                double population_size) {
    const auto rows = values.rows();
    const auto d = values.cols();
    if (variant == LinearVariant::U2 && static_cast<Eigen::Index>(mu_instants.size()) != d)
        throw InvalidConfig("linearized_variables: U2 needs one center per instant");
    LinearizedVariables out;
    out.variant = variant;
    out.u = MatrixRd::Zero(rows, d);
    out.u_smoothed.assign(static_cast<std::size_t>(rows), 0.0);
    for (Eigen::Index k = 0; k < rows; ++k) {
        double row_sum = 0.0;
        for (int j = weights.support_begin; j < weights.support_end; ++j) {
            const double center =
                variant == LinearVariant::U1 ? mu_tilde_t : mu_instants[static_cast<std::size_t>(j)];
            const double v = weights.values[static_cast<std::size_t>(j)] *
                             (values(k, j) - center) / population_size;
            out.u(k, j) = v;
            row_sum += v;
        }
        out.u_smoothed[static_cast<std::size_t>(k)] = row_sum;
    }
    return out;
}

//! Pointwise variance value with its sampling/non-response decomposition.
struct VariancePoint {
    double total = 0.0;
    double sampling = 0.0;
    double nonresponse = 0.0;
    bool negative_warning = false;
};

struct VarianceCurve {
    std::vector<double> eval_points;
    std::vector<double> values;
    std::vector<double> sampling;
    std::vector<double> nonresponse;
    VarianceKind kind = VarianceKind::ExactHT;
    bool negative_warning = false;

    void push_back(double t, const VariancePoint& p) {
        eval_points.push_back(t);
        values.push_back(p.total);
        sampling.push_back(p.sampling);
        nonresponse.push_back(p.nonresponse);
        negative_warning = negative_warning || p.negative_warning;
    }
};

//! sum_{k,l in U} (Delta_kl / (pi_k pi_l)) z_k z_l, rewritten with per-design
//! sufficient statistics (sums and sums of squares) so it is O(N) for the
//! supported designs.
inline double design_quadratic_form(const SamplingDesign& design, std::span<const double> z) {
    if (static_cast<int>(z.size()) != design.population_size())
        throw InvalidConfig("design_quadratic_form: one value per population unit required");
    switch (design.kind()) {
        case DesignKind::Poisson: {
            double acc = 0.0;
            for (int k = 0; k < design.population_size(); ++k) {
                const double p = design.pi(k);
                acc += (1.0 - p) / p * z[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)];
            }
            return acc;
        }
        case DesignKind::Srswor:
        case DesignKind::StratifiedSrswor: {
            std::vector<double> s1(static_cast<std::size_t>(design.num_strata()), 0.0);
            std::vector<double> s2(static_cast<std::size_t>(design.num_strata()), 0.0);
            for (int k = 0; k < design.population_size(); ++k) {
                const auto lam = static_cast<std::size_t>(design.stratum_of(k));
                s1[lam] += z[static_cast<std::size_t>(k)];
                s2[lam] += z[static_cast<std::size_t>(k)] * z[static_cast<std::size_t>(k)];
            }
            double acc = 0.0;
            for (int lam = 0; lam < design.num_strata(); ++lam) {
                const double big_n = static_cast<double>(design.stratum_size(lam));
                const double n = static_cast<double>(design.stratum_sample_size(lam));
                const double p = n / big_n;
                const double diag = (1.0 - p) / p;
                double off = 0.0;
                if (big_n > 1.5)
                    off = (n * (n - 1.0) / (big_n * (big_n - 1.0)) - p * p) / (p * p);
                const auto l = static_cast<std::size_t>(lam);
                acc += diag * s2[l] + off * (s1[l] * s1[l] - s2[l]);
            }
            return acc;
        }
    }
    throw InvalidDesign("design_quadratic_form: unknown design kind");
}

//! Sample-level analogue sum_{k,l in s} (Delta_kl / (pi_kl pi_k pi_l)) z_k z_l
//! used by the plug-in variance estimator; z is indexed by sample position.
inline double design_quadratic_form_plugin(const SamplingDesign& design, const Sample& sample,
                                           std::span<const double> z) {
    if (z.size() != sample.indices.size())
        throw InvalidConfig("design_quadratic_form_plugin: one value per sampled unit required");
    switch (design.kind()) {
        case DesignKind::Poisson: {
            double acc = 0.0;
            for (std::size_t i = 0; i < z.size(); ++i) {
                const double p = design.pi(sample.indices[i]);
                acc += (1.0 - p) / (p * p) * z[i] * z[i];
            }
            return acc;
        }
        case DesignKind::Srswor:
        case DesignKind::StratifiedSrswor: {
            std::vector<double> s1(static_cast<std::size_t>(design.num_strata()), 0.0);
            std::vector<double> s2(static_cast<std::size_t>(design.num_strata()), 0.0);
            for (std::size_t i = 0; i < z.size(); ++i) {
                const auto lam = static_cast<std::size_t>(design.stratum_of(sample.indices[i]));
                s1[lam] += z[i];
                s2[lam] += z[i] * z[i];
            }
            double acc = 0.0;
            for (int lam = 0; lam < design.num_strata(); ++lam) {
                const double big_n = static_cast<double>(design.stratum_size(lam));
                const double n = static_cast<double>(design.stratum_sample_size(lam));
                const double p = n / big_n;
                const auto l = static_cast<std::size_t>(lam);
                acc += (1.0 - p) / (p * p) * s2[l];
                if (n > 1.5) {
                    const double pkl = n * (n - 1.0) / (big_n * (big_n - 1.0));
                    if (!(pkl > 0.0))
                        throw ZeroJointInclusion("plug-in variance: joint inclusion probability is 0");
                    acc += (pkl - p * p) / (pkl * p * p) * (s1[l] * s1[l] - s2[l]);
                }
            }
            return acc;
        }
    }
    throw InvalidDesign("design_quadratic_form_plugin: unknown design kind");
}

namespace detail {

//! (theta(t_j,t_j') - theta(t_j) theta(t_j')) / (theta(t_j) theta(t_j'))
//! for one response group, restricted to the weight support. Entry (a, b)
//! covers instants (support_begin + a, support_begin + b).
inline MatrixRd response_cov_window(const ResponseModel& model, int group,
                                    const SmoothingWeights& w) {
    const int span = w.support_end - w.support_begin;
    MatrixRd cov = MatrixRd::Zero(span, span);
    if (model.kind() == ResponseKind::FullResponse) return cov;
    for (int a = 0; a < span; ++a) {
        const int j = w.support_begin + a;
        const double th_j = model.group_theta(group, j);
        cov(a, a) = (1.0 - th_j) / th_j;
        if (model.independent_instants()) continue;
        for (int b = a + 1; b < span; ++b) {
            const int jp = w.support_begin + b;
            const double th_jp = model.group_theta(group, jp);
            const double joint = model.group_theta_joint(group, j, jp);
            const double v = (joint - th_j * th_jp) / (th_j * th_jp);
            cov(a, b) = v;
            cov(b, a) = v;
        }
    }
    return cov;
}

//! sum_{j,j'} a_j a_j' cov(j,j') over the support window, where
//! a_j = w_j (row_j - center_j). Exploits symmetry; skips the off-diagonal
//! entirely for instant-independent response.
inline double centered_pair_sum(const MatrixRd& cov, bool independent, std::span<const double> a) {
    const int span = static_cast<int>(a.size());
    double acc = 0.0;
    for (int p = 0; p < span; ++p) acc += cov(p, p) * a[static_cast<std::size_t>(p)] * a[static_cast<std::size_t>(p)];
    if (independent) return acc;
    for (int p = 0; p < span; ++p)
        for (int q = p + 1; q < span; ++q)
            acc += 2.0 * cov(p, q) * a[static_cast<std::size_t>(p)] * a[static_cast<std::size_t>(q)];
    return acc;
}

inline std::span<const double> row_span(const MatrixRd& m, Eigen::Index k) {
    return {m.row(k).data(), static_cast<std::size_t>(m.cols())};
}

enum class CenterMode { None, Scalar, PerInstant };

} // namespace detail

//! Exact pointwise variance of the non-response Horvitz-Thompson estimator,
//! split into the sampling term and the additional non-response term.
//! Population-level quantities must be known (theory/verification mode).
inline VariancePoint variance_ht_exact(const CurvePopulation& pop, const SamplingDesign& design,
                                       const ResponseModel& model, const KernelSpec& spec,
                                       double t) {
    if (design.population_size() != pop.size() || model.population_size() != pop.size())
        throw InvalidConfig("variance_ht_exact: design/model population size mismatch");
    const int big_n = pop.size();
    const double nn = static_cast<double>(big_n) * static_cast<double>(big_n);
    const SmoothingWeights w = smoothing_weights(pop.grid, spec, t);

    std::vector<double> smoothed(static_cast<std::size_t>(big_n), 0.0);
    for (int k = 0; k < big_n; ++k)
        smoothed[static_cast<std::size_t>(k)] = w.smooth(detail::row_span(pop.values, k));

    VariancePoint out;
    out.sampling = design_quadratic_form(design, smoothed) / nn;

    if (model.kind() != ResponseKind::FullResponse) {
        const int span = w.support_end - w.support_begin;
        std::vector<MatrixRd> cov;
        cov.reserve(static_cast<std::size_t>(model.num_groups()));
        for (int g = 0; g < model.num_groups(); ++g)
            cov.push_back(detail::response_cov_window(model, g, w));
        const bool indep = model.independent_instants();
        std::vector<double> a(static_cast<std::size_t>(span));
        double acc = 0.0;
        for (int k = 0; k < big_n; ++k) {
            for (int p = 0; p < span; ++p) {
                const int j = w.support_begin + p;
                a[static_cast<std::size_t>(p)] =
                    w.values[static_cast<std::size_t>(j)] * pop.values(k, j);
            }
            acc += detail::centered_pair_sum(cov[static_cast<std::size_t>(model.group_of(k))],
                                             indep, a) /
                   design.pi(k);
        }
        out.nonresponse = acc / nn;
    }
    out.total = out.sampling + out.nonresponse;
    return out;
}

//! Linearization-based approximate variance of the Hajek estimators.
//! The sampling terms of the two variants coincide (shared smoothed
//! linearized variable); the non-response terms differ through the centers.
inline VariancePoint variance_hajek_approx(LinearVariant variant, const CurvePopulation& pop,
                                           const SamplingDesign& design, const ResponseModel& model,
                                           const KernelSpec& spec, double t) {
    if (design.population_size() != pop.size() || model.population_size() != pop.size())
        throw InvalidConfig("variance_hajek_approx: design/model population size mismatch");
    const int big_n = pop.size();
    const double n_real = static_cast<double>(big_n);
    const SmoothingWeights w = smoothing_weights(pop.grid, spec, t);
    const PopulationMean mean = population_mean(pop);
    const double mu_tilde_t = w.smooth(mean.overall);

    std::vector<double> u_smoothed(static_cast<std::size_t>(big_n), 0.0);
    for (int k = 0; k < big_n; ++k)
        u_smoothed[static_cast<std::size_t>(k)] =
            (w.smooth(detail::row_span(pop.values, k)) - mu_tilde_t) / n_real;

    VariancePoint out;
    out.sampling = design_quadratic_form(design, u_smoothed);

    if (model.kind() != ResponseKind::FullResponse) {
        const int span = w.support_end - w.support_begin;
        std::vector<MatrixRd> cov;
        cov.reserve(static_cast<std::size_t>(model.num_groups()));
        for (int g = 0; g < model.num_groups(); ++g)
            cov.push_back(detail::response_cov_window(model, g, w));
        const bool indep = model.independent_instants();
        std::vector<double> a(static_cast<std::size_t>(span));
        double acc = 0.0;
        for (int k = 0; k < big_n; ++k) {
            for (int p = 0; p < span; ++p) {
                const int j = w.support_begin + p;
                const double center = variant == LinearVariant::U1
                                          ? mu_tilde_t
                                          : mean.overall[static_cast<std::size_t>(j)];
                a[static_cast<std::size_t>(p)] = w.values[static_cast<std::size_t>(j)] *
                                                 (pop.values(k, j) - center) / n_real;
            }
            acc += detail::centered_pair_sum(cov[static_cast<std::size_t>(model.group_of(k))],
                                             indep, a) /
                   design.pi(k);
        }
        out.nonresponse = acc;
    }
    out.total = out.sampling + out.nonresponse;
    out.negative_warning = out.total < 0.0;
    return out;
}

namespace detail {

inline void check_stratified_inputs(const CurvePopulation& pop, const SamplingDesign& design,
                                    const ResponseModel& model, const char* where) {
    if (design.kind() != DesignKind::StratifiedSrswor && design.kind() != DesignKind::Srswor)
        throw NotStratified(std::string(where) + ": requires a (stratified) SRSWOR design");
    if (design.population_size() != pop.size() || model.population_size() != pop.size())
        throw InvalidConfig(std::string(where) + ": design/model population size mismatch");
    if (design.kind() == DesignKind::StratifiedSrswor && design.strata() != pop.strata)
        throw NotStratified(std::string(where) + ": design strata must match population strata");
    if (model.kind() != ResponseKind::FullResponse && model.groups() != design.strata())
        throw NotStratified(std::string(where) + ": response groups must coincide with strata");
}

} // namespace detail

//! Stratified variance (1/N^2) sum_lambda N_lambda^2 V_lambda(t). The
//! sampling part of V_lambda is shared by the three estimators; the
//! non-response part uses raw products (HT), mu_tilde_lambda(t) centers
//! (Hajek 1) or mu_lambda(t_j) centers (Hajek 2).
inline VariancePoint variance_stratified(EstimatorTag tag, const CurvePopulation& pop,
                                         const SamplingDesign& design, const ResponseModel& model,
                                         const KernelSpec& spec, double t) {
    detail::check_stratified_inputs(pop, design, model, "variance_stratified");
    const SmoothingWeights w = smoothing_weights(pop.grid, spec, t);
    const PopulationMean mean = population_mean(pop);
    const int span = w.support_end - w.support_begin;
    const double pop_n = static_cast<double>(pop.size());

    std::vector<MatrixRd> cov;
    if (model.kind() != ResponseKind::FullResponse) {
        cov.reserve(static_cast<std::size_t>(model.num_groups()));
        for (int g = 0; g < model.num_groups(); ++g)
            cov.push_back(detail::response_cov_window(model, g, w));
    }
    const bool indep = model.independent_instants();

    VariancePoint out;
    const int num_strata = design.num_strata();
    std::vector<double> mu_tilde_lam(static_cast<std::size_t>(num_strata), 0.0);
    for (int lam = 0; lam < num_strata; ++lam)
        mu_tilde_lam[static_cast<std::size_t>(lam)] =
            w.smooth(detail::row_span(mean.by_stratum, lam));

    // accumulate per-stratum sums in one population pass
    std::vector<double> ssq(static_cast<std::size_t>(num_strata), 0.0);       // sum (Ytilde - mutilde_lam)^2
    std::vector<double> pair_acc(static_cast<std::size_t>(num_strata), 0.0);  // sum of pair sums
    std::vector<double> a(static_cast<std::size_t>(span));
    for (int k = 0; k < pop.size(); ++k) {
        const auto lam = static_cast<std::size_t>(design.stratum_of(k));
        const double centered =
            w.smooth(detail::row_span(pop.values, k)) - mu_tilde_lam[lam];
        ssq[lam] += centered * centered;
        if (model.kind() == ResponseKind::FullResponse) continue;
        for (int p = 0; p < span; ++p) {
            const int j = w.support_begin + p;
            double center = 0.0;
            if (tag == EstimatorTag::Hajek1) center = mu_tilde_lam[lam];
            else if (tag == EstimatorTag::Hajek2) center = mean.by_stratum(static_cast<int>(lam), j);
            a[static_cast<std::size_t>(p)] =
                w.values[static_cast<std::size_t>(j)] * (pop.values(k, j) - center);
        }
        pair_acc[lam] += detail::centered_pair_sum(
            cov[static_cast<std::size_t>(model.group_of(k))], indep, a);
    }

    for (int lam = 0; lam < num_strata; ++lam) {
        const double big_n = static_cast<double>(design.stratum_size(lam));
        const double n = static_cast<double>(design.stratum_sample_size(lam));
        const double share = big_n / pop_n;
        const auto l = static_cast<std::size_t>(lam);
        double sampling_lam = 0.0;
        if (n < big_n) // census strata contribute no sampling variance
            sampling_lam = (1.0 - n / big_n) / n / (big_n - 1.0) * ssq[l];
        const double nonresponse_lam =
            model.kind() == ResponseKind::FullResponse ? 0.0 : pair_acc[l] / (big_n * n);
        out.sampling += share * share * sampling_lam;
        out.nonresponse += share * share * nonresponse_lam;
    }
    out.total = out.sampling + out.nonresponse;
    out.negative_warning = tag != EstimatorTag::HT && out.total < 0.0;
    return out;
}

//! V(Hajek1) - V(HT) in the stratified setting, from the exact
//! pre-approximation quadratic form, together with its small-h
//! approximation -(1/n_lambda) mu_tilde_lambda(t)^2 w' Delta_lambda w
//! (non-positive, since Delta_lambda is a correlation-like PSD matrix).
struct VarianceDifference {
    double exact = 0.0;
    double small_h = 0.0;
};

inline VarianceDifference variance_difference_stratified(const CurvePopulation& pop,
                                                         const SamplingDesign& design,
                                                         const ResponseModel& model,
                                                         const KernelSpec& spec, double t) {
    detail::check_stratified_inputs(pop, design, model, "variance_difference_stratified");
    const SmoothingWeights w = smoothing_weights(pop.grid, spec, t);
    const PopulationMean mean = population_mean(pop);
    const int span = w.support_end - w.support_begin;
    const double pop_n = static_cast<double>(pop.size());

    VarianceDifference out;
    if (model.kind() == ResponseKind::FullResponse) return out;

    for (int lam = 0; lam < design.num_strata(); ++lam) {
        const MatrixRd cov = detail::response_cov_window(model, lam, w);
        const double mu_tilde_lam = w.smooth(detail::row_span(mean.by_stratum, lam));
        double quad = 0.0;       // w' Delta w
        double quad_mu = 0.0;    // sum w_j w_j' cov (mutilde - mu(t_j) - mu(t_j'))
        for (int p = 0; p < span; ++p) {
            const int j = w.support_begin + p;
            const double wj = w.values[static_cast<std::size_t>(j)];
            for (int q = 0; q < span; ++q) {
                const int jp = w.support_begin + q;
                const double ww = wj * w.values[static_cast<std::size_t>(jp)] * cov(p, q);
                quad += ww;
                quad_mu += ww * (mu_tilde_lam - mean.by_stratum(lam, j) - mean.by_stratum(lam, jp));
            }
        }
        const double n = static_cast<double>(design.stratum_sample_size(lam));
        const double share = static_cast<double>(design.stratum_size(lam)) / pop_n;
        out.exact += share * share * mu_tilde_lam * quad_mu / n;
        out.small_h += share * share * (-mu_tilde_lam * mu_tilde_lam * quad / n);
    }
    return out;
}

namespace detail {

//! Shared implementation of the plug-in variance estimators. center_mode
//! selects the linearization: Scalar (U1, center = Hajek1 estimate at t),
//! PerInstant (U2, center = pointwise ratio), None (HT, raw values).
inline VariancePoint plugin_variance_impl(CenterMode center_mode, const MatrixRd& values,
                                          const ObservationMask& mask, const ThetaSource& theta,
                                          const Sample& sample, const SamplingDesign& design,
                                          const TimeGrid& grid, const KernelSpec& spec, double t) {
    check_sample_inputs(values, sample, design, grid);
    check_mask(mask, sample, grid);
    const SmoothingWeights w = smoothing_weights(grid, spec, t);
    const InstantTotals tot = reweighted_totals(values, mask, theta, sample, design, grid);
    const double big_n = static_cast<double>(design.population_size());
    const int span = w.support_end - w.support_begin;

    // centers over the support window
    std::vector<double> center(static_cast<std::size_t>(span), 0.0);
    if (center_mode == CenterMode::Scalar) {
        const double c = hajek1_from_totals(tot, w);
        std::fill(center.begin(), center.end(), c);
    } else if (center_mode == CenterMode::PerInstant) {
        for (int p = 0; p < span; ++p) {
            const int j = w.support_begin + p;
            const double count = tot.count_total[static_cast<std::size_t>(j)];
            // instants nobody responded at never contribute (r factor below)
            center[static_cast<std::size_t>(p)] =
                count > 0.0 ? tot.y_total[static_cast<std::size_t>(j)] / count : 0.0;
        }
    }

    const bool indep = theta.independent_instants();
    const int n = sample.size();
    std::vector<double> u_hat(static_cast<std::size_t>(span), 0.0);
    std::vector<double> u_smoothed(static_cast<std::size_t>(n), 0.0);
    double term2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const int unit = sample.indices[static_cast<std::size_t>(i)];
        double row_sum = 0.0;
        for (int p = 0; p < span; ++p) {
            const int j = w.support_begin + p;
            if (!mask.entries(i, j)) {
                u_hat[static_cast<std::size_t>(p)] = 0.0; // masked values never read
                continue;
            }
            const double v = w.values[static_cast<std::size_t>(j)] *
                             (values(i, j) - center[static_cast<std::size_t>(p)]) / big_n;
            u_hat[static_cast<std::size_t>(p)] = v;
            const double th = theta.theta(unit, j);
            if (!(th > 0.0)) throw ZeroTheta("plug-in variance: theta = 0 at an observed cell");
            row_sum += v / th;
        }
        u_smoothed[static_cast<std::size_t>(i)] = row_sum;

        // second term: response covariance over observed pairs
        double pair = 0.0;
        for (int p = 0; p < span; ++p) {
            const int j = w.support_begin + p;
            if (!mask.entries(i, j)) continue;
            const double up = u_hat[static_cast<std::size_t>(p)];
            const double th_j = theta.theta(unit, j);
            pair += up * up * (1.0 - th_j) / th_j;
            if (indep) continue;
            for (int q = p + 1; q < span; ++q) {
                const int jp = w.support_begin + q;
                if (!mask.entries(i, jp)) continue;
                const double th_jp = theta.theta(unit, jp);
                const double joint = theta.theta_joint(unit, j, jp);
                pair += 2.0 * up * u_hat[static_cast<std::size_t>(q)] *
                        (joint - th_j * th_jp) / (th_j * th_jp);
            }
        }
        term2 += pair / design.pi(unit);
    }

    VariancePoint out;
    out.sampling = design_quadratic_form_plugin(design, sample, u_smoothed);
    out.nonresponse = term2;
    out.total = out.sampling + out.nonresponse;
    out.negative_warning = out.total < 0.0;
    return out;
}

} // namespace detail

//! Plug-in variance estimator for the Hajek estimators (sample-level sums,
//! Delta_kl/pi_kl weighting, observed response indicators). Reported as-is,
//! with a warning flag when negative.
inline VariancePoint variance_estimate_plugin(LinearVariant variant, const MatrixRd& values,
                                              const ObservationMask& mask, const ThetaSource& theta,
                                              const Sample& sample, const SamplingDesign& design,
                                              const TimeGrid& grid, const KernelSpec& spec,
                                              double t) {
    return detail::plugin_variance_impl(variant == LinearVariant::U1
                                            ? detail::CenterMode::Scalar
                                            : detail::CenterMode::PerInstant,
                                        values, mask, theta, sample, design, grid, spec, t);
}

//! Uncentered analogue for the Horvitz-Thompson estimator.
inline VariancePoint variance_estimate_plugin_ht(const MatrixRd& values, const ObservationMask& mask,
                                                 const ThetaSource& theta, const Sample& sample,
                                                 const SamplingDesign& design, const TimeGrid& grid,
                                                 const KernelSpec& spec, double t) {
    return detail::plugin_variance_impl(detail::CenterMode::None, values, mask, theta, sample,
                                        design, grid, spec, t);
}

//! Exact HT variance over a whole evaluation grid.
inline VarianceCurve variance_ht_exact_curve(const CurvePopulation& pop,
                                             const SamplingDesign& design,
                                             const ResponseModel& model, const KernelSpec& spec,
                                             std::span<const double> eval_points) {
    VarianceCurve curve;
    curve.kind = VarianceKind::ExactHT;
    for (double t : eval_points) curve.push_back(t, variance_ht_exact(pop, design, model, spec, t));
    return curve;
}

inline VarianceCurve variance_hajek_approx_curve(LinearVariant variant, const CurvePopulation& pop,
                                                 const SamplingDesign& design,
                                                 const ResponseModel& model, const KernelSpec& spec,
                                                 std::span<const double> eval_points) {
    VarianceCurve curve;
    curve.kind = variant == LinearVariant::U1 ? VarianceKind::ApproxHajek1
                                              : VarianceKind::ApproxHajek2;
    for (double t : eval_points)
        curve.push_back(t, variance_hajek_approx(variant, pop, design, model, spec, t));
    return curve;
}

//! Plug-in variance curve for the tagged estimator (HT uses the uncentered
//! analogue, the Hajek tags their matching linearization variants).
inline VarianceCurve variance_estimate_plugin_curve(EstimatorTag tag, const MatrixRd& values,
                                                    const ObservationMask& mask,
                                                    const ThetaSource& theta, const Sample& sample,
                                                    const SamplingDesign& design,
                                                    const TimeGrid& grid, const KernelSpec& spec,
                                                    std::span<const double> eval_points) {
    VarianceCurve curve;
    curve.kind = VarianceKind::PlugInEstimate;
    for (double t : eval_points) {
        VariancePoint p;
        switch (tag) {
            case EstimatorTag::HT:
                p = variance_estimate_plugin_ht(values, mask, theta, sample, design, grid, spec, t);
                break;
            case EstimatorTag::Hajek1:
                p = variance_estimate_plugin(LinearVariant::U1, values, mask, theta, sample, design,
                                             grid, spec, t);
                break;
            case EstimatorTag::Hajek2:
                p = variance_estimate_plugin(LinearVariant::U2, values, mask, theta, sample, design,
                                             grid, spec, t);
                break;
        }
        curve.push_back(t, p);
    }
    return curve;
}

} // namespace meancurve
