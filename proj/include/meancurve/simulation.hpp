#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/estimators.hpp"
#include "meancurve/population.hpp"
#include "meancurve/response.hpp"
#include "meancurve/rng.hpp"
#include "meancurve/variance.hpp"

namespace meancurve {

//! Value rows for the sampled units, aligned with the ascending indices.
inline MatrixRd sample_rows(const CurvePopulation& pop, const Sample& sample) {
    MatrixRd rows(sample.size(), pop.grid.size());
    for (int i = 0; i < sample.size(); ++i)
        rows.row(i) = pop.values.row(sample.indices[static_cast<std::size_t>(i)]);
    return rows;
}

//! A tiny scenario the enumeration oracle can exhaust.
struct EnumerationInstance {
    CurvePopulation pop;
    SamplingDesign design;
    ResponseModel response;
    KernelSpec spec;
    EstimatorTag tag = EstimatorTag::HT;
    std::vector<double> eval_points;
    std::string description;
};

//! Two independently coded exhaustive strategies; they must agree.
//! JointMask decodes one bit counter across the whole sample x grid matrix
//! and multiplies per-row chain/product probabilities directly;
//! PerUnitFactored enumerates each unit's 2^d row patterns from a dynamic-
//! programming table and combines units recursively.
enum class EnumStrategy { JointMask, PerUnitFactored };

struct EnumerationReport {
    std::string description;
    std::vector<double> eval_points;
    std::vector<double> exact_mean;
    std::vector<double> exact_variance;
    std::vector<double> formula_mean;      // mu_tilde(t)
    std::vector<double> formula_variance;  // exact HT / approximate Hajek variance
    std::vector<double> defined_probability;
    double probability_total = 0.0;
    double max_mean_discrepancy = 0.0;
    double max_variance_discrepancy = 0.0;
};

namespace detail {

//! Probability table over all 2^d response rows of one unit, built by
//! extending prefixes one instant at a time (bit j of the pattern = r(t_j)).
inline std::vector<double> row_pattern_table(const ResponseModel& model, int unit, int d) {
    std::vector<double> table{1.0};
    for (int j = 0; j < d; ++j) {
        std::vector<double> next(table.size() * 2, 0.0);
        for (std::size_t prefix = 0; prefix < table.size(); ++prefix) {
            const double p = table[prefix];
            if (p == 0.0) continue;
            double p_one = 0.0;
            switch (model.kind()) {
                case ResponseKind::FullResponse: p_one = 1.0; break;
                case ResponseKind::HomogeneousGroups:
                    p_one = model.group_theta(model.group_of(unit), j);
                    break;
                case ResponseKind::MarkovGap: {
                    const int g = model.group_of(unit);
                    const double th = model.group_theta(g, j);
                    if (j == 0) {
                        p_one = th;
                    } else {
                        // conditional from the closed-form one-step joint
                        const double joint = model.group_theta_joint(g, j - 1, j);
                        const bool prev = (prefix >> (j - 1)) & 1U;
                        p_one = prev ? joint / th : (th - joint) / (1.0 - th);
                    }
                    break;
                }
            }
            next[prefix] += p * (1.0 - p_one);
            next[prefix | (std::size_t{1} << j)] += p * p_one;
        }
        table = std::move(next);
    }
    return table;
}

//! Evaluate the tagged estimator from precomputed totals at one point.
inline double estimator_from_totals(EstimatorTag tag, const InstantTotals& tot,
                                    const SmoothingWeights& w, double population_size) {
    switch (tag) {
        case EstimatorTag::HT: return ht_from_totals(tot, w, population_size);
        case EstimatorTag::Hajek1: return hajek1_from_totals(tot, w);
        case EstimatorTag::Hajek2: return hajek2_from_totals(tot, w, Hajek2Policy::Strict);
    }
    throw InvalidConfig("unknown estimator tag");
}

//! Visit every (sample, mask) state with its probability.
template <typename Visit>
void for_each_state(const EnumerationInstance& inst,
                    const std::vector<std::pair<Sample, double>>& samples, EnumStrategy strategy,
                    Visit&& visit) {
    const int d = inst.pop.grid.size();
    for (const auto& [sample, p_sample] : samples) {
        const int n = sample.size();
        const MatrixRd rows = sample_rows(inst.pop, sample);
        ObservationMask mask;
        mask.units = sample.indices;
        mask.entries = MaskMatrix::Zero(n, d);
        if (n == 0) { // possible under Poisson
            visit(rows, sample, mask, p_sample);
            continue;
        }
        if (strategy == EnumStrategy::JointMask) {
            const int bits = n * d;
            const std::uint64_t total = std::uint64_t{1} << bits;
            for (std::uint64_t state = 0; state < total; ++state) {
                double p_mask = 1.0;
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < d; ++j)
                        mask.entries(i, j) =
                            static_cast<std::uint8_t>((state >> (i * d + j)) & 1U);
                for (int i = 0; i < n && p_mask > 0.0; ++i) {
                    std::span<const std::uint8_t> row(mask.entries.row(i).data(),
                                                      static_cast<std::size_t>(d));
                    p_mask *= inst.response.row_probability(
                        sample.indices[static_cast<std::size_t>(i)], row);
                }
                if (p_mask > 0.0) visit(rows, sample, mask, p_sample * p_mask);
            }
        } else {
            std::vector<std::vector<double>> tables;
            tables.reserve(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                tables.push_back(row_pattern_table(
                    inst.response, sample.indices[static_cast<std::size_t>(i)], d));
            auto recurse = [&](auto&& self, int i, double p_acc) -> void {
                if (i == n) {
                    visit(rows, sample, mask, p_sample * p_acc);
                    return;
                }
                const auto& table = tables[static_cast<std::size_t>(i)];
                for (std::size_t pattern = 0; pattern < table.size(); ++pattern) {
                    if (table[pattern] == 0.0) continue;
                    for (int j = 0; j < d; ++j)
                        mask.entries(i, j) = static_cast<std::uint8_t>((pattern >> j) & 1U);
                    self(self, i + 1, p_acc * table[pattern]);
                }
            };
            recurse(recurse, 0, 1.0);
        }
    }
}

} // namespace detail

//! Exact moments of the tagged estimator by exhausting the joint law of
//! (sample, mask). Hajek states whose denominator vanishes are excluded;
//! moments are then conditional on definedness and the conditioning
//! probability is reported per point.
inline EnumerationReport exact_moments(const EnumerationInstance& inst, double cap = 1e6,
                                       EnumStrategy strategy = EnumStrategy::JointMask) {
    const int d = inst.pop.grid.size();
    const auto samples = enumerate_samples(inst.design, cap);
    double state_count = 0.0;
    for (const auto& [sample, p] : samples) {
        const int bits = sample.size() * d;
        if (bits > 40)
            throw TooLargeToEnumerate("exact_moments: 2^(n*d) overflows the enumeration budget");
        state_count += std::pow(2.0, bits);
        if (state_count > cap)
            throw TooLargeToEnumerate("exact_moments: sample x mask support exceeds cap");
    }

    const std::size_t pts = inst.eval_points.size();
    std::vector<SmoothingWeights> weights;
    weights.reserve(pts);
    for (double t : inst.eval_points)
        weights.push_back(smoothing_weights(inst.pop.grid, inst.spec, t));

    const ThetaSource theta = ThetaSource::known(inst.response);
    const double big_n = static_cast<double>(inst.pop.size());

    // pass 1: conditional first moments and total probability
    std::vector<long double> p_defined(pts, 0.0L), mean_acc(pts, 0.0L);
    long double p_total = 0.0L;
    auto pass1 = [&](const MatrixRd& rows, const Sample& sample, const ObservationMask& mask,
                     double prob) {
        p_total += prob;
        const auto tot =
            detail::reweighted_totals(rows, mask, theta, sample, inst.design, inst.pop.grid);
        for (std::size_t e = 0; e < pts; ++e) {
            try {
                const double v = detail::estimator_from_totals(inst.tag, tot, weights[e], big_n);
                p_defined[e] += prob;
                mean_acc[e] += static_cast<long double>(prob) * v;
            } catch (const Error&) {
                // undefined state at this evaluation point
            }
        }
    };
    detail::for_each_state(inst, samples, strategy, pass1);

    EnumerationReport report;
    report.description = inst.description;
    report.eval_points = inst.eval_points;
    report.probability_total = static_cast<double>(p_total);
    report.exact_mean.resize(pts);
    report.defined_probability.resize(pts);
    for (std::size_t e = 0; e < pts; ++e) {
        if (!(p_defined[e] > 0.0L))
            throw ZeroDenominator("exact_moments: estimator undefined with probability 1");
        report.exact_mean[e] = static_cast<double>(mean_acc[e] / p_defined[e]);
        report.defined_probability[e] = static_cast<double>(p_defined[e]);
    }

    // pass 2: conditional central second moments
    std::vector<long double> var_acc(pts, 0.0L);
    auto pass2 = [&](const MatrixRd& rows, const Sample& sample, const ObservationMask& mask,
                     double prob) {
        const auto tot =
            detail::reweighted_totals(rows, mask, theta, sample, inst.design, inst.pop.grid);
        for (std::size_t e = 0; e < pts; ++e) {
            try {
                const double v = detail::estimator_from_totals(inst.tag, tot, weights[e], big_n);
                const long double c = v - report.exact_mean[e];
                var_acc[e] += static_cast<long double>(prob) * c * c;
            } catch (const Error&) {
            }
        }
    };
    detail::for_each_state(inst, samples, strategy, pass2);
    report.exact_variance.resize(pts);
    for (std::size_t e = 0; e < pts; ++e)
        report.exact_variance[e] = static_cast<double>(var_acc[e] / p_defined[e]);

    // formula values under test
    report.formula_mean = smooth_population_mean(inst.pop, inst.spec, inst.eval_points);
    report.formula_variance.resize(pts);
    for (std::size_t e = 0; e < pts; ++e) {
        VariancePoint vp;
        switch (inst.tag) {
            case EstimatorTag::HT:
                vp = variance_ht_exact(inst.pop, inst.design, inst.response, inst.spec,
                                       inst.eval_points[e]);
                break;
            case EstimatorTag::Hajek1:
                vp = variance_hajek_approx(LinearVariant::U1, inst.pop, inst.design, inst.response,
                                           inst.spec, inst.eval_points[e]);
                break;
            case EstimatorTag::Hajek2:
                vp = variance_hajek_approx(LinearVariant::U2, inst.pop, inst.design, inst.response,
                                           inst.spec, inst.eval_points[e]);
                break;
        }
        report.formula_variance[e] = vp.total;
    }
    for (std::size_t e = 0; e < pts; ++e) {
        report.max_mean_discrepancy =
            std::max(report.max_mean_discrepancy,
                     std::abs(report.exact_mean[e] - report.formula_mean[e]));
        report.max_variance_discrepancy =
            std::max(report.max_variance_discrepancy,
                     std::abs(report.exact_variance[e] - report.formula_variance[e]));
    }
    return report;
}

//! Seeded Monte Carlo scenario for moderate-scale validation.
struct MonteCarloScenario {
    CurvePopulation pop;
    SamplingDesign design;
    ResponseModel response;
    KernelSpec spec;
    std::vector<double> eval_points;
    std::vector<EstimatorTag> tags;
    std::vector<LinearVariant> plugin_variants; // plug-in variance estimates to average
    bool plugin_ht = false;
    Hajek2Policy policy = Hajek2Policy::Strict;
    std::string description;
};

struct MonteCarloTagReport {
    EstimatorTag tag = EstimatorTag::HT;
    std::vector<double> empirical_mean;
    std::vector<double> empirical_variance;
    std::vector<double> se_mean;
    std::vector<double> se_variance;     // batch jackknife
    std::vector<double> formula_variance;
    std::vector<double> variance_relative_error; // formula / empirical - 1
};

struct MonteCarloPluginReport {
    std::string name;                      // "u1", "u2" or "ht"
    EstimatorTag matches = EstimatorTag::HT;
    std::vector<double> mean_estimate;     // mean of Vhat over replicates
    std::vector<double> relative_error;    // vs empirical variance of the matching tag
};

struct MonteCarloReport {
    std::string description;
    std::uint64_t seed = 0;
    int replicates = 0;
    std::vector<double> eval_points;
    std::vector<double> mu_tilde;
    std::vector<MonteCarloTagReport> tags;
    std::vector<MonteCarloPluginReport> plugins;
};

namespace detail {

//! Delete-one-batch jackknife standard error of the sample variance.
inline double jackknife_variance_se(std::span<const double> x, int batches) {
    const int n = static_cast<int>(x.size());
    const int b = std::min(batches, n);
    if (b < 2) return 0.0;
    double s1 = 0.0, s2 = 0.0;
    for (double v : x) {
        s1 += v;
        s2 += v * v;
    }
    std::vector<double> leave_out(static_cast<std::size_t>(b), 0.0);
    double mean_v = 0.0;
    for (int i = 0; i < b; ++i) {
        const int lo = static_cast<int>(static_cast<long long>(n) * i / b);
        const int hi = static_cast<int>(static_cast<long long>(n) * (i + 1) / b);
        double bs1 = 0.0, bs2 = 0.0;
        for (int r = lo; r < hi; ++r) {
            bs1 += x[static_cast<std::size_t>(r)];
            bs2 += x[static_cast<std::size_t>(r)] * x[static_cast<std::size_t>(r)];
        }
        const double nr = static_cast<double>(n - (hi - lo));
        const double m = (s1 - bs1) / nr;
        leave_out[static_cast<std::size_t>(i)] = ((s2 - bs2) - nr * m * m) / (nr - 1.0);
        mean_v += leave_out[static_cast<std::size_t>(i)];
    }
    mean_v /= static_cast<double>(b);
    double ss = 0.0;
    for (double v : leave_out) ss += (v - mean_v) * (v - mean_v);
    return std::sqrt(ss * static_cast<double>(b - 1) / static_cast<double>(b));
}

inline double sample_variance(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= n;
    double ss = 0.0;
    for (double v : x) ss += (v - mean) * (v - mean);
    return ss / (n - 1.0);
}

} // namespace detail

//! R independent (sample, mask) draws with counter-derived seeds; empirical
//! moments of the requested estimators plus formula values under test.
inline MonteCarloReport monte_carlo(const MonteCarloScenario& scenario, int replicates,
                                    std::uint64_t seed) {
    if (replicates < 2) throw InvalidConfig("monte_carlo: need at least 2 replicates");
    if (scenario.tags.empty()) throw InvalidConfig("monte_carlo: no estimator tags requested");
    const std::size_t pts = scenario.eval_points.size();
    const std::size_t ntags = scenario.tags.size();

    std::vector<SmoothingWeights> weights;
    weights.reserve(pts);
    for (double t : scenario.eval_points)
        weights.push_back(smoothing_weights(scenario.pop.grid, scenario.spec, t));

    const ThetaSource theta = ThetaSource::known(scenario.response);
    const double big_n = static_cast<double>(scenario.pop.size());

    struct PluginSpec {
        std::string name;
        EstimatorTag matches;
        detail::CenterMode mode;
    };
    std::vector<PluginSpec> plugin_specs;
    for (LinearVariant v : scenario.plugin_variants)
        plugin_specs.push_back(v == LinearVariant::U1
                                   ? PluginSpec{"u1", EstimatorTag::Hajek1, detail::CenterMode::Scalar}
                                   : PluginSpec{"u2", EstimatorTag::Hajek2, detail::CenterMode::PerInstant});
    if (scenario.plugin_ht)
        plugin_specs.push_back({"ht", EstimatorTag::HT, detail::CenterMode::None});

    // replicate x point value store per tag / plug-in
    std::vector<std::vector<std::vector<double>>> values(
        ntags, std::vector<std::vector<double>>(pts));
    std::vector<std::vector<std::vector<double>>> plugin_values(
        plugin_specs.size(), std::vector<std::vector<double>>(pts));

    for (int rep = 0; rep < replicates; ++rep) {
        const Sample sample = draw_sample(scenario.design, derive_seed(seed, 0, static_cast<std::uint64_t>(rep)));
        const ObservationMask mask = simulate_mask(scenario.response, sample, scenario.pop.grid,
                                                   derive_seed(seed, 1, static_cast<std::uint64_t>(rep)));
        const MatrixRd rows = sample_rows(scenario.pop, sample);
        const auto tot = detail::reweighted_totals(rows, mask, theta, sample, scenario.design,
                                                   scenario.pop.grid);
        for (std::size_t ti = 0; ti < ntags; ++ti)
            for (std::size_t e = 0; e < pts; ++e)
                values[ti][e].push_back(detail::estimator_from_totals(
                    scenario.tags[ti], tot, weights[e], big_n));
        for (std::size_t pi = 0; pi < plugin_specs.size(); ++pi)
            for (std::size_t e = 0; e < pts; ++e)
                plugin_values[pi][e].push_back(
                    detail::plugin_variance_impl(plugin_specs[pi].mode, rows, mask, theta, sample,
                                                 scenario.design, scenario.pop.grid, scenario.spec,
                                                 scenario.eval_points[e])
                        .total);
    }

    MonteCarloReport report;
    report.description = scenario.description;
    report.seed = seed;
    report.replicates = replicates;
    report.eval_points = scenario.eval_points;
    report.mu_tilde = smooth_population_mean(scenario.pop, scenario.spec, scenario.eval_points);

    const double r_real = static_cast<double>(replicates);
    for (std::size_t ti = 0; ti < ntags; ++ti) {
        MonteCarloTagReport tr;
        tr.tag = scenario.tags[ti];
        for (std::size_t e = 0; e < pts; ++e) {
            const auto& x = values[ti][e];
            double mean = 0.0;
            for (double v : x) mean += v;
            mean /= r_real;
            const double var = detail::sample_variance(x);
            tr.empirical_mean.push_back(mean);
            tr.empirical_variance.push_back(var);
            tr.se_mean.push_back(std::sqrt(var / r_real));
            tr.se_variance.push_back(detail::jackknife_variance_se(x, 50));
            VariancePoint vp;
            switch (tr.tag) {
                case EstimatorTag::HT:
                    vp = variance_ht_exact(scenario.pop, scenario.design, scenario.response,
                                           scenario.spec, scenario.eval_points[e]);
                    break;
                case EstimatorTag::Hajek1:
                    vp = variance_hajek_approx(LinearVariant::U1, scenario.pop, scenario.design,
                                               scenario.response, scenario.spec,
                                               scenario.eval_points[e]);
                    break;
                case EstimatorTag::Hajek2:
                    vp = variance_hajek_approx(LinearVariant::U2, scenario.pop, scenario.design,
                                               scenario.response, scenario.spec,
                                               scenario.eval_points[e]);
                    break;
            }
            tr.formula_variance.push_back(vp.total);
            tr.variance_relative_error.push_back(var > 0.0 ? vp.total / var - 1.0 : 0.0);
        }
        report.tags.push_back(std::move(tr));
    }

    for (std::size_t pi = 0; pi < plugin_specs.size(); ++pi) {
        MonteCarloPluginReport pr;
        pr.name = plugin_specs[pi].name;
        pr.matches = plugin_specs[pi].matches;
        for (std::size_t e = 0; e < pts; ++e) {
            const auto& x = plugin_values[pi][e];
            double mean = 0.0;
            for (double v : x) mean += v;
            mean /= r_real;
            pr.mean_estimate.push_back(mean);
            double emp = 0.0;
            for (const auto& tr : report.tags)
                if (tr.tag == pr.matches) emp = tr.empirical_variance[e];
            pr.relative_error.push_back(emp > 0.0 ? mean / emp - 1.0 : 0.0);
        }
        report.plugins.push_back(std::move(pr));
    }
    return report;
}

} // namespace meancurve
