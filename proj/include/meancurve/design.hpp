#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "meancurve/errors.hpp"
#include "meancurve/rng.hpp"

namespace meancurve {

enum class DesignKind { Srswor, StratifiedSrswor, Poisson };

inline const char* design_name(DesignKind kind) {
    switch (kind) {
        case DesignKind::Srswor: return "srswor";
        case DesignKind::StratifiedSrswor: return "stratified";
        case DesignKind::Poisson: return "poisson";
    }
    return "?";
}

//! A sampling design over units {0..N-1}: first-order probabilities pi_k and
//! closed-form joint probabilities pi_kl. Joints are a rule, not a stored
//! N x N matrix; dense pairs only ever materialize inside the enumeration
//! oracle.
class SamplingDesign {
public:
    static SamplingDesign srswor(int population_size, int sample_size) {
        if (population_size < 1 || sample_size < 1 || sample_size > population_size)
            throw InvalidDesign("srswor: need 1 <= n <= N");
        SamplingDesign d;
        d.kind_ = DesignKind::Srswor;
        d.population_size_ = population_size;
        d.strata_.assign(static_cast<std::size_t>(population_size), 0);
        d.stratum_sizes_ = {population_size};
        d.sample_sizes_ = {sample_size};
        return d;
    }

    //! strata: one 0-based label per population unit; sample_sizes: n_lambda.
    static SamplingDesign stratified(std::vector<int> strata, std::vector<int> sample_sizes) {
        SamplingDesign d;
        d.kind_ = DesignKind::StratifiedSrswor;
        d.population_size_ = static_cast<int>(strata.size());
        if (d.population_size_ < 1) throw InvalidDesign("stratified: empty population");
        int max_label = 0;
        for (int lab : strata) {
            if (lab < 0) throw InvalidDesign("stratified: labels must be >= 0");
            max_label = std::max(max_label, lab);
        }
        const int num = max_label + 1;
        if (static_cast<int>(sample_sizes.size()) != num)
            throw InvalidDesign("stratified: one sample size per stratum required");
        d.stratum_sizes_.assign(static_cast<std::size_t>(num), 0);
        for (int lab : strata) ++d.stratum_sizes_[static_cast<std::size_t>(lab)];
        for (int lam = 0; lam < num; ++lam) {
            const int n_lam = sample_sizes[static_cast<std::size_t>(lam)];
            const int big_n = d.stratum_sizes_[static_cast<std::size_t>(lam)];
            if (big_n == 0) throw InvalidDesign("stratified: stratum " + std::to_string(lam + 1) + " is empty");
            if (n_lam < 1 || n_lam > big_n)
                throw InvalidDesign("stratified: need 1 <= n_lambda <= N_lambda in stratum " +
                                    std::to_string(lam + 1));
        }
        d.strata_ = std::move(strata);
        d.sample_sizes_ = std::move(sample_sizes);
        return d;
    }

    static SamplingDesign poisson(std::vector<double> inclusion) {
        SamplingDesign d;
        d.kind_ = DesignKind::Poisson;
        d.population_size_ = static_cast<int>(inclusion.size());
        if (d.population_size_ < 1) throw InvalidDesign("poisson: empty population");
        for (double p : inclusion)
            if (!(p > 0.0 && p <= 1.0))
                throw InvalidDesign("poisson: inclusion probabilities must lie in (0, 1]");
        d.pi_ = std::move(inclusion);
        d.strata_.assign(static_cast<std::size_t>(d.population_size_), 0);
        d.stratum_sizes_ = {d.population_size_};
        return d;
    }

    DesignKind kind() const { return kind_; }
    int population_size() const { return population_size_; }
    int num_strata() const { return static_cast<int>(stratum_sizes_.size()); }
    int stratum_of(int k) const { check_index(k); return strata_[static_cast<std::size_t>(k)]; }
    const std::vector<int>& strata() const { return strata_; }
    int stratum_size(int lam) const { return stratum_sizes_[static_cast<std::size_t>(lam)]; }
    int stratum_sample_size(int lam) const { return sample_sizes_[static_cast<std::size_t>(lam)]; }

    //! Total (expected, for Poisson) sample size.
    double sample_size() const {
        if (kind_ == DesignKind::Poisson)
            return std::accumulate(pi_.begin(), pi_.end(), 0.0);
        return static_cast<double>(std::accumulate(sample_sizes_.begin(), sample_sizes_.end(), 0));
    }

    double pi(int k) const {
        check_index(k);
        if (kind_ == DesignKind::Poisson) return pi_[static_cast<std::size_t>(k)];
        const int lam = strata_[static_cast<std::size_t>(k)];
        return static_cast<double>(sample_sizes_[static_cast<std::size_t>(lam)]) /
               static_cast<double>(stratum_sizes_[static_cast<std::size_t>(lam)]);
    }

    double pi_joint(int k, int l) const {
        check_index(k);
        check_index(l);
        if (k == l) return pi(k);
        if (kind_ == DesignKind::Poisson) return pi(k) * pi(l);
        const int lam_k = strata_[static_cast<std::size_t>(k)];
        const int lam_l = strata_[static_cast<std::size_t>(l)];
        if (lam_k != lam_l) return pi(k) * pi(l); // independent across strata
        const double n = static_cast<double>(sample_sizes_[static_cast<std::size_t>(lam_k)]);
        const double big_n = static_cast<double>(stratum_sizes_[static_cast<std::size_t>(lam_k)]);
        if (big_n < 2.0) return pi(k) * pi(l); // unreachable: k != l in a size-1 stratum
        return n * (n - 1.0) / (big_n * (big_n - 1.0));
    }

    //! Delta_kl = pi_kl - pi_k pi_l, with Delta_kk = pi_k (1 - pi_k).
    double delta(int k, int l) const {
        if (k == l) {
            const double p = pi(k);
            return p * (1.0 - p);
        }
        return pi_joint(k, l) - pi(k) * pi(l);
    }

private:
    void check_index(int k) const {
        if (k < 0 || k >= population_size_)
            throw IndexOutOfRange("design: unit index " + std::to_string(k) + " out of range");
    }

    DesignKind kind_ = DesignKind::Srswor;
    int population_size_ = 0;
    std::vector<int> strata_;        // 0-based stratum per unit (all zero unless stratified)
    std::vector<int> stratum_sizes_; // N_lambda
    std::vector<int> sample_sizes_;  // n_lambda (empty for Poisson)
    std::vector<double> pi_;         // Poisson only
};

//! Drawn sample: distinct unit indices in ascending order.
struct Sample {
    std::vector<int> indices;
    int size() const { return static_cast<int>(indices.size()); }
};

//! Draw a sample, deterministically in the seed.
//!
//! Fixed-size designs use sequential selection sampling (one pass over U,
//! include unit k with probability (still needed)/(still available) within
//! its stratum), which is exactly uniform over subsets. Poisson includes
//! each unit independently.
inline Sample draw_sample(const SamplingDesign& design, std::uint64_t seed) {
    auto rng = make_rng(seed);
    const int big_n = design.population_size();
    Sample s;
    if (design.kind() == DesignKind::Poisson) {
        for (int k = 0; k < big_n; ++k)
            if (uniform01(rng) < design.pi(k)) s.indices.push_back(k);
        return s;
    }
    std::vector<int> needed(static_cast<std::size_t>(design.num_strata()));
    std::vector<int> available(static_cast<std::size_t>(design.num_strata()));
    for (int lam = 0; lam < design.num_strata(); ++lam) {
        needed[static_cast<std::size_t>(lam)] = design.stratum_sample_size(lam);
        available[static_cast<std::size_t>(lam)] = design.stratum_size(lam);
    }
    for (int k = 0; k < big_n; ++k) {
        const auto lam = static_cast<std::size_t>(design.stratum_of(k));
        if (needed[lam] > 0 &&
            uniform01(rng) * static_cast<double>(available[lam]) < static_cast<double>(needed[lam])) {
            s.indices.push_back(k);
            --needed[lam];
        }
        --available[lam];
    }
    return s;
}

namespace detail {

inline double binomial_coefficient(int n, int k) {
    if (k < 0 || k > n) return 0.0;
    k = std::min(k, n - k);
    double c = 1.0;
    for (int i = 1; i <= k; ++i) c *= static_cast<double>(n - k + i) / static_cast<double>(i);
    return c;
}

//! All k-subsets of the given index list, lexicographic.
inline std::vector<std::vector<int>> all_subsets(const std::vector<int>& units, int k) {
    std::vector<std::vector<int>> out;
    const int n = static_cast<int>(units.size());
    std::vector<int> pick(static_cast<std::size_t>(k));
    std::iota(pick.begin(), pick.end(), 0);
    while (true) {
        std::vector<int> subset(static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) subset[static_cast<std::size_t>(i)] = units[static_cast<std::size_t>(pick[static_cast<std::size_t>(i)])];
        out.push_back(std::move(subset));
        int i = k - 1;
        while (i >= 0 && pick[static_cast<std::size_t>(i)] == n - k + i) --i;
        if (i < 0) break;
        ++pick[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < k; ++j) pick[static_cast<std::size_t>(j)] = pick[static_cast<std::size_t>(j - 1)] + 1;
    }
    return out;
}

} // namespace detail

//! Exhaustive support of an enumerable design with exact probabilities.
//! Errors out (rather than silently sampling) above the cap.
inline std::vector<std::pair<Sample, double>> enumerate_samples(const SamplingDesign& design,
                                                                double cap = 1e5) {
    const int big_n = design.population_size();
    std::vector<std::pair<Sample, double>> out;
    switch (design.kind()) {
        case DesignKind::Srswor: {
            const int n = design.stratum_sample_size(0);
            const double count = detail::binomial_coefficient(big_n, n);
            if (count > cap)
                throw TooLargeToEnumerate("enumerate_samples: C(N,n) = " + std::to_string(count) +
                                          " exceeds cap");
            std::vector<int> units(static_cast<std::size_t>(big_n));
            std::iota(units.begin(), units.end(), 0);
            for (auto& subset : detail::all_subsets(units, n))
                out.push_back({Sample{std::move(subset)}, 1.0 / count});
            return out;
        }
        case DesignKind::StratifiedSrswor: {
            double count = 1.0;
            std::vector<std::vector<std::vector<int>>> per_stratum;
            for (int lam = 0; lam < design.num_strata(); ++lam) {
                std::vector<int> units;
                for (int k = 0; k < big_n; ++k)
                    if (design.stratum_of(k) == lam) units.push_back(k);
                count *= detail::binomial_coefficient(static_cast<int>(units.size()),
                                                      design.stratum_sample_size(lam));
                if (count > cap)
                    throw TooLargeToEnumerate("enumerate_samples: stratified support exceeds cap");
                per_stratum.push_back(detail::all_subsets(units, design.stratum_sample_size(lam)));
            }
            const double prob = 1.0 / count;
            std::vector<int> current;
            auto recurse = [&](auto&& self, std::size_t lam) -> void {
                if (lam == per_stratum.size()) {
                    std::vector<int> sorted = current;
                    std::sort(sorted.begin(), sorted.end());
                    out.push_back({Sample{std::move(sorted)}, prob});
                    return;
                }
                for (const auto& subset : per_stratum[lam]) {
                    current.insert(current.end(), subset.begin(), subset.end());
                    self(self, lam + 1);
                    current.resize(current.size() - subset.size());
                }
            };
            recurse(recurse, 0);
            return out;
        }
        case DesignKind::Poisson: {
            if (big_n > 62 || std::pow(2.0, big_n) > cap)
                throw TooLargeToEnumerate("enumerate_samples: 2^N exceeds cap");
            const auto total = static_cast<std::uint64_t>(1) << big_n;
            for (std::uint64_t bits = 0; bits < total; ++bits) {
                Sample s;
                double p = 1.0;
                for (int k = 0; k < big_n; ++k) {
                    if (bits & (static_cast<std::uint64_t>(1) << k)) {
                        s.indices.push_back(k);
                        p *= design.pi(k);
                    } else {
                        p *= 1.0 - design.pi(k);
                    }
                }
                if (p > 0.0) out.push_back({std::move(s), p});
            }
            return out;
        }
    }
    throw InvalidDesign("enumerate_samples: unknown design kind");
}

} // namespace meancurve
