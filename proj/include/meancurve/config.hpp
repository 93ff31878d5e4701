#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "meancurve/bandwidth.hpp"
#include "meancurve/csv.hpp"
#include "meancurve/design.hpp"
#include "meancurve/errors.hpp"
#include "meancurve/estimators.hpp"
#include "meancurve/population.hpp"
#include "meancurve/response.hpp"
#include "meancurve/simulation.hpp"

namespace meancurve {

using Json = nlohmann::json;

inline Json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    try {
        return Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

//! FNV-1a over the canonical dump; stamped into every output file so runs
//! are traceable to their configuration.
inline std::uint64_t config_hash(const Json& config) {
    const std::string dump = config.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : dump) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hash_string(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Kernel kernel_from_name(const std::string& name) {
    if (name == "epanechnikov") return Kernel::Epanechnikov;
    if (name == "gaussian") return Kernel::Gaussian;
    if (name == "uniform") return Kernel::Uniform;
    throw ConfigError("unknown kernel family '" + name + "'");
}

inline EstimatorTag estimator_from_name(const std::string& name) {
    if (name == "ht") return EstimatorTag::HT;
    if (name == "hajek1") return EstimatorTag::Hajek1;
    if (name == "hajek2") return EstimatorTag::Hajek2;
    throw ConfigError("unknown estimator '" + name + "' (expected ht, hajek1 or hajek2)");
}

inline std::vector<EstimatorTag> estimators_from_json(const Json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "all")
            return {EstimatorTag::HT, EstimatorTag::Hajek1, EstimatorTag::Hajek2};
        return {estimator_from_name(j.get<std::string>())};
    }
    if (!j.is_array() || j.empty()) throw ConfigError("'estimators' must be a list or \"all\"");
    std::vector<EstimatorTag> tags;
    for (const auto& v : j) tags.push_back(estimator_from_name(v.get<std::string>()));
    return tags;
}

inline GeneratorConfig generator_from_json(const Json& j) {
    GeneratorConfig g;
    if (j.contains("base_level")) g.base_level = j["base_level"].get<double>();
    if (j.contains("stratum_separation")) g.stratum_separation = j["stratum_separation"].get<double>();
    if (j.contains("harmonics")) g.harmonics = j["harmonics"].get<int>();
    if (j.contains("harmonic_amplitude")) g.harmonic_amplitude = j["harmonic_amplitude"].get<double>();
    if (j.contains("unit_amplitude_sd")) g.unit_amplitude_sd = j["unit_amplitude_sd"].get<double>();
    if (j.contains("unit_phase_sd")) g.unit_phase_sd = j["unit_phase_sd"].get<double>();
    if (j.contains("unit_level_sd")) g.unit_level_sd = j["unit_level_sd"].get<double>();
    if (j.contains("cusp_location")) g.cusp_location = j["cusp_location"].get<double>();
    if (j.contains("cusp_amplitude")) g.cusp_amplitude = j["cusp_amplitude"].get<double>();
    if (j.contains("force_positive")) g.force_positive = j["force_positive"].get<bool>();
    if (j.contains("positive_floor")) g.positive_floor = j["positive_floor"].get<double>();
    return g;
}

//! Population from a "generate" block.
inline CurvePopulation generate_population_from_json(const Json& j, std::uint64_t seed) {
    for (const char* key : {"N", "d"})
        if (!j.contains(key)) throw ConfigError(std::string("generate: missing '") + key + "'");
    const int big_n = j["N"].get<int>();
    const int d = j["d"].get<int>();
    const double horizon = j.value("T", 1.0);
    const int strata = j.value("strata", 1);
    const double beta = j.value("beta", 1.0);
    return generate_population(seed, big_n, TimeGrid::uniform(horizon, d), strata, beta,
                               generator_from_json(j));
}

//! Dense 0-based stratum labels from raw CSV labels (ascending label order).
inline std::pair<std::vector<int>, std::vector<int>> densify_strata(const std::vector<int>& raw) {
    std::vector<int> uniq(raw.begin(), raw.end());
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<int> dense(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        const auto it = std::lower_bound(uniq.begin(), uniq.end(), raw[i]);
        dense[i] = static_cast<int>(it - uniq.begin());
    }
    return {std::move(dense), std::move(uniq)};
}

//! Population loaded from CSV (must be complete) or generated.
inline CurvePopulation population_from_config(const Json& config, std::uint64_t seed) {
    if (config.contains("population") && config["population"].contains("path")) {
        const CurveTable table = read_curve_csv(config["population"]["path"].get<std::string>());
        if (table.has_missing)
            throw ConfigError("population CSV has missing cells; populations must be complete");
        auto [dense, uniq] = densify_strata(table.raw_strata);
        return CurvePopulation(table.grid, table.values, std::move(dense));
    }
    if (config.contains("generate")) return generate_population_from_json(config["generate"], seed);
    throw ConfigError("config needs either 'population.path' or a 'generate' block");
}

//! Design over a known full population.
inline SamplingDesign design_from_config(const Json& j, const CurvePopulation& pop) {
    if (!j.contains("kind")) throw ConfigError("design: missing 'kind'");
    const std::string kind = j["kind"].get<std::string>();
    if (kind == "srswor") {
        if (!j.contains("n")) throw ConfigError("design: srswor needs 'n'");
        return SamplingDesign::srswor(pop.size(), j["n"].get<int>());
    }
    if (kind == "stratified") {
        if (!j.contains("n_per_stratum")) throw ConfigError("design: stratified needs 'n_per_stratum'");
        return SamplingDesign::stratified(pop.strata,
                                          j["n_per_stratum"].get<std::vector<int>>());
    }
    if (kind == "poisson") {
        if (j.contains("pi")) {
            auto pi = j["pi"].get<std::vector<double>>();
            if (static_cast<int>(pi.size()) == 1)
                pi.assign(static_cast<std::size_t>(pop.size()), pi.front());
            return SamplingDesign::poisson(std::move(pi));
        }
        if (j.contains("expected_n")) {
            const double p = j["expected_n"].get<double>() / static_cast<double>(pop.size());
            return SamplingDesign::poisson(std::vector<double>(static_cast<std::size_t>(pop.size()), p));
        }
        throw ConfigError("design: poisson needs 'pi' or 'expected_n'");
    }
    throw ConfigError("design: unknown kind '" + kind + "'");
}

//! Known response model over a full population; groups default to strata.
inline ResponseModel response_from_config(const Json& j, const CurvePopulation& pop) {
    const std::string kind = j.value("kind", "full");
    if (kind == "full") return ResponseModel::full_response(pop.size());
    if (kind == "groups") {
        if (!j.contains("theta")) throw ConfigError("response: groups needs 'theta'");
        MatrixRd theta;
        const auto& tj = j["theta"];
        if (tj.is_number()) {
            theta = MatrixRd::Constant(pop.num_strata, pop.grid.size(), tj.get<double>());
        } else {
            const auto rows = tj.get<std::vector<std::vector<double>>>();
            theta.resize(static_cast<Eigen::Index>(rows.size()), pop.grid.size());
            for (std::size_t g = 0; g < rows.size(); ++g) {
                if (static_cast<int>(rows[g].size()) != pop.grid.size())
                    throw ConfigError("response: theta rows must have d entries");
                for (int jcol = 0; jcol < pop.grid.size(); ++jcol)
                    theta(static_cast<Eigen::Index>(g), jcol) = rows[g][static_cast<std::size_t>(jcol)];
            }
        }
        return ResponseModel::homogeneous_groups(pop.strata, std::move(theta));
    }
    if (kind == "markov") {
        if (!j.contains("theta") || !j.contains("rho"))
            throw ConfigError("response: markov needs 'theta' and 'rho'");
        auto expand = [&](const Json& v) {
            std::vector<double> out;
            if (v.is_number())
                out.assign(static_cast<std::size_t>(pop.num_strata), v.get<double>());
            else
                out = v.get<std::vector<double>>();
            return out;
        };
        return ResponseModel::markov_gap(pop.strata, expand(j["theta"]), expand(j["rho"]));
    }
    if (kind == "estimate")
        throw ConfigError("response: 'estimate' is only valid for the estimate/cv subcommands");
    throw ConfigError("response: unknown kind '" + kind + "'");
}

//! Inputs reconstructed from a sample CSV for estimation: a design sized to
//! the configured population with the sampled units mapped to the leading
//! indices, plus the sample, mask and values.
struct EstimationInputs {
    TimeGrid grid = TimeGrid::uniform(1.0, 2);
    SamplingDesign design = SamplingDesign::srswor(1, 1);
    Sample sample;
    MatrixRd values;
    ObservationMask mask;
    std::vector<int> dense_strata; // per sampled unit
    std::vector<long long> ids;
    std::vector<int> raw_strata;
};

inline EstimationInputs estimation_inputs_from_table(const CurveTable& table, const Json& j_design) {
    EstimationInputs in;
    in.grid = table.grid;
    in.values = table.values;
    in.ids = table.ids;
    in.raw_strata = table.raw_strata;
    const int n = table.rows();
    in.sample.indices.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) in.sample.indices[static_cast<std::size_t>(i)] = i;
    in.mask.units = in.sample.indices;
    in.mask.entries = table.mask;

    auto [dense, uniq] = densify_strata(table.raw_strata);
    in.dense_strata = dense;

    if (!j_design.contains("kind")) throw ConfigError("design: missing 'kind'");
    const std::string kind = j_design["kind"].get<std::string>();
    if (kind == "srswor") {
        if (!j_design.contains("N")) throw ConfigError("design: srswor estimation needs 'N'");
        const int big_n = j_design["N"].get<int>();
        if (big_n < n) throw ConfigError("design: N smaller than the number of sampled rows");
        in.design = SamplingDesign::srswor(big_n, n);
        return in;
    }
    if (kind == "stratified") {
        if (!j_design.contains("N_per_stratum"))
            throw ConfigError("design: stratified estimation needs 'N_per_stratum' "
                              "(ordered by ascending stratum label)");
        const auto big_ns = j_design["N_per_stratum"].get<std::vector<int>>();
        if (big_ns.size() != uniq.size())
            throw ConfigError("design: N_per_stratum size must match the stratum labels in the file");
        std::vector<int> counts(uniq.size(), 0);
        for (int lab : dense) ++counts[static_cast<std::size_t>(lab)];
        std::vector<int> full_strata = dense; // sampled units first
        for (std::size_t lam = 0; lam < uniq.size(); ++lam) {
            if (big_ns[lam] < counts[lam])
                throw ConfigError("design: N_per_stratum smaller than sampled count in stratum " +
                                  std::to_string(uniq[lam]));
            for (int extra = counts[lam]; extra < big_ns[lam]; ++extra)
                full_strata.push_back(static_cast<int>(lam));
        }
        in.design = SamplingDesign::stratified(std::move(full_strata), std::move(counts));
        return in;
    }
    if (kind == "poisson") {
        if (!j_design.contains("N") || !j_design.contains("pi"))
            throw ConfigError("design: poisson estimation needs 'N' and per-row 'pi'");
        const int big_n = j_design["N"].get<int>();
        auto pi = j_design["pi"].get<std::vector<double>>();
        if (static_cast<int>(pi.size()) != n)
            throw ConfigError("design: poisson 'pi' must list one probability per sampled row");
        if (big_n < n) throw ConfigError("design: N smaller than the number of sampled rows");
        // unsampled units never enter any estimation formula; give them the
        // mean probability to satisfy the design invariants
        double mean_pi = 0.0;
        for (double p : pi) mean_pi += p;
        mean_pi /= static_cast<double>(n);
        pi.resize(static_cast<std::size_t>(big_n), mean_pi);
        in.design = SamplingDesign::poisson(std::move(pi));
        return in;
    }
    throw ConfigError("design: unknown kind '" + kind + "'");
}

//! Theta source for estimation runs: a known model over the synthetic
//! population layout, or group response rates estimated from the mask.
inline ThetaSource theta_source_for_estimation(const Json& config, const EstimationInputs& in) {
    const Json j = config.contains("response") ? config["response"] : Json{{"kind", "full"}};
    const std::string kind = j.value("kind", "full");
    if (kind == "estimate")
        return ThetaSource::estimated(
            estimate_theta_group(in.mask, in.sample, in.dense_strata), in.sample);
    // known model indexed like the synthetic design population: sampled rows
    // first, so group labels for sampled units are their dense strata
    std::vector<int> groups(static_cast<std::size_t>(in.design.population_size()), 0);
    for (std::size_t i = 0; i < in.dense_strata.size(); ++i) groups[i] = in.dense_strata[i];
    for (std::size_t k = in.dense_strata.size(); k < groups.size(); ++k)
        groups[k] = in.design.stratum_of(static_cast<int>(k));
    const int d = in.grid.size();
    if (kind == "full")
        return ThetaSource::known(ResponseModel::full_response(in.design.population_size()));
    if (kind == "groups") {
        if (!j.contains("theta")) throw ConfigError("response: groups needs 'theta'");
        int num_groups = 0;
        for (int g : groups) num_groups = std::max(num_groups, g + 1);
        MatrixRd theta;
        if (j["theta"].is_number()) {
            theta = MatrixRd::Constant(num_groups, d, j["theta"].get<double>());
        } else {
            const auto rows = j["theta"].get<std::vector<std::vector<double>>>();
            if (static_cast<int>(rows.size()) != num_groups)
                throw ConfigError("response: one theta row per stratum required");
            theta.resize(num_groups, d);
            for (std::size_t g = 0; g < rows.size(); ++g)
                for (int jc = 0; jc < d; ++jc)
                    theta(static_cast<Eigen::Index>(g), jc) = rows[g].at(static_cast<std::size_t>(jc));
        }
        return ThetaSource::known(ResponseModel::homogeneous_groups(std::move(groups), std::move(theta)));
    }
    if (kind == "markov") {
        if (!j.contains("theta") || !j.contains("rho"))
            throw ConfigError("response: markov needs 'theta' and 'rho'");
        int num_groups = 0;
        for (int g : groups) num_groups = std::max(num_groups, g + 1);
        auto expand = [&](const Json& v) {
            std::vector<double> out;
            if (v.is_number()) out.assign(static_cast<std::size_t>(num_groups), v.get<double>());
            else out = v.get<std::vector<double>>();
            return out;
        };
        return ThetaSource::known(
            ResponseModel::markov_gap(std::move(groups), expand(j["theta"]), expand(j["rho"])));
    }
    throw ConfigError("response: unknown kind '" + kind + "'");
}

} // namespace meancurve
