#pragma once

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "meancurve/config.hpp"
#include "meancurve/csv.hpp"
#include "meancurve/errors.hpp"

namespace meancurve::cli {

inline bool log_enabled() {
    const char* level = std::getenv("MEANCURVE_LOG");
    return level != nullptr && std::string(level) != "quiet";
}

inline void log_note(const std::string& msg) {
    if (log_enabled()) std::cerr << "[meancurve] " << msg << "\n";
}

//! Common flag values shared by the subcommands.
struct CommonArgs {
    std::string input;
    std::string config_path;
    std::string kernel;
    double bandwidth = 0.0;
    std::string cv_grid;
    std::string estimator;
    int eval_points = -1;
    std::optional<std::uint64_t> seed;
    std::string out;
    bool hajek2_renormalize = false;
};

namespace detail {

inline Json effective_config(const CommonArgs& args) {
    Json config = args.config_path.empty() ? Json::object() : load_json_file(args.config_path);
    if (!args.kernel.empty()) config["kernel"]["family"] = args.kernel;
    if (args.bandwidth > 0.0) config["kernel"]["bandwidth"] = args.bandwidth;
    if (!args.estimator.empty()) config["estimators"] = args.estimator;
    if (args.eval_points >= 0) config["eval_points"] = args.eval_points;
    if (args.seed) config["seed"] = *args.seed;
    if (args.hajek2_renormalize) config["hajek2_policy"] = "renormalize";
    if (!args.cv_grid.empty() && args.cv_grid != "auto") {
        std::vector<double> grid;
        std::string token;
        std::stringstream ss(args.cv_grid);
        while (std::getline(ss, token, ',')) {
            try {
                grid.push_back(std::stod(token));
            } catch (const std::exception&) {
                throw ConfigError("--cv-grid: cannot parse bandwidth '" + token + "'");
            }
        }
        config["cv"]["grid"] = grid;
    }
    return config;
}

inline std::vector<std::string> header_lines(const std::string& subcommand, const Json& config) {
    return {"meancurve " + subcommand, "config_hash=" + hash_string(config_hash(config)),
            "seed=" + std::to_string(config.value("seed", std::uint64_t{0}))};
}

inline KernelSpec kernel_spec_from(const Json& config) {
    if (!config.contains("kernel") || !config["kernel"].contains("bandwidth"))
        throw ConfigError("kernel family and bandwidth required (flags or config)");
    return KernelSpec(kernel_from_name(config["kernel"].value("family", "epanechnikov")),
                      config["kernel"]["bandwidth"].get<double>());
}

inline Hajek2Policy policy_from(const Json& config) {
    const std::string p = config.value("hajek2_policy", "strict");
    if (p == "strict") return Hajek2Policy::Strict;
    if (p == "renormalize") return Hajek2Policy::Renormalize;
    throw ConfigError("hajek2_policy must be 'strict' or 'renormalize'");
}

inline std::vector<double> candidate_grid(const Json& config, const TimeGrid& grid) {
    if (config.contains("cv") && config["cv"].contains("grid") && !config["cv"]["grid"].is_string())
        return config["cv"]["grid"].get<std::vector<double>>();
    const int count = config.contains("cv") ? config["cv"].value("count", 15) : 15;
    return default_bandwidth_grid(grid, count);
}

inline std::vector<double> eval_points_from(const Json& config, const TimeGrid& grid) {
    return grid.evaluation_points(config.value("eval_points", 0));
}

//! Monte Carlo / enumeration scenario assembled from a full config.
struct Scenario {
    CurvePopulation pop;
    SamplingDesign design;
    ResponseModel response;
};

inline Scenario scenario_from(const Json& config, std::uint64_t seed) {
    CurvePopulation pop = population_from_config(config, derive_seed(seed, 100, 0));
    if (!config.contains("design")) throw ConfigError("config needs a 'design' block");
    SamplingDesign design = design_from_config(config["design"], pop);
    ResponseModel response = config.contains("response")
                                 ? response_from_config(config["response"], pop)
                                 : ResponseModel::full_response(pop.size());
    return {std::move(pop), std::move(design), std::move(response)};
}

inline Json variance_point_json(const VariancePoint& p) {
    return Json{{"total", p.total},
                {"sampling", p.sampling},
                {"nonresponse", p.nonresponse},
                {"negative_warning", p.negative_warning}};
}

inline void write_json_report(const std::string& path, const Json& body) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    out << body.dump(2) << "\n";
    if (!out) throw IoError("failed while writing '" + path + "'");
}

} // namespace detail

// ---------------------------------------------------------------- gen

inline int run_gen(const CommonArgs& args) {
    const Json config = detail::effective_config(args);
    if (args.out.empty()) throw ConfigError("gen: --out is required");
    if (!config.contains("generate")) throw ConfigError("gen: config needs a 'generate' block");
    const auto seed = config.value("seed", std::uint64_t{0});
    const CurvePopulation pop = generate_population_from_json(config["generate"], seed);
    write_population_csv(args.out, pop, detail::header_lines("gen", config));
    log_note("wrote population (" + std::to_string(pop.size()) + " x " +
             std::to_string(pop.grid.size()) + ") to " + args.out);
    return 0;
}

// ---------------------------------------------------------------- estimate

inline int run_estimate(const CommonArgs& args) {
    const Json config = detail::effective_config(args);
    if (args.input.empty()) throw ConfigError("estimate: --input is required");
    if (args.out.empty()) throw ConfigError("estimate: --out is required");
    if (!config.contains("design")) throw ConfigError("estimate: config needs a 'design' block");

    const CurveTable table = read_curve_csv(args.input);
    const EstimationInputs in = estimation_inputs_from_table(table, config["design"]);
    const ThetaSource theta = theta_source_for_estimation(config, in);

    KernelSpec spec = KernelSpec(Kernel::Epanechnikov, 1.0);
    bool via_cv = false;
    if (config.contains("kernel") && config["kernel"].contains("bandwidth")) {
        spec = detail::kernel_spec_from(config);
    } else {
        // bandwidth left open: select it with the cross-validation criterion
        const Kernel family =
            kernel_from_name(config.contains("kernel") ? config["kernel"].value("family", "epanechnikov")
                                                       : "epanechnikov");
        CVConfig cv_config;
        cv_config.policy = detail::policy_from(config);
        if (config.contains("cv") && config["cv"].contains("estimator"))
            cv_config.estimator = estimator_from_name(config["cv"]["estimator"].get<std::string>());
        const auto candidates = detail::candidate_grid(config, in.grid);
        const CVResult cv = select_bandwidth(in.values, in.mask, theta, in.sample, in.design,
                                             in.grid, candidates, family, cv_config);
        spec = KernelSpec(family, cv.selected);
        via_cv = true;
        log_note("cross-validation selected h = " + format_double(cv.selected));
    }

    const auto eval = detail::eval_points_from(config, in.grid);
    const auto tags = config.contains("estimators") ? estimators_from_json(config["estimators"])
                                                    : estimators_from_json(Json("all"));
    const Hajek2Policy policy = detail::policy_from(config);

    std::vector<LongRow> rows;
    for (EstimatorTag tag : tags) {
        EstimatedCurve curve;
        switch (tag) {
            case EstimatorTag::HT:
                curve = ht_mean_nr(in.values, in.mask, theta, in.sample, in.design, in.grid, spec, eval);
                break;
            case EstimatorTag::Hajek1:
                curve = hajek1_mean_nr(in.values, in.mask, theta, in.sample, in.design, in.grid, spec, eval);
                break;
            case EstimatorTag::Hajek2:
                curve = hajek2_mean_nr(in.values, in.mask, theta, in.sample, in.design, in.grid, spec,
                                       eval, policy);
                break;
        }
        const VarianceCurve vc = variance_estimate_plugin_curve(
            tag, in.values, in.mask, theta, in.sample, in.design, in.grid, spec, eval);
        for (std::size_t e = 0; e < eval.size(); ++e)
            rows.push_back({eval[e], estimator_name(tag), curve.values[e], vc.values[e]});
    }

    auto header = detail::header_lines("estimate", config);
    header.push_back("bandwidth=" + format_double(spec.bandwidth) +
                     (via_cv ? " (cross-validated)" : ""));
    header.push_back(std::string("kernel=") + kernel_name(spec.family));
    if (theta.origin() == ThetaOrigin::Estimated)
        header.push_back("warning: plug-in variances use estimated theta (approximate)");
    write_long_csv(args.out, rows, header);
    log_note("wrote estimates to " + args.out);
    return 0;
}

// ---------------------------------------------------------------- cv

inline int run_cv(const CommonArgs& args) {
    const Json config = detail::effective_config(args);
    if (args.input.empty()) throw ConfigError("cv: --input is required");
    if (args.out.empty()) throw ConfigError("cv: --out is required");
    if (!config.contains("design")) throw ConfigError("cv: config needs a 'design' block");

    const CurveTable table = read_curve_csv(args.input);
    const EstimationInputs in = estimation_inputs_from_table(table, config["design"]);
    const ThetaSource theta = theta_source_for_estimation(config, in);
    const Kernel family = kernel_from_name(
        config.contains("kernel") ? config["kernel"].value("family", "epanechnikov") : "epanechnikov");
    CVConfig cv_config;
    cv_config.policy = detail::policy_from(config);
    if (config.contains("cv") && config["cv"].contains("estimator"))
        cv_config.estimator = estimator_from_name(config["cv"]["estimator"].get<std::string>());

    const auto candidates = detail::candidate_grid(config, in.grid);
    const CVResult result = select_bandwidth(in.values, in.mask, theta, in.sample, in.design,
                                             in.grid, candidates, family, cv_config);

    auto header = detail::header_lines("cv", config);
    header.push_back("selected_bandwidth=" + format_double(result.selected));
    std::ofstream out(args.out);
    if (!out) throw IoError("cannot write '" + args.out + "'");
    for (const auto& h : header) out << "# " << h << "\n";
    out << "bandwidth,cv_score,a3_valid,failures\n";
    for (std::size_t i = 0; i < result.bandwidths.size(); ++i)
        out << format_double(result.bandwidths[i]) << ',' << format_double(result.scores[i]) << ','
            << (result.a3_valid[i] ? 1 : 0) << ',' << result.failures[i] << "\n";
    if (!out) throw IoError("failed while writing '" + args.out + "'");
    log_note("selected h = " + format_double(result.selected));
    return 0;
}

// ---------------------------------------------------------------- simulate

inline int run_simulate(const CommonArgs& args) {
    const Json config = detail::effective_config(args);
    if (args.out.empty()) throw ConfigError("simulate: --out is required");
    const auto seed = config.value("seed", std::uint64_t{0});
    detail::Scenario sc = detail::scenario_from(config, seed);

    MonteCarloScenario scenario{std::move(sc.pop), std::move(sc.design), std::move(sc.response),
                                detail::kernel_spec_from(config), {}, {}, {}, false,
                                detail::policy_from(config), config.value("description", "")};
    scenario.eval_points = detail::eval_points_from(config, scenario.pop.grid);
    scenario.tags = config.contains("estimators") ? estimators_from_json(config["estimators"])
                                                  : estimators_from_json(Json("all"));
    int replicates = 1000;
    if (config.contains("simulate")) {
        const auto& js = config["simulate"];
        replicates = js.value("replicates", 1000);
        for (const auto& p : js.value("plugin", std::vector<std::string>{})) {
            if (p == "u1") scenario.plugin_variants.push_back(LinearVariant::U1);
            else if (p == "u2") scenario.plugin_variants.push_back(LinearVariant::U2);
            else if (p == "ht") scenario.plugin_ht = true;
            else throw ConfigError("simulate: unknown plugin variant '" + p + "'");
        }
    }

    const MonteCarloReport report = monte_carlo(scenario, replicates, seed);

    Json body;
    body["subcommand"] = "simulate";
    body["config_hash"] = hash_string(config_hash(config));
    body["seed"] = seed;
    body["replicates"] = report.replicates;
    body["eval_points"] = report.eval_points;
    body["mu_tilde"] = report.mu_tilde;
    for (const auto& tr : report.tags) {
        Json jt;
        jt["estimator"] = estimator_name(tr.tag);
        jt["empirical_mean"] = tr.empirical_mean;
        jt["empirical_variance"] = tr.empirical_variance;
        jt["se_mean"] = tr.se_mean;
        jt["se_variance"] = tr.se_variance;
        jt["formula_variance"] = tr.formula_variance;
        jt["variance_relative_error"] = tr.variance_relative_error;
        body["estimators"].push_back(jt);
    }
    for (const auto& pr : report.plugins) {
        Json jp;
        jp["variant"] = pr.name;
        jp["matches"] = estimator_name(pr.matches);
        jp["mean_estimate"] = pr.mean_estimate;
        jp["relative_error"] = pr.relative_error;
        body["plugins"].push_back(jp);
    }
    detail::write_json_report(args.out, body);
    log_note("wrote Monte Carlo report to " + args.out);
    return 0;
}

// ---------------------------------------------------------------- verify

//! Built-in tiny fixture: N=4, SRSWOR n=2, d=2, Bernoulli theta=0.7.
inline Json builtin_verify_config() {
    Json config;
    config["seed"] = 20240601;
    config["generate"] = {{"N", 4}, {"d", 2}, {"T", 1.0}, {"strata", 1}, {"beta", 1.0}};
    config["design"] = {{"kind", "srswor"}, {"n", 2}};
    config["response"] = {{"kind", "groups"}, {"theta", 0.7}};
    config["kernel"] = {{"family", "epanechnikov"}, {"bandwidth", 1.2}};
    config["verify"] = {{"estimator", "ht"}, {"tolerance", 1e-12}};
    return config;
}

inline int run_verify(const CommonArgs& args) {
    Json config = args.config_path.empty() ? builtin_verify_config() : detail::effective_config(args);
    if (args.seed) config["seed"] = *args.seed;
    const auto seed = config.value("seed", std::uint64_t{0});
    detail::Scenario sc = detail::scenario_from(config, seed);

    EnumerationInstance inst{std::move(sc.pop),  std::move(sc.design), std::move(sc.response),
                             detail::kernel_spec_from(config), EstimatorTag::HT,
                             {}, config.value("description", "verify run")};
    inst.eval_points = detail::eval_points_from(config, inst.pop.grid);
    double cap = 1e6;
    double tolerance = 1e-10;
    EnumStrategy strategy = EnumStrategy::JointMask;
    if (config.contains("verify")) {
        const auto& jv = config["verify"];
        inst.tag = estimator_from_name(jv.value("estimator", "ht"));
        cap = jv.value("cap", 1e6);
        tolerance = jv.value("tolerance", 1e-10);
        const std::string s = jv.value("strategy", "joint");
        if (s == "factored") strategy = EnumStrategy::PerUnitFactored;
        else if (s != "joint") throw ConfigError("verify: strategy must be 'joint' or 'factored'");
    }

    const EnumerationReport report = exact_moments(inst, cap, strategy);

    Json body;
    body["subcommand"] = "verify";
    body["description"] = inst.description;
    body["config_hash"] = hash_string(config_hash(config));
    body["seed"] = seed;
    body["estimator"] = estimator_name(inst.tag);
    body["eval_points"] = report.eval_points;
    body["exact_mean"] = report.exact_mean;
    body["exact_variance"] = report.exact_variance;
    body["formula_mean"] = report.formula_mean;
    body["formula_variance"] = report.formula_variance;
    body["defined_probability"] = report.defined_probability;
    body["probability_total"] = report.probability_total;
    body["max_mean_discrepancy"] = report.max_mean_discrepancy;
    body["max_variance_discrepancy"] = report.max_variance_discrepancy;
    body["tolerance"] = tolerance;
    const bool ok = report.max_mean_discrepancy <= tolerance &&
                    (inst.tag != EstimatorTag::HT || report.max_variance_discrepancy <= tolerance);
    body["pass"] = ok;
    if (!args.out.empty()) detail::write_json_report(args.out, body);
    std::cout << "verify: max mean discrepancy " << report.max_mean_discrepancy
              << ", max variance discrepancy " << report.max_variance_discrepancy << " ("
              << (ok ? "PASS" : "FAIL") << ")\n";
    if (!ok) {
        std::cerr << "error: enumeration oracle disagrees with the formulas beyond tolerance "
                  << tolerance << "\n";
        return 1;
    }
    return 0;
}

// ---------------------------------------------------------------- driver

inline int run(const std::vector<std::string>& argv) {
    CLI::App app{"Kernel-smoothed mean curve estimation from survey samples with missing values"};
    app.require_subcommand(1);

    CommonArgs args;
    auto add_common = [&](CLI::App* sub, bool with_input) {
        if (with_input) sub->add_option("--input", args.input, "curve CSV input");
        sub->add_option("--config", args.config_path, "JSON configuration");
        sub->add_option("--kernel", args.kernel, "kernel family (epanechnikov, gaussian, uniform)");
        sub->add_option("--bandwidth", args.bandwidth, "kernel bandwidth h");
        sub->add_option("--cv-grid", args.cv_grid, "comma-separated candidate bandwidths or 'auto'");
        sub->add_option("--estimator", args.estimator, "ht, hajek1, hajek2 or all");
        sub->add_option("--eval-points", args.eval_points, "evaluation grid size (0 = instants)");
        sub->add_option("--seed", args.seed, "master seed");
        sub->add_option("--out", args.out, "output path");
        sub->add_flag("--hajek2-renormalize", args.hajek2_renormalize,
                      "skip respondent-free instants in Hajek(2) and renormalize the weights");
    };
    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic population CSV");
    CLI::App* estimate = app.add_subcommand("estimate", "mean curves plus plug-in variances");
    CLI::App* cv = app.add_subcommand("cv", "bandwidth cross-validation table");
    CLI::App* simulate = app.add_subcommand("simulate", "seeded Monte Carlo report");
    CLI::App* verify = app.add_subcommand("verify", "enumeration oracle verification report");
    add_common(gen, false);
    add_common(estimate, true);
    add_common(cv, true);
    add_common(simulate, false);
    add_common(verify, false);

    std::vector<std::string> reversed(argv.rbegin(), argv.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (gen->parsed()) return run_gen(args);
        if (estimate->parsed()) return run_estimate(args);
        if (cv->parsed()) return run_cv(args);
        if (simulate->parsed()) return run_simulate(args);
        if (verify->parsed()) return run_verify(args);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const IoError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const Json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace meancurve::cli
