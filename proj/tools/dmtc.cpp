// dmtc — command-line driver for the dynamically modulated Tavis-Cummings
// toolkit: single-photon simulation and metrics, pulse optimization, figure
// scans, the large-N effective model, and multi-photon solvers.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "dmtc/disorder.hpp"
#include "dmtc/experiment.hpp"
#include "dmtc/large_n.hpp"
#include "dmtc/metrics.hpp"
#include "dmtc/multiphoton.hpp"
#include "dmtc/pulse_opt.hpp"

namespace {

using nlohmann::json;
using namespace dmtc;

json load_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    json j;
    f >> j;
    return j;
}

DisorderSpec parse_disorder(const json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const auto seed = j.value("seed", std::uint64_t{0});
    if (kind == "uniform") return DisorderSpec::uniform(j.at("half_width").get<double>(), seed);
    if (kind == "lorentzian") return DisorderSpec::lorentzian(j.at("delta0").get<double>(), seed);
    if (kind == "discrete_bins") {
        return DisorderSpec::discrete_bins(j.at("frequencies").get<std::vector<double>>(),
                                           j.at("probabilities").get<std::vector<double>>(), seed);
    }
    throw std::runtime_error("unknown disorder kind: " + kind);
}

Coupling parse_coupling(const json& j) {
    const std::string kind = j.value("kind", "constant");
    const double value = j.at("value").get<double>();
    if (kind == "constant") return Coupling::constant(value);
    if (kind == "sqrt_scaled") return Coupling::sqrt_scaled(value);
    throw std::runtime_error("unknown coupling kind: " + kind);
}

SystemConfig parse_system(const json& j) {
    SystemConfig cfg;
    cfg.n_emitters = j.at("n_emitters").get<int>();
    if (j.contains("emitter_freqs")) {
        cfg.emitter_freqs = j.at("emitter_freqs").get<std::vector<double>>();
    } else if (j.contains("disorder")) {
        cfg.emitter_freqs = sample_frequencies(parse_disorder(j.at("disorder")), cfg.n_emitters);
    } else {
        cfg.emitter_freqs.assign(static_cast<size_t>(cfg.n_emitters), 0.0);
    }
    cfg.coupling = parse_coupling(j.at("coupling"));
    cfg.kappa = j.value("kappa", 1.0);
    cfg.gamma = j.value("gamma", 0.0);
    cfg.validate();
    return cfg;
}

Pulse parse_pulse(const json& j) {
    Pulse p;
    p.duration = j.value("duration", 10.0);
    if (j.contains("values")) {
        p.values = j.at("values").get<std::vector<double>>();
    } else {
        p.values.assign(static_cast<size_t>(j.value("segments", 100)), 0.0);
    }
    p.validate();
    return p;
}

HorizonPolicy parse_policy(const json& j) {
    HorizonPolicy policy;
    policy.max_time = j.value("max_time", policy.max_time);
    policy.residual_cutoff = j.value("residual_cutoff", policy.residual_cutoff);
    policy.tol = j.value("tol", policy.tol);
    return policy;
}

OptimizationOptions parse_options(const json& j, const HorizonPolicy& policy) {
    OptimizationOptions opts;
    opts.max_iters = j.value("max_iters", opts.max_iters);
    opts.gradient_tolerance = j.value("gradient_tolerance", opts.gradient_tolerance);
    opts.initial_step = j.value("initial_step", opts.initial_step);
    opts.theta_min = j.value("theta_min", opts.theta_min);
    opts.theta_max = j.value("theta_max", opts.theta_max);
    opts.smoothness_weight = j.value("smoothness_weight", opts.smoothness_weight);
    opts.restarts = j.value("restarts", opts.restarts);
    opts.restart_seed = j.value("restart_seed", opts.restart_seed);
    opts.restart_scale = j.value("restart_scale", opts.restart_scale);
    if (j.value("method", "adaptive") == "lbfgs") opts.method = OptimizationOptions::Method::Lbfgs;
    opts.horizon = policy;
    opts.validate();
    return opts;
}

void write_text(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output file: " + path);
    f << content;
    if (!f) throw std::runtime_error("write failed: " + path);
}

std::string out_file(const std::string& dir, const std::string& name) {
    std::filesystem::create_directories(dir);
    return (std::filesystem::path(dir) / name).string();
}

json pulse_to_json(const Pulse& p) {
    return json{{"duration", p.duration}, {"values", p.values}};
}

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
    const json cfg_json = load_json(config_path);
    const SystemConfig cfg = parse_system(cfg_json.at("system"));
    const Pulse pulse = cfg_json.contains("pulse") ? parse_pulse(cfg_json.at("pulse"))
                                                   : Pulse::zero();
    const HorizonPolicy policy =
        cfg_json.contains("horizon") ? parse_policy(cfg_json.at("horizon")) : HorizonPolicy{};

    const auto es = eigenstate_superradiance_static(cfg);
    const auto fid = photon_fidelity(cfg, pulse, policy);
    json summary{{"mu_es_static", es.value},
                 {"mu_fid", fid.value},
                 {"residual", fid.residual},
                 {"emitter_loss", fid.emitter_loss},
                 {"horizon", fid.horizon},
                 {"truncated", fid.truncated}};
    if (!pulse.is_zero()) {
        summary["mu_es_modulated"] = eigenstate_superradiance_modulated(cfg, pulse, policy.tol).value;
    }

    std::string flux = "t,flux\n";
    char buf[80];
    for (size_t i = 0; i < fid.times.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g\n", fid.times[i], fid.emitted_flux[i]);
        flux += buf;
    }

    if (out_dir.empty()) {
        std::cout << summary.dump(2) << "\n";
    } else {
        write_text(out_file(out_dir, "metrics.json"), summary.dump(2) + "\n");
        write_text(out_file(out_dir, "flux.csv"), flux);
        std::cout << "wrote " << out_dir << "/metrics.json and flux.csv\n";
    }
    return 0;
}

int cmd_optimize(const std::string& config_path, const std::string& out_dir) {
    const json cfg_json = load_json(config_path);
    const HorizonPolicy policy =
        cfg_json.contains("horizon") ? parse_policy(cfg_json.at("horizon")) : HorizonPolicy{};
    const Pulse start = cfg_json.contains("pulse") ? parse_pulse(cfg_json.at("pulse"))
                                                   : Pulse::zero();
    const OptimizationOptions opts =
        parse_options(cfg_json.value("options", json::object()), policy);

    OptimizationRecord rec;
    if (cfg_json.contains("large_n")) {
        const auto& ln = cfg_json.at("large_n");
        const LargeNParams params{ln.at("G").get<double>(), ln.at("delta0").get<double>(),
                                  ln.value("kappa", 1.0)};
        rec = optimize_pulse(make_effective_objective(params, policy), start, opts);
    } else {
        rec = optimize_pulse(parse_system(cfg_json.at("system")), start, opts);
    }

    json summary{{"objective_final", rec.objective_final},
                 {"objective_zero_pulse", rec.objective_zero_pulse},
                 {"improvement_ratio", rec.improvement_ratio},
                 {"iterations", rec.iterations},
                 {"final_gradient_norm", rec.final_gradient_norm},
                 {"stalled", rec.stalled},
                 {"optimized_pulse", pulse_to_json(rec.optimized)}};

    std::string history = "iteration,objective\n";
    char buf[64];
    for (size_t i = 0; i < rec.objective_history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", i, rec.objective_history[i]);
        history += buf;
    }

    if (out_dir.empty()) {
        std::cout << summary.dump(2) << "\n";
    } else {
        write_text(out_file(out_dir, "summary.json"), summary.dump(2) + "\n");
        write_text(out_file(out_dir, "optimized_pulse.json"),
                   pulse_to_json(rec.optimized).dump(2) + "\n");
        write_text(out_file(out_dir, "history.csv"), history);
        std::cout << "wrote " << out_dir << "/summary.json, optimized_pulse.json, history.csv\n";
    }
    return rec.stalled ? 2 : 0;
}

int cmd_scan(const std::string& config_path, const std::string& figure, std::int64_t seed,
             int ensembles, int workers, const std::string& out_dir, const std::string& format) {
    ExperimentSpec spec;
    if (!config_path.empty()) {
        json j = load_json(config_path);
        if (j.contains("spec")) j = j.at("spec");  // accept emitted sidecars as configs
        spec = spec_from_json(j);
    }
    if (!figure.empty()) spec.figure = figure;
    if (seed >= 0) spec.seed = static_cast<std::uint64_t>(seed);
    if (ensembles > 0) spec.ensembles = ensembles;
    if (workers > 0) spec.workers = workers;

    const auto result = run_experiment(spec);
    const std::string dir = out_dir.empty() ? "." : out_dir;
    const std::string base = out_file(dir, spec.figure);
    if (format == "csv" || format == "both") write_text(base + ".csv", to_csv(result));
    if (format == "json" || format == "both") {
        emit(result, base + ".csv", base + ".json");
    }
    std::cout << spec.figure << ": " << result.rows.size() << " rows, " << result.failures
              << " failed cells, " << result.wall_time_s << " s\n";
    if (result.failures > 0) {
        for (const auto& r : result.rows) {
            if (!r.valid) std::cerr << "  failed: n=" << r.n << " seed=" << r.seed << " " << r.note << "\n";
        }
        return 2;
    }
    return 0;
}

int cmd_large_n(const std::string& config_path, const std::string& out_dir) {
    const json cfg_json = load_json(config_path);
    const LargeNParams params{cfg_json.at("G").get<double>(), cfg_json.at("delta0").get<double>(),
                              cfg_json.value("kappa", 1.0)};
    const Pulse pulse = cfg_json.contains("pulse") ? parse_pulse(cfg_json.at("pulse"))
                                                   : Pulse::zero();
    const HorizonPolicy policy =
        cfg_json.contains("horizon") ? parse_policy(cfg_json.at("horizon")) : HorizonPolicy{};

    const auto run = effective_run(params, pulse, policy);
    const auto traj = evolve_effective(params, pulse, run.horizon, policy.tol);
    json summary{{"fidelity", run.fidelity},        {"subradiant_occupation", run.subradiant},
                 {"injected", run.injected},        {"residual", run.residual},
                 {"horizon", run.horizon},          {"truncated", run.truncated}};

    std::string flux = "t,flux,subradiant_density\n";
    char buf[96];
    for (size_t i = 0; i < traj.times.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", traj.times[i], traj.flux[i],
                      2.0 * params.delta0 * std::norm(traj.states[i].beta));
        flux += buf;
    }

    if (out_dir.empty()) {
        std::cout << summary.dump(2) << "\n";
    } else {
        write_text(out_file(out_dir, "summary.json"), summary.dump(2) + "\n");
        write_text(out_file(out_dir, "flux.csv"), flux);
        std::cout << "wrote " << out_dir << "/summary.json and flux.csv\n";
    }
    return 0;
}

int cmd_multiphoton(const std::string& config_path, const std::string& out_dir) {
    const json cfg_json = load_json(config_path);
    const Pulse pulse = cfg_json.contains("pulse") ? parse_pulse(cfg_json.at("pulse"))
                                                   : Pulse::zero();
    const HorizonPolicy policy =
        cfg_json.contains("horizon") ? parse_policy(cfg_json.at("horizon")) : HorizonPolicy{};
    const std::string solver = cfg_json.value("solver", "exact");

    MultiphotonResult res;
    int total = 0;
    if (solver == "binned") {
        BinnedEnsemble ens;
        for (const auto& b : cfg_json.at("bins")) {
            ens.bins.push_back({b.at("freq").get<double>(), b.at("count").get<int>()});
        }
        total = ens.total();
        const FockTruncation trunc{cfg_json.value("n_max", total + 2), true, 1e-6};
        res = binned_fidelity(ens, parse_coupling(cfg_json.at("coupling")),
                              cfg_json.value("kappa", 1.0), cfg_json.value("gamma", 0.0), pulse,
                              trunc, policy);
    } else if (solver == "exact") {
        const SystemConfig cfg = parse_system(cfg_json.at("system"));
        total = cfg.n_emitters;
        const FockTruncation trunc{cfg_json.value("n_max", total + 2), true, 1e-6};
        res = exact_full_fidelity(cfg, pulse, trunc, policy);
    } else {
        throw std::runtime_error("unknown solver: " + solver);
    }

    const json summary{{"solver", solver},
                       {"n", total},
                       {"fidelity_per_excitation", res.value},
                       {"flux_integral", res.flux_integral},
                       {"emitter_loss", res.emitter_loss},
                       {"residual", res.residual},
                       {"leakage", res.leakage},
                       {"leak_flagged", res.leak_flagged},
                       {"truncated", res.truncated},
                       {"horizon", res.horizon}};
    if (out_dir.empty()) {
        std::cout << summary.dump(2) << "\n";
    } else {
        write_text(out_file(out_dir, "summary.json"), summary.dump(2) + "\n");
        std::cout << "wrote " << out_dir << "/summary.json\n";
    }
    return res.leak_flagged ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dynamically modulated Tavis-Cummings superradiance toolkit"};
    app.set_version_flag("--version", std::string(kToolName) + " " + kToolVersion);
    app.require_subcommand(1);

    std::string config, out_dir, figure, format = "both";
    std::int64_t seed = -1;
    int ensembles = 0, workers = 0;

    auto* simulate = app.add_subcommand("simulate", "single-photon metrics for one system");
    simulate->add_option("--config", config, "JSON config")->required();
    simulate->add_option("--out", out_dir, "output directory");

    auto* optimize = app.add_subcommand("optimize", "gradient-based pulse optimization");
    optimize->add_option("--config", config, "JSON config")->required();
    optimize->add_option("--out", out_dir, "output directory");

    auto* scan = app.add_subcommand("scan", "figure-reproduction ensemble scan");
    scan->add_option("--config", config, "ExperimentSpec JSON (or emitted sidecar)");
    scan->add_option("--figure", figure, "figure id: fig1b fig1c fig2 fig3c fig4a fig4b fig4c");
    scan->add_option("--seed", seed, "master seed");
    scan->add_option("--ensembles", ensembles, "ensemble members per cell");
    scan->add_option("--workers", workers, "worker thread count");
    scan->add_option("--out", out_dir, "output directory");
    scan->add_option("--format", format, "csv, json or both")
        ->check(CLI::IsMember({"csv", "json", "both"}));

    auto* largen = app.add_subcommand("large-n", "effective coupled-oscillator model");
    largen->add_option("--config", config, "JSON config")->required();
    largen->add_option("--out", out_dir, "output directory");

    auto* multi = app.add_subcommand("multiphoton", "multi-excitation fidelity solvers");
    multi->add_option("--config", config, "JSON config")->required();
    multi->add_option("--out", out_dir, "output directory");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(config, out_dir);
        if (optimize->parsed()) return cmd_optimize(config, out_dir);
        if (scan->parsed()) {
            if (config.empty() && figure.empty()) {
                std::cerr << "scan: need --config or --figure\n";
                return 1;
            }
            return cmd_scan(config, figure, seed, ensembles, workers, out_dir, format);
        }
        if (largen->parsed()) return cmd_large_n(config, out_dir);
        if (multi->parsed()) return cmd_multiphoton(config, out_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
