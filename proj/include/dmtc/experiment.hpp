// experiment.hpp — Figure-reproduction experiment drivers, ensemble
// management, and table output (CSV + JSON sidecar).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dmtc/disorder.hpp"
#include "dmtc/metrics.hpp"
#include "dmtc/pulse_opt.hpp"

namespace dmtc {

inline constexpr const char* kToolName = "dmtc";
inline constexpr const char* kToolVersion = "0.1.0";

struct ExperimentParams {
    double delta = -1.0;      // uniform disorder total width; < 0 = per-figure default
    double gamma = -1.0;      // < 0: per-figure default
    double pulse_duration = 10.0;
    int pulse_segments = 100;
    int opt_max_iters = 150;
    int opt_restarts = 2;
    double theta_bound = 20.0;
    double gradient_tolerance = 1e-6;
    double max_time = 200.0;
    double residual_cutoff = 1e-8;
    double tol = 1e-9;
    // multiphoton drivers
    int n_max_cap = 12;
    double multiphoton_tol = 1e-7;
    double multiphoton_max_time = 150.0;
    // fig3c grid
    std::vector<double> g_list = {1.0 / 3.0, 1.0, 3.0};
    std::vector<double> delta0_list;  // empty -> default grid
};

struct ExperimentSpec {
    std::string figure;       // fig1b, fig1c, fig2, fig3c, fig4a, fig4b, fig4c
    std::vector<int> n_list;  // empty -> per-figure default
    int ensembles = 25;
    std::uint64_t seed = 1;
    int workers = 0;  // 0 -> hardware concurrency
    ExperimentParams params;

    void validate() const;
};

struct ScanRow {
    std::string figure;
    int n = 0;
    std::string param;       // extra cell key, e.g. "G=3;delta0=2"
    std::int64_t seed = -1;  // ensemble index; -1 for aggregate rows
    std::string metric;
    double value = 0.0;
    double std_dev = 0.0;  // NaN when not applicable (printed empty)
    double std_err = 0.0;
    bool valid = true;
    std::string note;
};

struct ScanResult {
    ExperimentSpec spec;
    std::vector<ScanRow> rows;
    std::string tool_version;
    std::string config_hash;
    double wall_time_s = 0.0;
    int failures = 0;
};

ScanResult run_experiment(const ExperimentSpec& spec);

// Deterministic CSV rendering: fixed header, %.17g values, '\n' terminators.
std::string to_csv(const ScanResult& result);

// Writes the CSV table and a JSON sidecar holding the tool version, config
// hash, wall time and the full spec for exact re-runs.
void emit(const ScanResult& result, const std::string& csv_path, const std::string& json_path);

nlohmann::json spec_to_json(const ExperimentSpec& spec);
ExperimentSpec spec_from_json(const nlohmann::json& j);

// FNV-1a over the canonical JSON encoding of the spec.
std::string config_hash(const ExperimentSpec& spec);

// Runs fn(0..n_tasks-1) on up to `workers` threads; any order, no state shared
// between tasks.
void parallel_for(int n_tasks, int workers, const std::function<void(int)>& fn);

}  // namespace dmtc
