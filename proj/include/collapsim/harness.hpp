#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace collapsim {

/// Declared numeric parameter of an experiment.
struct ParamSpec {
    std::string name;
    double default_value;
    bool positive;  // dimensionally required to be > 0
    std::string help;
};

struct ExperimentConfig {
    std::string experiment;
    std::uint64_t seed = 1;
    long trials = 0;  // 0 = experiment default
    std::string out_dir = ".";
    std::map<std::string, double> params;
};

struct RunSummary {
    nlohmann::ordered_json json;
    bool passed = false;
};

const std::vector<std::string>& experiment_names();
const std::vector<ParamSpec>& experiment_params(const std::string& experiment);
/// Human-readable declared tolerances, one line per check.
std::vector<std::string> experiment_tolerances(const std::string& experiment);
long default_trials(const std::string& experiment);

/// Strict: unknown keys and non-numeric/ill-signed values are rejected
/// with a diagnostic naming the field.
void set_param(ExperimentConfig& cfg, const std::string& key, const std::string& value);

/// Flat key = value file ('#' comments). Recognized keys: experiment,
/// seed, trials, out, plus the experiment's parameters.
ExperimentConfig parse_config_file(const std::string& path);

/// Dispatch, write out_dir/summary.json and the per-experiment tables.
/// Deterministic up to the summary's "timestamp" object.
RunSummary run(const ExperimentConfig& cfg);

/// Deterministic fan-out of trial indices over worker threads
/// (COLLAPSIM_WORKERS, default hardware concurrency). Results must be
/// written into per-index slots by the callback.
void parallel_for(long n, const std::function<void(long)>& body);

/// Stream seed for a named phase of an experiment run.
std::uint64_t phase_seed(std::uint64_t master, int phase);

std::string version_string();

}  // namespace collapsim
