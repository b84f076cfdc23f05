#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "jklab/verify.hpp"

namespace jklab {

class ConfigError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};
class ResourceCapError : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ResourceCaps {
    std::size_t max_points = 4096;
    std::size_t max_paths = 100000;
    std::size_t max_exact_points = 4096;
};

struct CheckerRequest {
    std::string name;
    nlohmann::json params;  // validated per checker
};

struct ExperimentConfig {
    std::string name;
    nlohmann::json space;
    nlohmann::json kernel;
    nlohmann::json scales;
    nlohmann::json envelope;  // optional constants
    std::vector<CheckerRequest> checkers;
    std::vector<double> times;
    std::vector<double> radii;
    std::uint64_t seed = 1;
    std::string output_dir = "run_out";
    ResourceCaps caps;

    // Strict parse: unknown keys anywhere are errors.
    static ExperimentConfig from_json(const nlohmann::json& doc);
    nlohmann::json to_json() const;
};

struct RunReport {
    std::string experiment;
    std::uint64_t seed = 0;
    std::string config_hash;
    std::string tool_version;
    nlohmann::json space_info;  // builder echo + heuristic midpoint scan
    std::vector<ConditionVerdict> verdicts;
    std::vector<std::pair<std::string, double>> stage_seconds;

    bool all_pass() const;
    // Deterministic given (config, seed): excludes wall-clock values.
    nlohmann::json summary_json() const;
};

// Sorted (name, one-line description) pairs.
std::vector<std::pair<std::string, std::string>> list_experiments();

// Built-in configuration by name; throws ConfigError for unknown names.
nlohmann::json builtin_experiment(const std::string& name);

RunReport run_experiment(const ExperimentConfig& config, int workers = 1);

// summary.json, timings.json and one CSV per checker, written atomically.
void write_run_outputs(const RunReport& report, const ExperimentConfig& config,
                       const std::string& out_dir);

// t,d,lower,upper,regime rows over the configured grids.
void write_envelope_table(const ExperimentConfig& config, const std::string& csv_path);

std::string config_hash(const nlohmann::json& canonical);
void atomic_write_file(const std::string& path, const std::string& contents);

extern const char* kToolVersion;

} // namespace jklab
