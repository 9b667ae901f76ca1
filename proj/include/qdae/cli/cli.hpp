#pragma once

// Batch harness behind tools/qdae: resolve a model and scenario, integrate,
// write the trace and its manifest; compare finished traces; list reductions.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qdae/classical/integrate.hpp"
#include "qdae/dae/dae.hpp"

namespace qdae::cli {

enum ExitCode : int { kOk = 0, kConfig = 1, kNumeric = 2, kIo = 3, kThreshold = 4 };

struct RunConfig {
    std::string model;     // smib | wscc-internal | wscc-dae | path to a model file
    std::string scenario;  // scenario name or path to a scenario file
    std::string method = "classical-euler";  // classical-euler | classical-rk4 | quantum
    std::optional<double> dt, tmax;          // override the scenario
    double eps = 1e-3;
    bool scale_eps = true;
    double kappa = 1e-2;
    int taylor_k = 10;
    int clock_qubits = 40;
    std::string out;
    std::uint64_t seed = 0;
    std::string data_dir;  // empty: default_data_dir()

    /// Throws ConfigError on an unknown method or non-positive settings.
    void validate() const;
};

struct RunResult {
    classical::Trace trace;
    nlohmann::json manifest;
    /// Largest constraint residual seen along a classical DAE run, if any.
    std::optional<double> constraint_residual;
};

/// Integrates without touching the file system (apart from reading inputs).
RunResult run(const RunConfig& cfg);

/// <stem>.manifest.json next to the trace.
std::string manifest_path(const std::string& csv_path);
std::string default_output(const RunConfig& cfg);

/// Header `t,<names>`, one row per grid point, 17 significant digits.
void write_csv(const classical::Trace& trace, const std::string& path);
classical::Trace read_csv(const std::string& path);
void write_json(const nlohmann::json& j, const std::string& path);

struct Comparison {
    std::string variable;
    double rmse = 0.0;
    std::optional<double> threshold;
    bool pass() const { return !threshold || rmse <= *threshold; }
};

/// Per-variable RMSE over `variables` (all shared columns when empty).
/// Throws ConfigError when the time grids differ.
std::vector<Comparison> compare(const classical::Trace& a, const classical::Trace& b,
                                const std::vector<std::string>& variables,
                                const std::map<std::string, double>& thresholds);

/// Twice the published errors where there are any.
std::map<std::string, double> default_thresholds(const std::string& model, const std::string& scenario);

void write_report(const std::vector<Comparison>& rows, const std::string& path);

/// Reduced model text with lineage comments, followed by the explicit-ODE
/// variable list.
std::string reduce_listing(const dae::DaeSystem& reduced);

/// Entry point of the command-line tool; returns the process exit code.
int main(int argc, char** argv);

}  // namespace qdae::cli
