#ifndef DCSIM_CLI_HPP
#define DCSIM_CLI_HPP

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dcsim/algorithms.hpp"
#include "dcsim/engine.hpp"

namespace dcsim {

/// |measured - predicted| / measured. Throws std::invalid_argument when
/// measured is 0.
double relative_error(double measured, double predicted);

/// Parses {"end", "measurement_interval", "optimizer_interval",
/// "autoscaler_interval", "boot_latency", "placement_decision_latency",
/// "migration_bandwidth", "power_transition_latency"}; missing keys keep `base`.
SimConfig parse_sim_config(std::string_view json_text, SimConfig base = {});

/// One configuration for the compare command.
struct CompareConfig {
    std::string name;
    std::filesystem::path model;
    std::filesystem::path scenario;
    AlgorithmConfig algorithms;
    SimConfig simulation;
};

/// {"name", "model", "scenario", "algorithms": {...}, "simulation": {...}};
/// paths are relative to the config file. `name` defaults to the file stem.
CompareConfig load_compare_config(const std::filesystem::path& path);

struct CompareRow {
    std::string name;
    double total_energy_wh = 0.0;
    double metered_energy_wh = 0.0;
    std::size_t rejected_placements = 0;
    std::size_t migrations = 0;
    double mean_instances = 0.0;
    std::size_t scaling_actions = 0;
    double delta_wh = 0.0;       ///< above the lowest-energy row
    double delta_percent = 0.0;  ///< relative to the lowest-energy row
    bool lowest_energy = false;
};

struct CompareResult {
    std::vector<CompareRow> rows;  ///< argument order
    std::vector<SimulationReport> reports;
};

/// Runs every configuration with the shared seed, in parallel, and merges
/// results in argument order. Throws InputError if the configurations do not
/// share the same model and scenario files, or if fewer than two are given.
CompareResult run_compare(const std::vector<CompareConfig>& configs, std::uint64_t seed);

std::string format_compare_table(const CompareResult& result);
std::string compare_csv(const CompareResult& result);

/// Entry point of the dcsim tool. Returns the process exit code: 0 success,
/// 2 input or validation error, 1 internal error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dcsim

#endif  // DCSIM_CLI_HPP
