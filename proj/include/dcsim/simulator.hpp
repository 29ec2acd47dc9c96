#ifndef DCSIM_SIMULATOR_HPP
#define DCSIM_SIMULATOR_HPP

#include <filesystem>
#include <string>

#include "dcsim/algorithms.hpp"
#include "dcsim/engine.hpp"
#include "dcsim/model.hpp"
#include "dcsim/scenario.hpp"

namespace dcsim {

/// Runs one simulation. Throws InputError when the model, scenario or
/// configuration is invalid or a scenario reference cannot be resolved.
SimulationReport run(const DataCenterModel& model, const ExperimentScenario& scenario,
                     const AlgorithmConfig& algorithms, const SimConfig& config);

/// Report export: utilization.csv, power.csv, summary.csv, actions.csv,
/// autoscaler.csv, vms.csv, metrics.csv, lifecycle.csv and report.json.
void write_report(const SimulationReport& report, const std::filesystem::path& dir);

std::string report_summary_json(const SimulationReport& report);

}  // namespace dcsim

#endif  // DCSIM_SIMULATOR_HPP
