#ifndef DCSIM_EXTRACTION_HPP
#define DCSIM_EXTRACTION_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dcsim/measurement.hpp"
#include "dcsim/model.hpp"
#include "dcsim/power_model.hpp"
#include "dcsim/scenario.hpp"

namespace dcsim {

/// Parses the metric and lifecycle CSVs. Records come back sorted by
/// timestamp (stable). Throws InputError naming the file and line for a
/// malformed row, or naming the VM for an ill-formed lifecycle sequence.
MeasurementStore ingest_measurements(std::istream& metrics, std::istream& lifecycle);
MeasurementStore ingest_measurement_files(const std::filesystem::path& metrics, const std::filesystem::path& lifecycle);

/// Checks the per-VM lifecycle ordering; throws InputError naming the VM.
void check_lifecycle(const std::vector<LifecycleRecord>& records);

/// Raised when a VM has no utilization measurements to build a trace from.
class NoBehaviorModel : public std::runtime_error {
public:
    explicit NoBehaviorModel(const std::string& vm_id)
        : std::runtime_error("vm '" + vm_id + "': no utilization measurements, unable to build a behavior model"),
          vm_id_(vm_id) {}
    const std::string& vm_id() const { return vm_id_; }

private:
    std::string vm_id_;
};

/// Host id -> capacity in work-units/s.
using HostCapacities = std::map<std::string, double, std::less<>>;
HostCapacities host_capacities(const DataCenterModel& model);

/// Black-box trace of one VM: each utilization sample, taken as the average
/// over the time since the previous sample, is scaled by the capacity of the
/// host the VM ran on, then resampled to `resample_interval` segments
/// (time-weighted mean) starting at the VM start. The last segment ends at
/// the terminal event or the last sample.
BlackBoxTrace extract_blackbox_workload(const MeasurementStore& store, const HostCapacities& hosts,
                                        const std::string& vm_id, double resample_interval);

struct ExtractOptions {
    double t0 = 0.0;
    double t1 = 0.0;
    std::vector<std::string> servers;  ///< empty selects every server
    bool exclude_autoscaler = false;
    double resample_interval = 30.0;
};

struct ExtractionResult {
    ExperimentScenario scenario;
    std::vector<std::string> extracted;  ///< VM ids, in event order
    std::vector<std::string> skipped;
    std::vector<std::string> warnings;
};

/// Event ids are "start-<vm>" and "stop-<vm>", template ids "tpl-<vm>".
/// Throws InputError if t0 >= t1.
ExtractionResult extract_scenario(const MeasurementStore& store, const HostCapacities& hosts, const ExtractOptions& options);

struct PowerSample {
    double utilization = 0.0;
    double power = 0.0;
    bool operator==(const PowerSample&) const = default;
};

/// Pairs each utilization sample of `server_id` with the nearest power
/// sample no further than half the sampling interval away, bins utilization
/// to multiples of `bin_width` and averages power per bin. Sorted by
/// utilization.
std::vector<PowerSample> clean_power_training_data(const MeasurementStore& store, const std::string& server_id,
                                                   double bin_width = 0.01);

/// Bins utilization to multiples of `bin_width` (clamped to [0,1]) and
/// averages power per non-empty bin. Sorted by utilization.
std::vector<PowerSample> bin_power_samples(const std::vector<PowerSample>& samples, double bin_width = 0.01);

struct FitResult {
    PowerModel model;
    double residual_rms = 0.0;
    std::size_t samples = 0;
    int iterations = 0;
    bool converged = true;  ///< false when the iteration cap was hit
};

/// Least-squares fit within `family`. Throws InputError when the system is
/// underdetermined.
FitResult fit_power_model(const std::vector<PowerSample>& samples, const PowerFamily& family);

double residual_sum_of_squares(const PowerModel& model, const std::vector<PowerSample>& samples);

/// {"family", "coefficients", "diagnostics": {...}}
std::string serialize_fit(const FitResult& fit);
std::string serialize_power_model(const PowerModel& model);
PowerModel parse_power_model(std::string_view json_text);

}  // namespace dcsim

#endif  // DCSIM_EXTRACTION_HPP
