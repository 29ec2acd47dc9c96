#ifndef DCSIM_MODEL_HPP
#define DCSIM_MODEL_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcsim/power_model.hpp"

namespace dcsim {

/// RAM amounts are always MiB.
using MiB = std::int64_t;

/// Raised when an input document (model, scenario, CSV, config) is malformed
/// or violates a type invariant. Maps to exit code 2 in the CLI.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ServerSpec {
    std::string id;
    int cores = 1;
    double core_speed = 1.0;  ///< work-units per second per core
    MiB ram_capacity = 0;
    std::string power_model_id;
    bool has_power_meter = true;
    double idle_off_power = 0.0;  ///< watts drawn while powered off

    bool operator==(const ServerSpec&) const = default;
};

/// Aggregate processing capacity: cores x core_speed work-units/s.
double host_capacity(const ServerSpec& server);

struct VmFlavor {
    int vcpus = 1;
    MiB ram = 0;

    bool operator==(const VmFlavor&) const = default;
};

enum class VmState { Pending, Booting, Running, Migrating, Completed, Terminated };
enum class Initiator { Tenant, Autoscaler };
enum class PowerState { Off, On, PoweringOn, PoweringOff };

std::string_view to_string(VmState s);
std::string_view to_string(Initiator i);
std::string_view to_string(PowerState s);
Initiator initiator_from_string(std::string_view s);

/// One piecewise-constant stretch of normalized CPU demand.
struct DemandSegment {
    double duration = 0.0;  ///< seconds
    double demand = 0.0;    ///< work-units per second

    bool operator==(const DemandSegment&) const = default;
};

/// Black-box VM behaviour: demand over time, run to completion.
struct BlackBoxTrace {
    std::vector<DemandSegment> segments;

    double total_work() const;
    double nominal_duration() const;
    bool operator==(const BlackBoxTrace&) const = default;
};

struct RatePoint {
    double time = 0.0;  ///< seconds, relative to application start
    double rate = 0.0;  ///< requests per second

    bool operator==(const RatePoint&) const = default;
};

/// Open request-rate load for a horizontally scaled application tier.
/// The rate holds from one series point until the next.
struct OpenRequestLoad {
    std::vector<RatePoint> series;
    double per_instance_capacity = 1.0;  ///< requests per second

    double rate_at(double t) const;
    bool operator==(const OpenRequestLoad&) const = default;
};

using WorkloadModel = std::variant<BlackBoxTrace, OpenRequestLoad>;

/// Returns an empty string when the workload satisfies its invariants,
/// otherwise a description of the first violation.
std::string check_workload(const WorkloadModel& workload);

struct VmInstance {
    std::string id;
    VmFlavor flavor;
    WorkloadModel workload;
    std::optional<std::string> host;
    VmState state = VmState::Pending;
    Initiator initiator = Initiator::Tenant;

    bool operator==(const VmInstance&) const = default;
};

struct DataCenterModel {
    std::vector<ServerSpec> servers;
    std::map<std::string, PowerModel> power_models;
    std::vector<VmInstance> initial_vms;  ///< host field carries the assignment
    std::map<std::string, PowerState> initial_power_states;

    const ServerSpec* find_server(std::string_view id) const;
    /// Servers absent from initial_power_states start On.
    PowerState initial_power_state(std::string_view server_id) const;
    bool operator==(const DataCenterModel&) const = default;
};

/// Remaining RAM after subtracting the flavors of `placed`.
MiB free_ram(const ServerSpec& server, std::span<const VmInstance> placed);

/// One entry per violated invariant, each naming the offending entity.
std::vector<std::string> validate(const DataCenterModel& model);

DataCenterModel parse_model(std::string_view json_text);
std::string serialize_model(const DataCenterModel& model);
DataCenterModel load_model(const std::string& path);

}  // namespace dcsim

#endif  // DCSIM_MODEL_HPP
