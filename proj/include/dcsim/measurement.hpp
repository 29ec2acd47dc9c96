#ifndef DCSIM_MEASUREMENT_HPP
#define DCSIM_MEASUREMENT_HPP

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "dcsim/model.hpp"

namespace dcsim {

enum class EntityKind { Server, Vm };

/// Metric names written by the simulator and understood by extraction.
namespace metric {
inline constexpr std::string_view cpu_utilization = "cpu_utilization";        ///< server, fraction
inline constexpr std::string_view power_w = "power_w";                        ///< server, watts
inline constexpr std::string_view free_ram_mib = "free_ram_mib";              ///< server, MiB
inline constexpr std::string_view vm_cpu_utilization = "vm_cpu_utilization";  ///< vm, fraction of host
}  // namespace metric

struct MetricRecord {
    double timestamp = 0.0;
    EntityKind kind = EntityKind::Server;
    std::string entity_id;
    std::string metric;
    double value = 0.0;

    bool operator==(const MetricRecord&) const = default;
};

enum class LifecycleEventKind { Submitted, Started, Migrated, Terminated, Completed };

struct LifecycleRecord {
    double timestamp = 0.0;
    std::string vm_id;
    LifecycleEventKind event = LifecycleEventKind::Submitted;
    std::string host_id;    ///< Started: host; Migrated: target host
    std::string from_host;  ///< Migrated only; derived from the previous host on ingest
    VmFlavor flavor;
    Initiator initiator = Initiator::Tenant;
    std::map<std::string, std::string> parameters;

    bool operator==(const LifecycleRecord&) const = default;
};

struct MeasurementStore {
    std::vector<MetricRecord> metrics;
    std::vector<LifecycleRecord> lifecycle;

    bool empty() const { return metrics.empty() && lifecycle.empty(); }
    bool operator==(const MeasurementStore&) const = default;
};

std::string_view to_string(EntityKind k);
std::string_view to_string(LifecycleEventKind e);

/// Writes the metric CSV ("timestamp_s,entity_kind,entity_id,metric,value").
void write_metrics_csv(std::ostream& out, const MeasurementStore& store);
/// Writes the lifecycle CSV ("timestamp_s,vm_id,event,host_id,flavor_vcpus,
/// flavor_ram_mib,initiator"); a trailing "parameters" column (k=v;k=v) is
/// added only when some record carries parameters.
void write_lifecycle_csv(std::ostream& out, const MeasurementStore& store);

}  // namespace dcsim

#endif  // DCSIM_MEASUREMENT_HPP
