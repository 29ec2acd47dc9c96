#include "dcsim/measurement.hpp"

#include <ostream>

#include "csv.hpp"

namespace dcsim {

std::string_view to_string(EntityKind k) {
    return k == EntityKind::Server ? "server" : "vm";
}

std::string_view to_string(LifecycleEventKind e) {
    switch (e) {
        case LifecycleEventKind::Submitted: return "submitted";
        case LifecycleEventKind::Started: return "started";
        case LifecycleEventKind::Migrated: return "migrated";
        case LifecycleEventKind::Terminated: return "terminated";
        case LifecycleEventKind::Completed: return "completed";
    }
    return "?";
}

void write_metrics_csv(std::ostream& out, const MeasurementStore& store) {
    out << "timestamp_s,entity_kind,entity_id,metric,value\n";
    for (const auto& m : store.metrics) {
        out << detail::format_double(m.timestamp) << ',' << to_string(m.kind) << ',' << m.entity_id << ',' << m.metric << ','
            << detail::format_double(m.value) << '\n';
    }
}

void write_lifecycle_csv(std::ostream& out, const MeasurementStore& store) {
    bool with_parameters = false;
    for (const auto& r : store.lifecycle) with_parameters = with_parameters || !r.parameters.empty();
    out << "timestamp_s,vm_id,event,host_id,flavor_vcpus,flavor_ram_mib,initiator";
    if (with_parameters) out << ",parameters";
    out << '\n';
    for (const auto& r : store.lifecycle) {
        out << detail::format_double(r.timestamp) << ',' << r.vm_id << ',' << to_string(r.event) << ',' << r.host_id << ','
            << r.flavor.vcpus << ',' << r.flavor.ram << ',' << to_string(r.initiator);
        if (with_parameters) {
            out << ',';
            bool first = true;
            for (const auto& [k, v] : r.parameters) {
                out << (first ? "" : ";") << k << '=' << v;
                first = false;
            }
        }
        out << '\n';
    }
}

}  // namespace dcsim
