#ifndef DCSIM_ENGINE_HPP
#define DCSIM_ENGINE_HPP

#include <cstdint>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "dcsim/measurement.hpp"

namespace dcsim {

struct SimConfig {
    double end_time = 3600.0;
    double measurement_interval = 30.0;
    double optimizer_interval = 300.0;
    double autoscaler_interval = 60.0;
    double boot_latency = 0.0;
    double placement_decision_latency = 0.0;
    double migration_bandwidth = 1024.0;  ///< MiB/s
    double power_transition_latency = 0.0;
    std::uint64_t seed = 0;

    /// Empty when valid, otherwise the first violated constraint.
    std::string check() const;
};

namespace ev {
struct ScenarioRequest { std::string event_id; };
struct SegmentBoundary { std::size_t vm; std::uint64_t version; };
struct VmCompleted { std::size_t vm; std::uint64_t version; };
struct OptimizerTick { std::uint64_t version; };
struct AutoscalerTick {};
struct MeasurementSample {};
struct MigrationFinished { std::size_t vm; std::uint64_t version; };
struct BootFinished { std::size_t vm; std::uint64_t version; };
struct PowerTransitionFinished { std::size_t server; std::uint64_t version; };
/// Next point of an application's request-rate series.
struct LoadChange { std::size_t application; };
}  // namespace ev

using EventKind = std::variant<ev::ScenarioRequest, ev::SegmentBoundary, ev::VmCompleted, ev::OptimizerTick,
                               ev::AutoscalerTick, ev::MeasurementSample, ev::MigrationFinished, ev::BootFinished,
                               ev::PowerTransitionFinished, ev::LoadChange>;

struct SimEvent {
    double time = 0.0;
    std::uint64_t sequence = 0;
    EventKind kind;
};

/// Pops in (time, sequence) order; equal times are FIFO by insertion.
class EventQueue {
public:
    std::uint64_t push(double time, EventKind kind);
    SimEvent pop();
    const SimEvent& top() const { return heap_.top(); }
    bool empty() const { return heap_.empty(); }
    std::size_t size() const { return heap_.size(); }

private:
    struct Later {
        bool operator()(const SimEvent& a, const SimEvent& b) const {
            if (a.time != b.time) return a.time > b.time;
            return a.sequence > b.sequence;
        }
    };
    std::priority_queue<SimEvent, std::vector<SimEvent>, Later> heap_;
    std::uint64_t next_sequence_ = 0;
};

/// Generalized processor sharing: demands pass through unchanged while they
/// fit, otherwise each is scaled by capacity / sum(demands).
std::vector<double> proportional_share_rates(std::span<const double> demands, double capacity);

struct TimedValue {
    double time = 0.0;
    double value = 0.0;
    bool operator==(const TimedValue&) const = default;
};

/// Energy in Wh of a piecewise-constant power series (watts) whose last value
/// holds until end_time. Throws std::invalid_argument if end_time precedes
/// the last sample.
double integrate_energy(std::span<const TimedValue> power_series, double end_time);

struct ActionRecord {
    double time = 0.0;
    std::string action;
    std::string subject;
    std::string outcome;
    bool operator==(const ActionRecord&) const = default;
};

struct HostChange {
    double time = 0.0;
    std::string host;
    bool operator==(const HostChange&) const = default;
};

struct VmRecord {
    std::string id;
    Initiator initiator = Initiator::Tenant;
    double submit_time = 0.0;
    std::optional<double> start_time;
    std::optional<double> end_time;
    VmState final_state = VmState::Pending;
    bool rejected = false;
    std::vector<HostChange> hosts;
    bool operator==(const VmRecord&) const = default;
};

struct AutoscalerSample {
    double time = 0.0;
    std::string application;
    int active_instances = 0;
    double offered_rate = 0.0;
    bool operator==(const AutoscalerSample&) const = default;
};

struct ServerSeries {
    std::string server_id;
    bool has_power_meter = true;
    std::vector<TimedValue> utilization;
    std::vector<TimedValue> power;
    double energy_wh = 0.0;
};

struct SimulationReport {
    double end_time = 0.0;
    std::uint64_t seed = 0;
    std::vector<ServerSeries> servers;
    double total_energy_wh = 0.0;
    double metered_energy_wh = 0.0;  ///< servers with a power meter only
    std::vector<ActionRecord> actions;
    std::vector<VmRecord> vms;
    std::vector<AutoscalerSample> autoscaler;
    std::size_t scaling_actions = 0;
    std::size_t rejected_placements = 0;
    std::size_t migrations = 0;
    MeasurementStore measurements;

    const VmRecord* find_vm(std::string_view id) const;
    /// Mean of the sampled active-instance counts (ticks are equally spaced).
    double mean_instances() const;
};

}  // namespace dcsim

#endif  // DCSIM_ENGINE_HPP
