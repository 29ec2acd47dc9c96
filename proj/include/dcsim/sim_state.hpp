#ifndef DCSIM_SIM_STATE_HPP
#define DCSIM_SIM_STATE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dcsim/engine.hpp"
#include "dcsim/model.hpp"

namespace dcsim {

struct ServerRuntime {
    ServerSpec spec;
    PowerModel power_model;
    PowerState power = PowerState::On;
    MiB reserved = 0;  ///< hosted VMs plus incoming migrations
    std::uint64_t transition_version = 0;
    double utilization = 0.0;
    double power_w = 0.0;
    std::vector<TimedValue> utilization_series;
    std::vector<TimedValue> power_series;
};

struct VmRuntime {
    std::string id;
    VmFlavor flavor;
    BlackBoxTrace trace;                     ///< empty for autoscaled instances
    std::optional<std::size_t> application;  ///< set for autoscaled instances
    Initiator initiator = Initiator::Tenant;
    std::map<std::string, std::string> parameters;

    VmState state = VmState::Pending;
    std::optional<std::size_t> host;
    std::optional<std::size_t> migration_target;

    // Fluid execution state. `remaining` is work for segments with demand,
    // seconds for idle segments.
    std::size_t segment = 0;
    double remaining = 0.0;
    double demand = 0.0;
    double rate = 0.0;
    double work_done = 0.0;
    bool boundary_scheduled = false;
    double scheduled_rate = 0.0;
    std::uint64_t boundary_version = 0;
    std::uint64_t boot_version = 0;
    std::uint64_t migration_version = 0;

    // Interval-average sampling marks.
    double sample_work = 0.0;
    double sample_time = 0.0;

    double submit_time = 0.0;
    std::optional<double> start_time;
    std::optional<double> end_time;
    bool rejected = false;
    bool waiting_for_power = false;
    std::vector<HostChange> hosts;
    std::string start_event;  ///< scenario event that completes when this VM boots

    bool executing() const { return state == VmState::Running || state == VmState::Migrating; }
    bool hosted() const { return executing() || state == VmState::Booting; }
    bool finished() const { return state == VmState::Completed || state == VmState::Terminated; }
};

struct ApplicationRuntime {
    std::string id;
    VmFlavor flavor;
    OpenRequestLoad load;
    std::map<std::string, std::string> parameters;
    double start_time = 0.0;
    std::size_t next_series_point = 0;
    double current_rate = 0.0;
    std::vector<std::size_t> instances;  ///< every instance ever created, in creation order
    int next_instance_number = 0;
    bool stopped = false;
    std::vector<RatePoint> history;  ///< (tick time, offered rate) at each autoscaler tick

    std::string next_instance_id();
};

/// Mutable simulation state, owned by a single engine thread. Methods are the
/// primitive state transitions; policy checks live in the enactment rules.
class SimState {
public:
    SimConfig config;
    double now = 0.0;
    EventQueue queue;
    std::vector<ServerRuntime> servers;
    std::vector<VmRuntime> vms;
    std::vector<ApplicationRuntime> apps;
    std::vector<ActionRecord> log;
    MeasurementStore measurements;
    std::size_t scaling_actions = 0;
    std::size_t rejected_placements = 0;
    std::size_t migrations = 0;
    /// Scenario events whose request finished during the last transition.
    std::vector<std::string> finished_requests;

    /// Servers and initial VMs are created in model order; initial VMs start
    /// Running at t = 0.
    static SimState from_model(const DataCenterModel& model, const SimConfig& config);

    void log_action(std::string action, std::string subject, std::string outcome);

    MiB free_ram(std::size_t server) const;
    double capacity(std::size_t server) const { return host_capacity(servers[server].spec); }
    /// VMs hosted (booting, running, migrating away) plus incoming migrations.
    std::size_t occupancy(std::size_t server) const;
    std::vector<std::size_t> hosted_vms(std::size_t server) const;
    std::vector<std::size_t> active_instances(std::size_t app) const;
    std::vector<std::size_t> serving_instances(std::size_t app) const;

    std::size_t add_vm(VmRuntime vm);

    /// Reserves RAM on `server` now and schedules BootFinished.
    void begin_boot(std::size_t vm, std::size_t server, double delay);
    void finish_boot(std::size_t vm);
    void reject_vm(std::size_t vm, const std::string& reason);
    void terminate_vm(std::size_t vm);
    void complete_vm(std::size_t vm);
    void begin_migration(std::size_t vm, std::size_t target);
    void finish_migration(std::size_t vm);
    void begin_power_transition(std::size_t server, PowerState target);
    void finish_power_transition(std::size_t server);
    /// Closes the current black-box segment; completes the VM after the last.
    void finish_segment(std::size_t vm);

    /// Integrates execution progress at the current rates up to t.
    void advance_to(double t);
    /// Recomputes demands and processor-sharing rates, records utilization
    /// and power change points, and reschedules segment boundaries.
    void recompute_rates();
    /// Appends per-server and per-VM measurement records at `now`.
    void sample_measurements();

    double instance_demand(std::size_t vm) const;
    void lifecycle(std::size_t vm, LifecycleEventKind kind, const std::string& host, const std::string& from = {});

private:
    void release(std::size_t vm);
    void record_vm_sample(std::size_t vm);
    void load_segment(std::size_t vm);
};

}  // namespace dcsim

#endif  // DCSIM_SIM_STATE_HPP
