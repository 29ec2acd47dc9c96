#ifndef DCSIM_CORRESPONDENCE_HPP
#define DCSIM_CORRESPONDENCE_HPP

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "dcsim/model.hpp"
#include "dcsim/sim_state.hpp"

namespace dcsim {

class PlacementAlgorithm;

// ---------------------------------------------------------------------------
// Runtime-model view handed to management algorithms.

struct ServerView {
    std::string id;
    int cores = 1;
    double core_speed = 1.0;
    MiB ram_capacity = 0;
    PowerState power_state = PowerState::On;
    double utilization = 0.0;
    MiB free_ram = 0;
    std::vector<std::string> vm_ids;        ///< booting, running or migrating away
    std::vector<std::string> incoming_vms;  ///< migrations targeting this server

    bool empty() const { return vm_ids.empty() && incoming_vms.empty(); }
    bool operator==(const ServerView&) const = default;
};

struct VmView {
    std::string id;
    VmFlavor flavor;
    std::optional<std::string> host;
    std::optional<std::string> migration_target;
    VmState state = VmState::Pending;
    double recent_demand = 0.0;  ///< work-units/s
    Initiator initiator = Initiator::Tenant;
    std::optional<std::string> application;
    bool operator==(const VmView&) const = default;
};

struct ApplicationView {
    std::string id;
    std::vector<std::string> active_instances;  ///< creation order
    double offered_rate = 0.0;
    double per_instance_capacity = 1.0;
    bool operator==(const ApplicationView&) const = default;
};

struct RuntimeModelSnapshot {
    std::vector<ServerView> servers;  ///< model order
    std::vector<VmView> vms;
    std::vector<ApplicationView> applications;
    double current_time = 0.0;

    const ServerView* find_server(std::string_view id) const;
    const VmView* find_vm(std::string_view id) const;
    bool operator==(const RuntimeModelSnapshot&) const = default;
};

// ---------------------------------------------------------------------------
// Links between runtime-model entities and simulation entities.

enum class LinkKind { Server, Vm, Application, Workload };

class CorrespondenceModel {
public:
    /// Throws std::logic_error if either side is already linked for `kind`.
    void link(LinkKind kind, const std::string& runtime_id, std::size_t sim_index);
    std::optional<std::size_t> sim_entity(LinkKind kind, std::string_view runtime_id) const;
    const std::string* runtime_entity(LinkKind kind, std::size_t sim_index) const;
    std::size_t count(LinkKind kind) const;

    /// Auxiliary record: the scenario event that spawned a VM.
    void record_origin(const std::string& event_id, const std::string& vm_id);
    const std::string* vm_spawned_by(std::string_view event_id) const;
    const std::string* origin_of(std::string_view vm_id) const;

    /// Both directions agree for every kind.
    bool is_bijective() const;
    bool operator==(const CorrespondenceModel&) const = default;

private:
    struct Table {
        std::map<std::string, std::size_t, std::less<>> forward;
        std::map<std::size_t, std::string> backward;
        bool operator==(const Table&) const = default;
    };
    std::array<Table, 4> tables_;
    std::map<std::string, std::string, std::less<>> event_to_vm_;
    std::map<std::string, std::string, std::less<>> vm_to_event_;
};

// ---------------------------------------------------------------------------
// Adaptation actions and their enactment.

namespace action {
struct Place { std::string vm; std::string server; bool operator==(const Place&) const = default; };
struct Migrate { std::string vm; std::string from; std::string to; bool operator==(const Migrate&) const = default; };
struct PowerOn { std::string server; bool operator==(const PowerOn&) const = default; };
struct PowerOff { std::string server; bool operator==(const PowerOff&) const = default; };
struct ScaleOut { std::string application; bool operator==(const ScaleOut&) const = default; };
struct ScaleIn { std::string application; std::string instance; bool operator==(const ScaleIn&) const = default; };
}  // namespace action

using AdaptationAction =
    std::variant<action::Place, action::Migrate, action::PowerOn, action::PowerOff, action::ScaleOut, action::ScaleIn>;

std::string describe(const AdaptationAction& a);

struct ScheduledEvent {
    double time = 0.0;
    std::string kind;
    std::string subject;
};

struct ActionOutcome {
    bool enacted = false;
    std::string reason;                     ///< set when rejected
    std::vector<ScheduledEvent> scheduled;  ///< events the enactment put on the queue

    static ActionOutcome rejected(std::string why) { return {false, std::move(why), {}}; }
};

/// Links every server and initial VM (model order) and produces the initial
/// view: utilization 0, free_ram = capacity minus initial placements.
std::pair<RuntimeModelSnapshot, CorrespondenceModel> build_initial(const DataCenterModel& model);

/// Mapping operation: refreshes the view from the simulation's current values.
void sync_measurements(const SimState& state, const CorrespondenceModel& correspondence,
                       RuntimeModelSnapshot& snapshot);

/// Convenience: a freshly synced snapshot.
RuntimeModelSnapshot take_snapshot(const SimState& state, const CorrespondenceModel& correspondence);

/// Registers a new simulated VM and its links.
std::size_t register_vm(SimState& state, CorrespondenceModel& correspondence, VmRuntime vm);

struct EnactmentContext {
    /// Used by ScaleOut to place the new instance.
    const PlacementAlgorithm* placement = nullptr;
    /// When set, a placement with no feasible server wakes an Off server and
    /// the VM waits for it instead of being rejected.
    bool wake_servers_on_demand = false;
};

/// Adaptation enactment rule. Checks the action against the simulation
/// state, applies it, logs it, and reports the events it scheduled.
ActionOutcome enact(const AdaptationAction& action, SimState& state, CorrespondenceModel& correspondence,
                    const EnactmentContext& context = {});

/// Runs the placement algorithm for a Pending VM and enacts its choice.
/// Returns the outcome of the Place (or of the wake-up, when deferred).
ActionOutcome place_vm(std::size_t vm, SimState& state, CorrespondenceModel& correspondence,
                       const EnactmentContext& context);

}  // namespace dcsim

#endif  // DCSIM_CORRESPONDENCE_HPP
