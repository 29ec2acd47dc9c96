#include "dcsim/correspondence.hpp"

#include <algorithm>
#include <stdexcept>

#include "dcsim/algorithms.hpp"
#include "csv.hpp"

namespace dcsim {

const ServerView* RuntimeModelSnapshot::find_server(std::string_view id) const {
    for (const auto& s : servers)
        if (s.id == id) return &s;
    return nullptr;
}

const VmView* RuntimeModelSnapshot::find_vm(std::string_view id) const {
    for (const auto& v : vms)
        if (v.id == id) return &v;
    return nullptr;
}

void CorrespondenceModel::link(LinkKind kind, const std::string& runtime_id, std::size_t sim_index) {
    auto& t = tables_[static_cast<std::size_t>(kind)];
    if (t.forward.contains(runtime_id) || t.backward.contains(sim_index))
        throw std::logic_error("duplicate correspondence link for '" + runtime_id + "'");
    t.forward.emplace(runtime_id, sim_index);
    t.backward.emplace(sim_index, runtime_id);
}

std::optional<std::size_t> CorrespondenceModel::sim_entity(LinkKind kind, std::string_view runtime_id) const {
    const auto& t = tables_[static_cast<std::size_t>(kind)];
    auto it = t.forward.find(runtime_id);
    if (it == t.forward.end()) return std::nullopt;
    return it->second;
}

const std::string* CorrespondenceModel::runtime_entity(LinkKind kind, std::size_t sim_index) const {
    const auto& t = tables_[static_cast<std::size_t>(kind)];
    auto it = t.backward.find(sim_index);
    return it == t.backward.end() ? nullptr : &it->second;
}

std::size_t CorrespondenceModel::count(LinkKind kind) const {
    return tables_[static_cast<std::size_t>(kind)].forward.size();
}

void CorrespondenceModel::record_origin(const std::string& event_id, const std::string& vm_id) {
    event_to_vm_[event_id] = vm_id;
    vm_to_event_[vm_id] = event_id;
}

const std::string* CorrespondenceModel::vm_spawned_by(std::string_view event_id) const {
    auto it = event_to_vm_.find(event_id);
    return it == event_to_vm_.end() ? nullptr : &it->second;
}

const std::string* CorrespondenceModel::origin_of(std::string_view vm_id) const {
    auto it = vm_to_event_.find(vm_id);
    return it == vm_to_event_.end() ? nullptr : &it->second;
}

bool CorrespondenceModel::is_bijective() const {
    for (const auto& t : tables_) {
        if (t.forward.size() != t.backward.size()) return false;
        for (const auto& [rid, idx] : t.forward) {
            auto it = t.backward.find(idx);
            if (it == t.backward.end() || it->second != rid) return false;
        }
    }
    return true;
}

std::string describe(const AdaptationAction& a) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, action::Place>) return "Place(" + x.vm + " -> " + x.server + ")";
            else if constexpr (std::is_same_v<T, action::Migrate>)
                return "Migrate(" + x.vm + " " + x.from + " -> " + x.to + ")";
            else if constexpr (std::is_same_v<T, action::PowerOn>) return "PowerOn(" + x.server + ")";
            else if constexpr (std::is_same_v<T, action::PowerOff>) return "PowerOff(" + x.server + ")";
            else if constexpr (std::is_same_v<T, action::ScaleOut>) return "ScaleOut(" + x.application + ")";
            else return "ScaleIn(" + x.application + " " + x.instance + ")";
        },
        a);
}

std::pair<RuntimeModelSnapshot, CorrespondenceModel> build_initial(const DataCenterModel& model) {
    RuntimeModelSnapshot snap;
    CorrespondenceModel corr;
    for (std::size_t i = 0; i < model.servers.size(); ++i) {
        const auto& s = model.servers[i];
        corr.link(LinkKind::Server, s.id, i);
        ServerView v;
        v.id = s.id;
        v.cores = s.cores;
        v.core_speed = s.core_speed;
        v.ram_capacity = s.ram_capacity;
        v.power_state = model.initial_power_state(s.id);
        v.free_ram = s.ram_capacity;
        snap.servers.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < model.initial_vms.size(); ++i) {
        const auto& vm = model.initial_vms[i];
        corr.link(LinkKind::Vm, vm.id, i);
        corr.link(LinkKind::Workload, vm.id + "/workload", i);
        VmView v;
        v.id = vm.id;
        v.flavor = vm.flavor;
        v.host = vm.host;
        v.state = vm.host ? VmState::Running : vm.state;
        v.initiator = vm.initiator;
        if (vm.host) {
            for (auto& s : snap.servers) {
                if (s.id != *vm.host) continue;
                s.free_ram -= vm.flavor.ram;
                s.vm_ids.push_back(vm.id);
            }
        }
        snap.vms.push_back(std::move(v));
    }
    return {std::move(snap), std::move(corr)};
}

void sync_measurements(const SimState& state, const CorrespondenceModel& corr, RuntimeModelSnapshot& snap) {
    snap.current_time = state.now;
    snap.servers.clear();
    snap.vms.clear();
    snap.applications.clear();
    const auto server_id = [&](std::size_t idx) { return *corr.runtime_entity(LinkKind::Server, idx); };

    for (std::size_t i = 0; i < state.servers.size(); ++i) {
        const auto& s = state.servers[i];
        ServerView v;
        v.id = server_id(i);
        v.cores = s.spec.cores;
        v.core_speed = s.spec.core_speed;
        v.ram_capacity = s.spec.ram_capacity;
        v.power_state = s.power;
        v.utilization = s.utilization;
        v.free_ram = state.free_ram(i);
        snap.servers.push_back(std::move(v));
    }
    for (std::size_t i = 0; i < state.vms.size(); ++i) {
        const auto& vm = state.vms[i];
        const auto* rid = corr.runtime_entity(LinkKind::Vm, i);
        if (!rid || vm.finished()) continue;
        VmView v;
        v.id = *rid;
        v.flavor = vm.flavor;
        v.state = vm.state;
        v.recent_demand = vm.demand;
        v.initiator = vm.initiator;
        if (vm.host && vm.hosted()) {
            v.host = server_id(*vm.host);
            snap.servers[*vm.host].vm_ids.push_back(v.id);
        }
        if (vm.migration_target) {
            v.migration_target = server_id(*vm.migration_target);
            snap.servers[*vm.migration_target].incoming_vms.push_back(v.id);
        }
        if (vm.application) v.application = *corr.runtime_entity(LinkKind::Application, *vm.application);
        snap.vms.push_back(std::move(v));
    }
    for (std::size_t a = 0; a < state.apps.size(); ++a) {
        const auto& app = state.apps[a];
        if (app.stopped) continue;
        ApplicationView v;
        v.id = *corr.runtime_entity(LinkKind::Application, a);
        for (auto i : state.active_instances(a)) v.active_instances.push_back(*corr.runtime_entity(LinkKind::Vm, i));
        v.offered_rate = app.current_rate;
        v.per_instance_capacity = app.load.per_instance_capacity;
        snap.applications.push_back(std::move(v));
    }
}

RuntimeModelSnapshot take_snapshot(const SimState& state, const CorrespondenceModel& correspondence) {
    RuntimeModelSnapshot snap;
    sync_measurements(state, correspondence, snap);
    return snap;
}

std::size_t register_vm(SimState& state, CorrespondenceModel& correspondence, VmRuntime vm) {
    const std::string id = vm.id;
    if (correspondence.sim_entity(LinkKind::Vm, id))
        throw InputError("vm id '" + id + "' is already in use");
    const auto idx = state.add_vm(std::move(vm));
    correspondence.link(LinkKind::Vm, id, idx);
    correspondence.link(LinkKind::Workload, id + "/workload", idx);
    return idx;
}

namespace {

std::string fmt_time(double t) { return detail::format_double(t); }

ActionOutcome enact_place(const action::Place& a, SimState& st, CorrespondenceModel& corr) {
    const auto vm = corr.sim_entity(LinkKind::Vm, a.vm);
    const auto server = corr.sim_entity(LinkKind::Server, a.server);
    if (!vm) return ActionOutcome::rejected("unknown vm");
    if (!server) return ActionOutcome::rejected("unknown server");
    auto& v = st.vms[*vm];
    if (v.state != VmState::Pending) return ActionOutcome::rejected("vm not pending");
    if (st.servers[*server].power != PowerState::On) return ActionOutcome::rejected("server not powered on");
    if (st.free_ram(*server) < v.flavor.ram) return ActionOutcome::rejected("insufficient ram");
    const double delay = st.config.placement_decision_latency + st.config.boot_latency;
    st.begin_boot(*vm, *server, delay);
    st.log_action("place", a.vm, "enacted: " + a.server);
    return {true, {}, {{st.now + delay, "boot_finished", a.vm}}};
}

ActionOutcome enact_migrate(const action::Migrate& a, SimState& st, CorrespondenceModel& corr) {
    if (a.from == a.to) return ActionOutcome::rejected("source equals target");
    const auto vm = corr.sim_entity(LinkKind::Vm, a.vm);
    const auto from = corr.sim_entity(LinkKind::Server, a.from);
    const auto to = corr.sim_entity(LinkKind::Server, a.to);
    if (!vm) return ActionOutcome::rejected("unknown vm");
    if (!from || !to) return ActionOutcome::rejected("unknown server");
    auto& v = st.vms[*vm];
    if (v.state != VmState::Running) return ActionOutcome::rejected("vm not running");
    if (v.host != from) return ActionOutcome::rejected("vm not on source server");
    if (st.servers[*to].power != PowerState::On) return ActionOutcome::rejected("target not powered on");
    if (st.free_ram(*to) < v.flavor.ram) return ActionOutcome::rejected("insufficient ram");
    st.begin_migration(*vm, *to);
    const double done = st.now + static_cast<double>(v.flavor.ram) / st.config.migration_bandwidth;
    st.log_action("migrate", a.vm, "enacted: " + a.from + " -> " + a.to + " until " + fmt_time(done));
    return {true, {}, {{done, "migration_finished", a.vm}}};
}

ActionOutcome enact_power(const std::string& server_id, PowerState target, SimState& st, CorrespondenceModel& corr) {
    const auto server = corr.sim_entity(LinkKind::Server, server_id);
    const char* name = target == PowerState::On ? "power_on" : "power_off";
    if (!server) return ActionOutcome::rejected("unknown server");
    const auto current = st.servers[*server].power;
    if (target == PowerState::On && current != PowerState::Off) return ActionOutcome::rejected("already in target state");
    if (target == PowerState::Off) {
        if (current != PowerState::On) return ActionOutcome::rejected("already in target state");
        if (st.occupancy(*server) != 0) return ActionOutcome::rejected("server not empty");
    }
    st.begin_power_transition(*server, target);
    st.log_action(name, server_id, "enacted");
    return {true, {}, {{st.now + st.config.power_transition_latency, "power_transition_finished", server_id}}};
}

ActionOutcome enact_scale_out(const action::ScaleOut& a, SimState& st, CorrespondenceModel& corr,
                              const EnactmentContext& ctx) {
    const auto app = corr.sim_entity(LinkKind::Application, a.application);
    if (!app) return ActionOutcome::rejected("unknown application");
    if (st.apps[*app].stopped) return ActionOutcome::rejected("application stopped");
    if (!ctx.placement) return ActionOutcome::rejected("no placement algorithm");
    auto& application = st.apps[*app];
    VmRuntime vm;
    vm.id = application.next_instance_id();
    vm.flavor = application.flavor;
    vm.application = *app;
    vm.initiator = Initiator::Autoscaler;
    vm.parameters = application.parameters;
    const auto idx = register_vm(st, corr, std::move(vm));
    st.apps[*app].instances.push_back(idx);
    st.log_action("scale_out", a.application, "instance " + st.vms[idx].id);
    ++st.scaling_actions;
    auto outcome = place_vm(idx, st, corr, ctx);
    // The scale-out itself happened; a failed placement is logged separately.
    outcome.enacted = true;
    return outcome;
}

ActionOutcome enact_scale_in(const action::ScaleIn& a, SimState& st, CorrespondenceModel& corr) {
    const auto app = corr.sim_entity(LinkKind::Application, a.application);
    const auto vm = corr.sim_entity(LinkKind::Vm, a.instance);
    if (!app) return ActionOutcome::rejected("unknown application");
    if (!vm || st.vms[*vm].application != app) return ActionOutcome::rejected("unknown instance");
    const auto active = st.active_instances(*app);
    if (std::find(active.begin(), active.end(), *vm) == active.end())
        return ActionOutcome::rejected("instance not active");
    if (active.size() <= 1) return ActionOutcome::rejected("last instance");
    st.terminate_vm(*vm);
    st.log_action("scale_in", a.application, "instance " + a.instance);
    ++st.scaling_actions;
    return {true, {}, {}};
}

}  // namespace

ActionOutcome place_vm(std::size_t vm, SimState& st, CorrespondenceModel& corr, const EnactmentContext& ctx) {
    auto& v = st.vms[vm];
    const auto snap = take_snapshot(st, corr);
    const auto choice = ctx.placement->place(snap, v.flavor);
    if (choice) {
        auto outcome = enact_place(action::Place{v.id, *choice}, st, corr);
        if (outcome.enacted) return outcome;
        st.reject_vm(vm, outcome.reason);
        return outcome;
    }
    if (ctx.wake_servers_on_demand) {
        // Wait for a server already powering on, or wake the first Off
        // server (model order) that is large enough.
        for (std::size_t s = 0; s < st.servers.size(); ++s) {
            const auto& server = st.servers[s];
            if (server.spec.ram_capacity < v.flavor.ram) continue;
            if (server.power == PowerState::PoweringOn && st.free_ram(s) >= v.flavor.ram) {
                v.waiting_for_power = true;
                st.log_action("place", v.id, "deferred: waiting for " + server.spec.id);
                return {true, {}, {}};
            }
        }
        for (std::size_t s = 0; s < st.servers.size(); ++s) {
            const auto& server = st.servers[s];
            if (server.power != PowerState::Off || server.spec.ram_capacity < v.flavor.ram) continue;
            const auto sid = *corr.runtime_entity(LinkKind::Server, s);
            auto outcome = enact_power(sid, PowerState::On, st, corr);
            if (!outcome.enacted) continue;
            v.waiting_for_power = true;
            st.log_action("place", v.id, "deferred: waiting for " + sid);
            return outcome;
        }
    }
    st.reject_vm(vm, "no feasible server");
    return ActionOutcome::rejected("no feasible server");
}

ActionOutcome enact(const AdaptationAction& a, SimState& st, CorrespondenceModel& corr, const EnactmentContext& ctx) {
    ActionOutcome outcome = std::visit(
        [&](const auto& x) -> ActionOutcome {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, action::Place>) return enact_place(x, st, corr);
            else if constexpr (std::is_same_v<T, action::Migrate>) return enact_migrate(x, st, corr);
            else if constexpr (std::is_same_v<T, action::PowerOn>) return enact_power(x.server, PowerState::On, st, corr);
            else if constexpr (std::is_same_v<T, action::PowerOff>) return enact_power(x.server, PowerState::Off, st, corr);
            else if constexpr (std::is_same_v<T, action::ScaleOut>) return enact_scale_out(x, st, corr, ctx);
            else return enact_scale_in(x, st, corr);
        },
        a);
    if (!outcome.enacted) {
        std::string name = describe(a);
        st.log_action("reject", name.substr(0, name.find('(')), name + " rejected: " + outcome.reason);
    }
    return outcome;
}

}  // namespace dcsim
