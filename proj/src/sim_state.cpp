#include "dcsim/sim_state.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>

#include "csv.hpp"

namespace dcsim {

std::string ApplicationRuntime::next_instance_id() {
    char buf[16];
    std::snprintf(buf, sizeof buf, "-%04d", next_instance_number++);
    return id + buf;
}

SimState SimState::from_model(const DataCenterModel& model, const SimConfig& config) {
    SimState st;
    st.config = config;
    for (const auto& spec : model.servers) {
        ServerRuntime s;
        s.spec = spec;
        s.power_model = model.power_models.at(spec.power_model_id);
        s.power = model.initial_power_state(spec.id);
        st.servers.push_back(std::move(s));
    }
    for (const auto& inst : model.initial_vms) {
        VmRuntime vm;
        vm.id = inst.id;
        vm.flavor = inst.flavor;
        vm.initiator = inst.initiator;
        if (const auto* trace = std::get_if<BlackBoxTrace>(&inst.workload)) vm.trace = *trace;
        const auto idx = st.add_vm(std::move(vm));
        st.lifecycle(idx, LifecycleEventKind::Submitted, {});
        if (!inst.host) continue;
        std::size_t host = 0;
        while (st.servers[host].spec.id != *inst.host) ++host;
        st.begin_boot(idx, host, 0.0);
        st.finish_boot(idx);
    }
    return st;
}

void SimState::log_action(std::string action, std::string subject, std::string outcome) {
    log.push_back({now, std::move(action), std::move(subject), std::move(outcome)});
}

MiB SimState::free_ram(std::size_t server) const {
    return servers[server].spec.ram_capacity - servers[server].reserved;
}

std::size_t SimState::occupancy(std::size_t server) const {
    std::size_t n = 0;
    for (const auto& vm : vms) {
        if (vm.hosted() && vm.host == server) ++n;
        if (vm.state == VmState::Migrating && vm.migration_target == server) ++n;
    }
    return n;
}

std::vector<std::size_t> SimState::hosted_vms(std::size_t server) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < vms.size(); ++i)
        if (vms[i].hosted() && vms[i].host == server) out.push_back(i);
    return out;
}

std::vector<std::size_t> SimState::active_instances(std::size_t app) const {
    std::vector<std::size_t> out;
    for (auto i : apps[app].instances)
        if (vms[i].hosted() || (vms[i].state == VmState::Pending && vms[i].waiting_for_power)) out.push_back(i);
    return out;
}

std::vector<std::size_t> SimState::serving_instances(std::size_t app) const {
    std::vector<std::size_t> out;
    for (auto i : apps[app].instances)
        if (vms[i].executing()) out.push_back(i);
    return out;
}

std::size_t SimState::add_vm(VmRuntime vm) {
    vm.submit_time = now;
    vms.push_back(std::move(vm));
    return vms.size() - 1;
}

void SimState::lifecycle(std::size_t idx, LifecycleEventKind kind, const std::string& host, const std::string& from) {
    const auto& vm = vms[idx];
    LifecycleRecord r;
    r.timestamp = now;
    r.vm_id = vm.id;
    r.event = kind;
    r.host_id = host;
    r.from_host = from;
    r.flavor = vm.flavor;
    r.initiator = vm.initiator;
    r.parameters = vm.parameters;
    measurements.lifecycle.push_back(std::move(r));
}

void SimState::begin_boot(std::size_t idx, std::size_t server, double delay) {
    auto& vm = vms[idx];
    vm.state = VmState::Booting;
    vm.waiting_for_power = false;
    vm.host = server;
    servers[server].reserved += vm.flavor.ram;
    vm.hosts.push_back({now, servers[server].spec.id});
    queue.push(now + delay, ev::BootFinished{idx, ++vm.boot_version});
}

void SimState::finish_boot(std::size_t idx) {
    auto& vm = vms[idx];
    vm.state = VmState::Running;
    vm.start_time = now;
    vm.sample_time = now;
    vm.sample_work = vm.work_done;
    lifecycle(idx, LifecycleEventKind::Started, servers[*vm.host].spec.id);
    if (!vm.start_event.empty()) {
        finished_requests.push_back(vm.start_event);
        vm.start_event.clear();
    }
    if (!vm.application) {
        vm.segment = 0;
        load_segment(idx);
    }
}

void SimState::load_segment(std::size_t idx) {
    auto& vm = vms[idx];
    if (vm.segment >= vm.trace.segments.size()) {
        complete_vm(idx);
        return;
    }
    const auto& seg = vm.trace.segments[vm.segment];
    vm.demand = seg.demand;
    vm.remaining = seg.demand > 0.0 ? seg.demand * seg.duration : seg.duration;
    vm.boundary_scheduled = false;
}

void SimState::finish_segment(std::size_t idx) {
    auto& vm = vms[idx];
    vm.remaining = 0.0;
    ++vm.segment;
    load_segment(idx);
}

void SimState::release(std::size_t idx) {
    auto& vm = vms[idx];
    if (vm.host && vm.hosted()) servers[*vm.host].reserved -= vm.flavor.ram;
    if (vm.state == VmState::Migrating && vm.migration_target) servers[*vm.migration_target].reserved -= vm.flavor.ram;
    vm.migration_target.reset();
    vm.rate = 0.0;
    vm.demand = 0.0;
    ++vm.boundary_version;
    ++vm.migration_version;
    ++vm.boot_version;
}

void SimState::record_vm_sample(std::size_t idx) {
    auto& vm = vms[idx];
    if (!vm.host || !vm.start_time) return;
    const double since = std::max(vm.sample_time, *vm.start_time);
    if (!(now > since)) return;
    const double avg_rate = (vm.work_done - vm.sample_work) / (now - since);
    measurements.metrics.push_back(
        {now, EntityKind::Vm, vm.id, std::string(metric::vm_cpu_utilization), avg_rate / capacity(*vm.host)});
    vm.sample_work = vm.work_done;
    vm.sample_time = now;
}

void SimState::reject_vm(std::size_t idx, const std::string& reason) {
    auto& vm = vms[idx];
    vm.state = VmState::Terminated;
    vm.rejected = true;
    vm.waiting_for_power = false;
    vm.end_time = now;
    ++rejected_placements;
    log_action("place", vm.id, "rejected: " + reason);
    if (!vm.start_event.empty()) {
        finished_requests.push_back(vm.start_event);
        vm.start_event.clear();
    }
}

void SimState::terminate_vm(std::size_t idx) {
    auto& vm = vms[idx];
    if (vm.executing()) record_vm_sample(idx);
    const auto host = vm.host;
    release(idx);
    vm.state = VmState::Terminated;
    vm.waiting_for_power = false;
    vm.end_time = now;
    lifecycle(idx, LifecycleEventKind::Terminated, host ? servers[*host].spec.id : std::string{});
    if (!vm.start_event.empty()) {
        finished_requests.push_back(vm.start_event);
        vm.start_event.clear();
    }
}

void SimState::complete_vm(std::size_t idx) {
    auto& vm = vms[idx];
    record_vm_sample(idx);
    const auto host = vm.host;
    release(idx);
    vm.state = VmState::Completed;
    vm.end_time = now;
    lifecycle(idx, LifecycleEventKind::Completed, host ? servers[*host].spec.id : std::string{});
    log_action("complete", vm.id, "completed");
}

void SimState::begin_migration(std::size_t idx, std::size_t target) {
    auto& vm = vms[idx];
    vm.state = VmState::Migrating;
    vm.migration_target = target;
    servers[target].reserved += vm.flavor.ram;
    const double duration = static_cast<double>(vm.flavor.ram) / config.migration_bandwidth;
    queue.push(now + duration, ev::MigrationFinished{idx, ++vm.migration_version});
}

void SimState::finish_migration(std::size_t idx) {
    auto& vm = vms[idx];
    // The sample interval up to now ran on the source host.
    record_vm_sample(idx);
    const auto from = *vm.host;
    const auto to = *vm.migration_target;
    servers[from].reserved -= vm.flavor.ram;
    vm.host = to;
    vm.migration_target.reset();
    vm.state = VmState::Running;
    vm.hosts.push_back({now, servers[to].spec.id});
    ++migrations;
    lifecycle(idx, LifecycleEventKind::Migrated, servers[to].spec.id, servers[from].spec.id);
}

void SimState::begin_power_transition(std::size_t server, PowerState target) {
    auto& s = servers[server];
    s.power = target == PowerState::On ? PowerState::PoweringOn : PowerState::PoweringOff;
    queue.push(now + config.power_transition_latency, ev::PowerTransitionFinished{server, ++s.transition_version});
}

void SimState::finish_power_transition(std::size_t server) {
    auto& s = servers[server];
    if (s.power == PowerState::PoweringOn) s.power = PowerState::On;
    else if (s.power == PowerState::PoweringOff) s.power = PowerState::Off;
}

double SimState::instance_demand(std::size_t idx) const {
    const auto& vm = vms[idx];
    const auto& app = apps[*vm.application];
    const auto serving = serving_instances(*vm.application).size();
    if (serving == 0 || app.stopped) return 0.0;
    const double share = app.current_rate / static_cast<double>(serving);
    const double load = std::min(1.0, share / app.load.per_instance_capacity);
    return load * static_cast<double>(vm.flavor.vcpus);
}

void SimState::advance_to(double t) {
    const double dt = t - now;
    if (dt > 0.0) {
        for (auto& vm : vms) {
            if (!vm.executing()) continue;
            vm.work_done += vm.rate * dt;
            if (vm.application) continue;
            vm.remaining -= vm.demand > 0.0 ? vm.rate * dt : dt;
            if (vm.remaining < 0.0) vm.remaining = 0.0;
        }
    }
    now = std::max(now, t);
}

namespace {

void record_change(std::vector<TimedValue>& series, double t, double v) {
    if (!series.empty() && series.back().time == t) {
        series.back().value = v;
        if (series.size() >= 2 && series[series.size() - 2].value == v) series.pop_back();
        return;
    }
    if (series.empty() || series.back().value != v) series.push_back({t, v});
}

}  // namespace

void SimState::recompute_rates() {
    std::vector<std::vector<std::size_t>> per_server(servers.size());
    for (std::size_t i = 0; i < vms.size(); ++i) {
        auto& vm = vms[i];
        if (!vm.executing()) {
            vm.rate = 0.0;
            continue;
        }
        if (vm.application) vm.demand = instance_demand(i);
        per_server[*vm.host].push_back(i);
    }
    for (std::size_t s = 0; s < servers.size(); ++s) {
        auto& server = servers[s];
        std::vector<double> demands;
        demands.reserve(per_server[s].size());
        for (auto i : per_server[s]) demands.push_back(vms[i].demand);
        const double cap = capacity(s);
        const auto rates = proportional_share_rates(demands, cap);
        double granted = 0.0;
        for (std::size_t k = 0; k < rates.size(); ++k) {
            vms[per_server[s][k]].rate = rates[k];
            granted += rates[k];
        }
        server.utilization = server.power == PowerState::On ? std::min(1.0, granted / cap) : 0.0;
        switch (server.power) {
            case PowerState::On: server.power_w = eval_power_clamped(server.power_model, server.utilization); break;
            case PowerState::PoweringOn:
            case PowerState::PoweringOff: server.power_w = eval_power_clamped(server.power_model, 0.0); break;
            case PowerState::Off: server.power_w = server.spec.idle_off_power; break;
        }
        record_change(server.utilization_series, now, server.utilization);
        record_change(server.power_series, now, server.power_w);
    }
    for (std::size_t i = 0; i < vms.size(); ++i) {
        auto& vm = vms[i];
        if (!vm.executing() || vm.application) continue;
        if (vm.boundary_scheduled && vm.scheduled_rate == vm.rate) continue;
        ++vm.boundary_version;
        vm.boundary_scheduled = false;
        double dt = 0.0;
        if (vm.demand > 0.0) {
            if (!(vm.rate > 0.0)) continue;
            dt = vm.remaining / vm.rate;
        } else {
            dt = vm.remaining;
        }
        const bool last = vm.segment + 1 >= vm.trace.segments.size();
        if (last) queue.push(now + dt, ev::VmCompleted{i, vm.boundary_version});
        else queue.push(now + dt, ev::SegmentBoundary{i, vm.boundary_version});
        vm.boundary_scheduled = true;
        vm.scheduled_rate = vm.rate;
    }
}

void SimState::sample_measurements() {
    for (std::size_t s = 0; s < servers.size(); ++s) {
        const auto& server = servers[s];
        measurements.metrics.push_back(
            {now, EntityKind::Server, server.spec.id, std::string(metric::cpu_utilization), server.utilization});
        if (server.spec.has_power_meter)
            measurements.metrics.push_back(
                {now, EntityKind::Server, server.spec.id, std::string(metric::power_w), server.power_w});
        measurements.metrics.push_back({now, EntityKind::Server, server.spec.id, std::string(metric::free_ram_mib),
                                        static_cast<double>(free_ram(s))});
    }
    for (std::size_t i = 0; i < vms.size(); ++i)
        if (vms[i].executing()) record_vm_sample(i);
}

}  // namespace dcsim
