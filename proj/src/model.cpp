#include "dcsim/model.hpp"

#include <algorithm>
#include <cmath>

#include "json_io.hpp"

namespace dcsim {

using detail::json;

double host_capacity(const ServerSpec& server) {
    return static_cast<double>(server.cores) * server.core_speed;
}

std::string_view to_string(VmState s) {
    switch (s) {
        case VmState::Pending: return "pending";
        case VmState::Booting: return "booting";
        case VmState::Running: return "running";
        case VmState::Migrating: return "migrating";
        case VmState::Completed: return "completed";
        case VmState::Terminated: return "terminated";
    }
    return "?";
}

std::string_view to_string(Initiator i) {
    return i == Initiator::Tenant ? "tenant" : "autoscaler";
}

std::string_view to_string(PowerState s) {
    switch (s) {
        case PowerState::Off: return "off";
        case PowerState::On: return "on";
        case PowerState::PoweringOn: return "powering_on";
        case PowerState::PoweringOff: return "powering_off";
    }
    return "?";
}

Initiator initiator_from_string(std::string_view s) {
    if (s == "tenant") return Initiator::Tenant;
    if (s == "autoscaler") return Initiator::Autoscaler;
    throw InputError("unknown initiator '" + std::string(s) + "'");
}

namespace {

VmState vm_state_from_string(std::string_view s) {
    for (auto st : {VmState::Pending, VmState::Booting, VmState::Running, VmState::Migrating, VmState::Completed,
                    VmState::Terminated}) {
        if (to_string(st) == s) return st;
    }
    throw InputError("unknown VM state '" + std::string(s) + "'");
}

bool is_hosted(VmState s) {
    return s == VmState::Booting || s == VmState::Running || s == VmState::Migrating;
}

}  // namespace

double BlackBoxTrace::total_work() const {
    double w = 0.0;
    for (const auto& s : segments) w += s.duration * s.demand;
    return w;
}

double BlackBoxTrace::nominal_duration() const {
    double d = 0.0;
    for (const auto& s : segments) d += s.duration;
    return d;
}

double OpenRequestLoad::rate_at(double t) const {
    auto it = std::upper_bound(series.begin(), series.end(), t,
                               [](double v, const RatePoint& p) { return v < p.time; });
    if (it == series.begin()) return 0.0;
    return std::prev(it)->rate;
}

std::string check_workload(const WorkloadModel& workload) {
    if (const auto* trace = std::get_if<BlackBoxTrace>(&workload)) {
        for (const auto& s : trace->segments) {
            if (!(s.duration > 0.0) || !std::isfinite(s.duration)) return "segment duration must be > 0";
            if (!(s.demand >= 0.0) || !std::isfinite(s.demand)) return "segment demand must be >= 0";
        }
        return {};
    }
    const auto& load = std::get<OpenRequestLoad>(workload);
    if (!(load.per_instance_capacity > 0.0)) return "per_instance_capacity must be > 0";
    for (std::size_t i = 0; i < load.series.size(); ++i) {
        if (!(load.series[i].rate >= 0.0)) return "request rates must be >= 0";
        if (i > 0 && !(load.series[i].time > load.series[i - 1].time)) return "series times must be strictly increasing";
    }
    return {};
}

const ServerSpec* DataCenterModel::find_server(std::string_view id) const {
    for (const auto& s : servers)
        if (s.id == id) return &s;
    return nullptr;
}

PowerState DataCenterModel::initial_power_state(std::string_view server_id) const {
    auto it = initial_power_states.find(std::string(server_id));
    return it == initial_power_states.end() ? PowerState::On : it->second;
}

MiB free_ram(const ServerSpec& server, std::span<const VmInstance> placed) {
    MiB used = 0;
    for (const auto& vm : placed) used += vm.flavor.ram;
    return server.ram_capacity - used;
}

std::vector<std::string> validate(const DataCenterModel& model) {
    std::vector<std::string> out;
    std::map<std::string, int> seen;
    for (const auto& s : model.servers) {
        if (++seen[s.id] == 2) out.push_back("server '" + s.id + "': duplicate id");
        if (s.cores < 1) out.push_back("server '" + s.id + "': cores must be >= 1");
        if (!(s.core_speed > 0.0)) out.push_back("server '" + s.id + "': core_speed must be > 0");
        if (s.ram_capacity <= 0) out.push_back("server '" + s.id + "': ram_capacity must be > 0");
        if (!(s.idle_off_power >= 0.0)) out.push_back("server '" + s.id + "': idle_off_power must be >= 0");
        if (!model.power_models.contains(s.power_model_id))
            out.push_back("server '" + s.id + "': power_model_id '" + s.power_model_id + "' does not resolve");
    }
    for (const auto& [id, pm] : model.power_models) {
        if (pm.coefficients.size() != pm.family.coefficient_count())
            out.push_back("power model '" + id + "': wrong coefficient count for " + pm.family.name());
    }
    for (const auto& [id, state] : model.initial_power_states) {
        if (!model.find_server(id)) out.push_back("initial_power_states: unknown server '" + id + "'");
        if (state != PowerState::On && state != PowerState::Off)
            out.push_back("server '" + id + "': initial power state must be on or off");
    }

    std::map<std::string, MiB> used;
    std::map<std::string, int> vm_seen;
    for (const auto& vm : model.initial_vms) {
        if (++vm_seen[vm.id] == 2) out.push_back("vm '" + vm.id + "': duplicate id");
        if (vm.flavor.vcpus < 1) out.push_back("vm '" + vm.id + "': vcpus must be >= 1");
        if (vm.flavor.ram <= 0) out.push_back("vm '" + vm.id + "': ram must be > 0");
        if (auto problem = check_workload(vm.workload); !problem.empty())
            out.push_back("vm '" + vm.id + "': " + problem);
        if (vm.host.has_value() != is_hosted(vm.state))
            out.push_back("vm '" + vm.id + "': host must be present iff state is booting, running or migrating");
        if (!vm.host) continue;
        const auto* server = model.find_server(*vm.host);
        if (!server) {
            out.push_back("vm '" + vm.id + "': host '" + *vm.host + "' does not exist");
            continue;
        }
        used[server->id] += vm.flavor.ram;
        if (model.initial_power_state(server->id) != PowerState::On)
            out.push_back("server '" + server->id + "': hosts vm '" + vm.id + "' but is not powered on");
    }
    for (const auto& s : model.servers) {
        auto it = used.find(s.id);
        if (it != used.end() && it->second > s.ram_capacity)
            out.push_back("server '" + s.id + "': initial placements need " + std::to_string(it->second) +
                          " MiB but capacity is " + std::to_string(s.ram_capacity) + " MiB");
    }
    return out;
}

DataCenterModel parse_model(std::string_view json_text) {
    using namespace detail;
    const json doc = parse_json(json_text, "model");
    expect_object(doc, {"servers", "power_models", "initial_vms", "initial_power_states"}, "model");
    DataCenterModel model;

    for (const auto& s : require(doc, "servers", "model")) {
        const std::string c = "model.servers[]";
        expect_object(s, {"id", "cores", "core_speed", "ram_capacity", "power_model_id", "has_power_meter",
                          "idle_off_power"},
                      c);
        ServerSpec spec;
        spec.id = get_string(s, "id", c);
        spec.cores = static_cast<int>(get_number(s, "cores", c));
        spec.core_speed = get_number(s, "core_speed", c);
        spec.ram_capacity = static_cast<MiB>(get_number(s, "ram_capacity", c));
        spec.power_model_id = get_string(s, "power_model_id", c);
        if (s.contains("has_power_meter")) {
            if (!s.at("has_power_meter").is_boolean()) throw InputError(c + ".has_power_meter: expected a boolean");
            spec.has_power_meter = s.at("has_power_meter").get<bool>();
        }
        spec.idle_off_power = get_number_or(s, "idle_off_power", 0.0, c);
        model.servers.push_back(std::move(spec));
    }
    if (doc.contains("power_models")) {
        for (const auto& [id, pm] : doc.at("power_models").items())
            model.power_models.emplace(id, power_model_from_json(pm, "model.power_models." + id));
    }
    if (doc.contains("initial_vms")) {
        for (const auto& v : doc.at("initial_vms")) {
            const std::string c = "model.initial_vms[]";
            expect_object(v, {"id", "flavor", "workload", "host", "state", "initiator"}, c);
            VmInstance vm;
            vm.id = get_string(v, "id", c);
            vm.flavor = flavor_from_json(require(v, "flavor", c), c + ".flavor");
            vm.workload = workload_from_json(require(v, "workload", c), c + ".workload");
            if (v.contains("host") && !v.at("host").is_null()) vm.host = get_string(v, "host", c);
            vm.state = v.contains("state") ? vm_state_from_string(get_string(v, "state", c))
                                           : (vm.host ? VmState::Running : VmState::Pending);
            if (v.contains("initiator")) vm.initiator = initiator_from_string(get_string(v, "initiator", c));
            model.initial_vms.push_back(std::move(vm));
        }
    }
    if (doc.contains("initial_power_states")) {
        for (const auto& [id, st] : doc.at("initial_power_states").items()) {
            if (!st.is_string()) throw InputError("model.initial_power_states." + id + ": expected 'on' or 'off'");
            const auto s = st.get<std::string>();
            if (s == "on") model.initial_power_states[id] = PowerState::On;
            else if (s == "off") model.initial_power_states[id] = PowerState::Off;
            else throw InputError("model.initial_power_states." + id + ": expected 'on' or 'off'");
        }
    }
    return model;
}

std::string serialize_model(const DataCenterModel& model) {
    using namespace detail;
    json servers = json::array();
    for (const auto& s : model.servers) {
        servers.push_back(json{{"id", s.id},
                               {"cores", s.cores},
                               {"core_speed", s.core_speed},
                               {"ram_capacity", s.ram_capacity},
                               {"power_model_id", s.power_model_id},
                               {"has_power_meter", s.has_power_meter},
                               {"idle_off_power", s.idle_off_power}});
    }
    json pms = json::object();
    for (const auto& [id, pm] : model.power_models) pms[id] = power_model_to_json(pm);
    json vms = json::array();
    for (const auto& vm : model.initial_vms) {
        json v{{"id", vm.id},
               {"flavor", flavor_to_json(vm.flavor)},
               {"workload", workload_to_json(vm.workload)},
               {"state", to_string(vm.state)},
               {"initiator", to_string(vm.initiator)}};
        if (vm.host) v["host"] = *vm.host;
        vms.push_back(std::move(v));
    }
    json states = json::object();
    for (const auto& [id, st] : model.initial_power_states) states[id] = st == PowerState::Off ? "off" : "on";
    json doc{{"servers", std::move(servers)},
             {"power_models", std::move(pms)},
             {"initial_vms", std::move(vms)},
             {"initial_power_states", std::move(states)}};
    return doc.dump(2) + "\n";
}

DataCenterModel load_model(const std::string& path) {
    return parse_model(detail::read_file(path));
}

}  // namespace dcsim
