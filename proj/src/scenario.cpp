#include "dcsim/scenario.hpp"

#include <cmath>
#include <set>
#include <stdexcept>

#include "json_io.hpp"

namespace dcsim {

using detail::json;

std::string_view to_string(EventStatus s) {
    switch (s) {
        case EventStatus::Pending: return "pending";
        case EventStatus::Ready: return "ready";
        case EventStatus::Executing: return "executing";
        case EventStatus::Completed: return "completed";
    }
    return "?";
}

std::string_view request_type_name(const Request& r) {
    return std::visit(
        [](const auto& req) -> std::string_view {
            using T = std::decay_t<decltype(req)>;
            if constexpr (std::is_same_v<T, StartApplication>) return "start_application";
            else if constexpr (std::is_same_v<T, StopApplication>) return "stop_application";
            else if constexpr (std::is_same_v<T, ReconfigureOptimisationAlgorithm>) return "reconfigure_optimisation_algorithm";
            else return "change_optimisation_interval";
        },
        r);
}

void TimelineEvent::advance(EventStatus next) {
    if (static_cast<int>(next) < static_cast<int>(status))
        throw std::logic_error("event '" + id + "': status cannot move from " + std::string(to_string(status)) +
                               " to " + std::string(to_string(next)));
    status = next;
}

const TimelineEvent* ExperimentScenario::find_event(std::string_view id) const {
    for (const auto& e : events)
        if (e.id == id) return &e;
    return nullptr;
}

std::optional<double> resolve_trigger_time(const TimelineEvent& event,
                                           const std::map<std::string, double>& completions) {
    if (const auto* abs = std::get_if<AbsoluteTime>(&event.trigger)) return abs->time;
    const auto& rel = std::get<RelativeTo>(event.trigger);
    auto it = completions.find(rel.reference);
    if (it == completions.end()) return std::nullopt;
    return it->second + rel.offset;
}

void check_scenario(const ExperimentScenario& scenario) {
    std::map<std::string, const TimelineEvent*> by_id;
    for (const auto& e : scenario.events) {
        if (e.id.empty()) throw ScenarioError("event with empty id", e.id);
        if (!by_id.emplace(e.id, &e).second) throw ScenarioError("duplicate event id '" + e.id + "'", e.id);
    }
    std::set<std::string> vm_ids;
    for (const auto& e : scenario.events) {
        if (const auto* abs = std::get_if<AbsoluteTime>(&e.trigger)) {
            if (!(abs->time >= 0.0) || !std::isfinite(abs->time))
                throw ScenarioError("event '" + e.id + "': absolute time must be >= 0", e.id);
        } else {
            const auto& rel = std::get<RelativeTo>(e.trigger);
            if (!(rel.offset >= 0.0) || !std::isfinite(rel.offset))
                throw ScenarioError("event '" + e.id + "': offset must be >= 0", e.id);
            if (!by_id.contains(rel.reference))
                throw ScenarioError("event '" + e.id + "' references missing event '" + rel.reference + "'",
                                    rel.reference);
        }
        if (const auto* start = std::get_if<StartApplication>(&e.request)) {
            if (!scenario.templates.contains(start->template_id))
                throw ScenarioError("event '" + e.id + "' references missing template '" + start->template_id + "'",
                                    start->template_id);
            if (start->vm_id.empty()) throw ScenarioError("event '" + e.id + "': empty vm_id", e.id);
            if (!vm_ids.insert(start->vm_id).second)
                throw ScenarioError("duplicate vm id '" + start->vm_id + "'", start->vm_id);
            if (start->flavor_override && (start->flavor_override->vcpus < 1 || start->flavor_override->ram <= 0))
                throw ScenarioError("event '" + e.id + "': invalid flavor override", e.id);
        } else if (const auto* stop = std::get_if<StopApplication>(&e.request)) {
            auto it = by_id.find(stop->target);
            if (it != by_id.end() && !std::holds_alternative<StartApplication>(it->second->request))
                throw ScenarioError("event '" + e.id + "': stop target '" + stop->target +
                                        "' is not a start_application event",
                                    stop->target);
            if (stop->target.empty()) throw ScenarioError("event '" + e.id + "': empty stop target", e.id);
        } else if (const auto* iv = std::get_if<ChangeOptimisationInterval>(&e.request)) {
            if (!(iv->interval > 0.0)) throw ScenarioError("event '" + e.id + "': interval must be > 0", e.id);
        }
    }
    for (const auto& [id, tpl] : scenario.templates) {
        if (auto problem = check_workload(tpl.workload); !problem.empty())
            throw ScenarioError("template '" + id + "': " + problem, id);
    }

    // Reference chains: every event has at most one outgoing edge, so a walk
    // either reaches an absolute event or revisits a node.
    std::map<std::string, int> state;  // 1 = on current walk, 2 = known acyclic
    for (const auto& e : scenario.events) {
        std::vector<std::string> walk;
        std::string cur = e.id;
        while (true) {
            auto& st = state[cur];
            if (st == 2) break;
            if (st == 1) throw ScenarioError("reference cycle through event '" + cur + "'", cur);
            st = 1;
            walk.push_back(cur);
            const auto* ev = by_id.at(cur);
            if (!std::holds_alternative<RelativeTo>(ev->trigger)) break;
            cur = std::get<RelativeTo>(ev->trigger).reference;
        }
        for (const auto& w : walk) state[w] = 2;
    }
}

namespace {

EventStatus status_from_string(std::string_view s, const std::string& id) {
    for (auto st : {EventStatus::Pending, EventStatus::Ready, EventStatus::Executing, EventStatus::Completed})
        if (to_string(st) == s) return st;
    throw ScenarioError("event '" + id + "': unknown status '" + std::string(s) + "'", id);
}

Request request_from_json(const json& j, const std::string& id) {
    using namespace detail;
    const std::string c = "event '" + id + "'.request";
    const auto type = get_string(j, "type", c);
    if (type == "start_application") {
        expect_object(j, {"type", "template", "vm_id", "flavor_override"}, c);
        StartApplication s{get_string(j, "template", c), get_string(j, "vm_id", c), std::nullopt};
        if (j.contains("flavor_override")) s.flavor_override = flavor_from_json(j.at("flavor_override"), c);
        return s;
    }
    if (type == "stop_application") {
        expect_object(j, {"type", "target"}, c);
        return StopApplication{get_string(j, "target", c)};
    }
    if (type == "reconfigure_optimisation_algorithm") {
        expect_object(j, {"type", "algorithm"}, c);
        return ReconfigureOptimisationAlgorithm{get_string(j, "algorithm", c)};
    }
    if (type == "change_optimisation_interval") {
        expect_object(j, {"type", "interval"}, c);
        return ChangeOptimisationInterval{get_number(j, "interval", c)};
    }
    throw ScenarioError(c + ": unknown request type '" + type + "'", id);
}

json request_to_json(const Request& r) {
    json j{{"type", request_type_name(r)}};
    std::visit(
        [&j](const auto& req) {
            using T = std::decay_t<decltype(req)>;
            if constexpr (std::is_same_v<T, StartApplication>) {
                j["template"] = req.template_id;
                j["vm_id"] = req.vm_id;
                if (req.flavor_override) j["flavor_override"] = detail::flavor_to_json(*req.flavor_override);
            } else if constexpr (std::is_same_v<T, StopApplication>) {
                j["target"] = req.target;
            } else if constexpr (std::is_same_v<T, ReconfigureOptimisationAlgorithm>) {
                j["algorithm"] = req.algorithm;
            } else {
                j["interval"] = req.interval;
            }
        },
        r);
    return j;
}

}  // namespace

ExperimentScenario parse_scenario(std::string_view json_text, const std::filesystem::path& base) {
    using namespace detail;
    const json doc = parse_json(json_text, "scenario");
    expect_object(doc, {"templates", "events"}, "scenario");
    ExperimentScenario scenario;

    if (doc.contains("templates")) {
        const auto& templates = doc.at("templates");
        if (!templates.is_object()) throw InputError("scenario.templates: expected an object");
        for (const auto& [id, t] : templates.items()) {
            const std::string c = "template '" + id + "'";
            expect_object(t, {"flavor", "workload", "workload_file", "parameters"}, c);
            ApplicationTemplate tpl;
            tpl.flavor = flavor_from_json(require(t, "flavor", c), c + ".flavor");
            if (t.contains("workload") == t.contains("workload_file"))
                throw ScenarioError(c + ": exactly one of 'workload' or 'workload_file' is required", id);
            if (t.contains("workload")) {
                tpl.workload = workload_from_json(t.at("workload"), c + ".workload", base);
            } else {
                const auto path = base / get_string(t, "workload_file", c);
                tpl.workload = workload_from_json(parse_json(read_file(path), path.string()), path.string(),
                                                  path.parent_path());
            }
            if (t.contains("parameters")) {
                for (const auto& [k, v] : t.at("parameters").items()) {
                    if (!v.is_string()) throw InputError(c + ".parameters." + k + ": expected a string");
                    tpl.parameters[k] = v.get<std::string>();
                }
            }
            scenario.templates.emplace(id, std::move(tpl));
        }
    }

    const auto& events = require(doc, "events", "scenario");
    if (!events.is_array()) throw InputError("scenario.events: expected an array");
    for (const auto& e : events) {
        expect_object(e, {"id", "trigger", "request", "status"}, "scenario.events[]");
        TimelineEvent ev;
        ev.id = get_string(e, "id", "scenario.events[]");
        const std::string c = "event '" + ev.id + "'";
        const auto& trig = require(e, "trigger", c);
        const auto ttype = get_string(trig, "type", c + ".trigger");
        if (ttype == "absolute") {
            expect_object(trig, {"type", "time"}, c + ".trigger");
            ev.trigger = AbsoluteTime{get_number(trig, "time", c + ".trigger")};
        } else if (ttype == "relative") {
            expect_object(trig, {"type", "reference", "offset"}, c + ".trigger");
            ev.trigger = RelativeTo{get_string(trig, "reference", c + ".trigger"),
                                    get_number(trig, "offset", c + ".trigger")};
        } else {
            throw ScenarioError(c + ": unknown trigger type '" + ttype + "'", ev.id);
        }
        ev.request = request_from_json(require(e, "request", c), ev.id);
        if (e.contains("status")) ev.status = status_from_string(get_string(e, "status", c), ev.id);
        scenario.events.push_back(std::move(ev));
    }
    check_scenario(scenario);
    return scenario;
}

std::string serialize_scenario(const ExperimentScenario& scenario) {
    using namespace detail;
    json templates = json::object();
    for (const auto& [id, tpl] : scenario.templates) {
        json t{{"flavor", flavor_to_json(tpl.flavor)}, {"workload", workload_to_json(tpl.workload)}};
        if (!tpl.parameters.empty()) t["parameters"] = tpl.parameters;
        templates[id] = std::move(t);
    }
    json events = json::array();
    for (const auto& e : scenario.events) {
        json trig;
        if (const auto* abs = std::get_if<AbsoluteTime>(&e.trigger)) {
            trig = json{{"type", "absolute"}, {"time", abs->time}};
        } else {
            const auto& rel = std::get<RelativeTo>(e.trigger);
            trig = json{{"type", "relative"}, {"reference", rel.reference}, {"offset", rel.offset}};
        }
        json ev{{"id", e.id}, {"trigger", std::move(trig)}, {"request", request_to_json(e.request)}};
        if (e.status != EventStatus::Pending) ev["status"] = to_string(e.status);
        events.push_back(std::move(ev));
    }
    json doc{{"templates", std::move(templates)}, {"events", std::move(events)}};
    return doc.dump(2) + "\n";
}

ExperimentScenario load_scenario(const std::filesystem::path& path) {
    return parse_scenario(detail::read_file(path), path.parent_path());
}

}  // namespace dcsim
