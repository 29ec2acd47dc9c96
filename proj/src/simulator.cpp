#include "dcsim/simulator.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "csv.hpp"
#include "json_io.hpp"
#include "dcsim/correspondence.hpp"
#include "dcsim/sim_state.hpp"

namespace dcsim {

namespace {

class Simulation {
public:
    Simulation(const DataCenterModel& model, const ExperimentScenario& scenario, const AlgorithmConfig& algorithms,
               const SimConfig& config)
        : scenario_(scenario), algorithms_(algorithms), config_(config) {
        check_inputs(model);
        auto [snapshot, correspondence] = build_initial(model);
        snapshot_ = std::move(snapshot);
        corr_ = std::move(correspondence);
        st_ = SimState::from_model(model, config);
        placement_ = make_placement(algorithms.placement);
        optimizer_ = make_optimizer(algorithms.optimizer, algorithms);
        auto reg_algorithms = algorithms;
        reg_algorithms.reg.horizon = config.autoscaler_interval;
        autoscaler_ = make_autoscaler(algorithms.autoscaler, reg_algorithms);
        optimizer_interval_ = config.optimizer_interval;
        ctx_.placement = placement_.get();
        ctx_.wake_servers_on_demand = algorithms.power_manager_enabled;

        for (std::size_t i = 0; i < scenario_.events.size(); ++i) {
            const auto& e = scenario_.events[i];
            event_index_[e.id] = i;
            if (const auto* rel = std::get_if<RelativeTo>(&e.trigger)) dependents_[rel->reference].push_back(e.id);
        }
    }

    SimulationReport run() {
        for (auto& e : scenario_.events) {
            if (const auto* abs = std::get_if<AbsoluteTime>(&e.trigger)) {
                e.advance(EventStatus::Ready);
                st_.queue.push(abs->time, ev::ScenarioRequest{e.id});
            }
        }
        st_.queue.push(0.0, ev::MeasurementSample{});
        st_.queue.push(optimizer_interval_, ev::OptimizerTick{optimizer_version_});
        if (autoscaler_) st_.queue.push(config_.autoscaler_interval, ev::AutoscalerTick{});
        st_.recompute_rates();

        const double end = config_.end_time;
        while (!st_.queue.empty() && st_.queue.top().time <= end) {
            auto event = st_.queue.pop();
            st_.advance_to(event.time);
            std::visit([this](const auto& k) { handle(k); }, event.kind);
            drain_finished_requests();
            st_.recompute_rates();
        }
        st_.advance_to(end);
        st_.recompute_rates();
        return build_report();
    }

private:
    void check_inputs(const DataCenterModel& model) {
        if (auto problems = validate(model); !problems.empty()) throw InputError("invalid model: " + problems.front());
        if (auto problem = config_.check(); !problem.empty()) throw InputError("invalid simulation config: " + problem);
        if (auto problem = algorithms_.check(); !problem.empty()) throw InputError("invalid algorithm config: " + problem);
        check_scenario(scenario_);
        for (const auto& vm : model.initial_vms) {
            if (!std::holds_alternative<BlackBoxTrace>(vm.workload))
                throw InputError("initial vm '" + vm.id + "' must carry a black-box workload");
        }

        std::set<std::string> known_vms;
        for (const auto& vm : model.initial_vms) known_vms.insert(vm.id);
        for (const auto& e : scenario_.events) {
            if (const auto* start = std::get_if<StartApplication>(&e.request)) {
                if (known_vms.contains(start->vm_id))
                    throw InputError("event '" + e.id + "': vm id '" + start->vm_id + "' collides with an initial vm");
            }
        }
        for (const auto& e : scenario_.events) {
            if (const auto* start = std::get_if<StartApplication>(&e.request)) known_vms.insert(start->vm_id);
        }
        for (const auto& e : scenario_.events) {
            if (const auto* stop = std::get_if<StopApplication>(&e.request)) {
                if (!scenario_.find_event(stop->target) && !known_vms.contains(stop->target))
                    throw InputError("event '" + e.id + "': stop target '" + stop->target + "' cannot be resolved");
            } else if (const auto* re = std::get_if<ReconfigureOptimisationAlgorithm>(&e.request)) {
                if (!is_known_optimizer(re->algorithm))
                    throw InputError("event '" + e.id + "': unknown optimisation algorithm '" + re->algorithm + "'");
            }
        }
    }

    TimelineEvent& event(const std::string& id) { return scenario_.events[event_index_.at(id)]; }

    void complete_request(const std::string& id) {
        auto& e = event(id);
        if (e.status == EventStatus::Completed) return;
        e.advance(EventStatus::Completed);
        completions_[id] = st_.now;
        auto it = dependents_.find(id);
        if (it == dependents_.end()) return;
        for (const auto& dep : it->second) {
            auto& d = event(dep);
            const auto when = resolve_trigger_time(d, completions_);
            d.advance(EventStatus::Ready);
            st_.queue.push(*when, ev::ScenarioRequest{dep});
        }
    }

    void drain_finished_requests() {
        while (!st_.finished_requests.empty()) {
            auto pending = std::move(st_.finished_requests);
            st_.finished_requests.clear();
            for (const auto& id : pending) complete_request(id);
        }
    }

    // --- scenario requests -------------------------------------------------

    void handle(const ev::ScenarioRequest& r) {
        auto& e = event(r.event_id);
        e.advance(EventStatus::Executing);
        std::visit([&](const auto& req) { execute(e, req); }, e.request);
    }

    void execute(TimelineEvent& e, const StartApplication& req) {
        const auto& tpl = scenario_.templates.at(req.template_id);
        const VmFlavor flavor = req.flavor_override.value_or(tpl.flavor);
        corr_.record_origin(e.id, req.vm_id);
        if (const auto* trace = std::get_if<BlackBoxTrace>(&tpl.workload)) {
            VmRuntime vm;
            vm.id = req.vm_id;
            vm.flavor = flavor;
            vm.trace = *trace;
            vm.parameters = tpl.parameters;
            vm.start_event = e.id;
            const auto idx = register_vm(st_, corr_, std::move(vm));
            st_.lifecycle(idx, LifecycleEventKind::Submitted, {});
            st_.log_action("start_application", req.vm_id, "submitted");
            place_vm(idx, st_, corr_, ctx_);
            return;
        }
        ApplicationRuntime app;
        app.id = req.vm_id;
        app.flavor = flavor;
        app.load = std::get<OpenRequestLoad>(tpl.workload);
        app.parameters = tpl.parameters;
        app.start_time = st_.now;
        app.current_rate = app.load.rate_at(0.0);
        while (app.next_series_point < app.load.series.size() && app.load.series[app.next_series_point].time <= 0.0)
            ++app.next_series_point;
        st_.apps.push_back(std::move(app));
        const auto a = st_.apps.size() - 1;
        corr_.link(LinkKind::Application, req.vm_id, a);
        schedule_load_change(a);
        st_.log_action("start_application", req.vm_id, "submitted application");

        auto& application = st_.apps[a];
        VmRuntime vm;
        vm.id = application.next_instance_id();
        vm.flavor = flavor;
        vm.application = a;
        vm.initiator = Initiator::Tenant;
        vm.parameters = application.parameters;
        vm.start_event = e.id;
        const auto idx = register_vm(st_, corr_, std::move(vm));
        st_.apps[a].instances.push_back(idx);
        st_.lifecycle(idx, LifecycleEventKind::Submitted, {});
        place_vm(idx, st_, corr_, ctx_);
    }

    void execute(TimelineEvent& e, const StopApplication& req) {
        std::string target = req.target;
        if (scenario_.find_event(req.target)) {
            const auto* vm = corr_.vm_spawned_by(req.target);
            if (!vm) {
                st_.log_action("stop_application", req.target, "no-op: not started");
                complete_request(e.id);
                return;
            }
            target = *vm;
        }
        if (auto a = corr_.sim_entity(LinkKind::Application, target)) {
            for (auto i : st_.active_instances(*a)) st_.terminate_vm(i);
            st_.apps[*a].stopped = true;
            st_.log_action("stop_application", target, "terminated application");
        } else if (auto vm = corr_.sim_entity(LinkKind::Vm, target)) {
            auto& v = st_.vms[*vm];
            if (v.finished()) {
                st_.log_action("stop_application", target, std::string("no-op: already ") + std::string(to_string(v.state)));
            } else {
                st_.terminate_vm(*vm);
                st_.log_action("stop_application", target, "terminated");
            }
        } else {
            st_.log_action("stop_application", target, "no-op: not started");
        }
        complete_request(e.id);
    }

    void execute(TimelineEvent& e, const ReconfigureOptimisationAlgorithm& req) {
        optimizer_ = make_optimizer(req.algorithm, algorithms_);
        st_.log_action("reconfigure_optimisation_algorithm", req.algorithm, "enacted");
        complete_request(e.id);
    }

    void execute(TimelineEvent& e, const ChangeOptimisationInterval& req) {
        optimizer_interval_ = req.interval;
        ++optimizer_version_;
        st_.queue.push(st_.now + optimizer_interval_, ev::OptimizerTick{optimizer_version_});
        st_.log_action("change_optimisation_interval", detail::format_double(req.interval), "enacted");
        complete_request(e.id);
    }

    // --- internal events ---------------------------------------------------

    void handle(const ev::BootFinished& b) {
        auto& vm = st_.vms[b.vm];
        if (vm.state != VmState::Booting || vm.boot_version != b.version) return;
        st_.finish_boot(b.vm);
    }

    void handle(const ev::SegmentBoundary& s) {
        auto& vm = st_.vms[s.vm];
        if (!vm.executing() || vm.boundary_version != s.version) return;
        st_.finish_segment(s.vm);
    }

    void handle(const ev::VmCompleted& c) {
        auto& vm = st_.vms[c.vm];
        if (!vm.executing() || vm.boundary_version != c.version) return;
        st_.finish_segment(c.vm);
    }

    void handle(const ev::MigrationFinished& m) {
        auto& vm = st_.vms[m.vm];
        if (vm.state != VmState::Migrating || vm.migration_version != m.version) return;
        st_.finish_migration(m.vm);
    }

    void handle(const ev::PowerTransitionFinished& p) {
        auto& server = st_.servers[p.server];
        if (server.transition_version != p.version) return;
        st_.finish_power_transition(p.server);
        st_.log_action("power_transition", server.spec.id, std::string(to_string(server.power)));
        if (server.power != PowerState::On) return;
        for (std::size_t i = 0; i < st_.vms.size(); ++i) {
            auto& vm = st_.vms[i];
            if (vm.state != VmState::Pending || !vm.waiting_for_power) continue;
            vm.waiting_for_power = false;
            place_vm(i, st_, corr_, ctx_);
        }
    }

    void handle(const ev::OptimizerTick& t) {
        if (t.version != optimizer_version_) return;
        if (optimizer_) {
            const auto snap = take_snapshot(st_, corr_);
            for (const auto& a : optimizer_->optimize(snap)) enact(a, st_, corr_, ctx_);
        }
        if (algorithms_.power_manager_enabled) {
            const auto snap = take_snapshot(st_, corr_);
            for (const auto& a : manage_power(snap, algorithms_.spare_servers)) enact(a, st_, corr_, ctx_);
        }
        st_.queue.push(st_.now + optimizer_interval_, ev::OptimizerTick{optimizer_version_});
    }

    void handle(const ev::AutoscalerTick&) {
        for (std::size_t a = 0; a < st_.apps.size(); ++a) {
            auto& app = st_.apps[a];
            if (app.stopped) continue;
            app.history.push_back({st_.now, app.current_rate});
            const auto snap = take_snapshot(st_, corr_);
            const auto& id = *corr_.runtime_entity(LinkKind::Application, a);
            const ApplicationView* view = nullptr;
            for (const auto& v : snap.applications)
                if (v.id == id) view = &v;
            const auto decision = autoscaler_->decide(*view, st_.apps[a].history);
            if (const auto* out = std::get_if<ScaleOutBy>(&decision)) {
                for (int k = 0; k < out->count; ++k) enact(action::ScaleOut{id}, st_, corr_, ctx_);
            } else if (const auto* in = std::get_if<ScaleInInstances>(&decision)) {
                for (const auto& inst : in->instances) enact(action::ScaleIn{id, inst}, st_, corr_, ctx_);
            }
            autoscaler_series_.push_back({st_.now, id, static_cast<int>(st_.active_instances(a).size()),
                                          st_.apps[a].current_rate});
        }
        st_.queue.push(st_.now + config_.autoscaler_interval, ev::AutoscalerTick{});
    }

    void handle(const ev::MeasurementSample&) {
        st_.sample_measurements();
        sync_measurements(st_, corr_, snapshot_);
        st_.queue.push(st_.now + config_.measurement_interval, ev::MeasurementSample{});
    }

    void handle(const ev::LoadChange& l) {
        auto& app = st_.apps[l.application];
        app.current_rate = app.load.series[app.next_series_point].rate;
        ++app.next_series_point;
        schedule_load_change(l.application);
    }

    void schedule_load_change(std::size_t a) {
        const auto& app = st_.apps[a];
        if (app.next_series_point >= app.load.series.size()) return;
        st_.queue.push(app.start_time + app.load.series[app.next_series_point].time, ev::LoadChange{a});
    }

    // --- report ------------------------------------------------------------

    SimulationReport build_report() {
        SimulationReport r;
        r.end_time = config_.end_time;
        r.seed = config_.seed;
        for (const auto& s : st_.servers) {
            ServerSeries series;
            series.server_id = s.spec.id;
            series.has_power_meter = s.spec.has_power_meter;
            series.utilization = s.utilization_series;
            series.power = s.power_series;
            series.energy_wh = integrate_energy(series.power, config_.end_time);
            r.total_energy_wh += series.energy_wh;
            if (s.spec.has_power_meter) r.metered_energy_wh += series.energy_wh;
            r.servers.push_back(std::move(series));
        }
        r.actions = st_.log;
        for (const auto& vm : st_.vms) {
            VmRecord rec;
            rec.id = vm.id;
            rec.initiator = vm.initiator;
            rec.submit_time = vm.submit_time;
            rec.start_time = vm.start_time;
            rec.end_time = vm.end_time;
            rec.final_state = vm.state;
            rec.rejected = vm.rejected;
            rec.hosts = vm.hosts;
            r.vms.push_back(std::move(rec));
        }
        r.autoscaler = autoscaler_series_;
        r.scaling_actions = st_.scaling_actions;
        r.rejected_placements = st_.rejected_placements;
        r.migrations = st_.migrations;
        r.measurements = std::move(st_.measurements);
        return r;
    }

    ExperimentScenario scenario_;
    AlgorithmConfig algorithms_;
    SimConfig config_;
    SimState st_;
    CorrespondenceModel corr_;
    RuntimeModelSnapshot snapshot_;
    std::unique_ptr<PlacementAlgorithm> placement_;
    std::unique_ptr<OptimizationAlgorithm> optimizer_;
    std::unique_ptr<AutoscalingAlgorithm> autoscaler_;
    EnactmentContext ctx_;
    double optimizer_interval_ = 0.0;
    std::uint64_t optimizer_version_ = 0;
    std::map<std::string, std::size_t> event_index_;
    std::map<std::string, std::vector<std::string>> dependents_;
    std::map<std::string, double> completions_;
    std::vector<AutoscalerSample> autoscaler_series_;
};

std::string opt_time(const std::optional<double>& t) {
    return t ? detail::format_double(*t) : std::string{};
}

}  // namespace

SimulationReport run(const DataCenterModel& model, const ExperimentScenario& scenario, const AlgorithmConfig& algorithms,
                     const SimConfig& config) {
    Simulation sim(model, scenario, algorithms, config);
    return sim.run();
}

std::string report_summary_json(const SimulationReport& r) {
    using detail::json;
    json servers = json::array();
    for (const auto& s : r.servers)
        servers.push_back(json{{"server_id", s.server_id}, {"has_power_meter", s.has_power_meter}, {"energy_wh", s.energy_wh}});
    json vms = json::array();
    for (const auto& v : r.vms) {
        json hosts = json::array();
        for (const auto& h : v.hosts) hosts.push_back(json{{"time_s", h.time}, {"host", h.host}});
        json rec{{"id", v.id},
                 {"initiator", to_string(v.initiator)},
                 {"submit_s", v.submit_time},
                 {"final_state", to_string(v.final_state)},
                 {"rejected", v.rejected},
                 {"hosts", std::move(hosts)}};
        rec["start_s"] = v.start_time ? json(*v.start_time) : json(nullptr);
        rec["end_s"] = v.end_time ? json(*v.end_time) : json(nullptr);
        vms.push_back(std::move(rec));
    }
    json actions = json::array();
    for (const auto& a : r.actions)
        actions.push_back(json{{"time_s", a.time}, {"action", a.action}, {"subject", a.subject}, {"outcome", a.outcome}});
    json doc{{"end_time_s", r.end_time},
             {"seed", r.seed},
             {"total_energy_wh", r.total_energy_wh},
             {"metered_energy_wh", r.metered_energy_wh},
             {"servers", std::move(servers)},
             {"vms", std::move(vms)},
             {"actions", std::move(actions)},
             {"rejected_placements", r.rejected_placements},
             {"migrations", r.migrations},
             {"autoscaler",
              {{"samples", r.autoscaler.size()},
               {"mean_instances", r.mean_instances()},
               {"scaling_actions", r.scaling_actions}}},
             {"series",
              {{"utilization", "utilization.csv"},
               {"power", "power.csv"},
               {"autoscaler", "autoscaler.csv"},
               {"metrics", "metrics.csv"},
               {"lifecycle", "lifecycle.csv"}}}};
    return doc.dump(2) + "\n";
}

void write_report(const SimulationReport& r, const std::filesystem::path& dir) {
    using detail::format_double;
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream out(dir / name, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("utilization.csv");
        out << "time_s,server_id,utilization\n";
        for (const auto& s : r.servers)
            for (const auto& p : s.utilization) out << format_double(p.time) << ',' << s.server_id << ',' << format_double(p.value) << '\n';
    }
    {
        auto out = open("power.csv");
        out << "time_s,server_id,power_w\n";
        for (const auto& s : r.servers)
            for (const auto& p : s.power) out << format_double(p.time) << ',' << s.server_id << ',' << format_double(p.value) << '\n';
    }
    {
        auto out = open("summary.csv");
        out << "server_id,energy_wh\n";
        for (const auto& s : r.servers) out << s.server_id << ',' << format_double(s.energy_wh) << '\n';
        out << "TOTAL," << format_double(r.total_energy_wh) << '\n';
    }
    {
        auto out = open("actions.csv");
        out << "time_s,action,subject,outcome\n";
        for (const auto& a : r.actions) out << format_double(a.time) << ',' << a.action << ',' << a.subject << ',' << a.outcome << '\n';
    }
    {
        auto out = open("autoscaler.csv");
        out << "time_s,application,active_instances,offered_rate\n";
        for (const auto& s : r.autoscaler)
            out << format_double(s.time) << ',' << s.application << ',' << s.active_instances << ',' << format_double(s.offered_rate) << '\n';
    }
    {
        auto out = open("vms.csv");
        out << "vm_id,initiator,submit_s,start_s,end_s,final_state,rejected,hosts\n";
        for (const auto& v : r.vms) {
            std::string hosts;
            for (const auto& h : v.hosts) hosts += (hosts.empty() ? "" : ";") + h.host + "@" + format_double(h.time);
            out << v.id << ',' << to_string(v.initiator) << ',' << format_double(v.submit_time) << ',' << opt_time(v.start_time)
                << ',' << opt_time(v.end_time) << ',' << to_string(v.final_state) << ',' << (v.rejected ? 1 : 0) << ',' << hosts
                << '\n';
        }
    }
    {
        auto out = open("metrics.csv");
        write_metrics_csv(out, r.measurements);
    }
    {
        auto out = open("lifecycle.csv");
        write_lifecycle_csv(out, r.measurements);
    }
    {
        auto out = open("report.json");
        out << report_summary_json(r);
    }
}

}  // namespace dcsim
