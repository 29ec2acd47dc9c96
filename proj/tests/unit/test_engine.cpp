#include <doctest.h>

#include <random>

#include "builders.hpp"
#include "dcsim/engine.hpp"
#include "dcsim/simulator.hpp"

using namespace dcsim;
using namespace dcsim::test;

namespace {

double value_at(const std::vector<TimedValue>& series, double t) {
    double v = 0.0;
    for (const auto& p : series)
        if (p.time <= t) v = p.value;
    return v;
}

SimConfig config_until(double end) {
    SimConfig c;
    c.end_time = end;
    return c;
}

std::vector<double> metric_values(const SimulationReport& r, std::string_view entity, std::string_view metric) {
    std::vector<double> out;
    for (const auto& m : r.measurements.metrics)
        if (m.entity_id == entity && m.metric == metric) out.push_back(m.value);
    return out;
}

}  // namespace

TEST_CASE("empty scenario: two idle servers for an hour") {
    const auto m = model_of({server("a", 4, 2.5, 8192), server("b", 4, 2.5, 8192)});
    const auto r = run(m, {}, {}, config_until(3600));
    CHECK(r.total_energy_wh == doctest::Approx(160.0));
}

TEST_CASE("relative stop terminates the VM 1780 s after its start completed") {
    const auto m = model_of({server("a", 4, 2.5, 16384)});
    const auto r = run(m, start_stop_scenario(), {}, config_until(5400));
    const auto* stop = find_action(r, "stop_application", "vm1");
    REQUIRE(stop);
    CHECK(stop->time == 3527.0);
    CHECK(stop->outcome == "terminated");
    CHECK(*r.find_vm("vm1")->end_time == 3527.0);

    auto slow = config_until(5400);
    slow.boot_latency = 3.0;
    const auto r2 = run(m, start_stop_scenario(), {}, slow);
    CHECK(find_action(r2, "stop_application", "vm1")->time == 3530.0);
    CHECK(*r2.find_vm("vm1")->start_time == 1750.0);
}

TEST_CASE("piecewise demand drives host utilization") {
    auto m = model_of({server("a", 4, 2.5, 16384)});
    ExperimentScenario s;
    s.templates["t"] = ApplicationTemplate{{4, 1024}, trace({{100, 4}, {100, 8}}), {}};
    s.events.push_back(start_at("e", 0, "t", "vm"));
    const auto r = run(m, s, {}, config_until(400));
    const auto& u = r.servers[0].utilization;
    CHECK(value_at(u, 50) == doctest::Approx(0.4));
    CHECK(value_at(u, 150) == doctest::Approx(0.8));
    CHECK(value_at(u, 250) == doctest::Approx(0.0));
    CHECK(*r.find_vm("vm")->end_time == doctest::Approx(200.0));
    CHECK(r.find_vm("vm")->final_state == VmState::Completed);
}

TEST_CASE("contention stretches completion and conserves work") {
    auto m = model_of({server("a", 4, 2.5, 16384)});
    m.initial_vms.push_back(running_vm("x", 1024, "a", trace({{100, 8}})));
    m.initial_vms.push_back(running_vm("y", 1024, "a", trace({{100, 6}})));
    const auto r = run(m, {}, {}, config_until(400));
    // 1400 work-units at 10 units/s: both share until y finishes its 600.
    // y gets 30/7 per s -> done at 140 s; x has 800 - 140*40/7 = 0 left too.
    CHECK(*r.find_vm("y")->end_time == doctest::Approx(140.0));
    CHECK(*r.find_vm("x")->end_time == doctest::Approx(140.0));
    CHECK(value_at(r.servers[0].utilization, 10) == doctest::Approx(1.0));
}

TEST_CASE("contention with unequal lengths") {
    auto m = model_of({server("a", 1, 10.0, 16384)});
    m.initial_vms.push_back(running_vm("x", 1024, "a", trace({{100, 8}})));
    m.initial_vms.push_back(running_vm("y", 1024, "a", trace({{50, 6}})));
    const auto r = run(m, {}, {}, config_until(400));
    // y: 300 units at 30/7 -> 70 s. x got 70*40/7 = 400, then 400 left at 8/s -> 50 s.
    CHECK(*r.find_vm("y")->end_time == doctest::Approx(70.0));
    CHECK(*r.find_vm("x")->end_time == doctest::Approx(120.0));
}

TEST_CASE("proportional_share_rates") {
    const std::vector<double> over{8, 6};
    const auto r = proportional_share_rates(over, 10);
    CHECK(r[0] == doctest::Approx(40.0 / 7.0));
    CHECK(r[1] == doctest::Approx(30.0 / 7.0));
    const std::vector<double> under{3, 2};
    CHECK(proportional_share_rates(under, 10) == under);
    CHECK(proportional_share_rates({}, 10).empty());
}

TEST_CASE("integrate_energy") {
    const std::vector<TimedValue> constant{{0, 100}};
    CHECK(integrate_energy(constant, 7200) == doctest::Approx(200.0));
    const std::vector<TimedValue> step{{0, 100}, {1800, 50}};
    CHECK(integrate_energy(step, 3600) == doctest::Approx(75.0));
    CHECK(integrate_energy({}, 3600) == 0.0);
    CHECK_THROWS_AS(integrate_energy(step, 1000), std::invalid_argument);
}

TEST_CASE("event queue: time order, FIFO on ties") {
    EventQueue q;
    q.push(5, ev::MeasurementSample{});
    q.push(1, ev::AutoscalerTick{});
    q.push(5, ev::OptimizerTick{7});
    q.push(5, ev::LoadChange{3});
    CHECK(std::holds_alternative<ev::AutoscalerTick>(q.pop().kind));
    CHECK(std::holds_alternative<ev::MeasurementSample>(q.pop().kind));
    CHECK(std::holds_alternative<ev::OptimizerTick>(q.pop().kind));
    CHECK(std::holds_alternative<ev::LoadChange>(q.pop().kind));
    CHECK(q.empty());
}

TEST_CASE("samples: saturated host, idle host and powered-off host") {
    auto m = model_of({server("busy", 4, 2.5, 16384), server("idle", 4, 2.5, 16384), server("off", 4, 2.5, 16384)});
    m.servers[2].idle_off_power = 7.5;
    m.initial_power_states["off"] = PowerState::Off;
    m.initial_vms.push_back(running_vm("x", 1024, "busy", trace({{1000, 8}})));
    m.initial_vms.push_back(running_vm("y", 1024, "busy", trace({{1000, 6}})));
    auto cfg = config_until(60);
    const auto r = run(m, {}, {}, cfg);
    CHECK(metric_values(r, "busy", "cpu_utilization").at(1) == doctest::Approx(1.0));
    CHECK(metric_values(r, "idle", "cpu_utilization").at(1) == 0.0);
    CHECK(metric_values(r, "idle", "power_w").at(1) == doctest::Approx(80.0));
    CHECK(metric_values(r, "off", "cpu_utilization").at(1) == 0.0);
    CHECK(metric_values(r, "off", "power_w").at(1) == doctest::Approx(7.5));
    // VM samples are the fraction of host capacity actually granted.
    CHECK(metric_values(r, "x", "vm_cpu_utilization").at(0) == doctest::Approx(4.0 / 7.0));
    CHECK(metric_values(r, "y", "vm_cpu_utilization").at(0) == doctest::Approx(3.0 / 7.0));
}

TEST_CASE("servers without a power meter are not sampled for power") {
    auto m = model_of({server("a", 4, 2.5, 8192)});
    m.servers[0].has_power_meter = false;
    const auto r = run(m, {}, {}, config_until(100));
    CHECK(metric_values(r, "a", "power_w").empty());
    CHECK(r.metered_energy_wh == 0.0);
    CHECK(r.total_energy_wh > 0.0);
}

TEST_CASE("invalid inputs are rejected before running") {
    auto m = model_of({server("a", 4, 2.5, 8192)});
    CHECK_THROWS_AS(run(m, {}, {}, config_until(-1)), InputError);
    auto s = start_stop_scenario();
    s.events[1].request = StopApplication{"nobody"};
    CHECK_THROWS_AS(run(m, s, {}, config_until(10)), InputError);
    AlgorithmConfig a;
    a.optimizer = "magic";
    CHECK_THROWS_AS(run(m, {}, a, config_until(10)), InputError);
}

TEST_CASE("a VM that does not fit is rejected and counted") {
    auto m = model_of({server("a", 4, 2.5, 2048)});
    ExperimentScenario s;
    s.templates["big"] = ApplicationTemplate{{1, 4096}, trace({{10, 1}}), {}};
    s.events.push_back(start_at("e", 5, "big", "vm"));
    s.events.push_back(stop_after("stop", "e", 1, "e"));
    const auto r = run(m, s, {}, config_until(100));
    CHECK(r.rejected_placements == 1);
    CHECK(r.find_vm("vm")->rejected);
    // The stop still fires after the failed start; the VM is already gone.
    const auto* stop = find_action(r, "stop_application", "vm");
    REQUIRE(stop);
    CHECK(stop->time == 6.0);
    CHECK(stop->outcome.rfind("no-op", 0) == 0);
}

TEST_CASE("runs are deterministic") {
    auto m = model_of({server("a", 4, 2.5, 16384), server("b", 2, 2.0, 8192)});
    m.initial_vms.push_back(running_vm("x", 4096, "a", trace({{300, 3}, {200, 9}})));
    m.initial_vms.push_back(running_vm("y", 2048, "b", trace({{400, 1}})));
    AlgorithmConfig a;
    a.optimizer = "consolidation";
    auto cfg = config_until(2000);
    cfg.optimizer_interval = 60;
    const auto r1 = run(m, start_stop_scenario(), a, cfg);
    const auto r2 = run(m, start_stop_scenario(), a, cfg);
    CHECK(report_summary_json(r1) == report_summary_json(r2));
    CHECK(r1.measurements == r2.measurements);
}

TEST_CASE("work conservation without contention over random traces") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> dur(1.0, 500.0);
    std::uniform_real_distribution<double> dem(0.0, 2.0);
    for (int round = 0; round < 50; ++round) {
        auto m = model_of({server("a", 4, 2.5, 65536)});
        double finish = 0.0;
        for (int v = 0; v < 4; ++v) {
            BlackBoxTrace t;
            double total = 0.0;
            for (int k = 0; k < 3; ++k) {
                t.segments.push_back({dur(rng), dem(rng)});
                total += t.segments.back().duration;
            }
            finish = std::max(finish, total);
            m.initial_vms.push_back(running_vm("v" + std::to_string(v), 1024, "a", t));
        }
        const auto r = run(m, {}, {}, config_until(2000));
        for (std::size_t v = 0; v < 4; ++v) {
            const auto& t = std::get<BlackBoxTrace>(m.initial_vms[v].workload);
            CHECK(*r.vms[v].end_time == doctest::Approx(t.nominal_duration()).epsilon(1e-9));
        }
    }
}
