#include <doctest.h>

#include <algorithm>
#include <random>

#include "dcsim/algorithms.hpp"
#include "oracles.hpp"

using namespace dcsim;

namespace {

// Servers given as (id, capacity, hosted VM sizes).
struct Spec {
    std::string id;
    MiB capacity;
    std::vector<MiB> vms;
    PowerState power = PowerState::On;
};

RuntimeModelSnapshot snapshot(const std::vector<Spec>& specs) {
    RuntimeModelSnapshot snap;
    for (const auto& sp : specs) {
        ServerView s;
        s.id = sp.id;
        s.ram_capacity = sp.capacity;
        s.power_state = sp.power;
        s.free_ram = sp.capacity;
        for (std::size_t i = 0; i < sp.vms.size(); ++i) {
            VmView vm;
            vm.id = sp.id + "-vm" + std::to_string(i);
            vm.flavor = {1, sp.vms[i]};
            vm.host = sp.id;
            vm.state = VmState::Running;
            s.vm_ids.push_back(vm.id);
            s.free_ram -= sp.vms[i];
            snap.vms.push_back(vm);
        }
        snap.servers.push_back(s);
    }
    return snap;
}

RuntimeModelSnapshot free_only(std::vector<std::pair<std::string, MiB>> free) {
    std::vector<Spec> specs;
    for (auto& [id, f] : free) specs.push_back({id, f, {}});
    return snapshot(specs);
}

std::vector<std::string> newest_of(const ScalingDecision& d) {
    return std::get<ScaleInInstances>(d).instances;
}

AppMetrics app(double rate, int n, double cap) {
    AppMetrics m;
    m.offered_rate = rate;
    m.per_instance_capacity = cap;
    for (int i = 1; i <= n; ++i) {
        char id[16];
        std::snprintf(id, sizeof id, "app-%04d", i);
        m.instances.push_back(id);
    }
    return m;
}

std::vector<RatePoint> history(std::vector<double> rates, double spacing = 1.0) {
    std::vector<RatePoint> h;
    for (std::size_t i = 0; i < rates.size(); ++i) h.push_back({static_cast<double>(i) * spacing, rates[i]});
    return h;
}

}  // namespace

TEST_CASE("best-fit by RAM") {
    const VmFlavor vm{1, 4096};
    CHECK(place_best_fit_ram(free_only({{"A", 8192}, {"B", 4096}, {"C", 16384}}), vm) == "B");
    CHECK_FALSE(place_best_fit_ram(free_only({{"A", 2048}, {"B", 1024}}), vm).has_value());
    CHECK(place_best_fit_ram(free_only({{"B", 4096}, {"A", 4096}}), vm) == "A");
}

TEST_CASE("worst-fit by RAM") {
    const VmFlavor vm{1, 4096};
    CHECK(place_worst_fit_ram(free_only({{"A", 8192}, {"B", 4096}, {"C", 16384}}), vm) == "C");
    CHECK(place_worst_fit_ram(free_only({{"A", 1024}, {"B", 4096}}), vm) == "B");
    CHECK_FALSE(place_worst_fit_ram(free_only({{"A", 1024}}), vm).has_value());
}

TEST_CASE("placement skips servers that are not powered on") {
    auto snap = free_only({{"A", 4096}, {"B", 8192}});
    snap.servers[0].power_state = PowerState::PoweringOn;
    CHECK(place_best_fit_ram(snap, {1, 4096}) == "B");
}

TEST_CASE("placement agrees with exhaustive scans") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> ram(1, 8);
    for (int i = 0; i < 500; ++i) {
        const auto snap = test::random_snapshot(rng);
        const VmFlavor vm{1, 1024 * ram(rng)};
        CHECK(place_best_fit_ram(snap, vm) == test::exhaustive_fit(snap, vm.ram, true));
        CHECK(place_worst_fit_ram(snap, vm) == test::exhaustive_fit(snap, vm.ram, false));
    }
}

TEST_CASE("consolidation moves a lone VM onto an occupied server") {
    const auto snap = snapshot({{"A", 16384, {2048}}, {"B", 8192, {4096}}});
    const auto plan = optimize_consolidation(snap);
    REQUIRE(plan.size() == 1);
    CHECK(std::get<action::Migrate>(plan[0]) == action::Migrate{"A-vm0", "A", "B"});
}

TEST_CASE("consolidation gives up when the source cannot be emptied") {
    CHECK(optimize_consolidation(snapshot({{"A", 16384, {8192}}, {"B", 16384, {12288}}})).empty());
    CHECK(optimize_consolidation(snapshot({{"A", 16384, {}}, {"B", 8192, {}}})).empty());
    // All or nothing: the 8192 VM would fit on B, the 4096 one no longer would.
    CHECK(optimize_consolidation(snapshot({{"A", 16384, {4096, 8192}}, {"B", 16384, {1024, 1024, 1024, 4096}}})).empty());
}

TEST_CASE("consolidation never targets an empty server") {
    const auto plan = optimize_consolidation(snapshot({{"A", 16384, {2048}}, {"B", 16384, {}}}));
    CHECK(plan.empty());
}

TEST_CASE("load balancing") {
    const auto plan = optimize_load_balance(snapshot({{"A", 2048, {2048}}, {"B", 8192, {}}}), 4096);
    REQUIRE(plan.size() == 1);
    CHECK(std::get<action::Migrate>(plan[0]) == action::Migrate{"A-vm0", "A", "B"});
    CHECK(optimize_load_balance(free_only({{"A", 4096}, {"B", 4096}}), 4096).empty());
    CHECK(optimize_load_balance(snapshot({{"A", 4096, {2048}}, {"B", 6144, {}}}), 4096).empty());
}

TEST_CASE("optimizer plans never overcommit a server") {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 500; ++i) {
        const auto snap = test::random_snapshot(rng);
        CHECK(test::replay_plan_safely(snap, optimize_consolidation(snap)));
        CHECK(test::replay_plan_safely(snap, optimize_load_balance(snap, 4096)));
    }
}

TEST_CASE("power management keeps the requested spares") {
    const auto three = free_only({{"A", 8192}, {"B", 8192}, {"C", 8192}});
    const auto plan = manage_power(three, 1);
    REQUIRE(plan.size() == 2);
    CHECK(std::get<action::PowerOff>(plan[0]).server == "B");
    CHECK(std::get<action::PowerOff>(plan[1]).server == "C");

    CHECK(manage_power(snapshot({{"A", 8192, {1024}}, {"B", 8192, {1024}}}), 1).empty());

    auto off = three;
    for (auto& s : off.servers) s.power_state = PowerState::Off;
    const auto wake = manage_power(off, 1);
    REQUIRE(wake.size() == 1);
    CHECK(std::get<action::PowerOn>(wake[0]).server == "A");

    // A server already powering on counts as the spare.
    off.servers[1].power_state = PowerState::PoweringOn;
    CHECK(manage_power(off, 1).empty());
}

TEST_CASE("react") {
    const ReactConfig cfg;
    CHECK(std::get<ScaleOutBy>(react_decide(app(50, 4, 12), cfg)).count == 1);
    CHECK(newest_of(react_decide(app(10, 4, 12), cfg)) == std::vector<std::string>{"app-0004"});
    CHECK(std::holds_alternative<NoChange>(react_decide(app(40, 4, 12), cfg)));
    CHECK(std::holds_alternative<NoChange>(react_decide(app(1, 1, 12), cfg)));
}

TEST_CASE("reg") {
    RegConfig cfg;
    cfg.window = 5;
    cfg.horizon = 1.0;
    const auto flat = reg_decide(app(50, 10, 12), history({50, 50, 50, 50, 50}), cfg);
    CHECK(newest_of(flat) == std::vector<std::string>{"app-0010", "app-0009", "app-0008", "app-0007", "app-0006"});

    const auto rising = reg_decide(app(50, 4, 12), history({10, 20, 30, 40, 50}), cfg);
    CHECK(std::get<ScaleOutBy>(rising).count == 1);

    CHECK(std::holds_alternative<NoChange>(reg_decide(app(40, 5, 12), history({40, 40, 40, 40, 40}), cfg)));
}

TEST_CASE("reg only regresses over the last window points") {
    RegConfig cfg;
    cfg.window = 3;
    cfg.horizon = 1.0;
    // Old points would pull the slope down; the last three are flat at 50.
    const auto d = reg_decide(app(50, 10, 12), history({500, 400, 300, 50, 50, 50}), cfg);
    CHECK(newest_of(d).size() == 5);
}

TEST_CASE("seasonal workload") {
    SeasonalWorkloadParams p;
    p.noise_low = p.noise_high = 0.0;
    p.periods = 1;
    p.duration = 100;
    p.step = 5;
    const auto s = gen_seasonal_workload(p);
    REQUIRE(s.size() == 20);
    CHECK(s.front().rate == 0.0);
    CHECK(s[10].time == 50.0);
    CHECK(s[10].rate == doctest::Approx(p.peak).epsilon(1e-12));

    SeasonalWorkloadParams defaults;
    const auto a = gen_seasonal_workload(defaults);
    const auto b = gen_seasonal_workload(defaults);
    CHECK(a == b);
    double hi = 0.0, lo = 1e9;
    for (const auto& r : a) {
        hi = std::max(hi, r.rate);
        lo = std::min(lo, r.rate);
    }
    CHECK(hi >= 97.0);
    CHECK(hi <= 102.0);
    CHECK(lo == 0.0);

    SeasonalWorkloadParams bad;
    bad.noise_low = 2;
    bad.noise_high = -3;
    CHECK_THROWS_AS(gen_seasonal_workload(bad), InputError);
}

TEST_CASE("algorithm factories and config") {
    CHECK(make_placement("best-fit-ram")->name() == "best-fit-ram");
    CHECK(make_optimizer("none", {}) == nullptr);
    CHECK(make_autoscaler("reg", {})->name() == "reg");
    CHECK_THROWS_AS(make_placement("random"), InputError);
    AlgorithmConfig c;
    c.optimizer = "load-balance";
    c.power_manager_enabled = true;
    c.react.lower_utilization = 0.2;
    CHECK(parse_algorithm_config(serialize_algorithm_config(c)).react.lower_utilization == 0.2);
    CHECK_THROWS_AS(parse_algorithm_config(R"({"spare_servers": -1})"), InputError);
}
