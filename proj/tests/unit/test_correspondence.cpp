#include <doctest.h>

#include "builders.hpp"
#include "dcsim/correspondence.hpp"
#include "dcsim/sim_state.hpp"

using namespace dcsim;
using namespace dcsim::test;

namespace {

struct World {
    SimState st;
    CorrespondenceModel corr;
    RuntimeModelSnapshot initial;

    explicit World(const DataCenterModel& m, SimConfig cfg = {}) {
        auto [snap, c] = build_initial(m);
        initial = std::move(snap);
        corr = std::move(c);
        st = SimState::from_model(m, cfg);
        st.recompute_rates();
    }

    std::size_t pending(const std::string& id, MiB ram) {
        VmRuntime vm;
        vm.id = id;
        vm.flavor = {1, ram};
        vm.trace = trace({{1000, 1}});
        return register_vm(st, corr, std::move(vm));
    }

    MiB free(const std::string& server) { return take_snapshot(st, corr).find_server(server)->free_ram; }
};

}  // namespace

TEST_CASE("build_initial links every server and initial VM") {
    std::vector<ServerSpec> servers;
    for (int i = 0; i < 8; ++i) servers.push_back(server("s" + std::to_string(i), 4, 2.5, 16384));
    const auto [snap, corr] = build_initial(model_of(servers));
    CHECK(corr.count(LinkKind::Server) == 8);
    CHECK(corr.count(LinkKind::Vm) == 0);
    CHECK(snap.servers.size() == 8);
    CHECK(corr.is_bijective());
}

TEST_CASE("initial snapshot subtracts placed RAM and is reproducible") {
    auto m = model_of({server("a", 4, 2.5, 16384)});
    m.initial_vms.push_back(running_vm("vm", 4096, "a", trace({{100, 1}})));
    const auto first = build_initial(m);
    CHECK(first.first.find_server("a")->free_ram == 12288);
    CHECK(first.first.find_vm("vm")->host == std::optional<std::string>("a"));
    CHECK(first.second.sim_entity(LinkKind::Vm, "vm") == std::optional<std::size_t>(0));
    CHECK(first.second.sim_entity(LinkKind::Workload, "vm/workload").has_value());
    const auto second = build_initial(m);
    CHECK(first.first == second.first);
    CHECK(first.second == second.second);
}

TEST_CASE("placement lowers free RAM in the next snapshot") {
    World w(model_of({server("a", 4, 2.5, 16384)}));
    const auto vm = w.pending("new", 4096);
    const auto before = w.free("a");
    const auto outcome = enact(action::Place{"new", "a"}, w.st, w.corr);
    CHECK(outcome.enacted);
    CHECK(w.free("a") == before - 4096);
    CHECK(w.st.vms[vm].state == VmState::Booting);
}

TEST_CASE("mapping reflects GPS saturation and powered-off servers") {
    auto m = model_of({server("a", 4, 2.5, 16384), server("b", 4, 2.5, 16384)});
    m.initial_vms.push_back(running_vm("x", 1024, "a", trace({{100, 8}})));
    m.initial_vms.push_back(running_vm("y", 1024, "a", trace({{100, 6}})));
    m.initial_power_states["b"] = PowerState::Off;
    World w(m);
    RuntimeModelSnapshot snap = w.initial;
    sync_measurements(w.st, w.corr, snap);
    CHECK(snap.find_server("a")->utilization == doctest::Approx(1.0));
    CHECK(snap.find_server("b")->power_state == PowerState::Off);
    CHECK(snap.find_server("b")->utilization == 0.0);
    CHECK(snap.find_vm("x")->recent_demand == doctest::Approx(8.0));
}

TEST_CASE("place into an exact fit") {
    World w(model_of({server("a", 4, 2.5, 4096)}));
    w.pending("vm", 4096);
    CHECK(enact(action::Place{"vm", "a"}, w.st, w.corr).enacted);
    CHECK(w.free("a") == 0);
}

TEST_CASE("place rejections") {
    World w(model_of({server("a", 4, 2.5, 4096)}));
    w.pending("vm", 8192);
    const auto too_big = enact(action::Place{"vm", "a"}, w.st, w.corr);
    CHECK_FALSE(too_big.enacted);
    CHECK(too_big.reason == "insufficient ram");
    CHECK(enact(action::Place{"ghost", "a"}, w.st, w.corr).reason == "unknown vm");
    CHECK(enact(action::Place{"vm", "zz"}, w.st, w.corr).reason == "unknown server");
    CHECK(w.st.log.back().action == "reject");
}

TEST_CASE("power off refuses a non-empty server") {
    auto m = model_of({server("a", 4, 2.5, 16384), server("b", 4, 2.5, 16384)});
    m.initial_vms.push_back(running_vm("x", 1024, "a", trace({{100, 1}})));
    World w(m);
    const auto busy = enact(action::PowerOff{"a"}, w.st, w.corr);
    CHECK_FALSE(busy.enacted);
    CHECK(busy.reason == "server not empty");
    CHECK(enact(action::PowerOff{"b"}, w.st, w.corr).enacted);
    CHECK(enact(action::PowerOn{"a"}, w.st, w.corr).reason == "already in target state");
}

TEST_CASE("migration reserves RAM on both hosts for ram / bandwidth seconds") {
    auto m = model_of({server("a", 4, 2.5, 16384), server("b", 4, 2.5, 16384)});
    m.initial_vms.push_back(running_vm("x", 2048, "a", trace({{100, 1}})));
    SimConfig cfg;
    cfg.migration_bandwidth = 1024;
    World w(m, cfg);
    const auto outcome = enact(action::Migrate{"x", "a", "b"}, w.st, w.corr);
    REQUIRE(outcome.enacted);
    REQUIRE(outcome.scheduled.size() == 1);
    CHECK(outcome.scheduled[0].time == doctest::Approx(2.0));
    CHECK(outcome.scheduled[0].kind == "migration_finished");
    CHECK(w.free("a") == 16384 - 2048);
    CHECK(w.free("b") == 16384 - 2048);
    CHECK(w.st.vms[0].state == VmState::Migrating);

    auto event = w.st.queue.pop();
    while (!std::holds_alternative<ev::MigrationFinished>(event.kind)) event = w.st.queue.pop();
    CHECK(event.time == doctest::Approx(2.0));
    w.st.advance_to(event.time);
    w.st.finish_migration(0);
    CHECK(w.free("a") == 16384);
    CHECK(w.free("b") == 16384 - 2048);
    CHECK(w.st.vms[0].host == std::optional<std::size_t>(1));
}

TEST_CASE("links are one-to-one") {
    CorrespondenceModel c;
    c.link(LinkKind::Server, "a", 0);
    CHECK_THROWS_AS(c.link(LinkKind::Server, "a", 1), std::logic_error);
    CHECK_THROWS_AS(c.link(LinkKind::Server, "b", 0), std::logic_error);
    c.link(LinkKind::Vm, "a", 0);  // kinds are separate namespaces
    CHECK(*c.runtime_entity(LinkKind::Server, 0) == "a");
    CHECK(c.is_bijective());
    c.record_origin("e1", "vm1");
    CHECK(*c.vm_spawned_by("e1") == "vm1");
    CHECK(*c.origin_of("vm1") == "e1");
}
