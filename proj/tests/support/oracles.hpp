// Independent reference implementations used by property tests.
#ifndef DCSIM_TESTS_ORACLES_HPP
#define DCSIM_TESTS_ORACLES_HPP

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dcsim/algorithms.hpp"
#include "dcsim/correspondence.hpp"

namespace dcsim::test {

/// Random snapshot with up to `max_servers` servers. Free RAM values are
/// drawn from a small set so ties are common.
inline RuntimeModelSnapshot random_snapshot(std::mt19937_64& rng, int max_servers = 16) {
    std::uniform_int_distribution<int> count(1, max_servers);
    std::uniform_int_distribution<int> vms_per(0, 4);
    std::uniform_int_distribution<int> ram_step(1, 4);
    std::uniform_int_distribution<int> power(0, 9);
    RuntimeModelSnapshot snap;
    const int n = count(rng);
    int next_vm = 0;
    for (int i = 0; i < n; ++i) {
        ServerView s;
        s.id = (i < 10 ? "s0" : "s") + std::to_string(i);
        s.ram_capacity = 4096 * ram_step(rng) * 2;
        s.power_state = power(rng) == 0 ? PowerState::Off : PowerState::On;
        MiB used = 0;
        const int k = s.power_state == PowerState::On ? vms_per(rng) : 0;
        for (int v = 0; v < k; ++v) {
            const MiB ram = 1024 * ram_step(rng);
            if (used + ram > s.ram_capacity) break;
            VmView vm;
            vm.id = "vm" + std::to_string(next_vm++);
            vm.flavor = {1, ram};
            vm.host = s.id;
            vm.state = VmState::Running;
            snap.vms.push_back(vm);
            s.vm_ids.push_back(vm.id);
            used += ram;
        }
        s.free_ram = s.ram_capacity - used;
        snap.servers.push_back(s);
    }
    // Shuffle server order so the id tie-break is exercised independently
    // of iteration order.
    std::shuffle(snap.servers.begin(), snap.servers.end(), rng);
    return snap;
}

/// Exhaustive scan: feasible On servers, best key first, then smallest id.
inline std::optional<std::string> exhaustive_fit(const RuntimeModelSnapshot& snap, MiB ram, bool best) {
    std::vector<const ServerView*> feasible;
    for (const auto& s : snap.servers)
        if (s.power_state == PowerState::On && s.free_ram >= ram) feasible.push_back(&s);
    if (feasible.empty()) return std::nullopt;
    MiB target = feasible.front()->free_ram;
    for (const auto* s : feasible) target = best ? std::min(target, s->free_ram) : std::max(target, s->free_ram);
    std::optional<std::string> id;
    for (const auto* s : feasible)
        if (s->free_ram == target && (!id || s->id < *id)) id = s->id;
    return id;
}

/// Applies a plan to the free-RAM view, counting a migrating VM on both
/// servers. Returns false on the first capacity violation or an action that
/// does not match the snapshot.
inline bool replay_plan_safely(const RuntimeModelSnapshot& snap, const std::vector<AdaptationAction>& plan) {
    std::map<std::string, MiB> free;
    std::map<std::string, std::string> host;
    std::map<std::string, MiB> ram;
    for (const auto& s : snap.servers) free[s.id] = s.free_ram;
    for (const auto& v : snap.vms) {
        if (v.host) host[v.id] = *v.host;
        ram[v.id] = v.flavor.ram;
    }
    for (const auto& a : plan) {
        const auto* m = std::get_if<action::Migrate>(&a);
        if (!m) continue;
        if (!host.contains(m->vm) || host[m->vm] != m->from || !free.contains(m->to)) return false;
        free[m->to] -= ram[m->vm];
        if (free[m->to] < 0) return false;
        host[m->vm] = m->to;
    }
    return true;
}

}  // namespace dcsim::test

#endif  // DCSIM_TESTS_ORACLES_HPP
