#include "dcsim/algorithms.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "json_io.hpp"

namespace dcsim {

using detail::json;

namespace {

constexpr std::string_view kPlacements[] = {"best-fit-ram", "worst-fit-ram"};
constexpr std::string_view kOptimizers[] = {"none", "consolidation", "load-balance"};
constexpr std::string_view kAutoscalers[] = {"none", "react", "reg"};

template <std::size_t N>
bool contains(const std::string_view (&ids)[N], std::string_view id) {
    return std::find(std::begin(ids), std::end(ids), id) != std::end(ids);
}

bool in_unit_interval(double v) { return v > 0.0 && v <= 1.0; }

}  // namespace

std::string AlgorithmConfig::check() const {
    if (!contains(kPlacements, placement)) return "unknown placement algorithm '" + placement + "'";
    if (!contains(kOptimizers, optimizer)) return "unknown optimizer '" + optimizer + "'";
    if (!contains(kAutoscalers, autoscaler)) return "unknown autoscaler '" + autoscaler + "'";
    if (spare_servers < 0) return "spare_servers must be >= 0";
    if (imbalance_threshold < 0) return "imbalance_threshold must be >= 0";
    if (!in_unit_interval(react.upper_utilization) || !in_unit_interval(react.lower_utilization))
        return "react thresholds must be in (0,1]";
    if (!(react.lower_utilization < react.upper_utilization)) return "react lower threshold must be below upper";
    if (!in_unit_interval(reg.upper_threshold) || !in_unit_interval(reg.lower_threshold))
        return "reg thresholds must be in (0,1]";
    if (!(reg.lower_threshold < reg.upper_threshold)) return "reg lower threshold must be below upper";
    if (reg.window < 2) return "reg window must be >= 2";
    return {};
}

AlgorithmConfig parse_algorithm_config(std::string_view json_text, AlgorithmConfig base) {
    using namespace detail;
    const json doc = parse_json(json_text, "algorithms");
    expect_object(doc,
                  {"placement", "optimizer", "autoscaler", "power_manager_enabled", "spare_servers", "react", "reg",
                   "imbalance_threshold"},
                  "algorithms");
    auto id_or_none = [&](std::string_view key, std::string& out) {
        if (!doc.contains(key)) return;
        const auto& v = doc.at(std::string(key));
        out = v.is_null() ? "none" : get_string(doc, key, "algorithms");
    };
    id_or_none("placement", base.placement);
    id_or_none("optimizer", base.optimizer);
    id_or_none("autoscaler", base.autoscaler);
    if (doc.contains("power_manager_enabled")) {
        if (!doc.at("power_manager_enabled").is_boolean())
            throw InputError("algorithms.power_manager_enabled: expected a boolean");
        base.power_manager_enabled = doc.at("power_manager_enabled").get<bool>();
    }
    base.spare_servers = static_cast<int>(get_number_or(doc, "spare_servers", base.spare_servers, "algorithms"));
    base.imbalance_threshold =
        static_cast<MiB>(get_number_or(doc, "imbalance_threshold", static_cast<double>(base.imbalance_threshold), "algorithms"));
    if (doc.contains("react")) {
        const auto& r = doc.at("react");
        expect_object(r, {"upper_utilization", "lower_utilization"}, "algorithms.react");
        base.react.upper_utilization = get_number_or(r, "upper_utilization", base.react.upper_utilization, "algorithms.react");
        base.react.lower_utilization = get_number_or(r, "lower_utilization", base.react.lower_utilization, "algorithms.react");
    }
    if (doc.contains("reg")) {
        const auto& r = doc.at("reg");
        expect_object(r, {"window", "upper_threshold", "lower_threshold"}, "algorithms.reg");
        base.reg.window = static_cast<int>(get_number_or(r, "window", base.reg.window, "algorithms.reg"));
        base.reg.upper_threshold = get_number_or(r, "upper_threshold", base.reg.upper_threshold, "algorithms.reg");
        base.reg.lower_threshold = get_number_or(r, "lower_threshold", base.reg.lower_threshold, "algorithms.reg");
    }
    if (auto problem = base.check(); !problem.empty()) throw InputError("algorithms: " + problem);
    return base;
}

std::string serialize_algorithm_config(const AlgorithmConfig& c) {
    json doc{{"placement", c.placement},
             {"optimizer", c.optimizer},
             {"autoscaler", c.autoscaler},
             {"power_manager_enabled", c.power_manager_enabled},
             {"spare_servers", c.spare_servers},
             {"imbalance_threshold", c.imbalance_threshold},
             {"react", {{"upper_utilization", c.react.upper_utilization}, {"lower_utilization", c.react.lower_utilization}}},
             {"reg",
              {{"window", c.reg.window},
               {"upper_threshold", c.reg.upper_threshold},
               {"lower_threshold", c.reg.lower_threshold}}}};
    return doc.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Placement

std::optional<std::string> place_best_fit_ram(const RuntimeModelSnapshot& snapshot, const VmFlavor& vm) {
    const ServerView* best = nullptr;
    for (const auto& s : snapshot.servers) {
        if (s.power_state != PowerState::On || s.free_ram < vm.ram) continue;
        if (!best || s.free_ram < best->free_ram || (s.free_ram == best->free_ram && s.id < best->id)) best = &s;
    }
    if (!best) return std::nullopt;
    return best->id;
}

std::optional<std::string> place_worst_fit_ram(const RuntimeModelSnapshot& snapshot, const VmFlavor& vm) {
    const ServerView* best = nullptr;
    for (const auto& s : snapshot.servers) {
        if (s.power_state != PowerState::On || s.free_ram < vm.ram) continue;
        if (!best || s.free_ram > best->free_ram || (s.free_ram == best->free_ram && s.id < best->id)) best = &s;
    }
    if (!best) return std::nullopt;
    return best->id;
}

// ---------------------------------------------------------------------------
// Migration optimizers

namespace {

bool all_running(const RuntimeModelSnapshot& snapshot, const ServerView& s) {
    for (const auto& id : s.vm_ids) {
        const auto* vm = snapshot.find_vm(id);
        if (!vm || vm->state != VmState::Running) return false;
    }
    return true;
}

}  // namespace

std::vector<AdaptationAction> optimize_consolidation(const RuntimeModelSnapshot& snapshot) {
    // Only servers whose VMs can all move right now are candidates.
    const ServerView* source = nullptr;
    for (const auto& s : snapshot.servers) {
        if (s.power_state != PowerState::On || s.vm_ids.empty() || !s.incoming_vms.empty()) continue;
        if (!all_running(snapshot, s)) continue;
        if (!source) {
            source = &s;
            continue;
        }
        const auto n = s.vm_ids.size(), m = source->vm_ids.size();
        if (n < m || (n == m && (s.free_ram > source->free_ram || (s.free_ram == source->free_ram && s.id < source->id))))
            source = &s;
    }
    if (!source) return {};

    // Targets: other occupied On servers. Moving onto an empty server would
    // not reduce the number of active servers.
    std::map<std::string, MiB> residual;
    for (const auto& s : snapshot.servers) {
        if (&s == source || s.power_state != PowerState::On || s.empty()) continue;
        residual[s.id] = s.free_ram;
    }

    std::vector<const VmView*> movers;
    for (const auto& id : source->vm_ids) movers.push_back(snapshot.find_vm(id));
    std::sort(movers.begin(), movers.end(), [](const VmView* a, const VmView* b) {
        return a->flavor.ram != b->flavor.ram ? a->flavor.ram > b->flavor.ram : a->id < b->id;
    });

    std::vector<AdaptationAction> plan;
    for (const auto* vm : movers) {
        const std::string* target = nullptr;
        MiB target_free = 0;
        for (const auto& [id, free] : residual) {
            if (free < vm->flavor.ram) continue;
            if (!target || free < target_free) {
                target = &id;
                target_free = free;
            }
        }
        if (!target) return {};
        residual[*target] -= vm->flavor.ram;
        plan.push_back(action::Migrate{vm->id, source->id, *target});
    }
    return plan;
}

std::vector<AdaptationAction> optimize_load_balance(const RuntimeModelSnapshot& snapshot, MiB imbalance_threshold) {
    const ServerView* fullest = nullptr;
    const ServerView* emptiest = nullptr;
    for (const auto& s : snapshot.servers) {
        if (s.power_state != PowerState::On) continue;
        if (!fullest || s.free_ram < fullest->free_ram || (s.free_ram == fullest->free_ram && s.id < fullest->id))
            fullest = &s;
        if (!emptiest || s.free_ram > emptiest->free_ram || (s.free_ram == emptiest->free_ram && s.id < emptiest->id))
            emptiest = &s;
    }
    if (!fullest || !emptiest || fullest == emptiest) return {};
    const MiB gap = emptiest->free_ram - fullest->free_ram;
    if (gap <= imbalance_threshold) return {};

    const VmView* pick = nullptr;
    for (const auto& id : fullest->vm_ids) {
        const auto* vm = snapshot.find_vm(id);
        if (!vm || vm->state != VmState::Running) continue;
        const MiB ram = vm->flavor.ram;
        // Fits on the target and leaves the target at least as free as the source.
        if (ram > emptiest->free_ram || 2 * ram > gap) continue;
        if (!pick || ram > pick->flavor.ram || (ram == pick->flavor.ram && vm->id < pick->id)) pick = vm;
    }
    if (!pick) return {};
    return {action::Migrate{pick->id, fullest->id, emptiest->id}};
}

std::vector<AdaptationAction> manage_power(const RuntimeModelSnapshot& snapshot, int spare_servers) {
    std::vector<const ServerView*> empty_on;
    std::vector<const ServerView*> off;
    std::size_t powering_on = 0;
    for (const auto& s : snapshot.servers) {
        if (s.power_state == PowerState::On && s.empty()) empty_on.push_back(&s);
        else if (s.power_state == PowerState::Off) off.push_back(&s);
        else if (s.power_state == PowerState::PoweringOn) ++powering_on;
    }
    const auto by_id = [](const ServerView* a, const ServerView* b) { return a->id < b->id; };
    std::sort(empty_on.begin(), empty_on.end(), by_id);
    std::sort(off.begin(), off.end(), by_id);

    const auto spare = static_cast<std::size_t>(spare_servers);
    std::vector<AdaptationAction> plan;
    if (empty_on.size() > spare) {
        for (std::size_t i = spare; i < empty_on.size(); ++i) plan.push_back(action::PowerOff{empty_on[i]->id});
        return plan;
    }
    const std::size_t available = empty_on.size() + powering_on;
    for (std::size_t i = 0; available + i < spare && i < off.size(); ++i) plan.push_back(action::PowerOn{off[i]->id});
    return plan;
}

// ---------------------------------------------------------------------------
// Autoscalers

namespace {

std::vector<std::string> newest(std::vector<std::string> ids, std::size_t count) {
    std::sort(ids.begin(), ids.end());
    std::vector<std::string> out(ids.end() - static_cast<std::ptrdiff_t>(count), ids.end());
    std::reverse(out.begin(), out.end());
    return out;
}

int instances_for(double rate, double capacity) {
    return static_cast<int>(std::ceil(rate / capacity - 1e-9));
}

}  // namespace

ScalingDecision react_decide(const AppMetrics& app, const ReactConfig& config) {
    const auto n = app.instances.size();
    if (n == 0) return ScaleOutBy{1};
    const double cap = app.per_instance_capacity;
    if (app.offered_rate > static_cast<double>(n) * cap * config.upper_utilization) return ScaleOutBy{1};
    const double per_instance_util = app.offered_rate / static_cast<double>(n) / cap;
    // The load is spread evenly, so either every instance is under-utilized
    // or none is.
    if (n >= 2 && per_instance_util < config.lower_utilization) return ScaleInInstances{newest(app.instances, 1)};
    return NoChange{};
}

ScalingDecision reg_decide(const AppMetrics& app, std::span<const RatePoint> history, const RegConfig& config) {
    const double current = app.offered_rate;
    const auto window = std::min<std::size_t>(history.size(), static_cast<std::size_t>(config.window));
    const auto recent = history.subspan(history.size() - window);

    double predicted = current;
    if (recent.size() >= 2) {
        double t_mean = 0.0, r_mean = 0.0;
        for (const auto& p : recent) {
            t_mean += p.time;
            r_mean += p.rate;
        }
        t_mean /= static_cast<double>(recent.size());
        r_mean /= static_cast<double>(recent.size());
        double sxy = 0.0, sxx = 0.0;
        for (const auto& p : recent) {
            sxy += (p.time - t_mean) * (p.rate - r_mean);
            sxx += (p.time - t_mean) * (p.time - t_mean);
        }
        const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
        predicted = r_mean + slope * (recent.back().time + config.horizon - t_mean);
    }
    predicted = std::max(0.0, predicted);

    const int n = static_cast<int>(app.instances.size());
    if (n == 0) return ScaleOutBy{std::max(1, instances_for(predicted, app.per_instance_capacity))};
    const double pool = n * app.per_instance_capacity;
    if (current > pool * config.upper_threshold)
        return ScaleOutBy{std::max(1, instances_for(predicted, app.per_instance_capacity) - n)};
    if (current < pool * config.lower_threshold) {
        const int target = std::max(1, instances_for(predicted, app.per_instance_capacity));
        if (target < n) return ScaleInInstances{newest(app.instances, static_cast<std::size_t>(n - target))};
    }
    return NoChange{};
}

// ---------------------------------------------------------------------------
// Connector implementations

namespace {

class BestFitRam final : public PlacementAlgorithm {
public:
    std::string_view name() const override { return "best-fit-ram"; }
    std::optional<std::string> place(const RuntimeModelSnapshot& s, const VmFlavor& vm) const override {
        return place_best_fit_ram(s, vm);
    }
};

class WorstFitRam final : public PlacementAlgorithm {
public:
    std::string_view name() const override { return "worst-fit-ram"; }
    std::optional<std::string> place(const RuntimeModelSnapshot& s, const VmFlavor& vm) const override {
        return place_worst_fit_ram(s, vm);
    }
};

class Consolidation final : public OptimizationAlgorithm {
public:
    std::string_view name() const override { return "consolidation"; }
    std::vector<AdaptationAction> optimize(const RuntimeModelSnapshot& s) const override {
        return optimize_consolidation(s);
    }
};

class LoadBalance final : public OptimizationAlgorithm {
public:
    explicit LoadBalance(MiB threshold) : threshold_(threshold) {}
    std::string_view name() const override { return "load-balance"; }
    std::vector<AdaptationAction> optimize(const RuntimeModelSnapshot& s) const override {
        return optimize_load_balance(s, threshold_);
    }

private:
    MiB threshold_;
};

AppMetrics metrics_of(const ApplicationView& app) {
    return {app.offered_rate, app.active_instances, app.per_instance_capacity};
}

class React final : public AutoscalingAlgorithm {
public:
    explicit React(ReactConfig c) : config_(c) {}
    std::string_view name() const override { return "react"; }
    ScalingDecision decide(const ApplicationView& app, std::span<const RatePoint>) const override {
        return react_decide(metrics_of(app), config_);
    }

private:
    ReactConfig config_;
};

class Reg final : public AutoscalingAlgorithm {
public:
    explicit Reg(RegConfig c) : config_(c) {}
    std::string_view name() const override { return "reg"; }
    ScalingDecision decide(const ApplicationView& app, std::span<const RatePoint> history) const override {
        return reg_decide(metrics_of(app), history, config_);
    }

private:
    RegConfig config_;
};

}  // namespace

std::unique_ptr<PlacementAlgorithm> make_placement(std::string_view id) {
    if (id == "best-fit-ram") return std::make_unique<BestFitRam>();
    if (id == "worst-fit-ram") return std::make_unique<WorstFitRam>();
    throw InputError("unknown placement algorithm '" + std::string(id) + "'");
}

bool is_known_optimizer(std::string_view id) { return contains(kOptimizers, id); }

std::unique_ptr<OptimizationAlgorithm> make_optimizer(std::string_view id, const AlgorithmConfig& config) {
    if (id == "none") return nullptr;
    if (id == "consolidation") return std::make_unique<Consolidation>();
    if (id == "load-balance") return std::make_unique<LoadBalance>(config.imbalance_threshold);
    throw InputError("unknown optimizer '" + std::string(id) + "'");
}

std::unique_ptr<AutoscalingAlgorithm> make_autoscaler(std::string_view id, const AlgorithmConfig& config) {
    if (id == "none") return nullptr;
    if (id == "react") return std::make_unique<React>(config.react);
    if (id == "reg") return std::make_unique<Reg>(config.reg);
    throw InputError("unknown autoscaler '" + std::string(id) + "'");
}

// ---------------------------------------------------------------------------
// Synthetic workload

std::vector<RatePoint> gen_seasonal_workload(const SeasonalWorkloadParams& p) {
    if (!(p.peak > 0.0) || p.periods < 1 || !(p.noise_low <= p.noise_high) || !(p.duration > 0.0) || !(p.step > 0.0))
        throw InputError("invalid seasonal workload parameters");
    std::mt19937_64 rng(p.seed);
    std::vector<RatePoint> out;
    const double width = p.noise_high - p.noise_low;
    for (std::uint64_t i = 0;; ++i) {
        const double t = static_cast<double>(i) * p.step;
        if (t >= p.duration) break;
        const double phase = 2.0 * std::numbers::pi * p.periods * t / p.duration;
        const double base = p.peak * 0.5 * (1.0 - std::cos(phase));
        // 53 random bits -> uniform [0,1); portable across standard libraries.
        const double unit = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const double noise = p.noise_low + width * unit;
        out.push_back({t, std::max(0.0, base + noise)});
    }
    return out;
}

}  // namespace dcsim
