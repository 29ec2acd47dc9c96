#include "dcsim/engine.hpp"

#include <numeric>
#include <stdexcept>

namespace dcsim {

std::string SimConfig::check() const {
    if (!(end_time > 0.0)) return "end_time must be > 0";
    if (!(measurement_interval > 0.0)) return "measurement_interval must be > 0";
    if (!(optimizer_interval > 0.0)) return "optimizer_interval must be > 0";
    if (!(autoscaler_interval > 0.0)) return "autoscaler_interval must be > 0";
    if (!(boot_latency >= 0.0)) return "boot_latency must be >= 0";
    if (!(placement_decision_latency >= 0.0)) return "placement_decision_latency must be >= 0";
    if (!(migration_bandwidth > 0.0)) return "migration_bandwidth must be > 0";
    if (!(power_transition_latency >= 0.0)) return "power_transition_latency must be >= 0";
    return {};
}

std::uint64_t EventQueue::push(double time, EventKind kind) {
    const auto seq = next_sequence_++;
    heap_.push(SimEvent{time, seq, std::move(kind)});
    return seq;
}

SimEvent EventQueue::pop() {
    SimEvent e = heap_.top();
    heap_.pop();
    return e;
}

std::vector<double> proportional_share_rates(std::span<const double> demands, double capacity) {
    std::vector<double> rates(demands.begin(), demands.end());
    const double total = std::accumulate(demands.begin(), demands.end(), 0.0);
    if (total <= capacity) return rates;
    const double scale = capacity / total;
    for (auto& r : rates) r *= scale;
    return rates;
}

double integrate_energy(std::span<const TimedValue> power_series, double end_time) {
    if (power_series.empty()) return 0.0;
    if (end_time < power_series.back().time)
        throw std::invalid_argument("end_time precedes the last power sample");
    double joules = 0.0;
    for (std::size_t i = 0; i < power_series.size(); ++i) {
        const double until = i + 1 < power_series.size() ? power_series[i + 1].time : end_time;
        joules += power_series[i].value * (until - power_series[i].time);
    }
    return joules / 3600.0;
}

const VmRecord* SimulationReport::find_vm(std::string_view id) const {
    for (const auto& v : vms)
        if (v.id == id) return &v;
    return nullptr;
}

double SimulationReport::mean_instances() const {
    if (autoscaler.empty()) return 0.0;
    double sum = 0.0;
    for (const auto& s : autoscaler) sum += s.active_instances;
    return sum / static_cast<double>(autoscaler.size());
}

}  // namespace dcsim
