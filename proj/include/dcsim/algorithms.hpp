#ifndef DCSIM_ALGORITHMS_HPP
#define DCSIM_ALGORITHMS_HPP

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcsim/correspondence.hpp"

namespace dcsim {

struct ReactConfig {
    double upper_utilization = 1.0;  ///< fraction of instance capacity that triggers scale-out
    double lower_utilization = 0.3;  ///< below this an instance counts as under-utilized
};

struct RegConfig {
    int window = 10;               ///< samples in the regression window
    double upper_threshold = 0.9;  ///< scale out above this fraction of pool capacity
    double lower_threshold = 0.5;  ///< scale in below this fraction of pool capacity
    double horizon = 60.0;         ///< prediction horizon in seconds (one autoscaler interval)
};

struct AlgorithmConfig {
    std::string placement = "best-fit-ram";
    std::string optimizer = "none";
    std::string autoscaler = "none";
    bool power_manager_enabled = false;
    int spare_servers = 1;
    ReactConfig react;
    RegConfig reg;
    MiB imbalance_threshold = 4096;

    /// Empty when valid, otherwise the first violated constraint.
    std::string check() const;
};

/// Parses the JSON block mirroring AlgorithmConfig; missing keys keep `base`.
AlgorithmConfig parse_algorithm_config(std::string_view json_text, AlgorithmConfig base = {});
std::string serialize_algorithm_config(const AlgorithmConfig& config);

// ---------------------------------------------------------------------------
// Connector interfaces. Implementations only read the snapshot; their
// decisions reach the simulation through enact().

class PlacementAlgorithm {
public:
    virtual ~PlacementAlgorithm() = default;
    virtual std::string_view name() const = 0;
    /// Chosen server id, or nullopt when no server is feasible.
    virtual std::optional<std::string> place(const RuntimeModelSnapshot& snapshot, const VmFlavor& vm) const = 0;
};

class OptimizationAlgorithm {
public:
    virtual ~OptimizationAlgorithm() = default;
    virtual std::string_view name() const = 0;
    virtual std::vector<AdaptationAction> optimize(const RuntimeModelSnapshot& snapshot) const = 0;
};

struct NoChange {
    bool operator==(const NoChange&) const = default;
};
struct ScaleOutBy {
    int count = 1;
    bool operator==(const ScaleOutBy&) const = default;
};
struct ScaleInInstances {
    std::vector<std::string> instances;
    bool operator==(const ScaleInInstances&) const = default;
};
using ScalingDecision = std::variant<NoChange, ScaleOutBy, ScaleInInstances>;

class AutoscalingAlgorithm {
public:
    virtual ~AutoscalingAlgorithm() = default;
    virtual std::string_view name() const = 0;
    /// `history` holds (tick time, offered rate), oldest first, ending with
    /// the current tick.
    virtual ScalingDecision decide(const ApplicationView& app, std::span<const RatePoint> history) const = 0;
};

/// Throws InputError for unknown ids. "none" yields nullptr for the
/// optimizer and autoscaler factories.
std::unique_ptr<PlacementAlgorithm> make_placement(std::string_view id);
std::unique_ptr<OptimizationAlgorithm> make_optimizer(std::string_view id, const AlgorithmConfig& config);
std::unique_ptr<AutoscalingAlgorithm> make_autoscaler(std::string_view id, const AlgorithmConfig& config);
bool is_known_optimizer(std::string_view id);

// ---------------------------------------------------------------------------
// Built-in algorithms as free functions.

/// Powered-on server with the least free RAM that still fits; ties by id.
std::optional<std::string> place_best_fit_ram(const RuntimeModelSnapshot& snapshot, const VmFlavor& vm);
/// Powered-on server with the most free RAM that fits; ties by id.
std::optional<std::string> place_worst_fit_ram(const RuntimeModelSnapshot& snapshot, const VmFlavor& vm);

/// Tries to empty the non-empty server with the fewest VMs by moving all of
/// its VMs best-fit onto other occupied servers; all or nothing.
std::vector<AdaptationAction> optimize_consolidation(const RuntimeModelSnapshot& snapshot);
/// One migration from the fullest to the emptiest server when their free RAM
/// differs by more than `imbalance_threshold`.
std::vector<AdaptationAction> optimize_load_balance(const RuntimeModelSnapshot& snapshot, MiB imbalance_threshold);
/// Keeps exactly `spare_servers` empty servers powered on.
std::vector<AdaptationAction> manage_power(const RuntimeModelSnapshot& snapshot, int spare_servers);

struct AppMetrics {
    double offered_rate = 0.0;
    std::vector<std::string> instances;  ///< creation order; the last is the newest
    double per_instance_capacity = 1.0;
};

ScalingDecision react_decide(const AppMetrics& app, const ReactConfig& config);
ScalingDecision reg_decide(const AppMetrics& app, std::span<const RatePoint> history, const RegConfig& config);

struct SeasonalWorkloadParams {
    double peak = 100.0;
    int periods = 16;
    double duration = 41400.0;
    double noise_low = -3.0;
    double noise_high = 2.0;
    std::uint64_t seed = 42;
    double step = 5.0;
};

/// Raised-cosine seasonal request rate plus uniform noise, clamped at 0,
/// sampled every `step` seconds on [0, duration).
std::vector<RatePoint> gen_seasonal_workload(const SeasonalWorkloadParams& params);

}  // namespace dcsim

#endif  // DCSIM_ALGORITHMS_HPP
