#ifndef DCSIM_SCENARIO_HPP
#define DCSIM_SCENARIO_HPP

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcsim/model.hpp"

namespace dcsim {

struct AbsoluteTime {
    double time = 0.0;
    bool operator==(const AbsoluteTime&) const = default;
};

/// Fires `offset` seconds after the referenced event has completed.
struct RelativeTo {
    std::string reference;
    double offset = 0.0;
    bool operator==(const RelativeTo&) const = default;
};

using Trigger = std::variant<AbsoluteTime, RelativeTo>;

struct StartApplication {
    std::string template_id;
    std::string vm_id;
    std::optional<VmFlavor> flavor_override;
    bool operator==(const StartApplication&) const = default;
};

/// `target` names either an initial VM or a StartApplication event.
struct StopApplication {
    std::string target;
    bool operator==(const StopApplication&) const = default;
};

struct ReconfigureOptimisationAlgorithm {
    std::string algorithm;
    bool operator==(const ReconfigureOptimisationAlgorithm&) const = default;
};

struct ChangeOptimisationInterval {
    double interval = 0.0;
    bool operator==(const ChangeOptimisationInterval&) const = default;
};

using Request = std::variant<StartApplication, StopApplication, ReconfigureOptimisationAlgorithm, ChangeOptimisationInterval>;

enum class EventStatus { Pending, Ready, Executing, Completed };

std::string_view to_string(EventStatus s);
std::string_view request_type_name(const Request& r);

struct TimelineEvent {
    std::string id;
    Trigger trigger;
    Request request;
    EventStatus status = EventStatus::Pending;

    /// Advances the status; throws std::logic_error on a backwards move.
    void advance(EventStatus next);
    bool operator==(const TimelineEvent&) const = default;
};

struct ApplicationTemplate {
    VmFlavor flavor;
    WorkloadModel workload;
    std::map<std::string, std::string> parameters;
    bool operator==(const ApplicationTemplate&) const = default;
};

struct ExperimentScenario {
    std::vector<TimelineEvent> events;
    std::map<std::string, ApplicationTemplate> templates;

    const TimelineEvent* find_event(std::string_view id) const;
    bool operator==(const ExperimentScenario&) const = default;
};

/// Raised for invalid scenario documents; the message names the offending id.
class ScenarioError : public InputError {
public:
    ScenarioError(const std::string& what, std::string offending_id)
        : InputError(what), offending_id_(std::move(offending_id)) {}
    const std::string& offending_id() const noexcept { return offending_id_; }

private:
    std::string offending_id_;
};

/// Checks id uniqueness, reference resolution, acyclicity and value ranges.
void check_scenario(const ExperimentScenario& scenario);

/// `base` resolves "workload_file" and "series_file" references.
ExperimentScenario parse_scenario(std::string_view json_text, const std::filesystem::path& base = {});
std::string serialize_scenario(const ExperimentScenario& scenario);
ExperimentScenario load_scenario(const std::filesystem::path& path);

/// Absolute trigger time, or nullopt while the referenced event has not
/// completed yet.
std::optional<double> resolve_trigger_time(const TimelineEvent& event,
                                           const std::map<std::string, double>& completions);

}  // namespace dcsim

#endif  // DCSIM_SCENARIO_HPP
