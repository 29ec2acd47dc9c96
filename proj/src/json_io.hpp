// Shared JSON helpers for the model, scenario and config documents.
#ifndef DCSIM_SRC_JSON_IO_HPP
#define DCSIM_SRC_JSON_IO_HPP

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

#include <json.hpp>

#include "dcsim/model.hpp"

namespace dcsim::detail {

using nlohmann::json;

/// Throws InputError if `j` is not an object or carries a key outside `allowed`.
void expect_object(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context);

const json& require(const json& j, std::string_view key, std::string_view context);
double get_number(const json& j, std::string_view key, std::string_view context);
double get_number_or(const json& j, std::string_view key, double fallback, std::string_view context);
std::string get_string(const json& j, std::string_view key, std::string_view context);

json flavor_to_json(const VmFlavor& f);
VmFlavor flavor_from_json(const json& j, std::string_view context);

json workload_to_json(const WorkloadModel& w);
/// `base` resolves "series_file" references (CSV "time_s,rate").
WorkloadModel workload_from_json(const json& j, std::string_view context, const std::filesystem::path& base = {});

json power_model_to_json(const PowerModel& m);
PowerModel power_model_from_json(const json& j, std::string_view context);

json parse_json(std::string_view text, std::string_view context);
std::string read_file(const std::filesystem::path& path);

}  // namespace dcsim::detail

#endif  // DCSIM_SRC_JSON_IO_HPP
