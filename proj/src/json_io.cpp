#include "json_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "csv.hpp"

namespace dcsim::detail {

namespace {

std::string ctx(std::string_view context, std::string_view key) {
    return std::string(context) + "." + std::string(key);
}

}  // namespace

void expect_object(const json& j, std::initializer_list<std::string_view> allowed, std::string_view context) {
    if (!j.is_object()) throw InputError(std::string(context) + ": expected an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw InputError(std::string(context) + ": unknown key '" + key + "'");
    }
}

const json& require(const json& j, std::string_view key, std::string_view context) {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string(context) + ": missing key '" + std::string(key) + "'");
    return *it;
}

double get_number(const json& j, std::string_view key, std::string_view context) {
    const auto& v = require(j, key, context);
    if (!v.is_number()) throw InputError(ctx(context, key) + ": expected a number");
    return v.get<double>();
}

double get_number_or(const json& j, std::string_view key, double fallback, std::string_view context) {
    if (!j.contains(key)) return fallback;
    return get_number(j, key, context);
}

std::string get_string(const json& j, std::string_view key, std::string_view context) {
    const auto& v = require(j, key, context);
    if (!v.is_string()) throw InputError(ctx(context, key) + ": expected a string");
    return v.get<std::string>();
}

json flavor_to_json(const VmFlavor& f) {
    return json{{"vcpus", f.vcpus}, {"ram", f.ram}};
}

VmFlavor flavor_from_json(const json& j, std::string_view context) {
    expect_object(j, {"vcpus", "ram"}, context);
    VmFlavor f;
    f.vcpus = static_cast<int>(get_number(j, "vcpus", context));
    f.ram = static_cast<MiB>(get_number(j, "ram", context));
    if (f.vcpus < 1) throw InputError(std::string(context) + ": vcpus must be >= 1");
    if (f.ram <= 0) throw InputError(std::string(context) + ": ram must be > 0");
    return f;
}

json workload_to_json(const WorkloadModel& w) {
    if (const auto* trace = std::get_if<BlackBoxTrace>(&w)) {
        json segs = json::array();
        for (const auto& s : trace->segments) segs.push_back(json{{"duration", s.duration}, {"demand", s.demand}});
        return json{{"type", "blackbox"}, {"segments", std::move(segs)}};
    }
    const auto& load = std::get<OpenRequestLoad>(w);
    json series = json::array();
    for (const auto& p : load.series) series.push_back(json{{"time", p.time}, {"rate", p.rate}});
    return json{{"type", "open_request_load"},
                {"series", std::move(series)},
                {"per_instance_capacity", load.per_instance_capacity}};
}

namespace {

std::vector<RatePoint> read_series_csv(const std::filesystem::path& path, std::string_view context) {
    std::ifstream in(path);
    if (!in) throw InputError(std::string(context) + ": cannot open series file '" + path.string() + "'");
    std::vector<RatePoint> series;
    std::string line;
    std::size_t line_no = 0;
    if (!next_line(in, line, line_no)) return series;
    if (trim(line) != "time_s,rate")
        throw InputError(path.string() + ":1: expected header 'time_s,rate'");
    while (next_line(in, line, line_no)) {
        auto fields = split_fields(line);
        auto t = fields.size() == 2 ? parse_double(fields[0]) : std::nullopt;
        auto r = fields.size() == 2 ? parse_double(fields[1]) : std::nullopt;
        if (!t || !r) throw InputError(path.string() + ":" + std::to_string(line_no) + ": malformed row");
        series.push_back({*t, *r});
    }
    return series;
}

}  // namespace

WorkloadModel workload_from_json(const json& j, std::string_view context, const std::filesystem::path& base) {
    if (!j.is_object()) throw InputError(std::string(context) + ": expected an object");
    const auto type = get_string(j, "type", context);
    WorkloadModel result;
    if (type == "blackbox") {
        expect_object(j, {"type", "segments"}, context);
        BlackBoxTrace trace;
        const auto& segs = require(j, "segments", context);
        if (!segs.is_array()) throw InputError(ctx(context, "segments") + ": expected an array");
        for (const auto& s : segs) {
            const auto sc = ctx(context, "segments[]");
            expect_object(s, {"duration", "demand"}, sc);
            trace.segments.push_back({get_number(s, "duration", sc), get_number(s, "demand", sc)});
        }
        result = std::move(trace);
    } else if (type == "open_request_load") {
        expect_object(j, {"type", "series", "series_file", "per_instance_capacity"}, context);
        OpenRequestLoad load;
        load.per_instance_capacity = get_number(j, "per_instance_capacity", context);
        if (j.contains("series") == j.contains("series_file"))
            throw InputError(std::string(context) + ": exactly one of 'series' or 'series_file' is required");
        if (j.contains("series")) {
            const auto& series = j.at("series");
            if (!series.is_array()) throw InputError(ctx(context, "series") + ": expected an array");
            for (const auto& p : series) {
                const auto sc = ctx(context, "series[]");
                expect_object(p, {"time", "rate"}, sc);
                load.series.push_back({get_number(p, "time", sc), get_number(p, "rate", sc)});
            }
        } else {
            load.series = read_series_csv(base / get_string(j, "series_file", context), context);
        }
        result = std::move(load);
    } else {
        throw InputError(std::string(context) + ": unknown workload type '" + type + "'");
    }
    if (auto problem = check_workload(result); !problem.empty())
        throw InputError(std::string(context) + ": " + problem);
    return result;
}

json power_model_to_json(const PowerModel& m) {
    return json{{"family", m.family.name()}, {"coefficients", m.coefficients}};
}

PowerModel power_model_from_json(const json& j, std::string_view context) {
    expect_object(j, {"family", "coefficients", "diagnostics"}, context);
    PowerModel m;
    m.family = PowerFamily::parse(get_string(j, "family", context));
    const auto& c = require(j, "coefficients", context);
    if (!c.is_array()) throw InputError(ctx(context, "coefficients") + ": expected an array");
    for (const auto& v : c) {
        if (!v.is_number()) throw InputError(ctx(context, "coefficients") + ": expected numbers");
        m.coefficients.push_back(v.get<double>());
    }
    if (m.coefficients.size() != m.family.coefficient_count())
        throw InputError(std::string(context) + ": family " + m.family.name() + " needs " +
                         std::to_string(m.family.coefficient_count()) + " coefficients");
    return m;
}

json parse_json(std::string_view text, std::string_view context) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string(context) + ": malformed JSON: " + e.what());
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace dcsim::detail
