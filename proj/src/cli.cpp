#include "dcsim/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <future>
#include <ostream>
#include <set>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "csv.hpp"
#include "json_io.hpp"
#include "dcsim/extraction.hpp"
#include "dcsim/scenario.hpp"
#include "dcsim/simulator.hpp"

namespace dcsim {

double relative_error(double measured, double predicted) {
    if (measured == 0.0) throw std::invalid_argument("relative error is undefined for a measured value of 0");
    return std::abs(measured - predicted) / std::abs(measured);
}

SimConfig parse_sim_config(std::string_view json_text, SimConfig base) {
    using namespace detail;
    const json doc = parse_json(json_text, "simulation");
    expect_object(doc,
                  {"end", "measurement_interval", "optimizer_interval", "autoscaler_interval", "boot_latency",
                   "placement_decision_latency", "migration_bandwidth", "power_transition_latency"},
                  "simulation");
    base.end_time = get_number_or(doc, "end", base.end_time, "simulation");
    base.measurement_interval = get_number_or(doc, "measurement_interval", base.measurement_interval, "simulation");
    base.optimizer_interval = get_number_or(doc, "optimizer_interval", base.optimizer_interval, "simulation");
    base.autoscaler_interval = get_number_or(doc, "autoscaler_interval", base.autoscaler_interval, "simulation");
    base.boot_latency = get_number_or(doc, "boot_latency", base.boot_latency, "simulation");
    base.placement_decision_latency =
        get_number_or(doc, "placement_decision_latency", base.placement_decision_latency, "simulation");
    base.migration_bandwidth = get_number_or(doc, "migration_bandwidth", base.migration_bandwidth, "simulation");
    base.power_transition_latency = get_number_or(doc, "power_transition_latency", base.power_transition_latency, "simulation");
    if (auto problem = base.check(); !problem.empty()) throw InputError("simulation: " + problem);
    return base;
}

CompareConfig load_compare_config(const std::filesystem::path& path) {
    using namespace detail;
    const std::string context = path.string();
    const json doc = parse_json(read_file(path), context);
    expect_object(doc, {"name", "model", "scenario", "algorithms", "simulation"}, context);
    const auto base = path.parent_path();
    CompareConfig c;
    c.name = doc.contains("name") ? get_string(doc, "name", context) : path.stem().string();
    c.model = base / get_string(doc, "model", context);
    c.scenario = base / get_string(doc, "scenario", context);
    if (doc.contains("algorithms")) c.algorithms = parse_algorithm_config(doc.at("algorithms").dump());
    if (doc.contains("simulation")) c.simulation = parse_sim_config(doc.at("simulation").dump());
    return c;
}

CompareResult run_compare(const std::vector<CompareConfig>& configs, std::uint64_t seed) {
    if (configs.size() < 2) throw InputError("compare needs at least two configurations");
    const auto model_path = std::filesystem::weakly_canonical(configs.front().model);
    const auto scenario_path = std::filesystem::weakly_canonical(configs.front().scenario);
    for (const auto& c : configs) {
        if (std::filesystem::weakly_canonical(c.model) != model_path)
            throw InputError("configuration '" + c.name + "' uses a different model file");
        if (std::filesystem::weakly_canonical(c.scenario) != scenario_path)
            throw InputError("configuration '" + c.name + "' uses a different scenario file");
    }
    const auto model = load_model(model_path);
    const auto scenario = load_scenario(scenario_path);

    std::vector<std::future<SimulationReport>> runs;
    for (const auto& c : configs) {
        auto sim = c.simulation;
        sim.seed = seed;
        runs.push_back(std::async(std::launch::async, [&model, &scenario, algorithms = c.algorithms, sim] {
            return run(model, scenario, algorithms, sim);
        }));
    }
    CompareResult result;
    for (auto& f : runs) result.reports.push_back(f.get());

    double lowest = result.reports.front().total_energy_wh;
    for (const auto& r : result.reports) lowest = std::min(lowest, r.total_energy_wh);
    for (std::size_t i = 0; i < configs.size(); ++i) {
        const auto& r = result.reports[i];
        CompareRow row;
        row.name = configs[i].name;
        row.total_energy_wh = r.total_energy_wh;
        row.metered_energy_wh = r.metered_energy_wh;
        row.rejected_placements = r.rejected_placements;
        row.migrations = r.migrations;
        row.mean_instances = r.mean_instances();
        row.scaling_actions = r.scaling_actions;
        row.delta_wh = r.total_energy_wh - lowest;
        row.delta_percent = lowest > 0.0 ? 100.0 * row.delta_wh / lowest : 0.0;
        row.lowest_energy = r.total_energy_wh == lowest;
        result.rows.push_back(std::move(row));
    }
    return result;
}

std::string format_compare_table(const CompareResult& result) {
    std::size_t width = 6;
    for (const auto& r : result.rows) width = std::max(width, r.name.size());
    std::string out = fmt::format("{:<{}}  {:>14}  {:>10}  {:>10}  {:>14}  {:>14}  {:>12}  {:>8}\n", "config", width,
                                  "energy_wh", "rejected", "migrations", "mean_instances", "scaling_actions",
                                  "delta_wh", "delta_%");
    for (const auto& r : result.rows) {
        out += fmt::format("{:<{}}  {:>14.3f}  {:>10}  {:>10}  {:>14.3f}  {:>14}  {:>12.3f}  {:>8.2f}{}\n", r.name, width,
                           r.total_energy_wh, r.rejected_placements, r.migrations, r.mean_instances, r.scaling_actions,
                           r.delta_wh, r.delta_percent, r.lowest_energy ? "  *" : "");
    }
    out += "* lowest total energy\n";
    return out;
}

std::string compare_csv(const CompareResult& result) {
    using detail::format_double;
    std::string out =
        "config,total_energy_wh,metered_energy_wh,rejected_placements,migrations,mean_instances,scaling_actions,delta_wh,"
        "delta_percent,lowest_energy\n";
    for (const auto& r : result.rows) {
        out += r.name + ',' + format_double(r.total_energy_wh) + ',' + format_double(r.metered_energy_wh) + ',' +
               std::to_string(r.rejected_placements) + ',' + std::to_string(r.migrations) + ',' +
               format_double(r.mean_instances) + ',' + std::to_string(r.scaling_actions) + ',' + format_double(r.delta_wh) +
               ',' + format_double(r.delta_percent) + ',' + (r.lowest_energy ? "1" : "0") + '\n';
    }
    return out;
}

namespace {

bool verbose() {
    const char* v = std::getenv("DCSIM_LOG");
    return v && (std::string_view(v) == "info" || std::string_view(v) == "debug");
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    for (auto f : detail::split_fields(text))
        if (!f.empty()) out.emplace_back(f);
    return out;
}

struct SimulateArgs {
    std::string model, scenario, algorithms, sim_config, out;
    std::string placement, optimizer, autoscaler;
    bool power_manager = false;
    int spare_servers = 1;
    double end = 0, measurement_interval = 0, optimizer_interval = 0, autoscaler_interval = 0;
    double boot_latency = 0, placement_latency = 0, migration_bandwidth = 0, power_latency = 0;
    std::uint64_t seed = 0;
};

struct ExtractArgs {
    std::string metrics, events, model, servers, out;
    double from = 0, to = 0, resample_interval = 30.0;
    bool exclude_autoscaler = false;
};

struct FitArgs {
    std::string metrics, samples, server, family = "poly3", out;
    double from = 0, to = 0, bin_width = 0.01;
};

struct CompareArgs {
    std::vector<std::string> configs;
    std::string out;
    std::uint64_t seed = 0;
};

struct GenArgs {
    double peak = 100, duration = 41400, step = 5;
    int periods = 16;
    std::string noise = "-3:2", out;
    std::uint64_t seed = 42;
};

struct ErrorArgs {
    double measured = 0, predicted = 0;
};

int cmd_simulate(const SimulateArgs& a, const CLI::App& sub, std::ostream& out) {
    const auto model = load_model(a.model);
    const auto scenario = load_scenario(a.scenario);
    AlgorithmConfig algorithms;
    if (!a.algorithms.empty()) algorithms = parse_algorithm_config(detail::read_file(a.algorithms));
    if (sub.count("--placement")) algorithms.placement = a.placement;
    if (sub.count("--optimizer")) algorithms.optimizer = a.optimizer;
    if (sub.count("--autoscaler")) algorithms.autoscaler = a.autoscaler;
    if (sub.count("--power-manager")) algorithms.power_manager_enabled = a.power_manager;
    if (sub.count("--spare-servers")) algorithms.spare_servers = a.spare_servers;
    if (auto problem = algorithms.check(); !problem.empty()) throw InputError("algorithms: " + problem);

    SimConfig config;
    if (!a.sim_config.empty()) config = parse_sim_config(detail::read_file(a.sim_config));
    if (sub.count("--end")) config.end_time = a.end;
    if (sub.count("--measurement-interval")) config.measurement_interval = a.measurement_interval;
    if (sub.count("--optimizer-interval")) config.optimizer_interval = a.optimizer_interval;
    if (sub.count("--autoscaler-interval")) config.autoscaler_interval = a.autoscaler_interval;
    if (sub.count("--boot-latency")) config.boot_latency = a.boot_latency;
    if (sub.count("--placement-latency")) config.placement_decision_latency = a.placement_latency;
    if (sub.count("--migration-bandwidth")) config.migration_bandwidth = a.migration_bandwidth;
    if (sub.count("--power-latency")) config.power_transition_latency = a.power_latency;
    config.seed = a.seed;

    const auto report = run(model, scenario, algorithms, config);
    write_report(report, a.out);
    out << fmt::format("total energy: {:.3f} Wh ({} servers, {} VMs, {} rejected placements)\n", report.total_energy_wh,
                       report.servers.size(), report.vms.size(), report.rejected_placements);
    return 0;
}

int cmd_extract(const ExtractArgs& a, std::ostream& out, std::ostream& err) {
    const auto store = ingest_measurement_files(a.metrics, a.events);
    const auto model = load_model(a.model);
    ExtractOptions options;
    options.t0 = a.from;
    options.t1 = a.to;
    options.servers = split_list(a.servers);
    options.exclude_autoscaler = a.exclude_autoscaler;
    options.resample_interval = a.resample_interval;
    const auto result = extract_scenario(store, host_capacities(model), options);

    // Workloads go to one file per template next to the scenario.
    const std::filesystem::path scenario_path(a.out);
    const std::string workload_dir = scenario_path.stem().string() + ".workloads";
    auto doc = detail::parse_json(serialize_scenario(result.scenario), "scenario");
    if (doc.contains("templates")) {
        for (auto& [id, tpl] : doc["templates"].items()) {
            const auto relative = std::filesystem::path(workload_dir) / (id + ".json");
            write_text(scenario_path.parent_path() / relative, tpl["workload"].dump(2) + "\n");
            tpl.erase("workload");
            tpl["workload_file"] = relative.generic_string();
        }
    }
    write_text(scenario_path, doc.dump(2) + "\n");

    for (const auto& w : result.warnings) err << "warning: " << w << '\n';
    out << fmt::format("extracted {} VMs, skipped {}\n", result.extracted.size(), result.skipped.size());
    if (!result.skipped.empty()) {
        out << "skipped:\n";
        for (const auto& s : result.skipped) out << "  " << s << '\n';
    }
    return 0;
}

std::vector<PowerSample> read_samples_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path.string() + "'");
    std::vector<PowerSample> out;
    std::string line;
    std::size_t line_no = 0;
    if (!detail::next_line(in, line, line_no)) return out;
    if (detail::trim(line) != "utilization,power_w") throw InputError(path.string() + " line 1: expected header 'utilization,power_w'");
    while (detail::next_line(in, line, line_no)) {
        const auto f = detail::split_fields(line);
        const auto u = f.size() == 2 ? detail::parse_double(f[0]) : std::nullopt;
        const auto p = f.size() == 2 ? detail::parse_double(f[1]) : std::nullopt;
        if (!u || !p) throw InputError(path.string() + " line " + std::to_string(line_no) + ": malformed row");
        out.push_back({*u, *p});
    }
    return out;
}

int cmd_fit_power(const FitArgs& a, const CLI::App& sub, std::ostream& out, std::ostream& err) {
    const auto family = PowerFamily::parse(a.family);
    std::vector<PowerSample> samples;
    if (!a.samples.empty()) {
        samples = bin_power_samples(read_samples_csv(a.samples), a.bin_width);
    } else {
        if (a.metrics.empty() || a.server.empty())
            throw InputError("fit-power needs --samples, or --metrics with --server, --from and --to");
        if (!sub.count("--from") || !sub.count("--to")) throw InputError("fit-power on metrics needs --from and --to");
        if (!(a.from < a.to)) throw InputError("training window is empty: from must be < to");
        std::istringstream no_lifecycle;
        std::ifstream metrics(a.metrics, std::ios::binary);
        if (!metrics) throw InputError("cannot open metrics file " + a.metrics);
        auto store = ingest_measurements(metrics, no_lifecycle);
        std::erase_if(store.metrics, [&](const MetricRecord& m) { return m.timestamp < a.from || m.timestamp > a.to; });
        samples = clean_power_training_data(store, a.server, a.bin_width);
    }
    const auto fit = fit_power_model(samples, family);
    const auto text = serialize_fit(fit);
    if (a.out.empty()) out << text;
    else write_text(a.out, text);
    err << fmt::format("family {}: {} samples, residual RMS {:.6g} W{}\n", family.name(), fit.samples, fit.residual_rms,
                       fit.converged ? "" : " (iteration cap reached)");
    return 0;
}

int cmd_compare(const CompareArgs& a, std::ostream& out) {
    std::vector<CompareConfig> configs;
    for (const auto& path : a.configs) configs.push_back(load_compare_config(path));
    std::map<std::string, int> seen;
    for (auto& c : configs)
        if (++seen[c.name] > 1) c.name += "-" + std::to_string(seen[c.name]);
    const auto result = run_compare(configs, a.seed);
    if (!a.out.empty()) {
        const std::filesystem::path dir(a.out);
        for (std::size_t i = 0; i < configs.size(); ++i) write_report(result.reports[i], dir / configs[i].name);
        write_text(dir / "compare.csv", compare_csv(result));
    }
    out << format_compare_table(result);
    return 0;
}

int cmd_gen_workload(const GenArgs& a, std::ostream& out) {
    SeasonalWorkloadParams p;
    p.peak = a.peak;
    p.periods = a.periods;
    p.duration = a.duration;
    p.seed = a.seed;
    p.step = a.step;
    const auto colon = a.noise.find(':', a.noise.front() == '-' ? 1 : 0);
    const auto low = colon == std::string::npos ? std::nullopt : detail::parse_double(a.noise.substr(0, colon));
    const auto high = colon == std::string::npos ? std::nullopt : detail::parse_double(a.noise.substr(colon + 1));
    if (!low || !high || *low > *high) throw InputError("invalid noise range '" + a.noise + "', expected low:high with low <= high");
    p.noise_low = *low;
    p.noise_high = *high;
    std::string text = "time_s,rate\n";
    for (const auto& r : gen_seasonal_workload(p)) text += detail::format_double(r.time) + ',' + detail::format_double(r.rate) + '\n';
    if (a.out.empty()) out << text;
    else write_text(a.out, text);
    return 0;
}

int cmd_report_error(const ErrorArgs& a, std::ostream& out) {
    if (a.measured == 0.0) throw InputError("measured energy must be non-zero");
    out << fmt::format("{:.2f}%\n", 100.0 * relative_error(a.measured, a.predicted));
    return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Data-center simulation, model extraction and power-model training", "dcsim"};
    app.require_subcommand(1);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Run a simulation and write report files");
    simulate->add_option("--model", sim.model, "Data-center model JSON")->required();
    simulate->add_option("--scenario", sim.scenario, "Experiment scenario JSON")->required();
    simulate->add_option("--out", sim.out, "Output directory")->required();
    simulate->add_option("--algorithms", sim.algorithms, "Algorithm config JSON");
    simulate->add_option("--sim-config", sim.sim_config, "Simulation config JSON");
    simulate->add_option("--placement", sim.placement, "best-fit-ram | worst-fit-ram");
    simulate->add_option("--optimizer", sim.optimizer, "none | consolidation | load-balance");
    simulate->add_option("--autoscaler", sim.autoscaler, "none | react | reg");
    simulate->add_flag("--power-manager", sim.power_manager, "Enable the power manager");
    simulate->add_option("--spare-servers", sim.spare_servers, "Empty servers kept on by the power manager");
    simulate->add_option("--end", sim.end, "Simulated end time (s)");
    simulate->add_option("--measurement-interval", sim.measurement_interval, "Sampling interval (s)");
    simulate->add_option("--optimizer-interval", sim.optimizer_interval, "Optimizer interval (s)");
    simulate->add_option("--autoscaler-interval", sim.autoscaler_interval, "Autoscaler interval (s)");
    simulate->add_option("--boot-latency", sim.boot_latency, "VM boot latency (s)");
    simulate->add_option("--placement-latency", sim.placement_latency, "Placement decision latency (s)");
    simulate->add_option("--migration-bandwidth", sim.migration_bandwidth, "Migration bandwidth (MiB/s)");
    simulate->add_option("--power-latency", sim.power_latency, "Server power transition latency (s)");
    simulate->add_option("--seed", sim.seed, "Random seed");

    ExtractArgs ex;
    auto* extract = app.add_subcommand("extract", "Extract a scenario and workloads from measurements");
    extract->add_option("--metrics", ex.metrics, "Metric CSV")->required();
    extract->add_option("--events", ex.events, "Lifecycle CSV")->required();
    extract->add_option("--model", ex.model, "Data-center model JSON (host capacities)")->required();
    extract->add_option("--from", ex.from, "Window start (s)")->required();
    extract->add_option("--to", ex.to, "Window end (s)")->required();
    extract->add_option("--servers", ex.servers, "Comma-separated server ids (default: all)");
    extract->add_flag("--exclude-autoscaler", ex.exclude_autoscaler, "Drop autoscaler-initiated VMs");
    extract->add_option("--resample-interval", ex.resample_interval, "Workload segment length (s)");
    extract->add_option("--out", ex.out, "Scenario JSON to write")->required();

    FitArgs fit;
    auto* fit_power = app.add_subcommand("fit-power", "Train a server power model");
    fit_power->add_option("--samples", fit.samples, "CSV 'utilization,power_w'");
    fit_power->add_option("--metrics", fit.metrics, "Metric CSV");
    fit_power->add_option("--server", fit.server, "Server id in the metric CSV");
    fit_power->add_option("--from", fit.from, "Training window start (s)");
    fit_power->add_option("--to", fit.to, "Training window end (s)");
    fit_power->add_option("--family", fit.family, "poly<d> or poly<d>+exp");
    fit_power->add_option("--bin-width", fit.bin_width, "Utilization bin width");
    fit_power->add_option("--out", fit.out, "Power model JSON (default: stdout)");

    CompareArgs cmp;
    auto* compare = app.add_subcommand("compare", "Compare algorithm configurations");
    compare->add_option("configs", cmp.configs, "Configuration JSON files")->required()->expected(2, -1);
    compare->add_option("--seed", cmp.seed, "Shared random seed");
    compare->add_option("--out", cmp.out, "Directory for per-configuration reports and compare.csv");

    GenArgs gen;
    auto* gen_workload = app.add_subcommand("gen-workload", "Generate a seasonal request-rate series");
    gen_workload->add_option("--peak", gen.peak, "Peak rate");
    gen_workload->add_option("--periods", gen.periods, "Number of seasonal periods");
    gen_workload->add_option("--duration", gen.duration, "Duration (s)");
    gen_workload->add_option("--noise", gen.noise, "Uniform noise range low:high");
    gen_workload->add_option("--seed", gen.seed, "Random seed");
    gen_workload->add_option("--step", gen.step, "Sampling step (s)");
    gen_workload->add_option("--out", gen.out, "CSV to write (default: stdout)");

    ErrorArgs er;
    auto* report_error = app.add_subcommand("report-error", "Relative energy error in percent");
    report_error->add_option("--measured", er.measured, "Measured energy")->required();
    report_error->add_option("--predicted", er.predicted, "Predicted energy")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return 2;
    }

    try {
        if (verbose()) err << "dcsim: running " << app.get_subcommands().front()->get_name() << '\n';
        if (*simulate) return cmd_simulate(sim, *simulate, out);
        if (*extract) return cmd_extract(ex, out, err);
        if (*fit_power) return cmd_fit_power(fit, *fit_power, out, err);
        if (*compare) return cmd_compare(cmp, out);
        if (*gen_workload) return cmd_gen_workload(gen, out);
        if (*report_error) return cmd_report_error(er, out);
    } catch (const InputError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

}  // namespace dcsim
