#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "builders.hpp"
#include "dcsim/cli.hpp"
#include "dcsim/extraction.hpp"

using namespace dcsim;
using namespace dcsim::test;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = 0;
    std::string out;
    std::string err;
};

Outcome cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dcsim");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void put(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

struct Workspace {
    fs::path dir;
    explicit Workspace(const std::string& name) : dir(fs::temp_directory_path() / ("dcsim_cli_" + name)) {
        fs::remove_all(dir);
        fs::create_directories(dir);
        put(dir / "model.json", serialize_model(model_of({server("s1", 4, 2.5, 16384), server("s2", 4, 2.5, 16384)})));
        put(dir / "scenario.json", serialize_scenario(start_stop_scenario()));
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string operator/(const std::string& f) const { return (dir / f).string(); }
};

}  // namespace

TEST_CASE("relative_error") {
    CHECK(relative_error(100, 90) == doctest::Approx(0.1));
    CHECK(relative_error(100, 110) == doctest::Approx(0.1));
    CHECK(relative_error(50, 50) == 0.0);
    CHECK_THROWS_AS(relative_error(0, 1), std::invalid_argument);
}

TEST_CASE("report-error prints a percentage") {
    const auto r = cli({"report-error", "--measured", "6.84", "--predicted", "6.8667"});
    CHECK(r.code == 0);
    CHECK(r.out == "0.39%\n");
    CHECK(cli({"report-error", "--measured", "0", "--predicted", "1"}).code == 2);
}

TEST_CASE("usage errors exit with 2") {
    CHECK(cli({}).code == 2);
    CHECK(cli({"launch"}).code == 2);
    CHECK(cli({"simulate", "--model", "m.json"}).code == 2);
    CHECK(cli({"report-error", "--measured", "x", "--predicted", "1"}).code == 2);
    CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("simulate writes the report and is deterministic") {
    Workspace ws("simulate");
    const std::vector<std::string> common{"simulate", "--model", ws / "model.json", "--scenario", ws / "scenario.json",
                                          "--end", "5400", "--seed", "7"};
    auto a = common, b = common;
    a.insert(a.end(), {"--out", ws / "a"});
    b.insert(b.end(), {"--out", ws / "b"});
    const auto ra = cli(a);
    REQUIRE_MESSAGE(ra.code == 0, ra.err);
    REQUIRE(cli(b).code == 0);
    for (const char* f : {"utilization.csv", "power.csv", "summary.csv", "actions.csv", "autoscaler.csv", "vms.csv",
                          "metrics.csv", "lifecycle.csv", "report.json"}) {
        CHECK_MESSAGE(fs::exists(ws.dir / "a" / f), f);
        CHECK_MESSAGE(slurp(ws.dir / "a" / f) == slurp(ws.dir / "b" / f), f);
    }
    CHECK(slurp(ws.dir / "a" / "summary.csv").find("TOTAL") != std::string::npos);
}

TEST_CASE("simulate reports missing and invalid inputs") {
    Workspace ws("simulate_bad");
    const auto missing = cli({"simulate", "--model", ws / "model.json", "--scenario", ws / "nope.json", "--out", ws / "o"});
    CHECK(missing.code == 2);
    CHECK(missing.err.find("nope.json") != std::string::npos);

    auto s = start_stop_scenario();
    s.events[1].trigger = RelativeTo{"e99", 10};
    put(ws.dir / "dangling.json", serialize_scenario(s));
    const auto dangling = cli({"simulate", "--model", ws / "model.json", "--scenario", ws / "dangling.json", "--out", ws / "o"});
    CHECK(dangling.code == 2);
    CHECK(dangling.err.find("e99") != std::string::npos);

    CHECK(cli({"simulate", "--model", ws / "model.json", "--scenario", ws / "scenario.json", "--out", ws / "o",
               "--placement", "random-fit"})
              .code == 2);
}

TEST_CASE("extract turns a simulated run back into a scenario") {
    Workspace ws("extract");
    REQUIRE(cli({"simulate", "--model", ws / "model.json", "--scenario", ws / "scenario.json", "--out", ws / "run",
                 "--end", "5400"})
                .code == 0);
    const auto r = cli({"extract", "--metrics", ws / "run/metrics.csv", "--events", ws / "run/lifecycle.csv", "--model",
                        ws / "model.json", "--from", "0", "--to", "5400", "--out", ws / "x/scenario.json"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("extracted 1 VMs, skipped 0") != std::string::npos);
    const auto scenario = load_scenario(ws.dir / "x" / "scenario.json");
    REQUIRE(scenario.events.size() == 2);
    CHECK(std::get<AbsoluteTime>(scenario.events[0].trigger).time == doctest::Approx(1747));
    CHECK(std::get<RelativeTo>(scenario.events[1].trigger).offset == doctest::Approx(1780));
    CHECK(fs::exists(ws.dir / "x" / "scenario.workloads" / "tpl-vm1.json"));

    const auto empty = cli({"extract", "--metrics", ws / "run/metrics.csv", "--events", ws / "run/lifecycle.csv", "--model",
                            ws / "model.json", "--from", "0", "--to", "100", "--out", ws / "y/scenario.json"});
    CHECK(empty.code == 0);
    CHECK(empty.err.find("warning") != std::string::npos);
    CHECK(load_scenario(ws.dir / "y" / "scenario.json").events.empty());

    CHECK(cli({"extract", "--metrics", ws / "run/metrics.csv", "--events", ws / "run/lifecycle.csv", "--model",
               ws / "model.json", "--from", "100", "--to", "100", "--out", ws / "z.json"})
              .code == 2);
}

TEST_CASE("extract lists VMs it cannot model") {
    Workspace ws("extract_skip");
    put(ws.dir / "m.csv", "timestamp_s,entity_kind,entity_id,metric,value\n");
    put(ws.dir / "l.csv", "timestamp_s,vm_id,event,host_id,flavor_vcpus,flavor_ram_mib,initiator\n"
                          "10,quiet,submitted,,1,512,tenant\n10,quiet,started,s1,1,512,tenant\n");
    const auto r = cli({"extract", "--metrics", ws / "m.csv", "--events", ws / "l.csv", "--model", ws / "model.json",
                        "--from", "0", "--to", "100", "--out", ws / "s.json"});
    CHECK(r.code == 0);
    CHECK(r.out.find("skipped 1") != std::string::npos);
    CHECK(r.out.find("quiet") != std::string::npos);
}

TEST_CASE("fit-power from samples and from metrics") {
    Workspace ws("fit");
    std::string csv = "utilization,power_w\n";
    for (int i = 0; i <= 10; ++i) {
        const double u = i / 10.0;
        csv += std::to_string(u) + "," + std::to_string(eval_power(cubic_power(), u)) + "\n";
    }
    put(ws.dir / "samples.csv", csv);
    const auto r = cli({"fit-power", "--samples", ws / "samples.csv", "--out", ws / "pm.json"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    const auto pm = parse_power_model(slurp(ws.dir / "pm.json"));
    for (std::size_t i = 0; i < 4; ++i) CHECK(pm.coefficients[i] == doctest::Approx(cubic_power().coefficients[i]).epsilon(1e-6));

    const auto stdout_fit = cli({"fit-power", "--samples", ws / "samples.csv"});
    CHECK_NOTHROW(parse_power_model(stdout_fit.out));

    put(ws.dir / "few.csv", "utilization,power_w\n0.1,80\n0.9,120\n");
    const auto few = cli({"fit-power", "--samples", ws / "few.csv"});
    CHECK(few.code == 2);
    CHECK(few.err.find("underdetermined") != std::string::npos);

    REQUIRE(cli({"simulate", "--model", ws / "model.json", "--scenario", ws / "scenario.json", "--out", ws / "run",
                 "--end", "5400"})
                .code == 0);
    const auto from_metrics = cli({"fit-power", "--metrics", ws / "run/metrics.csv", "--server", "s1", "--from", "0",
                                   "--to", "5400", "--family", "poly1"});
    CHECK_MESSAGE(from_metrics.code == 0, from_metrics.err);
    CHECK(cli({"fit-power", "--metrics", ws / "run/metrics.csv", "--server", "s1"}).code == 2);
    CHECK(cli({"fit-power", "--samples", ws / "samples.csv", "--family", "spline"}).code == 2);
}

TEST_CASE("compare runs configurations side by side") {
    Workspace ws("compare");
    put(ws.dir / "a.json", R"({"name": "base", "model": "model.json", "scenario": "scenario.json",
                              "simulation": {"end": 5400}})");
    put(ws.dir / "b.json", R"({"name": "worst", "model": "model.json", "scenario": "scenario.json",
                              "algorithms": {"placement": "worst-fit-ram"}, "simulation": {"end": 5400}})");
    const auto r = cli({"compare", ws / "a.json", ws / "b.json", "--seed", "3", "--out", ws / "cmp"});
    REQUIRE_MESSAGE(r.code == 0, r.err);
    CHECK(r.out.find("base") != std::string::npos);
    CHECK(r.out.find("worst") != std::string::npos);
    CHECK(fs::exists(ws.dir / "cmp" / "compare.csv"));
    CHECK(fs::exists(ws.dir / "cmp" / "base" / "summary.csv"));

    // Identical configurations give identical rows.
    const auto same = run_compare({load_compare_config(ws.dir / "a.json"), load_compare_config(ws.dir / "a.json")}, 3);
    CHECK(same.rows[0].total_energy_wh == same.rows[1].total_energy_wh);
    CHECK(same.rows[0].delta_wh == 0.0);

    put(ws.dir / "other_model.json", slurp(ws.dir / "model.json"));
    put(ws.dir / "c.json", R"({"model": "other_model.json", "scenario": "scenario.json"})");
    const auto mismatch = cli({"compare", ws / "a.json", ws / "c.json"});
    CHECK(mismatch.code == 2);
    CHECK(cli({"compare", ws / "a.json"}).code == 2);
}

TEST_CASE("compare rows follow argument order") {
    Workspace ws("compare_order");
    put(ws.dir / "a.json", R"({"name": "a", "model": "model.json", "scenario": "scenario.json", "simulation": {"end": 5400}})");
    put(ws.dir / "b.json", R"({"name": "b", "model": "model.json", "scenario": "scenario.json",
                              "algorithms": {"optimizer": "consolidation", "power_manager_enabled": true, "spare_servers": 0},
                              "simulation": {"end": 5400}})");
    const auto a = load_compare_config(ws.dir / "a.json");
    const auto b = load_compare_config(ws.dir / "b.json");
    const auto ab = run_compare({a, b}, 1);
    const auto ba = run_compare({b, a}, 1);
    CHECK(ab.rows[0].name == "a");
    CHECK(ba.rows[0].name == "b");
    CHECK(ab.rows[0].total_energy_wh == ba.rows[1].total_energy_wh);
    CHECK(ab.rows[0].delta_wh == ba.rows[1].delta_wh);
    CHECK(ab.rows[1].lowest_energy == ba.rows[0].lowest_energy);
}

TEST_CASE("gen-workload") {
    const auto r = cli({"gen-workload", "--seed", "5"});
    REQUIRE(r.code == 0);
    CHECK(r.out.rfind("time_s,rate\n", 0) == 0);
    CHECK(r.out == cli({"gen-workload", "--seed", "5"}).out);
    CHECK(r.out != cli({"gen-workload", "--seed", "6"}).out);

    const auto flat = cli({"gen-workload", "--periods", "1", "--noise", "0:0", "--peak", "100", "--duration", "100",
                           "--step", "50"});
    CHECK(flat.out == "time_s,rate\n0,0\n50,100\n");
    CHECK(cli({"gen-workload", "--noise", "3:1"}).code == 2);
    CHECK(cli({"gen-workload", "--noise", "abc"}).code == 2);
}
