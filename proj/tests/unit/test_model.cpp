#include <doctest.h>

#include <cmath>

#include "builders.hpp"
#include "dcsim/model.hpp"
#include "dcsim/power_model.hpp"

using namespace dcsim;
using dcsim::test::model_of;
using dcsim::test::running_vm;
using dcsim::test::server;
using dcsim::test::trace;

TEST_CASE("validate: two servers and no VMs is valid") {
    auto m = model_of({server("a", 4, 2.5, 8192), server("b", 4, 2.5, 8192)});
    CHECK(validate(m).empty());
}

TEST_CASE("validate: initial VM larger than its host") {
    auto m = model_of({server("small", 4, 2.5, 4096)});
    m.initial_vms.push_back(running_vm("vm1", 8192, "small", trace({{10, 1}})));
    const auto problems = validate(m);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("small") != std::string::npos);
}

TEST_CASE("validate: dangling power model reference") {
    auto m = model_of({server("a", 4, 2.5, 8192)});
    m.servers[0].power_model_id = "pm-x";
    const auto problems = validate(m);
    REQUIRE(problems.size() == 1);
    CHECK(problems[0].find("pm-x") != std::string::npos);
}

TEST_CASE("validate: duplicate ids and non-positive capacities") {
    auto m = model_of({server("a", 4, 2.5, 8192), server("a", 0, 2.5, 8192)});
    CHECK(validate(m).size() >= 2);
}

TEST_CASE("host_capacity") {
    CHECK(host_capacity(server("a", 4, 2.5, 1)) == doctest::Approx(10.0));
    CHECK(host_capacity(server("a", 1, 1.0, 1)) == doctest::Approx(1.0));
    CHECK(host_capacity(server("a", 16, 2.0, 1)) == doctest::Approx(32.0));
}

TEST_CASE("free_ram") {
    const auto s16 = server("a", 1, 1, 16384);
    std::vector<VmInstance> two{running_vm("x", 4096, "a", {}), running_vm("y", 2048, "a", {})};
    CHECK(free_ram(s16, two) == 10240);
    CHECK(free_ram(server("b", 1, 1, 8192), {}) == 8192);
    std::vector<VmInstance> full{running_vm("x", 4096, "b", {}), running_vm("y", 4096, "b", {})};
    CHECK(free_ram(server("b", 1, 1, 8192), full) == 0);
}

TEST_CASE("model JSON round-trip") {
    auto m = model_of({server("a", 4, 2.5, 16384), server("b", 8, 1.5, 32768)});
    m.servers[1].has_power_meter = false;
    m.servers[1].idle_off_power = 4.5;
    m.initial_vms.push_back(running_vm("vm1", 4096, "a", trace({{100, 4}, {50, 0}})));
    m.initial_power_states["b"] = PowerState::Off;
    m.power_models["exp"] = PowerModel{{PowerFamilyKind::PolynomialPlusExponential, 1}, {40, 90, 10, 2}};
    CHECK(parse_model(serialize_model(m)) == m);
}

TEST_CASE("model JSON rejects unknown keys and malformed values") {
    CHECK_THROWS_AS(parse_model(R"({"servers": [], "extra": 1})"), InputError);
    CHECK_THROWS_AS(parse_model(R"({"servers": [{"id": "a"}]})"), InputError);
    CHECK_THROWS_AS(parse_model("{not json"), InputError);
    CHECK_THROWS_AS(
        parse_model(R"({"servers": [{"id":"a","cores":1,"core_speed":1,"ram_capacity":1,"power_model_id":"p","has_power_meter":"yes"}]})"),
        InputError);
}

TEST_CASE("eval_power on the cubic model") {
    const auto pm = test::cubic_power();
    CHECK(eval_power(pm, 0.0) == doctest::Approx(80.0));
    CHECK(eval_power(pm, 1.0) == doctest::Approx(145.0));
    CHECK(eval_power(pm, 0.5) == doctest::Approx(108.125));
    CHECK_THROWS_AS(eval_power(pm, 1.5), std::domain_error);
    CHECK_THROWS_AS(eval_power(pm, -0.1), std::domain_error);
}

TEST_CASE("eval_power with an exponential term keeps P(0) at the constant") {
    const PowerModel pm{{PowerFamilyKind::PolynomialPlusExponential, 1}, {40, 90, 10, 2}};
    CHECK(eval_power(pm, 0.0) == doctest::Approx(90.0));
    CHECK(eval_power(pm, 1.0) == doctest::Approx(40 + 90 + 10 * (std::exp(2.0) - 1)));
}

TEST_CASE("power family names") {
    CHECK(PowerFamily::parse("poly3") == PowerFamily{PowerFamilyKind::Polynomial, 3});
    CHECK(PowerFamily::parse("poly1+exp") == PowerFamily{PowerFamilyKind::PolynomialPlusExponential, 1});
    CHECK(PowerFamily::parse("poly2+exp").coefficient_count() == 5);
    CHECK(PowerFamily{PowerFamilyKind::Polynomial, 3}.name() == "poly3");
    CHECK_THROWS(PowerFamily::parse("cubic"));
    CHECK_THROWS(PowerFamily::parse("poly0"));
}

TEST_CASE("black-box trace totals") {
    const auto t = trace({{100, 4}, {100, 8}, {20, 0}});
    CHECK(t.total_work() == doctest::Approx(1200));
    CHECK(t.nominal_duration() == doctest::Approx(220));
}

TEST_CASE("open request load holds each rate until the next point") {
    OpenRequestLoad l{{{0, 5}, {10, 7}, {20, 1}}, 12};
    CHECK(l.rate_at(0) == 5);
    CHECK(l.rate_at(9.99) == 5);
    CHECK(l.rate_at(10) == 7);
    CHECK(l.rate_at(100) == 1);
}
