#include <doctest.h>

#include <filesystem>

#include "pkgain/norms.hpp"
#include "pkgain/scenario.hpp"
#include "support.hpp"

using namespace testing;

namespace {

std::string scenario_path(const std::string& name) { return std::string(PKGAIN_SCENARIO_DIR) + "/" + name; }

Json minimal() {
    return Json{{"schema_version", 1},
                {"name", "tiny"},
                {"plants", {{"G", {{"A", {{-1.0}}}, {"B", {{1.0}}}, {"C", {{1.0}}}, {"D", {{0.0}}}}}}}};
}

}  // namespace

TEST_CASE("every bundled scenario loads and its norm queries evaluate") {
    int count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(PKGAIN_SCENARIO_DIR)) {
        if (entry.path().extension() != ".scn") continue;
        CAPTURE(entry.path().string());
        const Scenario sc = read_scenario(entry.path().string());
        for (const auto& name : sc.plant_names()) CHECK_NOTHROW((void)sc.plant(name));
        for (const auto& [kind, q] : sc.norm_queries()) {
            const System G = channel(sc.plant(q.plant), q.sel);
            CHECK(std::isfinite(kind == "hinf" ? hinf_norm(G).value : peak_gain_norm(G).value));
        }
        if (sc.has_simulation()) CHECK_NOTHROW((void)sc.loop(sc.simulation(), std::nullopt));
        ++count;
    }
    CHECK(count == 5);
}

TEST_CASE("example7 scenario reproduces the reference norms") {
    Scenario sc = read_scenario(scenario_path("example7.scn"));
    const auto q = sc.norm_queries();
    auto pk = [&] { return peak_gain_norm(channel(sc.plant(q.at("pkgn").plant), q.at("pkgn").sel), 1e-6).value; };
    auto hi = [&] { return hinf_norm(channel(sc.plant(q.at("hinf").plant), q.at("hinf").sel)).value; };
    CHECK(pk() == doctest::Approx(0.9988).epsilon(0.005 / 0.9988));
    CHECK(hi() == doctest::Approx(1.2597).epsilon(0.005 / 1.2597));
    sc.set_parameter("rho", 0.434);
    CHECK(pk() == doctest::Approx(0.8687).epsilon(0.005 / 0.8687));
    CHECK(hi() == doctest::Approx(0.9995).epsilon(0.005 / 0.9995));
}

TEST_CASE("derived plants match hand-built systems") {
    Scenario sc = read_scenario(scenario_path("example7.scn"));
    for (double rho : {0.434, 0.499}) {
        sc.set_parameter("rho", rho);
        const System Gt = channel(sc.plant("G_tilde"), {"p", "q"});
        const System Gh = channel(sc.plant("G_hat"), {"p", "q"});
        const double w = 0.7;
        CHECK(max_abs_diff(freq_response(Gt, w), freq_response(example7_tilde(rho), w)) < 1e-12);
        CHECK(max_abs_diff(freq_response(Gh, w), freq_response(example7_hat(rho), w)) < 1e-12);
    }

    const Scenario mimo = read_scenario(scenario_path("mimo_attractor.scn"));
    REQUIRE(mimo.fixed_controller());
    const System K = *mimo.fixed_controller();
    const System ref = kstar_fixture();
    for (double w : {0.3, 3.0, 100.0}) CHECK(max_abs_diff(freq_response(K, w), freq_response(ref, w)) < 1e-9);
    const double pk = peak_gain_norm(channel(mimo.plant("H_tilde_Kstar"), {"p", "q"})).value;
    CHECK(pk == doctest::Approx(5.34).epsilon(0.1 / 5.34));

    const Scenario two = read_scenario(scenario_path("two_attractor.scn"));
    Plant H0 = delta_plant(attractor_A());
    MatrixXd shift = MatrixXd::Zero(3, 3);
    shift(0, 2) = 0.3;
    H0 = sector_shift(H0, shift);
    CHECK(max_abs_diff(freq_response(channel(two.plant("H0"), {"p", "q"}), 1.1), freq_response(channel(H0, {"p", "q"}), 1.1)) <
          1e-12);
}

TEST_CASE("schema validation") {
    CHECK_NOTHROW(Scenario{minimal()});

    Json j = minimal();
    j["schema_version"] = 2;
    CHECK_THROWS_AS(Scenario{j}, SchemaError);

    j = minimal();
    j["colour"] = "blue";
    CHECK_THROWS_AS(Scenario{j}, SchemaError);

    j = minimal();
    j.erase("plants");
    CHECK_THROWS_AS(Scenario{j}, SchemaError);

    j = minimal();
    j["plants"]["H"] = {{"from", "G"}, {"ops", {{{"rotate", 1}}}}};
    CHECK_THROWS_AS((void)Scenario(j).plant("H"), SchemaError);

    j = minimal();
    j["plants"]["H"] = {{"from", "missing"}, {"ops", Json::array()}};
    CHECK_THROWS_AS((void)Scenario(j).plant("H"), SchemaError);

    j = minimal();
    j["plants"]["H"] = {{"from", "H"}, {"ops", Json::array()}};
    CHECK_THROWS_AS((void)Scenario(j).plant("H"), SchemaError);

    j = minimal();
    j["parameters"] = {{"k", 2.0}};
    j["plants"]["H"] = {{"from", "G"}, {"ops", {{{"scale_output", "out"}, {"by", "kk"}}}}};
    CHECK_THROWS_AS((void)Scenario(j).plant("H"), SchemaError);

    j = minimal();
    j["plants"]["H"] = {{"from", "G"}, {"ops", {{{"scale_output", "out"}}}}};
    CHECK_THROWS_AS((void)Scenario(j).plant("H"), SchemaError);

    j = minimal();
    j["controller"] = {{"structure", {{"kind", "pid"}}}, {"initial", {1.0, 2.0}}};
    CHECK_THROWS_AS(Scenario{j}, SchemaError);

    Scenario ok(minimal());
    CHECK_THROWS_AS(ok.set_parameter("nope", 1.0), SchemaError);
    CHECK_THROWS_AS((void)ok.program("h2h"), SchemaError);
}

TEST_CASE("parameters feed derived plants") {
    Json j = minimal();
    j["parameters"] = {{"k", 2.0}};
    j["plants"]["H"] = {{"from", "G"}, {"ops", {{{"scale_output", "out"}, {"by", "k"}}}}};
    Scenario sc(j);
    auto dc = [&] { return freq_response(sc.plant("H").sys, 0.0)(0, 0).real(); };
    CHECK(dc() == doctest::Approx(2.0));
    sc.set_parameter("k", -3.0);
    CHECK(dc() == doctest::Approx(-3.0));
}
