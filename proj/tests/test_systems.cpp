#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "aatk/systems.hpp"

using namespace aatk;
using systems::SystemDefinition;

namespace {

Vec pt(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

}  // namespace

TEST_CASE("every builtin parses, compiles and passes involution on 100 points") {
    std::mt19937 rng(2024);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (const auto& name : systems::builtin_names()) {
        const SystemDefinition def = systems::builtin(name);
        const HamiltonianSystem S = systems::make_system(def);
        CHECK(S.k() <= S.n());
        std::vector<Vec> samples;
        for (int i = 0; i < 100; ++i) {
            Vec z(S.dim());
            for (int c = 0; c < S.dim(); ++c) z[c] = u(rng);
            if (name == "kepler_planar") {
                // keep samples away from the collision
                if (std::hypot(z[0], z[1]) < 0.4) {
                    --i;
                    continue;
                }
            }
            samples.push_back(z);
        }
        const auto rep = check_involution(S.model(), S.integrals(), samples, 1e-8);
        INFO(name, " worst bracket ", rep.worst);
        CHECK(rep.pass);
    }
}

TEST_CASE("parsed gradients match finite differences for every builtin") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> u(0.4, 1.6);
    for (const auto& name : systems::builtin_names()) {
        const SystemDefinition def = systems::builtin(name);
        const HamiltonianSystem S = systems::make_system(def);
        for (int i = 0; i < 20; ++i) {
            Vec z(S.dim());
            for (int c = 0; c < S.dim(); ++c) z[c] = u(rng);
            for (int f = 0; f < S.k(); ++f)
                CHECK(gradient_fd_residual(S.integrals()[f], z) < 1e-6);
        }
    }
}

TEST_CASE("builtin metadata") {
    CHECK(systems::builtin("oscillator1d").meta.expected_m == 1);
    CHECK(systems::builtin("free1d").meta.expected_m == 0);
    CHECK(systems::builtin("osc_free").meta.expected_m == 1);
    CHECK(systems::builtin("kepler_planar").meta.expected_m == 2);
    CHECK(systems::builtin("partial_momentum").k() == 1);
    CHECK(systems::builtin("partial_momentum").n == 2);
    CHECK(systems::builtin("driven_osc_extended").k() == 1);
    CHECK_THROWS_AS(systems::builtin("nope"), InvalidInputError);
}

TEST_CASE("structured text definition round trip") {
    const char* text =
        "# a test system\n"
        "name: osc2\n"
        "n: 2\n"
        "integral: H = (p1^2 + q1^2)/2\n"
        "integral: F = p2\n"
        "region: q2 in [-3, 3]\n"
        "meta: expected_m = 1\n"
        "meta: period = 6.2831853\n";
    const SystemDefinition def = systems::parse_system(text);
    CHECK(def.name == "osc2");
    CHECK(def.n == 2);
    CHECK(def.k() == 2);
    CHECK(def.labels[0] == "H");
    CHECK(def.meta.expected_m == 1);
    CHECK(def.meta.values.at("period") == doctest::Approx(6.2831853));
    REQUIRE(def.region.has_value());
    CHECK(def.region->lo[1] == -3.0);
    CHECK(def.region->hi[1] == 3.0);
    CHECK(std::isinf(def.region->lo[0]));

    const HamiltonianSystem S = systems::make_system(def);
    CHECK(S.level(pt({1.0, 0.0, 0.0, 0.7}))[0] == doctest::Approx(0.5));
    CHECK(S.level(pt({1.0, 0.0, 0.0, 0.7}))[1] == doctest::Approx(0.7));
}

TEST_CASE("JSON mirror definition") {
    const char* text = R"json({
      "name": "jsys",
      "n": 1,
      "integrals": ["H = p1^2/2 - cos(q1)"],
      "region": {"q1": [-3.0, 3.0]},
      "meta": {"expected_m": 1}
    })json";
    const SystemDefinition def = systems::parse_system(text);
    CHECK(def.name == "jsys");
    CHECK(def.k() == 1);
    CHECK(def.meta.expected_m == 1);
    const HamiltonianSystem S = systems::make_system(def);
    CHECK(S.level(pt({0.0, 1.0}))[0] == doctest::Approx(-0.5));
}

TEST_CASE("definition errors carry positions and reasons") {
    CHECK_THROWS_AS(systems::parse_system("name: x\nn: 1\nintegral: H = (p1^2\n"),
                    InvalidInputError);
    try {
        systems::parse_system("name: x\nn: 1\nintegral: H = (p1^2\n");
    } catch (const InvalidInputError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    // out-of-range variable
    CHECK_THROWS_AS(systems::parse_system("name: x\nn: 1\nintegral: F1 = p1*q2\n"),
                    InvalidInputError);
    // k > n
    CHECK_THROWS_AS(
        systems::parse_system("name: x\nn: 1\nintegral: A = q1\nintegral: B = p1\n"
                              "integral: C = q1*p1\n"),
        InvalidInputError);
    // missing fields
    CHECK_THROWS_AS(systems::parse_system("n: 1\nintegral: H = q1\n"),
                    InvalidInputError);
    // bad JSON
    CHECK_THROWS_AS(systems::parse_system("{ not json"), InvalidInputError);
}

TEST_CASE("file loading") {
    const std::string path = "test_system_tmp.txt";
    {
        std::ofstream out(path);
        out << "name: filetest\nn: 1\nintegral: H = (p1^2 + q1^2)/2\n";
    }
    const SystemDefinition def = systems::load_file(path);
    CHECK(def.name == "filetest");
    std::remove(path.c_str());
    CHECK_THROWS_AS(systems::load_file("does_not_exist.txt"), InvalidInputError);
}

TEST_CASE("canonical text fingerprint is stable") {
    const auto a = systems::builtin("oscillator1d").canonical_text();
    const auto b = systems::builtin("oscillator1d").canonical_text();
    CHECK(a == b);
    CHECK(a != systems::builtin("free1d").canonical_text());
    CHECK(fnv1a64(a) == fnv1a64(b));
}
