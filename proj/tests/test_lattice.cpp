#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "aatk/lattice.hpp"
#include "aatk/systems.hpp"
#include "oracles.hpp"

using namespace aatk;

namespace {

Vec pt(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

Vec scalar(double x) { return pt({x}); }

HamiltonianSystem sys(const char* name) {
    return systems::make_system(systems::builtin(name));
}

}  // namespace

TEST_CASE("free particle has no recurrences") {
    const auto S = sys("free1d");
    FlowConfig cfg;
    const auto found = detect_recurrences(S, pt({0.0, 1.0}), scalar(-10), scalar(10),
                                          1e-7, 24, cfg);
    CHECK(found.empty());
    const auto L = lattice_from_returns(1, found, 1e-7);
    CHECK(L.m == 0);
    CHECK(L.a_indices == VecI{0});
}

TEST_CASE("oscillator recurrences are +-2pi, lattice rank 1") {
    const auto S = sys("oscillator1d");
    FlowConfig cfg;
    const auto found = detect_recurrences(S, pt({1.0, 0.0}), scalar(-10), scalar(10),
                                          1e-7, 24, cfg);
    REQUIRE(found.size() == 2);
    CHECK(std::fabs(std::fabs(found[0][0]) - TWO_PI) < 1e-9);
    CHECK(std::fabs(std::fabs(found[1][0]) - TWO_PI) < 1e-9);
    const auto L = lattice_from_returns(1, found, 1e-7);
    CHECK(L.m == 1);
    CHECK(L.generators(0, 0) == doctest::Approx(TWO_PI).epsilon(1e-9));
    CHECK(L.i_indices == VecI{0});
    CHECK(L.det_C() == doctest::Approx(TWO_PI));
}

TEST_CASE("oscillator + free particle: only multiples of (2pi, 0)") {
    const auto S = sys("osc_free");
    FlowConfig cfg;
    const Vec z0 = pt({1.0, 0.0, 0.0, 1.0});
    const auto found = detect_recurrences(S, z0, pt({-10.0, -10.0}), pt({10.0, 10.0}),
                                          1e-7, 16, cfg);
    REQUIRE(!found.empty());
    for (const Vec& s : found) {
        CHECK(std::fabs(s[1]) < 1e-8);
        const double ratio = s[0] / TWO_PI;
        CHECK(std::fabs(ratio - std::round(ratio)) < 1e-8);
    }
    const auto L = lattice_from_returns(2, found, 1e-7);
    CHECK(L.m == 1);
    CHECK(L.generators.col(0).isApprox(pt({TWO_PI, 0.0}), 1e-8));
    CHECK(L.i_indices == VecI{0});
    CHECK(L.a_indices == VecI{1});
}

TEST_CASE("refine_return: oscillator period and fixed point") {
    const auto S = sys("oscillator1d");
    FlowConfig cfg;
    const Vec z0 = pt({1.0, 0.0});
    const Vec refined = refine_return(S, z0, scalar(6.3), cfg);
    CHECK(refined[0] == doctest::Approx(TWO_PI).epsilon(1e-11));
    const Vec again = refine_return(S, z0, refined, cfg);
    CHECK(std::fabs(again[0] - refined[0]) < 1e-12);
}

TEST_CASE("refine_return: pendulum libration period matches quadrature oracle") {
    const auto S = sys("pendulum");
    FlowConfig cfg;
    cfg.tolerance = 1e-13;
    const Vec z0 = pt({0.0, 1.0});  // E = -0.5
    const double T_oracle = oracles::pendulum_period_quadrature(-0.5);
    CHECK(std::fabs(T_oracle - oracles::pendulum_period_elliptic(-0.5)) < 1e-12);
    const Vec refined = refine_return(S, z0, scalar(6.7), cfg);
    CHECK(std::fabs(refined[0] - T_oracle) < 1e-8);
}

TEST_CASE("lattice reduction: gcd-like collapse and closure failure") {
    const auto L1 = lattice_from_returns(
        1, {scalar(TWO_PI), scalar(-TWO_PI), scalar(2 * TWO_PI)}, 1e-9);
    CHECK(L1.m == 1);
    CHECK(L1.generators(0, 0) == doctest::Approx(TWO_PI));

    const auto L2 = lattice_from_returns(
        1, {scalar(2 * TWO_PI), scalar(3 * TWO_PI)}, 1e-9);
    CHECK(L2.m == 1);
    CHECK(L2.generators(0, 0) == doctest::Approx(TWO_PI));

    const auto L3 =
        lattice_from_returns(2, {pt({TWO_PI, 0.0}), pt({2 * TWO_PI, 0.0})}, 1e-9);
    CHECK(L3.m == 1);
    CHECK(L3.i_indices == VecI{0});
    CHECK(L3.a_indices == VecI{1});

    CHECK(lattice_from_returns(3, {}, 1e-9).m == 0);

    // incommensurate candidates cannot close under integer combinations
    CHECK_THROWS_AS(lattice_from_returns(
                        1, {scalar(TWO_PI), scalar(TWO_PI * std::sqrt(2.0))}, 1e-9),
                    InconsistentLatticeError);
}

TEST_CASE("basis split maximizes |det C|") {
    // one generator with both components: the larger one wins the i-slot
    const auto L = lattice_from_returns(2, {pt({1.0, 3.0})}, 1e-9);
    CHECK(L.m == 1);
    CHECK(L.i_indices == VecI{1});
    CHECK(L.a_indices == VecI{0});
    CHECK(L.det_C() == doctest::Approx(3.0));
}

TEST_CASE("frame matrix: identity, worked example, determinant law") {
    IsotropyLattice L0;
    L0.k = 2;
    L0.m = 1;
    L0.generators = pt({0.0, TWO_PI});
    L0.a_indices = {0};
    L0.i_indices = {1};

    const FrameMatrix F_id = frame_matrix(L0, L0);
    CHECK(F_id.A.isApprox(Mat::Identity(2, 2), 1e-14));

    IsotropyLattice Lr = L0;
    Lr.generators = pt({1.0, 2.0 * TWO_PI});
    const FrameMatrix F = frame_matrix(L0, Lr);
    CHECK(F.A(0, 0) == doctest::Approx(1.0));
    CHECK(F.A(0, 1) == doctest::Approx(1.0 / TWO_PI));
    CHECK(F.A(1, 0) == doctest::Approx(0.0));
    CHECK(F.A(1, 1) == doctest::Approx(2.0));
    CHECK(F.apply(L0.generators.col(0)).isApprox(Lr.generators.col(0), 1e-12));
    CHECK(F.det() == doctest::Approx(Lr.det_C() / L0.det_C()));
}

TEST_CASE("continue_lattice: isochronous oscillator and pendulum periods") {
    const auto S = sys("oscillator1d");
    FlowConfig cfg;
    auto section = [](const Vec& r) { return pt({std::sqrt(2.0 * r[0]), 0.0}); };

    IsotropyLattice L0;
    L0.k = 1;
    L0.m = 1;
    L0.generators = scalar(TWO_PI);
    L0.i_indices = {0};

    const auto path1 = std::vector<Vec>{scalar(0.5)};
    CHECK(continue_lattice(S, L0, section, path1, cfg).size() == 1);

    const auto path = std::vector<Vec>{scalar(0.5), scalar(1.0), scalar(1.5)};
    const auto lattices = continue_lattice(S, L0, section, path, cfg);
    REQUIRE(lattices.size() == 3);
    for (const auto& L : lattices)
        CHECK(L.generators(0, 0) == doctest::Approx(TWO_PI).epsilon(1e-10));

    const auto P = sys("pendulum");
    FlowConfig pcfg;
    pcfg.tolerance = 1e-13;
    auto psec = [](const Vec& r) {
        return pt({0.0, std::sqrt(2.0 * (r[0] + 1.0))});  // q = 0 crossing
    };
    IsotropyLattice P0;
    P0.k = 1;
    P0.m = 1;
    P0.generators = scalar(oracles::pendulum_period_quadrature(-0.9));
    P0.i_indices = {0};
    const std::vector<Vec> epath{scalar(-0.9), scalar(-0.7), scalar(-0.5),
                                 scalar(-0.3), scalar(-0.1)};
    const auto plats = continue_lattice(P, P0, psec, epath, pcfg);
    REQUIRE(plats.size() == epath.size());
    double prev = 0.0;
    for (std::size_t i = 0; i < epath.size(); ++i) {
        const double T = plats[i].generators(0, 0);
        CHECK(std::fabs(T - oracles::pendulum_period_quadrature(epath[i][0])) < 1e-7);
        CHECK(T > prev);  // strictly increasing toward the separatrix
        prev = T;
    }
}

TEST_CASE("rank is stable under doubling the search box") {
    const auto S = sys("oscillator1d");
    FlowConfig cfg;
    const Vec z0 = pt({1.0, 0.0});
    const auto f1 =
        detect_recurrences(S, z0, scalar(-8), scalar(8), 1e-7, 24, cfg);
    const auto f2 =
        detect_recurrences(S, z0, scalar(-16), scalar(16), 1e-7, 48, cfg);
    CHECK(lattice_from_returns(1, f1, 1e-7).m == lattice_from_returns(1, f2, 1e-7).m);
}
