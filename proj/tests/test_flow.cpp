#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "aatk/flow.hpp"
#include "aatk/systems.hpp"

using namespace aatk;

namespace {

Vec pt(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

HamiltonianSystem sys(const char* name) {
    return systems::make_system(systems::builtin(name));
}

}  // namespace

TEST_CASE("free particle flow is a straight line") {
    const auto S = sys("free1d");
    FlowConfig cfg;
    const Vec z1 = flow(S, 0, pt({0.0, 1.0}), 3.0, cfg);
    CHECK(z1[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(z1[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("oscillator flow is a rotation") {
    const auto S = sys("oscillator1d");
    FlowConfig cfg;
    const Vec full = flow(S, 0, pt({1.0, 0.0}), TWO_PI, cfg);
    CHECK(inf_norm(full - pt({1.0, 0.0})) < 1e-8);
    const Vec quarter = flow(S, 0, pt({1.0, 0.0}), 0.5 * 3.14159265358979312, cfg);
    CHECK(inf_norm(quarter - pt({0.0, -1.0})) < 1e-8);
}

TEST_CASE("group action identity, inverse, composition and order") {
    const auto S = sys("osc_free");
    FlowConfig cfg;
    const Vec z0 = pt({1.0, 0.2, 0.0, 0.8});

    CHECK(inf_norm(group_action(S, z0, pt({0.0, 0.0}), cfg) - z0) == 0.0);

    const Vec period = group_action(S, z0, pt({TWO_PI, 0.0}), cfg);
    CHECK(inf_norm(period - z0) < 1e-7);

    const Vec s = pt({0.9, -1.4});
    const Vec there = group_action(S, z0, s, cfg);
    const Vec back = group_action(S, there, Vec(-s), cfg);
    CHECK(inf_norm(back - z0) < 1e-7);

    // group law
    const Vec s2 = pt({-0.3, 0.6});
    const Vec one_shot = group_action(S, z0, Vec(s + s2), cfg);
    const Vec two_step = group_action(S, group_action(S, z0, s, cfg), s2, cfg);
    CHECK(inf_norm(one_shot - two_step) < 2e-7);
}

TEST_CASE("commutation residual: involutive pairs commute") {
    const auto S = sys("osc_free");
    FlowConfig cfg;
    const Vec z0 = pt({1.0, -0.1, 0.3, 1.2});
    CHECK(commutation_residual(S, 0, 1, z0, 0.0, 2.0, cfg) < 1e-10);
    CHECK(commutation_residual(S, 0, 1, z0, 1.0, 1.0, cfg) < 1e-7);
    CHECK(commutation_residual(S, 0, 1, z0, 5.0, -5.0, cfg) < 1e-7);
}

TEST_CASE("commutation residual: non-involutive pair shows O(ab) defect") {
    // F1 = q1, F2 = p1^2/2 on R^4: {F1,F2} = p1, flows do not commute
    systems::SystemDefinition def;
    def = systems::parse_system(
        "name: noninv\n"
        "n: 2\n"
        "integral: F1 = q1\n"
        "integral: F2 = p1^2/2\n");
    const auto S = systems::make_system(def);
    FlowConfig cfg;
    cfg.project = false;
    cfg.check_conservation = false;
    const Vec z0 = pt({0.0, 0.0, 1.0, 0.0});
    const double r = commutation_residual(S, 0, 1, z0, 1.0, 1.0, cfg);
    CHECK(r == doctest::Approx(1.0).epsilon(1e-6));  // BCH leading term a*b*{F,G}'

    // with conservation checks on, the same flow is rejected
    FlowConfig strict;
    strict.project = false;
    strict.check_conservation = true;
    CHECK_THROWS_AS(flow(S, 1, z0, 1.0, strict), ConservationError);
}

TEST_CASE("conservation along flows holds to tolerance") {
    const auto S = sys("pendulum");
    FlowConfig cfg;
    cfg.tolerance = 1e-12;
    const Vec z0 = pt({0.0, 1.0});  // E = -0.5 libration
    const double E0 = S.level(z0)[0];
    Vec z = z0;
    for (int leg = 0; leg < 5; ++leg) z = flow(S, 0, z, 2.0, cfg);
    CHECK(std::fabs(S.level(z)[0] - E0) < 1e-11);
}

TEST_CASE("symplecticity of the flow map Jacobian") {
    const auto S = sys("pendulum");
    FlowConfig cfg;
    cfg.tolerance = 1e-12;
    const Vec z0 = pt({0.4, 0.9});
    const double h = 1e-5;
    Mat D(2, 2);
    for (int c = 0; c < 2; ++c) {
        Vec zp = z0, zm = z0;
        zp[c] += h;
        zm[c] -= h;
        D.col(c) = (flow(S, 0, zp, 3.7, cfg) - flow(S, 0, zm, 3.7, cfg)) / (2 * h);
    }
    const Mat W = S.model().omega(z0);
    CHECK((D.transpose() * W * D - W).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("blow-up and step exhaustion raise typed errors") {
    systems::SystemDefinition def = systems::parse_system(
        "name: blowup\n"
        "n: 1\n"
        "integral: H = q1^2*p1\n");
    const auto S = systems::make_system(def);
    FlowConfig cfg;
    cfg.check_conservation = false;
    // qdot = q^2 blows up in finite parameter
    CHECK_THROWS_AS(flow(S, 0, pt({1.0, 0.0}), 2.0, cfg), AssumptionViolationError);

    const auto osc = sys("oscillator1d");
    FlowConfig tiny;
    tiny.max_steps = 3;
    CHECK_THROWS_AS(flow(osc, 0, pt({1.0, 0.0}), 50.0, tiny), IncompletenessError);
}

TEST_CASE("region exit detection") {
    systems::SystemDefinition def = systems::builtin("free1d");
    Box region;
    region.lo = pt({-2.0, -2.0});
    region.hi = pt({2.0, 2.0});
    def.region = region;
    const auto S = systems::make_system(def);
    FlowConfig cfg;
    cfg.check_region = true;
    CHECK_THROWS_AS(flow(S, 0, pt({0.0, 1.0}), 5.0, cfg), AssumptionViolationError);
    CHECK(inf_norm(flow(S, 0, pt({0.0, 1.0}), 1.0, cfg) - pt({1.0, 1.0})) < 1e-10);
}

TEST_CASE("weighted flow accumulates the Liouville pairing") {
    // oscillator cycle: closed integral of p dq over one period = 2 pi E
    const auto S = sys("oscillator1d");
    FlowConfig cfg;
    double acc = 0.0;
    const Vec w = pt({TWO_PI});
    const Vec end = flow_weighted(S, w, pt({1.0, 0.0}), 1.0, cfg, &acc);
    CHECK(inf_norm(end - pt({1.0, 0.0})) < 1e-8);
    CHECK(acc == doctest::Approx(TWO_PI * 0.5).epsilon(1e-8));  // E = 1/2
}
