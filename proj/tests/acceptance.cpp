// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Criterion 10 drives the CLI binary named by the AATK_CLI environment
// variable; everything else runs in process against analytic oracles.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <vector>

#include "aatk/analysis.hpp"
#include "oracles.hpp"

using namespace aatk;
using Clock = std::chrono::steady_clock;

namespace {

Vec pt(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v[i++] = x;
    return v;
}

std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
    return v;
}

struct Harness {
    int failures = 0;

    void run(int id, const std::string& label, double budget_s,
             const std::function<void(std::ostringstream&)>& body) {
        const auto t0 = Clock::now();
        std::ostringstream detail;
        bool ok = true;
        std::string err;
        try {
            body(detail);
        } catch (const std::exception& e) {
            ok = false;
            err = e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(Clock::now() - t0).count();
        if (budget_s > 0 && elapsed > budget_s) {
            ok = false;
            err += (err.empty() ? "" : "; ") + std::string("runtime ") +
                   std::to_string(elapsed) + " s exceeds " +
                   std::to_string(budget_s) + " s";
        }
        std::cout << (ok ? "PASS" : "FAIL") << " criterion " << id << ": " << label
                  << " [" << detail.str() << (detail.str().empty() ? "" : "; ")
                  << std::fixed << elapsed << " s]";
        if (!ok) std::cout << "  <-- " << err;
        std::cout << "\n" << std::defaultfloat;
        if (!ok) ++failures;
    }
};

void expect(bool cond, const std::string& what) {
    if (!cond) throw std::runtime_error(what);
}

int run_cli(const std::string& args) {
    const char* cli = std::getenv("AATK_CLI");
    expect(cli != nullptr, "AATK_CLI environment variable not set");
    const std::string cmd = std::string(cli) + " " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    expect(rc != -1, "failed to launch the CLI");
    return WEXITSTATUS(rc);
}

}  // namespace

int main() {
    Harness h;

    // 1. harmonic oscillator -----------------------------------------------------
    h.run(1, "harmonic oscillator: m, generator, actions, canonical form", 10.0,
          [](std::ostringstream& detail) {
              AnalysisOptions opts;
              opts.grid_axes = {linspace(0.5, 2.0, 7)};
              const auto res =
                  analyze(systems::builtin("oscillator1d"), pt({1.0, 0.0}), opts);
              expect(res.report["lattice"]["m"] == 1, "m != 1");
              const double gen =
                  res.report["lattice"]["anchor_generators"][0][0].get<double>();
              expect(std::fabs(gen - TWO_PI) < 1e-6, "generator not 2pi");
              for (double E : {0.5, 1.0, 1.5, 2.0}) {
                  const double I = res.transform->actions_at(pt({E}))[0];
                  expect(std::fabs(I - E) < 1e-6,
                         "I(E) != E at E = " + std::to_string(E));
              }
              std::mt19937 rng(1);
              std::uniform_real_distribution<double> uI(0.55, 1.95),
                  uphi(0.0, TWO_PI);
              double worst = 0.0;
              for (int i = 0; i < 20; ++i) {
                  ActionAngleCoords c;
                  c.I = pt({uI(rng)});
                  c.x = Vec(0);
                  c.phi = pt({uphi(rng)});
                  worst = std::max(worst,
                                   pullback_symplectic(*res.chart, *res.transform, c)
                                       .canonical_residual());
              }
              expect(worst < 1e-5, "canonical residual " + std::to_string(worst));
              detail << "gen=" << gen << " canonical=" << worst;
          });

    // 2. free particle ------------------------------------------------------------
    h.run(2, "free particle: m = 0 and {x, I} = 1", 5.0,
          [](std::ostringstream& detail) {
              AnalysisOptions opts;
              opts.grid_axes = {linspace(0.3, 1.4, 6)};
              const auto res =
                  analyze(systems::builtin("free1d"), pt({0.0, 1.0}), opts);
              expect(res.report["lattice"]["m"] == 0, "m != 0");
              auto x_of = [&](const Vec& z) {
                  return res.transform->apply(res.chart->to_chart(z)).x[0];
              };
              auto I_of = [&](const Vec& z) {
                  return res.transform->apply(res.chart->to_chart(z)).I[0];
              };
              std::mt19937 rng(2);
              std::uniform_real_distribution<double> uq(-1.5, 1.5), up(0.9, 1.6);
              double worst = 0.0;
              for (int i = 0; i < 20; ++i) {
                  const Vec z = pt({uq(rng), up(rng)});
                  const double fd = 1e-5;
                  Vec gx(2), gI(2);
                  for (int c = 0; c < 2; ++c) {
                      Vec zp = z, zm = z;
                      zp[c] += fd;
                      zm[c] -= fd;
                      gx[c] = (x_of(zp) - x_of(zm)) / (2 * fd);
                      gI[c] = (I_of(zp) - I_of(zm)) / (2 * fd);
                  }
                  const double bracket = gx[0] * gI[1] - gx[1] * gI[0];
                  worst = std::max(worst, std::fabs(bracket - 1.0));
              }
              expect(worst < 1e-8, "{x,I} residual " + std::to_string(worst));
              detail << "bracket_residual=" << worst;
          });

    // 3. oscillator + free particle ------------------------------------------------
    h.run(3, "oscillator x free particle: split and canonical form", 30.0,
          [](std::ostringstream& detail) {
              AnalysisOptions opts;
              opts.grid_axes = {linspace(0.35, 0.65, 7), linspace(0.35, 0.65, 7)};
              const Vec z0 = pt({1.0, 0.0, 0.0, 1.0});  // E = 0.5, J2 = 0.5
              const auto res = analyze(systems::builtin("osc_free"), z0, opts);
              expect(res.report["lattice"]["m"] == 1, "m != 1");
              const auto gens = res.report["lattice"]["anchor_generators"];
              expect(std::fabs(gens[0][0].get<double>() - TWO_PI) < 1e-6 &&
                         std::fabs(gens[0][1].get<double>()) < 1e-6,
                     "generator not (2pi, 0)");
              expect(res.report["lattice"]["basis_split"]["i"][0] == 0 &&
                         res.report["lattice"]["basis_split"]["a"][0] == 1,
                     "basis split not i={1}, a={2}");
              const double worst =
                  res.report["verification"]["canonical_max"].get<double>();
              expect(worst < 1e-5, "canonical residual " + std::to_string(worst));
              detail << "canonical=" << worst;
          });

    // 4. pendulum libration ----------------------------------------------------------
    h.run(4, "pendulum libration at E = -0.5: period, action, frequency", 60.0,
          [](std::ostringstream& detail) {
              auto S = systems::make_shared_system(systems::builtin("pendulum"));
              FlowConfig fcfg;
              fcfg.tolerance = 1e-13;
              const Vec z0 = pt({0.0, 1.0});
              const double T_oracle = oracles::pendulum_period_quadrature(-0.5);
              const Vec refined = refine_return(*S, z0, pt({6.7}), fcfg);
              expect(std::fabs(refined[0] - T_oracle) < 1e-7,
                     "period vs oracle " + std::to_string(refined[0] - T_oracle));

              AnalysisOptions opts;
              opts.tol_flow = 1e-13;
              opts.grid_axes = {linspace(-0.7, -0.3, 9)};
              const auto res = analyze(systems::builtin("pendulum"), z0, opts);
              const double I_detected = res.transform->actions_at(pt({-0.5}))[0];
              const double I_oracle = oracles::pendulum_action_quadrature(-0.5);
              expect(std::fabs(I_detected - I_oracle) < 1e-5,
                     "action vs oracle " + std::to_string(I_detected - I_oracle));

              // frequency: angle rate from the detected period vs dH/dI over
              // the action table by finite differences
              double worst = 0.0;
              for (double E : {-0.55, -0.5, -0.45}) {
                  const double T = res.chart->lattice_at(pt({E})).generators(0, 0);
                  const double fd = 0.05;
                  const double dI = res.transform->actions_at(pt({E + fd}))[0] -
                                    res.transform->actions_at(pt({E - fd}))[0];
                  worst = std::max(worst, std::fabs(TWO_PI / T - 2 * fd / dI));
              }
              expect(worst < 1e-4, "frequency consistency " + std::to_string(worst));
              detail << "T=" << refined[0] << " I=" << I_detected
                     << " freq_resid=" << worst;
          });

    // 5. commutation ------------------------------------------------------------------
    h.run(5, "commutation residual < 1e-7 for |a|,|b| <= 5", 60.0,
          [](std::ostringstream& detail) {
              FlowConfig cfg;
              cfg.tolerance = 1e-13;
              double worst = 0.0;
              // systems 1-4 with two commuting directions where available;
              // single-integral systems get the second factor from osc_free
              const auto S34 = systems::make_system(systems::builtin("osc_free"));
              const Vec z34 = pt({1.0, 0.0, 0.0, 1.0});
              for (double a : {5.0, -5.0, 1.7}) {
                  for (double b : {5.0, -3.3, 0.4}) {
                      worst = std::max(
                          worst, commutation_residual(S34, 0, 1, z34, a, b, cfg));
                  }
              }
              // pendulum x free particle, exercising the anharmonic factor
              const auto P = systems::make_system(systems::parse_system(
                  "name: pend_free\n"
                  "n: 2\n"
                  "integral: F1 = p1^2/2 - cos(q1)\n"
                  "integral: F2 = p2^2/2\n"));
              const Vec zp = pt({0.0, 0.0, 1.0, 1.0});
              for (double a : {5.0, -4.1}) {
                  for (double b : {5.0, 2.3}) {
                      worst = std::max(
                          worst, commutation_residual(P, 0, 1, zp, a, b, cfg));
                  }
              }
              expect(worst < 1e-7, "commutation residual " + std::to_string(worst));
              detail << "max_residual=" << worst;
          });

    // 6. partial case F1 = p1 -----------------------------------------------------------
    h.run(6, "partial case F1 = p1: block form at 1e-8", 5.0,
          [](std::ostringstream& detail) {
              auto S =
                  systems::make_shared_system(systems::builtin("partial_momentum"));
              FlowConfig cfg;
              const Vec z_M = Vec::Zero(4);
              const TransversalChart t = build_transversal(*S, z_M, 1.0);
              const auto found = detect_recurrences(
                  *S, z_M, pt({-8.0}), pt({8.0}), 1e-7, 16, cfg);
              const IsotropyLattice anchor = lattice_from_returns(1, found, 1e-7);
              Grid grid{{linspace(-0.4, 0.4, 5), linspace(-0.5, 0.5, 3),
                         linspace(-0.5, 0.5, 3)}};
              const PartialChart chart =
                  build_partial_chart(S, t, grid, z_M, anchor, cfg);
              std::mt19937 rng(6);
              std::uniform_real_distribution<double> u(-0.3, 0.3);
              double worst_zy = 0, worst_zz = 0, worst_canon = 0;
              Mat zz_target(2, 2);
              zz_target << 0.0, 1.0, -1.0, 0.0;
              for (int i = 0; i < 10; ++i) {
                  PartialChart::Coords c;
                  c.I = pt({u(rng)});
                  c.zA = pt({u(rng), u(rng)});
                  c.x = pt({u(rng)});
                  c.phi = Vec(0);
                  const SymplecticSample s = chart.verify_block_form(c);
                  worst_zy = std::max(worst_zy, s.block_zy().cwiseAbs().maxCoeff());
                  worst_zz = std::max(
                      worst_zz, (s.block_zz() - zz_target).cwiseAbs().maxCoeff());
                  worst_canon = std::max(worst_canon, s.canonical_residual());
              }
              expect(worst_zy < 1e-8, "Omega_{A beta} " + std::to_string(worst_zy));
              expect(worst_zz < 1e-8, "Omega_AB " + std::to_string(worst_zz));
              expect(worst_canon < 1e-8, "(I,x) block " + std::to_string(worst_canon));
              detail << "zy=" << worst_zy << " zz=" << worst_zz
                     << " canonical=" << worst_canon;
          });

    // 7. reparametrization ---------------------------------------------------------------
    h.run(7, "free particle reparametrization f(I') = I'^2/2", 10.0,
          [](std::ostringstream& detail) {
              AnalysisOptions opts;
              opts.grid_axes = {linspace(0.1, 2.1, 9)};
              const auto res =
                  analyze(systems::builtin("free1d"), pt({0.0, 1.0}), opts);
              Reparametrization f;
              f.f = [](const Vec& Ip) { return pt({0.5 * Ip[0] * Ip[0]}); };
              f.jac = [](const Vec& Ip) {
                  Mat J(1, 1);
                  J(0, 0) = Ip[0];
                  return J;
              };
              const ChartTransform tr2 = reparametrize(*res.transform, f);
              std::mt19937 rng(7);
              std::uniform_real_distribution<double> uIp(0.5, 2.0), ux(-1.0, 1.0);
              double worst = 0.0;
              for (int i = 0; i < 12; ++i) {
                  ActionAngleCoords c;
                  c.I = pt({uIp(rng)});
                  c.x = pt({ux(rng)});
                  c.phi = Vec(0);
                  worst = std::max(worst,
                                   pullback_symplectic(*res.chart, tr2, c)
                                       .canonical_residual());
              }
              expect(worst < 1e-5, "canonical residual " + std::to_string(worst));
              detail << "canonical=" << worst;
          });

    // 8. Kepler ---------------------------------------------------------------------------
    h.run(8, "planar Kepler at E = -0.5, L = 0.5: degenerate actions", 120.0,
          [](std::ostringstream& detail) {
              // oracle first: radial quadrature against the closed form
              const double I_r_oracle =
                  oracles::kepler_radial_action_quadrature(-0.5, 0.5);
              expect(std::fabs(I_r_oracle - 0.5) < 1e-9,
                     "radial quadrature oracle vs closed form");

              const double r_apo = 1.0 + std::sqrt(0.75);
              const Vec z0 = pt({r_apo, 0.0, 0.0, 0.5 / r_apo});
              AnalysisOptions opts;
              opts.grid_axes = {linspace(-0.54, -0.46, 5), linspace(0.46, 0.54, 5)};
              opts.box_lo = pt({-8.0, -8.0});
              opts.box_hi = pt({8.0, 8.0});
              opts.recurrence_grid = 24;
              opts.verification_samples = 6;
              const auto res = analyze(systems::builtin("kepler_planar"), z0, opts);
              expect(res.report["lattice"]["m"] == 2, "m != 2");

              // identify the rotation generator (pure second slot) and the
              // orbital one
              const IsotropyLattice L =
                  res.chart->lattice_at(pt({-0.5, 0.5}));
              int rot = -1, orb = -1;
              for (int j = 0; j < 2; ++j) {
                  if (std::fabs(L.generators(0, j)) < 1e-6) rot = j;
                  else orb = j;
              }
              expect(rot >= 0 && orb >= 0, "generator roles not identified");
              expect(std::fabs(L.generators(1, rot) - TWO_PI) < 1e-6,
                     "rotation generator not 2pi");

              const Vec I = res.transform->actions_at(pt({-0.5, 0.5}));
              const double I_orb = I[res.chart->i_indices()[orb]];
              const double I_rot = I[res.chart->i_indices()[rot]];
              expect(std::fabs(I_rot - 0.5) < 1e-6,
                     "angular action != L: " + std::to_string(I_rot));
              expect(std::fabs(I_orb - (I_r_oracle + 0.5)) < 1e-3,
                     "I_r + |L| vs oracle: " + std::to_string(I_orb));
              expect(std::fabs(I_orb - 1.0) < 1e-3,
                     "I_r + |L| != (-2E)^{-1/2}: " + std::to_string(I_orb));

              // degenerate frequencies: the orbital action must not vary
              // with L at fixed E -- finite differences over the action table
              const double fd = 0.02;
              const double dIorb_dL =
                  (res.transform->actions_at(pt({-0.5, 0.5 + fd}))[
                       res.chart->i_indices()[orb]] -
                   res.transform->actions_at(pt({-0.5, 0.5 - fd}))[
                       res.chart->i_indices()[orb]]) /
                  (2 * fd);
              const double ratio = 1.0 / (1.0 - dIorb_dL);
              expect(std::fabs(ratio - 1.0) < 1e-3,
                     "omega_r/omega_theta = " + std::to_string(ratio));
              detail << "I_orb=" << I_orb << " I_rot=" << I_rot
                     << " freq_ratio=" << ratio;
          });

    // 9. time-extended driven oscillator -------------------------------------------------
    h.run(9, "driven oscillator extension: flow match and open time direction", 60.0,
          [](std::ostringstream& detail) {
              auto S = systems::make_shared_system(
                  systems::builtin("driven_osc_extended"));
              FlowConfig cfg;
              cfg.tolerance = 1e-13;
              // parametrically unstable drive: a small start keeps the grown
              // trajectory within the absolute tolerance
              const Vec z0 = pt({0.0, 0.05, 0.0, 0.02});  // (t, q, p_t, p)
              const Vec z1 = flow(*S, 0, z0, 10.0, cfg);
              oracles::Vec y0(2);
              y0 << 0.05, 0.02;
              const oracles::Vec y1 = oracles::rk4(
                  [](double t, const oracles::Vec& y) {
                      oracles::Vec d(2);
                      d << y[1], -2.0 * y[0] * std::cos(t);
                      return d;
                  },
                  y0, 0.0, 10.0, 1000000);
              const double mismatch = std::max(std::fabs(z1[1] - y1[0]),
                                               std::fabs(z1[3] - y1[1]));
              expect(std::fabs(z1[0] - 10.0) < 1e-9, "time rate not unit");
              expect(mismatch < 1e-8,
                     "autonomous vs direct integration " + std::to_string(mismatch));

              const auto res = analyze(systems::builtin("driven_osc_extended"), z0);
              expect(res.report["lattice"]["m"] == 0,
                     "lattice caught the time direction");
              expect(res.report["lattice"]["basis_split"]["i"].empty(),
                     "time direction not reported as non-compact");
              detail << "flow_mismatch=" << mismatch;
          });

    // 10. negative controls ----------------------------------------------------------------
    h.run(10, "negative controls exit with code 2", 60.0,
          [](std::ostringstream& detail) {
              namespace fs = std::filesystem;
              fs::create_directories("acceptance_tmp");
              {
                  std::ofstream f("acceptance_tmp/noninv.txt");
                  f << "name: noninv\nn: 2\nintegral: A = q1\nintegral: B = p1\n";
              }
              const int rc1 = run_cli(
                  "analyze --system acceptance_tmp/noninv.txt --point 0.2,0,0.4,0 "
                  "--report acceptance_tmp/r1.json");
              expect(rc1 == 2, "non-involutive pair exited " + std::to_string(rc1));
              const int rc2 = run_cli(
                  "analyze --system oscillator1d --point 0,0 "
                  "--report acceptance_tmp/r2.json");
              expect(rc2 == 2, "oscillator origin exited " + std::to_string(rc2));
              const int rc3 = run_cli(
                  "analyze --system pendulum --point 3.14159265358979312,0 "
                  "--report acceptance_tmp/r3.json");
              expect(rc3 == 2, "pendulum saddle exited " + std::to_string(rc3));
              fs::remove_all("acceptance_tmp");
              detail << "exit_codes=2,2,2";
          });

    // 11. convergence under refinement -------------------------------------------------------
    h.run(11, "halving flow tolerance + doubling grid gains >= 2x", 120.0,
          [](std::ostringstream& detail) {
              auto residual = [](const char* name, const Vec& z,
                                 std::vector<double> axis, double tol) {
                  AnalysisOptions o;
                  o.grid_axes = {std::move(axis)};
                  o.tol_flow = tol;
                  o.flow_error_per_unit_step = true;
                  o.verification_samples = 24;
                  const auto res = analyze(systems::builtin(name), z, o);
                  return res.report["verification"]["canonical_mean"].get<double>();
              };
              // oscillator, system 1
              const double osc_base = residual("oscillator1d", pt({1.0, 0.0}),
                                               linspace(0.5, 2.0, 5), 4e-6);
              const double osc_fine = residual("oscillator1d", pt({1.0, 0.0}),
                                               linspace(0.5, 2.0, 9), 2e-6);
              expect(osc_fine * 2.0 <= osc_base,
                     "oscillator ratio " + std::to_string(osc_base / osc_fine));
              // pendulum, system 4
              const double pend_base = residual("pendulum", pt({0.0, 1.0}),
                                                linspace(-0.7, -0.3, 5), 1e-9);
              const double pend_fine = residual("pendulum", pt({0.0, 1.0}),
                                                linspace(-0.7, -0.3, 9), 5e-10);
              expect(pend_fine * 2.0 <= pend_base,
                     "pendulum ratio " + std::to_string(pend_base / pend_fine));
              detail << "osc_ratio=" << osc_base / osc_fine
                     << " pend_ratio=" << pend_base / pend_fine;
          });

    std::cout << (h.failures == 0 ? "ACCEPTANCE: all criteria passed"
                                  : "ACCEPTANCE: " + std::to_string(h.failures) +
                                        " criterion(s) failed")
              << "\n";
    return h.failures == 0 ? 0 : 1;
}
