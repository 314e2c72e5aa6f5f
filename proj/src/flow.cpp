#include "aatk/flow.hpp"

#include <cmath>

namespace aatk {

namespace {

// Dormand-Prince 5(4) coefficients
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

struct Rhs {
    const HamiltonianSystem& S;
    const Vec& w;
    bool with_action;

    // state = phase point, optionally extended by the action accumulator
    Vec operator()(const Vec& y) const {
        const Vec z = with_action ? Vec(y.head(S.dim())) : y;
        const Vec v = S.hvf_combined(w, z);
        if (!with_action) return v;
        Vec dy(S.dim() + 1);
        dy.head(S.dim()) = v;
        dy[S.dim()] = S.model().liouville_pairing(z, v);
        return dy;
    }
};

/// Evaluation-noise magnitude of the level map at z: values of size
/// |J| |z| cannot cancel below this in double precision.
double level_eval_floor(const Mat& J, const Vec& z) {
    double row_scale = 0.0;
    for (Eigen::Index i = 0; i < J.rows(); ++i)
        row_scale = std::max(row_scale, J.row(i).cwiseAbs().maxCoeff());
    return 64.0 * std::numeric_limits<double>::epsilon() *
           (1.0 + row_scale * inf_norm(z));
}

void project_onto_level(const HamiltonianSystem& S, Vec& z, const Vec& r_target,
                        double tol) {
    double floor = 0.0;
    for (int it = 0; it < 8; ++it) {
        const Vec res = r_target - S.level(z);
        if (inf_norm(res) <= std::max(tol, floor)) return;
        const Mat J = S.level_jacobian(z);
        floor = level_eval_floor(J, z);
        const Mat JJt = J * J.transpose();
        Eigen::LDLT<Mat> ldlt(JJt);
        if (ldlt.info() != Eigen::Success)
            throw DegeneracyError("projection: level Jacobian lost rank along the flow");
        z += J.transpose() * ldlt.solve(res);
    }
    if (inf_norm(r_target - S.level(z)) > 10 * std::max(tol, floor))
        throw NumericalError("projection onto the level set did not converge");
}

Vec integrate(const HamiltonianSystem& S, const Vec& w, const Vec& z0, double tend,
              const FlowConfig& cfg, double* action_increment) {
    cfg.validate();
    S.check_point(z0);
    require(w.size() == S.k(), "flow: weight dimension mismatch");
    require(std::isfinite(tend), "flow: non-finite parameter");

    const bool with_action = action_increment != nullptr;
    if (with_action && !S.model().has_liouville())
        throw ChartFailureError("flow: action accumulation needs a Liouville primitive");

    if (tend == 0.0) {
        if (with_action) *action_increment = 0.0;
        return z0;
    }

    const Vec r_target = S.level(z0);
    const double state_scale = 1.0 + inf_norm(z0);
    const double proj_tol =
        std::max(1e-14, std::min(1e-13, 0.01 * cfg.tolerance)) *
        (1.0 + inf_norm(r_target));
    const double dir = tend > 0 ? 1.0 : -1.0;

    Rhs rhs{S, w, with_action};
    Vec y;
    if (with_action) {
        y.resize(S.dim() + 1);
        y.head(S.dim()) = z0;
        y[S.dim()] = 0.0;
    } else {
        y = z0;
    }

    double t = 0.0;
    double h = std::min(cfg.base_step, std::fabs(tend)) * dir;
    const double hmin = 1e-14 * std::max(1.0, std::fabs(tend));
    Vec k1 = rhs(y);
    int steps = 0;

    while (dir * (tend - t) > 0) {
        if (++steps > cfg.max_steps)
            throw IncompletenessError(
                "flow: step budget exhausted before s = " + std::to_string(tend) +
                " (field may be incomplete)");
        if (dir * (t + h) > dir * tend) h = tend - t;

        const Vec k2 = rhs(y + h * (a21 * k1));
        const Vec k3 = rhs(y + h * (a31 * k1 + a32 * k2));
        const Vec k4 = rhs(y + h * (a41 * k1 + a42 * k2 + a43 * k3));
        const Vec k5 = rhs(y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        const Vec k6 = rhs(y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        Vec y1 = y + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        const Vec k7 = rhs(y1);
        const Vec err_vec =
            h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err = 0.0;
        for (Eigen::Index i = 0; i < y.size(); ++i) {
            const double sc =
                cfg.tolerance * (1.0 + std::max(std::fabs(y[i]), std::fabs(y1[i])));
            err = std::max(err, std::fabs(err_vec[i]) / sc);
        }
        if (cfg.error_per_unit_step) err /= std::min(1.0, std::fabs(h));

        if (err <= 1.0) {
            t += h;
            y = y1;
            k1 = k7;  // FSAL
            if (!all_finite(y))
                throw BlowUpError("flow: state became non-finite (completeness violated)");
            if (inf_norm(y) > cfg.blowup_factor * state_scale)
                throw BlowUpError("flow: state norm exploded (completeness violated)");
            if (cfg.check_region && S.region()) {
                const Vec z = with_action ? Vec(y.head(S.dim())) : y;
                if (!S.region()->contains(z))
                    throw AssumptionViolationError(
                        "flow: trajectory left the declared region box");
            }
            if (cfg.project) {
                Vec z = with_action ? Vec(y.head(S.dim())) : y;
                project_onto_level(S, z, r_target, proj_tol);
                if (with_action) y.head(S.dim()) = z; else y = z;
                k1 = rhs(y);  // FSAL slope must match the projected state
            }
        }
        const double fac = std::clamp(
            0.9 * std::pow(std::max(err, 1e-10), cfg.error_per_unit_step ? -0.25 : -0.2),
            0.2, 5.0);
        h *= fac;
        if (std::fabs(h) < hmin)
            throw IncompletenessError("flow: step size underflow (near-singular field)");
    }

    Vec z_end = with_action ? Vec(y.head(S.dim())) : y;
    if (cfg.check_conservation) {
        const Vec r_end = S.level(z_end);
        const double floor = level_eval_floor(S.level_jacobian(z_end), z_end);
        for (int i = 0; i < S.k(); ++i) {
            const double drift = std::fabs(r_end[i] - r_target[i]);
            const double allowed =
                cfg.tolerance * (1.0 + std::fabs(r_target[i])) *
                (cfg.project ? 1.0 : std::max(1.0, std::fabs(tend)));
            if (drift > std::max(allowed, floor))
                throw ConservationError(
                    "flow: integral drift " + std::to_string(drift) + " for '" +
                    S.integrals()[i].label + "' exceeds tolerance (non-involutive set "
                    "or integrator accuracy too low)");
        }
    }
    if (with_action) *action_increment = y[S.dim()];
    return z_end;
}

}  // namespace

Vec flow(const HamiltonianSystem& S, int lam, const Vec& z0, double s,
         const FlowConfig& cfg) {
    require(lam >= 0 && lam < S.k(), "flow: integral index out of range");
    Vec w = Vec::Zero(S.k());
    w[lam] = 1.0;
    return integrate(S, w, z0, s, cfg, nullptr);
}

Vec flow_weighted(const HamiltonianSystem& S, const Vec& w, const Vec& z0,
                  double tau, const FlowConfig& cfg, double* action_increment) {
    return integrate(S, w, z0, tau, cfg, action_increment);
}

Vec group_action(const HamiltonianSystem& S, const Vec& z0, const Vec& s,
                 const FlowConfig& cfg) {
    require(s.size() == S.k(), "group_action: parameter dimension mismatch");
    require(all_finite(s), "group_action: non-finite parameter");
    Vec z = z0;
    for (int lam = 0; lam < S.k(); ++lam)
        if (s[lam] != 0.0) z = flow(S, lam, z, s[lam], cfg);
    return z;
}

double commutation_residual(const HamiltonianSystem& S, int lam, int mu,
                            const Vec& z0, double a, double b,
                            const FlowConfig& cfg) {
    require(lam != mu, "commutation_residual: indices must differ");
    const Vec zab = flow(S, lam, flow(S, mu, z0, b, cfg), a, cfg);
    const Vec zba = flow(S, mu, flow(S, lam, z0, a, cfg), b, cfg);
    return inf_norm(zab - zba);
}

}  // namespace aatk
