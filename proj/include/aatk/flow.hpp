#pragma once

#include "aatk/phase_space.hpp"

namespace aatk {

/// Integration settings for Hamiltonian flows.
struct FlowConfig {
    double tolerance = 1e-12;  // mixed abs/rel adaptive tolerance
    double base_step = 1e-2;   // initial step size
    bool project = true;       // Gauss-Newton re-projection onto the joint level set
    int max_steps = 200000;
    double blowup_factor = 1e6;  // |z| beyond blowup_factor*(1+|z0|) aborts
    bool check_conservation = true;
    bool check_region = false;  // honor the system's region box if present
    bool error_per_unit_step = false;  // control local error per unit parameter

    void validate() const {
        require(tolerance > 0, "flow config: tolerance must be positive");
        require(max_steps > 0, "flow config: max steps must be positive");
        require(base_step > 0, "flow config: base step must be positive");
    }
};

/// Flow of the lam-th integral: Phi^lam_s(z0).
/// Conservation of every F_mu along the way is asserted against
/// cfg.tolerance; step exhaustion raises IncompletenessError and
/// non-finite or exploding states raise BlowUpError.
Vec flow(const HamiltonianSystem& S, int lam, const Vec& z0, double s,
         const FlowConfig& cfg);

/// Flow of the combined field sum_lam w_lam theta_lam for parameter tau.
/// If action_increment is non-null it accumulates the integral of the
/// Liouville pairing theta(dz) along the trajectory (used for cycle actions).
Vec flow_weighted(const HamiltonianSystem& S, const Vec& w, const Vec& z0,
                  double tau, const FlowConfig& cfg,
                  double* action_increment = nullptr);

/// The additive group action g(s): flows composed in ascending index order.
Vec group_action(const HamiltonianSystem& S, const Vec& z0, const Vec& s,
                 const FlowConfig& cfg);

/// || Phi^lam_a Phi^mu_b z0 - Phi^mu_b Phi^lam_a z0 ||_inf.
double commutation_residual(const HamiltonianSystem& S, int lam, int mu,
                            const Vec& z0, double a, double b,
                            const FlowConfig& cfg);

}  // namespace aatk
