#pragma once

#include <memory>

#include "aatk/lattice.hpp"
#include "aatk/section.hpp"

namespace aatk {

/// Raw trivialization coordinates (J; t; phi): level values, cylinder
/// coordinates and torus angles in [0, 2*pi).
struct ChartCoords {
    Vec J, t, phi;
};

/// Generalized action-angle coordinates (I; x; phi) after the action map,
/// the shift potentials and any reparametrization.
struct ActionAngleCoords {
    Vec I, x, phi;
};

struct ShootConfig {
    double tol = 1e-11;  // scaled by (1 + |z|_inf)
    int max_iters = 40;
    double t_range = 8.0;  // multistart breadth along cylinder directions
    int t_starts = 5;
    int phi_starts = 6;
};

/// The trivialization of the fibred neighbourhood over the base grid:
/// section, continued lattice generators, and both chart maps.
class TrivializationChart {
public:
    TrivializationChart() = default;
    TrivializationChart(std::shared_ptr<const HamiltonianSystem> S, Section section,
                        IsotropyLattice anchor, std::vector<Mat> node_generators,
                        FlowConfig fcfg, Vec anchor_level);

    int k() const { return anchor_.k; }
    int m() const { return anchor_.m; }
    const VecI& a_indices() const { return anchor_.a_indices; }
    const VecI& i_indices() const { return anchor_.i_indices; }
    const Vec& anchor_level() const { return anchor_level_; }
    const Section& section() const { return section_; }
    const Grid& grid() const { return section_.grid(); }
    const FlowConfig& flow_config() const { return fcfg_; }
    std::shared_ptr<const HamiltonianSystem> system() const { return sys_; }
    const std::vector<Mat>& node_generators() const { return node_gens_; }

    /// Interpolated lattice at base point J (anchor split kept).
    IsotropyLattice lattice_at(const Vec& J) const;
    /// Columns e_a (unit vectors) and v_i(J): the moving frame in standard
    /// coordinate slots, column order (a..., i...).
    Mat frame_at(const Vec& J) const;
    /// Frame with generator columns divided by 2*pi: the mixed block of the
    /// pulled-back symplectic form pairs against it.
    Mat mixed_block_at(const Vec& J) const;
    /// Rates d(t, phi)/d tau under the flow of F_lam, one column per lam.
    Mat y_rates(const Vec& J) const;

    Vec coords_to_s(const Vec& J, const Vec& t, const Vec& phi) const;
    ChartCoords s_to_coords(const Vec& J, const Vec& s) const;

    ChartCoords to_chart(const Vec& z, const ShootConfig& scfg = {}) const;
    Vec from_chart(const ChartCoords& c) const;

private:
    std::shared_ptr<const HamiltonianSystem> sys_;
    Section section_;
    IsotropyLattice anchor_;
    std::vector<Mat> node_gens_;  // k x m generators per grid node
    VectorGridField gen_field_;   // k*m components, column-major over generators
    FlowConfig fcfg_;
    Vec anchor_level_;
};

/// Continue the anchor generators over every node of the section grid,
/// breadth-first from the node nearest anchor_base. Shared by the complete
/// and partial chart builders.
std::vector<Mat> continue_generators(const HamiltonianSystem& S, const Section& section,
                                     const IsotropyLattice& anchor,
                                     const Vec& anchor_base, const FlowConfig& fcfg,
                                     const LatticeConfig& lcfg = {});

/// Continue the anchor lattice over every grid node (breadth-first from the
/// node nearest anchor_level) and assemble the chart. The torus rank and the
/// basis split are fixed by the anchor; failures to refine raise the lattice
/// errors.
TrivializationChart build_trivialization(std::shared_ptr<const HamiltonianSystem> S,
                                         Section section, const IsotropyLattice& anchor,
                                         const Vec& anchor_level, const FlowConfig& fcfg,
                                         const LatticeConfig& lcfg = {});

/// A change of action coordinates I_a = f_a(I'), I_i = I'_i with the
/// full Jacobian df_a / dI'_lambda supplied by the caller.
struct Reparametrization {
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> jac;  // (k-m) x k
};

/// The coordinate transform on top of the raw chart: action map
/// I_i = Xi_i(J), shift potentials, optional reparametrization.
class ChartTransform {
public:
    ChartTransform() = default;

    Vec actions_at(const Vec& J) const;       // (I_a = J_a, I_i = Xi_i(J))
    Mat dI_dJ(const Vec& J) const;            // i-rows are v_i(J)^T / 2pi
    Vec level_of(const Vec& I) const;         // Newton inversion of the action map
    Vec shift_at(const Vec& J) const;         // k-vector, (t-slots..., phi-slots...)
    bool has_shifts() const { return !shift_fields_.empty(); }
    bool has_reparametrization() const { return bool(repar_.f); }
    double exactness_residual() const { return exactness_residual_; }

    ActionAngleCoords apply(const ChartCoords& raw) const;
    ChartCoords invert(const ActionAngleCoords& fin) const;

    int k() const { return k_; }
    int m() const { return m_; }
    const VecI& a_indices() const { return a_idx_; }
    const VecI& i_indices() const { return i_idx_; }

private:
    friend ChartTransform compute_actions(const TrivializationChart&, double);
    friend ChartTransform compute_shifts(const TrivializationChart&, ChartTransform,
                                         double);
    friend ChartTransform reparametrize(const ChartTransform&, Reparametrization);
    friend ChartTransform identity_transform(const TrivializationChart&);

    int k_ = 0, m_ = 0;
    VecI a_idx_, i_idx_;
    Vec anchor_level_;
    std::vector<GridField> xi_;           // m action fields over the base grid
    VectorGridField gen_field_;           // generator splines (k*m components)
    std::vector<GridField> shift_fields_; // k shift fields G^y(J)
    Reparametrization repar_;
    double exactness_residual_ = 0.0;
};

/// The transform that leaves the raw (J; t; phi) coordinates untouched;
/// useful for sampling the pulled-back form before the action substitution.
ChartTransform identity_transform(const TrivializationChart& chart);

/// Action variables from Liouville-form cycle integrals
/// I_i(J) = (1/2pi) * closed integral of p.dq over the torus cycle traced by
/// g(tau v_i(J)) sigma(J). Verifies the gradient identity
/// dXi_i/dJ = v_i/(2pi) (which reduces to independence from J_a when the
/// generators have no cylinder components) within indep_tol.
ChartTransform compute_actions(const TrivializationChart& chart,
                               double indep_tol = 1e-5);

/// Shift potentials from the (J,J)-block of the section pullback of omega:
/// solves d eps = W by radial homotopy from the anchor level and divides by
/// the mixed block. The Stokes residual of the solution over grid cells is
/// the exactness check; above exactness_tol raises NonExactnessError.
ChartTransform compute_shifts(const TrivializationChart& chart, ChartTransform tr,
                              double exactness_tol = 1e-5);

/// New action-angle coordinates via I_a = f_a(I'), x'^a = (df_b/dI'_a) x^b,
/// phi'^i = phi^i + (df_a/dI'_i) x^a.
ChartTransform reparametrize(const ChartTransform& tr, Reparametrization f);

/// The matrix of omega expressed in chart coordinates at one point, with
/// named blocks. Row/column layout: (I..., z..., x..., phi...); the z block
/// is empty for complete systems.
struct SymplecticSample {
    Vec coords;
    Mat omega;
    int nI = 0, nz = 0, nx = 0, nphi = 0;
    VecI a_idx, i_idx;  // which I rows pair with x and phi columns

    Mat block_II() const { return omega.block(0, 0, nI, nI); }
    Mat block_Iy() const { return omega.block(0, nI + nz, nI, nx + nphi); }
    Mat block_zz() const { return omega.block(nI, nI, nz, nz); }
    Mat block_zI() const { return omega.block(nI, 0, nz, nI); }
    Mat block_zy() const { return omega.block(nI, nI + nz, nz, nx + nphi); }
    Mat block_yy() const {
        return omega.block(nI + nz, nI + nz, nx + nphi, nx + nphi);
    }

    /// Deviation from dI_a^dx^a + dI_i^dphi^i on the blocks the canonical
    /// form constrains (everything except the z-z and z-I blocks).
    double canonical_residual() const;
};

/// Express omega at the given action-angle point by numerically
/// differentiating the inverse chart map (central differences, step
/// fd_step * (1 + |coord|) per column).
SymplecticSample pullback_symplectic(const TrivializationChart& chart,
                                     const ChartTransform& tr,
                                     const ActionAngleCoords& at,
                                     double fd_step = 1e-4);

/// Generic pullback helper shared with the partial-case charts: maps chart
/// coordinates zeta (layout nI|nz|nx|nphi) to phase points.
SymplecticSample sample_pullback(const HamiltonianSystem& S,
                                 const std::function<Vec(const Vec&)>& inverse_map,
                                 const Vec& zeta, int nI, int nz, int nx, int nphi,
                                 const VecI& a_idx, const VecI& i_idx,
                                 double fd_step = 1e-4);

/// Max spread of the (J,J) and (J,y) blocks over random y at fixed J;
/// the paper's y-independence of the pulled-back form.
double y_independence_residual(const TrivializationChart& chart,
                               const ChartTransform& tr, const Vec& J, int samples,
                               unsigned seed, double fd_step = 1e-4);

}  // namespace aatk
