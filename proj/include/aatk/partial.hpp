#pragma once

#include "aatk/chart.hpp"

namespace aatk {

/// Linear transversal coordinates z^A on the affine slice through z_M
/// orthogonal to the leaf tangents theta_lam(z_M) and the gradients
/// grad F_lam(z_M); the slice has dimension 2(n-k).
struct TransversalChart {
    Vec z_M;
    Mat slice_basis;  // 2n x 2(n-k), orthonormal columns u_A
    double extent = 1.0;

    int nz() const { return static_cast<int>(slice_basis.cols()); }
    /// Raw projection u_A . (z - z_M); exact slice coordinates for points on
    /// the slice, an initial guess elsewhere.
    Vec slice_coords(const Vec& z) const {
        return slice_basis.transpose() * (z - z_M);
    }
};

/// Build the transversal slice. Throws RegularityError when the leaf
/// tangents and gradients do not span a 2k-dimensional space at z_M.
TransversalChart build_transversal(const HamiltonianSystem& S, const Vec& z_M,
                                   double extent);

/// A closed (or near-closed) leaf path: start point and the flow-parameter
/// vector of the single leg.
struct LeafLoop {
    Vec start;
    Vec s;
};

struct HolonomyReport {
    double max_displacement = 0.0;
    int loops_run = 0;
    int inconclusive = 0;
    std::string verdict;  // "supported" | "unsupported" | "inconclusive"
};

/// Integrate leaf paths and report the in-slice displacement of return
/// points. Supports (never proves) trivial holonomy; paths that do not
/// come back near the slice are flagged inconclusive, not errors.
HolonomyReport holonomy_check(const HamiltonianSystem& S,
                              const TransversalChart& transversal,
                              const std::vector<LeafLoop>& loops, double tol,
                              const FlowConfig& fcfg);

/// Generalized action-angle chart for k < n integrals: coordinates
/// (I_lambda; z^A; x^a; phi^i) over a tensor grid in (J, z)-space.
class PartialChart {
public:
    struct Coords {
        Vec I, zA, x, phi;
    };

    PartialChart() = default;

    int k() const { return anchor_.k; }
    int m() const { return anchor_.m; }
    int nz() const { return transversal_.nz(); }
    const VecI& a_indices() const { return anchor_.a_indices; }
    const VecI& i_indices() const { return anchor_.i_indices; }
    const TransversalChart& transversal() const { return transversal_; }
    const Section& section() const { return section_; }
    const Grid& grid() const { return section_.grid(); }
    const FlowConfig& flow_config() const { return fcfg_; }
    std::shared_ptr<const HamiltonianSystem> system() const { return sys_; }
    double xi_z_dependence() const { return xi_z_dependence_; }
    double exactness_residual() const { return exactness_residual_; }
    const Mat& node_generators_at(std::size_t flat) const { return node_gens_[flat]; }

    /// Interpolated lattice at base point (J, z).
    IsotropyLattice lattice_at(const Vec& base) const;
    Mat frame_at(const Vec& base) const;
    Vec actions_at(const Vec& base) const;  // I over J-slots from Xi fields
    Vec shift_at(const Vec& base) const;

    Coords to_chart(const Vec& z, const ShootConfig& scfg = {}) const;
    Vec from_chart(const Coords& c) const;

    /// Sampled omega matrix in (I, z, x, phi) coordinates with the block
    /// bookkeeping of SymplecticSample.
    SymplecticSample verify_block_form(const Coords& c, double fd_step = 1e-4) const;

    /// Max spread of the z-z and z-I blocks over random (x, phi) at fixed
    /// (I, z): Omega_AB and Omega_A^lambda must not depend on the leaf
    /// coordinates.
    double block_independence_residual(const Coords& c, int samples, unsigned seed,
                                       double fd_step = 1e-4) const;

private:
    friend PartialChart build_partial_chart(std::shared_ptr<const HamiltonianSystem>,
                                            const TransversalChart&, Grid,
                                            const Vec&, const IsotropyLattice&,
                                            const FlowConfig&, const LatticeConfig&,
                                            double, double);

    Vec base_of(const Vec& J, const Vec& zA) const;
    /// Newton inversion (I, zA) -> base point (J, zA).
    Vec base_from_actions(const Vec& I, const Vec& zA) const;

    std::shared_ptr<const HamiltonianSystem> sys_;
    TransversalChart transversal_;
    Section section_;  // over the (J..., z...) grid
    IsotropyLattice anchor_;
    std::vector<Mat> node_gens_;
    VectorGridField gen_field_;
    std::vector<GridField> xi_;
    std::vector<GridField> shift_fields_;
    FlowConfig fcfg_;
    Vec anchor_base_;
    double xi_z_dependence_ = 0.0;
    double exactness_residual_ = 0.0;
};

/// Build the partial chart: section over the (J, z) grid by transversal
/// shooting, leaf-wise lattice continuation (constant m enforced), actions
/// per leaf with the z-independence check, and shift potentials solved
/// slice by slice. For k = n this degenerates to the complete-case chart.
PartialChart build_partial_chart(std::shared_ptr<const HamiltonianSystem> S,
                                 const TransversalChart& transversal, Grid grid,
                                 const Vec& z_M, const IsotropyLattice& anchor,
                                 const FlowConfig& fcfg,
                                 const LatticeConfig& lcfg = {},
                                 double indep_tol = 1e-5,
                                 double exactness_tol = 1e-5);

}  // namespace aatk
