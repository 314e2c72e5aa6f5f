#pragma once

#include <functional>
#include <vector>

#include "aatk/flow.hpp"

namespace aatk {

/// The isotropy group of the R^k action on a fibre: an integer lattice of
/// rank m spanned by the columns of `generators`, together with the basis
/// split into k-m non-compact (a) directions and m torus (i) directions.
struct IsotropyLattice {
    int k = 0;
    int m = 0;
    Mat generators;   // k x m, column i is v_i(r)
    VecI a_indices;   // size k-m
    VecI i_indices;   // size m, chosen so |det C| is maximal

    /// a-rows of the generator matrix, (k-m) x m.
    Mat B() const;
    /// i-rows of the generator matrix, m x m; nondegenerate by construction.
    Mat C() const;
    double det_C() const;
};

/// The linear map of R^k fixing e_a and sending v_i(0) to v_i(r):
/// [[Id, (B(r)-B(0)) C(0)^-1], [0, C(r) C(0)^-1]] in the (a..., i...) block
/// ordering. det A = det C(r) / det C(0).
struct FrameMatrix {
    Mat A;  // k x k in permuted (a-first, i-second) ordering
    VecI a_indices, i_indices;

    /// Apply to a vector given in standard coordinate slots.
    Vec apply(const Vec& s) const;
    double det() const { return A.determinant(); }
};

struct LatticeConfig {
    double closure_tol = 1e-7;   // scaled by (1 + |z0|_inf)
    double return_tol = 1e-10;   // Newton convergence target, same scaling
    double det_c_min = 1e-8;
    double independence_min = 1e-8;
    int max_newton_iters = 40;
    double promote_frac = 0.5;   // grid minima below promote_frac * scale get refined
};

/// Scan a coordinate box in flow-parameter space for vectors s != 0 with
/// g(s) z0 = z0, refining grid minima by damped Gauss-Newton. Returns the
/// refined, deduplicated candidates (possibly empty: m may be zero).
std::vector<Vec> detect_recurrences(const HamiltonianSystem& S, const Vec& z0,
                                    const Vec& box_lo, const Vec& box_hi,
                                    double tol, int grid_per_axis,
                                    const FlowConfig& fcfg,
                                    const LatticeConfig& lcfg = {});

/// Newton-refine a near-return parameter to || g(s) z0 - z0 ||_inf below
/// return_tol * (1 + |z0|_inf). Throws RefinementError on non-convergence,
/// DegenerateFibreError when the Newton system loses rank.
Vec refine_return(const HamiltonianSystem& S, const Vec& z0, const Vec& s_guess,
                  const FlowConfig& fcfg, const LatticeConfig& lcfg = {});

/// Reduce refined return vectors to a lattice basis (greedy pairwise size
/// reduction), verify closure, and pick the basis split maximizing |det C|
/// (lexicographically smallest i-set among ties).
IsotropyLattice lattice_from_returns(int k, const std::vector<Vec>& candidates,
                                     double tol, const LatticeConfig& lcfg = {});

/// Frame transport matrix from the lattice at the anchor to the lattice at r.
FrameMatrix frame_matrix(const IsotropyLattice& lattice0, const IsotropyLattice& latticeR);

/// Continue the generators along a path of level values using the section:
/// predictor = previous generators, corrector = refine_return at sigma(r).
/// The basis split of lattice0 is kept. det C is monitored; falling below
/// det_c_min raises ShrinkNeighbourhoodError.
std::vector<IsotropyLattice> continue_lattice(
    const HamiltonianSystem& S, const IsotropyLattice& lattice0,
    const std::function<Vec(const Vec&)>& section, const std::vector<Vec>& path,
    const FlowConfig& fcfg, const LatticeConfig& lcfg = {});

}  // namespace aatk
