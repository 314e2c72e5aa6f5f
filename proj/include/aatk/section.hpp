#pragma once

#include <memory>

#include "aatk/phase_space.hpp"
#include "aatk/spline.hpp"

namespace aatk {

/// The map whose level sets the section cuts transversally. For charts over
/// complete systems this is the level map pi; the partial case extends it
/// with transversal slice coordinates.
struct BaseMap {
    int out_dim = 0;
    std::function<Vec(const Vec&)> value;
    std::function<Mat(const Vec&)> jacobian;  // out_dim x 2n
};

BaseMap level_base_map(std::shared_ptr<const HamiltonianSystem> S);

/// One phase point per fibre over a tensor grid of base values, interpolated
/// by splines and re-projected onto the exact fibre at evaluation time.
class Section {
public:
    Section() = default;
    Section(BaseMap base, Grid grid, std::vector<Vec> nodes);

    /// sigma(r): spline interpolation followed by Gauss-Newton projection
    /// so that base(sigma(r)) = r holds to near machine precision.
    Vec at(const Vec& r) const;
    /// d sigma / dr by central differences of at(), 2n x base-dim.
    Mat derivative(const Vec& r) const;

    const Grid& grid() const { return grid_; }
    const std::vector<Vec>& nodes() const { return nodes_; }
    const BaseMap& base() const { return base_; }
    Vec node_level(std::size_t flat) const { return grid_.node(flat); }

private:
    BaseMap base_;
    Grid grid_;
    std::vector<Vec> nodes_;
    VectorGridField interp_;
};

/// Gauss-Newton solve of base(z) = r from the given seed (minimal-norm
/// updates). Throws SectionConstructionError on failure.
Vec solve_onto_fibre(const BaseMap& base, const Vec& r, Vec seed,
                     double tol = 1e-12, int max_iters = 60);

/// Build a section over the grid by transversal shooting: the node at
/// base(z_M) (if present) gets z_M itself, every other node is solved
/// seeded from the nearest already-solved neighbour.
Section build_section(const BaseMap& base, const Vec& z_M, Grid grid);

/// Convenience overload for the complete case (base = level map).
Section build_section(std::shared_ptr<const HamiltonianSystem> S, const Vec& z_M,
                      Grid grid);

}  // namespace aatk
