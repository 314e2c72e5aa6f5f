#pragma once

#include <cstddef>
#include <vector>

#include "aatk/types.hpp"

namespace aatk {

/// Cubic interpolating spline on a sorted 1-D grid.
///
/// Uses not-a-knot end conditions for 4+ nodes, natural for 3,
/// linear for 2 and constant for a single node. Evaluation outside
/// the grid extrapolates with the boundary polynomial.
class Spline1D {
public:
    Spline1D() = default;
    Spline1D(std::vector<double> x, std::vector<double> y);

    double eval(double t) const;
    double deriv(double t) const;
    std::size_t size() const { return x_.size(); }

private:
    std::size_t interval(double t) const;

    std::vector<double> x_, y_, m_;  // m_ = second derivatives at nodes
};

/// Tensor grid over the base: one sorted coordinate axis per dimension.
struct Grid {
    std::vector<std::vector<double>> axes;

    int dim() const { return static_cast<int>(axes.size()); }
    std::size_t size() const;
    std::size_t stride(int axis) const;  // row-major flat layout
    std::size_t flat(const std::vector<std::size_t>& idx) const;
    std::vector<std::size_t> unravel(std::size_t f) const;
    Vec node(const std::vector<std::size_t>& idx) const;
    Vec node(std::size_t f) const { return node(unravel(f)); }
    /// Flat index of the node closest to r (per-axis nearest).
    std::size_t nearest(const Vec& r) const;
    bool contains(const Vec& r) const;  // inside the bounding box
    double min_spacing() const;
};

/// Scalar field sampled on a tensor grid, evaluated by separable
/// cubic splines (spline along the last axis, then recursively up).
class GridField {
public:
    GridField() = default;
    GridField(Grid grid, std::vector<double> values);

    double eval(const Vec& r) const;
    double partial(const Vec& r, int axis) const;
    Vec gradient(const Vec& r) const;
    const Grid& grid() const { return grid_; }
    const std::vector<double>& values() const { return vals_; }

private:
    double eval_rec(int axis, std::size_t offset, const Vec& r, int daxis) const;

    Grid grid_;
    std::vector<double> vals_;
};

/// A vector-valued field on a shared grid: one GridField per component.
class VectorGridField {
public:
    VectorGridField() = default;
    /// values[flat] is the vector at grid node flat.
    VectorGridField(const Grid& grid, const std::vector<Vec>& values);

    Vec eval(const Vec& r) const;
    /// Jacobian d(value)/dr, rows = components, cols = grid axes.
    Mat jacobian(const Vec& r) const;
    int components() const { return static_cast<int>(comp_.size()); }
    const Grid& grid() const;
    const GridField& component(int c) const { return comp_[c]; }

private:
    std::vector<GridField> comp_;
};

}  // namespace aatk
