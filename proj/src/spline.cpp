#include "aatk/spline.hpp"

#include <algorithm>
#include <cmath>

namespace aatk {

Spline1D::Spline1D(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    require(n == y_.size() && n >= 1, "spline: node/value count mismatch");
    for (std::size_t i = 0; i + 1 < n; ++i)
        require(x_[i] < x_[i + 1], "spline: nodes must be strictly increasing");
    m_.assign(n, 0.0);
    if (n <= 2) return;  // constant / linear

    Mat A = Mat::Zero(n, n);
    Vec b = Vec::Zero(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double hl = x_[i] - x_[i - 1], hr = x_[i + 1] - x_[i];
        A(i, i - 1) = hl / 6.0;
        A(i, i) = (hl + hr) / 3.0;
        A(i, i + 1) = hr / 6.0;
        b(i) = (y_[i + 1] - y_[i]) / hr - (y_[i] - y_[i - 1]) / hl;
    }
    if (n == 3) {
        A(0, 0) = 1.0;          // natural
        A(n - 1, n - 1) = 1.0;
    } else {
        // not-a-knot: third derivative continuous across the second
        // and next-to-last nodes
        const double h0 = x_[1] - x_[0], h1 = x_[2] - x_[1];
        A(0, 0) = h1;
        A(0, 1) = -(h0 + h1);
        A(0, 2) = h0;
        const double hm = x_[n - 2] - x_[n - 3], he = x_[n - 1] - x_[n - 2];
        A(n - 1, n - 3) = he;
        A(n - 1, n - 2) = -(hm + he);
        A(n - 1, n - 1) = hm;
    }
    Vec m = A.partialPivLu().solve(b);
    for (std::size_t i = 0; i < n; ++i) m_[i] = m(i);
}

std::size_t Spline1D::interval(double t) const {
    const std::size_t n = x_.size();
    if (t <= x_[0]) return 0;
    if (t >= x_[n - 1]) return n - 2;
    auto it = std::upper_bound(x_.begin(), x_.end(), t);
    return static_cast<std::size_t>(it - x_.begin()) - 1;
}

double Spline1D::eval(double t) const {
    const std::size_t n = x_.size();
    if (n == 1) return y_[0];
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
    return a * y_[i] + b * y_[i + 1] +
           ((a * a * a - a) * m_[i] + (b * b * b - b) * m_[i + 1]) * h * h / 6.0;
}

double Spline1D::deriv(double t) const {
    const std::size_t n = x_.size();
    if (n == 1) return 0.0;
    const std::size_t i = interval(t);
    const double h = x_[i + 1] - x_[i];
    const double a = (x_[i + 1] - t) / h, b = (t - x_[i]) / h;
    return (y_[i + 1] - y_[i]) / h +
           ((3.0 * b * b - 1.0) * m_[i + 1] - (3.0 * a * a - 1.0) * m_[i]) * h / 6.0;
}

// -- Grid ---------------------------------------------------------------------

std::size_t Grid::size() const {
    std::size_t s = 1;
    for (const auto& a : axes) s *= a.size();
    return s;
}

std::size_t Grid::stride(int axis) const {
    std::size_t s = 1;
    for (int a = axis + 1; a < dim(); ++a) s *= axes[a].size();
    return s;
}

std::size_t Grid::flat(const std::vector<std::size_t>& idx) const {
    std::size_t f = 0;
    for (int a = 0; a < dim(); ++a) f += idx[a] * stride(a);
    return f;
}

std::vector<std::size_t> Grid::unravel(std::size_t f) const {
    std::vector<std::size_t> idx(axes.size());
    for (int a = 0; a < dim(); ++a) {
        const std::size_t s = stride(a);
        idx[a] = f / s;
        f %= s;
    }
    return idx;
}

Vec Grid::node(const std::vector<std::size_t>& idx) const {
    Vec r(dim());
    for (int a = 0; a < dim(); ++a) r[a] = axes[a][idx[a]];
    return r;
}

std::size_t Grid::nearest(const Vec& r) const {
    std::vector<std::size_t> idx(axes.size());
    for (int a = 0; a < dim(); ++a) {
        const auto& ax = axes[a];
        std::size_t best = 0;
        double d = std::fabs(r[a] - ax[0]);
        for (std::size_t j = 1; j < ax.size(); ++j) {
            const double dj = std::fabs(r[a] - ax[j]);
            if (dj < d) { d = dj; best = j; }
        }
        idx[a] = best;
    }
    return flat(idx);
}

bool Grid::contains(const Vec& r) const {
    for (int a = 0; a < dim(); ++a)
        if (r[a] < axes[a].front() || r[a] > axes[a].back()) return false;
    return true;
}

double Grid::min_spacing() const {
    double h = std::numeric_limits<double>::infinity();
    for (const auto& ax : axes)
        for (std::size_t j = 0; j + 1 < ax.size(); ++j)
            h = std::min(h, ax[j + 1] - ax[j]);
    return h;
}

// -- GridField ----------------------------------------------------------------

GridField::GridField(Grid grid, std::vector<double> values)
    : grid_(std::move(grid)), vals_(std::move(values)) {
    require(vals_.size() == grid_.size(), "grid field: value count mismatch");
}

double GridField::eval_rec(int axis, std::size_t offset, const Vec& r, int daxis) const {
    const auto& ax = grid_.axes[axis];
    const std::size_t n = ax.size();
    std::vector<double> line(n);
    if (axis == grid_.dim() - 1) {
        for (std::size_t j = 0; j < n; ++j) line[j] = vals_[offset + j];
    } else {
        const std::size_t s = grid_.stride(axis);
        for (std::size_t j = 0; j < n; ++j)
            line[j] = eval_rec(axis + 1, offset + j * s, r, daxis);
    }
    if (n == 1) return (axis == daxis) ? 0.0 : line[0];
    if (n == 2) {
        const double slope = (line[1] - line[0]) / (ax[1] - ax[0]);
        if (axis == daxis) return slope;
        return line[0] + slope * (r[axis] - ax[0]);
    }
    Spline1D sp(ax, line);
    return (axis == daxis) ? sp.deriv(r[axis]) : sp.eval(r[axis]);
}

double GridField::eval(const Vec& r) const {
    require(r.size() == grid_.dim(), "grid field: point dimension mismatch");
    return eval_rec(0, 0, r, -1);
}

double GridField::partial(const Vec& r, int axis) const {
    require(r.size() == grid_.dim(), "grid field: point dimension mismatch");
    return eval_rec(0, 0, r, axis);
}

Vec GridField::gradient(const Vec& r) const {
    Vec g(grid_.dim());
    for (int a = 0; a < grid_.dim(); ++a) g[a] = partial(r, a);
    return g;
}

// -- VectorGridField ----------------------------------------------------------

VectorGridField::VectorGridField(const Grid& grid, const std::vector<Vec>& values) {
    require(values.size() == grid.size(), "vector grid field: node count mismatch");
    const int nc = static_cast<int>(values.empty() ? 0 : values[0].size());
    comp_.reserve(nc);
    for (int c = 0; c < nc; ++c) {
        std::vector<double> v(values.size());
        for (std::size_t f = 0; f < values.size(); ++f) v[f] = values[f][c];
        comp_.emplace_back(grid, std::move(v));
    }
}

Vec VectorGridField::eval(const Vec& r) const {
    Vec out(components());
    for (int c = 0; c < components(); ++c) out[c] = comp_[c].eval(r);
    return out;
}

Mat VectorGridField::jacobian(const Vec& r) const {
    Mat J(components(), grid().dim());
    for (int c = 0; c < components(); ++c)
        for (int a = 0; a < grid().dim(); ++a) J(c, a) = comp_[c].partial(r, a);
    return J;
}

const Grid& VectorGridField::grid() const {
    require(!comp_.empty(), "vector grid field: empty");
    return comp_[0].grid();
}

}  // namespace aatk
