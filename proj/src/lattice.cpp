#include "aatk/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace aatk {

Mat IsotropyLattice::B() const {
    Mat b(static_cast<int>(a_indices.size()), m);
    for (std::size_t r = 0; r < a_indices.size(); ++r)
        b.row(static_cast<int>(r)) = generators.row(a_indices[r]);
    return b;
}

Mat IsotropyLattice::C() const {
    Mat c(m, m);
    for (std::size_t r = 0; r < i_indices.size(); ++r)
        c.row(static_cast<int>(r)) = generators.row(i_indices[r]);
    return c;
}

double IsotropyLattice::det_C() const { return m == 0 ? 1.0 : C().determinant(); }

Vec FrameMatrix::apply(const Vec& s) const {
    const int k = static_cast<int>(a_indices.size() + i_indices.size());
    Vec perm(k);
    int slot = 0;
    for (int a : a_indices) perm[slot++] = s[a];
    for (int i : i_indices) perm[slot++] = s[i];
    const Vec out_perm = A * perm;
    Vec out(k);
    slot = 0;
    for (int a : a_indices) out[a] = out_perm[slot++];
    for (int i : i_indices) out[i] = out_perm[slot++];
    return out;
}

namespace {

struct NewtonOutcome {
    Vec s;
    double residual;
    bool converged;
};

/// Damped Gauss-Newton on R(s) = g(s) z0 - z0, least-squares in the
/// fibre-tangent directions spanned by the Hamiltonian fields.
NewtonOutcome newton_return(const HamiltonianSystem& S, const Vec& z0, Vec s,
                            const FlowConfig& fcfg, const LatticeConfig& lcfg) {
    const double scale = 1.0 + inf_norm(z0);
    const double target = lcfg.return_tol * scale;
    Vec z = group_action(S, z0, s, fcfg);
    Vec R = z - z0;
    double rn = inf_norm(R);
    for (int it = 0; it < lcfg.max_newton_iters; ++it) {
        if (rn < target) return {s, rn, true};
        const Mat J = S.hvf_matrix(z);  // d g(s) z0 / d s_lam = theta_lam at the endpoint
        Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.singularValues()(S.k() - 1) < 1e-12 * svd.singularValues()(0))
            throw DegenerateFibreError("refine_return: Newton system is rank deficient");
        const Vec ds = svd.solve(-R);
        double step = 1.0;
        for (int half = 0; half < 10; ++half) {
            const Vec s_try = s + step * ds;
            const Vec z_try = group_action(S, z0, s_try, fcfg);
            const double rn_try = inf_norm(z_try - z0);
            if (rn_try < rn || rn_try < target) {
                s = s_try;
                z = z_try;
                R = z - z0;
                rn = rn_try;
                break;
            }
            step *= 0.5;
            if (half == 9) return {s, rn, false};  // stalled
        }
    }
    return {s, rn, rn < target};
}

void size_reduce(Vec& c, const std::vector<Vec>& basis) {
    bool changed = true;
    while (changed) {
        changed = false;
        for (const Vec& u : basis) {
            const double q = std::round(c.dot(u) / u.squaredNorm());
            if (q != 0.0) {
                c -= q * u;
                changed = true;
            }
        }
    }
}

void normalize_sign(Vec& v) {
    int arg = 0;
    for (Eigen::Index i = 1; i < v.size(); ++i)
        if (std::fabs(v[i]) > std::fabs(v[arg])) arg = static_cast<int>(i);
    if (v[arg] < 0) v = -v;
}

}  // namespace

std::vector<Vec> detect_recurrences(const HamiltonianSystem& S, const Vec& z0,
                                    const Vec& box_lo, const Vec& box_hi,
                                    double tol, int grid_per_axis,
                                    const FlowConfig& fcfg, const LatticeConfig& lcfg) {
    const int k = S.k();
    require(box_lo.size() == k && box_hi.size() == k, "detect_recurrences: box dimension");
    for (int a = 0; a < k; ++a)
        require(box_lo[a] < 0.0 && box_hi[a] > 0.0,
                "detect_recurrences: box must contain 0 in its interior");
    require(grid_per_axis >= 2, "detect_recurrences: grid too coarse");

    const double scale = 1.0 + inf_norm(z0);

    // Per-axis marching values: 0 outward in both directions, so each arm can
    // be integrated incrementally.
    std::vector<std::vector<double>> arms_pos(k), arms_neg(k);
    std::vector<std::vector<double>> values(k);  // sorted, for neighbor tests
    for (int a = 0; a < k; ++a) {
        const double step = (box_hi[a] - box_lo[a]) / grid_per_axis;
        for (double v = step; v <= box_hi[a] + 1e-12 * step; v += step)
            arms_pos[a].push_back(v);
        for (double v = -step; v >= box_lo[a] - 1e-12 * step; v -= step)
            arms_neg[a].push_back(v);
        values[a] = arms_neg[a];
        std::reverse(values[a].begin(), values[a].end());
        values[a].push_back(0.0);
        values[a].insert(values[a].end(), arms_pos[a].begin(), arms_pos[a].end());
    }

    // Distance-to-start over the grid, indexed by per-axis positions in values[].
    std::vector<std::size_t> shape(k);
    std::size_t total = 1;
    for (int a = 0; a < k; ++a) {
        shape[a] = values[a].size();
        total *= shape[a];
    }
    std::vector<double> dist(total, std::numeric_limits<double>::quiet_NaN());
    std::vector<std::size_t> stride(k, 1);
    for (int a = k - 2; a >= 0; --a) stride[a] = stride[a + 1] * shape[a + 1];
    auto value_pos = [&](int axis, double v) {
        const auto& vs = values[axis];
        return static_cast<std::size_t>(
            std::min_element(vs.begin(), vs.end(),
                             [v](double x, double y) {
                                 return std::fabs(x - v) < std::fabs(y - v);
                             }) -
            vs.begin());
    };

    // March axis by axis: fix the flows of axes < axis, then walk this axis
    // from 0 outward reusing the partial trajectory.
    std::vector<std::size_t> idx(k, 0);
    auto scan = [&](auto&& self, int axis, const Vec& w) -> void {
        if (axis == k) {
            double d = inf_norm(w - z0);
            dist[std::inner_product(idx.begin(), idx.end(), stride.begin(),
                                    std::size_t{0})] = d;
            return;
        }
        idx[axis] = value_pos(axis, 0.0);
        self(self, axis + 1, w);
        for (int arm = 0; arm < 2; ++arm) {
            const auto& vals = (arm == 0) ? arms_pos[axis] : arms_neg[axis];
            Vec zc = w;
            double prev = 0.0;
            for (double v : vals) {
                zc = flow(S, axis, zc, v - prev, fcfg);
                prev = v;
                idx[axis] = value_pos(axis, v);
                self(self, axis + 1, zc);
            }
        }
    };
    scan(scan, 0, z0);

    // Local minima below the promotion threshold, refined by Gauss-Newton.
    const double promote = lcfg.promote_frac * scale;
    std::vector<Vec> found;
    std::vector<std::size_t> it(k, 0);
    for (std::size_t f = 0; f < total; ++f) {
        std::size_t rem = f;
        bool at_zero = true;
        for (int a = 0; a < k; ++a) {
            it[a] = rem / stride[a];
            rem %= stride[a];
            if (values[a][it[a]] != 0.0) at_zero = false;
        }
        const double d = dist[f];
        if (at_zero || !(d < promote)) continue;
        bool is_min = true;
        for (int a = 0; a < k && is_min; ++a) {
            if (it[a] > 0 && dist[f - stride[a]] < d) is_min = false;
            if (it[a] + 1 < shape[a] && dist[f + stride[a]] < d) is_min = false;
        }
        if (!is_min) continue;
        Vec s(k);
        for (int a = 0; a < k; ++a) s[a] = values[a][it[a]];
        NewtonOutcome out = newton_return(S, z0, s, fcfg, lcfg);
        if (out.converged && out.residual < tol * scale) found.push_back(out.s);
    }

    // Deduplicate within half a grid spacing; drop the trivial s = 0.
    double min_step = std::numeric_limits<double>::infinity();
    for (int a = 0; a < k; ++a)
        min_step = std::min(min_step, (box_hi[a] - box_lo[a]) / grid_per_axis);
    std::sort(found.begin(), found.end(), [](const Vec& x, const Vec& y) {
        if (x.norm() != y.norm()) return x.norm() < y.norm();
        return std::lexicographical_compare(x.data(), x.data() + x.size(),
                                            y.data(), y.data() + y.size());
    });
    std::vector<Vec> unique;
    for (const Vec& s : found) {
        if (inf_norm(s) < 0.5 * min_step) continue;
        bool dup = false;
        for (const Vec& u : unique)
            if (inf_norm(s - u) < 0.5 * min_step) dup = true;
        if (!dup) unique.push_back(s);
    }
    return unique;
}

Vec refine_return(const HamiltonianSystem& S, const Vec& z0, const Vec& s_guess,
                  const FlowConfig& fcfg, const LatticeConfig& lcfg) {
    require(s_guess.size() == S.k(), "refine_return: guess dimension mismatch");
    NewtonOutcome out = newton_return(S, z0, s_guess, fcfg, lcfg);
    if (!out.converged)
        throw RefinementError("refine_return: Newton stalled at residual " +
                              std::to_string(out.residual));
    return out.s;
}

IsotropyLattice lattice_from_returns(int k, const std::vector<Vec>& candidates,
                                     double tol, const LatticeConfig& lcfg) {
    IsotropyLattice L;
    L.k = k;
    L.m = 0;
    L.generators = Mat::Zero(k, 0);
    std::vector<Vec> sorted = candidates;
    std::sort(sorted.begin(), sorted.end(),
              [](const Vec& x, const Vec& y) { return x.norm() < y.norm(); });

    std::vector<Vec> basis;
    for (const Vec& cand : sorted) {
        require(cand.size() == k, "lattice_from_returns: candidate dimension mismatch");
        Vec c = cand;
        size_reduce(c, basis);
        if (inf_norm(c) <= tol) continue;  // already in the lattice
        basis.push_back(c);
        // Lagrange-Gauss style pairwise reduction until stable
        bool changed = true;
        while (changed) {
            changed = false;
            std::sort(basis.begin(), basis.end(),
                      [](const Vec& x, const Vec& y) { return x.norm() < y.norm(); });
            for (std::size_t i = 0; i < basis.size(); ++i)
                for (std::size_t j = 0; j < basis.size(); ++j) {
                    if (i == j) continue;
                    const double q = std::round(basis[j].dot(basis[i]) /
                                                basis[i].squaredNorm());
                    if (q != 0.0) {
                        basis[j] -= q * basis[i];
                        changed = true;
                    }
                }
            basis.erase(std::remove_if(basis.begin(), basis.end(),
                                       [&](const Vec& v) { return inf_norm(v) <= tol; }),
                        basis.end());
        }
    }

    // Closure: every candidate must be an integer combination of the basis.
    if (!basis.empty()) {
        Mat G(k, static_cast<int>(basis.size()));
        for (std::size_t j = 0; j < basis.size(); ++j) G.col(static_cast<int>(j)) = basis[j];
        for (const Vec& cand : sorted) {
            const Vec x = lstsq(G, cand);
            Vec xi = x;
            for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = std::round(xi[i]);
            if (inf_norm(G * xi - cand) > std::max(tol, 1e-9 * cand.norm()))
                throw InconsistentLatticeError(
                    "return candidates are not integer combinations of one basis "
                    "(search box or tolerance problem)");
        }
    }

    L.m = static_cast<int>(basis.size());
    if (L.m > k)
        throw InconsistentLatticeError("lattice rank exceeds the number of flows");
    L.generators.resize(k, L.m);
    for (int j = 0; j < L.m; ++j) {
        Vec v = basis[j];
        normalize_sign(v);
        L.generators.col(j) = v;
    }
    // Deterministic column order
    std::vector<int> order(L.m);
    for (int j = 0; j < L.m; ++j) order[j] = j;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const Vec va = L.generators.col(a), vb = L.generators.col(b);
        if (va.norm() != vb.norm()) return va.norm() < vb.norm();
        return std::lexicographical_compare(va.data(), va.data() + k, vb.data(),
                                            vb.data() + k);
    });
    Mat g(k, L.m);
    for (int j = 0; j < L.m; ++j) g.col(j) = L.generators.col(order[j]);
    L.generators = g;

    if (L.m > 0) {
        Eigen::JacobiSVD<Mat> svd(L.generators);
        if (svd.singularValues()(L.m - 1) < lcfg.independence_min)
            throw InconsistentLatticeError("lattice generators are numerically dependent");
    }

    // Basis split: maximize |det C| over index subsets, lexicographic tie-break.
    std::vector<int> subset(L.m);
    std::vector<int> best;
    double best_det = -1.0;
    auto enumerate = [&](auto&& self, int start, int depth) -> void {
        if (depth == L.m) {
            Mat C(L.m, L.m);
            for (int r = 0; r < L.m; ++r) C.row(r) = L.generators.row(subset[r]);
            const double d = std::fabs(C.determinant());
            if (d > best_det * (1.0 + 1e-12)) {
                best_det = d;
                best = subset;
            }
            return;
        }
        for (int i = start; i < k; ++i) {
            subset[depth] = i;
            self(self, i + 1, depth + 1);
        }
    };
    if (L.m > 0) enumerate(enumerate, 0, 0);
    if (L.m > 0 && best_det < lcfg.det_c_min)
        throw DegeneracyError("no basis split gives a nondegenerate C matrix");
    L.i_indices = best.empty() ? VecI{} : VecI(best.begin(), best.end());
    for (int i = 0; i < k; ++i)
        if (std::find(L.i_indices.begin(), L.i_indices.end(), i) == L.i_indices.end())
            L.a_indices.push_back(i);
    return L;
}

FrameMatrix frame_matrix(const IsotropyLattice& L0, const IsotropyLattice& Lr) {
    require(L0.k == Lr.k && L0.m == Lr.m, "frame_matrix: rank mismatch");
    require(L0.a_indices == Lr.a_indices && L0.i_indices == Lr.i_indices,
            "frame_matrix: basis splits differ");
    const int k = L0.k, m = L0.m, na = k - m;
    FrameMatrix F;
    F.a_indices = L0.a_indices;
    F.i_indices = L0.i_indices;
    F.A = Mat::Identity(k, k);
    if (m == 0) return F;
    const Mat C0 = L0.C();
    Eigen::FullPivLU<Mat> lu(C0);
    if (!lu.isInvertible() || std::fabs(C0.determinant()) < 1e-12)
        throw DegeneracyError("frame_matrix: C(0) is singular");
    const Mat C0inv = lu.inverse();
    F.A.block(0, na, na, m) = (Lr.B() - L0.B()) * C0inv;
    F.A.block(na, na, m, m) = Lr.C() * C0inv;
    return F;
}

std::vector<IsotropyLattice> continue_lattice(
    const HamiltonianSystem& S, const IsotropyLattice& lattice0,
    const std::function<Vec(const Vec&)>& section, const std::vector<Vec>& path,
    const FlowConfig& fcfg, const LatticeConfig& lcfg) {
    require(!path.empty(), "continue_lattice: empty path");
    std::vector<IsotropyLattice> out;
    out.push_back(lattice0);
    for (std::size_t j = 1; j < path.size(); ++j) {
        const Vec sigma = section(path[j]);
        IsotropyLattice L = out.back();
        for (int g = 0; g < L.m; ++g) {
            const Vec prev = out.back().generators.col(g);
            const Vec refined = refine_return(S, sigma, prev, fcfg, lcfg);
            const double change = inf_norm(refined - prev) / (1.0 + prev.norm());
            if (change > 0.1)
                throw NumericalError(
                    "continue_lattice: generator moved by " + std::to_string(change) +
                    " in one step; refine the path");
            L.generators.col(g) = refined;
        }
        if (L.m > 0 && std::fabs(L.det_C()) < lcfg.det_c_min)
            throw ShrinkNeighbourhoodError(
                "continue_lattice: det C degenerated along the path; "
                "the trivializable neighbourhood has been exited");
        out.push_back(L);
    }
    return out;
}

}  // namespace aatk
