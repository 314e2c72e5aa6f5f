#include "aatk/section.hpp"

#include <cmath>
#include <deque>

namespace aatk {

BaseMap level_base_map(std::shared_ptr<const HamiltonianSystem> S) {
    BaseMap b;
    b.out_dim = S->k();
    b.value = [S](const Vec& z) { return S->level(z); };
    b.jacobian = [S](const Vec& z) { return S->level_jacobian(z); };
    return b;
}

Vec solve_onto_fibre(const BaseMap& base, const Vec& r, Vec seed, double tol,
                     int max_iters) {
    const double target = tol * (1.0 + inf_norm(r));
    Vec z = std::move(seed);
    Vec res = r - base.value(z);
    double rn = inf_norm(res);
    for (int it = 0; it < max_iters; ++it) {
        if (rn <= target) return z;
        const Mat J = base.jacobian(z);
        Eigen::LDLT<Mat> ldlt(Mat(J * J.transpose()));
        if (ldlt.info() != Eigen::Success)
            throw SectionConstructionError(
                "section: level Jacobian lost rank (grid leaves the regular region)");
        const Vec dz = J.transpose() * ldlt.solve(res);
        double step = 1.0;
        for (int half = 0;; ++half) {
            const Vec z_try = z + step * dz;
            const Vec res_try = r - base.value(z_try);
            const double rn_try = inf_norm(res_try);
            if (rn_try < rn || rn_try <= target) {
                z = z_try;
                res = res_try;
                rn = rn_try;
                break;
            }
            step *= 0.5;
            if (half >= 12)
                throw SectionConstructionError(
                    "section: Gauss-Newton stalled at residual " + std::to_string(rn) +
                    " (grid too coarse or outside the fibred neighbourhood)");
        }
    }
    throw SectionConstructionError("section: Gauss-Newton did not converge");
}

Section::Section(BaseMap base, Grid grid, std::vector<Vec> nodes)
    : base_(std::move(base)), grid_(std::move(grid)), nodes_(std::move(nodes)) {
    require(nodes_.size() == grid_.size(), "section: node count mismatch");
    for (std::size_t f = 0; f < nodes_.size(); ++f) {
        const Vec r = grid_.node(f);
        if (inf_norm(base_.value(nodes_[f]) - r) > 1e-9 * (1.0 + inf_norm(r)))
            throw SectionConstructionError("section: node " + std::to_string(f) +
                                           " is not on its fibre");
    }
    interp_ = VectorGridField(grid_, nodes_);
}

Vec Section::at(const Vec& r) const {
    require(r.size() == grid_.dim(), "section: base point dimension mismatch");
    return solve_onto_fibre(base_, r, interp_.eval(r), 1e-13);
}

Mat Section::derivative(const Vec& r) const {
    const double h = 1e-5 * (1.0 + inf_norm(r));
    Mat D(nodes_[0].size(), grid_.dim());
    for (int a = 0; a < grid_.dim(); ++a) {
        Vec rp = r, rm = r;
        rp[a] += h;
        rm[a] -= h;
        D.col(a) = (at(rp) - at(rm)) / (2 * h);
    }
    return D;
}

Section build_section(const BaseMap& base, const Vec& z_M, Grid grid) {
    require(grid.dim() == base.out_dim, "build_section: grid dimension mismatch");
    const Vec r_M = base.value(z_M);
    const std::size_t total = grid.size();
    std::vector<Vec> nodes(total);
    std::vector<bool> solved(total, false);

    const std::size_t start = grid.nearest(r_M);
    const Vec r_start = grid.node(start);
    if (inf_norm(r_start - r_M) <= 1e-12 * (1.0 + inf_norm(r_M))) {
        nodes[start] = z_M;
    } else {
        nodes[start] = solve_onto_fibre(base, r_start, z_M);
    }
    solved[start] = true;

    // breadth-first over grid neighbours, each node seeded from its parent
    std::deque<std::size_t> queue{start};
    while (!queue.empty()) {
        const std::size_t f = queue.front();
        queue.pop_front();
        const auto idx = grid.unravel(f);
        for (int a = 0; a < grid.dim(); ++a) {
            for (int dir = -1; dir <= 1; dir += 2) {
                auto nb = idx;
                if (dir < 0 && nb[a] == 0) continue;
                if (dir > 0 && nb[a] + 1 == grid.axes[a].size()) continue;
                nb[a] += dir;
                const std::size_t g = grid.flat(nb);
                if (solved[g]) continue;
                nodes[g] = solve_onto_fibre(base, grid.node(nb), nodes[f]);
                solved[g] = true;
                queue.push_back(g);
            }
        }
    }

    // continuity guard: a node jumping far from its neighbours signals a
    // branch switch during shooting
    double med_jump = 0.0;
    std::vector<double> jumps;
    for (std::size_t f = 0; f < total; ++f) {
        const auto idx = grid.unravel(f);
        for (int a = 0; a < grid.dim(); ++a) {
            if (idx[a] + 1 == grid.axes[a].size()) continue;
            auto nb = idx;
            nb[a] += 1;
            jumps.push_back(inf_norm(nodes[grid.flat(nb)] - nodes[f]));
        }
    }
    if (!jumps.empty()) {
        std::vector<double> srt = jumps;
        std::nth_element(srt.begin(), srt.begin() + srt.size() / 2, srt.end());
        med_jump = srt[srt.size() / 2];
        for (double j : jumps)
            if (j > std::max(20.0 * med_jump, 1e-6))
                throw SectionConstructionError(
                    "section: discontinuous node jump detected (grid too coarse)");
    }
    return Section(base, std::move(grid), std::move(nodes));
}

Section build_section(std::shared_ptr<const HamiltonianSystem> S, const Vec& z_M,
                      Grid grid) {
    return build_section(level_base_map(std::move(S)), z_M, std::move(grid));
}

}  // namespace aatk
