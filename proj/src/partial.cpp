#include "aatk/partial.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "gauss_legendre.hpp"

namespace aatk {

using detail::GL8_W;
using detail::GL8_X;
using detail::gl8_line;

TransversalChart build_transversal(const HamiltonianSystem& S, const Vec& z_M,
                                   double extent) {
    S.check_point(z_M);
    require(extent > 0, "build_transversal: extent must be positive");
    const int k = S.k(), dim = S.dim();
    const int nz = dim - 2 * k;
    TransversalChart t;
    t.z_M = z_M;
    t.extent = extent;
    if (nz == 0) {  // complete case: empty transversal
        t.slice_basis = Mat::Zero(dim, 0);
        return t;
    }
    Mat span(dim, 2 * k);
    span.block(0, 0, dim, k) = S.hvf_matrix(z_M);
    span.block(0, k, dim, k) = S.level_jacobian(z_M).transpose();
    Eigen::JacobiSVD<Mat> svd(span, Eigen::ComputeFullU);
    const Vec sv = svd.singularValues();
    if (sv(2 * k - 1) <= 1e-8 * sv(0))
        throw RegularityError(
            "build_transversal: leaf tangents and gradients are degenerate at z_M "
            "(point not regular)");
    Mat basis = svd.matrixU().rightCols(nz);  // orthogonal complement

    // deterministic orientation and order: largest entry positive, columns
    // sorted by the position of their largest entry
    std::vector<int> order(nz);
    std::vector<int> arg(nz);
    for (int c = 0; c < nz; ++c) {
        int a = 0;
        for (int r = 1; r < dim; ++r)
            if (std::fabs(basis(r, c)) > std::fabs(basis(a, c))) a = r;
        if (basis(a, c) < 0) basis.col(c) = -basis.col(c);
        arg[c] = a;
        order[c] = c;
    }
    std::sort(order.begin(), order.end(), [&](int x, int y) { return arg[x] < arg[y]; });
    Mat sorted(dim, nz);
    for (int c = 0; c < nz; ++c) sorted.col(c) = basis.col(order[c]);
    t.slice_basis = sorted;
    return t;
}

HolonomyReport holonomy_check(const HamiltonianSystem& S,
                              const TransversalChart& transversal,
                              const std::vector<LeafLoop>& loops, double tol,
                              const FlowConfig& fcfg) {
    HolonomyReport rep;
    const Vec& z_M = transversal.z_M;
    // directions spanned by leaf tangents and gradients at z_M: distance from
    // the slice is measured against them
    Mat span(S.dim(), 2 * S.k());
    span.block(0, 0, S.dim(), S.k()) = S.hvf_matrix(z_M);
    span.block(0, S.k(), S.dim(), S.k()) = S.level_jacobian(z_M).transpose();
    Eigen::HouseholderQR<Mat> qr(span);
    const Mat Q = Mat(qr.householderQ()).leftCols(2 * S.k());

    for (const LeafLoop& loop : loops) {
        const Vec z_end = group_action(S, loop.start, loop.s, fcfg);
        const Vec d = z_end - loop.start;
        const double off_slice = inf_norm(Q.transpose() * d);
        ++rep.loops_run;
        if (off_slice > 0.05 * (1.0 + inf_norm(loop.start))) {
            ++rep.inconclusive;  // path did not come back near the slice
            continue;
        }
        rep.max_displacement = std::max(
            rep.max_displacement, inf_norm(transversal.slice_basis.transpose() * d));
    }
    if (rep.loops_run == rep.inconclusive)
        rep.verdict = "inconclusive";
    else
        rep.verdict = rep.max_displacement <= tol ? "supported" : "unsupported";
    return rep;
}

// -- PartialChart ----------------------------------------------------------------

namespace {

BaseMap partial_base_map(std::shared_ptr<const HamiltonianSystem> S,
                         const TransversalChart& t) {
    BaseMap b;
    const Mat U = t.slice_basis;
    const Vec z_M = t.z_M;
    b.out_dim = S->k() + t.nz();
    b.value = [S, U, z_M](const Vec& z) {
        Vec out(S->k() + U.cols());
        out.head(S->k()) = S->level(z);
        out.tail(U.cols()) = U.transpose() * (z - z_M);
        return out;
    };
    b.jacobian = [S, U](const Vec& z) {
        Mat J(S->k() + U.cols(), S->dim());
        J.topRows(S->k()) = S->level_jacobian(z);
        J.bottomRows(U.cols()) = U.transpose();
        return J;
    };
    return b;
}

std::vector<Vec> flatten_generators(const std::vector<Mat>& gens, int k, int m) {
    std::vector<Vec> out(gens.size());
    for (std::size_t f = 0; f < gens.size(); ++f) {
        Vec w(k * m);
        for (int j = 0; j < m; ++j) w.segment(j * k, k) = gens[f].col(j);
        out[f] = w;
    }
    return out;
}

}  // namespace

Vec PartialChart::base_of(const Vec& J, const Vec& zA) const {
    Vec b(k() + nz());
    b.head(k()) = J;
    b.tail(nz()) = zA;
    return b;
}

IsotropyLattice PartialChart::lattice_at(const Vec& base) const {
    IsotropyLattice L = anchor_;
    if (anchor_.m == 0) return L;
    const Vec w = gen_field_.eval(base);
    for (int j = 0; j < anchor_.m; ++j) L.generators.col(j) = w.segment(j * k(), k());
    return L;
}

Mat PartialChart::frame_at(const Vec& base) const {
    const int na = k() - m();
    Mat F = Mat::Zero(k(), k());
    for (int a = 0; a < na; ++a) F(anchor_.a_indices[a], a) = 1.0;
    if (m() > 0) {
        const Vec w = gen_field_.eval(base);
        for (int j = 0; j < m(); ++j) F.col(na + j) = w.segment(j * k(), k());
    }
    return F;
}

Vec PartialChart::actions_at(const Vec& base) const {
    Vec I = base.head(k());
    for (int j = 0; j < m(); ++j) I[anchor_.i_indices[j]] = xi_[j].eval(base);
    return I;
}

Vec PartialChart::shift_at(const Vec& base) const {
    Vec G = Vec::Zero(k());
    for (int y = 0; y < static_cast<int>(shift_fields_.size()); ++y)
        G[y] = shift_fields_[y].eval(base);
    return G;
}

Vec PartialChart::base_from_actions(const Vec& I, const Vec& zA) const {
    Vec J = anchor_base_.head(k());
    for (int a : anchor_.a_indices) J[a] = I[a];
    const double target = 1e-13 * (1.0 + inf_norm(I));
    double rn = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 60; ++it) {
        const Vec base = base_of(J, zA);
        const Vec F = actions_at(base) - I;
        rn = inf_norm(F);
        if (rn < target) return base;
        Mat D = Mat::Identity(k(), k());
        if (m() > 0) {
            const Vec w = gen_field_.eval(base);
            for (int j = 0; j < m(); ++j)
                D.row(anchor_.i_indices[j]) = w.segment(j * k(), k()).transpose() / TWO_PI;
        }
        J -= D.partialPivLu().solve(F);
    }
    throw ChartFailureError("partial chart: action inversion stalled");
}

Vec PartialChart::from_chart(const Coords& c) const {
    require(c.zA.size() == nz(), "partial chart: z coordinate size");
    if (nz() > 0 && inf_norm(c.zA) > transversal_.extent * 1.5)
        throw OffFibreError("partial chart: z coordinates outside the slice extent");
    const Vec base = base_from_actions(c.I, c.zA);
    Vec t = c.x;
    Vec phi = c.phi;
    if (!shift_fields_.empty()) {
        const Vec G = shift_at(base);
        t = c.x + G.head(k() - m());
        for (int j = 0; j < m(); ++j) phi[j] = wrap_angle(c.phi[j] + G[k() - m() + j]);
    }
    const int na = k() - m();
    Vec u(k());
    u.head(na) = t;
    for (int j = 0; j < m(); ++j) u[na + j] = phi[j] / TWO_PI;
    const Vec s = frame_at(base) * u;
    const Vec sigma = section_.at(base);
    return group_action(*sys_, sigma, s, fcfg_);
}

PartialChart::Coords PartialChart::to_chart(const Vec& z, const ShootConfig& scfg) const {
    sys_->check_point(z);
    const Vec J = sys_->level(z);
    const double target = scfg.tol * (1.0 + inf_norm(z));
    const int na = k() - m();

    // unknowns (s, zA); residual sigma(J, zA) - g(-s) z
    Vec s = Vec::Zero(k());
    Vec zA = transversal_.slice_coords(z);
    zA = zA.cwiseMax(-transversal_.extent).cwiseMin(transversal_.extent);
    {
        Vec base = base_of(J, zA);
        if (!grid().contains(base))
            throw OffFibreError("partial chart: (J, z) outside the chart base grid");
    }
    auto residual = [&](const Vec& sv, const Vec& zv) {
        const Vec w = group_action(*sys_, z, Vec(-sv), fcfg_);
        return Vec(w - section_.at(base_of(J, zv)));
    };
    Vec R = residual(s, zA);
    double rn = inf_norm(R);
    bool ok = rn < target;
    for (int it = 0; it < scfg.max_iters && !ok; ++it) {
        const Vec w = group_action(*sys_, z, Vec(-s), fcfg_);
        Mat Jm(sys_->dim(), k() + nz());
        Jm.leftCols(k()) = -sys_->hvf_matrix(w);
        const Vec base = base_of(J, zA);
        const Mat Dsec = section_.derivative(base);
        for (int a = 0; a < nz(); ++a) Jm.col(k() + a) = -Dsec.col(k() + a);
        const Vec d = lstsq(Jm, Vec(-R));
        double step = 1.0;
        bool advanced = false;
        for (int half = 0; half < 8; ++half) {
            const Vec s_try = s + step * d.head(k());
            const Vec z_try = zA + step * d.tail(nz());
            const Vec R_try = residual(s_try, z_try);
            if (inf_norm(R_try) < rn || inf_norm(R_try) < target) {
                s = s_try;
                zA = z_try;
                R = R_try;
                rn = inf_norm(R);
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if (!advanced) break;
        ok = rn < target;
    }
    if (!ok)
        throw OffFibreError("partial chart: leaf-space shooting did not converge");

    const Vec base = base_of(J, zA);
    const Vec u = frame_at(base).partialPivLu().solve(s);
    Coords c;
    c.zA = zA;
    c.x = u.head(na);
    c.phi.resize(m());
    for (int j = 0; j < m(); ++j) c.phi[j] = wrap_angle(TWO_PI * u[na + j]);
    Vec t = c.x;
    Vec phi = c.phi;
    if (!shift_fields_.empty()) {
        const Vec G = shift_at(base);
        c.x = t - G.head(na);
        for (int j = 0; j < m(); ++j) c.phi[j] = wrap_angle(phi[j] - G[na + j]);
    }
    c.I = actions_at(base);
    return c;
}

SymplecticSample PartialChart::verify_block_form(const Coords& c, double fd_step) const {
    const int na = k() - m();
    Vec zeta(k() + nz() + na + m());
    zeta.head(k()) = c.I;
    zeta.segment(k(), nz()) = c.zA;
    zeta.segment(k() + nz(), na) = c.x;
    zeta.tail(m()) = c.phi;
    auto inverse_map = [&](const Vec& zt) {
        Coords cc;
        cc.I = zt.head(k());
        cc.zA = zt.segment(k(), nz());
        cc.x = zt.segment(k() + nz(), na);
        cc.phi = zt.tail(m());
        return from_chart(cc);
    };
    return sample_pullback(*sys_, inverse_map, zeta, k(), nz(), na, m(),
                           anchor_.a_indices, anchor_.i_indices, fd_step);
}

double PartialChart::block_independence_residual(const Coords& c, int samples,
                                                 unsigned seed, double fd_step) const {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uphi(0.0, TWO_PI);
    std::uniform_real_distribution<double> ut(-0.5, 0.5);
    Mat first_zz, first_zI;
    double worst = 0.0;
    for (int i = 0; i < samples; ++i) {
        Coords cc = c;
        for (int a = 0; a < cc.x.size(); ++a) cc.x[a] = ut(rng);
        for (int j = 0; j < cc.phi.size(); ++j) cc.phi[j] = uphi(rng);
        const SymplecticSample sm = verify_block_form(cc, fd_step);
        if (i == 0) {
            first_zz = sm.block_zz();
            first_zI = sm.block_zI();
        } else {
            worst = std::max(worst, (sm.block_zz() - first_zz).cwiseAbs().maxCoeff());
            worst = std::max(worst, (sm.block_zI() - first_zI).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

PartialChart build_partial_chart(std::shared_ptr<const HamiltonianSystem> S,
                                 const TransversalChart& transversal, Grid grid,
                                 const Vec& z_M, const IsotropyLattice& anchor,
                                 const FlowConfig& fcfg, const LatticeConfig& lcfg,
                                 double indep_tol, double exactness_tol) {
    const int k = S->k(), nz = transversal.nz(), m = anchor.m;
    require(grid.dim() == k + nz, "build_partial_chart: grid needs k + 2(n-k) axes");
    for (int a = 0; a < nz; ++a) {
        const auto& ax = grid.axes[k + a];
        require(ax.front() >= -transversal.extent && ax.back() <= transversal.extent,
                "build_partial_chart: z axes exceed the transversal extent");
    }

    PartialChart chart;
    chart.sys_ = S;
    chart.transversal_ = transversal;
    chart.anchor_ = anchor;
    chart.fcfg_ = fcfg;

    const BaseMap base = partial_base_map(S, transversal);
    chart.section_ = build_section(base, z_M, std::move(grid));
    const Grid& g = chart.section_.grid();
    chart.anchor_base_ = g.node(g.nearest(base.value(z_M)));

    try {
        chart.node_gens_ = continue_generators(*S, chart.section_, anchor,
                                               chart.anchor_base_, fcfg, lcfg);
    } catch (const RefinementError& e) {
        throw NonDiffeomorphicLeavesError(
            std::string("partial chart: lattice continuation failed across the "
                        "(J, z) grid; leaves are not mutually diffeomorphic (") +
            e.what() + ")");
    } catch (const ShrinkNeighbourhoodError& e) {
        throw NonDiffeomorphicLeavesError(
            std::string("partial chart: det C degenerated across the (J, z) grid (") +
            e.what() + ")");
    }
    if (m > 0)
        chart.gen_field_ = VectorGridField(g, flatten_generators(chart.node_gens_, k, m));

    // actions per leaf, with the z-independence check
    const std::size_t total = g.size();
    if (m > 0) {
        if (!S->model().has_liouville())
            throw ChartFailureError("build_partial_chart: action integrals need a "
                                    "Liouville primitive");
        std::vector<std::vector<double>> xi_vals(m, std::vector<double>(total, 0.0));
        for (std::size_t f = 0; f < total; ++f) {
            const Vec& sigma = chart.section_.nodes()[f];
            const Mat& gens = chart.node_gens_[f];
            for (int j = 0; j < m; ++j) {
                double acc = 0.0;
                const Vec end = flow_weighted(*S, gens.col(j), sigma, 1.0, fcfg, &acc);
                if (inf_norm(end - sigma) > 1e-7 * (1.0 + inf_norm(sigma)))
                    throw ChartFailureError(
                        "build_partial_chart: torus cycle failed to close");
                xi_vals[j][f] = acc / TWO_PI;
            }
        }
        // spread of Xi over the z-axes at fixed J must vanish
        double spread = 0.0;
        for (std::size_t f = 0; f < total; ++f) {
            auto idx = g.unravel(f);
            auto idx0 = idx;
            for (int a = 0; a < nz; ++a) idx0[k + a] = 0;
            const std::size_t f0 = g.flat(idx0);
            for (int j = 0; j < m; ++j)
                spread = std::max(spread,
                                  std::fabs(xi_vals[j][f] - xi_vals[j][f0]) /
                                      (1.0 + std::fabs(xi_vals[j][f0])));
        }
        chart.xi_z_dependence_ = spread;
        if (spread > indep_tol)
            throw ChartFailureError(
                "build_partial_chart: actions depend on the transversal coordinates "
                "(residual " + std::to_string(spread) + ")");
        for (int j = 0; j < m; ++j) chart.xi_.emplace_back(g, xi_vals[j]);
    }

    // shift potentials: solve the J-curl slice by slice in z
    {
        std::vector<std::vector<double>> w_vals(k * k, std::vector<double>(total, 0.0));
        for (std::size_t f = 0; f < total; ++f) {
            const Vec r = g.node(f);
            const Mat D = chart.section_.derivative(r);
            const Mat DJ = D.leftCols(k);
            const Mat W = DJ.transpose() *
                          S->model().omega(chart.section_.nodes()[f]) * DJ;
            for (int a = 0; a < k; ++a)
                for (int b = 0; b < k; ++b) w_vals[a * k + b][f] = W(a, b);
        }
        std::vector<GridField> w_field;
        w_field.reserve(k * k);
        for (int e = 0; e < k * k; ++e) w_field.emplace_back(g, w_vals[e]);
        auto W_at = [&](const Vec& base_pt, int row, int col) {
            return w_field[row * k + col].eval(base_pt);
        };
        const Vec J0 = chart.anchor_base_.head(k);
        double hmin = std::numeric_limits<double>::infinity();
        for (int a = 0; a < k; ++a)
            for (std::size_t j = 0; j + 1 < g.axes[a].size(); ++j)
                hmin = std::min(hmin, g.axes[a][j + 1] - g.axes[a][j]);
        if (!std::isfinite(hmin)) hmin = 1.0;

        std::vector<std::vector<double>> g_vals(k, std::vector<double>(total, 0.0));
        for (std::size_t f = 0; f < total; ++f) {
            const Vec node = g.node(f);
            const Vec Jn = node.head(k);
            const Vec zn = node.tail(nz);
            const Vec delta = Jn - J0;
            Vec eps = Vec::Zero(k);
            if (inf_norm(delta) > 0.0) {
                const int segments = std::max(
                    2, static_cast<int>(std::ceil(2.0 * inf_norm(delta) / hmin)));
                for (int alpha = 0; alpha < k; ++alpha) {
                    eps[alpha] = gl8_line(
                        [&](double u) {
                            Vec bp(k + nz);
                            bp.head(k) = J0 + u * delta;
                            bp.tail(nz) = zn;
                            double sacc = 0.0;
                            for (int beta = 0; beta < k; ++beta)
                                sacc += delta[beta] * W_at(bp, beta, alpha);
                            return u * sacc;
                        },
                        0.0, 1.0, segments);
                }
            }
            Mat M = Mat::Zero(k, k);
            const int na = k - m;
            for (int a = 0; a < na; ++a) M(anchor.a_indices[a], a) = -1.0;
            for (int j = 0; j < m; ++j)
                M.col(na + j) = -chart.node_gens_[f].col(j) / TWO_PI;
            const Vec G = M.partialPivLu().solve(eps);
            for (int y = 0; y < k; ++y) g_vals[y][f] = G[y];
        }
        chart.shift_fields_.clear();
        for (int y = 0; y < k; ++y) chart.shift_fields_.emplace_back(g, g_vals[y]);

        // Stokes consistency over J-cells, every z-slice
        auto eps_spline = [&](const Vec& base_pt) {
            Vec G(k);
            for (int y = 0; y < k; ++y) G[y] = chart.shift_fields_[y].eval(base_pt);
            Mat M = Mat::Zero(k, k);
            const int na = k - m;
            for (int a = 0; a < na; ++a) M(anchor.a_indices[a], a) = -1.0;
            if (m > 0) {
                const Vec w = chart.gen_field_.eval(base_pt);
                for (int j = 0; j < m; ++j)
                    M.col(na + j) = -w.segment(j * k, k) / TWO_PI;
            }
            return Vec(M * G);
        };
        double worst = 0.0;
        for (int alpha = 0; alpha < k; ++alpha) {
            for (int beta = alpha + 1; beta < k; ++beta) {
                const auto& ax_a = g.axes[alpha];
                const auto& ax_b = g.axes[beta];
                if (ax_a.size() < 2 || ax_b.size() < 2) continue;
                for (std::size_t f = 0; f < total; ++f) {
                    const auto idx = g.unravel(f);
                    if (idx[alpha] + 1 >= ax_a.size() || idx[beta] + 1 >= ax_b.size())
                        continue;
                    const Vec bpt = g.node(idx);
                    const double a0 = ax_a[idx[alpha]], a1 = ax_a[idx[alpha] + 1];
                    const double b0 = ax_b[idx[beta]], b1 = ax_b[idx[beta] + 1];
                    auto at = [&](double av, double bv) {
                        Vec p = bpt;
                        p[alpha] = av;
                        p[beta] = bv;
                        return p;
                    };
                    auto edge = [&](double av0, double bv0, double av1, double bv1) {
                        return gl8_line(
                            [&](double u) {
                                const Vec p = at(av0 + u * (av1 - av0),
                                                 bv0 + u * (bv1 - bv0));
                                const Vec e = eps_spline(p);
                                return e[alpha] * (av1 - av0) + e[beta] * (bv1 - bv0);
                            },
                            0.0, 1.0, 2);
                    };
                    const double circ = edge(a0, b0, a1, b0) + edge(a1, b0, a1, b1) +
                                        edge(a1, b1, a0, b1) + edge(a0, b1, a0, b0);
                    double area_int = 0.0;
                    for (int ga = 0; ga < 8; ++ga)
                        for (int gb = 0; gb < 8; ++gb) {
                            const Vec p = at(
                                0.5 * (a0 + a1) + 0.5 * (a1 - a0) * GL8_X[ga],
                                0.5 * (b0 + b1) + 0.5 * (b1 - b0) * GL8_X[gb]);
                            area_int += GL8_W[ga] * GL8_W[gb] * W_at(p, alpha, beta);
                        }
                    area_int *= 0.25 * (a1 - a0) * (b1 - b0);
                    worst = std::max(worst, std::fabs(circ - area_int) /
                                                ((a1 - a0) * (b1 - b0)));
                }
            }
        }
        chart.exactness_residual_ = worst;
        if (worst > exactness_tol)
            throw NonExactnessError(
                "build_partial_chart: loop integrals of the base two-form are "
                "path dependent (residual " + std::to_string(worst) + ")");
    }
    return chart;
}

}  // namespace aatk
