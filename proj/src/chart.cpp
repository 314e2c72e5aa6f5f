#include "aatk/chart.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

#include "gauss_legendre.hpp"

namespace aatk {

using detail::GL8_W;
using detail::GL8_X;
using detail::gl8_line;

namespace {

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

TrivializationChart::TrivializationChart(std::shared_ptr<const HamiltonianSystem> S,
                                         Section section, IsotropyLattice anchor,
                                         std::vector<Mat> node_generators,
                                         FlowConfig fcfg, Vec anchor_level)
    : sys_(std::move(S)),
      section_(std::move(section)),
      anchor_(std::move(anchor)),
      node_gens_(std::move(node_generators)),
      fcfg_(fcfg) {
    require(static_cast<int>(section_.grid().dim()) == anchor_.k,
            "chart: base grid dimension must equal the number of integrals");
    require(node_gens_.size() == section_.grid().size(),
            "chart: one generator matrix per grid node required");
    if (anchor_.m > 0)
        gen_field_ = VectorGridField(section_.grid(),
                                     flatten_generators(node_gens_, anchor_.k, anchor_.m));
    // snap the gauge origin to the nearest grid node
    anchor_level_ = section_.grid().node(section_.grid().nearest(anchor_level));
}

IsotropyLattice TrivializationChart::lattice_at(const Vec& J) const {
    IsotropyLattice L = anchor_;
    if (anchor_.m == 0) return L;
    const Vec w = gen_field_.eval(J);
    for (int j = 0; j < anchor_.m; ++j) L.generators.col(j) = w.segment(j * k(), k());
    return L;
}

Mat TrivializationChart::frame_at(const Vec& J) const {
    const int na = k() - m();
    Mat F = Mat::Zero(k(), k());
    for (int a = 0; a < na; ++a) F(anchor_.a_indices[a], a) = 1.0;
    if (m() > 0) {
        const Vec w = gen_field_.eval(J);
        for (int j = 0; j < m(); ++j) F.col(na + j) = w.segment(j * k(), k());
    }
    return F;
}

Mat TrivializationChart::mixed_block_at(const Vec& J) const {
    // Omega(d/dJ_alpha, d/dy^c) = -(frame * S^{-1})_{alpha c}: the chart
    // coordinates (t, phi) act as positions against the momenta J
    Mat M = -frame_at(J);
    const int na = k() - m();
    for (int j = 0; j < m(); ++j) M.col(na + j) /= TWO_PI;
    return M;
}

Mat TrivializationChart::y_rates(const Vec& J) const {
    const int na = k() - m();
    Mat Finv = frame_at(J).partialPivLu().inverse();
    for (int j = 0; j < m(); ++j) Finv.row(na + j) *= TWO_PI;
    return Finv;
}

Vec TrivializationChart::coords_to_s(const Vec& J, const Vec& t, const Vec& phi) const {
    const int na = k() - m();
    require(t.size() == na && phi.size() == m(), "chart: coordinate sizes");
    Vec u(k());
    u.head(na) = t;
    for (int j = 0; j < m(); ++j) u[na + j] = phi[j] / TWO_PI;
    return frame_at(J) * u;
}

ChartCoords TrivializationChart::s_to_coords(const Vec& J, const Vec& s) const {
    const int na = k() - m();
    const Vec u = frame_at(J).partialPivLu().solve(s);
    ChartCoords c;
    c.J = J;
    c.t = u.head(na);
    c.phi.resize(m());
    for (int j = 0; j < m(); ++j) c.phi[j] = wrap_angle(TWO_PI * u[na + j]);
    return c;
}

Vec TrivializationChart::from_chart(const ChartCoords& c) const {
    const Vec sigma = section_.at(c.J);
    const Vec s = coords_to_s(c.J, c.t, c.phi);
    return group_action(*sys_, sigma, s, fcfg_);
}

namespace {

struct ShootResult {
    Vec s;
    double residual;
    bool ok;
};

// Damped Gauss-Newton on R(s) = g(-s) z - sigma(J).
ShootResult shoot(const HamiltonianSystem& S, const Vec& z, const Vec& sigma, Vec s,
                  const FlowConfig& fcfg, double target, int max_iters) {
    Vec w = group_action(S, z, Vec(-s), fcfg);
    Vec R = w - sigma;
    double rn = inf_norm(R);
    for (int it = 0; it < max_iters; ++it) {
        if (rn < target) return {s, rn, true};
        const Mat J = S.hvf_matrix(w);
        const Vec ds = lstsq(J, R);
        double step = 1.0;
        bool advanced = false;
        for (int half = 0; half < 8; ++half) {
            const Vec s_try = s + step * ds;
            const Vec w_try = group_action(S, z, Vec(-s_try), fcfg);
            const double rn_try = inf_norm(w_try - sigma);
            if (rn_try < rn || rn_try < target) {
                s = s_try;
                w = w_try;
                R = w - sigma;
                rn = rn_try;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if (!advanced) return {s, rn, false};
    }
    return {s, rn, rn < target};
}

}  // namespace

ChartCoords TrivializationChart::to_chart(const Vec& z, const ShootConfig& scfg) const {
    sys_->check_point(z);
    const Vec J = sys_->level(z);
    if (!grid().contains(J))
        throw OffFibreError("to_chart: level value lies outside the chart base grid");
    const Vec sigma = section_.at(J);
    const double target = scfg.tol * (1.0 + inf_norm(z));

    ShootResult best = shoot(*sys_, z, sigma, Vec::Zero(k()), fcfg_, target,
                             scfg.max_iters);
    if (!best.ok) {
        // multistart over the fundamental cell and a cylinder-range grid
        const int na = k() - m();
        const Mat F = frame_at(J);
        std::vector<double> t_vals(std::max(1, scfg.t_starts), 0.0);
        for (int i = 0; i < scfg.t_starts; ++i)
            t_vals[i] = -scfg.t_range +
                        2.0 * scfg.t_range * i / std::max(1, scfg.t_starts - 1);
        std::vector<std::size_t> ctr(k(), 0);
        const std::size_t n_t = na > 0 ? t_vals.size() : 1;
        const std::size_t n_c = m() > 0 ? static_cast<std::size_t>(scfg.phi_starts) : 1;
        std::size_t total = 1;
        for (int a = 0; a < na; ++a) total *= n_t;
        for (int j = 0; j < m(); ++j) total *= n_c;
        for (std::size_t trial = 0; trial < total && !best.ok; ++trial) {
            std::size_t rem = trial;
            Vec u(k());
            for (int a = 0; a < na; ++a) {
                u[a] = t_vals[rem % n_t];
                rem /= n_t;
            }
            for (int j = 0; j < m(); ++j) {
                u[na + j] = static_cast<double>(rem % n_c) / scfg.phi_starts;
                rem /= n_c;
            }
            if (u.isZero()) continue;  // already tried
            ShootResult r = shoot(*sys_, z, sigma, Vec(F * u), fcfg_, target, 20);
            if (r.ok) best = r;
        }
    }
    if (!best.ok)
        throw OffFibreError("to_chart: shooting did not converge (point off the "
                            "charted fibres or outside the trivialized region)");
    return s_to_coords(J, best.s);
}

std::vector<Mat> continue_generators(const HamiltonianSystem& S, const Section& section,
                                     const IsotropyLattice& anchor,
                                     const Vec& anchor_base, const FlowConfig& fcfg,
                                     const LatticeConfig& lcfg) {
    const Grid& grid = section.grid();
    const std::size_t total = grid.size();
    std::vector<Mat> gens(total);
    if (anchor.m == 0) {
        for (auto& g : gens) g = Mat::Zero(anchor.k, 0);
        return gens;
    }
    std::vector<bool> solved(total, false);
    const std::size_t start = grid.nearest(anchor_base);
    auto refine_at = [&](std::size_t f, const Mat& seed) {
        Mat out(anchor.k, anchor.m);
        const Vec& sigma = section.nodes()[f];
        for (int j = 0; j < anchor.m; ++j) {
            const Vec refined = refine_return(S, sigma, seed.col(j), fcfg, lcfg);
            const double change =
                inf_norm(refined - seed.col(j)) / (1.0 + seed.col(j).norm());
            if (change > 0.25)
                throw NumericalError(
                    "chart: generator changed too fast between grid nodes; "
                    "refine the base grid");
            out.col(j) = refined;
        }
        IsotropyLattice L = anchor;
        L.generators = out;
        if (std::fabs(L.det_C()) < lcfg.det_c_min)
            throw ShrinkNeighbourhoodError(
                "chart: det C degenerated across the base grid");
        return out;
    };
    gens[start] = refine_at(start, anchor.generators);
    solved[start] = true;
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
                gens[g] = refine_at(g, gens[f]);
                solved[g] = true;
                queue.push_back(g);
            }
        }
    }
    return gens;
}

TrivializationChart build_trivialization(std::shared_ptr<const HamiltonianSystem> S,
                                         Section section, const IsotropyLattice& anchor,
                                         const Vec& anchor_level, const FlowConfig& fcfg,
                                         const LatticeConfig& lcfg) {
    std::vector<Mat> gens =
        continue_generators(*S, section, anchor, anchor_level, fcfg, lcfg);
    return TrivializationChart(std::move(S), std::move(section), anchor,
                               std::move(gens), fcfg, anchor_level);
}

// -- ChartTransform -----------------------------------------------------------

Vec ChartTransform::actions_at(const Vec& J) const {
    Vec I = J;
    for (std::size_t j = 0; j < xi_.size(); ++j) I[i_idx_[j]] = xi_[j].eval(J);
    return I;
}

Mat ChartTransform::dI_dJ(const Vec& J) const {
    Mat D = Mat::Identity(k_, k_);
    if (xi_.empty()) return D;
    const Vec w = gen_field_.eval(J);
    for (int j = 0; j < m_; ++j)
        D.row(i_idx_[j]) = w.segment(j * k_, k_).transpose() / TWO_PI;
    return D;
}

Vec ChartTransform::level_of(const Vec& I) const {
    require(I.size() == k_, "chart transform: action vector size");
    if (xi_.empty()) return I;
    Vec J = anchor_level_;
    for (int a : a_idx_) J[a] = I[a];
    const double target = 1e-13 * (1.0 + inf_norm(I));
    Vec F = actions_at(J) - I;
    double rn = inf_norm(F);
    for (int it = 0; it < 60; ++it) {
        if (rn < target) return J;
        const Vec dJ = dI_dJ(J).partialPivLu().solve(-F);
        double step = 1.0;
        bool advanced = false;
        for (int half = 0; half < 10; ++half) {
            const Vec J_try = J + step * dJ;
            const Vec F_try = actions_at(J_try) - I;
            if (inf_norm(F_try) < rn || inf_norm(F_try) < target) {
                J = J_try;
                F = F_try;
                rn = inf_norm(F);
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if (!advanced) break;
    }
    if (rn >= target)
        throw ChartFailureError("chart transform: action map inversion stalled");
    return J;
}

Vec ChartTransform::shift_at(const Vec& J) const {
    Vec G = Vec::Zero(k_);
    for (int y = 0; y < static_cast<int>(shift_fields_.size()); ++y)
        G[y] = shift_fields_[y].eval(J);
    return G;
}

ActionAngleCoords ChartTransform::apply(const ChartCoords& raw) const {
    const int na = k_ - m_;
    Vec I = actions_at(raw.J);
    Vec x = raw.t;
    Vec phi = raw.phi;
    if (has_shifts()) {
        const Vec G = shift_at(raw.J);
        x -= G.head(na);
        for (int j = 0; j < m_; ++j) phi[j] = wrap_angle(phi[j] - G[na + j]);
    }
    if (!has_reparametrization()) return {I, x, phi};

    // solve f_a(I') = I_a with I'_i = I_i fixed
    Vec Ip = I;
    const double target = 1e-13 * (1.0 + inf_norm(I));
    for (int it = 0; it < 60; ++it) {
        Vec fa = repar_.f(Ip);
        Vec res(na);
        for (int a = 0; a < na; ++a) res[a] = fa[a] - I[a_idx_[a]];
        if (inf_norm(res) < target) break;
        const Mat Jf = repar_.jac(Ip);
        Mat A(na, na);
        for (int r = 0; r < na; ++r)
            for (int c = 0; c < na; ++c) A(r, c) = Jf(r, a_idx_[c]);
        Eigen::FullPivLU<Mat> lu(A);
        if (!lu.isInvertible())
            throw InvalidInputError("reparametrization: singular Jacobian");
        const Vec d = lu.solve(res);
        for (int a = 0; a < na; ++a) Ip[a_idx_[a]] -= d[a];
        if (it == 59)
            throw ChartFailureError("reparametrization: inversion of f stalled");
    }
    const Mat Jf = repar_.jac(Ip);
    Mat A(na, na);  // A(b,a) = df_b / dI'_a
    for (int b = 0; b < na; ++b)
        for (int a = 0; a < na; ++a) A(b, a) = Jf(b, a_idx_[a]);
    const Vec xp = A.transpose() * x;
    Vec phip = phi;
    for (int j = 0; j < m_; ++j) {
        double acc = 0.0;
        for (int a = 0; a < na; ++a) acc += Jf(a, i_idx_[j]) * x[a];
        phip[j] = wrap_angle(phi[j] + acc);
    }
    return {Ip, xp, phip};
}

ChartCoords ChartTransform::invert(const ActionAngleCoords& fin) const {
    const int na = k_ - m_;
    Vec I = fin.I;
    Vec x = fin.x;
    Vec phi = fin.phi;
    if (has_reparametrization()) {
        const Vec& Ip = fin.I;
        const Vec fa = repar_.f(Ip);
        I = Ip;
        for (int a = 0; a < na; ++a) I[a_idx_[a]] = fa[a];
        const Mat Jf = repar_.jac(Ip);
        Mat A(na, na);
        for (int b = 0; b < na; ++b)
            for (int c = 0; c < na; ++c) A(b, c) = Jf(b, a_idx_[c]);
        Eigen::FullPivLU<Mat> lu(A.transpose());
        if (!lu.isInvertible())
            throw InvalidInputError("reparametrization: singular Jacobian");
        x = lu.solve(fin.x);
        for (int j = 0; j < m_; ++j) {
            double acc = 0.0;
            for (int a = 0; a < na; ++a) acc += Jf(a, i_idx_[j]) * x[a];
            phi[j] = wrap_angle(fin.phi[j] - acc);
        }
    }
    ChartCoords raw;
    raw.J = level_of(I);
    raw.t = x;
    raw.phi = phi;
    if (has_shifts()) {
        const Vec G = shift_at(raw.J);
        raw.t = x + G.head(na);
        for (int j = 0; j < m_; ++j) raw.phi[j] = wrap_angle(phi[j] + G[na + j]);
    }
    return raw;
}

// -- compute_actions ------------------------------------------------------------

ChartTransform identity_transform(const TrivializationChart& chart) {
    ChartTransform tr;
    tr.k_ = chart.k();
    tr.m_ = chart.m();
    tr.a_idx_ = chart.a_indices();
    tr.i_idx_ = chart.i_indices();
    tr.anchor_level_ = chart.anchor_level();
    return tr;
}

ChartTransform compute_actions(const TrivializationChart& chart, double indep_tol) {
    const auto S = chart.system();
    const Grid& grid = chart.grid();
    ChartTransform tr;
    tr.k_ = chart.k();
    tr.m_ = chart.m();
    tr.a_idx_ = chart.a_indices();
    tr.i_idx_ = chart.i_indices();
    tr.anchor_level_ = chart.anchor_level();
    if (chart.m() == 0) return tr;
    if (!S->model().has_liouville())
        throw ChartFailureError("compute_actions: the symplectic model has no "
                                "Liouville primitive for cycle integrals");

    const std::size_t total = grid.size();
    std::vector<std::vector<double>> xi_vals(chart.m(),
                                             std::vector<double>(total, 0.0));
    for (std::size_t f = 0; f < total; ++f) {
        const Vec& sigma = chart.section().nodes()[f];
        const Mat& gens = chart.node_generators()[f];
        const double scale = 1.0 + inf_norm(sigma);
        for (int j = 0; j < chart.m(); ++j) {
            double acc = 0.0;
            const Vec end =
                flow_weighted(*S, gens.col(j), sigma, 1.0, chart.flow_config(), &acc);
            if (inf_norm(end - sigma) > 1e-7 * scale)
                throw ChartFailureError(
                    "compute_actions: torus cycle failed to close at a grid node");
            xi_vals[j][f] = acc / TWO_PI;
        }
    }
    tr.xi_.reserve(chart.m());
    for (int j = 0; j < chart.m(); ++j) tr.xi_.emplace_back(grid, xi_vals[j]);
    tr.gen_field_ = VectorGridField(
        grid, flatten_generators(chart.node_generators(), chart.k(), chart.m()));

    // gradient identity dXi_i/dJ = v_i / 2pi, checked at interior nodes on
    // axes dense enough for a spline derivative
    for (std::size_t f = 0; f < total; ++f) {
        const auto idx = grid.unravel(f);
        const Vec r = grid.node(idx);
        const Mat& gens = chart.node_generators()[f];
        for (int j = 0; j < chart.m(); ++j) {
            for (int a = 0; a < grid.dim(); ++a) {
                const std::size_t na = grid.axes[a].size();
                if (na < 4) continue;
                if (idx[a] == 0 || idx[a] + 1 == na) continue;
                const double grad = tr.xi_[j].partial(r, a);
                const double expect = gens(a, j) / TWO_PI;
                if (std::fabs(grad - expect) >
                    indep_tol * (1.0 + std::fabs(expect)))
                    throw ChartFailureError(
                        "compute_actions: action gradient is inconsistent with the "
                        "lattice generators (residual " +
                        std::to_string(std::fabs(grad - expect)) + ")");
            }
        }
    }
    return tr;
}

// -- compute_shifts -------------------------------------------------------------

ChartTransform compute_shifts(const TrivializationChart& chart, ChartTransform tr,
                              double exactness_tol) {
    const auto S = chart.system();
    const Grid& grid = chart.grid();
    const int k = chart.k();
    const std::size_t total = grid.size();

    // W(J): section pullback of omega, the (J,J) block of the chart pullback
    std::vector<std::vector<double>> w_vals(k * k, std::vector<double>(total, 0.0));
    for (std::size_t f = 0; f < total; ++f) {
        const Vec r = grid.node(f);
        const Mat D = chart.section().derivative(r);
        const Mat W = D.transpose() * S->model().omega(chart.section().nodes()[f]) * D;
        for (int a = 0; a < k; ++a)
            for (int b = 0; b < k; ++b) w_vals[a * k + b][f] = W(a, b);
    }
    std::vector<GridField> w_field;
    w_field.reserve(k * k);
    for (int e = 0; e < k * k; ++e) w_field.emplace_back(grid, w_vals[e]);
    auto W_at = [&](const Vec& J, int row, int col) {
        return w_field[row * k + col].eval(J);
    };

    // eps_alpha(J) = int_0^1 u * Delta^beta W_{beta alpha}(J0 + u Delta) du
    const Vec J0 = chart.anchor_level();
    const double hmin = grid.min_spacing();
    auto eps_at = [&](const Vec& J) {
        const Vec delta = J - J0;
        Vec eps = Vec::Zero(k);
        if (inf_norm(delta) == 0.0) return eps;
        const int segments =
            std::max(2, static_cast<int>(std::ceil(2.0 * inf_norm(delta) / hmin)));
        for (int alpha = 0; alpha < k; ++alpha) {
            eps[alpha] = gl8_line(
                [&](double u) {
                    const Vec Ju = J0 + u * delta;
                    double s = 0.0;
                    for (int beta = 0; beta < k; ++beta)
                        s += delta[beta] * W_at(Ju, beta, alpha);
                    return u * s;
                },
                0.0, 1.0, segments);
        }
        return eps;
    };

    std::vector<std::vector<double>> g_vals(k, std::vector<double>(total, 0.0));
    for (std::size_t f = 0; f < total; ++f) {
        const Vec r = grid.node(f);
        const Vec eps = eps_at(r);
        const Mat M = chart.mixed_block_at(r);
        const Vec G = M.partialPivLu().solve(eps);
        for (int y = 0; y < k; ++y) g_vals[y][f] = G[y];
    }
    tr.shift_fields_.clear();
    tr.shift_fields_.reserve(k);
    for (int y = 0; y < k; ++y) tr.shift_fields_.emplace_back(grid, g_vals[y]);

    // Stokes consistency of the solved shifts: circulation of
    // eps = M * G around grid cells against the area integral of W.
    auto eps_spline = [&](const Vec& J) {
        Vec G(k);
        for (int y = 0; y < k; ++y) G[y] = tr.shift_fields_[y].eval(J);
        return Vec(chart.mixed_block_at(J) * G);
    };
    double worst = 0.0;
    for (int alpha = 0; alpha < k; ++alpha) {
        for (int beta = alpha + 1; beta < k; ++beta) {
            const auto& ax_a = grid.axes[alpha];
            const auto& ax_b = grid.axes[beta];
            if (ax_a.size() < 2 || ax_b.size() < 2) continue;
            for (std::size_t f = 0; f < total; ++f) {
                const auto idx = grid.unravel(f);
                if (idx[alpha] + 1 >= ax_a.size() || idx[beta] + 1 >= ax_b.size())
                    continue;
                const Vec base = grid.node(idx);
                const double a0 = ax_a[idx[alpha]], a1 = ax_a[idx[alpha] + 1];
                const double b0 = ax_b[idx[beta]], b1 = ax_b[idx[beta] + 1];
                auto corner = [&](double av, double bv) {
                    Vec J = base;
                    J[alpha] = av;
                    J[beta] = bv;
                    return J;
                };
                auto edge = [&](double av0, double bv0, double av1, double bv1) {
                    return gl8_line(
                        [&](double u) {
                            const Vec J = corner(av0 + u * (av1 - av0),
                                                 bv0 + u * (bv1 - bv0));
                            const Vec e = eps_spline(J);
                            return e[alpha] * (av1 - av0) + e[beta] * (bv1 - bv0);
                        },
                        0.0, 1.0, 2);
                };
                const double circ = edge(a0, b0, a1, b0) + edge(a1, b0, a1, b1) +
                                    edge(a1, b1, a0, b1) + edge(a0, b1, a0, b0);
                double area_int = 0.0;
                for (int ga = 0; ga < 8; ++ga)
                    for (int gb = 0; gb < 8; ++gb) {
                        const Vec J =
                            corner(0.5 * (a0 + a1) + 0.5 * (a1 - a0) * GL8_X[ga],
                                   0.5 * (b0 + b1) + 0.5 * (b1 - b0) * GL8_X[gb]);
                        area_int += GL8_W[ga] * GL8_W[gb] * W_at(J, alpha, beta);
                    }
                area_int *= 0.25 * (a1 - a0) * (b1 - b0);
                const double area = (a1 - a0) * (b1 - b0);
                worst = std::max(worst, std::fabs(circ - area_int) / area);
            }
        }
    }
    tr.exactness_residual_ = worst;
    if (worst > exactness_tol)
        throw NonExactnessError(
            "compute_shifts: loop integrals of the base two-form are path "
            "dependent (residual " +
            std::to_string(worst) + "); chart assumptions violated");
    return tr;
}

ChartTransform reparametrize(const ChartTransform& tr, Reparametrization f) {
    require(bool(f.f) && bool(f.jac), "reparametrize: map and Jacobian required");
    require(!tr.has_reparametrization(),
            "reparametrize: transform already carries a reparametrization");
    ChartTransform out = tr;
    out.repar_ = std::move(f);
    return out;
}

// -- pullback -------------------------------------------------------------------

double SymplecticSample::canonical_residual() const {
    // (x, phi) pair with their actions as (position, momentum):
    // Omega(d/dI, d/dy) = -delta on paired slots
    Mat target = Mat::Zero(nI, nx + nphi);
    for (int j = 0; j < nx; ++j) target(a_idx[j], j) = -1.0;
    for (int j = 0; j < nphi; ++j) target(i_idx[j], nx + j) = -1.0;
    double worst = block_II().cwiseAbs().maxCoeff();
    worst = std::max(worst, (block_Iy() - target).cwiseAbs().maxCoeff());
    worst = std::max(worst, block_yy().cwiseAbs().maxCoeff());
    if (nz > 0) worst = std::max(worst, block_zy().cwiseAbs().maxCoeff());
    return worst;
}

SymplecticSample sample_pullback(const HamiltonianSystem& S,
                                 const std::function<Vec(const Vec&)>& inverse_map,
                                 const Vec& zeta, int nI, int nz, int nx, int nphi,
                                 const VecI& a_idx, const VecI& i_idx,
                                 double fd_step) {
    const int dim = nI + nz + nx + nphi;
    require(zeta.size() == dim, "sample_pullback: coordinate size mismatch");
    const Vec z0 = inverse_map(zeta);
    Mat T(S.dim(), dim);
    for (int c = 0; c < dim; ++c) {
        const double h = fd_step * (1.0 + std::fabs(zeta[c]));
        Vec zp = zeta, zm = zeta;
        zp[c] += h;
        zm[c] -= h;
        T.col(c) = (inverse_map(zp) - inverse_map(zm)) / (2 * h);
    }
    if (!T.allFinite())
        throw ChartFailureError("pullback: chart Jacobian has non-finite entries");
    SymplecticSample out;
    out.coords = zeta;
    out.nI = nI;
    out.nz = nz;
    out.nx = nx;
    out.nphi = nphi;
    out.a_idx = a_idx;
    out.i_idx = i_idx;
    out.omega = T.transpose() * S.model().omega(z0) * T;
    return out;
}

SymplecticSample pullback_symplectic(const TrivializationChart& chart,
                                     const ChartTransform& tr,
                                     const ActionAngleCoords& at, double fd_step) {
    const int k = chart.k(), m = chart.m(), na = k - m;
    Vec zeta(2 * k);
    zeta.head(k) = at.I;
    zeta.segment(k, na) = at.x;
    zeta.tail(m) = at.phi;
    auto inverse_map = [&](const Vec& zt) {
        ActionAngleCoords c;
        c.I = zt.head(k);
        c.x = zt.segment(k, na);
        c.phi = zt.tail(m);
        return chart.from_chart(tr.invert(c));
    };
    return sample_pullback(*chart.system(), inverse_map, zeta, k, 0, na, m,
                           tr.a_indices(), tr.i_indices(), fd_step);
}

double y_independence_residual(const TrivializationChart& chart,
                               const ChartTransform& tr, const Vec& J, int samples,
                               unsigned seed, double fd_step) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> uphi(0.0, TWO_PI);
    std::uniform_real_distribution<double> ut(-1.0, 1.0);
    const int k = chart.k(), m = chart.m(), na = k - m;
    const Vec I = tr.actions_at(J);
    Mat first_II, first_Iy;
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        ActionAngleCoords c;
        c.I = I;
        c.x = Vec(na);
        for (int a = 0; a < na; ++a) c.x[a] = ut(rng);
        c.phi = Vec(m);
        for (int j = 0; j < m; ++j) c.phi[j] = uphi(rng);
        const SymplecticSample sm = pullback_symplectic(chart, tr, c, fd_step);
        if (s == 0) {
            first_II = sm.block_II();
            first_Iy = sm.block_Iy();
        } else {
            worst = std::max(worst,
                             (sm.block_II() - first_II).cwiseAbs().maxCoeff());
            worst = std::max(worst,
                             (sm.block_Iy() - first_Iy).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

}  // namespace aatk
