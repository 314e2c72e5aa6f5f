#include "aatk/analysis.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <random>
#include <sstream>

namespace aatk {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

json mat_cols_to_json(const Mat& m) {
    json a = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) a.push_back(vec_to_json(m.col(c)));
    return a;
}

std::vector<double> linspace(double lo, double hi, int count) {
    std::vector<double> v(count);
    if (count == 1) {
        v[0] = 0.5 * (lo + hi);
        return v;
    }
    for (int i = 0; i < count; ++i) v[i] = lo + (hi - lo) * i / (count - 1);
    return v;
}

std::vector<Vec> involution_samples(const HamiltonianSystem& S, const Vec& z,
                                    int count, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const double spread = 0.2 * (1.0 + inf_norm(z));
    std::vector<Vec> samples;
    samples.reserve(count);
    for (int i = 0; i < count; ++i) {
        Vec w = z;
        for (Eigen::Index c = 0; c < z.size(); ++c) w[c] += spread * u(rng);
        if (S.region() && !S.region()->contains(w)) {
            --i;  // resample inside the declared region
            continue;
        }
        samples.push_back(w);
    }
    return samples;
}

struct VerificationStats {
    double canonical_max = 0, canonical_mean = 0;
    double roundtrip_max = 0;
    double y_independence = 0;
    int samples = 0;
};

}  // namespace

AnalysisResult analyze(const systems::SystemDefinition& def, const Vec& point,
                       const AnalysisOptions& opts) {
    const auto t_start = Clock::now();
    AnalysisResult res;
    res.definition = def;
    res.options = opts;
    res.system = systems::make_shared_system(def);
    const HamiltonianSystem& S = *res.system;
    json& rep = res.report;
    json timing;

    require(point.size() == S.dim(),
            "analyze: point has dimension " + std::to_string(point.size()) +
                ", system '" + def.name + "' expects " + std::to_string(S.dim()));
    require(all_finite(point), "analyze: point has non-finite entries");
    res.point = point;

    char hash_hex[32];
    std::snprintf(hash_hex, sizeof hash_hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(def.canonical_text())));
    rep["schema_version"] = 1;
    rep["system"] = {{"name", def.name}, {"hash", std::string(hash_hex)},
                     {"n", def.n},       {"k", def.k()}};
    rep["input_point"] = vec_to_json(point);
    rep["seed"] = opts.seed;
    rep["tolerances"] = {{"flow", opts.tol_flow},
                         {"closure", opts.tol_closure},
                         {"canonical", opts.tol_canonical},
                         {"involution", opts.tol_involution},
                         {"independence", opts.tol_independence},
                         {"exactness", opts.tol_exactness}};
    json warnings = json::array();
    json verdicts;

    // 1. regularity
    auto t0 = Clock::now();
    const RegularityResult reg = check_regularity(S.integrals(), point);
    rep["regularity"] = {{"rank", reg.rank},
                         {"sigma_min", reg.sigma_min},
                         {"sigma_max", reg.sigma_max},
                         {"verdict", reg.rank == S.k() ? "regular" : "singular"}};
    if (reg.rank != S.k())
        throw RegularityError(
            "analyze: the level map is not a submersion at the input point (rank " +
            std::to_string(reg.rank) + " of " + std::to_string(S.k()) +
            "); pick a regular point");
    timing["regularity_ms"] = ms_since(t0);

    // 2. involution
    t0 = Clock::now();
    const auto inv_samples =
        involution_samples(S, point, opts.involution_samples, opts.seed);
    const InvolutionReport inv =
        check_involution(S.model(), S.integrals(), inv_samples, opts.tol_involution);
    rep["involution"] = {{"max_abs", inv.worst},
                         {"tol", inv.tol},
                         {"verdict", inv.pass ? "pass" : "fail"}};
    if (inv.worst_i >= 0)
        rep["involution"]["worst_pair"] = {def.labels[inv.worst_i],
                                           def.labels[inv.worst_j]};
    if (!inv.pass)
        throw InvolutionError("analyze: integrals '" + def.labels[inv.worst_i] +
                              "' and '" + def.labels[inv.worst_j] +
                              "' are not in involution (max |{F,G}| = " +
                              std::to_string(inv.worst) + ")");
    timing["involution_ms"] = ms_since(t0);

    FlowConfig fcfg;
    fcfg.tolerance = opts.tol_flow;
    fcfg.error_per_unit_step = opts.flow_error_per_unit_step;
    LatticeConfig lcfg;
    lcfg.closure_tol = opts.tol_closure;

    // 3. recurrences and the isotropy lattice at the input point
    t0 = Clock::now();
    Vec box_lo = opts.box_lo, box_hi = opts.box_hi;
    if (box_lo.size() == 0) box_lo = Vec::Constant(S.k(), -12.0);
    if (box_hi.size() == 0) box_hi = Vec::Constant(S.k(), 12.0);
    const double closure_scaled = opts.tol_closure * (1.0 + inf_norm(point));
    const std::vector<Vec> returns =
        detect_recurrences(S, point, box_lo, box_hi, opts.tol_closure,
                           opts.recurrence_grid, fcfg, lcfg);
    const IsotropyLattice anchor =
        lattice_from_returns(S.k(), returns, closure_scaled, lcfg);
    rep["lattice"] = {{"m", anchor.m},
                      {"basis_split",
                       {{"a", anchor.a_indices}, {"i", anchor.i_indices}}},
                      {"anchor_generators", mat_cols_to_json(anchor.generators)}};
    if (def.meta.expected_m && *def.meta.expected_m != anchor.m)
        warnings.push_back("detected m = " + std::to_string(anchor.m) +
                           " differs from system metadata expected_m = " +
                           std::to_string(*def.meta.expected_m));
    timing["lattice_ms"] = ms_since(t0);

    // 4. base grid
    const Vec J0 = S.level(point);
    std::vector<std::vector<double>> axes = opts.grid_axes;
    const int nz_dim = S.dim() - 2 * S.k();
    if (axes.empty()) {
        for (int a = 0; a < S.k(); ++a) {
            const double half = opts.auto_grid_halfwidth * (1.0 + std::fabs(J0[a]));
            int count = opts.auto_grid_points | 1;  // odd: center node hits J0
            axes.push_back(linspace(J0[a] - half, J0[a] + half, count));
        }
    }
    if (S.k() < S.n() && static_cast<int>(axes.size()) == S.k()) {
        for (int a = 0; a < nz_dim; ++a)
            axes.push_back(linspace(-0.5 * opts.transversal_extent,
                                    0.5 * opts.transversal_extent, 3));
    }
    for (const auto& ax : axes) {
        require(!ax.empty(), "analyze: empty grid axis");
        for (std::size_t i = 0; i + 1 < ax.size(); ++i)
            require(ax[i] < ax[i + 1], "analyze: grid axis not increasing");
    }
    Grid grid{axes};

    VerificationStats ver;
    std::mt19937 rng(opts.seed + 1);

    t0 = Clock::now();
    if (S.k() == S.n()) {
        require(static_cast<int>(axes.size()) == S.k(),
                "analyze: grid needs one axis per integral");
        Section section = build_section(res.system, point, grid);
        res.chart = build_trivialization(res.system, std::move(section), anchor, J0,
                                         fcfg, lcfg);
        const TrivializationChart& chart = *res.chart;
        timing["chart_ms"] = ms_since(t0);

        t0 = Clock::now();
        ChartTransform tr = compute_actions(chart, opts.tol_independence);
        tr = compute_shifts(chart, std::move(tr), opts.tol_exactness);
        res.transform = tr;
        timing["transform_ms"] = ms_since(t0);

        // report tables
        json lattice_nodes = json::array();
        json action_nodes = json::array();
        double shift_max = 0;
        for (std::size_t f = 0; f < chart.grid().size(); ++f) {
            const Vec r = chart.grid().node(f);
            lattice_nodes.push_back({{"r", vec_to_json(r)},
                                     {"generators",
                                      mat_cols_to_json(chart.node_generators()[f])}});
            action_nodes.push_back(
                {{"J", vec_to_json(r)}, {"I", vec_to_json(tr.actions_at(r))}});
            shift_max = std::max(shift_max, inf_norm(tr.shift_at(r)));
        }
        rep["lattice"]["nodes"] = lattice_nodes;
        rep["actions"] = {{"nodes", action_nodes}};
        rep["shifts"] = {{"max_abs", shift_max},
                         {"exactness_residual", tr.exactness_residual()},
                         {"gauge", "zero at anchor node"}};

        // verification sampling
        t0 = Clock::now();
        const int na = S.k() - anchor.m;
        std::uniform_real_distribution<double> u01(0.15, 0.85);
        std::uniform_real_distribution<double> ux(-1.0, 1.0);
        std::uniform_real_distribution<double> uphi(0.0, TWO_PI);
        double canon_sum = 0;
        for (int sidx = 0; sidx < opts.verification_samples; ++sidx) {
            Vec J(S.k());
            for (int a = 0; a < S.k(); ++a) {
                const auto& ax = grid.axes[a];
                J[a] = ax.front() + (ax.back() - ax.front()) * u01(rng);
            }
            ActionAngleCoords c;
            c.I = tr.actions_at(J);
            c.x = Vec(na);
            for (int a = 0; a < na; ++a) c.x[a] = ux(rng);
            c.phi = Vec(anchor.m);
            for (int j = 0; j < anchor.m; ++j) c.phi[j] = uphi(rng);

            const SymplecticSample sample = pullback_symplectic(chart, tr, c);
            const double resid = sample.canonical_residual();
            ver.canonical_max = std::max(ver.canonical_max, resid);
            canon_sum += resid;

            const Vec z = chart.from_chart(tr.invert(c));
            const ActionAngleCoords back = tr.apply(chart.to_chart(z));
            double rt = std::max(inf_norm(back.I - c.I), inf_norm(back.x - c.x));
            for (int j = 0; j < anchor.m; ++j)
                rt = std::max(rt, angle_dist(back.phi[j], c.phi[j]));
            ver.roundtrip_max = std::max(ver.roundtrip_max, rt);
            ++ver.samples;
        }
        ver.canonical_mean = ver.samples ? canon_sum / ver.samples : 0.0;
        ver.y_independence =
            y_independence_residual(chart, tr, chart.anchor_level(), 4, opts.seed + 2);
        timing["verification_ms"] = ms_since(t0);
    } else {
        // partial case
        TransversalChart transversal =
            build_transversal(S, point, opts.transversal_extent);
        res.partial = build_partial_chart(res.system, transversal, grid, point, anchor,
                                          fcfg, lcfg, opts.tol_independence,
                                          opts.tol_exactness);
        const PartialChart& pchart = *res.partial;
        timing["chart_ms"] = ms_since(t0);

        t0 = Clock::now();
        json lattice_nodes = json::array();
        json action_nodes = json::array();
        double shift_max = 0;
        for (std::size_t f = 0; f < pchart.grid().size(); ++f) {
            const Vec r = pchart.grid().node(f);
            lattice_nodes.push_back(
                {{"r", vec_to_json(r)},
                 {"generators", mat_cols_to_json(pchart.node_generators_at(f))}});
            action_nodes.push_back(
                {{"J", vec_to_json(Vec(r.head(S.k())))},
                 {"z", vec_to_json(Vec(r.tail(nz_dim)))},
                 {"I", vec_to_json(pchart.actions_at(r))}});
            shift_max = std::max(shift_max, inf_norm(pchart.shift_at(r)));
        }
        rep["lattice"]["nodes"] = lattice_nodes;
        rep["actions"] = {{"nodes", action_nodes},
                          {"z_dependence", pchart.xi_z_dependence()}};
        rep["shifts"] = {{"max_abs", shift_max},
                         {"exactness_residual", pchart.exactness_residual()},
                         {"gauge", "zero at anchor node"}};

        // holonomy: torus cycles where available, else a non-returning probe
        std::vector<LeafLoop> loops;
        if (anchor.m > 0) {
            for (std::size_t f = 0; f < pchart.grid().size();
                 f += std::max<std::size_t>(1, pchart.grid().size() / 4)) {
                for (int j = 0; j < anchor.m; ++j)
                    loops.push_back(LeafLoop{pchart.section().nodes()[f],
                                             pchart.node_generators_at(f).col(j)});
            }
        } else {
            Vec probe = Vec::Zero(S.k());
            probe[0] = 1.0;
            loops.push_back(LeafLoop{pchart.section().nodes()[0], probe});
        }
        const HolonomyReport hol =
            holonomy_check(S, transversal, loops, 1e-7 * (1.0 + inf_norm(point)), fcfg);
        rep["holonomy"] = {{"max_displacement", hol.max_displacement},
                           {"loops", hol.loops_run},
                           {"inconclusive", hol.inconclusive},
                           {"verdict", hol.verdict}};
        if (hol.verdict != "supported")
            warnings.push_back("holonomy triviality " + hol.verdict);

        // verification sampling in (I, z, x, phi)
        const int na = S.k() - anchor.m;
        std::uniform_real_distribution<double> u01(0.15, 0.85);
        std::uniform_real_distribution<double> ux(-0.5, 0.5);
        std::uniform_real_distribution<double> uphi(0.0, TWO_PI);
        double canon_sum = 0;
        double omega_Az_max = 0;
        for (int sidx = 0; sidx < opts.verification_samples; ++sidx) {
            Vec base(S.k() + nz_dim);
            for (int a = 0; a < S.k() + nz_dim; ++a) {
                const auto& ax = pchart.grid().axes[a];
                base[a] = ax.size() == 1
                              ? ax.front()
                              : ax.front() + (ax.back() - ax.front()) * u01(rng);
            }
            PartialChart::Coords c;
            c.I = pchart.actions_at(base);
            c.zA = base.tail(nz_dim);
            c.x = Vec(na);
            for (int a = 0; a < na; ++a) c.x[a] = ux(rng);
            c.phi = Vec(anchor.m);
            for (int j = 0; j < anchor.m; ++j) c.phi[j] = uphi(rng);

            const SymplecticSample sample = pchart.verify_block_form(c);
            const double resid = sample.canonical_residual();
            ver.canonical_max = std::max(ver.canonical_max, resid);
            omega_Az_max =
                std::max(omega_Az_max, sample.block_zy().cwiseAbs().maxCoeff());
            canon_sum += resid;

            const Vec z = pchart.from_chart(c);
            const PartialChart::Coords back = pchart.to_chart(z);
            double rt = std::max(inf_norm(back.I - c.I), inf_norm(back.zA - c.zA));
            rt = std::max(rt, inf_norm(back.x - c.x));
            for (int j = 0; j < anchor.m; ++j)
                rt = std::max(rt, angle_dist(back.phi[j], c.phi[j]));
            ver.roundtrip_max = std::max(ver.roundtrip_max, rt);
            ++ver.samples;
        }
        ver.canonical_mean = ver.samples ? canon_sum / ver.samples : 0.0;
        {
            PartialChart::Coords c0;
            Vec base0 = pchart.grid().node(pchart.grid().size() / 2);
            c0.I = pchart.actions_at(base0);
            c0.zA = base0.tail(nz_dim);
            c0.x = Vec::Zero(na);
            c0.phi = Vec::Zero(anchor.m);
            ver.y_independence =
                pchart.block_independence_residual(c0, 4, opts.seed + 2);
        }
        rep["partial"] = {{"z_dim", nz_dim},
                          {"omega_Az_max", omega_Az_max},
                          {"block_independence", ver.y_independence}};
        timing["verification_ms"] = ms_since(t0);
    }

    rep["verification"] = {{"canonical_max", ver.canonical_max},
                           {"canonical_mean", ver.canonical_mean},
                           {"roundtrip_max", ver.roundtrip_max},
                           {"y_independence", ver.y_independence},
                           {"samples", ver.samples}};

    verdicts["canonical"] = ver.canonical_max <= opts.tol_canonical ? "pass" : "fail";
    verdicts["roundtrip"] = ver.roundtrip_max <= 1e-6 ? "pass" : "fail";
    verdicts["involution"] = "pass";
    verdicts["regularity"] = "pass";
    res.all_pass = true;
    for (const auto& [key, value] : verdicts.items())
        if (value != "pass") res.all_pass = false;
    verdicts["overall"] = res.all_pass ? "pass" : "fail";
    rep["verdicts"] = verdicts;
    rep["warnings"] = warnings;
    if (opts.emit_timing) {
        timing["total_ms"] = ms_since(t_start);
        rep["timing"] = timing;
    }
    return res;
}

void write_report(const json& report, const std::string& path) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) fs::create_directories(target.parent_path());
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw InvalidInputError("cannot write report to '" + path + "'");
        out << report.dump(2) << "\n";
    }
    fs::rename(tmp, target);
}

namespace {

void write_csv(const std::string& dir, const std::string& name,
               const std::string& header, const std::vector<std::vector<double>>& rows) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const fs::path target = fs::path(dir) / name;
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw InvalidInputError("cannot write plot data to '" + target.string() + "'");
        out << header << "\n";
        char buf[32];
        for (const auto& row : rows) {
            for (std::size_t c = 0; c < row.size(); ++c) {
                std::snprintf(buf, sizeof buf, "%.17g", row[c]);
                out << (c ? "," : "") << buf;
            }
            out << "\n";
        }
    }
    fs::rename(tmp, target);
}

}  // namespace

void write_plotdata(const AnalysisResult& res, const std::string& dir) {
    const HamiltonianSystem& S = *res.system;
    const int k = S.k();

    // actions and frequencies over the grid
    std::vector<std::vector<double>> action_rows, freq_rows;
    std::ostringstream ah;
    for (int a = 0; a < k; ++a) ah << (a ? "," : "") << "J" << a + 1;
    for (int a = 0; a < k; ++a) ah << ",I" << a + 1;
    if (res.chart && res.transform) {
        const Grid& grid = res.chart->grid();
        for (std::size_t f = 0; f < grid.size(); ++f) {
            const Vec J = grid.node(f);
            const Vec I = res.transform->actions_at(J);
            std::vector<double> row;
            for (int a = 0; a < k; ++a) row.push_back(J[a]);
            for (int a = 0; a < k; ++a) row.push_back(I[a]);
            action_rows.push_back(row);
            const Mat dJdI = res.transform->dI_dJ(J).partialPivLu().inverse();
            std::vector<double> frow;
            for (int a = 0; a < k; ++a) frow.push_back(J[a]);
            for (int lam = 0; lam < k; ++lam)
                for (int i = 0; i < k; ++i) frow.push_back(dJdI(lam, i));
            freq_rows.push_back(frow);
        }
    } else if (res.partial) {
        const Grid& grid = res.partial->grid();
        for (std::size_t f = 0; f < grid.size(); ++f) {
            const Vec base = grid.node(f);
            const Vec I = res.partial->actions_at(base);
            std::vector<double> row;
            for (int a = 0; a < k; ++a) row.push_back(base[a]);
            for (int a = 0; a < k; ++a) row.push_back(I[a]);
            action_rows.push_back(row);
        }
    }
    write_csv(dir, "actions.csv", ah.str(), action_rows);
    if (!freq_rows.empty()) {
        std::ostringstream h;
        for (int a = 0; a < k; ++a) h << (a ? "," : "") << "J" << a + 1;
        for (int lam = 0; lam < k; ++lam)
            for (int i = 0; i < k; ++i) h << ",dF" << lam + 1 << "_dI" << i + 1;
        write_csv(dir, "frequencies.csv", h.str(), freq_rows);
    }

    // a trajectory of the first integral's flow in chart coordinates
    if (res.chart && res.transform) {
        const double span =
            res.chart->m() > 0 ? 2.0 * res.chart->lattice_at(S.level(res.point))
                                       .generators.col(0)
                                       .norm()
                               : 10.0;
        std::vector<std::vector<double>> rows;
        const int steps = 200;
        for (int i = 0; i <= steps; ++i) {
            const double tau = span * i / steps;
            Vec z;
            try {
                z = flow(S, 0, res.point, tau, res.chart->flow_config());
                const ActionAngleCoords c =
                    res.transform->apply(res.chart->to_chart(z));
                std::vector<double> row{tau};
                for (int a = 0; a < c.I.size(); ++a) row.push_back(c.I[a]);
                for (int a = 0; a < c.x.size(); ++a) row.push_back(c.x[a]);
                for (int a = 0; a < c.phi.size(); ++a) row.push_back(c.phi[a]);
                rows.push_back(row);
            } catch (const Error&) {
                break;  // trajectory left the charted region
            }
        }
        std::ostringstream h;
        h << "tau";
        for (int a = 0; a < k; ++a) h << ",I" << a + 1;
        for (int a = 0; a < k - res.chart->m(); ++a) h << ",x" << a + 1;
        for (int a = 0; a < res.chart->m(); ++a) h << ",phi" << a + 1;
        write_csv(dir, "trajectory_chart.csv", h.str(), rows);
    }

    // canonical residual vs refinement (complete case only)
    if (res.chart && res.transform) {
        std::vector<std::vector<double>> rows;
        for (int level = 0; level < 3; ++level) {
            AnalysisOptions o = res.options;
            o.tol_flow = res.options.tol_flow * std::pow(0.5, level);
            o.grid_axes.clear();
            o.auto_grid_points = res.options.auto_grid_points * (1 << level) | 1;
            o.verification_samples = std::min(res.options.verification_samples, 8);
            o.emit_timing = false;
            try {
                AnalysisResult r = analyze(res.definition, res.point, o);
                rows.push_back(
                    {static_cast<double>(level),
                     r.report["verification"]["canonical_max"].get<double>()});
            } catch (const Error&) {
                break;
            }
        }
        write_csv(dir, "canonical_residual.csv", "level,canonical_max", rows);
    }
}

void write_plotdata_from_report(const nlohmann::json& report, const std::string& dir) {
    require(report.contains("actions") && report["actions"].contains("nodes"),
            "plotdata: report carries no action table");
    const int k = report["system"]["k"].get<int>();
    std::ostringstream h;
    for (int a = 0; a < k; ++a) h << (a ? "," : "") << "J" << a + 1;
    for (int a = 0; a < k; ++a) h << ",I" << a + 1;
    std::vector<std::vector<double>> rows;
    for (const auto& node : report["actions"]["nodes"]) {
        std::vector<double> row;
        for (const auto& v : node["J"]) row.push_back(v.get<double>());
        for (const auto& v : node["I"]) row.push_back(v.get<double>());
        rows.push_back(row);
    }
    write_csv(dir, "actions.csv", h.str(), rows);
}

}  // namespace aatk
