#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "aatk/analysis.hpp"

namespace {

using aatk::InvalidInputError;
using aatk::Vec;

Vec parse_point(const std::string& text) {
    std::vector<double> vals;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            vals.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw InvalidInputError("--point: cannot parse '" + item + "'");
        }
    }
    if (vals.empty()) throw InvalidInputError("--point: no coordinates given");
    Vec v(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) v[i] = vals[i];
    return v;
}

std::vector<std::vector<double>> parse_grid(const std::string& text) {
    std::vector<std::vector<double>> axes;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ',')) {
        double lo, hi;
        int count;
        char c1, c2;
        std::stringstream as(axis);
        if (!(as >> lo >> c1 >> hi >> c2 >> count) || c1 != ':' || c2 != ':')
            throw InvalidInputError("--grid: axis '" + axis + "' is not lo:hi:count");
        if (count < 1)
            throw InvalidInputError("--grid: axis '" + axis + "' has an empty range");
        if (count > 1 && !(lo < hi))
            throw InvalidInputError("--grid: axis '" + axis + "' needs lo < hi");
        std::vector<double> ax(count);
        for (int i = 0; i < count; ++i)
            ax[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
        axes.push_back(std::move(ax));
    }
    if (axes.empty()) throw InvalidInputError("--grid: empty specification");
    return axes;
}

void parse_box(const std::string& text, Vec& lo, Vec& hi) {
    std::vector<double> los, his;
    std::stringstream ss(text);
    std::string axis;
    while (std::getline(ss, axis, ',')) {
        double l, h;
        char c;
        std::stringstream as(axis);
        if (!(as >> l >> c >> h) || c != ':' || !(l < 0.0 && h > 0.0))
            throw InvalidInputError("--box: axis '" + axis +
                                    "' is not lo:hi with lo < 0 < hi");
        los.push_back(l);
        his.push_back(h);
    }
    if (los.empty()) throw InvalidInputError("--box: empty specification");
    lo.resize(los.size());
    hi.resize(his.size());
    for (std::size_t i = 0; i < los.size(); ++i) {
        lo[i] = los[i];
        hi[i] = his[i];
    }
}

aatk::systems::SystemDefinition resolve_system(const std::string& spec) {
    const auto names = aatk::systems::builtin_names();
    for (const auto& n : names)
        if (n == spec) return aatk::systems::builtin(spec);
    return aatk::systems::load_file(spec);
}

struct CommonArgs {
    std::string system, point, grid, box, report, plotdata_dir;
    double tol_flow = 1e-12, tol_closure = 1e-7, tol_canonical = 1e-5,
           tol_involution = 1e-8;
    int threads = 1;
    unsigned seed = 12345;
    bool emit_timing = false;

    void attach(CLI::App* cmd, bool need_system) {
        cmd->add_option("--system", system, "builtin name or system file path")
            ->required(need_system);
        cmd->add_option("--point", point, "comma-separated phase point");
        cmd->add_option("--grid", grid, "base grid, lo:hi:count per axis");
        cmd->add_option("--box", box, "recurrence box, lo:hi per flow axis");
        cmd->add_option("--tol-flow", tol_flow, "integrator tolerance");
        cmd->add_option("--tol-closure", tol_closure, "lattice closure tolerance");
        cmd->add_option("--tol-canonical", tol_canonical,
                        "canonical-form residual tolerance");
        cmd->add_option("--tol-involution", tol_involution, "involution tolerance");
        cmd->add_option("--report", report, "write the JSON report here");
        cmd->add_option("--plotdata", plotdata_dir, "emit CSV series here");
        cmd->add_option("--threads", threads, "worker threads for grid sampling");
        cmd->add_option("--seed", seed, "sampling seed");
        cmd->add_flag("--emit-timing", emit_timing,
                      "include wall-clock timings in the report");
    }

    aatk::AnalysisOptions options() const {
        aatk::AnalysisOptions o;
        if (!grid.empty()) o.grid_axes = parse_grid(grid);
        if (!box.empty()) parse_box(box, o.box_lo, o.box_hi);
        o.tol_flow = tol_flow;
        o.tol_closure = tol_closure;
        o.tol_canonical = tol_canonical;
        o.tol_involution = tol_involution;
        o.threads = threads;
        o.seed = seed;
        o.emit_timing = emit_timing;
        return o;
    }
};

int run_analyze(const CommonArgs& args) {
    if (args.point.empty()) throw InvalidInputError("analyze: --point is required");
    const auto def = resolve_system(args.system);
    const Vec z = parse_point(args.point);
    const aatk::AnalysisResult res = aatk::analyze(def, z, args.options());
    if (!args.report.empty())
        aatk::write_report(res.report, args.report);
    else
        std::cout << res.report.dump(2) << "\n";
    if (!args.plotdata_dir.empty()) aatk::write_plotdata(res, args.plotdata_dir);
    std::cerr << "analyze: " << def.name << " m=" << res.report["lattice"]["m"]
              << " canonical_max="
              << res.report["verification"]["canonical_max"].get<double>()
              << " verdict=" << res.report["verdicts"]["overall"].get<std::string>()
              << "\n";
    return res.all_pass ? 0 : 3;
}

int run_plotdata(const CommonArgs& args, const std::string& from_report) {
    if (args.plotdata_dir.empty())
        throw InvalidInputError("plotdata: --plotdata <dir> is required");
    if (!from_report.empty()) {
        std::ifstream in(from_report);
        if (!in)
            throw InvalidInputError("plotdata: cannot open report '" + from_report + "'");
        nlohmann::json rep;
        try {
            in >> rep;
        } catch (const nlohmann::json::parse_error& e) {
            throw InvalidInputError(std::string("plotdata: bad report JSON: ") + e.what());
        }
        aatk::write_plotdata_from_report(rep, args.plotdata_dir);
        return 0;
    }
    if (args.system.empty() || args.point.empty())
        throw InvalidInputError(
            "plotdata: needs either --from-report or --system and --point");
    const auto def = resolve_system(args.system);
    const Vec z = parse_point(args.point);
    const aatk::AnalysisResult res = aatk::analyze(def, z, args.options());
    aatk::write_plotdata(res, args.plotdata_dir);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"action-angle coordinate construction near non-compact "
                 "invariant manifolds"};
    app.require_subcommand(1);

    CommonArgs analyze_args, plot_args;
    std::string from_report;

    CLI::App* cmd_analyze = app.add_subcommand(
        "analyze", "run the full pipeline and write a report");
    analyze_args.attach(cmd_analyze, true);

    CLI::App* cmd_plot = app.add_subcommand(
        "plotdata", "emit plot-ready CSV series from a run or a stored report");
    plot_args.attach(cmd_plot, false);
    cmd_plot->add_option("--from-report", from_report,
                         "reuse a stored report instead of running the pipeline");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (cmd_analyze->parsed()) return run_analyze(analyze_args);
        return run_plotdata(plot_args, from_report);
    } catch (const aatk::InvalidInputError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const aatk::AssumptionViolationError& e) {
        std::cerr << "assumption violation: " << e.what() << "\n";
        return 2;
    } catch (const aatk::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const aatk::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
