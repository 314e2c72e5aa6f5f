#pragma once

#include <json.hpp>

#include <optional>

#include "aatk/partial.hpp"
#include "aatk/systems.hpp"

namespace aatk {

struct AnalysisOptions {
    /// Base grid axes in J-space (k entries) or full (J, z)-space (k + 2(n-k)
    /// entries) for partial systems; empty = automatic around the input level.
    std::vector<std::vector<double>> grid_axes;
    Vec box_lo, box_hi;  // recurrence search box; empty = [-12, 12]^k
    int recurrence_grid = 32;
    double tol_flow = 1e-12;
    double tol_closure = 1e-7;
    double tol_canonical = 1e-5;
    double tol_involution = 1e-8;
    double tol_independence = 1e-5;
    double tol_exactness = 1e-5;
    int verification_samples = 20;
    int involution_samples = 100;
    bool flow_error_per_unit_step = false;
    unsigned seed = 12345;
    int threads = 1;
    bool emit_timing = false;
    double transversal_extent = 1.0;
    int auto_grid_points = 5;
    double auto_grid_halfwidth = 0.1;  // times (1 + |J0_i|)
};

/// Pipeline products: the machine-readable report plus the live chart
/// objects for further queries (plot data, bindings).
struct AnalysisResult {
    nlohmann::json report;
    systems::SystemDefinition definition;
    std::shared_ptr<const HamiltonianSystem> system;
    Vec point;
    AnalysisOptions options;
    std::optional<TrivializationChart> chart;        // complete case
    std::optional<ChartTransform> transform;
    std::optional<PartialChart> partial;             // k < n
    bool all_pass = false;
};

/// Run the full pipeline: regularity -> involution -> recurrence/lattice ->
/// chart -> actions -> shifts -> verification (partial chart when k < n).
/// Hypothesis violations throw the AssumptionViolationError family.
AnalysisResult analyze(const systems::SystemDefinition& def, const Vec& point,
                       const AnalysisOptions& opts = {});

/// Write the report atomically (temp file + rename).
void write_report(const nlohmann::json& report, const std::string& path);

/// Emit plot-ready CSV series (actions, frequencies, chart trajectory,
/// canonical residual vs refinement) into the directory.
void write_plotdata(const AnalysisResult& res, const std::string& dir);

/// Actions/frequency series recoverable from a stored report alone.
void write_plotdata_from_report(const nlohmann::json& report, const std::string& dir);

}  // namespace aatk
