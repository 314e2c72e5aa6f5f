#pragma once

#include <map>
#include <memory>
#include <optional>

#include "aatk/expression.hpp"
#include "aatk/phase_space.hpp"

namespace aatk::systems {

struct SystemMetadata {
    std::optional<int> expected_m;
    std::map<std::string, double> values;
};

/// A system defined by integral expressions over q1..qn, p1..pn, with
/// optional region hints and known-answer metadata for testing.
struct SystemDefinition {
    std::string name;
    int n = 0;
    std::vector<std::string> labels;
    std::vector<expr::Expression> integral_exprs;
    std::optional<Box> region;
    SystemMetadata meta;

    int k() const { return static_cast<int>(integral_exprs.size()); }
    int dim() const { return 2 * n; }
    /// Deterministic text used for the report fingerprint.
    std::string canonical_text() const;
};

std::vector<std::string> builtin_names();

/// Built-in benchmark systems: "oscillator1d", "free1d", "osc_free",
/// "pendulum", "kepler_planar", "partial_momentum", "driven_osc_extended".
SystemDefinition builtin(const std::string& name);

/// Parse a system from structured text or its JSON mirror (detected by a
/// leading '{'). Text format, one item per line:
///
///     name: oscillator1d
///     n: 1
///     integral: H = (p1^2 + q1^2)/2
///     region: q1 in [-3, 3]
///     meta: expected_m = 1
///
/// Parse failures carry line/column positions.
SystemDefinition parse_system(const std::string& text);

SystemDefinition load_file(const std::string& path);

/// Compile the definition into an executable system (canonical symplectic
/// model, expression-backed fields with forward-mode gradients).
HamiltonianSystem make_system(const SystemDefinition& def);
std::shared_ptr<const HamiltonianSystem> make_shared_system(const SystemDefinition& def);

}  // namespace aatk::systems
