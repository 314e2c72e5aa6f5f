#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "aatk/analysis.hpp"

namespace py = pybind11;
using namespace aatk;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    switch (j.type()) {
        case nlohmann::json::value_t::null:
            return py::none();
        case nlohmann::json::value_t::boolean:
            return py::bool_(j.get<bool>());
        case nlohmann::json::value_t::number_integer:
            return py::int_(j.get<long long>());
        case nlohmann::json::value_t::number_unsigned:
            return py::int_(j.get<unsigned long long>());
        case nlohmann::json::value_t::number_float:
            return py::float_(j.get<double>());
        case nlohmann::json::value_t::string:
            return py::str(j.get<std::string>());
        case nlohmann::json::value_t::array: {
            py::list out;
            for (const auto& item : j) out.append(json_to_py(item));
            return out;
        }
        case nlohmann::json::value_t::object: {
            py::dict out;
            for (auto it = j.begin(); it != j.end(); ++it)
                out[py::str(it.key())] = json_to_py(it.value());
            return out;
        }
        default:
            return py::none();
    }
}

FlowConfig flow_config(double tol, bool project) {
    FlowConfig cfg;
    cfg.tolerance = tol;
    cfg.project = project;
    return cfg;
}

AnalysisOptions options_from_kwargs(const py::kwargs& kw) {
    AnalysisOptions o;
    for (auto item : kw) {
        const std::string key = py::cast<std::string>(item.first);
        if (key == "grid_axes")
            o.grid_axes = py::cast<std::vector<std::vector<double>>>(item.second);
        else if (key == "box_lo")
            o.box_lo = py::cast<Vec>(item.second);
        else if (key == "box_hi")
            o.box_hi = py::cast<Vec>(item.second);
        else if (key == "recurrence_grid")
            o.recurrence_grid = py::cast<int>(item.second);
        else if (key == "tol_flow")
            o.tol_flow = py::cast<double>(item.second);
        else if (key == "tol_closure")
            o.tol_closure = py::cast<double>(item.second);
        else if (key == "tol_canonical")
            o.tol_canonical = py::cast<double>(item.second);
        else if (key == "tol_involution")
            o.tol_involution = py::cast<double>(item.second);
        else if (key == "verification_samples")
            o.verification_samples = py::cast<int>(item.second);
        else if (key == "seed")
            o.seed = py::cast<unsigned>(item.second);
        else if (key == "emit_timing")
            o.emit_timing = py::cast<bool>(item.second);
        else if (key == "transversal_extent")
            o.transversal_extent = py::cast<double>(item.second);
        else if (key == "auto_grid_points")
            o.auto_grid_points = py::cast<int>(item.second);
        else if (key == "auto_grid_halfwidth")
            o.auto_grid_halfwidth = py::cast<double>(item.second);
        else
            throw InvalidInputError("analyze: unknown option '" + key + "'");
    }
    return o;
}

}  // namespace

PYBIND11_MODULE(pyaatk, m) {
    m.doc() = "action-angle coordinate construction near non-compact invariant "
              "manifolds";

    static py::exception<AssumptionViolationError> exc_assume(m, "AssumptionViolation");
    static py::exception<NumericalError> exc_numeric(m, "NumericalFailure");
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const InvalidInputError& e) {
            PyErr_SetString(PyExc_ValueError, e.what());
        } catch (const AssumptionViolationError& e) {
            py::set_error(exc_assume, e.what());
        } catch (const NumericalError& e) {
            py::set_error(exc_numeric, e.what());
        }
    });

    py::class_<systems::SystemDefinition>(m, "SystemDefinition")
        .def_readonly("name", &systems::SystemDefinition::name)
        .def_readonly("n", &systems::SystemDefinition::n)
        .def_property_readonly("k", &systems::SystemDefinition::k)
        .def_readonly("labels", &systems::SystemDefinition::labels)
        .def("__repr__", [](const systems::SystemDefinition& d) {
            return "<SystemDefinition '" + d.name + "' n=" + std::to_string(d.n) +
                   " k=" + std::to_string(d.k()) + ">";
        });

    m.def("builtin_names", &systems::builtin_names);
    m.def("builtin", &systems::builtin, py::arg("name"));
    m.def("parse_system", &systems::parse_system, py::arg("text"));
    m.def("load_system", &systems::load_file, py::arg("path"));

    m.def(
        "level",
        [](const systems::SystemDefinition& def, const Vec& z) {
            return systems::make_system(def).level(z);
        },
        py::arg("system"), py::arg("z"), "level map pi(z) = (F_1(z), ..., F_k(z))");

    m.def(
        "poisson_bracket",
        [](const systems::SystemDefinition& def, int i, int j, const Vec& z) {
            const HamiltonianSystem S = systems::make_system(def);
            return poisson_bracket(S.model(), S.integrals()[i], S.integrals()[j], z);
        },
        py::arg("system"), py::arg("i"), py::arg("j"), py::arg("z"),
        "Poisson bracket {F_i, F_j} at z");

    m.def(
        "hamiltonian_vector_field",
        [](const systems::SystemDefinition& def, int lam, const Vec& z) {
            return systems::make_system(def).hvf(lam, z);
        },
        py::arg("system"), py::arg("lam"), py::arg("z"));

    m.def(
        "check_regularity",
        [](const systems::SystemDefinition& def, const Vec& z, double tol) {
            const HamiltonianSystem S = systems::make_system(def);
            const RegularityResult r = check_regularity(S.integrals(), z, tol);
            return py::make_tuple(r.rank, r.sigma_min);
        },
        py::arg("system"), py::arg("z"), py::arg("tol") = 1e-8,
        "numerical rank of the level-map Jacobian and its smallest singular value");

    m.def(
        "flow",
        [](const systems::SystemDefinition& def, int lam, const Vec& z0, double s,
           double tol, bool project) {
            return flow(systems::make_system(def), lam, z0, s, flow_config(tol, project));
        },
        py::arg("system"), py::arg("lam"), py::arg("z0"), py::arg("s"),
        py::arg("tol") = 1e-12, py::arg("project") = true);

    m.def(
        "group_action",
        [](const systems::SystemDefinition& def, const Vec& z0, const Vec& s,
           double tol, bool project) {
            return group_action(systems::make_system(def), z0, s,
                                flow_config(tol, project));
        },
        py::arg("system"), py::arg("z0"), py::arg("s"), py::arg("tol") = 1e-12,
        py::arg("project") = true);

    m.def(
        "commutation_residual",
        [](const systems::SystemDefinition& def, int lam, int mu, const Vec& z0,
           double a, double b, double tol, bool project) {
            return commutation_residual(systems::make_system(def), lam, mu, z0, a, b,
                                        flow_config(tol, project));
        },
        py::arg("system"), py::arg("lam"), py::arg("mu"), py::arg("z0"), py::arg("a"),
        py::arg("b"), py::arg("tol") = 1e-12, py::arg("project") = true);

    py::class_<AnalysisResult>(m, "AnalysisResult")
        .def_property_readonly(
            "report", [](const AnalysisResult& r) { return json_to_py(r.report); })
        .def_property_readonly("all_pass",
                               [](const AnalysisResult& r) { return r.all_pass; })
        .def(
            "to_action_angle",
            [](const AnalysisResult& r, const Vec& z) {
                if (r.chart && r.transform) {
                    const ActionAngleCoords c = r.transform->apply(r.chart->to_chart(z));
                    return py::make_tuple(c.I, c.x, c.phi);
                }
                if (r.partial) {
                    const PartialChart::Coords c = r.partial->to_chart(z);
                    return py::make_tuple(c.I, c.x, c.phi);
                }
                throw InvalidInputError("no chart available");
            },
            py::arg("z"), "map a phase point to (I, x, phi)")
        .def(
            "from_action_angle",
            [](const AnalysisResult& r, const Vec& I, const Vec& x, const Vec& phi) {
                if (r.chart && r.transform)
                    return r.chart->from_chart(r.transform->invert({I, x, phi}));
                throw InvalidInputError("no complete-case chart available");
            },
            py::arg("I"), py::arg("x"), py::arg("phi"))
        .def(
            "pullback",
            [](const AnalysisResult& r, const Vec& I, const Vec& x, const Vec& phi) {
                if (!(r.chart && r.transform))
                    throw InvalidInputError("no complete-case chart available");
                const SymplecticSample s =
                    pullback_symplectic(*r.chart, *r.transform, {I, x, phi});
                return py::make_tuple(s.omega, s.canonical_residual());
            },
            py::arg("I"), py::arg("x"), py::arg("phi"),
            "omega in chart coordinates and its canonical residual");

    m.def(
        "analyze",
        [](const systems::SystemDefinition& def, const Vec& point, py::kwargs kw) {
            return analyze(def, point, options_from_kwargs(kw));
        },
        py::arg("system"), py::arg("point"),
        "run the full pipeline; keyword arguments mirror the CLI flags");
}
