// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "refinery/checker.hpp"
#include "refinery/errors.hpp"
#include "refinery/harness.hpp"
#include "refinery/oracle.hpp"

namespace py = pybind11;
using namespace refinery;

namespace {

py::object json_to_py(const nlohmann::json& j) {
    auto jsonmod = py::module_::import("json");
    return jsonmod.attr("loads")(j.dump());
}

CheckConfig config_from_kwargs(const std::string& mode, bool prune, bool record_stats,
                               int budget_iterations, std::int64_t budget_enodes) {
    CheckConfig cfg;
    cfg.mode = mode == "exhaustive" ? CheckConfig::Mode::Exhaustive : CheckConfig::Mode::Optimized;
    cfg.prune = prune;
    cfg.record_stats = record_stats;
    if (budget_iterations > 0) cfg.budget.max_iterations = budget_iterations;
    if (budget_enodes > 0) cfg.budget.max_enodes = static_cast<size_t>(budget_enodes);
    return cfg;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "refinery: static refinement checking between sequential tensor graphs and their "
              "distributed implementations";

    register_harness_extensions();

    py::register_exception<SchemaError>(m, "SchemaError");
    py::register_exception<ValidationError>(m, "GraphValidationError");
    py::register_exception<SpecError>(m, "FixtureSpecError");
    py::register_exception<CertificateInvalid>(m, "CertificateInvalidError");

    py::class_<ComputationGraph>(m, "Graph")
        .def_static("from_json", [](const std::string& text) {
            return ComputationGraph::from_text(text);
        })
        .def("to_json", [](const ComputationGraph& g) { return g.to_json().dump(2); })
        .def_property_readonly("inputs", &ComputationGraph::inputs)
        .def_property_readonly("outputs", &ComputationGraph::outputs)
        .def("topo_order",
             [](const ComputationGraph& g) {
                 std::vector<std::string> out;
                 for (const OpNode* n : g.topo_order()) out.push_back(n->id);
                 return out;
             })
        .def("__repr__", [](const ComputationGraph& g) {
            return "<refinery.Graph nodes=" + std::to_string(g.nodes().size()) +
                   " tensors=" + std::to_string(g.tensors().size()) + ">";
        });

    m.def(
        "check",
        [](const std::string& gs_json, const std::string& gd_json, const std::string& ri_json,
           const std::string& mode, bool prune, bool record_stats, int budget_iterations,
           std::int64_t budget_enodes) {
            ComputationGraph gs = ComputationGraph::from_text(gs_json);
            ComputationGraph gd = ComputationGraph::from_text(gd_json);
            Relation ri = Relation::from_json(nlohmann::json::parse(ri_json));
            CheckConfig cfg = config_from_kwargs(mode, prune, record_stats, budget_iterations,
                                                 budget_enodes);
            CheckReport report = compute_out_rel(gs, gd, ri, cfg);
            return json_to_py(report.to_json());
        },
        py::arg("gs"), py::arg("gd"), py::arg("ri"), py::arg("mode") = "optimized",
        py::arg("prune") = true, py::arg("record_stats") = true,
        py::arg("budget_iterations") = 0, py::arg("budget_enodes") = 0,
        "Run the refinement check on JSON-encoded graphs and an input relation; returns the "
        "report as a dict.");

    m.def(
        "check_fixture",
        [](const std::string& dir, const std::string& mode, bool prune) {
            LoadedFixture f = load_fixture(dir);
            CheckConfig cfg = config_from_kwargs(mode, prune, true, 0, 0);
            CheckReport report = compute_out_rel(f.gs, f.gd, f.ri, cfg);
            return json_to_py(report.to_json());
        },
        py::arg("dir"), py::arg("mode") = "optimized", py::arg("prune") = true);

    m.def(
        "generate_fixture",
        [](const std::string& name, const std::string& out_dir) {
            Fixture f = generate_by_name(name);
            write_fixture(f, out_dir);
            return json_to_py(f.expected);
        },
        py::arg("name"), py::arg("out_dir"));

    m.def("list_fixtures", [] {
        py::list out;
        for (const auto& e : list_fixtures()) {
            py::dict d;
            d["name"] = e.name;
            d["model"] = family_to_string(e.model.family);
            d["strategy"] = strategy_to_string(e.strategy.kind);
            d["degree"] = e.strategy.degree;
            d["bug"] = e.bug ? py::object(py::str(bug_to_string(e.bug->id))) : py::none();
            d["description"] = e.description;
            out.append(d);
        }
        return out;
    });

    m.def(
        "eval_fixture",
        [](const std::string& dir, std::uint64_t seed) {
            LoadedFixture f = load_fixture(dir);
            if (!f.expected_ro) throw EvalError("fixture has no expected_ro.json");
            ReconstructionResult r = check_reconstruction(f.gs, f.gd, f.ri, *f.expected_ro, {seed});
            py::dict d;
            d["ok"] = r.ok;
            d["max_dev"] = r.max_dev;
            d["detail"] = r.detail;
            return d;
        },
        py::arg("dir"), py::arg("seed") = 0);

    m.def(
        "decide_cmp",
        [](const std::string& a, const std::string& b, const std::string& rel,
           const std::vector<std::string>& constraints) {
            CmpRel r = rel == "==" ? CmpRel::Eq : rel == "<=" ? CmpRel::Le : CmpRel::Lt;
            if (rel != "==" && rel != "<=" && rel != "<")
                throw SchemaError("relation must be ==, <= or <");
            return std::string(to_string(decide_cmp(DimExpr::parse(a), DimExpr::parse(b), r,
                                                    ConstraintStore::from_strings(constraints))));
        },
        py::arg("a"), py::arg("b"), py::arg("rel"),
        py::arg("constraints") = std::vector<std::string>{});

    m.def(
        "emit_smtlib",
        [](const std::string& a, const std::string& b, const std::string& rel,
           const std::vector<std::string>& constraints) {
            CmpRel r = rel == "==" ? CmpRel::Eq : rel == "<=" ? CmpRel::Le : CmpRel::Lt;
            return emit_smtlib(DimExpr::parse(a), DimExpr::parse(b), r,
                               ConstraintStore::from_strings(constraints));
        },
        py::arg("a"), py::arg("b"), py::arg("rel"),
        py::arg("constraints") = std::vector<std::string>{});

    m.def("builtin_lemmas", [] {
        std::vector<std::string> names;
        for (const auto& l : LemmaRegistry::instance().all()) names.push_back(l.name);
        return names;
    });

    m.def(
        "is_clean", [](const std::string& expr) { return is_clean(parse_expr(expr),
                                                                 CleanOpSet::defaults()); },
        py::arg("expr"));
    m.def(
        "simplicity", [](const std::string& expr) { return simplicity(parse_expr(expr)); },
        py::arg("expr"));
    m.def(
        "canonical", [](const std::string& expr) { return canonical_print(parse_expr(expr)); },
        py::arg("expr"));
}
