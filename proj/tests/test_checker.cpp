// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "refinery/checker.hpp"
#include "refinery/errors.hpp"
#include "refinery/harness.hpp"

using namespace refinery;

namespace {

Fixture fig() {
    register_harness_extensions();
    return generate_by_name("matmul_sub_tp2");
}

} // namespace

TEST_CASE("worked example: certificate and intermediate relation") {
    Fixture f = fig();
    CheckConfig cfg;
    CheckReport report = compute_out_rel(f.gs, f.gd, f.ri, cfg);
    REQUIRE(report.refines());
    REQUIRE(report.certificate.size() == 1);
    CHECK(report.certificate[0].target == "F");
    CHECK(report.certificate[0].expr == "(concat (t F_1) (t F_2) :dim 0)");
    CHECK(report.certificate[0].alternates.empty());

    // The matmul step keeps both mappings for the intermediate tensor.
    const auto& rc = report.node_relations.at("matmul");
    std::set<std::string> lines(rc.begin(), rc.end());
    CHECK(lines == std::set<std::string>{
                       "C := (sum (t C_1) (t C_2))",
                       "C := (concat (t D_1) (t D_2) :dim 0)",
                   });
}

TEST_CASE("refinement is reflexive with identity relations") {
    ComputationGraph g = ComputationGraph::from_text(R"({
      "tensors": [
        {"id":"X","shape":[4,4]},{"id":"W","shape":[4,4]},
        {"id":"H","shape":[4,4]},{"id":"Y","shape":[4,4]}
      ],
      "nodes": [
        {"id":"mm","op":"core.matmul","inputs":["X","W"],"outputs":["H"]},
        {"id":"act","op":"core.relu","inputs":["H"],"outputs":["Y"]}
      ],
      "inputs": ["X","W"], "outputs": ["Y"]
    })");
    Relation ri;
    ri.add("X", parse_expr("(t X)"));
    ri.add("W", parse_expr("(t W)"));
    CheckReport report = compute_out_rel(g, g, ri, CheckConfig{});
    REQUIRE(report.refines());
    CHECK(report.certificate[0].target == "Y");
    CHECK(report.certificate[0].expr == "(t Y)");
}

TEST_CASE("compute_node_out_rel on the worked example's first operator") {
    Fixture f = fig();
    const OpNode* mm = f.gs.find_node("matmul");
    REQUIRE(mm != nullptr);
    ExplorationState st;
    Relation rv = compute_node_out_rel(*mm, f.gs, f.gd, f.ri, CheckConfig{}, st);
    std::set<std::string> got;
    for (const auto& e : rv.entries()) got.insert(e.target + " := " + canonical_print(e.expr));
    CHECK(got == std::set<std::string>{
                     "C := (sum (t C_1) (t C_2))",
                     "C := (concat (t D_1) (t D_2) :dim 0)",
                 });
}

TEST_CASE("bug fixtures localize to their annotated operators") {
    register_harness_extensions();
    for (const char* name : {"bug_auxloss_scale", "bug_shard_vs_replicate", "bug_grad_accum_scale",
                             "bug_pad_slice_mismatch", "bug_rope_offset"}) {
        Fixture f = generate_by_name(name);
        CheckReport report = compute_out_rel(f.gs, f.gd, f.ri, CheckConfig{});
        CAPTURE(name);
        REQUIRE(!report.refines());
        REQUIRE(report.failure.has_value());
        CHECK(report.failure->node_id == f.expected.at("expected_failure_node").get<std::string>());
        CHECK(!report.failure->unmapped_outputs.empty());
        // The report carries the operator's input relation for debugging.
        if (std::string(name) == "bug_shard_vs_replicate")
            CHECK(!report.failure->input_relation.empty());
    }
}

TEST_CASE("explore_step admits tensors layer by layer and skips unrelated ones") {
    Fixture f = fig();
    // Processing the matmul: the state starts from the tensors its own input
    // mappings mention.
    ExplorationState st;
    for (const auto& t : {"A", "B"})
        for (const auto* m : f.ri.for_target(t))
            for (const auto& ref : tensor_refs(m->expr)) st.t_rel.insert(ref);

    Relation f1 = explore_step(st, f.gd, CandidateSet{});
    CHECK(f1.targets() == std::set<std::string>{"C_1", "C_2"});

    // A clean mapping over the partial products admits them, unlocking the
    // reduce-scatter outputs.
    CandidateSet cleans;
    cleans.entries.push_back({parse_expr("(sum (t C_1) (t C_2))"), "node:matmul"});
    Relation f2 = explore_step(st, f.gd, cleans);
    CHECK(f2.targets() == std::set<std::string>{"D_1", "D_2"});
    for (const auto& e : f2.entries())
        CHECK(canonical_print(e.expr).find("(sum (t C_1) (t C_2))") != std::string::npos);

    // The subtract operands include unrelated inputs: nothing new appears,
    // and the loop's termination condition holds.
    CandidateSet more;
    more.entries.push_back({parse_expr("(concat (t D_1) (t D_2) :dim 0)"), "node:matmul"});
    Relation f3 = explore_step(st, f.gd, more);
    CHECK(f3.empty());
    CHECK(st.t_rel.count("E_1") == 0);
    CHECK(st.t_rel.count("F_1") == 0);
}

TEST_CASE("explore_step reaches a fixpoint once everything is admitted") {
    Fixture f = fig();
    ExplorationState st;
    for (const auto& t : f.gd.tensors()) st.t_rel.insert(t.id);
    Relation first = explore_step(st, f.gd, CandidateSet{});
    CHECK(!first.empty()); // every node fires once
    Relation second = explore_step(st, f.gd, CandidateSet{});
    CHECK(second.empty()); // and never again
}

TEST_CASE("operators mixing related and unrelated inputs stay out of the frontier") {
    ComputationGraph gd = ComputationGraph::from_text(R"({
      "tensors": [
        {"id":"a","shape":[2]},{"id":"u","shape":[2]},
        {"id":"m","shape":[2]},{"id":"z","shape":[2]}
      ],
      "nodes": [
        {"id":"n1","op":"core.relu","inputs":["a"],"outputs":["m"]},
        {"id":"n2","op":"core.add","inputs":["m","u"],"outputs":["z"]}
      ],
      "inputs": ["a","u"], "outputs": ["z"]
    })");
    ExplorationState st;
    st.t_rel.insert("a");
    Relation f1 = explore_step(st, gd, CandidateSet{});
    CHECK(f1.targets() == std::set<std::string>{"m"});
    CandidateSet cleans;
    cleans.entries.push_back({parse_expr("(t m)"), "x"});
    Relation f2 = explore_step(st, gd, cleans);
    CHECK(f2.empty()); // n2 still blocked by the unrelated input u
}

TEST_CASE("validate_certificate accepts real certificates and rejects forgeries") {
    Fixture f = fig();
    CheckReport report = compute_out_rel(f.gs, f.gd, f.ri, CheckConfig{});
    REQUIRE(report.refines());
    CHECK(validate_certificate(report, f.gs, f.gd, f.ri));

    CheckReport forged = report;
    forged.certificate[0].expr = "(t F_1)"; // wrong shape: half the rows
    CHECK_THROWS_AS(validate_certificate(forged, f.gs, f.gd, f.ri), CertificateInvalid);

    CheckReport unclean = report;
    unclean.certificate[0].expr = "(relu (t F_1))";
    CHECK_THROWS_AS(validate_certificate(unclean, f.gs, f.gd, f.ri), CertificateInvalid);

    CheckReport scaled = report;
    scaled.certificate[0].expr = "(sum (concat (t F_1) (t F_2) :dim 0) "
                                 "(concat (t F_1) (t F_2) :dim 0))"; // clean but 2x off
    CHECK_THROWS_AS(validate_certificate(scaled, f.gs, f.gd, f.ri), CertificateInvalid);

    register_harness_extensions();
    Fixture mlp = generate_by_name("mlp_tp2");
    CheckReport mlp_report = compute_out_rel(mlp.gs, mlp.gd, mlp.ri, CheckConfig{});
    REQUIRE(mlp_report.refines());
    CHECK(validate_certificate(mlp_report, mlp.gs, mlp.gd, mlp.ri, {0}, 1e-5));
}

TEST_CASE("expectation diffing reports missing mappings only") {
    Fixture f = fig();
    CheckReport report = compute_out_rel(f.gs, f.gd, f.ri, CheckConfig{});
    Relation expected;
    expected.add("F", parse_expr("(concat (t F_1) (t F_2) :dim 0)"));
    CHECK(expectation_diff(report, expected).empty());
    expected.add("F", parse_expr("(t F_1)"));
    auto missing = expectation_diff(report, expected);
    REQUIRE(missing.size() == 1);
    CHECK(missing[0].second == "(t F_1)");
}

TEST_CASE("reports are deterministic modulo timings") {
    Fixture f = fig();
    CheckReport a = compute_out_rel(f.gs, f.gd, f.ri, CheckConfig{});
    CheckReport b = compute_out_rel(f.gs, f.gd, f.ri, CheckConfig{});
    CHECK(a.to_json(false).dump() == b.to_json(false).dump());
}

TEST_CASE("relation knowledge grows monotonically over the node sweep") {
    register_harness_extensions();
    Fixture f = generate_by_name("mlp_tp2");
    CheckConfig cfg;
    CheckReport report = compute_out_rel(f.gs, f.gd, f.ri, cfg);
    REQUIRE(report.refines());
    // Every processed operator contributed at least one mapping, so the
    // cumulative relation strictly grows node over node.
    size_t total = 0;
    for (const OpNode* n : f.gs.topo_order()) {
        const auto& lines = report.node_relations.at(n->id);
        CHECK(!lines.empty());
        total += lines.size();
    }
    CHECK(total >= f.gs.nodes().size());
}

TEST_CASE("input relations are validated against both graphs") {
    Fixture f = fig();
    Relation bad;
    bad.add("C", parse_expr("(t C_1)")); // targets an intermediate, not an input
    CHECK_THROWS_AS(validate_input_relation(bad, f.gs, f.gd, CleanOpSet::defaults()),
                    ValidationError);
    Relation unclean;
    unclean.add("A", parse_expr("(relu (t A_1))"));
    CHECK_THROWS_AS(validate_input_relation(unclean, f.gs, f.gd, CleanOpSet::defaults()),
                    ValidationError);
    Relation dangling;
    dangling.add("A", parse_expr("(t C_1)")); // refs a non-input of the destination
    CHECK_THROWS_AS(validate_input_relation(dangling, f.gs, f.gd, CleanOpSet::defaults()),
                    ValidationError);
    CHECK_THROWS_AS(compute_out_rel(f.gs, f.gd, bad, CheckConfig{}), ValidationError);
}

TEST_CASE("per-shard elementwise ops map through concatenated activations") {
    ComputationGraph gs = ComputationGraph::from_text(R"({
      "tensors": [{"id":"X","shape":[4,4]},{"id":"Y","shape":[4,4]}],
      "nodes": [{"id":"act","op":"core.relu","inputs":["X"],"outputs":["Y"]}],
      "inputs": ["X"], "outputs": ["Y"]
    })");
    ComputationGraph gd = ComputationGraph::from_text(R"({
      "tensors": [
        {"id":"X1","shape":[2,4]},{"id":"X2","shape":[2,4]},
        {"id":"Y1","shape":[2,4]},{"id":"Y2","shape":[2,4]}
      ],
      "nodes": [
        {"id":"act1","op":"core.relu","inputs":["X1"],"outputs":["Y1"]},
        {"id":"act2","op":"core.relu","inputs":["X2"],"outputs":["Y2"]}
      ],
      "inputs": ["X1","X2"], "outputs": ["Y1","Y2"]
    })");
    Relation ri;
    ri.add("X", parse_expr("(concat (t X1) (t X2) :dim 0)"));
    const OpNode* act = gs.find_node("act");
    ExplorationState st;
    Relation rv = compute_node_out_rel(*act, gs, gd, ri, CheckConfig{}, st);
    bool found = false;
    for (const auto& e : rv.entries())
        found |= e.target == "Y" && canonical_print(e.expr) == "(concat (t Y1) (t Y2) :dim 0)";
    CHECK(found);
}

TEST_CASE("exhausted budgets surface as warnings, never as wrong certificates") {
    Fixture f = fig();
    CheckConfig tiny;
    tiny.budget.max_enodes = 8;
    CheckReport r = compute_out_rel(f.gs, f.gd, f.ri, tiny);
    CHECK(r.budget_warning);
    if (r.refines()) CHECK(validate_certificate(r, f.gs, f.gd, f.ri));
}

TEST_CASE("invalid budgets are configuration errors") {
    Fixture f = fig();
    CheckConfig cfg;
    cfg.budget.max_iterations = 0;
    CHECK_THROWS_AS(compute_out_rel(f.gs, f.gd, f.ri, cfg), ConfigError);
}

TEST_CASE("exhaustive mode enforces its size cap") {
    Fixture f = fig();
    CheckConfig cfg;
    cfg.mode = CheckConfig::Mode::Exhaustive;
    cfg.exhaustive_cap = 2;
    CHECK_THROWS_AS(compute_out_rel(f.gs, f.gd, f.ri, cfg), ConfigError);
}
