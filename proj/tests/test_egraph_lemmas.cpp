// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "refinery/checker.hpp"
#include "refinery/errors.hpp"
#include "refinery/harness.hpp"
#include "refinery/lemma.hpp"

using namespace refinery;

namespace {

ShapeResolver fixed_shapes(std::map<std::string, Shape> shapes) {
    return [shapes = std::move(shapes)](const std::string& id) -> std::optional<Shape> {
        auto it = shapes.find(id);
        if (it == shapes.end()) return std::nullopt;
        return it->second;
    };
}

std::set<std::string> prints(const std::vector<Expr::Ptr>& exprs) {
    std::set<std::string> out;
    for (const auto& e : exprs) out.insert(canonical_print(e));
    return out;
}

const Lemma& lemma(const std::string& name) {
    const Lemma* l = LemmaRegistry::instance().find(name);
    REQUIRE(l != nullptr);
    return *l;
}

} // namespace

TEST_CASE("e-graph hash-consing and congruence closure") {
    ConstraintStore cs;
    EGraph eg(nullptr, &cs);
    ClassId a = eg.add_expr(parse_expr("(t a)"));
    ClassId b = eg.add_expr(parse_expr("(t b)"));
    ClassId fa = eg.add_expr(parse_expr("(relu (t a))"));
    ClassId fb = eg.add_expr(parse_expr("(relu (t b))"));
    CHECK(eg.find(fa) != eg.find(fb));
    CHECK(eg.add_expr(parse_expr("(relu (t a))")) == fa); // hash-consed

    eg.merge(a, b);
    eg.rebuild();
    CHECK(eg.find(fa) == eg.find(fb)); // congruence: equal children, equal parents

    // AC normalization: sums ignore child order.
    ClassId s1 = eg.add_expr(parse_expr("(sum (t a) (t c))"));
    ClassId s2 = eg.add_expr(parse_expr("(sum (t c) (t a))"));
    CHECK(eg.find(s1) == eg.find(s2));
}

TEST_CASE("shape analysis flows through e-classes") {
    ConstraintStore cs;
    EGraph eg(fixed_shapes({{"X", {DimExpr(4), DimExpr(8)}}, {"W", {DimExpr(8), DimExpr(2)}}}),
              &cs);
    ClassId mm = eg.add_expr(parse_expr("(matmul (t X) (t W))"));
    auto s = eg.shape_of(mm);
    REQUIRE(s.has_value());
    CHECK(*s == Shape{DimExpr(4), DimExpr(2)});
}

TEST_CASE("rewrite_using_lemma finds the block decomposition") {
    auto lemmas = LemmaRegistry::instance().all();
    ConstraintStore cs;
    auto resolver = fixed_shapes({{"A1", {DimExpr(3), DimExpr(2)}},
                                  {"A2", {DimExpr(3), DimExpr(3)}},
                                  {"B1", {DimExpr(2), DimExpr(4)}},
                                  {"B2", {DimExpr(3), DimExpr(4)}}});
    auto e = parse_expr("(matmul (concat (t A1) (t A2) :dim 1) (concat (t B1) (t B2) :dim 0))");
    auto res = rewrite_using_lemma(e, lemmas, cs, SaturationBudget{}, resolver);
    auto set = prints(res.exprs);
    CHECK(set.count("(sum (matmul (t A1) (t B1)) (matmul (t A2) (t B2)))"));
    CHECK(set.count(canonical_print(e))); // includes the seed itself
    CHECK(!res.budget_hit);
}

TEST_CASE("rewrite_using_lemma on a bare ref is reflexive") {
    ConstraintStore cs;
    auto res = rewrite_using_lemma(parse_expr("(t X)"), LemmaRegistry::instance().all(), cs,
                                   SaturationBudget{}, nullptr);
    CHECK(prints(res.exprs) == std::set<std::string>{"(t X)"});
}

TEST_CASE("slice merge then identity-slice reaches the whole tensor") {
    ConstraintStore cs;
    auto resolver = fixed_shapes({{"X", {DimExpr(8)}}});
    auto e = parse_expr("(concat (slice (t X) :dim 0 :start 0 :end 4) "
                        "(slice (t X) :dim 0 :start 4 :end 8) :dim 0)");
    auto res = rewrite_using_lemma(e, LemmaRegistry::instance().all(), cs, SaturationBudget{},
                                   resolver);
    auto set = prints(res.exprs);
    CHECK(set.count("(slice (t X) :dim 0 :start 0 :end 8)"));
    CHECK(set.count("(t X)"));
}

TEST_CASE("rewrite_t_to_expr enumerates per-tensor substitution choices") {
    Relation r;
    r.add("A", parse_expr("(t alpha0)"));
    r.add("B", parse_expr("(t beta0)"));
    auto out = rewrite_t_to_expr(parse_expr("(matmul (t A) (t B))"), r);
    CHECK(prints(out) == std::set<std::string>{
                             "(matmul (t A) (t B))",
                             "(matmul (t alpha0) (t B))",
                             "(matmul (t A) (t beta0))",
                             "(matmul (t alpha0) (t beta0))",
                         });

    Relation empty;
    auto same = rewrite_t_to_expr(parse_expr("(relu (t X))"), empty);
    CHECK(prints(same) == std::set<std::string>{"(relu (t X))"});

    Relation multi;
    multi.add("A", parse_expr("(t alpha0)"));
    multi.add("A", parse_expr("(t alpha1)"));
    auto variants = prints(rewrite_t_to_expr(parse_expr("(matmul (t A) (t B))"), multi));
    CHECK(variants.count("(matmul (t alpha0) (t B))"));
    CHECK(variants.count("(matmul (t alpha1) (t B))"));
}

TEST_CASE("rewrite_expr_to_t contracts subexpressions to tensors") {
    Relation r;
    r.add("C1", parse_expr("(matmul (t A1) (t B1))"));
    r.add("C2", parse_expr("(matmul (t A2) (t B2))"));
    auto out = prints(rewrite_expr_to_t(
        parse_expr("(sum (matmul (t A1) (t B1)) (matmul (t A2) (t B2)))"), r));
    CHECK(out.count("(sum (t C1) (t C2))"));
    CHECK(out.count("(sum (matmul (t A1) (t B1)) (matmul (t A2) (t B2)))"));

    Relation empty;
    auto same = rewrite_expr_to_t(parse_expr("(relu (t X))"), empty);
    CHECK(prints(same) == std::set<std::string>{"(relu (t X))"});

    // All occurrences of a matched subexpression are replaced together.
    Relation single;
    single.add("C1", parse_expr("(matmul (t A1) (t B1))"));
    auto rep = prints(rewrite_expr_to_t(
        parse_expr("(concat (matmul (t A1) (t B1)) (matmul (t A1) (t B1)) :dim 0)"), single));
    CHECK(rep.count("(concat (t C1) (t C1) :dim 0)"));
}

TEST_CASE("builtin library loads, self-validates, and carries required rules") {
    auto lib = load_builtin_lemmas();
    CHECK(lib.size() >= 30);
    auto has = [&](const std::string& name) {
        return std::any_of(lib.begin(), lib.end(), [&](const Lemma& l) { return l.name == name; });
    };
    CHECK(has("matmul-of-concat-blocks"));
    CHECK(has("slice-split"));
    CHECK(has("rmsnorm-of-concat"));
    const Lemma* split = nullptr;
    for (const auto& l : lib)
        if (l.name == "slice-split") split = &l;
    REQUIRE(split != nullptr);
    CHECK(split->constrained);
}

TEST_CASE("register_lemma validates and rejects duplicates") {
    register_harness_extensions();
    // The rotary distribution rules registered above show up in the registry.
    CHECK(LemmaRegistry::instance().find("rope-of-concat-rows") != nullptr);

    Lemma bad;
    bad.name = "unit-bad-unbound";
    bad.lhs = parse_pattern("(relu ?x)");
    bad.rhs = parse_pattern("(relu ?y)"); // ?y never bound
    bad.samples = {{{{"X", {2, 2}}}, "(relu (t X))", "(relu (t X))", {}}};
    CHECK_THROWS_AS(LemmaRegistry::instance().register_lemma(bad), LemmaValidationError);

    Lemma dup = lemma("slice-merge");
    CHECK_THROWS_AS(LemmaRegistry::instance().register_lemma(dup), DuplicateName);
}

TEST_CASE("constrained rules only build on pre-existing structure") {
    ConstraintStore cs;
    auto resolver = fixed_shapes({{"X", {DimExpr(6), DimExpr(4)}}});
    std::vector<Lemma> only_split{lemma("slice-split")};

    // Without the adjacent sub-slices present, nothing fires.
    EGraph bare(resolver, &cs);
    bare.add_expr(parse_expr("(slice (t X) :dim 0 :start 0 :end 6)"));
    size_t before = bare.num_enodes();
    saturate(bare, only_split, SaturationBudget{}, nullptr);
    CHECK(bare.num_enodes() == before);

    // With them seeded, the split/fuse applies and ties the classes together.
    EGraph seeded(resolver, &cs);
    ClassId whole = seeded.add_expr(parse_expr("(slice (t X) :dim 0 :start 0 :end 6)"));
    seeded.add_expr(parse_expr("(slice (t X) :dim 0 :start 0 :end 2)"));
    seeded.add_expr(parse_expr("(slice (t X) :dim 0 :start 2 :end 6)"));
    saturate(seeded, only_split, SaturationBudget{}, nullptr);
    ClassId fused = seeded.add_expr(
        parse_expr("(concat (slice (t X) :dim 0 :start 0 :end 2) "
                   "(slice (t X) :dim 0 :start 2 :end 6) :dim 0)"));
    seeded.rebuild();
    CHECK(seeded.find(whole) == seeded.find(fused));
}

TEST_CASE("bidirectional rules keep both sides in one class") {
    for (const auto& l : LemmaRegistry::instance().all()) {
        if (l.direction != Lemma::Direction::Both || !l.is_declarative()) continue;
        const LemmaSample& s = l.samples.front();
        ConstraintStore cs;
        std::map<std::string, Shape> shapes;
        for (const auto& in : s.inputs) {
            Shape sh;
            for (auto d : in.shape) sh.emplace_back(d);
            shapes[in.id] = sh;
        }
        EGraph eg(fixed_shapes(shapes), &cs);
        // Seed the RHS only; the reverse direction must recover the LHS.
        ClassId rc = eg.add_expr(parse_expr(s.rhs));
        saturate(eg, {l}, SaturationBudget{}, nullptr);
        ClassId lc = eg.add_expr(parse_expr(s.lhs));
        eg.rebuild();
        CAPTURE(l.name);
        CHECK(eg.find(rc) == eg.find(lc));
    }
}

TEST_CASE("every registered lemma validates numerically at 1e-6") {
    register_harness_extensions();
    for (const auto& l : LemmaRegistry::instance().all()) {
        CAPTURE(l.name);
        CHECK_NOTHROW(validate_lemma_numeric(l, 3, 1e-6)); // acceptance runs 10 rounds
    }
}

TEST_CASE("lemma definition files parse, validate, and fire") {
    auto doc = nlohmann::json::parse(R"json([
      {
        "name": "unit-swap-elim",
        "family": "transpose",
        "lhs": "(transpose (transpose ?x :dim0 0 :dim1 1) :dim0 0 :dim1 1)",
        "rhs": "?x",
        "sample": {
          "inputs": [{"id": "X", "shape": [2, 3]}],
          "lhs": "(transpose (transpose (t X) :dim0 0 :dim1 1) :dim0 0 :dim1 1)",
          "rhs": "(t X)"
        }
      },
      {
        "name": "unit-cond-noop",
        "family": "slice",
        "lhs": "(slice ?x :dim ?d :start ?a :end ?b)",
        "rhs": "?x",
        "condition": ["eq(attr(a), 0)", "eq(attr(b), shape(x, 0))", "eq(attr(d), 0)"],
        "sample": {
          "inputs": [{"id": "X", "shape": [5]}],
          "lhs": "(slice (t X) :dim 0 :start 0 :end 5)",
          "rhs": "(t X)"
        }
      }
    ])json");
    auto lemmas = parse_lemma_file(doc);
    REQUIRE(lemmas.size() == 2);
    for (const auto& l : lemmas) CHECK_NOTHROW(validate_lemma_numeric(l, 2, 1e-6));

    // A partial slice must not satisfy the whole-extent condition.
    ConstraintStore cs;
    EGraph eg(fixed_shapes({{"X", {DimExpr(5)}}}), &cs);
    ClassId part = eg.add_expr(parse_expr("(slice (t X) :dim 0 :start 0 :end 3)"));
    ClassId x = eg.add_expr(parse_expr("(t X)"));
    saturate(eg, {lemmas[1]}, SaturationBudget{}, nullptr);
    CHECK(eg.find(part) != eg.find(x));
}

TEST_CASE("pruning keeps one representative per lemma-equivalent group") {
    register_harness_extensions();
    Fixture f = generate_by_name("matmul_sub_tp2");
    CheckConfig pruned;
    CheckConfig keep_all;
    keep_all.prune = false;
    CheckReport a = compute_out_rel(f.gs, f.gd, f.ri, pruned);
    CheckReport b = compute_out_rel(f.gs, f.gd, f.ri, keep_all);
    CHECK(a.verdict == b.verdict);
    // Same mapped targets; the unpruned run may carry extra equivalent forms.
    REQUIRE(a.certificate.size() == b.certificate.size());
    for (size_t i = 0; i < a.certificate.size(); i++) {
        CHECK(a.certificate[i].target == b.certificate[i].target);
        CHECK(a.certificate[i].expr == b.certificate[i].expr);
    }
    // Every pruned mapping appears among the unpruned ones.
    for (const auto& [node, lines] : a.node_relations) {
        const auto& full = b.node_relations.at(node);
        for (const auto& line : lines)
            CHECK(std::find(full.begin(), full.end(), line) != full.end());
    }
}

TEST_CASE("saturation respects the e-node budget and reports it") {
    ConstraintStore cs;
    auto resolver = fixed_shapes({{"X", {DimExpr(8), DimExpr(8)}}});
    EGraph eg(resolver, &cs);
    eg.add_expr(parse_expr("(relu (concat (slice (t X) :dim 0 :start 0 :end 4) "
                           "(slice (t X) :dim 0 :start 4 :end 8) :dim 0))"));
    SaturationBudget tiny{30, 4};
    auto res = saturate(eg, LemmaRegistry::instance().all(), tiny, nullptr);
    CHECK(res.budget_hit);
}
