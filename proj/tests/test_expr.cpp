// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "refinery/errors.hpp"
#include "refinery/expr.hpp"

using namespace refinery;

TEST_CASE("s-expression parse and print") {
    for (const char* text : {
             "(t X)",
             "(scalar s0)",
             "(concat (t A_1) (t A_2) :dim 1)",
             "(slice (t X) :dim 0 :start 0 :end s0)",
             "(sum (t C_1) (t C_2))",
             "(reshape (t X) :shape (2 s0))",
         }) {
        CHECK(print_expr(parse_expr(text)) == text);
    }
    CHECK_THROWS_AS(parse_expr("(concat (t A)"), SchemaError);
    CHECK_THROWS_AS(parse_expr("(t A) trailing"), SchemaError);
    // Attributes are reordered canonically regardless of author order.
    CHECK(print_expr(parse_expr("(slice (t X) :end 4 :start 0 :dim 1)")) ==
          "(slice (t X) :dim 1 :start 0 :end 4)");
}

TEST_CASE("canonicalization flattens nested sums/concats and sorts sums") {
    CHECK(canonical_print(parse_expr("(sum (t B) (t A))")) == "(sum (t A) (t B))");
    CHECK(canonical_print(parse_expr("(sum (t A) (sum (t B) (t C)))")) ==
          "(sum (t A) (t B) (t C))");
    CHECK(canonical_print(parse_expr("(concat (concat (t A) (t B) :dim 0) (t C) :dim 0)")) ==
          "(concat (t A) (t B) (t C) :dim 0)");
    // Mixed dims do not flatten.
    CHECK(canonical_print(parse_expr("(concat (concat (t A) (t B) :dim 1) (t C) :dim 0)")) ==
          "(concat (concat (t A) (t B) :dim 1) (t C) :dim 0)");
}

TEST_CASE("simplicity counts operator applications") {
    CHECK(simplicity(parse_expr("(t X)")) == 0);
    CHECK(simplicity(parse_expr("(slice (t X) :dim 0 :start 16 :end 48)")) == 1);
    CHECK(simplicity(parse_expr("(concat (slice (t X) :dim 0 :start 16 :end 32) (slice (t X) "
                                ":dim 0 :start 32 :end 48) :dim 0)")) == 3);
    CHECK(simplicity(parse_expr("(sum (t C_1) (t C_2))")) == 1);
}

TEST_CASE("substitute replaces every occurrence, structurally") {
    auto e = parse_expr("(matmul (t A) (t B))");
    auto sub = substitute(e, {{"A", parse_expr("(t alpha0)")}});
    CHECK(print_expr(sub) == "(matmul (t alpha0) (t B))");
    CHECK(substitute(e, {}) == e);
    auto nested = parse_expr("(concat (t A) (matmul (t A) (t B)) :dim 0)");
    CHECK(print_expr(substitute(nested, {{"A", parse_expr("(t X)")}})) ==
          "(concat (t X) (matmul (t X) (t B)) :dim 0)");
}

TEST_CASE("substitute is idempotent when ranges avoid binding keys") {
    std::mt19937_64 rng(5);
    auto e = parse_expr("(sum (matmul (t A) (t B)) (concat (t A) (t C) :dim 0))");
    std::map<std::string, Expr::Ptr> bindings{{"A", parse_expr("(relu (t P))")},
                                              {"C", parse_expr("(t Q)")}};
    auto once = substitute(e, bindings);
    auto twice = substitute(once, bindings);
    CHECK(canonical_print(once) == canonical_print(twice));
}

TEST_CASE("is_clean admits rearrangement and reduction only") {
    CleanOpSet ops = CleanOpSet::defaults();
    CHECK(is_clean(parse_expr("(concat (t F1) (t F2) :dim 0)"), ops));
    CHECK(is_clean(parse_expr("(sum (t C1) (t C2))"), ops));
    CHECK(is_clean(parse_expr("(reduce_sum (t X) :dim 0)"), ops));
    // Division is computation, and a scalar operand on tensor data is too.
    CHECK(!is_clean(parse_expr("(div (sum (t L1) (t L2)) (scalar 2))"), ops));
    CHECK(!is_clean(parse_expr("(matmul (t A) (t B))"), ops));
    CHECK(!is_clean(parse_expr("(concat (t A) (relu (t B)) :dim 0)"), ops));
    // Scalars confined to attributes are fine.
    CHECK(is_clean(parse_expr("(slice (t X) :dim 0 :start 0 :end s0)"), ops));

    CleanOpSet strict = ops;
    strict.rearrangement.erase("core.reshape");
    CHECK(is_clean(parse_expr("(reshape (t X) :shape (4))"), ops));
    CHECK(!is_clean(parse_expr("(reshape (t X) :shape (4))"), strict));
}

namespace {

// Collect subtree handles as paths for the monotonicity property.
void subtrees(const Expr::Ptr& e, std::vector<Expr::Ptr>& out) {
    out.push_back(e);
    for (const auto& c : e->children) subtrees(c, out);
}

Expr::Ptr replace_node(const Expr::Ptr& e, const Expr::Ptr& victim, const Expr::Ptr& repl) {
    if (e == victim) return repl;
    if (!e->is_apply()) return e;
    std::vector<Expr::Ptr> kids;
    for (const auto& c : e->children) kids.push_back(replace_node(c, victim, repl));
    return Expr::apply(e->op, std::move(kids), e->attrs);
}

} // namespace

TEST_CASE("clean expressions stay clean under subtree-to-ref replacement") {
    CleanOpSet ops = CleanOpSet::defaults();
    auto e = parse_expr("(concat (sum (t A) (t B)) (slice (transpose (t C) :dim0 0 :dim1 1) "
                        ":dim 0 :start 0 :end 2) :dim 0)");
    REQUIRE(is_clean(e, ops));
    std::vector<Expr::Ptr> nodes;
    subtrees(e, nodes);
    for (const auto& victim : nodes) {
        auto replaced = replace_node(e, victim, Expr::tensor("fresh"));
        CHECK(is_clean(replaced, ops));
    }
}

TEST_CASE("relations are target-keyed multisets deduped by canonical print") {
    Relation r;
    CHECK(r.add("C", parse_expr("(sum (t C1) (t C2))")));
    CHECK(r.add("C", parse_expr("(concat (t D1) (t D2) :dim 0)")));
    // Same value modulo canonical ordering: rejected as a duplicate.
    CHECK(!r.add("C", parse_expr("(sum (t C2) (t C1))")));
    CHECK(r.for_target("C").size() == 2);
    CHECK(r.targets() == std::set<std::string>{"C"});

    CHECK(is_complete(r, std::vector<std::string>{"C"}));
    CHECK(!is_complete(r, std::vector<std::string>{"C", "F"}));
    Relation empty;
    CHECK(!is_complete(empty, std::vector<std::string>{"F"}));

    auto j = r.to_json();
    Relation back = Relation::from_json(j);
    CHECK(back.size() == r.size());
    CHECK(back.to_json() == j);
}
