// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "refinery/dim_expr.hpp"

namespace refinery {

class ComputationGraph;

/// Attribute values are affine forms (ints are concrete affine forms), lists
/// of affine forms, or strings. Keeping a single numeric kind makes attribute
/// equality semantic and the textual form unambiguous.
using AttrValue = std::variant<DimExpr, std::vector<DimExpr>, std::string>;
using Attrs = std::vector<std::pair<std::string, AttrValue>>;

std::string attr_value_str(const AttrValue& v);
bool attr_value_eq(const AttrValue& a, const AttrValue& b);
/// Canonical attribute order: op schema declaration order when the op is
/// registered, unknown names trailing alphabetically.
Attrs order_attrs(const std::string& op_kind, Attrs attrs);

/// Immutable symbolic expression tree over tensor references.
class Expr {
public:
    enum class Kind { TensorRef, ScalarRef, Apply };
    using Ptr = std::shared_ptr<const Expr>;

    Kind kind;
    std::string op;       // op kind for Apply, tensor id for TensorRef
    DimExpr scalar;       // for ScalarRef
    Attrs attrs;          // Apply only, canonically ordered
    std::vector<Ptr> children;

    static Ptr tensor(std::string id);
    static Ptr scalar_ref(DimExpr v);
    static Ptr apply(std::string op_kind, std::vector<Ptr> children, Attrs attrs = {});

    bool is_tensor() const { return kind == Kind::TensorRef; }
    bool is_scalar() const { return kind == Kind::ScalarRef; }
    bool is_apply() const { return kind == Kind::Apply; }
    const AttrValue* attr(const std::string& name) const;
};

/// Canonical form: nested same-dim concats and nested sums flattened,
/// sum children sorted, single-child sum/concat collapsed.
Expr::Ptr canonicalize(const Expr::Ptr& e);
std::string print_expr(const Expr::Ptr& e);
std::string canonical_print(const Expr::Ptr& e);
/// S-expression grammar: `(t X)`, `(scalar s0)`,
/// `(concat (t A_1) (t A_2) :dim 1)`, `(slice (t X) :dim 0 :start 0 :end s0)`.
Expr::Ptr parse_expr(std::string_view text);

/// Number of Apply nodes in the canonical form; the simplicity metric
/// (smaller is simpler). Tie-breaks elsewhere use the canonical print.
int simplicity(const Expr::Ptr& e);

/// Structural substitution: every TensorRef whose id is bound gets replaced.
Expr::Ptr substitute(const Expr::Ptr& e, const std::map<std::string, Expr::Ptr>& bindings);

void collect_tensor_refs(const Expr::Ptr& e, std::set<std::string>& out);
std::set<std::string> tensor_refs(const Expr::Ptr& e);

/// Operators admissible in clean expressions, split into element
/// rearrangement and reduction.
struct CleanOpSet {
    std::set<std::string> rearrangement;
    std::set<std::string> reduction;

    static CleanOpSet defaults();
    bool contains(const std::string& op_kind) const {
        return rearrangement.count(op_kind) > 0 || reduction.count(op_kind) > 0;
    }
};

/// True iff every Apply uses an admissible op and no scalar appears as an
/// operand (scalars may only occur in structural attribute positions).
bool is_clean(const Expr::Ptr& e, const CleanOpSet& ops);

struct RelationEntry {
    std::string target;
    Expr::Ptr expr;
    std::string provenance;
};

/// Multiset of (target tensor, expression) pairs keyed by target; a target
/// may carry several mappings. Dedup is by canonical expression print.
class Relation {
public:
    /// Returns false if an equal (target, expr) pair was already present.
    bool add(std::string target, Expr::Ptr expr, std::string provenance = "");
    void merge(const Relation& other);

    const std::vector<RelationEntry>& entries() const { return entries_; }
    std::vector<const RelationEntry*> for_target(const std::string& t) const;
    bool has_target(const std::string& t) const;
    std::set<std::string> targets() const;
    size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// JSON list of {"target": ..., "expr": "<s-expression>"}.
    static Relation from_json(const nlohmann::json& j);
    nlohmann::ordered_json to_json() const;

private:
    std::vector<RelationEntry> entries_;
    std::set<std::pair<std::string, std::string>> seen_;
};

bool is_complete(const Relation& r, const std::vector<std::string>& outputs);
bool is_complete(const Relation& r, const ComputationGraph& g);

} // namespace refinery
