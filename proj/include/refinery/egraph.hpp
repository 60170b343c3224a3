// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "refinery/expr.hpp"
#include "refinery/ops.hpp"

namespace refinery {

using ClassId = std::uint32_t;

/// One node of the equality-saturation structure. Leaves are tensor refs
/// ("$t") and symbolic scalars ("$s"); everything else is an operator
/// application whose children are e-class ids.
struct ENode {
    std::string op; // "$t", "$s", or an op kind
    std::string tensor_id;
    DimExpr scalar_value;
    Attrs attrs;
    std::vector<ClassId> children;

    static ENode tensor(std::string id);
    static ENode scalar(DimExpr v);
    static ENode apply(std::string op_kind, std::vector<ClassId> children, Attrs attrs = {});

    bool is_tensor() const { return op == "$t"; }
    bool is_scalar() const { return op == "$s"; }
    bool is_apply() const { return !is_tensor() && !is_scalar(); }

    /// Canonical text key, also the hash-cons key (children must be canonical).
    std::string key() const;
};

struct ExtractLimits {
    size_t max_exprs = 64; // per e-class alternatives cap
    size_t max_expr_nodes = 80;
};

/// Congruence-closed e-graph with hash-consing, union-find over class ids,
/// and a per-class shape analysis fed by an external leaf-shape resolver.
/// Deterministic: class ids are creation-ordered, merges pick the smaller
/// root, iteration orders are sorted.
class EGraph {
public:
    EGraph(ShapeResolver resolver, const ConstraintStore* cs);

    ClassId add_expr(const Expr::Ptr& e, const std::string& provenance = "");
    ClassId add_enode(ENode n, const std::string& provenance = "");
    ClassId find(ClassId c) const;
    /// Unions two classes; congruence is restored by the next rebuild().
    bool merge(ClassId a, ClassId b);
    void rebuild();

    size_t num_enodes() const { return num_enodes_; }
    size_t num_classes() const;
    std::vector<ClassId> class_ids() const; // canonical roots, ascending

    struct StoredNode {
        ENode node;
        std::string provenance;
    };
    const std::vector<StoredNode>& class_nodes(ClassId c) const;
    std::optional<Shape> shape_of(ClassId c) const;
    const ConstraintStore& constraints() const { return *cs_; }

    /// True when the canonical form of `n` is already hash-consed.
    bool contains(const ENode& n) const;
    std::optional<ClassId> lookup(const ENode& n) const;

    using NodeFilter = std::function<bool(const ENode&)>;
    /// Every acyclic expression extractable from the class through enodes
    /// accepted by `filter` (pass nullptr for no filter), capped by limits.
    /// Deterministic, sorted by (simplicity, canonical print).
    std::vector<Expr::Ptr> extract_all(ClassId c, const NodeFilter& filter,
                                       const ExtractLimits& limits) const;
    /// Simplicity-minimal expression of the class, tie-broken by canonical
    /// print; nullopt when no acyclic expression passes the filter.
    std::optional<Expr::Ptr> extract_min(ClassId c, const NodeFilter& filter) const;

    ENode canonicalized(ENode n) const;

private:
    struct EClassData {
        std::vector<StoredNode> nodes;
        std::set<std::string> node_keys;
        std::vector<std::pair<ENode, ClassId>> parents;
        std::optional<Shape> shape;
    };

    ShapeResolver resolver_;
    const ConstraintStore* cs_;
    std::vector<ClassId> uf_;
    std::vector<EClassData> classes_;
    std::map<std::string, ClassId> hashcons_;
    std::deque<ClassId> dirty_;
    size_t num_enodes_ = 0;

    std::optional<Shape> shape_of_node(const ENode& n) const;
    void extract_rec(ClassId c, const NodeFilter& filter, const ExtractLimits& limits,
                     std::set<ClassId>& on_path, std::vector<Expr::Ptr>& out,
                     size_t* emitted) const;
};

} // namespace refinery
