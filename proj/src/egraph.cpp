// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/egraph.hpp"

#include <algorithm>
#include <sstream>

#include "refinery/errors.hpp"
#include "refinery/log.hpp"

namespace refinery {

ENode ENode::tensor(std::string id) {
    ENode n;
    n.op = "$t";
    n.tensor_id = std::move(id);
    return n;
}

ENode ENode::scalar(DimExpr v) {
    ENode n;
    n.op = "$s";
    n.scalar_value = std::move(v);
    return n;
}

ENode ENode::apply(std::string op_kind, std::vector<ClassId> children, Attrs attrs) {
    ENode n;
    n.attrs = order_attrs(op_kind, std::move(attrs));
    n.op = std::move(op_kind);
    n.children = std::move(children);
    return n;
}

std::string ENode::key() const {
    std::ostringstream os;
    os << op;
    if (is_tensor()) os << ":" << tensor_id;
    if (is_scalar()) os << ":" << scalar_value.str();
    for (const auto& [k, v] : attrs) os << " :" << k << "=" << attr_value_str(v);
    for (ClassId c : children) os << " #" << c;
    return os.str();
}

EGraph::EGraph(ShapeResolver resolver, const ConstraintStore* cs)
    : resolver_(std::move(resolver)), cs_(cs) {}

ClassId EGraph::find(ClassId c) const {
    while (uf_[c] != c) c = uf_[c];
    return c;
}

ENode EGraph::canonicalized(ENode n) const {
    for (auto& c : n.children) c = find(c);
    // AC normalization for elementwise sums: child order is irrelevant.
    if (n.op == "core.sum") std::sort(n.children.begin(), n.children.end());
    return n;
}

std::optional<Shape> EGraph::shape_of_node(const ENode& n) const {
    if (n.is_tensor()) return resolver_ ? resolver_(n.tensor_id) : std::nullopt;
    if (n.is_scalar()) return Shape{};
    const OpSchema* schema = OpRegistry::instance().find(n.op);
    if (!schema || !schema->infer) return std::nullopt;
    std::vector<Shape> kid_shapes;
    for (ClassId c : n.children) {
        auto s = shape_of(c);
        if (!s) return std::nullopt;
        kid_shapes.push_back(*s);
    }
    try {
        auto out = schema->infer(kid_shapes, n.attrs, *cs_);
        if (out.empty()) return std::nullopt;
        return out[0];
    } catch (const Error&) {
        return std::nullopt;
    }
}

ClassId EGraph::add_enode(ENode n, const std::string& provenance) {
    n = canonicalized(n);
    std::string key = n.key();
    auto it = hashcons_.find(key);
    if (it != hashcons_.end()) return find(it->second);

    auto id = static_cast<ClassId>(classes_.size());
    uf_.push_back(id);
    classes_.emplace_back();
    EClassData& cls = classes_.back();
    cls.shape = shape_of_node(n);
    cls.node_keys.insert(key);
    for (ClassId child : n.children) classes_[find(child)].parents.emplace_back(n, id);
    cls.nodes.push_back({std::move(n), provenance});
    hashcons_[key] = id;
    num_enodes_++;
    return id;
}

ClassId EGraph::add_expr(const Expr::Ptr& e, const std::string& provenance) {
    switch (e->kind) {
        case Expr::Kind::TensorRef: return add_enode(ENode::tensor(e->op), provenance);
        case Expr::Kind::ScalarRef: return add_enode(ENode::scalar(e->scalar), provenance);
        case Expr::Kind::Apply: {
            std::vector<ClassId> children;
            children.reserve(e->children.size());
            for (const auto& c : e->children) children.push_back(add_expr(c, provenance));
            return add_enode(ENode::apply(e->op, std::move(children), e->attrs), provenance);
        }
    }
    throw Error("unreachable expr kind");
}

bool EGraph::merge(ClassId a, ClassId b) {
    a = find(a);
    b = find(b);
    if (a == b) return false;
    ClassId winner = std::min(a, b);
    ClassId loser = std::max(a, b);
    uf_[loser] = winner;

    EClassData& w = classes_[winner];
    EClassData& l = classes_[loser];
    for (auto& sn : l.nodes) {
        if (w.node_keys.insert(sn.node.key()).second)
            w.nodes.push_back(std::move(sn));
    }
    l.nodes.clear();
    l.node_keys.clear();
    for (auto& p : l.parents) w.parents.push_back(std::move(p));
    l.parents.clear();
    if (!w.shape && l.shape) w.shape = l.shape;
    else if (w.shape && l.shape && w.shape->size() != l.shape->size())
        log::debug("egraph: merged classes with different ranks");
    dirty_.push_back(winner);
    return true;
}

void EGraph::rebuild() {
    while (!dirty_.empty()) {
        ClassId c = find(dirty_.front());
        dirty_.pop_front();

        // Re-canonicalize members: child ids may have moved. A member whose
        // canonical form is already hash-consed elsewhere triggers a merge.
        std::vector<StoredNode> nodes = std::move(classes_[c].nodes);
        classes_[c].nodes.clear();
        classes_[c].node_keys.clear();
        for (auto& sn : nodes) {
            sn.node = canonicalized(std::move(sn.node));
            std::string key = sn.node.key();
            if (classes_[c].node_keys.insert(key).second)
                classes_[c].nodes.push_back(std::move(sn));
            auto it = hashcons_.find(key);
            if (it != hashcons_.end() && find(it->second) != c) {
                merge(c, find(it->second));
                c = find(c);
            } else {
                hashcons_[key] = c;
            }
        }

        // Re-canonicalize parents and merge congruent duplicates.
        auto parents = std::move(classes_[c].parents);
        classes_[c].parents.clear();
        for (auto& [pnode, pclass] : parents) {
            ENode canon = canonicalized(pnode);
            std::string key = canon.key();
            ClassId pc = find(pclass);
            auto it = hashcons_.find(key);
            if (it != hashcons_.end()) {
                ClassId existing = find(it->second);
                if (existing != pc) merge(existing, pc);
                pc = find(pc);
            }
            hashcons_[key] = pc;
            c = find(c);
            classes_[c].parents.emplace_back(std::move(canon), pc);
        }
    }
}

size_t EGraph::num_classes() const {
    size_t n = 0;
    for (ClassId i = 0; i < uf_.size(); i++)
        if (find(i) == i) n++;
    return n;
}

std::vector<ClassId> EGraph::class_ids() const {
    std::vector<ClassId> out;
    for (ClassId i = 0; i < uf_.size(); i++)
        if (find(i) == i && !classes_[i].nodes.empty()) out.push_back(i);
    return out;
}

const std::vector<EGraph::StoredNode>& EGraph::class_nodes(ClassId c) const {
    return classes_[find(c)].nodes;
}

std::optional<Shape> EGraph::shape_of(ClassId c) const { return classes_[find(c)].shape; }

bool EGraph::contains(const ENode& n) const { return lookup(n).has_value(); }

std::optional<ClassId> EGraph::lookup(const ENode& n) const {
    auto it = hashcons_.find(canonicalized(n).key());
    if (it == hashcons_.end()) return std::nullopt;
    return find(it->second);
}

namespace {

size_t expr_node_count(const Expr::Ptr& e) {
    size_t n = 1;
    for (const auto& c : e->children) n += expr_node_count(c);
    return n;
}

} // namespace

void EGraph::extract_rec(ClassId c, const NodeFilter& filter, const ExtractLimits& limits,
                         std::set<ClassId>& on_path, std::vector<Expr::Ptr>& out,
                         size_t* /*unused*/) const {
    c = find(c);
    if (on_path.count(c)) {
        // Self-referential classes (e.g. X merged with slice(X, full extent))
        // still contribute their leaves; recursion stays acyclic.
        for (const auto& sn : classes_[c].nodes) {
            if (out.size() >= limits.max_exprs) break;
            const ENode& n = sn.node;
            if (filter && !filter(n)) continue;
            if (n.is_tensor()) out.push_back(Expr::tensor(n.tensor_id));
            if (n.is_scalar()) out.push_back(Expr::scalar_ref(n.scalar_value));
        }
        return;
    }
    on_path.insert(c);
    // Tensor refs first: when caps bite, the simple representatives survive.
    std::vector<const ENode*> ordered;
    for (const auto& sn : classes_[c].nodes)
        if (sn.node.is_tensor() || sn.node.is_scalar()) ordered.push_back(&sn.node);
    for (const auto& sn : classes_[c].nodes)
        if (sn.node.is_apply()) ordered.push_back(&sn.node);

    for (const ENode* np : ordered) {
        if (out.size() >= limits.max_exprs) break;
        const ENode& n = *np;
        if (filter && !filter(n)) continue;
        if (n.is_tensor()) {
            out.push_back(Expr::tensor(n.tensor_id));
            continue;
        }
        if (n.is_scalar()) {
            out.push_back(Expr::scalar_ref(n.scalar_value));
            continue;
        }
        std::vector<std::vector<Expr::Ptr>> kid_lists;
        bool viable = true;
        for (ClassId child : n.children) {
            std::vector<Expr::Ptr> kl;
            extract_rec(child, filter, limits, on_path, kl, nullptr);
            if (kl.empty()) {
                viable = false;
                break;
            }
            kid_lists.push_back(std::move(kl));
        }
        if (!viable) continue;
        // Cartesian product over child alternatives, bounded per class.
        std::vector<std::vector<Expr::Ptr>> combos{{}};
        for (const auto& kl : kid_lists) {
            std::vector<std::vector<Expr::Ptr>> next;
            for (const auto& combo : combos) {
                for (const auto& k : kl) {
                    if (next.size() >= limits.max_exprs) break;
                    auto ext = combo;
                    ext.push_back(k);
                    next.push_back(std::move(ext));
                }
                if (next.size() >= limits.max_exprs) break;
            }
            combos = std::move(next);
        }
        for (auto& combo : combos) {
            if (out.size() >= limits.max_exprs) break;
            auto e = Expr::apply(n.op, std::move(combo), n.attrs);
            if (expr_node_count(e) > limits.max_expr_nodes) continue;
            out.push_back(std::move(e));
        }
    }
    on_path.erase(c);
}

std::vector<Expr::Ptr> EGraph::extract_all(ClassId c, const NodeFilter& filter,
                                           const ExtractLimits& limits) const {
    std::vector<Expr::Ptr> raw;
    std::set<ClassId> on_path;
    extract_rec(c, filter, limits, on_path, raw, nullptr);

    std::vector<std::pair<std::pair<int, std::string>, Expr::Ptr>> keyed;
    std::set<std::string> seen;
    for (auto& e : raw) {
        auto canon = canonicalize(e);
        std::string p = print_expr(canon);
        if (!seen.insert(p).second) continue;
        keyed.push_back({{simplicity(canon), std::move(p)}, canon});
    }
    std::sort(keyed.begin(), keyed.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Expr::Ptr> out;
    out.reserve(keyed.size());
    for (auto& [k, e] : keyed) out.push_back(std::move(e));
    return out;
}

std::optional<Expr::Ptr> EGraph::extract_min(ClassId c, const NodeFilter& filter) const {
    // Bellman-style fixpoint over (simplicity, print).
    struct Best {
        int cost;
        std::string print;
        Expr::Ptr expr;
    };
    std::map<ClassId, Best> best;
    auto ids = class_ids();
    bool changed = true;
    for (size_t round = 0; round < ids.size() + 1 && changed; round++) {
        changed = false;
        for (ClassId id : ids) {
            for (const auto& sn : classes_[id].nodes) {
                const ENode& n = sn.node;
                if (filter && !filter(n)) continue;
                Expr::Ptr e;
                int cost = 0;
                if (n.is_tensor()) {
                    e = Expr::tensor(n.tensor_id);
                } else if (n.is_scalar()) {
                    e = Expr::scalar_ref(n.scalar_value);
                } else {
                    std::vector<Expr::Ptr> kids;
                    cost = 1;
                    bool ok = true;
                    for (ClassId child : n.children) {
                        auto it = best.find(find(child));
                        if (it == best.end()) {
                            ok = false;
                            break;
                        }
                        cost += it->second.cost;
                        kids.push_back(it->second.expr);
                    }
                    if (!ok) continue;
                    e = Expr::apply(n.op, std::move(kids), n.attrs);
                }
                e = canonicalize(e);
                cost = simplicity(e);
                std::string p = print_expr(e);
                auto it = best.find(id);
                if (it == best.end() || std::make_pair(cost, p) <
                                            std::make_pair(it->second.cost, it->second.print)) {
                    best[id] = {cost, std::move(p), std::move(e)};
                    changed = true;
                }
            }
        }
    }
    auto it = best.find(find(c));
    if (it == best.end()) return std::nullopt;
    return it->second.expr;
}

} // namespace refinery
