// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0
//
// Builtin rewrite library. Declarative rules carry lhs/rhs patterns;
// anything with computed attributes or existence gating is a custom pass.

#include <algorithm>

#include "refinery/errors.hpp"
#include "refinery/lemma.hpp"

namespace refinery {

namespace {

Tristate t_and(Tristate a, Tristate b) {
    if (a == Tristate::False || b == Tristate::False) return Tristate::False;
    if (a == Tristate::Unknown || b == Tristate::Unknown) return Tristate::Unknown;
    return Tristate::True;
}

std::optional<Shape> var_shape(const EGraph& eg, const MatchBindings& b, const std::string& var) {
    auto it = b.vars.find(var);
    if (it == b.vars.end()) return std::nullopt;
    return eg.shape_of(it->second);
}

Tristate dims_eq(const EGraph& eg, const DimExpr& a, const DimExpr& b) {
    return decide_cmp(a, b, CmpRel::Eq, eg.constraints());
}

Tristate shapes_eq(const EGraph& eg, const std::optional<Shape>& a, const std::optional<Shape>& b) {
    if (!a || !b) return Tristate::Unknown;
    if (a->size() != b->size()) return Tristate::False;
    Tristate acc = Tristate::True;
    for (size_t i = 0; i < a->size(); i++) acc = t_and(acc, dims_eq(eg, (*a)[i], (*b)[i]));
    return acc;
}

std::optional<DimExpr> avar_dim(const MatchBindings& b, const std::string& name) {
    auto it = b.avars.find(name);
    if (it == b.avars.end()) return std::nullopt;
    const auto* d = std::get_if<DimExpr>(&it->second);
    if (!d) return std::nullopt;
    return *d;
}

// Condition: the shapes of two tensor vars agree elementwise.
ConditionFn same_shape_cond(const char* x, const char* y) {
    return [x, y](const MatchBindings& b, const EGraph& eg) {
        return shapes_eq(eg, var_shape(eg, b, x), var_shape(eg, b, y));
    };
}

Lemma declarative(std::string name, std::string family, const char* lhs, const char* rhs,
                  Lemma::Direction dir, ConditionFn cond, std::vector<LemmaSample> samples,
                  ConditionFn rev_cond = nullptr, bool constrained = false) {
    Lemma l;
    l.name = std::move(name);
    l.family = std::move(family);
    l.direction = dir;
    l.constrained = constrained;
    l.lhs = parse_pattern(lhs);
    l.rhs = parse_pattern(rhs);
    l.condition = std::move(cond);
    l.reverse_condition = std::move(rev_cond);
    l.samples = std::move(samples);
    return l;
}

using Sh = std::vector<std::int64_t>;

LemmaSample sample(std::vector<LemmaSample::Input> inputs, std::string lhs, std::string rhs,
                   std::vector<std::string> seeds = {}) {
    return LemmaSample{std::move(inputs), std::move(lhs), std::move(rhs), std::move(seeds)};
}

// ---- scan helpers for custom passes ----

struct NodeRef {
    ClassId cls;
    ENode node;
};

std::vector<NodeRef> collect_ops(const EGraph& eg, const std::string& op) {
    std::vector<NodeRef> out;
    for (ClassId c : eg.class_ids())
        for (const auto& sn : eg.class_nodes(c))
            if (sn.node.op == op) out.push_back({c, sn.node});
    return out;
}

std::vector<NodeRef> members_of(const EGraph& eg, ClassId c, const std::string& op) {
    std::vector<NodeRef> out;
    for (const auto& sn : eg.class_nodes(eg.find(c)))
        if (sn.node.op == op) out.push_back({eg.find(c), sn.node});
    return out;
}

DimExpr nattr(const ENode& n, const std::string& name) { return attr_dim(n.attrs, name); }

std::optional<std::int64_t> nattr_int(const ENode& n, const std::string& name) {
    const AttrValue* v = find_attr(n.attrs, name);
    if (!v) return std::nullopt;
    const auto* d = std::get_if<DimExpr>(v);
    if (!d || !d->is_concrete()) return std::nullopt;
    return d->value();
}

bool decide_true(const EGraph& eg, const DimExpr& a, const DimExpr& b, CmpRel rel = CmpRel::Eq) {
    return decide_cmp(a, b, rel, eg.constraints()) == Tristate::True;
}

// Adds an enode and merges it into `into`; reports whether anything changed.
std::uint64_t add_and_merge(EGraph& eg, ENode n, ClassId into, const std::string& prov) {
    bool fresh = !eg.contains(n);
    ClassId c = eg.add_enode(std::move(n), prov);
    bool merged = eg.merge(c, into);
    return (fresh || merged) ? 1 : 0;
}

std::optional<DimExpr> class_dim(const EGraph& eg, ClassId c, std::int64_t axis) {
    auto s = eg.shape_of(c);
    if (!s || axis < 0 || axis >= static_cast<std::int64_t>(s->size())) return std::nullopt;
    return (*s)[axis];
}

// ---- custom passes ----

// Adjacent slices of the same base fuse: concat(X[a:b], X[b:c]) == X[a:c].
// Constrained: only fires on slice e-nodes that already exist.
std::uint64_t apply_slice_split(EGraph& eg) {
    auto slices = collect_ops(eg, "core.slice");
    std::uint64_t changed = 0;
    for (const auto& s1 : slices) {
        for (const auto& s2 : slices) {
            if (eg.find(s1.node.children[0]) != eg.find(s2.node.children[0])) continue;
            DimExpr d1 = nattr(s1.node, "dim"), d2 = nattr(s2.node, "dim");
            if (!decide_true(eg, d1, d2)) continue;
            if (!decide_true(eg, nattr(s1.node, "end"), nattr(s2.node, "start"))) continue;
            ClassId base = eg.find(s1.node.children[0]);
            ENode cc = ENode::apply("core.concat", {s1.cls, s2.cls}, {{"dim", d1}});
            ENode merged = ENode::apply("core.slice", {base},
                                        {{"dim", d1},
                                         {"start", nattr(s1.node, "start")},
                                         {"end", nattr(s2.node, "end")}});
            bool fresh = !eg.contains(cc) || !eg.contains(merged);
            ClassId a = eg.add_enode(std::move(cc), "lemma:slice-split");
            ClassId b = eg.add_enode(std::move(merged), "lemma:slice-split");
            bool m = eg.merge(a, b);
            if (fresh || m) changed++;
        }
    }
    return changed;
}

std::uint64_t apply_slice_of_slice(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& outer : collect_ops(eg, "core.slice")) {
        for (const auto& inner : members_of(eg, outer.node.children[0], "core.slice")) {
            if (!decide_true(eg, nattr(outer.node, "dim"), nattr(inner.node, "dim"))) continue;
            DimExpr base_start = nattr(inner.node, "start");
            ENode n = ENode::apply("core.slice", {eg.find(inner.node.children[0])},
                                   {{"dim", nattr(inner.node, "dim")},
                                    {"start", base_start + nattr(outer.node, "start")},
                                    {"end", base_start + nattr(outer.node, "end")}});
            changed += add_and_merge(eg, std::move(n), outer.cls, "lemma:slice-of-slice");
        }
    }
    return changed;
}

std::uint64_t apply_slice_of_pad(EGraph& eg) {
    std::uint64_t changed = 0;
    // Intro direction: every existing pad node admits the slice that cancels
    // it, so padded intermediates can be related back to their sources.
    for (const auto& p : collect_ops(eg, "core.pad")) {
        auto dim = nattr_int(p.node, "dim");
        if (!dim) continue;
        auto base_size = class_dim(eg, p.node.children[0], *dim);
        if (!base_size) continue;
        DimExpr before = nattr(p.node, "before");
        ENode cancel = ENode::apply("core.slice", {p.cls},
                                    {{"dim", DimExpr(*dim)},
                                     {"start", before},
                                     {"end", before + *base_size}});
        bool fresh = !eg.contains(cancel);
        ClassId sc = eg.add_enode(std::move(cancel), "lemma:slice-of-pad");
        bool m = eg.merge(sc, eg.find(p.node.children[0]));
        if (fresh || m) changed++;
    }
    for (const auto& s : collect_ops(eg, "core.slice")) {
        for (const auto& p : members_of(eg, s.node.children[0], "core.pad")) {
            if (!decide_true(eg, nattr(s.node, "dim"), nattr(p.node, "dim"))) continue;
            DimExpr before = nattr(p.node, "before");
            DimExpr a = nattr(s.node, "start"), b = nattr(s.node, "end");
            auto dim = nattr_int(s.node, "dim");
            if (!dim) continue;
            auto base_size = class_dim(eg, p.node.children[0], *dim);
            if (!base_size) continue;
            // The sliced region must sit inside the unpadded data.
            if (!decide_true(eg, before, a, CmpRel::Le)) continue;
            if (!decide_true(eg, b, before + *base_size, CmpRel::Le)) continue;
            ENode n = ENode::apply("core.slice", {eg.find(p.node.children[0])},
                                   {{"dim", nattr(s.node, "dim")},
                                    {"start", a - before},
                                    {"end", b - before}});
            changed += add_and_merge(eg, std::move(n), s.cls, "lemma:slice-of-pad");
        }
    }
    return changed;
}

std::uint64_t apply_slice_of_concat(EGraph& eg) {
    std::uint64_t changed = 0;
    // Composition direction: a slice of a concat part is also a slice of the
    // whole concat at the part's offset. Gated on both nodes existing.
    for (const auto& s : collect_ops(eg, "core.slice")) {
        auto sdim = nattr_int(s.node, "dim");
        if (!sdim) continue;
        ClassId part = eg.find(s.node.children[0]);
        for (const auto& cc : collect_ops(eg, "core.concat")) {
            if (nattr_int(cc.node, "dim") != sdim) continue;
            DimExpr off(0);
            bool ok = true;
            for (ClassId kid : cc.node.children) {
                if (eg.find(kid) == part) {
                    ENode lifted = ENode::apply("core.slice", {cc.cls},
                                                {{"dim", DimExpr(*sdim)},
                                                 {"start", off + nattr(s.node, "start")},
                                                 {"end", off + nattr(s.node, "end")}});
                    bool fresh = !eg.contains(lifted);
                    ClassId lc = eg.add_enode(std::move(lifted), "lemma:slice-of-concat");
                    bool m = eg.merge(lc, s.cls);
                    if (fresh || m) changed++;
                }
                auto size = class_dim(eg, kid, *sdim);
                if (!size) {
                    ok = false;
                    break;
                }
                off = off + *size;
            }
            if (!ok) continue;
        }
    }
    for (const auto& s : collect_ops(eg, "core.slice")) {
        auto sdim = nattr_int(s.node, "dim");
        if (!sdim) continue;
        for (const auto& cc : members_of(eg, s.node.children[0], "core.concat")) {
            auto cdim = nattr_int(cc.node, "dim");
            if (!cdim) continue;
            DimExpr a = nattr(s.node, "start"), b = nattr(s.node, "end");
            if (*cdim != *sdim) {
                // Slice along another axis passes through every part.
                std::vector<ClassId> parts;
                for (ClassId kid : cc.node.children) {
                    ENode piece = ENode::apply("core.slice", {eg.find(kid)},
                                               {{"dim", DimExpr(*sdim)}, {"start", a}, {"end", b}});
                    bool fresh = !eg.contains(piece);
                    parts.push_back(eg.add_enode(std::move(piece), "lemma:slice-of-concat"));
                    if (fresh) changed++;
                }
                ENode n = ENode::apply("core.concat", std::move(parts), {{"dim", DimExpr(*cdim)}});
                changed += add_and_merge(eg, std::move(n), s.cls, "lemma:slice-of-concat");
                continue;
            }
            // Same axis: case-split over part boundaries. Bail out on any
            // undecidable comparison.
            DimExpr off(0);
            std::vector<ClassId> pieces;
            bool ok = true;
            bool created_piece = false;
            for (ClassId kid : cc.node.children) {
                auto size = class_dim(eg, kid, *sdim);
                if (!size) {
                    ok = false;
                    break;
                }
                DimExpr lo = off, hi = off + *size;
                off = hi;
                // Relative order of [a,b) and [lo,hi) must be decidable.
                if (decide_true(eg, b, lo, CmpRel::Le) || decide_true(eg, hi, a, CmpRel::Le))
                    continue; // disjoint
                DimExpr s_lo, s_hi;
                if (decide_true(eg, a, lo, CmpRel::Le)) s_lo = lo;
                else if (decide_true(eg, lo, a, CmpRel::Le)) s_lo = a;
                else { ok = false; break; }
                if (decide_true(eg, b, hi, CmpRel::Le)) s_hi = b;
                else if (decide_true(eg, hi, b, CmpRel::Le)) s_hi = hi;
                else { ok = false; break; }
                if (decide_true(eg, s_hi, s_lo, CmpRel::Le)) continue; // empty
                if (decide_true(eg, s_lo, lo) && decide_true(eg, s_hi, hi)) {
                    pieces.push_back(eg.find(kid)); // whole part
                    continue;
                }
                ENode piece = ENode::apply("core.slice", {eg.find(kid)},
                                           {{"dim", DimExpr(*sdim)},
                                            {"start", s_lo - lo},
                                            {"end", s_hi - lo}});
                if (!eg.contains(piece)) created_piece = true;
                pieces.push_back(eg.add_enode(std::move(piece), "lemma:slice-of-concat"));
            }
            if (!ok || pieces.empty()) continue;
            if (created_piece) changed++;
            if (pieces.size() == 1) {
                if (eg.merge(pieces[0], s.cls)) changed++;
            } else {
                ENode n = ENode::apply("core.concat", std::move(pieces), {{"dim", DimExpr(*sdim)}});
                changed += add_and_merge(eg, std::move(n), s.cls, "lemma:slice-of-concat");
            }
        }
    }
    return changed;
}

std::uint64_t apply_transpose_transpose(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& outer : collect_ops(eg, "core.transpose")) {
        auto od0 = nattr_int(outer.node, "dim0"), od1 = nattr_int(outer.node, "dim1");
        if (!od0 || !od1) continue;
        for (const auto& inner : members_of(eg, outer.node.children[0], "core.transpose")) {
            auto id0 = nattr_int(inner.node, "dim0"), id1 = nattr_int(inner.node, "dim1");
            if (!id0 || !id1) continue;
            bool same = (*od0 == *id0 && *od1 == *id1) || (*od0 == *id1 && *od1 == *id0);
            if (!same) continue;
            if (eg.merge(eg.find(inner.node.children[0]), outer.cls)) changed++;
        }
    }
    return changed;
}

std::uint64_t apply_transpose_of_concat(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& t : collect_ops(eg, "core.transpose")) {
        auto d0 = nattr_int(t.node, "dim0"), d1 = nattr_int(t.node, "dim1");
        if (!d0 || !d1) continue;
        for (const auto& cc : members_of(eg, t.node.children[0], "core.concat")) {
            auto cdim = nattr_int(cc.node, "dim");
            if (!cdim) continue;
            std::int64_t ndim = *cdim == *d0 ? *d1 : *cdim == *d1 ? *d0 : *cdim;
            std::vector<ClassId> parts;
            bool created = false;
            for (ClassId kid : cc.node.children) {
                ENode piece = ENode::apply("core.transpose", {eg.find(kid)},
                                           {{"dim0", DimExpr(*d0)}, {"dim1", DimExpr(*d1)}});
                if (!eg.contains(piece)) created = true;
                parts.push_back(eg.add_enode(std::move(piece), "lemma:transpose-of-concat"));
            }
            if (created) changed++;
            ENode n = ENode::apply("core.concat", std::move(parts), {{"dim", DimExpr(ndim)}});
            changed += add_and_merge(eg, std::move(n), t.cls, "lemma:transpose-of-concat");
        }
    }
    return changed;
}

std::uint64_t apply_reduce_sum_of_concat_offdim(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& r : collect_ops(eg, "core.reduce_sum")) {
        auto rd = nattr_int(r.node, "dim");
        if (!rd) continue;
        for (const auto& cc : members_of(eg, r.node.children[0], "core.concat")) {
            auto cdim = nattr_int(cc.node, "dim");
            if (!cdim || *cdim == *rd) continue;
            std::int64_t ndim = *cdim - (*rd < *cdim ? 1 : 0);
            std::vector<ClassId> parts;
            bool created = false;
            for (ClassId kid : cc.node.children) {
                ENode piece =
                    ENode::apply("core.reduce_sum", {eg.find(kid)}, {{"dim", DimExpr(*rd)}});
                if (!eg.contains(piece)) created = true;
                parts.push_back(eg.add_enode(std::move(piece), "lemma:reduce-sum-of-concat-offdim"));
            }
            if (created) changed++;
            ENode n = ENode::apply("core.concat", std::move(parts), {{"dim", DimExpr(ndim)}});
            changed += add_and_merge(eg, std::move(n), r.cls, "lemma:reduce-sum-of-concat-offdim");
        }
    }
    return changed;
}

std::uint64_t apply_flatten(EGraph& eg, const std::string& op, const char* lemma) {
    std::uint64_t changed = 0;
    for (const auto& outer : collect_ops(eg, op)) {
        std::optional<std::int64_t> odim;
        if (op == "core.concat") {
            odim = nattr_int(outer.node, "dim");
            if (!odim) continue;
        }
        for (size_t idx = 0; idx < outer.node.children.size(); idx++) {
            for (const auto& inner : members_of(eg, outer.node.children[idx], op)) {
                if (odim) {
                    auto idim = nattr_int(inner.node, "dim");
                    if (!idim || *idim != *odim) continue;
                }
                std::vector<ClassId> kids;
                for (size_t j = 0; j < outer.node.children.size(); j++) {
                    if (j == idx) {
                        for (ClassId k : inner.node.children) kids.push_back(eg.find(k));
                    } else {
                        kids.push_back(eg.find(outer.node.children[j]));
                    }
                }
                Attrs attrs;
                if (odim) attrs.emplace_back("dim", DimExpr(*odim));
                ENode n = ENode::apply(op, std::move(kids), std::move(attrs));
                changed += add_and_merge(eg, std::move(n), outer.cls, lemma);
            }
        }
    }
    return changed;
}

// Associativity, nesting direction: an n-ary node equals a binary node over
// its head and the (n-1)-ary tail. Bounded: each application shrinks the
// tail, so a k-ary node spawns at most k-2 new nodes.
std::uint64_t apply_unflatten(EGraph& eg, const std::string& op, const char* lemma) {
    std::uint64_t changed = 0;
    for (const auto& outer : collect_ops(eg, op)) {
        if (outer.node.children.size() < 3) continue;
        Attrs attrs;
        if (op == "core.concat") {
            auto dim = nattr_int(outer.node, "dim");
            if (!dim) continue;
            attrs.emplace_back("dim", DimExpr(*dim));
        }
        std::vector<ClassId> tail(outer.node.children.begin() + 1, outer.node.children.end());
        ENode tail_node = ENode::apply(op, std::move(tail), attrs);
        bool fresh = !eg.contains(tail_node);
        ClassId tail_cls = eg.add_enode(std::move(tail_node), lemma);
        ENode pair = ENode::apply(op, {eg.find(outer.node.children[0]), tail_cls}, attrs);
        std::uint64_t n = add_and_merge(eg, std::move(pair), outer.cls, lemma);
        changed += n + (fresh ? 1 : 0);
    }
    return changed;
}

// Grouping (constrained): replace a contiguous window / sub-multiset of a
// wide node's children by an existing node covering exactly that group.
std::uint64_t apply_concat_regroup(EGraph& eg) {
    std::uint64_t changed = 0;
    auto concats = collect_ops(eg, "core.concat");
    for (const auto& outer : concats) {
        if (outer.node.children.size() < 3) continue;
        auto odim = nattr_int(outer.node, "dim");
        if (!odim) continue;
        for (const auto& group : concats) {
            size_t w = group.node.children.size();
            if (w < 2 || w >= outer.node.children.size()) continue;
            auto gdim = nattr_int(group.node, "dim");
            if (!gdim || *gdim != *odim) continue;
            for (size_t at = 0; at + w <= outer.node.children.size(); at++) {
                bool match = true;
                for (size_t j = 0; j < w; j++)
                    if (eg.find(outer.node.children[at + j]) != eg.find(group.node.children[j])) {
                        match = false;
                        break;
                    }
                if (!match) continue;
                std::vector<ClassId> kids;
                for (size_t j = 0; j < at; j++) kids.push_back(eg.find(outer.node.children[j]));
                kids.push_back(group.cls);
                for (size_t j = at + w; j < outer.node.children.size(); j++)
                    kids.push_back(eg.find(outer.node.children[j]));
                ENode n = ENode::apply("core.concat", std::move(kids), {{"dim", DimExpr(*odim)}});
                changed += add_and_merge(eg, std::move(n), outer.cls, "lemma:concat-regroup");
            }
        }
    }
    return changed;
}

std::uint64_t apply_sum_regroup(EGraph& eg) {
    std::uint64_t changed = 0;
    auto sums = collect_ops(eg, "core.sum");
    for (const auto& outer : sums) {
        if (outer.node.children.size() < 3) continue;
        std::vector<ClassId> big;
        for (ClassId c : outer.node.children) big.push_back(eg.find(c));
        std::sort(big.begin(), big.end());
        for (const auto& group : sums) {
            size_t w = group.node.children.size();
            if (w < 2 || w >= big.size()) continue;
            std::vector<ClassId> small;
            for (ClassId c : group.node.children) small.push_back(eg.find(c));
            std::sort(small.begin(), small.end());
            // Multiset inclusion; `rest` is the multiset difference.
            std::vector<ClassId> rest;
            size_t si = 0;
            bool subset = true;
            for (ClassId c : big) {
                if (si < small.size() && small[si] == c) {
                    si++;
                } else {
                    rest.push_back(c);
                }
            }
            if (si != small.size()) subset = false;
            if (!subset || rest.empty()) continue;
            ClassId rest_cls;
            if (rest.size() == 1) {
                rest_cls = rest[0];
            } else {
                auto found = eg.lookup(ENode::apply("core.sum", rest));
                if (!found) continue; // constrained: the complement must exist
                rest_cls = *found;
            }
            ENode n = ENode::apply("core.sum", {group.cls, rest_cls});
            changed += add_and_merge(eg, std::move(n), outer.cls, "lemma:sum-regroup");
        }
    }
    return changed;
}

// Block decomposition of matmul over aligned concat splits (any arity).
enum class BlockKind { Sum, Rows, Cols };

std::uint64_t apply_matmul_blocks(EGraph& eg, BlockKind kind) {
    std::uint64_t changed = 0;
    const char* prov = kind == BlockKind::Sum    ? "lemma:matmul-of-concat-blocks"
                       : kind == BlockKind::Rows ? "lemma:matmul-of-concat-rows"
                                                 : "lemma:matmul-of-concat-cols";
    for (const auto& mm : collect_ops(eg, "core.matmul")) {
        ClassId lhs = eg.find(mm.node.children[0]);
        ClassId rhs = eg.find(mm.node.children[1]);
        if (kind == BlockKind::Rows) {
            for (const auto& cc : members_of(eg, lhs, "core.concat")) {
                if (nattr_int(cc.node, "dim") != std::optional<std::int64_t>(0)) continue;
                std::vector<ClassId> parts;
                bool created = false;
                for (ClassId kid : cc.node.children) {
                    ENode piece = ENode::apply("core.matmul", {eg.find(kid), rhs});
                    if (!eg.contains(piece)) created = true;
                    parts.push_back(eg.add_enode(std::move(piece), prov));
                }
                if (created) changed++;
                ENode n = ENode::apply("core.concat", std::move(parts), {{"dim", DimExpr(0)}});
                changed += add_and_merge(eg, std::move(n), mm.cls, prov);
            }
            continue;
        }
        if (kind == BlockKind::Cols) {
            for (const auto& cc : members_of(eg, rhs, "core.concat")) {
                if (nattr_int(cc.node, "dim") != std::optional<std::int64_t>(1)) continue;
                std::vector<ClassId> parts;
                bool created = false;
                for (ClassId kid : cc.node.children) {
                    ENode piece = ENode::apply("core.matmul", {lhs, eg.find(kid)});
                    if (!eg.contains(piece)) created = true;
                    parts.push_back(eg.add_enode(std::move(piece), prov));
                }
                if (created) changed++;
                ENode n = ENode::apply("core.concat", std::move(parts), {{"dim", DimExpr(1)}});
                changed += add_and_merge(eg, std::move(n), mm.cls, prov);
            }
            continue;
        }
        // Sum form: lhs split along cols, rhs along rows, boundaries aligned.
        for (const auto& la : members_of(eg, lhs, "core.concat")) {
            if (nattr_int(la.node, "dim") != std::optional<std::int64_t>(1)) continue;
            for (const auto& rb : members_of(eg, rhs, "core.concat")) {
                if (nattr_int(rb.node, "dim") != std::optional<std::int64_t>(0)) continue;
                if (la.node.children.size() != rb.node.children.size()) continue;
                bool aligned = true;
                for (size_t i = 0; i < la.node.children.size(); i++) {
                    auto ca = class_dim(eg, la.node.children[i], 1);
                    auto rb_rows = class_dim(eg, rb.node.children[i], 0);
                    if (!ca || !rb_rows || !decide_true(eg, *ca, *rb_rows)) {
                        aligned = false;
                        break;
                    }
                }
                if (!aligned) continue;
                std::vector<ClassId> terms;
                bool created = false;
                for (size_t i = 0; i < la.node.children.size(); i++) {
                    ENode piece = ENode::apply(
                        "core.matmul", {eg.find(la.node.children[i]), eg.find(rb.node.children[i])});
                    if (!eg.contains(piece)) created = true;
                    terms.push_back(eg.add_enode(std::move(piece), prov));
                }
                if (created) changed++;
                if (terms.size() == 1) {
                    if (eg.merge(terms[0], mm.cls)) changed++;
                } else {
                    ENode n = ENode::apply("core.sum", std::move(terms));
                    changed += add_and_merge(eg, std::move(n), mm.cls, prov);
                }
            }
        }
    }
    return changed;
}

// mse over k equal-size aligned splits: mse(concat(x_i), concat(y_i)) ==
// div_scalar(sum(mse(x_i, y_i)), k).
std::uint64_t apply_mse_of_concat(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& mse : collect_ops(eg, "core.mse_loss")) {
        for (const auto& cx : members_of(eg, mse.node.children[0], "core.concat")) {
            auto dx = nattr_int(cx.node, "dim");
            if (!dx) continue;
            for (const auto& cy : members_of(eg, mse.node.children[1], "core.concat")) {
                if (nattr_int(cy.node, "dim") != dx) continue;
                size_t k = cx.node.children.size();
                if (cy.node.children.size() != k || k < 2) continue;
                // All parts must share one shape (equal weights in the mean).
                auto first = eg.shape_of(cx.node.children[0]);
                bool ok = first.has_value();
                for (size_t i = 0; ok && i < k; i++) {
                    ok = shapes_eq(eg, first, eg.shape_of(cx.node.children[i])) == Tristate::True &&
                         shapes_eq(eg, first, eg.shape_of(cy.node.children[i])) == Tristate::True;
                }
                if (!ok) continue;
                std::vector<ClassId> terms;
                bool created = false;
                for (size_t i = 0; i < k; i++) {
                    ENode piece = ENode::apply(
                        "core.mse_loss",
                        {eg.find(cx.node.children[i]), eg.find(cy.node.children[i])});
                    if (!eg.contains(piece)) created = true;
                    terms.push_back(eg.add_enode(std::move(piece), "lemma:mse-of-concat"));
                }
                if (created) changed++;
                ENode total = ENode::apply("core.sum", std::move(terms));
                if (!eg.contains(total)) changed++;
                ClassId tc = eg.add_enode(std::move(total), "lemma:mse-of-concat");
                ENode scaled = ENode::apply("core.div_scalar", {tc},
                                            {{"value", DimExpr(static_cast<std::int64_t>(k))}});
                changed += add_and_merge(eg, std::move(scaled), mse.cls, "lemma:mse-of-concat");
            }
        }
    }
    return changed;
}

// div_scalar distributes over sums of any arity, both directions.
std::uint64_t apply_div_scalar_of_sum(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& div : collect_ops(eg, "core.div_scalar")) {
        DimExpr v = nattr(div.node, "value");
        for (const auto& s : members_of(eg, div.node.children[0], "core.sum")) {
            std::vector<ClassId> terms;
            bool created = false;
            for (ClassId kid : s.node.children) {
                ENode piece =
                    ENode::apply("core.div_scalar", {eg.find(kid)}, {{"value", v}});
                if (!eg.contains(piece)) created = true;
                terms.push_back(eg.add_enode(std::move(piece), "lemma:div-scalar-of-sum"));
            }
            if (created) changed++;
            ENode n = ENode::apply("core.sum", std::move(terms));
            changed += add_and_merge(eg, std::move(n), div.cls, "lemma:div-scalar-of-sum");
        }
    }
    // Reverse: a sum whose members all divide by the same value.
    for (const auto& s : collect_ops(eg, "core.sum")) {
        std::vector<ClassId> inner;
        std::optional<DimExpr> v;
        bool ok = true;
        for (ClassId kid : s.node.children) {
            auto divs = members_of(eg, kid, "core.div_scalar");
            bool found = false;
            for (const auto& d : divs) {
                DimExpr dv = nattr(d.node, "value");
                if (!v || decide_true(eg, *v, dv)) {
                    if (!v) v = dv;
                    inner.push_back(eg.find(d.node.children[0]));
                    found = true;
                    break;
                }
            }
            if (!found) {
                ok = false;
                break;
            }
        }
        if (!ok || !v || inner.size() != s.node.children.size()) continue;
        ENode total = ENode::apply("core.sum", std::move(inner));
        bool created = !eg.contains(total);
        ClassId tc = eg.add_enode(std::move(total), "lemma:div-scalar-of-sum");
        ENode n = ENode::apply("core.div_scalar", {tc}, {{"value", *v}});
        changed += (created ? 1 : 0) + add_and_merge(eg, std::move(n), s.cls, "lemma:div-scalar-of-sum");
    }
    return changed;
}

// Row-sharded vocabulary lookup: embedding over a row-concat table is the sum
// of masked shard lookups.
std::uint64_t apply_embedding_vocab_shard(EGraph& eg) {
    std::uint64_t changed = 0;
    for (const auto& emb : collect_ops(eg, "core.embedding")) {
        ClassId idx = eg.find(emb.node.children[1]);
        for (const auto& cc : members_of(eg, emb.node.children[0], "core.concat")) {
            if (nattr_int(cc.node, "dim") != std::optional<std::int64_t>(0)) continue;
            DimExpr off(0);
            std::vector<ClassId> terms;
            bool ok = true;
            bool created = false;
            for (ClassId kid : cc.node.children) {
                auto rows = class_dim(eg, kid, 0);
                if (!rows) {
                    ok = false;
                    break;
                }
                ENode piece = ENode::apply("core.embedding_shard", {eg.find(kid), idx},
                                           {{"start", off}, {"end", off + *rows}});
                if (!eg.contains(piece)) created = true;
                terms.push_back(eg.add_enode(std::move(piece), "lemma:embedding-vocab-shard"));
                off = off + *rows;
            }
            if (!ok) continue;
            if (created) changed++;
            ENode n = terms.size() == 1 ? ENode::apply("core.identity", {terms[0]})
                                        : ENode::apply("core.sum", std::move(terms));
            changed += add_and_merge(eg, std::move(n), emb.cls, "lemma:embedding-vocab-shard");
        }
    }
    return changed;
}

Lemma custom_lemma(std::string name, std::string family, CustomApplyFn fn,
                   std::vector<LemmaSample> samples, bool constrained = false) {
    Lemma l;
    l.name = std::move(name);
    l.family = std::move(family);
    l.constrained = constrained;
    l.custom = std::move(fn);
    l.samples = std::move(samples);
    return l;
}

} // namespace

std::vector<Lemma> load_builtin_lemmas() {
    std::vector<Lemma> lib;

    // --- matmul block decompositions ---
    lib.push_back(custom_lemma(
        "matmul-of-concat-blocks", "concat",
        [](EGraph& eg) { return apply_matmul_blocks(eg, BlockKind::Sum); },
        {sample({{"A1", Sh{3, 2}}, {"A2", Sh{3, 3}}, {"B1", Sh{2, 4}}, {"B2", Sh{3, 4}}},
                "(matmul (concat (t A1) (t A2) :dim 1) (concat (t B1) (t B2) :dim 0))",
                "(sum (matmul (t A1) (t B1)) (matmul (t A2) (t B2)))")}));
    lib.push_back(custom_lemma(
        "matmul-of-concat-rows", "concat",
        [](EGraph& eg) { return apply_matmul_blocks(eg, BlockKind::Rows); },
        {sample({{"A1", Sh{2, 3}}, {"A2", Sh{1, 3}}, {"B", Sh{3, 4}}},
                "(matmul (concat (t A1) (t A2) :dim 0) (t B))",
                "(concat (matmul (t A1) (t B)) (matmul (t A2) (t B)) :dim 0)")}));
    lib.push_back(custom_lemma(
        "matmul-of-concat-cols", "concat",
        [](EGraph& eg) { return apply_matmul_blocks(eg, BlockKind::Cols); },
        {sample({{"A", Sh{2, 3}}, {"B1", Sh{3, 2}}, {"B2", Sh{3, 2}}},
                "(matmul (t A) (concat (t B1) (t B2) :dim 1))",
                "(concat (matmul (t A) (t B1)) (matmul (t A) (t B2)) :dim 1)")}));

    lib.push_back(declarative(
        "matmul-add-left", "matmul", "(matmul (add ?a ?b) ?c)",
        "(add (matmul ?a ?c) (matmul ?b ?c))", Lemma::Direction::Both, nullptr,
        {sample({{"A", Sh{2, 3}}, {"B", Sh{2, 3}}, {"C", Sh{3, 2}}},
                "(matmul (add (t A) (t B)) (t C))",
                "(add (matmul (t A) (t C)) (matmul (t B) (t C)))")}));
    lib.push_back(declarative(
        "matmul-add-right", "matmul", "(matmul ?a (add ?b ?c))",
        "(add (matmul ?a ?b) (matmul ?a ?c))", Lemma::Direction::Both, nullptr,
        {sample({{"A", Sh{2, 3}}, {"B", Sh{3, 2}}, {"C", Sh{3, 2}}},
                "(matmul (t A) (add (t B) (t C)))",
                "(add (matmul (t A) (t B)) (matmul (t A) (t C)))")}));

    // --- elementwise binaries distribute over concat and slice ---
    for (const char* opname : {"add", "sub", "mul", "div", "sum"}) {
        std::string op = opname;
        std::string name = op + "-of-concat";
        std::string lhs = "(" + op + " (concat ?x1 ?x2 :dim ?d) (concat ?y1 ?y2 :dim ?d))";
        std::string rhs = "(concat (" + op + " ?x1 ?y1) (" + op + " ?x2 ?y2) :dim ?d)";
        lib.push_back(declarative(
            name, "concat", lhs.c_str(), rhs.c_str(), Lemma::Direction::Both,
            same_shape_cond("x1", "y1"),
            {sample({{"X1", Sh{2, 3}}, {"X2", Sh{1, 3}}, {"Y1", Sh{2, 3}}, {"Y2", Sh{1, 3}}},
                    "(" + op + " (concat (t X1) (t X2) :dim 0) (concat (t Y1) (t Y2) :dim 0))",
                    "(concat (" + op + " (t X1) (t Y1)) (" + op + " (t X2) (t Y2)) :dim 0)")}));
        if (op == "sum") continue; // n-ary sums are covered by flatten/regroup
        std::string sname = op + "-of-slice";
        std::string slhs = "(slice (" + op + " ?x ?y) :dim ?d :start ?a :end ?b)";
        std::string srhs = "(" + op + " (slice ?x :dim ?d :start ?a :end ?b) (slice ?y :dim ?d "
                           ":start ?a :end ?b))";
        lib.push_back(declarative(
            sname, "slice", slhs.c_str(), srhs.c_str(), Lemma::Direction::Both, nullptr,
            {sample({{"X", Sh{4, 3}}, {"Y", Sh{4, 3}}},
                    "(slice (" + op + " (t X) (t Y)) :dim 0 :start 1 :end 3)",
                    "(" + op + " (slice (t X) :dim 0 :start 1 :end 3) (slice (t Y) :dim 0 "
                    ":start 1 :end 3))")}));
    }

    lib.push_back(declarative(
        "relu-of-concat", "concat", "(relu (concat ?x1 ?x2 :dim ?d))",
        "(concat (relu ?x1) (relu ?x2) :dim ?d)", Lemma::Direction::Both, nullptr,
        {sample({{"X1", Sh{2, 3}}, {"X2", Sh{1, 3}}}, "(relu (concat (t X1) (t X2) :dim 0))",
                "(concat (relu (t X1)) (relu (t X2)) :dim 0)")}));
    lib.push_back(declarative(
        "relu-of-slice", "slice", "(slice (relu ?x) :dim ?d :start ?a :end ?b)",
        "(relu (slice ?x :dim ?d :start ?a :end ?b))", Lemma::Direction::Both, nullptr,
        {sample({{"X", Sh{4, 3}}}, "(slice (relu (t X)) :dim 0 :start 0 :end 2)",
                "(relu (slice (t X) :dim 0 :start 0 :end 2))")}));
    lib.push_back(declarative(
        "identity-elim", "identity", "(identity ?x)", "?x", Lemma::Direction::Forward, nullptr,
        {sample({{"X", Sh{2, 2}}}, "(identity (t X))", "(t X)")}));

    // --- concat/slice algebra ---
    lib.push_back(declarative(
        "slice-merge", "slice",
        "(concat (slice ?x :dim ?d :start ?a :end ?b) (slice ?x :dim ?d :start ?b :end ?c) "
        ":dim ?d)",
        "(slice ?x :dim ?d :start ?a :end ?c)", Lemma::Direction::Forward, nullptr,
        {sample({{"X", Sh{8}}},
                "(concat (slice (t X) :dim 0 :start 0 :end 4) (slice (t X) :dim 0 :start 4 :end 8) "
                ":dim 0)",
                "(slice (t X) :dim 0 :start 0 :end 8)")}));
    lib.push_back(custom_lemma(
        "slice-split", "slice", apply_slice_split,
        {sample({{"X", Sh{6, 4}}}, "(slice (t X) :dim 0 :start 0 :end 6)",
                "(concat (slice (t X) :dim 0 :start 0 :end 2) (slice (t X) :dim 0 :start 2 :end 6) "
                ":dim 0)",
                {"(slice (t X) :dim 0 :start 0 :end 2)", "(slice (t X) :dim 0 :start 2 :end 6)"})},
        /*constrained=*/true));
    lib.push_back(declarative(
        "identity-slice", "slice", "(slice ?x :dim ?d :start ?a :end ?b)", "?x",
        Lemma::Direction::Forward,
        [](const MatchBindings& b, const EGraph& eg) -> Tristate {
            auto a = avar_dim(b, "a");
            auto end = avar_dim(b, "b");
            auto d = avar_dim(b, "d");
            if (!a || !end || !d || !d->is_concrete()) return Tristate::Unknown;
            auto it = b.vars.find("x");
            if (it == b.vars.end()) return Tristate::Unknown;
            auto shape = eg.shape_of(it->second);
            if (!shape || *d < 0 || d->value() >= static_cast<std::int64_t>(shape->size()))
                return Tristate::Unknown;
            return t_and(dims_eq(eg, *a, DimExpr(0)),
                         dims_eq(eg, *end, (*shape)[d->value()]));
        },
        {sample({{"X", Sh{6, 4}}}, "(slice (t X) :dim 0 :start 0 :end 6)", "(t X)")}));
    lib.push_back(custom_lemma(
        "slice-of-slice", "slice", apply_slice_of_slice,
        {sample({{"X", Sh{8, 2}}},
                "(slice (slice (t X) :dim 0 :start 2 :end 7) :dim 0 :start 1 :end 4)",
                "(slice (t X) :dim 0 :start 3 :end 6)")}));
    lib.push_back(custom_lemma(
        "slice-of-concat", "slice", apply_slice_of_concat,
        {sample({{"X1", Sh{2, 4}}, {"X2", Sh{3, 4}}},
                "(slice (concat (t X1) (t X2) :dim 0) :dim 0 :start 1 :end 4)",
                "(concat (slice (t X1) :dim 0 :start 1 :end 2) (slice (t X2) :dim 0 :start 0 "
                ":end 2) :dim 0)"),
         sample({{"X1", Sh{2, 4}}, {"X2", Sh{3, 4}}},
                "(slice (concat (t X1) (t X2) :dim 0) :dim 1 :start 1 :end 3)",
                "(concat (slice (t X1) :dim 1 :start 1 :end 3) (slice (t X2) :dim 1 :start 1 "
                ":end 3) :dim 0)")}));
    lib.push_back(custom_lemma(
        "concat-flatten", "concat",
        [](EGraph& eg) { return apply_flatten(eg, "core.concat", "lemma:concat-flatten"); },
        {sample({{"X", Sh{1, 2}}, {"Y", Sh{2, 2}}, {"Z", Sh{3, 2}}},
                "(concat (concat (t X) (t Y) :dim 0) (t Z) :dim 0)",
                "(concat (t X) (t Y) (t Z) :dim 0)")}));
    lib.push_back(custom_lemma(
        "concat-regroup", "concat", apply_concat_regroup,
        {sample({{"X", Sh{1, 2}}, {"Y", Sh{2, 2}}, {"Z", Sh{3, 2}}},
                "(concat (t X) (t Y) (t Z) :dim 0)",
                "(concat (concat (t X) (t Y) :dim 0) (t Z) :dim 0)",
                {"(concat (t X) (t Y) :dim 0)"})},
        /*constrained=*/true));
    lib.push_back(custom_lemma(
        "concat-unflatten", "concat",
        [](EGraph& eg) { return apply_unflatten(eg, "core.concat", "lemma:concat-unflatten"); },
        {sample({{"X", Sh{1, 2}}, {"Y", Sh{2, 2}}, {"Z", Sh{3, 2}}},
                "(concat (t X) (t Y) (t Z) :dim 0)",
                "(concat (t X) (concat (t Y) (t Z) :dim 0) :dim 0)")}));

    // --- transpose / reshape ---
    lib.push_back(custom_lemma(
        "transpose-transpose-elim", "transpose", apply_transpose_transpose,
        {sample({{"X", Sh{3, 4}}},
                "(transpose (transpose (t X) :dim0 0 :dim1 1) :dim0 1 :dim1 0)", "(t X)")}));
    lib.push_back(custom_lemma(
        "transpose-of-concat", "concat", apply_transpose_of_concat,
        {sample({{"X1", Sh{2, 3}}, {"X2", Sh{4, 3}}},
                "(transpose (concat (t X1) (t X2) :dim 0) :dim0 0 :dim1 1)",
                "(concat (transpose (t X1) :dim0 0 :dim1 1) (transpose (t X2) :dim0 0 :dim1 1) "
                ":dim 1)")}));
    lib.push_back(declarative(
        "reshape-reshape-elim", "reshape", "(reshape (reshape ?x :shape ?s1) :shape ?s2)",
        "(reshape ?x :shape ?s2)", Lemma::Direction::Forward, nullptr,
        {sample({{"X", Sh{2, 3}}}, "(reshape (reshape (t X) :shape (6)) :shape (3 2))",
                "(reshape (t X) :shape (3 2))")},
        nullptr, /*constrained=*/true));
    lib.push_back(declarative(
        "reshape-noop", "reshape", "(reshape ?x :shape ?s)", "?x", Lemma::Direction::Forward,
        [](const MatchBindings& b, const EGraph& eg) -> Tristate {
            auto it = b.avars.find("s");
            auto vx = b.vars.find("x");
            if (it == b.avars.end() || vx == b.vars.end()) return Tristate::Unknown;
            const auto* target = std::get_if<std::vector<DimExpr>>(&it->second);
            auto shape = eg.shape_of(vx->second);
            if (!target || !shape) return Tristate::Unknown;
            return shapes_eq(eg, *shape, *target);
        },
        {sample({{"X", Sh{2, 3}}}, "(reshape (t X) :shape (2 3))", "(t X)")}));

    // --- reductions ---
    lib.push_back(declarative(
        "reduce-sum-of-concat", "concat", "(reduce_sum (concat ?x1 ?x2 :dim ?d) :dim ?d)",
        "(sum (reduce_sum ?x1 :dim ?d) (reduce_sum ?x2 :dim ?d))", Lemma::Direction::Both, nullptr,
        {sample({{"X1", Sh{2, 3}}, {"X2", Sh{4, 3}}},
                "(reduce_sum (concat (t X1) (t X2) :dim 0) :dim 0)",
                "(sum (reduce_sum (t X1) :dim 0) (reduce_sum (t X2) :dim 0))")},
        [](const MatchBindings& b, const EGraph& eg) -> Tristate {
            // Reverse direction: off-axis extents must agree.
            auto sx = var_shape(eg, b, "x1");
            auto sy = var_shape(eg, b, "x2");
            auto d = avar_dim(b, "d");
            if (!sx || !sy || !d || !d->is_concrete()) return Tristate::Unknown;
            if (sx->size() != sy->size()) return Tristate::False;
            Tristate acc = Tristate::True;
            for (size_t i = 0; i < sx->size(); i++)
                if (static_cast<std::int64_t>(i) != d->value())
                    acc = t_and(acc, dims_eq(eg, (*sx)[i], (*sy)[i]));
            return acc;
        }));
    lib.push_back(custom_lemma(
        "reduce-sum-of-concat-offdim", "concat", apply_reduce_sum_of_concat_offdim,
        {sample({{"X1", Sh{2, 3}}, {"X2", Sh{2, 4}}},
                "(reduce_sum (concat (t X1) (t X2) :dim 1) :dim 0)",
                "(concat (reduce_sum (t X1) :dim 0) (reduce_sum (t X2) :dim 0) :dim 0)")}));

    lib.push_back(declarative(
        "sum-commutative", "sum", "(sum ?a ?b)", "(sum ?b ?a)", Lemma::Direction::Forward, nullptr,
        {sample({{"X", Sh{2, 2}}, {"Y", Sh{2, 2}}}, "(sum (t X) (t Y))", "(sum (t Y) (t X))")}));
    lib.push_back(custom_lemma(
        "sum-assoc-flatten", "sum",
        [](EGraph& eg) { return apply_flatten(eg, "core.sum", "lemma:sum-assoc-flatten"); },
        {sample({{"X", Sh{2, 2}}, {"Y", Sh{2, 2}}, {"Z", Sh{2, 2}}},
                "(sum (t X) (sum (t Y) (t Z)))", "(sum (t X) (t Y) (t Z))")}));
    lib.push_back(custom_lemma(
        "sum-regroup", "sum", apply_sum_regroup,
        {sample({{"W", Sh{2, 2}}, {"X", Sh{2, 2}}, {"Y", Sh{2, 2}}, {"Z", Sh{2, 2}}},
                "(sum (t W) (t X) (t Y) (t Z))", "(sum (sum (t W) (t X)) (sum (t Y) (t Z)))",
                {"(sum (t W) (t X))", "(sum (t Y) (t Z))"})},
        /*constrained=*/true));
    lib.push_back(custom_lemma(
        "sum-unflatten", "sum",
        [](EGraph& eg) { return apply_unflatten(eg, "core.sum", "lemma:sum-unflatten"); },
        {sample({{"X", Sh{2, 2}}, {"Y", Sh{2, 2}}, {"Z", Sh{2, 2}}},
                "(sum (t X) (t Y) (t Z))", "(sum (t X) (sum (t Y) (t Z)))")}));

    // --- normalization ops over concat ---
    auto nonlast_dim_cond = [](const char* xvar) {
        std::string x = xvar;
        return [x](const MatchBindings& b, const EGraph& eg) -> Tristate {
            auto d = avar_dim(b, "d");
            auto it = b.vars.find(x);
            if (!d || it == b.vars.end()) return Tristate::Unknown;
            auto shape = eg.shape_of(it->second);
            if (!shape || shape->empty()) return Tristate::Unknown;
            return decide_cmp(*d, DimExpr(static_cast<std::int64_t>(shape->size()) - 1), CmpRel::Lt,
                              eg.constraints());
        };
    };
    lib.push_back(declarative(
        "softmax-of-concat", "concat", "(softmax (concat ?x1 ?x2 :dim ?d) :dim ?e)",
        "(concat (softmax ?x1 :dim ?e) (softmax ?x2 :dim ?e) :dim ?d)", Lemma::Direction::Both,
        [](const MatchBindings& b, const EGraph& eg) -> Tristate {
            auto d = avar_dim(b, "d");
            auto e = avar_dim(b, "e");
            if (!d || !e) return Tristate::Unknown;
            Tristate eq = decide_cmp(*d, *e, CmpRel::Eq, eg.constraints());
            if (eq == Tristate::True) return Tristate::False; // same axis: invalid
            if (eq == Tristate::False) return Tristate::True;
            return Tristate::Unknown;
        },
        {sample({{"X1", Sh{2, 4}}, {"X2", Sh{3, 4}}},
                "(softmax (concat (t X1) (t X2) :dim 0) :dim 1)",
                "(concat (softmax (t X1) :dim 1) (softmax (t X2) :dim 1) :dim 0)")}));
    lib.push_back(declarative(
        "rmsnorm-of-concat", "concat", "(rmsnorm (concat ?x1 ?x2 :dim ?d) ?w)",
        "(concat (rmsnorm ?x1 ?w) (rmsnorm ?x2 ?w) :dim ?d)", Lemma::Direction::Both,
        nonlast_dim_cond("x1"),
        {sample({{"X1", Sh{2, 4}}, {"X2", Sh{3, 4}}, {"W", Sh{4}}},
                "(rmsnorm (concat (t X1) (t X2) :dim 0) (t W))",
                "(concat (rmsnorm (t X1) (t W)) (rmsnorm (t X2) (t W)) :dim 0)")}));
    lib.push_back(declarative(
        "layernorm-of-concat", "concat", "(layernorm (concat ?x1 ?x2 :dim ?d) ?w ?bb)",
        "(concat (layernorm ?x1 ?w ?bb) (layernorm ?x2 ?w ?bb) :dim ?d)", Lemma::Direction::Both,
        nonlast_dim_cond("x1"),
        {sample({{"X1", Sh{2, 4}}, {"X2", Sh{3, 4}}, {"W", Sh{4}}, {"B", Sh{4}}},
                "(layernorm (concat (t X1) (t X2) :dim 0) (t W) (t B))",
                "(concat (layernorm (t X1) (t W) (t B)) (layernorm (t X2) (t W) (t B)) :dim 0)")}));

    // --- loss scaling ---
    lib.push_back(custom_lemma(
        "mse-of-concat", "mse", apply_mse_of_concat,
        {sample({{"X1", Sh{2, 4}}, {"X2", Sh{2, 4}}, {"Y1", Sh{2, 4}}, {"Y2", Sh{2, 4}}},
                "(mse_loss (concat (t X1) (t X2) :dim 0) (concat (t Y1) (t Y2) :dim 0))",
                "(div_scalar (sum (mse_loss (t X1) (t Y1)) (mse_loss (t X2) (t Y2))) :value 2)")}));
    lib.push_back(custom_lemma(
        "div-scalar-of-sum", "scalar", apply_div_scalar_of_sum,
        {sample({{"X", Sh{2, 3}}, {"Y", Sh{2, 3}}}, "(div_scalar (sum (t X) (t Y)) :value 3)",
                "(sum (div_scalar (t X) :value 3) (div_scalar (t Y) :value 3))")}));
    lib.push_back(declarative(
        "div-scalar-of-concat", "concat", "(div_scalar (concat ?x1 ?x2 :dim ?d) :value ?v)",
        "(concat (div_scalar ?x1 :value ?v) (div_scalar ?x2 :value ?v) :dim ?d)",
        Lemma::Direction::Both, nullptr,
        {sample({{"X1", Sh{2, 3}}, {"X2", Sh{1, 3}}},
                "(div_scalar (concat (t X1) (t X2) :dim 0) :value 2)",
                "(concat (div_scalar (t X1) :value 2) (div_scalar (t X2) :value 2) :dim 0)")}));

    // --- padding ---
    lib.push_back(declarative(
        "pad-slice-cancel", "slice",
        "(slice (pad ?x :dim ?d :before ?p :after ?q) :dim ?d :start ?a :end ?b)", "?x",
        Lemma::Direction::Forward,
        [](const MatchBindings& b, const EGraph& eg) -> Tristate {
            auto p = avar_dim(b, "p");
            auto a = avar_dim(b, "a");
            auto end = avar_dim(b, "b");
            auto d = avar_dim(b, "d");
            auto it = b.vars.find("x");
            if (!p || !a || !end || !d || !d->is_concrete() || it == b.vars.end())
                return Tristate::Unknown;
            auto shape = eg.shape_of(it->second);
            if (!shape || d->value() >= static_cast<std::int64_t>(shape->size()))
                return Tristate::Unknown;
            return t_and(dims_eq(eg, *a, *p), dims_eq(eg, *end, *p + (*shape)[d->value()]));
        },
        {sample({{"X", Sh{3, 4}}},
                "(slice (pad (t X) :dim 0 :before 1 :after 2) :dim 0 :start 1 :end 4)", "(t X)")}));
    lib.push_back(custom_lemma(
        "slice-of-pad", "slice", apply_slice_of_pad,
        {sample({{"X", Sh{3, 4}}},
                "(slice (pad (t X) :dim 0 :before 1 :after 2) :dim 0 :start 2 :end 4)",
                "(slice (t X) :dim 0 :start 1 :end 3)")}));

    // --- embedding ---
    lib.push_back(custom_lemma(
        "embedding-vocab-shard", "embedding", apply_embedding_vocab_shard,
        {sample({{"W1", Sh{3, 4}}, {"W2", Sh{2, 4}}, {"I", Sh{5}, 5}},
                "(embedding (concat (t W1) (t W2) :dim 0) (t I))",
                "(sum (embedding_shard (t W1) (t I) :start 0 :end 3) (embedding_shard (t W2) (t I) "
                ":start 3 :end 5))")}));

    for (const auto& l : lib) self_validate(l);
    return lib;
}

} // namespace refinery
