// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/lemma.hpp"

#include <algorithm>
#include <sstream>

#include "refinery/errors.hpp"
#include "refinery/log.hpp"

namespace refinery {

void Pattern::collect_vars(std::set<std::string>& tvars, std::set<std::string>& avars) const {
    if (k == K::Var) tvars.insert(var);
    for (const auto& [name, a] : attrs)
        if (const auto* v = std::get_if<std::string>(&a)) avars.insert(*v);
    for (const auto& c : children) c.collect_vars(tvars, avars);
}

namespace {

Pattern pattern_from_expr_text(std::string_view text, size_t& pos);

void skip_ws(std::string_view text, size_t& pos) {
    while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) pos++;
}

std::string read_atom(std::string_view text, size_t& pos) {
    skip_ws(text, pos);
    size_t start = pos;
    while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
           text[pos] != '(' && text[pos] != ')')
        pos++;
    if (pos == start) throw SchemaError("pattern parse error: expected atom");
    return std::string(text.substr(start, pos - start));
}

Pattern::PatAttr read_pat_attr(std::string_view text, size_t& pos) {
    skip_ws(text, pos);
    if (pos < text.size() && text[pos] == '(') {
        pos++;
        std::vector<DimExpr> list;
        while (true) {
            skip_ws(text, pos);
            if (pos < text.size() && text[pos] == ')') {
                pos++;
                break;
            }
            list.push_back(DimExpr::parse(read_atom(text, pos)));
        }
        return AttrValue(list);
    }
    std::string atom = read_atom(text, pos);
    if (!atom.empty() && atom[0] == '?') return atom.substr(1);
    if (!atom.empty() && atom[0] == '"')
        return AttrValue(atom.substr(1, atom.size() - 2));
    return AttrValue(DimExpr::parse(atom));
}

Pattern pattern_from_expr_text(std::string_view text, size_t& pos) {
    skip_ws(text, pos);
    if (pos < text.size() && text[pos] == '?') {
        Pattern p;
        p.k = Pattern::K::Var;
        p.var = read_atom(text, pos).substr(1);
        return p;
    }
    if (pos >= text.size() || text[pos] != '(')
        throw SchemaError("pattern parse error: expected '(' or variable");
    pos++;
    std::string head = read_atom(text, pos);
    Pattern p;
    if (head == "t") {
        p.k = Pattern::K::Tensor;
        p.tensor_id = read_atom(text, pos);
        skip_ws(text, pos);
        if (pos >= text.size() || text[pos] != ')') throw SchemaError("pattern: expected ')'");
        pos++;
        return p;
    }
    if (head == "scalar") {
        p.k = Pattern::K::Scalar;
        p.scalar_value = DimExpr::parse(read_atom(text, pos));
        skip_ws(text, pos);
        if (pos >= text.size() || text[pos] != ')') throw SchemaError("pattern: expected ')'");
        pos++;
        return p;
    }
    p.k = Pattern::K::Node;
    p.op = head.find('.') == std::string::npos ? "core." + head : head;
    while (true) {
        skip_ws(text, pos);
        if (pos >= text.size()) throw SchemaError("pattern parse error: unterminated node");
        char c = text[pos];
        if (c == ')') {
            pos++;
            break;
        }
        if (c == '(' || c == '?') {
            p.children.push_back(pattern_from_expr_text(text, pos));
        } else if (c == ':') {
            pos++;
            std::string name = read_atom(text, pos);
            p.attrs.emplace_back(name, read_pat_attr(text, pos));
        } else {
            throw SchemaError("pattern parse error: unexpected character");
        }
    }
    return p;
}

bool attr_semantic_eq(const AttrValue& a, const AttrValue& b, const ConstraintStore& cs) {
    if (a.index() != b.index()) return false;
    if (const auto* d = std::get_if<DimExpr>(&a))
        return decide_cmp(*d, std::get<DimExpr>(b), CmpRel::Eq, cs) == Tristate::True;
    if (const auto* l = std::get_if<std::vector<DimExpr>>(&a)) {
        const auto& r = std::get<std::vector<DimExpr>>(b);
        if (l->size() != r.size()) return false;
        for (size_t i = 0; i < l->size(); i++)
            if (decide_cmp((*l)[i], r[i], CmpRel::Eq, cs) != Tristate::True) return false;
        return true;
    }
    return std::get<std::string>(a) == std::get<std::string>(b);
}

struct Matcher {
    const EGraph& eg;
    std::vector<MatchBindings> out;

    void match(const Pattern& pat, ClassId c, MatchBindings& b) {
        c = eg.find(c);
        switch (pat.k) {
            case Pattern::K::Var: {
                auto it = b.vars.find(pat.var);
                if (it != b.vars.end()) {
                    if (eg.find(it->second) != c) return;
                    out.push_back(b);
                    return;
                }
                b.vars[pat.var] = c;
                out.push_back(b);
                b.vars.erase(pat.var);
                return;
            }
            case Pattern::K::Tensor: {
                for (const auto& sn : eg.class_nodes(c))
                    if (sn.node.is_tensor() && sn.node.tensor_id == pat.tensor_id) {
                        out.push_back(b);
                        return;
                    }
                return;
            }
            case Pattern::K::Scalar: {
                for (const auto& sn : eg.class_nodes(c))
                    if (sn.node.is_scalar() &&
                        decide_cmp(sn.node.scalar_value, pat.scalar_value, CmpRel::Eq,
                                   eg.constraints()) == Tristate::True) {
                        out.push_back(b);
                        return;
                    }
                return;
            }
            case Pattern::K::Node: break;
        }
        for (const auto& sn : eg.class_nodes(c)) {
            const ENode& n = sn.node;
            if (!n.is_apply() || n.op != pat.op) continue;
            if (n.children.size() != pat.children.size()) continue;
            MatchBindings local = b;
            if (!match_attrs(pat, n, local)) continue;
            match_children(pat, n, 0, local);
        }
    }

    bool match_attrs(const Pattern& pat, const ENode& n, MatchBindings& b) {
        for (const auto& [name, pa] : pat.attrs) {
            const AttrValue* actual = find_attr(n.attrs, name);
            if (!actual) return false;
            if (const auto* lit = std::get_if<AttrValue>(&pa)) {
                if (!attr_semantic_eq(*lit, *actual, eg.constraints())) return false;
            } else {
                const std::string& var = std::get<std::string>(pa);
                auto it = b.avars.find(var);
                if (it != b.avars.end()) {
                    if (!attr_semantic_eq(it->second, *actual, eg.constraints())) return false;
                } else {
                    b.avars[var] = *actual;
                }
            }
        }
        return true;
    }

    void match_children(const Pattern& pat, const ENode& n, size_t idx, MatchBindings& b) {
        if (idx == pat.children.size()) {
            out.push_back(b);
            return;
        }
        Matcher sub{eg, {}};
        sub.match(pat.children[idx], n.children[idx], b);
        for (auto& m : sub.out) match_children(pat, n, idx + 1, m);
    }
};

} // namespace

Pattern parse_pattern(std::string_view text) {
    size_t pos = 0;
    Pattern p = pattern_from_expr_text(text, pos);
    skip_ws(text, pos);
    if (pos != text.size())
        throw SchemaError("trailing characters in pattern: '" + std::string(text) + "'");
    return p;
}

std::vector<MatchBindings> match_pattern(const EGraph& eg, const Pattern& pat, ClassId c) {
    Matcher m{eg, {}};
    MatchBindings b;
    m.match(pat, c, b);
    return std::move(m.out);
}

std::pair<ClassId, bool> build_pattern(EGraph& eg, const Pattern& pat,
                                       const MatchBindings& bindings,
                                       const std::string& provenance) {
    switch (pat.k) {
        case Pattern::K::Var: {
            auto it = bindings.vars.find(pat.var);
            if (it == bindings.vars.end())
                throw LemmaValidationError("unbound pattern variable '?" + pat.var + "'");
            return {eg.find(it->second), false};
        }
        case Pattern::K::Tensor: {
            ENode n = ENode::tensor(pat.tensor_id);
            bool fresh = !eg.contains(n);
            return {eg.add_enode(std::move(n), provenance), fresh};
        }
        case Pattern::K::Scalar: {
            ENode n = ENode::scalar(pat.scalar_value);
            bool fresh = !eg.contains(n);
            return {eg.add_enode(std::move(n), provenance), fresh};
        }
        case Pattern::K::Node: break;
    }
    bool created = false;
    std::vector<ClassId> children;
    for (const auto& c : pat.children) {
        auto [id, fresh] = build_pattern(eg, c, bindings, provenance);
        created |= fresh;
        children.push_back(id);
    }
    Attrs attrs;
    for (const auto& [name, pa] : pat.attrs) {
        if (const auto* lit = std::get_if<AttrValue>(&pa)) {
            attrs.emplace_back(name, *lit);
        } else {
            const std::string& var = std::get<std::string>(pa);
            auto it = bindings.avars.find(var);
            if (it == bindings.avars.end())
                throw LemmaValidationError("unbound attribute variable '?" + var + "'");
            attrs.emplace_back(name, it->second);
        }
    }
    ENode n = ENode::apply(pat.op, std::move(children), std::move(attrs));
    created |= !eg.contains(n);
    return {eg.add_enode(std::move(n), provenance), created};
}

namespace {

// True when every Node subpattern of `pat` already exists in the e-graph
// under the bindings (the constrained-lemma gate).
bool pattern_exists(const EGraph& eg, const Pattern& pat, const MatchBindings& bindings,
                    ClassId* out_class) {
    switch (pat.k) {
        case Pattern::K::Var: {
            auto it = bindings.vars.find(pat.var);
            if (it == bindings.vars.end()) return false;
            if (out_class) *out_class = eg.find(it->second);
            return true;
        }
        case Pattern::K::Tensor: {
            auto c = eg.lookup(ENode::tensor(pat.tensor_id));
            if (!c) return false;
            if (out_class) *out_class = *c;
            return true;
        }
        case Pattern::K::Scalar: {
            auto c = eg.lookup(ENode::scalar(pat.scalar_value));
            if (!c) return false;
            if (out_class) *out_class = *c;
            return true;
        }
        case Pattern::K::Node: break;
    }
    std::vector<ClassId> children;
    for (const auto& c : pat.children) {
        ClassId id = 0;
        if (!pattern_exists(eg, c, bindings, &id)) return false;
        children.push_back(id);
    }
    Attrs attrs;
    for (const auto& [name, pa] : pat.attrs) {
        if (const auto* lit = std::get_if<AttrValue>(&pa)) {
            attrs.emplace_back(name, *lit);
        } else {
            auto it = bindings.avars.find(std::get<std::string>(pa));
            if (it == bindings.avars.end()) return false;
            attrs.emplace_back(name, it->second);
        }
    }
    auto c = eg.lookup(ENode::apply(pat.op, std::move(children), std::move(attrs)));
    if (!c) return false;
    if (out_class) *out_class = *c;
    return true;
}

// A constrained declarative rule fires only when the designated target
// subexpressions already exist: every strict Node subpattern of the rhs. A
// single-node rhs carries no designated subexpression and is gated by its
// lhs match alone.
bool constrained_gate(const EGraph& eg, const Pattern& to, const MatchBindings& bindings) {
    bool any = false;
    for (const auto& child : to.children) {
        if (child.k != Pattern::K::Node) continue;
        any = true;
        if (!pattern_exists(eg, child, bindings, nullptr)) return false;
    }
    if (any) return true;
    // No node children: fall back to the rhs itself when it is a node.
    if (to.k == Pattern::K::Node && to.children.empty() == false) return true;
    return true;
}

std::uint64_t apply_directed(EGraph& eg, const Lemma& l, const Pattern& from, const Pattern& to,
                             const ConditionFn& cond) {
    struct Pending {
        ClassId cls;
        MatchBindings bindings;
    };
    std::vector<Pending> pending;
    for (ClassId c : eg.class_ids()) {
        for (auto& m : match_pattern(eg, from, c)) pending.push_back({c, std::move(m)});
    }
    std::uint64_t changed = 0;
    for (auto& p : pending) {
        if (cond) {
            Tristate t = cond(p.bindings, eg);
            if (t == Tristate::Unknown) {
                log::debug("lemma '" + l.name + "' suppressed: condition undecided");
                continue;
            }
            if (t == Tristate::False) continue;
        }
        if (l.constrained && !constrained_gate(eg, to, p.bindings)) continue;
        auto [cls, created] = build_pattern(eg, to, p.bindings, "lemma:" + l.name);
        bool merged = eg.merge(cls, p.cls);
        if (created || merged) changed++;
    }
    return changed;
}

std::uint64_t apply_lemma(EGraph& eg, const Lemma& l) {
    if (l.custom) return l.custom(eg);
    std::uint64_t changed = apply_directed(eg, l, *l.lhs, *l.rhs, l.condition);
    if (l.direction == Lemma::Direction::Both) {
        const ConditionFn& rc = l.reverse_condition ? l.reverse_condition : l.condition;
        changed += apply_directed(eg, l, *l.rhs, *l.lhs, rc);
    }
    return changed;
}

} // namespace

SaturationResult saturate(EGraph& eg, const std::vector<Lemma>& lemmas,
                          const SaturationBudget& budget, LemmaStats* stats) {
    SaturationResult res;
    eg.rebuild();
    for (int iter = 0; iter < budget.max_iterations; iter++) {
        std::uint64_t changes = 0;
        for (const auto& l : lemmas) {
            std::uint64_t n = apply_lemma(eg, l);
            if (n && stats) stats->bump(l.name, n);
            changes += n;
            eg.rebuild();
            if (eg.num_enodes() > budget.max_enodes) {
                res.budget_hit = true;
                res.iterations = iter + 1;
                log::warn("saturation stopped: e-node budget exceeded (" +
                          std::to_string(eg.num_enodes()) + ")");
                return res;
            }
        }
        res.iterations = iter + 1;
        if (changes == 0) return res;
    }
    res.budget_hit = true;
    log::debug("saturation stopped: iteration budget exhausted");
    return res;
}

LemmaRegistry::LemmaRegistry() : lemmas_(load_builtin_lemmas()) {}

LemmaRegistry& LemmaRegistry::instance() {
    static LemmaRegistry reg;
    return reg;
}

void LemmaRegistry::register_lemma(Lemma l) {
    if (find(l.name)) throw DuplicateName("lemma already registered: " + l.name);
    self_validate(l);
    lemmas_.push_back(std::move(l));
}

const Lemma* LemmaRegistry::find(const std::string& name) const {
    for (const auto& l : lemmas_)
        if (l.name == name) return &l;
    return nullptr;
}

RewriteResult rewrite_using_lemma(const Expr::Ptr& e, const std::vector<Lemma>& lemmas,
                                  const ConstraintStore& cs, const SaturationBudget& budget,
                                  const ShapeResolver& resolver, LemmaStats* stats) {
    EGraph eg(resolver, &cs);
    ClassId root = eg.add_expr(e, "base");
    SaturationResult sat = saturate(eg, lemmas, budget, stats);
    RewriteResult out;
    out.budget_hit = sat.budget_hit;
    out.exprs = eg.extract_all(root, nullptr, ExtractLimits{});
    return out;
}

std::vector<Expr::Ptr> rewrite_t_to_expr(const Expr::Ptr& e, const Relation& r,
                                         size_t combo_cap) {
    std::set<std::string> refs = tensor_refs(e);
    std::vector<std::pair<std::string, std::vector<Expr::Ptr>>> options;
    for (const auto& t : refs) {
        auto mappings = r.for_target(t);
        if (mappings.empty()) continue;
        std::vector<Expr::Ptr> opts{nullptr}; // keep-as-is
        for (const auto* m : mappings) opts.push_back(m->expr);
        options.emplace_back(t, std::move(opts));
    }
    std::vector<Expr::Ptr> out;
    std::set<std::string> seen;
    std::vector<size_t> idx(options.size(), 0);
    size_t produced = 0;
    while (true) {
        std::map<std::string, Expr::Ptr> bindings;
        for (size_t i = 0; i < options.size(); i++)
            if (options[i].second[idx[i]]) bindings[options[i].first] = options[i].second[idx[i]];
        Expr::Ptr res = substitute(e, bindings);
        if (seen.insert(canonical_print(res)).second) out.push_back(res);
        if (++produced >= combo_cap) {
            log::warn("rewrite_t_to_expr: combination cap reached, result truncated");
            break;
        }
        // Advance the mixed-radix counter.
        size_t i = 0;
        for (; i < idx.size(); i++) {
            if (++idx[i] < options[i].second.size()) break;
            idx[i] = 0;
        }
        if (i == idx.size()) break;
        if (options.empty()) break;
    }
    return out;
}

namespace {

Expr::Ptr replace_all(const Expr::Ptr& e, const std::string& pat_print, const Expr::Ptr& repl) {
    if (canonical_print(e) == pat_print) return repl;
    if (!e->is_apply()) return e;
    bool changed = false;
    std::vector<Expr::Ptr> kids;
    for (const auto& c : e->children) {
        Expr::Ptr nc = replace_all(c, pat_print, repl);
        changed |= nc != c;
        kids.push_back(std::move(nc));
    }
    if (!changed) return e;
    return Expr::apply(e->op, std::move(kids), e->attrs);
}

bool occurs(const Expr::Ptr& e, const std::string& pat_print) {
    if (canonical_print(e) == pat_print) return true;
    for (const auto& c : e->children)
        if (occurs(c, pat_print)) return true;
    return false;
}

} // namespace

namespace {

// Restricted condition grammar for lemma files:
//   cond  := cmp '(' arg ',' arg ')'        cmp in {eq, ne, le, lt}
//   arg   := shape '(' var ',' int ')' | attr '(' var ')' | int
struct CondArg {
    enum class K { ShapeDim, Attr, Lit } k = K::Lit;
    std::string var;
    int axis = 0;
    std::int64_t lit = 0;
};

CondArg parse_cond_arg(const std::string& text) {
    std::string s = text;
    s.erase(std::remove_if(s.begin(), s.end(), [](char c) { return std::isspace(c); }), s.end());
    CondArg a;
    if (s.rfind("shape(", 0) == 0 && s.back() == ')') {
        auto comma = s.find(',');
        if (comma == std::string::npos) throw SchemaError("bad shape() in lemma condition");
        a.k = CondArg::K::ShapeDim;
        a.var = s.substr(6, comma - 6);
        a.axis = std::stoi(s.substr(comma + 1, s.size() - comma - 2));
        return a;
    }
    if (s.rfind("attr(", 0) == 0 && s.back() == ')') {
        a.k = CondArg::K::Attr;
        a.var = s.substr(5, s.size() - 6);
        return a;
    }
    a.k = CondArg::K::Lit;
    a.lit = std::stoll(s);
    return a;
}

std::optional<DimExpr> eval_cond_arg(const CondArg& a, const MatchBindings& b, const EGraph& eg) {
    switch (a.k) {
        case CondArg::K::Lit: return DimExpr(a.lit);
        case CondArg::K::Attr: {
            auto it = b.avars.find(a.var);
            if (it == b.avars.end()) return std::nullopt;
            const auto* d = std::get_if<DimExpr>(&it->second);
            if (!d) return std::nullopt;
            return *d;
        }
        case CondArg::K::ShapeDim: {
            auto it = b.vars.find(a.var);
            if (it == b.vars.end()) return std::nullopt;
            auto s = eg.shape_of(it->second);
            if (!s || a.axis < 0 || a.axis >= static_cast<int>(s->size())) return std::nullopt;
            return (*s)[a.axis];
        }
    }
    return std::nullopt;
}

ConditionFn parse_condition(const std::vector<std::string>& conds) {
    struct Parsed {
        std::string cmp;
        CondArg lhs, rhs;
    };
    std::vector<Parsed> parsed;
    for (const auto& c : conds) {
        auto open = c.find('(');
        auto close = c.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close <= open)
            throw SchemaError("bad lemma condition: " + c);
        std::string cmp = c.substr(0, open);
        std::string body = c.substr(open + 1, close - open - 1);
        // Split at the top-level comma (arguments may contain nested parens).
        int depth = 0;
        size_t split = std::string::npos;
        for (size_t i = 0; i < body.size(); i++) {
            if (body[i] == '(') depth++;
            else if (body[i] == ')') depth--;
            else if (body[i] == ',' && depth == 0) {
                split = i;
                break;
            }
        }
        if (split == std::string::npos) throw SchemaError("bad lemma condition: " + c);
        if (cmp != "eq" && cmp != "ne" && cmp != "le" && cmp != "lt")
            throw SchemaError("unknown comparison in lemma condition: " + cmp);
        parsed.push_back(
            {cmp, parse_cond_arg(body.substr(0, split)), parse_cond_arg(body.substr(split + 1))});
    }
    return [parsed](const MatchBindings& b, const EGraph& eg) -> Tristate {
        Tristate acc = Tristate::True;
        for (const auto& p : parsed) {
            auto l = eval_cond_arg(p.lhs, b, eg);
            auto r = eval_cond_arg(p.rhs, b, eg);
            if (!l || !r) return Tristate::Unknown;
            Tristate t;
            if (p.cmp == "eq") t = decide_cmp(*l, *r, CmpRel::Eq, eg.constraints());
            else if (p.cmp == "le") t = decide_cmp(*l, *r, CmpRel::Le, eg.constraints());
            else if (p.cmp == "lt") t = decide_cmp(*l, *r, CmpRel::Lt, eg.constraints());
            else {
                Tristate e = decide_cmp(*l, *r, CmpRel::Eq, eg.constraints());
                t = e == Tristate::True    ? Tristate::False
                    : e == Tristate::False ? Tristate::True
                                           : Tristate::Unknown;
            }
            if (t == Tristate::False) return Tristate::False;
            if (t == Tristate::Unknown) acc = Tristate::Unknown;
        }
        return acc;
    };
}

} // namespace

std::vector<Lemma> parse_lemma_file(const nlohmann::json& doc) {
    if (!doc.is_array()) throw SchemaError("lemma file must be a JSON list");
    std::vector<Lemma> out;
    for (const auto& item : doc) {
        Lemma l;
        l.name = item.at("name").get<std::string>();
        l.family = item.value("family", std::string("custom"));
        l.lhs = parse_pattern(item.at("lhs").get<std::string>());
        l.rhs = parse_pattern(item.at("rhs").get<std::string>());
        std::string dir = item.value("direction", std::string("forward"));
        l.direction = dir == "both" ? Lemma::Direction::Both : Lemma::Direction::Forward;
        l.constrained = item.value("constrained", false);
        if (item.contains("condition")) {
            std::vector<std::string> conds;
            if (item["condition"].is_string())
                conds.push_back(item["condition"].get<std::string>());
            else
                conds = item["condition"].get<std::vector<std::string>>();
            l.condition = parse_condition(conds);
        }
        if (!item.contains("sample")) throw SchemaError("lemma '" + l.name + "' needs a sample");
        const auto& sj = item["sample"];
        LemmaSample s;
        for (const auto& in : sj.at("inputs")) {
            LemmaSample::Input input;
            input.id = in.at("id").get<std::string>();
            input.shape = in.at("shape").get<std::vector<std::int64_t>>();
            input.int_hi = in.value("int_hi", 0);
            s.inputs.push_back(std::move(input));
        }
        s.lhs = sj.at("lhs").get<std::string>();
        s.rhs = sj.at("rhs").get<std::string>();
        if (sj.contains("seeds")) s.seeds = sj["seeds"].get<std::vector<std::string>>();
        l.samples.push_back(std::move(s));
        self_validate(l);
        out.push_back(std::move(l));
    }
    return out;
}

std::vector<Expr::Ptr> rewrite_expr_to_t(const Expr::Ptr& e, const Relation& r,
                                         size_t combo_cap) {
    struct Applicable {
        std::string print;
        Expr::Ptr ref;
    };
    std::vector<Applicable> applicable;
    for (const auto& entry : r.entries()) {
        std::string p = canonical_print(entry.expr);
        if (occurs(e, p)) applicable.push_back({std::move(p), Expr::tensor(entry.target)});
    }
    std::vector<Expr::Ptr> out;
    std::set<std::string> seen;
    size_t k = applicable.size();
    size_t total = k < 20 ? (size_t{1} << k) : combo_cap;
    bool truncated = total > combo_cap;
    total = std::min(total, combo_cap);
    for (size_t mask = 0; mask < total; mask++) {
        Expr::Ptr res = e;
        for (size_t i = 0; i < k; i++)
            if (mask & (size_t{1} << i)) res = replace_all(res, applicable[i].print, applicable[i].ref);
        if (seen.insert(canonical_print(res)).second) out.push_back(res);
    }
    if (truncated) log::warn("rewrite_expr_to_t: combination cap reached, result truncated");
    return out;
}

} // namespace refinery
