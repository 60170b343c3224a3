// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/expr.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "refinery/errors.hpp"
#include "refinery/graph.hpp"
#include "refinery/ops.hpp"

namespace refinery {

std::string attr_value_str(const AttrValue& v) {
    if (const auto* d = std::get_if<DimExpr>(&v)) return d->str();
    if (const auto* l = std::get_if<std::vector<DimExpr>>(&v)) {
        std::string out = "(";
        for (size_t i = 0; i < l->size(); i++) {
            if (i) out += " ";
            out += (*l)[i].str();
        }
        return out + ")";
    }
    return "\"" + std::get<std::string>(v) + "\"";
}

bool attr_value_eq(const AttrValue& a, const AttrValue& b) {
    if (a.index() != b.index()) return false;
    if (const auto* d = std::get_if<DimExpr>(&a)) return *d == std::get<DimExpr>(b);
    if (const auto* l = std::get_if<std::vector<DimExpr>>(&a))
        return *l == std::get<std::vector<DimExpr>>(b);
    return std::get<std::string>(a) == std::get<std::string>(b);
}

Attrs order_attrs(const std::string& op_kind, Attrs attrs) {
    std::map<std::string, int> rank;
    if (const OpSchema* schema = OpRegistry::instance().find(op_kind)) {
        int i = 0;
        for (const auto& a : schema->attrs) rank[a.name] = i++;
    }
    std::stable_sort(attrs.begin(), attrs.end(), [&](const auto& a, const auto& b) {
        auto ra = rank.count(a.first) ? rank[a.first] : 1000;
        auto rb = rank.count(b.first) ? rank[b.first] : 1000;
        if (ra != rb) return ra < rb;
        return a.first < b.first;
    });
    return attrs;
}

Expr::Ptr Expr::tensor(std::string id) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::TensorRef;
    e->op = std::move(id);
    return e;
}

Expr::Ptr Expr::scalar_ref(DimExpr v) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::ScalarRef;
    e->scalar = std::move(v);
    return e;
}

Expr::Ptr Expr::apply(std::string op_kind, std::vector<Ptr> children, Attrs attrs) {
    auto e = std::make_shared<Expr>();
    e->kind = Kind::Apply;
    e->attrs = order_attrs(op_kind, std::move(attrs));
    e->op = std::move(op_kind);
    e->children = std::move(children);
    return e;
}

const AttrValue* Expr::attr(const std::string& name) const {
    for (const auto& [k, v] : attrs)
        if (k == name) return &v;
    return nullptr;
}

namespace {

bool same_dim_attr(const Expr& a, const Expr& b) {
    const AttrValue* da = a.attr("dim");
    const AttrValue* db = b.attr("dim");
    if (!da || !db) return false;
    return attr_value_eq(*da, *db);
}

} // namespace

Expr::Ptr canonicalize(const Expr::Ptr& e) {
    if (!e || e->kind != Expr::Kind::Apply) return e;
    std::vector<Expr::Ptr> kids;
    kids.reserve(e->children.size());
    for (const auto& c : e->children) kids.push_back(canonicalize(c));

    if (e->op == "core.sum" || e->op == "core.concat") {
        std::vector<Expr::Ptr> flat;
        for (const auto& c : kids) {
            bool mergeable = c->is_apply() && c->op == e->op &&
                             (e->op == "core.sum" || same_dim_attr(*c, *e));
            if (mergeable)
                flat.insert(flat.end(), c->children.begin(), c->children.end());
            else
                flat.push_back(c);
        }
        if (flat.size() == 1) return flat[0];
        if (e->op == "core.sum") {
            std::stable_sort(flat.begin(), flat.end(), [](const Expr::Ptr& a, const Expr::Ptr& b) {
                return print_expr(a) < print_expr(b);
            });
        }
        kids = std::move(flat);
    }
    return Expr::apply(e->op, std::move(kids), e->attrs);
}

namespace {

std::string display_op(const std::string& op) {
    if (op.rfind("core.", 0) == 0) return op.substr(5);
    return op;
}

void print_rec(const Expr::Ptr& e, std::ostringstream& os) {
    switch (e->kind) {
        case Expr::Kind::TensorRef:
            os << "(t " << e->op << ")";
            return;
        case Expr::Kind::ScalarRef:
            os << "(scalar " << e->scalar.str() << ")";
            return;
        case Expr::Kind::Apply: {
            os << "(" << display_op(e->op);
            for (const auto& c : e->children) {
                os << " ";
                print_rec(c, os);
            }
            for (const auto& [k, v] : e->attrs) os << " :" << k << " " << attr_value_str(v);
            os << ")";
            return;
        }
    }
}

} // namespace

std::string print_expr(const Expr::Ptr& e) {
    std::ostringstream os;
    print_rec(e, os);
    return os.str();
}

std::string canonical_print(const Expr::Ptr& e) { return print_expr(canonicalize(e)); }

namespace {

struct SexprParser {
    std::string_view text;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) pos++;
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }
    void expect(char c) {
        if (peek() != c)
            throw SchemaError("expression parse error: expected '" + std::string(1, c) +
                              "' at offset " + std::to_string(pos));
        pos++;
    }
    std::string atom() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() && !std::isspace(static_cast<unsigned char>(text[pos])) &&
               text[pos] != '(' && text[pos] != ')')
            pos++;
        if (pos == start) throw SchemaError("expression parse error: expected atom");
        return std::string(text.substr(start, pos - start));
    }

    AttrValue attr_value() {
        skip_ws();
        if (peek() == '(') {
            pos++;
            std::vector<DimExpr> list;
            while (peek() != ')') list.push_back(DimExpr::parse(atom()));
            pos++;
            return list;
        }
        if (peek() == '"') {
            pos++;
            size_t start = pos;
            while (pos < text.size() && text[pos] != '"') pos++;
            if (pos >= text.size()) throw SchemaError("unterminated string attribute");
            std::string s(text.substr(start, pos - start));
            pos++;
            return s;
        }
        return DimExpr::parse(atom());
    }

    Expr::Ptr expr() {
        expect('(');
        std::string head = atom();
        if (head == "t") {
            std::string id = atom();
            expect(')');
            return Expr::tensor(id);
        }
        if (head == "scalar") {
            DimExpr v = DimExpr::parse(atom());
            expect(')');
            return Expr::scalar_ref(v);
        }
        std::string op = head.find('.') == std::string::npos ? "core." + head : head;
        std::vector<Expr::Ptr> children;
        Attrs attrs;
        while (true) {
            char c = peek();
            if (c == ')') {
                pos++;
                break;
            }
            if (c == '(') {
                children.push_back(expr());
            } else if (c == ':') {
                pos++;
                std::string name = atom();
                attrs.emplace_back(name, attr_value());
            } else {
                throw SchemaError("expression parse error: unexpected '" + std::string(1, c) +
                                  "' at offset " + std::to_string(pos));
            }
        }
        return Expr::apply(op, std::move(children), std::move(attrs));
    }
};

} // namespace

Expr::Ptr parse_expr(std::string_view text) {
    SexprParser p{text};
    Expr::Ptr e = p.expr();
    p.skip_ws();
    if (p.pos != text.size())
        throw SchemaError("trailing characters in expression: '" + std::string(text) + "'");
    return e;
}

namespace {
int count_applies(const Expr::Ptr& e) {
    if (e->kind != Expr::Kind::Apply) return 0;
    int n = 1;
    for (const auto& c : e->children) n += count_applies(c);
    return n;
}
} // namespace

int simplicity(const Expr::Ptr& e) { return count_applies(canonicalize(e)); }

Expr::Ptr substitute(const Expr::Ptr& e, const std::map<std::string, Expr::Ptr>& bindings) {
    if (e->is_tensor()) {
        auto it = bindings.find(e->op);
        return it != bindings.end() ? it->second : e;
    }
    if (!e->is_apply()) return e;
    bool changed = false;
    std::vector<Expr::Ptr> kids;
    kids.reserve(e->children.size());
    for (const auto& c : e->children) {
        Expr::Ptr nc = substitute(c, bindings);
        changed |= nc != c;
        kids.push_back(std::move(nc));
    }
    if (!changed) return e;
    return Expr::apply(e->op, std::move(kids), e->attrs);
}

void collect_tensor_refs(const Expr::Ptr& e, std::set<std::string>& out) {
    if (e->is_tensor()) {
        out.insert(e->op);
        return;
    }
    for (const auto& c : e->children) collect_tensor_refs(c, out);
}

std::set<std::string> tensor_refs(const Expr::Ptr& e) {
    std::set<std::string> out;
    collect_tensor_refs(e, out);
    return out;
}

CleanOpSet CleanOpSet::defaults() {
    return CleanOpSet{
        {"core.slice", "core.concat", "core.transpose", "core.reshape", "core.identity"},
        {"core.sum", "core.reduce_sum"},
    };
}

bool is_clean(const Expr::Ptr& e, const CleanOpSet& ops) {
    switch (e->kind) {
        case Expr::Kind::TensorRef: return true;
        case Expr::Kind::ScalarRef: return false;
        case Expr::Kind::Apply: {
            if (!ops.contains(e->op)) return false;
            for (const auto& c : e->children)
                if (!is_clean(c, ops)) return false;
            return true;
        }
    }
    return false;
}

bool Relation::add(std::string target, Expr::Ptr expr, std::string provenance) {
    auto key = std::make_pair(target, canonical_print(expr));
    if (!seen_.insert(key).second) return false;
    entries_.push_back({std::move(target), std::move(expr), std::move(provenance)});
    return true;
}

void Relation::merge(const Relation& other) {
    for (const auto& e : other.entries_) add(e.target, e.expr, e.provenance);
}

std::vector<const RelationEntry*> Relation::for_target(const std::string& t) const {
    std::vector<const RelationEntry*> out;
    for (const auto& e : entries_)
        if (e.target == t) out.push_back(&e);
    return out;
}

bool Relation::has_target(const std::string& t) const {
    for (const auto& e : entries_)
        if (e.target == t) return true;
    return false;
}

std::set<std::string> Relation::targets() const {
    std::set<std::string> out;
    for (const auto& e : entries_) out.insert(e.target);
    return out;
}

Relation Relation::from_json(const nlohmann::json& j) {
    if (!j.is_array()) throw SchemaError("relation document must be a JSON list");
    Relation r;
    for (const auto& item : j) {
        if (!item.is_object() || !item.contains("target") || !item.contains("expr"))
            throw SchemaError("relation entry must be {target, expr}");
        r.add(item.at("target").get<std::string>(),
              parse_expr(item.at("expr").get<std::string>()));
    }
    return r;
}

nlohmann::ordered_json Relation::to_json() const {
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& e : entries_) {
        nlohmann::ordered_json item;
        item["target"] = e.target;
        item["expr"] = canonical_print(e.expr);
        out.push_back(item);
    }
    return out;
}

bool is_complete(const Relation& r, const std::vector<std::string>& outputs) {
    for (const auto& o : outputs)
        if (!r.has_target(o)) return false;
    return true;
}

bool is_complete(const Relation& r, const ComputationGraph& g) {
    return is_complete(r, g.outputs());
}

} // namespace refinery
