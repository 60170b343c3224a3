// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/dim_expr.hpp"

#include <cctype>
#include <sstream>

#include "refinery/errors.hpp"

namespace refinery {

DimExpr DimExpr::var(const std::string& id, std::int64_t coeff) {
    DimExpr e;
    if (coeff != 0) e.coeffs_[id] = coeff;
    return e;
}

std::int64_t DimExpr::value() const {
    if (!is_concrete()) throw Error("DimExpr::value on symbolic form: " + str());
    return constant_;
}

void DimExpr::prune() {
    for (auto it = coeffs_.begin(); it != coeffs_.end();) {
        if (it->second == 0)
            it = coeffs_.erase(it);
        else
            ++it;
    }
}

DimExpr DimExpr::operator+(const DimExpr& o) const {
    DimExpr r = *this;
    r.constant_ += o.constant_;
    for (const auto& [id, c] : o.coeffs_) r.coeffs_[id] += c;
    r.prune();
    return r;
}

DimExpr DimExpr::operator-(const DimExpr& o) const { return *this + (-o); }

DimExpr DimExpr::operator-() const { return *this * -1; }

DimExpr DimExpr::operator*(std::int64_t k) const {
    DimExpr r;
    r.constant_ = constant_ * k;
    for (const auto& [id, c] : coeffs_) r.coeffs_[id] = c * k;
    r.prune();
    return r;
}

bool DimExpr::operator<(const DimExpr& o) const {
    if (coeffs_ != o.coeffs_) return coeffs_ < o.coeffs_;
    return constant_ < o.constant_;
}

DimExpr DimExpr::substituted(const std::string& id, const DimExpr& repl) const {
    auto it = coeffs_.find(id);
    if (it == coeffs_.end()) return *this;
    DimExpr r = *this;
    std::int64_t c = it->second;
    r.coeffs_.erase(id);
    return r + repl * c;
}

std::optional<std::int64_t> DimExpr::eval(const std::map<std::string, std::int64_t>& env) const {
    std::int64_t v = constant_;
    for (const auto& [id, c] : coeffs_) {
        auto it = env.find(id);
        if (it == env.end()) return std::nullopt;
        v += c * it->second;
    }
    return v;
}

void DimExpr::collect_vars(std::set<std::string>& out) const {
    for (const auto& [id, c] : coeffs_) out.insert(id);
}

bool DimExpr::divisible_by(std::int64_t k) const {
    if (k == 0) return false;
    if (constant_ % k != 0) return false;
    for (const auto& [id, c] : coeffs_)
        if (c % k != 0) return false;
    return true;
}

DimExpr DimExpr::divided_by(std::int64_t k) const {
    if (!divisible_by(k)) throw Error("DimExpr not divisible by " + std::to_string(k) + ": " + str());
    DimExpr r;
    r.constant_ = constant_ / k;
    for (const auto& [id, c] : coeffs_) r.coeffs_[id] = c / k;
    return r;
}

std::string DimExpr::str() const {
    if (coeffs_.empty()) return std::to_string(constant_);
    std::ostringstream os;
    bool first = true;
    for (const auto& [id, c] : coeffs_) {
        if (c < 0) {
            os << "-";
        } else if (!first) {
            os << "+";
        }
        std::int64_t a = c < 0 ? -c : c;
        if (a != 1) os << a << "*";
        os << id;
        first = false;
    }
    if (constant_ > 0)
        os << "+" << constant_;
    else if (constant_ < 0)
        os << constant_;
    return os.str();
}

namespace {

struct AffineParser {
    std::string_view text;
    size_t pos = 0;

    void skip_ws() {
        while (pos < text.size() && std::isspace(static_cast<unsigned char>(text[pos]))) pos++;
    }
    bool eof() {
        skip_ws();
        return pos >= text.size();
    }
    char peek() {
        skip_ws();
        return pos < text.size() ? text[pos] : '\0';
    }

    // term := [int '*'] ident | int | ident
    DimExpr parse_term() {
        skip_ws();
        std::int64_t sign = 1;
        while (peek() == '+' || peek() == '-') {
            if (peek() == '-') sign = -sign;
            pos++;
        }
        skip_ws();
        if (pos >= text.size()) throw SchemaError("dangling sign in affine expression");
        if (std::isdigit(static_cast<unsigned char>(text[pos]))) {
            std::int64_t v = 0;
            while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
                v = v * 10 + (text[pos] - '0');
                pos++;
            }
            if (peek() == '*') {
                pos++;
                std::string id = parse_ident();
                return DimExpr::var(id, sign * v);
            }
            return DimExpr(sign * v);
        }
        std::string id = parse_ident();
        return DimExpr::var(id, sign);
    }

    std::string parse_ident() {
        skip_ws();
        size_t start = pos;
        while (pos < text.size() &&
               (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
            pos++;
        if (pos == start) throw SchemaError("expected identifier in affine expression");
        return std::string(text.substr(start, pos - start));
    }

    DimExpr parse_expr() {
        DimExpr acc = parse_term();
        while (!eof()) {
            char c = peek();
            if (c == '+' || c == '-') {
                acc = acc + parse_term();
            } else {
                break;
            }
        }
        return acc;
    }
};

} // namespace

DimExpr DimExpr::parse(std::string_view text) {
    AffineParser p{text};
    DimExpr e = p.parse_expr();
    if (!p.eof())
        throw SchemaError("trailing characters in affine expression: '" + std::string(text) + "'");
    return e;
}

std::string DimConstraint::str() const {
    return expr.str() + (rel == Rel::Eq ? " == 0" : " <= 0");
}

DimConstraint parse_constraint(std::string_view text) {
    static const struct {
        const char* tok;
        int flip; // 1: lhs-rhs, -1: rhs-lhs
        bool eq;
        bool strict;
    } kRels[] = {
        {"==", 1, true, false}, {"<=", 1, false, false}, {">=", -1, false, false},
        {"<", 1, false, true},  {">", -1, false, true},
    };
    for (const auto& r : kRels) {
        auto at = text.find(r.tok);
        if (at == std::string_view::npos) continue;
        DimExpr lhs = DimExpr::parse(text.substr(0, at));
        DimExpr rhs = DimExpr::parse(text.substr(at + std::string_view(r.tok).size()));
        DimExpr d = r.flip == 1 ? lhs - rhs : rhs - lhs;
        if (r.eq) return {d, DimConstraint::Rel::Eq};
        if (r.strict) d = d + DimExpr(1);
        return {d, DimConstraint::Rel::Le};
    }
    throw SchemaError("no relation operator in constraint: '" + std::string(text) + "'");
}

} // namespace refinery
