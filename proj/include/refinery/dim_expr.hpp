// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace refinery {

/// Normalized integer affine form over symbolic dim identifiers:
/// sum(coeff_i * var_i) + constant. Zero coefficients are never stored, so
/// structural equality is semantic equality.
class DimExpr {
public:
    DimExpr() = default;
    DimExpr(std::int64_t c) : constant_(c) {} // NOLINT: implicit by design
    static DimExpr var(const std::string& id, std::int64_t coeff = 1);

    bool is_concrete() const { return coeffs_.empty(); }
    std::int64_t constant() const { return constant_; }
    // Value of a concrete form; throws Error otherwise.
    std::int64_t value() const;
    const std::map<std::string, std::int64_t>& coeffs() const { return coeffs_; }

    DimExpr operator+(const DimExpr& o) const;
    DimExpr operator-(const DimExpr& o) const;
    DimExpr operator-() const;
    DimExpr operator*(std::int64_t k) const;

    bool operator==(const DimExpr& o) const {
        return constant_ == o.constant_ && coeffs_ == o.coeffs_;
    }
    bool operator!=(const DimExpr& o) const { return !(*this == o); }
    // Total order used for canonical printing and container keys.
    bool operator<(const DimExpr& o) const;

    // Substitute a variable by an affine form.
    DimExpr substituted(const std::string& id, const DimExpr& repl) const;
    std::optional<std::int64_t> eval(const std::map<std::string, std::int64_t>& env) const;
    void collect_vars(std::set<std::string>& out) const;
    bool divisible_by(std::int64_t k) const;
    DimExpr divided_by(std::int64_t k) const; // requires divisible_by

    /// Canonical text: "4", "s0", "2*s0+s1+3", "-s0+1". Variables sorted.
    std::string str() const;
    /// Parses the affine grammar: int literals, identifiers, `+ - *`.
    static DimExpr parse(std::string_view text);

private:
    std::map<std::string, std::int64_t> coeffs_;
    std::int64_t constant_ = 0;
    void prune();
};

/// A constraint normalized to `expr REL 0` with REL in {==, <=}.
/// `<` is folded into `<=` over the integers at parse time (d < 0 == d+1 <= 0).
struct DimConstraint {
    enum class Rel { Eq, Le };
    DimExpr expr;
    Rel rel = Rel::Eq;

    std::string str() const;
};

/// Parses constraint strings like "s0 == 2*s1", "s0 >= 1", "s0 + 1 < s2".
DimConstraint parse_constraint(std::string_view text);

} // namespace refinery
