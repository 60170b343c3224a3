// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "refinery/dim_expr.hpp"

namespace refinery {

enum class Tristate { True, False, Unknown };

inline const char* to_string(Tristate t) {
    switch (t) {
        case Tristate::True: return "true";
        case Tristate::False: return "false";
        default: return "unknown";
    }
}

enum class CmpRel { Eq, Le, Lt };

/// Affine constraints over non-negative integer dims. Every dim implicitly
/// satisfies s >= 0. Optionally carries an external SMT-LIB solver command;
/// when set, decide_cmp falls back to it on Unknown.
class ConstraintStore {
public:
    ConstraintStore() = default;
    static ConstraintStore from_strings(const std::vector<std::string>& lines);

    void add(const DimConstraint& c) { constraints_.push_back(c); }
    void add_line(const std::string& line) { add(parse_constraint(line)); }
    void merge(const ConstraintStore& other);

    const std::vector<DimConstraint>& constraints() const { return constraints_; }
    std::vector<std::string> lines() const;

    void set_solver_command(std::string cmd) { solver_cmd_ = std::move(cmd); }
    const std::string& solver_command() const { return solver_cmd_; }

private:
    std::vector<DimConstraint> constraints_;
    std::string solver_cmd_;
};

/// Decides `a rel b` under `cs` over the non-negative integers. Returns
/// True/False only when entailed; Unknown otherwise. The builtin procedure
/// covers normalization, constant folding, bound propagation, and equality
/// substitution; anything deeper goes to the external hook when configured.
/// Throws SolverError if a configured hook fails to respond.
Tristate decide_cmp(const DimExpr& a, const DimExpr& b, CmpRel rel, const ConstraintStore& cs);

/// SMT-LIB 2 (QF_LIA) script whose check-sat answers `unsat` exactly when
/// `a rel b` is entailed by `cs` (the goal is asserted negated).
std::string emit_smtlib(const DimExpr& a, const DimExpr& b, CmpRel rel, const ConstraintStore& cs);

} // namespace refinery
