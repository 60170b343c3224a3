// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/symbolic.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <optional>
#include <sstream>
#include <unistd.h>

#include "refinery/errors.hpp"
#include "refinery/log.hpp"

namespace refinery {

ConstraintStore ConstraintStore::from_strings(const std::vector<std::string>& lines) {
    ConstraintStore cs;
    for (const auto& l : lines) cs.add_line(l);
    return cs;
}

void ConstraintStore::merge(const ConstraintStore& other) {
    for (const auto& c : other.constraints_) constraints_.push_back(c);
    if (solver_cmd_.empty()) solver_cmd_ = other.solver_cmd_;
}

std::vector<std::string> ConstraintStore::lines() const {
    std::vector<std::string> out;
    out.reserve(constraints_.size());
    for (const auto& c : constraints_) out.push_back(c.str());
    return out;
}

namespace {

// [lo, hi], nullopt = unbounded on that side.
struct Interval {
    std::optional<std::int64_t> lo;
    std::optional<std::int64_t> hi;
};

using Bounds = std::map<std::string, Interval>;

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) q--;
    return q;
}
std::int64_t ceil_div(std::int64_t a, std::int64_t b) { return -floor_div(-a, b); }

Interval interval_of(const DimExpr& e, const Bounds& bounds) {
    Interval iv{e.constant(), e.constant()};
    for (const auto& [id, c] : e.coeffs()) {
        Interval vb{std::int64_t{0}, std::nullopt}; // implicit s >= 0
        auto it = bounds.find(id);
        if (it != bounds.end()) vb = it->second;
        auto lo_term = c > 0 ? vb.lo : vb.hi;
        auto hi_term = c > 0 ? vb.hi : vb.lo;
        if (iv.lo && lo_term)
            *iv.lo += c * *lo_term;
        else
            iv.lo.reset();
        if (iv.hi && hi_term)
            *iv.hi += c * *hi_term;
        else
            iv.hi.reset();
    }
    return iv;
}

void tighten(Interval& iv, std::optional<std::int64_t> lo, std::optional<std::int64_t> hi) {
    if (lo && (!iv.lo || *lo > *iv.lo)) iv.lo = lo;
    if (hi && (!iv.hi || *hi < *iv.hi)) iv.hi = hi;
}

// Propagate var bounds from `le_exprs` (each meaning e <= 0), starting from
// the implicit s >= 0. Returns false on detected infeasibility.
bool derive_bounds(const std::vector<DimExpr>& le_exprs, Bounds& bounds) {
    std::set<std::string> vars;
    for (const auto& e : le_exprs) e.collect_vars(vars);
    for (const auto& v : vars) bounds.emplace(v, Interval{std::int64_t{0}, std::nullopt});

    for (int round = 0; round < 4; round++) {
        for (const auto& e : le_exprs) {
            for (const auto& [id, c] : e.coeffs()) {
                DimExpr rest = e - DimExpr::var(id, c);
                Interval riv = interval_of(rest, bounds);
                Interval& vb = bounds[id];
                if (c > 0) {
                    // c*v <= -rest <= -rest_lo
                    if (riv.lo) tighten(vb, std::nullopt, floor_div(-*riv.lo, c));
                } else {
                    // v >= rest / (-c), pointwise >= rest_lo / (-c)
                    if (riv.lo) tighten(vb, ceil_div(*riv.lo, -c), std::nullopt);
                }
                if (vb.lo && vb.hi && *vb.lo > *vb.hi) return false;
            }
        }
    }
    return true;
}

// Equalities solvable as v == affine (coefficient +-1 on v).
struct EqSubst {
    std::string var;
    DimExpr repl;
};

std::vector<EqSubst> solvable_equalities(const ConstraintStore& cs) {
    std::vector<EqSubst> out;
    for (const auto& c : cs.constraints()) {
        if (c.rel != DimConstraint::Rel::Eq) continue;
        for (const auto& [id, coeff] : c.expr.coeffs()) {
            if (coeff == 1 || coeff == -1) {
                DimExpr rest = c.expr - DimExpr::var(id, coeff);
                out.push_back({id, rest * -coeff});
                break; // one pivot per equality
            }
        }
    }
    return out;
}

DimExpr apply_substitutions(DimExpr d, const std::vector<EqSubst>& subs) {
    // Fuel-bounded: chained equalities terminate or we give up.
    for (int fuel = 0; fuel < 16; fuel++) {
        bool changed = false;
        for (const auto& s : subs) {
            if (d.coeffs().count(s.var)) {
                DimExpr nd = d.substituted(s.var, s.repl);
                if (!(nd == d)) {
                    d = nd;
                    changed = true;
                }
            }
        }
        if (!changed) break;
    }
    return d;
}

// Entailment of d <= 0 / d == 0 by intervals.
Tristate decide_le0(const DimExpr& d, const Bounds& bounds) {
    Interval iv = interval_of(d, bounds);
    if (iv.hi && *iv.hi <= 0) return Tristate::True;
    if (iv.lo && *iv.lo >= 1) return Tristate::False;
    return Tristate::Unknown;
}

Tristate decide_eq0(const DimExpr& d, const Bounds& bounds) {
    Interval iv = interval_of(d, bounds);
    if (iv.lo && iv.hi && *iv.lo == 0 && *iv.hi == 0) return Tristate::True;
    if ((iv.hi && *iv.hi < 0) || (iv.lo && *iv.lo > 0)) return Tristate::False;
    return Tristate::Unknown;
}

std::string smt_int(std::int64_t v) {
    if (v < 0) return "(- " + std::to_string(-v) + ")";
    return std::to_string(v);
}

std::string smt_term(const DimExpr& e) {
    std::vector<std::string> parts;
    for (const auto& [id, c] : e.coeffs()) {
        if (c == 1)
            parts.push_back(id);
        else
            parts.push_back("(* " + smt_int(c) + " " + id + ")");
    }
    if (e.constant() != 0 || parts.empty()) parts.push_back(smt_int(e.constant()));
    if (parts.size() == 1) return parts[0];
    std::string out = "(+";
    for (const auto& p : parts) out += " " + p;
    return out + ")";
}

std::mutex g_solver_mutex;

std::string run_solver(const std::string& cmd, const std::string& script) {
    std::lock_guard<std::mutex> lock(g_solver_mutex);
    char path[] = "/tmp/refinery_smt_XXXXXX";
    int fd = mkstemp(path);
    if (fd < 0) throw SolverError("cannot create temp file for solver query");
    {
        FILE* f = fdopen(fd, "w");
        if (!f) {
            close(fd);
            unlink(path);
            throw SolverError("cannot open temp file for solver query");
        }
        fputs(script.c_str(), f);
        fclose(f);
    }
    std::string full = cmd + " < " + path + " 2>/dev/null";
    FILE* pipe = popen(full.c_str(), "r");
    if (!pipe) {
        unlink(path);
        throw SolverError("failed to launch solver: " + cmd);
    }
    std::string out;
    char buf[256];
    while (fgets(buf, sizeof(buf), pipe)) out += buf;
    int rc = pclose(pipe);
    unlink(path);
    std::istringstream is(out);
    std::string word;
    is >> word;
    if (word != "sat" && word != "unsat" && word != "unknown")
        throw SolverError("solver gave no sat/unsat answer (exit " + std::to_string(rc) +
                          "): " + out.substr(0, 120));
    return word;
}

std::string emit_smtlib_goal(const DimExpr& a, const DimExpr& b, CmpRel rel,
                             const ConstraintStore& cs, bool negate_goal) {
    std::set<std::string> vars;
    a.collect_vars(vars);
    b.collect_vars(vars);
    for (const auto& c : cs.constraints()) c.expr.collect_vars(vars);

    std::ostringstream os;
    os << "(set-logic QF_LIA)\n";
    for (const auto& v : vars) {
        os << "(declare-const " << v << " Int)\n";
        os << "(assert (>= " << v << " 0))\n";
    }
    for (const auto& c : cs.constraints()) {
        const char* op = c.rel == DimConstraint::Rel::Eq ? "=" : "<=";
        os << "(assert (" << op << " " << smt_term(c.expr) << " 0))\n";
    }
    const char* rel_op = rel == CmpRel::Eq ? "=" : rel == CmpRel::Le ? "<=" : "<";
    std::string goal = "(" + std::string(rel_op) + " " + smt_term(a) + " " + smt_term(b) + ")";
    if (negate_goal) goal = "(not " + goal + ")";
    os << "(assert " << goal << ")\n";
    os << "(check-sat)\n";
    return os.str();
}

} // namespace

std::string emit_smtlib(const DimExpr& a, const DimExpr& b, CmpRel rel, const ConstraintStore& cs) {
    return emit_smtlib_goal(a, b, rel, cs, /*negate_goal=*/true);
}

Tristate decide_cmp(const DimExpr& a, const DimExpr& b, CmpRel rel, const ConstraintStore& cs) {
    DimExpr d = a - b;
    // Over the integers, a < b == a - b + 1 <= 0.
    bool is_eq = rel == CmpRel::Eq;
    if (rel == CmpRel::Lt) d = d + DimExpr(1);

    if (d.is_concrete()) {
        std::int64_t v = d.value();
        if (is_eq) return v == 0 ? Tristate::True : Tristate::False;
        return v <= 0 ? Tristate::True : Tristate::False;
    }

    auto subs = solvable_equalities(cs);
    DimExpr ds = apply_substitutions(d, subs);

    std::vector<DimExpr> le_exprs;
    for (const auto& c : cs.constraints()) {
        if (c.rel == DimConstraint::Rel::Eq) {
            le_exprs.push_back(c.expr);
            le_exprs.push_back(-c.expr);
        } else {
            le_exprs.push_back(c.expr);
        }
    }
    Bounds bounds;
    if (!derive_bounds(le_exprs, bounds)) {
        // Store infeasible: every comparison is vacuously entailed.
        log::debug("decide_cmp: constraint store infeasible, query vacuously true");
        return Tristate::True;
    }

    for (const DimExpr* cand : {&ds, &d}) {
        Tristate t = is_eq ? decide_eq0(*cand, bounds) : decide_le0(*cand, bounds);
        if (t != Tristate::Unknown) return t;
    }

    if (!cs.solver_command().empty()) {
        std::string neg = emit_smtlib_goal(a, b, rel, cs, true);
        if (run_solver(cs.solver_command(), neg) == "unsat") return Tristate::True;
        std::string pos = emit_smtlib_goal(a, b, rel, cs, false);
        if (run_solver(cs.solver_command(), pos) == "unsat") return Tristate::False;
    }
    return Tristate::Unknown;
}

} // namespace refinery
