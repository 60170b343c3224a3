// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "refinery/egraph.hpp"
#include "refinery/expr.hpp"

namespace refinery {

/// Pattern over expressions: `?x` atoms are tensor variables binding whole
/// e-classes, `:attr ?v` binds attribute values.
struct Pattern {
    enum class K { Var, Tensor, Scalar, Node };
    using PatAttr = std::variant<AttrValue, std::string>; // literal | var name

    K k = K::Node;
    std::string var;
    std::string tensor_id;
    DimExpr scalar_value;
    std::string op;
    std::vector<std::pair<std::string, PatAttr>> attrs;
    std::vector<Pattern> children;

    void collect_vars(std::set<std::string>& tvars, std::set<std::string>& avars) const;
};

Pattern parse_pattern(std::string_view text);

struct MatchBindings {
    std::map<std::string, ClassId> vars;
    std::map<std::string, AttrValue> avars;
};

/// All matches of `pat` against class `c`, in deterministic order.
std::vector<MatchBindings> match_pattern(const EGraph& eg, const Pattern& pat, ClassId c);
/// Instantiates `pat` under `bindings`; second element reports whether any
/// new e-node was created.
std::pair<ClassId, bool> build_pattern(EGraph& eg, const Pattern& pat,
                                       const MatchBindings& bindings,
                                       const std::string& provenance);

struct LemmaStats {
    std::map<std::string, std::uint64_t> applications;
    void bump(const std::string& name, std::uint64_t n = 1) { applications[name] += n; }
    void merge(const LemmaStats& o) {
        for (const auto& [k, v] : o.applications) applications[k] += v;
    }
};

/// Concrete instance used for shape self-validation, matcher checks, and
/// numeric validation. `seeds` pre-populate the e-graph so constrained rules
/// can fire during the matcher check.
struct LemmaSample {
    struct Input {
        std::string id;
        std::vector<std::int64_t> shape;
        std::int64_t int_hi = 0; // >0: integer-valued input in [0, int_hi)
    };
    std::vector<Input> inputs;
    std::string lhs;
    std::string rhs;
    std::vector<std::string> seeds;
};

using ConditionFn = std::function<Tristate(const MatchBindings&, const EGraph&)>;
/// Whole-graph custom pass; returns the number of effective changes.
using CustomApplyFn = std::function<std::uint64_t(EGraph&)>;

/// Conditional rewrite rule. Declarative lemmas carry lhs/rhs patterns and an
/// optional condition per direction; anything with computed attributes or
/// existence gating is a custom pass.
struct Lemma {
    std::string name;
    std::string family; // stats aggregation: "concat", "slice", "matmul", ...
    enum class Direction { Forward, Both } direction = Direction::Forward;
    bool constrained = false;

    std::optional<Pattern> lhs;
    std::optional<Pattern> rhs;
    ConditionFn condition;         // nullptr: unconditional
    ConditionFn reverse_condition; // Both only; nullptr: reuse `condition`

    CustomApplyFn custom;

    std::vector<LemmaSample> samples;

    bool is_declarative() const { return lhs.has_value() && rhs.has_value(); }
};

struct SaturationBudget {
    int max_iterations = 30;
    size_t max_enodes = 50000;
};

struct SaturationResult {
    bool budget_hit = false;
    int iterations = 0;
};

/// Runs all lemmas to fixpoint or budget. Deterministic sequential schedule.
SaturationResult saturate(EGraph& eg, const std::vector<Lemma>& lemmas,
                          const SaturationBudget& budget, LemmaStats* stats);

/// Builtin lemma library (each entry structurally self-validated).
/// LemmaValidationError on any inconsistent entry.
std::vector<Lemma> load_builtin_lemmas();

/// Process-wide registry: builtins preloaded, custom lemmas appended.
class LemmaRegistry {
public:
    static LemmaRegistry& instance();
    /// Structural + shape self-validation, then registration.
    /// LemmaValidationError / DuplicateName.
    void register_lemma(Lemma l);
    const std::vector<Lemma>& all() const { return lemmas_; }
    const Lemma* find(const std::string& name) const;

private:
    LemmaRegistry();
    std::vector<Lemma> lemmas_;
};

/// Structural self-validation: rhs variables bound by lhs, samples present,
/// lhs/rhs sample shapes agree. Throws LemmaValidationError.
void self_validate(const Lemma& l);
/// Matcher + numeric validation: saturating the sample lhs must put the
/// sample rhs in the same class, and both sides must agree numerically on
/// `rounds` random instantiations within rel_tol. Returns max deviation.
double validate_lemma_numeric(const Lemma& l, int rounds, double rel_tol);

struct RewriteResult {
    std::vector<Expr::Ptr> exprs;
    bool budget_hit = false;
};

/// Every expression extractable from e's saturated equivalence class
/// (including e), deterministic.
RewriteResult rewrite_using_lemma(const Expr::Ptr& e, const std::vector<Lemma>& lemmas,
                                  const ConstraintStore& cs, const SaturationBudget& budget,
                                  const ShapeResolver& resolver, LemmaStats* stats = nullptr);

/// All combinations of replacing mapped tensors by their relation
/// expressions (per tensor: keep, or one of its mappings; chosen mappings
/// replace every occurrence). Includes e. Capped deterministically.
std::vector<Expr::Ptr> rewrite_t_to_expr(const Expr::Ptr& e, const Relation& r,
                                         size_t combo_cap = 4096);

/// All combinations of replacing relation expressions occurring as subtrees
/// (canonical-form match, all occurrences per chosen entry) by their tensor.
/// Includes e. Capped deterministically.
std::vector<Expr::Ptr> rewrite_expr_to_t(const Expr::Ptr& e, const Relation& r,
                                         size_t combo_cap = 4096);

/// Lemma definition file: JSON list of {name, lhs, rhs, condition?,
/// direction?, constrained?, family?, sample}. Restricted condition grammar:
/// eq|ne|le|lt(shape(X,axis) | attr | int, ...).
std::vector<Lemma> parse_lemma_file(const nlohmann::json& doc);

} // namespace refinery
