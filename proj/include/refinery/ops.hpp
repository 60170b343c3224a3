// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "refinery/expr.hpp"
#include "refinery/ndarray.hpp"
#include "refinery/symbolic.hpp"

namespace refinery {

using Shape = std::vector<DimExpr>;
using DimEnv = std::map<std::string, std::int64_t>;

enum class DType { F32, F64, I64, Bool };
DType dtype_from_string(const std::string& s);
std::string dtype_to_string(DType d);

struct AttrSpec {
    enum class Kind { Dim, DimList, String };
    std::string name;
    Kind kind = Kind::Dim;
    bool required = true;
};

/// Per-op contract: arity, attribute schema, shape rule, optional per-output
/// dataflow expansion (multi-output collectives), optional reference
/// semantics for the numeric oracle.
struct OpSchema {
    std::string kind;
    int min_inputs = 1;
    int max_inputs = 1; // -1: variadic
    int num_outputs = 1; // -1: one per input (collectives)
    std::vector<AttrSpec> attrs;

    std::function<std::vector<Shape>(const std::vector<Shape>&, const Attrs&,
                                     const ConstraintStore&)>
        infer;
    std::function<Expr::Ptr(int out_idx, const std::vector<Expr::Ptr>& inputs,
                            const std::vector<Shape>& input_shapes, const Attrs&)>
        expand;
    std::function<std::vector<NDArray>(const std::vector<NDArray>&, const Attrs&, const DimEnv&)>
        eval;

    int outputs_for(int n_inputs) const { return num_outputs == -1 ? n_inputs : num_outputs; }
};

/// Process-wide registry. Builtins (core.*) are installed on first use;
/// custom ops must be registered before any graph referencing them is parsed.
class OpRegistry {
public:
    static OpRegistry& instance();
    void register_op(OpSchema schema); // DuplicateName on repeat
    bool has(const std::string& kind) const { return ops_.count(kind) > 0; }
    const OpSchema* find(const std::string& kind) const;
    const OpSchema& get(const std::string& kind) const; // ValidationError when absent
    std::vector<std::string> kinds() const;

private:
    OpRegistry();
    std::map<std::string, OpSchema> ops_;
};

const AttrValue* find_attr(const Attrs& attrs, const std::string& name);
DimExpr attr_dim(const Attrs& attrs, const std::string& name);
std::int64_t attr_concrete_int(const Attrs& attrs, const std::string& name);
std::int64_t attr_eval_int(const Attrs& attrs, const std::string& name, const DimEnv& env);

/// Validates attribute names/kinds against the schema. ValidationError.
void validate_attrs(const OpSchema& schema, const Attrs& attrs, const std::string& context);

/// Dataflow expression for one output of a node application, using `expand`
/// when present and a plain Apply for single-output ops.
Expr::Ptr node_output_expr(const std::string& op_kind, int out_idx,
                           const std::vector<Expr::Ptr>& inputs,
                           const std::vector<Shape>& input_shapes, const Attrs& attrs);

using ShapeResolver = std::function<std::optional<Shape>(const std::string& tensor_id)>;

/// Shape of an expression: resolver supplies leaf shapes, op rules do the
/// rest. The try_ variant absorbs rule violations into nullopt.
Shape infer_expr_shape(const Expr::Ptr& e, const ShapeResolver& resolver,
                       const ConstraintStore& cs);
std::optional<Shape> try_infer_expr_shape(const Expr::Ptr& e, const ShapeResolver& resolver,
                                          const ConstraintStore& cs);

std::string shape_str(const Shape& s);

} // namespace refinery
