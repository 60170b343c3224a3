// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/ops.hpp"

#include <algorithm>
#include <cmath>

#include "refinery/errors.hpp"

namespace refinery {

DType dtype_from_string(const std::string& s) {
    if (s == "f32") return DType::F32;
    if (s == "f64") return DType::F64;
    if (s == "i64") return DType::I64;
    if (s == "bool") return DType::Bool;
    throw SchemaError("unknown dtype: " + s);
}

std::string dtype_to_string(DType d) {
    switch (d) {
        case DType::F32: return "f32";
        case DType::F64: return "f64";
        case DType::I64: return "i64";
        default: return "bool";
    }
}

const AttrValue* find_attr(const Attrs& attrs, const std::string& name) {
    for (const auto& [k, v] : attrs)
        if (k == name) return &v;
    return nullptr;
}

DimExpr attr_dim(const Attrs& attrs, const std::string& name) {
    const AttrValue* v = find_attr(attrs, name);
    if (!v) throw ShapeError("missing attribute '" + name + "'");
    const auto* d = std::get_if<DimExpr>(v);
    if (!d) throw ShapeError("attribute '" + name + "' is not a dim expression");
    return *d;
}

std::int64_t attr_concrete_int(const Attrs& attrs, const std::string& name) {
    DimExpr d = attr_dim(attrs, name);
    if (!d.is_concrete())
        throw ShapeError("attribute '" + name + "' must be a concrete integer, got " + d.str());
    return d.value();
}

std::int64_t attr_eval_int(const Attrs& attrs, const std::string& name, const DimEnv& env) {
    DimExpr d = attr_dim(attrs, name);
    auto v = d.eval(env);
    if (!v) throw EvalError("unbound symbolic dims in attribute '" + name + "': " + d.str());
    return *v;
}

void validate_attrs(const OpSchema& schema, const Attrs& attrs, const std::string& context) {
    for (const auto& spec : schema.attrs) {
        const AttrValue* v = find_attr(attrs, spec.name);
        if (!v) {
            if (spec.required)
                throw ValidationError(context + ": missing required attribute '" + spec.name + "'");
            continue;
        }
        bool ok = false;
        switch (spec.kind) {
            case AttrSpec::Kind::Dim: ok = std::holds_alternative<DimExpr>(*v); break;
            case AttrSpec::Kind::DimList: ok = std::holds_alternative<std::vector<DimExpr>>(*v); break;
            case AttrSpec::Kind::String: ok = std::holds_alternative<std::string>(*v); break;
        }
        if (!ok)
            throw ValidationError(context + ": attribute '" + spec.name + "' has the wrong kind");
    }
    for (const auto& [k, v] : attrs) {
        bool known = std::any_of(schema.attrs.begin(), schema.attrs.end(),
                                 [&](const AttrSpec& s) { return s.name == k; });
        if (!known) throw ValidationError(context + ": unknown attribute '" + k + "'");
    }
}

std::string shape_str(const Shape& s) {
    std::string out = "[";
    for (size_t i = 0; i < s.size(); i++) {
        if (i) out += ",";
        out += s[i].str();
    }
    return out + "]";
}

namespace {

void require_rank(const Shape& s, size_t rank, const std::string& ctx) {
    if (s.size() != rank)
        throw ShapeError(ctx + ": expected rank " + std::to_string(rank) + ", got " +
                         shape_str(s));
}

// Definite mismatches are errors; Unknown passes (constraints may resolve it).
void require_dim_eq(const DimExpr& a, const DimExpr& b, const ConstraintStore& cs,
                    const std::string& ctx) {
    if (decide_cmp(a, b, CmpRel::Eq, cs) == Tristate::False)
        throw ShapeError(ctx + ": dimension mismatch " + a.str() + " vs " + b.str());
}

void require_same_shape(const std::vector<Shape>& in, const ConstraintStore& cs,
                        const std::string& ctx) {
    for (size_t i = 1; i < in.size(); i++) {
        if (in[i].size() != in[0].size()) throw ShapeError(ctx + ": rank mismatch");
        for (size_t d = 0; d < in[0].size(); d++) require_dim_eq(in[i][d], in[0][d], cs, ctx);
    }
}

std::int64_t check_axis(const Attrs& attrs, const std::string& name, const Shape& s,
                        const std::string& ctx) {
    std::int64_t dim = attr_concrete_int(attrs, name);
    if (dim < 0 || dim >= static_cast<std::int64_t>(s.size()))
        throw ShapeError(ctx + ": axis " + std::to_string(dim) + " out of range for " +
                         shape_str(s));
    return dim;
}

NDArray ew_sum(const std::vector<NDArray>& in) {
    NDArray acc = in[0];
    for (size_t i = 1; i < in.size(); i++) acc = acc.zip(in[i], [](double a, double b) { return a + b; });
    return acc;
}

constexpr double kNormEps = 1e-6;

NDArray rmsnorm(const NDArray& x, const NDArray& w) {
    auto shape = x.shape();
    std::int64_t n = shape.back();
    std::int64_t rows = x.size() / n;
    NDArray out(shape);
    for (std::int64_t r = 0; r < rows; r++) {
        double ms = 0;
        for (std::int64_t j = 0; j < n; j++) ms += x.data()[r * n + j] * x.data()[r * n + j];
        ms = std::sqrt(ms / n + kNormEps);
        for (std::int64_t j = 0; j < n; j++)
            out.data()[r * n + j] = x.data()[r * n + j] / ms * w.data()[j];
    }
    return out;
}

NDArray layernorm(const NDArray& x, const NDArray& w, const NDArray& b) {
    auto shape = x.shape();
    std::int64_t n = shape.back();
    std::int64_t rows = x.size() / n;
    NDArray out(shape);
    for (std::int64_t r = 0; r < rows; r++) {
        double mean = 0;
        for (std::int64_t j = 0; j < n; j++) mean += x.data()[r * n + j];
        mean /= n;
        double var = 0;
        for (std::int64_t j = 0; j < n; j++) {
            double d = x.data()[r * n + j] - mean;
            var += d * d;
        }
        var = std::sqrt(var / n + kNormEps);
        for (std::int64_t j = 0; j < n; j++)
            out.data()[r * n + j] = (x.data()[r * n + j] - mean) / var * w.data()[j] + b.data()[j];
    }
    return out;
}

// Lookup over a vocabulary shard covering rows [start, end): out-of-shard
// indices contribute zeros, so shard results sum to the full lookup.
NDArray embedding_shard(const NDArray& table, const NDArray& idx, std::int64_t start,
                        std::int64_t end) {
    std::int64_t n = idx.size();
    std::int64_t h = table.shape()[1];
    NDArray out({n, h});
    for (std::int64_t i = 0; i < n; i++) {
        auto row = static_cast<std::int64_t>(idx.data()[i]);
        if (row < start || row >= end) continue;
        std::copy_n(table.data().begin() + (row - start) * h, h, out.data().begin() + i * h);
    }
    return out;
}

void install_builtins(std::map<std::string, OpSchema>& ops) {
    auto add = [&](OpSchema s) { ops.emplace(s.kind, std::move(s)); };

    add({.kind = "core.identity",
         .infer = [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore&) {
             return std::vector<Shape>{in[0]};
         },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{in[0]};
         }});

    add({.kind = "core.matmul",
         .min_inputs = 2,
         .max_inputs = 2,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                 require_rank(in[0], 2, "matmul");
                 require_rank(in[1], 2, "matmul");
                 require_dim_eq(in[0][1], in[1][0], cs, "matmul");
                 return std::vector<Shape>{{in[0][0], in[1][1]}};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{in[0].matmul(in[1])};
         }});

    auto binary = [&](const std::string& kind, double (*f)(double, double)) {
        add({.kind = kind,
             .min_inputs = 2,
             .max_inputs = 2,
             .infer =
                 [kind](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                     require_same_shape(in, cs, kind);
                     return std::vector<Shape>{in[0]};
                 },
             .eval = [f](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
                 return std::vector<NDArray>{in[0].zip(in[1], f)};
             }});
    };
    binary("core.add", [](double a, double b) { return a + b; });
    binary("core.sub", [](double a, double b) { return a - b; });
    binary("core.mul", [](double a, double b) { return a * b; });
    binary("core.div", [](double a, double b) { return a / b; });

    add({.kind = "core.sum",
         .min_inputs = 1,
         .max_inputs = -1,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                 require_same_shape(in, cs, "sum");
                 return std::vector<Shape>{in[0]};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{ew_sum(in)};
         }});

    add({.kind = "core.concat",
         .min_inputs = 1,
         .max_inputs = -1,
         .attrs = {{"dim"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore& cs) {
                 std::int64_t dim = check_axis(attrs, "dim", in[0], "concat");
                 Shape out = in[0];
                 for (size_t i = 1; i < in.size(); i++) {
                     if (in[i].size() != in[0].size()) throw ShapeError("concat: rank mismatch");
                     for (size_t d = 0; d < in[0].size(); d++)
                         if (static_cast<std::int64_t>(d) != dim)
                             require_dim_eq(in[i][d], in[0][d], cs, "concat");
                     out[dim] = out[dim] + in[i][dim];
                 }
                 return std::vector<Shape>{out};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{NDArray::concat(in, attr_eval_int(attrs, "dim", env))};
         }});

    add({.kind = "core.slice",
         .attrs = {{"dim"}, {"start"}, {"end"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore& cs) {
                 std::int64_t dim = check_axis(attrs, "dim", in[0], "slice");
                 DimExpr start = attr_dim(attrs, "start");
                 DimExpr end = attr_dim(attrs, "end");
                 if (decide_cmp(DimExpr(0), start, CmpRel::Le, cs) == Tristate::False ||
                     decide_cmp(start, end, CmpRel::Le, cs) == Tristate::False ||
                     decide_cmp(end, in[0][dim], CmpRel::Le, cs) == Tristate::False)
                     throw ShapeError("slice: bounds [" + start.str() + ":" + end.str() +
                                      ") invalid for size " + in[0][dim].str());
                 Shape out = in[0];
                 out[dim] = end - start;
                 return std::vector<Shape>{out};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{in[0].slice(attr_eval_int(attrs, "dim", env),
                                                     attr_eval_int(attrs, "start", env),
                                                     attr_eval_int(attrs, "end", env))};
         }});

    add({.kind = "core.transpose",
         .attrs = {{"dim0"}, {"dim1"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore&) {
                 std::int64_t d0 = check_axis(attrs, "dim0", in[0], "transpose");
                 std::int64_t d1 = check_axis(attrs, "dim1", in[0], "transpose");
                 Shape out = in[0];
                 std::swap(out[d0], out[d1]);
                 return std::vector<Shape>{out};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{
                 in[0].transpose(attr_eval_int(attrs, "dim0", env), attr_eval_int(attrs, "dim1", env))};
         }});

    add({.kind = "core.reshape",
         .attrs = {{"shape", AttrSpec::Kind::DimList}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore&) {
                 const AttrValue* v = find_attr(attrs, "shape");
                 const auto* list = v ? std::get_if<std::vector<DimExpr>>(v) : nullptr;
                 if (!list) throw ShapeError("reshape: missing shape attribute");
                 // Element-count check: cancel identical symbolic factors,
                 // then compare the concrete remainder.
                 std::vector<DimExpr> a = in[0], b = *list;
                 for (auto it = a.begin(); it != a.end();) {
                     auto match = std::find(b.begin(), b.end(), *it);
                     if (!it->is_concrete() && match != b.end()) {
                         b.erase(match);
                         it = a.erase(it);
                     } else {
                         ++it;
                     }
                 }
                 std::int64_t pa = 1, pb = 1;
                 bool sym = false;
                 for (const auto& d : a) {
                     if (d.is_concrete()) pa *= d.value();
                     else sym = true;
                 }
                 for (const auto& d : b) {
                     if (d.is_concrete()) pb *= d.value();
                     else sym = true;
                 }
                 if (!sym && pa != pb)
                     throw ShapeError("reshape: element count " + std::to_string(pa) + " vs " +
                                      std::to_string(pb));
                 return std::vector<Shape>{*list};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             const auto& list = std::get<std::vector<DimExpr>>(*find_attr(attrs, "shape"));
             std::vector<std::int64_t> target;
             for (const auto& d : list) {
                 auto v = d.eval(env);
                 if (!v) throw EvalError("unbound symbolic dim in reshape target");
                 target.push_back(*v);
             }
             return std::vector<NDArray>{in[0].reshape(target)};
         }});

    add({.kind = "core.reduce_sum",
         .attrs = {{"dim"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore&) {
                 std::int64_t dim = check_axis(attrs, "dim", in[0], "reduce_sum");
                 Shape out;
                 for (size_t d = 0; d < in[0].size(); d++)
                     if (static_cast<std::int64_t>(d) != dim) out.push_back(in[0][d]);
                 return std::vector<Shape>{out};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{in[0].reduce_sum(attr_eval_int(attrs, "dim", env))};
         }});

    add({.kind = "core.relu",
         .infer = [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore&) {
             return std::vector<Shape>{in[0]};
         },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{in[0].map([](double v) { return v > 0 ? v : 0; })};
         }});

    add({.kind = "core.softmax",
         .attrs = {{"dim"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore&) {
                 check_axis(attrs, "dim", in[0], "softmax");
                 return std::vector<Shape>{in[0]};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{in[0].softmax(attr_eval_int(attrs, "dim", env))};
         }});

    add({.kind = "core.rmsnorm",
         .min_inputs = 2,
         .max_inputs = 2,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                 if (in[0].empty()) throw ShapeError("rmsnorm: rank-0 input");
                 require_rank(in[1], 1, "rmsnorm weight");
                 require_dim_eq(in[0].back(), in[1][0], cs, "rmsnorm");
                 return std::vector<Shape>{in[0]};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{rmsnorm(in[0], in[1])};
         }});

    add({.kind = "core.layernorm",
         .min_inputs = 3,
         .max_inputs = 3,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                 if (in[0].empty()) throw ShapeError("layernorm: rank-0 input");
                 require_rank(in[1], 1, "layernorm weight");
                 require_rank(in[2], 1, "layernorm bias");
                 require_dim_eq(in[0].back(), in[1][0], cs, "layernorm");
                 require_dim_eq(in[0].back(), in[2][0], cs, "layernorm");
                 return std::vector<Shape>{in[0]};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{layernorm(in[0], in[1], in[2])};
         }});

    add({.kind = "core.pad",
         .attrs = {{"dim"}, {"before"}, {"after"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore& cs) {
                 std::int64_t dim = check_axis(attrs, "dim", in[0], "pad");
                 DimExpr before = attr_dim(attrs, "before");
                 DimExpr after = attr_dim(attrs, "after");
                 if (decide_cmp(DimExpr(0), before, CmpRel::Le, cs) == Tristate::False ||
                     decide_cmp(DimExpr(0), after, CmpRel::Le, cs) == Tristate::False)
                     throw ShapeError("pad: negative padding");
                 Shape out = in[0];
                 out[dim] = out[dim] + before + after;
                 return std::vector<Shape>{out};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{in[0].pad(attr_eval_int(attrs, "dim", env),
                                                   attr_eval_int(attrs, "before", env),
                                                   attr_eval_int(attrs, "after", env))};
         }});

    add({.kind = "core.embedding",
         .min_inputs = 2,
         .max_inputs = 2,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore&) {
                 require_rank(in[0], 2, "embedding table");
                 require_rank(in[1], 1, "embedding indices");
                 return std::vector<Shape>{{in[1][0], in[0][1]}};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             return std::vector<NDArray>{
                 embedding_shard(in[0], in[1], 0, in[0].shape()[0])};
         }});

    add({.kind = "core.embedding_shard",
         .min_inputs = 2,
         .max_inputs = 2,
         .attrs = {{"start"}, {"end"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore& cs) {
                 require_rank(in[0], 2, "embedding_shard table");
                 require_rank(in[1], 1, "embedding_shard indices");
                 DimExpr span = attr_dim(attrs, "end") - attr_dim(attrs, "start");
                 require_dim_eq(span, in[0][0], cs, "embedding_shard");
                 return std::vector<Shape>{{in[1][0], in[0][1]}};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             return std::vector<NDArray>{embedding_shard(in[0], in[1],
                                                         attr_eval_int(attrs, "start", env),
                                                         attr_eval_int(attrs, "end", env))};
         }});

    add({.kind = "core.mse_loss",
         .min_inputs = 2,
         .max_inputs = 2,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                 require_same_shape(in, cs, "mse_loss");
                 return std::vector<Shape>{Shape{}};
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             double acc = 0;
             for (std::int64_t i = 0; i < in[0].size(); i++) {
                 double d = in[0].data()[i] - in[1].data()[i];
                 acc += d * d;
             }
             return std::vector<NDArray>{NDArray({}, {acc / in[0].size()})};
         }});

    auto scalar_op = [&](const std::string& kind, bool is_div) {
        add({.kind = kind,
             .attrs = {{"value"}},
             .infer =
                 [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore&) {
                     attr_dim(attrs, "value");
                     return std::vector<Shape>{in[0]};
                 },
             .eval = [is_div](const std::vector<NDArray>& in, const Attrs& attrs,
                              const DimEnv& env) {
                 double v = static_cast<double>(attr_eval_int(attrs, "value", env));
                 if (is_div && v == 0) throw EvalError("div_scalar by zero");
                 return std::vector<NDArray>{
                     in[0].map([v, is_div](double x) { return is_div ? x / v : x * v; })};
             }});
    };
    scalar_op("core.div_scalar", true);
    scalar_op("core.mul_scalar", false);

    add({.kind = "core.all_reduce",
         .min_inputs = 1,
         .max_inputs = -1,
         .num_outputs = -1,
         .infer =
             [](const std::vector<Shape>& in, const Attrs&, const ConstraintStore& cs) {
                 require_same_shape(in, cs, "all_reduce");
                 return std::vector<Shape>(in.size(), in[0]);
             },
         .expand =
             [](int, const std::vector<Expr::Ptr>& inputs, const std::vector<Shape>&,
                const Attrs&) {
                 if (inputs.size() == 1) return inputs[0];
                 return Expr::apply("core.sum", inputs);
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
             NDArray s = ew_sum(in);
             return std::vector<NDArray>(in.size(), s);
         }});

    add({.kind = "core.all_gather",
         .min_inputs = 1,
         .max_inputs = -1,
         .num_outputs = -1,
         .attrs = {{"dim"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore& cs) {
                 std::int64_t dim = check_axis(attrs, "dim", in[0], "all_gather");
                 Shape out = in[0];
                 for (size_t i = 1; i < in.size(); i++) {
                     for (size_t d = 0; d < in[0].size(); d++)
                         if (static_cast<std::int64_t>(d) != dim)
                             require_dim_eq(in[i][d], in[0][d], cs, "all_gather");
                     out[dim] = out[dim] + in[i][dim];
                 }
                 return std::vector<Shape>(in.size(), out);
             },
         .expand =
             [](int, const std::vector<Expr::Ptr>& inputs, const std::vector<Shape>&,
                const Attrs& attrs) {
                 if (inputs.size() == 1) return inputs[0];
                 return Expr::apply("core.concat", inputs, {{"dim", attr_dim(attrs, "dim")}});
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             NDArray g = NDArray::concat(in, attr_eval_int(attrs, "dim", env));
             return std::vector<NDArray>(in.size(), g);
         }});

    add({.kind = "core.reduce_scatter",
         .min_inputs = 1,
         .max_inputs = -1,
         .num_outputs = -1,
         .attrs = {{"dim"}},
         .infer =
             [](const std::vector<Shape>& in, const Attrs& attrs, const ConstraintStore& cs) {
                 std::int64_t dim = check_axis(attrs, "dim", in[0], "reduce_scatter");
                 require_same_shape(in, cs, "reduce_scatter");
                 auto n = static_cast<std::int64_t>(in.size());
                 if (!in[0][dim].divisible_by(n))
                     throw ShapeError("reduce_scatter: " + in[0][dim].str() +
                                      " not divisible by " + std::to_string(n));
                 Shape out = in[0];
                 out[dim] = out[dim].divided_by(n);
                 return std::vector<Shape>(in.size(), out);
             },
         .expand =
             [](int out_idx, const std::vector<Expr::Ptr>& inputs,
                const std::vector<Shape>& shapes, const Attrs& attrs) {
                 std::int64_t dim = attr_concrete_int(attrs, "dim");
                 auto n = static_cast<std::int64_t>(inputs.size());
                 DimExpr chunk = shapes[0][dim].divided_by(n);
                 Expr::Ptr total =
                     inputs.size() == 1 ? inputs[0] : Expr::apply("core.sum", inputs);
                 return Expr::apply("core.slice", {total},
                                    {{"dim", DimExpr(dim)},
                                     {"start", chunk * out_idx},
                                     {"end", chunk * (out_idx + 1)}});
             },
         .eval = [](const std::vector<NDArray>& in, const Attrs& attrs, const DimEnv& env) {
             std::int64_t dim = attr_eval_int(attrs, "dim", env);
             NDArray s = ew_sum(in);
             auto n = static_cast<std::int64_t>(in.size());
             std::int64_t chunk = s.shape()[dim] / n;
             std::vector<NDArray> out;
             for (std::int64_t j = 0; j < n; j++)
                 out.push_back(s.slice(dim, j * chunk, (j + 1) * chunk));
             return out;
         }});
}

} // namespace

OpRegistry::OpRegistry() { install_builtins(ops_); }

OpRegistry& OpRegistry::instance() {
    static OpRegistry reg;
    return reg;
}

void OpRegistry::register_op(OpSchema schema) {
    if (ops_.count(schema.kind)) throw DuplicateName("op already registered: " + schema.kind);
    ops_.emplace(schema.kind, std::move(schema));
}

const OpSchema* OpRegistry::find(const std::string& kind) const {
    auto it = ops_.find(kind);
    return it == ops_.end() ? nullptr : &it->second;
}

const OpSchema& OpRegistry::get(const std::string& kind) const {
    const OpSchema* s = find(kind);
    if (!s) throw ValidationError("unregistered op kind: " + kind);
    return *s;
}

std::vector<std::string> OpRegistry::kinds() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : ops_) out.push_back(k);
    return out;
}

Expr::Ptr node_output_expr(const std::string& op_kind, int out_idx,
                           const std::vector<Expr::Ptr>& inputs,
                           const std::vector<Shape>& input_shapes, const Attrs& attrs) {
    const OpSchema& schema = OpRegistry::instance().get(op_kind);
    if (schema.expand) return schema.expand(out_idx, inputs, input_shapes, attrs);
    if (out_idx != 0) throw ValidationError(op_kind + ": single-output op, output index " +
                                            std::to_string(out_idx));
    return Expr::apply(op_kind, inputs, attrs);
}

Shape infer_expr_shape(const Expr::Ptr& e, const ShapeResolver& resolver,
                       const ConstraintStore& cs) {
    switch (e->kind) {
        case Expr::Kind::TensorRef: {
            auto s = resolver(e->op);
            if (!s) throw ShapeError("unknown tensor in expression: " + e->op);
            return *s;
        }
        case Expr::Kind::ScalarRef: return {};
        case Expr::Kind::Apply: {
            std::vector<Shape> kids;
            kids.reserve(e->children.size());
            for (const auto& c : e->children) kids.push_back(infer_expr_shape(c, resolver, cs));
            const OpSchema& schema = OpRegistry::instance().get(e->op);
            auto out = schema.infer(kids, e->attrs, cs);
            return out.at(0);
        }
    }
    throw ShapeError("unreachable");
}

std::optional<Shape> try_infer_expr_shape(const Expr::Ptr& e, const ShapeResolver& resolver,
                                          const ConstraintStore& cs) {
    try {
        return infer_expr_shape(e, resolver, cs);
    } catch (const Error&) {
        return std::nullopt;
    }
}

} // namespace refinery
