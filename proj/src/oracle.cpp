// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/oracle.hpp"

#include <algorithm>
#include <functional>

#include "refinery/errors.hpp"

namespace refinery {

namespace {

std::vector<std::int64_t> resolve_shape(const Shape& shape, const DimEnv& dims,
                                        const std::string& ctx) {
    std::vector<std::int64_t> out;
    for (const auto& d : shape) {
        auto v = d.eval(dims);
        if (!v) throw EvalError(ctx + ": unresolved symbolic dim " + d.str());
        out.push_back(*v);
    }
    return out;
}

std::uint64_t mix_seed(std::uint64_t seed, const std::string& name) {
    std::uint64_t h = seed ^ 0x9e3779b97f4a7c15ull;
    for (char c : name) h = (h ^ static_cast<std::uint64_t>(c)) * 0x100000001b3ull;
    return h;
}

} // namespace

std::map<std::string, NDArray> eval_graph(const ComputationGraph& g, const Binding& b) {
    std::map<std::string, NDArray> values;
    for (const auto& id : g.inputs()) {
        auto it = b.tensors.find(id);
        if (it == b.tensors.end()) throw EvalError("graph input '" + id + "' is unbound");
        values.emplace(id, it->second);
    }
    // Declared-but-unproduced tensors may be bound too (constants).
    for (const auto& [id, v] : b.tensors) values.emplace(id, v);

    for (const OpNode* n : g.topo_order()) {
        const OpSchema& schema = OpRegistry::instance().get(n->op_kind);
        if (!schema.eval)
            throw EvalError("op '" + n->op_kind + "' has no reference semantics (node '" +
                            n->id + "')");
        std::vector<NDArray> inputs;
        for (const auto& t : n->inputs) inputs.push_back(values.at(t));
        std::vector<NDArray> outputs;
        try {
            outputs = schema.eval(inputs, n->attrs, b.dims);
        } catch (const EvalError& e) {
            throw EvalError("node '" + n->id + "': " + e.what());
        }
        if (outputs.size() != n->outputs.size())
            throw EvalError("node '" + n->id + "': reference semantics produced " +
                            std::to_string(outputs.size()) + " outputs");
        for (size_t j = 0; j < outputs.size(); j++)
            values.insert_or_assign(n->outputs[j], std::move(outputs[j]));
    }
    return values;
}

NDArray eval_expr(const Expr::Ptr& e, const std::map<std::string, NDArray>& values,
                  const DimEnv& dims) {
    switch (e->kind) {
        case Expr::Kind::TensorRef: {
            auto it = values.find(e->op);
            if (it == values.end()) throw EvalError("unbound tensor '" + e->op + "' in expression");
            return it->second;
        }
        case Expr::Kind::ScalarRef: {
            auto v = e->scalar.eval(dims);
            if (!v) throw EvalError("unresolved symbolic scalar " + e->scalar.str());
            return NDArray({}, {static_cast<double>(*v)});
        }
        case Expr::Kind::Apply: {
            const OpSchema& schema = OpRegistry::instance().get(e->op);
            if (!schema.eval) throw EvalError("op '" + e->op + "' has no reference semantics");
            std::vector<NDArray> inputs;
            for (const auto& c : e->children) inputs.push_back(eval_expr(c, values, dims));
            auto out = schema.eval(inputs, e->attrs, dims);
            if (out.size() != 1)
                throw EvalError("op '" + e->op + "' is multi-output and cannot appear in an "
                                "expression");
            return out[0];
        }
    }
    throw EvalError("unreachable expr kind");
}

std::map<std::string, NDArray> sample_inputs(const ComputationGraph& g, std::uint64_t seed,
                                             const DimEnv& dims) {
    std::map<std::string, NDArray> out;
    for (const auto& id : g.inputs()) {
        const TensorDecl& decl = g.tensor(id);
        auto shape = resolve_shape(decl.shape, dims, "input '" + id + "'");
        std::mt19937_64 rng(mix_seed(seed, id));
        if (decl.dtype == DType::I64)
            out.emplace(id, NDArray::random_ints(shape, 0, 4, rng));
        else if (decl.dtype == DType::Bool)
            out.emplace(id, NDArray::random_ints(shape, 0, 2, rng));
        else
            out.emplace(id, NDArray::random_normal(shape, rng));
    }
    return out;
}

namespace {

struct InverseBuffer {
    NDArray value;
    std::vector<bool> defined;
};

// Writes `value` as the solution of `expr == value`, decomposing clean
// structure. Only slice-of-a-tensor-ref supports partial regions.
void invert_define(const Expr::Ptr& expr, const NDArray& value,
                   std::map<std::string, InverseBuffer>& bufs, const ComputationGraph& gd,
                   const DimEnv& dims) {
    if (expr->is_scalar()) throw EvalError("input relation maps a tensor to a scalar");
    if (expr->is_tensor()) {
        auto it = bufs.find(expr->op);
        if (it == bufs.end())
            throw EvalError("input relation references non-input tensor '" + expr->op + "'");
        InverseBuffer& buf = it->second;
        if (buf.value.shape() != value.shape())
            throw EvalError("input relation shape mismatch for '" + expr->op + "'");
        for (std::int64_t i = 0; i < value.size(); i++) {
            if (buf.defined[i] && std::abs(buf.value.data()[i] - value.data()[i]) > 1e-9)
                throw EvalError("inconsistent input relation for '" + expr->op + "'");
            buf.value.data()[i] = value.data()[i];
            buf.defined[i] = true;
        }
        return;
    }
    const std::string& op = expr->op;
    if (op == "core.identity" || (op == "core.sum" && expr->children.size() == 1)) {
        invert_define(expr->children[0], value, bufs, gd, dims);
        return;
    }
    if (op == "core.concat") {
        std::int64_t dim = attr_eval_int(expr->attrs, "dim", dims);
        std::int64_t off = 0;
        for (const auto& c : expr->children) {
            Shape cshape = infer_expr_shape(
                c, [&](const std::string& id) -> std::optional<Shape> {
                    const TensorDecl* t = gd.find_tensor(id);
                    if (!t) return std::nullopt;
                    return t->shape;
                },
                gd.constraints());
            auto concrete = resolve_shape(cshape, dims, "input relation concat");
            invert_define(c, value.slice(dim, off, off + concrete[dim]), bufs, gd, dims);
            off += concrete[dim];
        }
        return;
    }
    if (op == "core.transpose") {
        std::int64_t d0 = attr_eval_int(expr->attrs, "dim0", dims);
        std::int64_t d1 = attr_eval_int(expr->attrs, "dim1", dims);
        invert_define(expr->children[0], value.transpose(d0, d1), bufs, gd, dims);
        return;
    }
    if (op == "core.reshape") {
        // Child shape = whatever the child resolves to.
        Shape cshape = infer_expr_shape(
            expr->children[0],
            [&](const std::string& id) -> std::optional<Shape> {
                const TensorDecl* t = gd.find_tensor(id);
                if (!t) return std::nullopt;
                return t->shape;
            },
            gd.constraints());
        invert_define(expr->children[0],
                      value.reshape(resolve_shape(cshape, dims, "input relation reshape")), bufs,
                      gd, dims);
        return;
    }
    if (op == "core.slice" && expr->children[0]->is_tensor()) {
        const std::string& id = expr->children[0]->op;
        auto it = bufs.find(id);
        if (it == bufs.end())
            throw EvalError("input relation references non-input tensor '" + id + "'");
        std::int64_t dim = attr_eval_int(expr->attrs, "dim", dims);
        std::int64_t start = attr_eval_int(expr->attrs, "start", dims);
        InverseBuffer& buf = it->second;
        NDArray region = buf.value;
        region.assign_slice(dim, start, value);
        // Mark the written region defined.
        NDArray marker = NDArray::zeros(buf.value.shape());
        marker.assign_slice(dim, start, NDArray::full(value.shape(), 1.0));
        for (std::int64_t i = 0; i < marker.size(); i++) {
            if (marker.data()[i] == 0.0) continue;
            if (buf.defined[i] && std::abs(buf.value.data()[i] - region.data()[i]) > 1e-9)
                throw EvalError("inconsistent input relation for '" + id + "'");
            buf.value.data()[i] = region.data()[i];
            buf.defined[i] = true;
        }
        return;
    }
    throw EvalError("input relation expression is not invertible: " + canonical_print(expr));
}

} // namespace

std::map<std::string, NDArray> derive_dest_inputs(const ComputationGraph& gd, const Relation& ri,
                                                  const std::map<std::string, NDArray>& src_values,
                                                  std::uint64_t seed, const DimEnv& dims) {
    std::map<std::string, InverseBuffer> bufs;
    for (const auto& id : gd.inputs()) {
        auto shape = resolve_shape(gd.tensor(id).shape, dims, "dest input '" + id + "'");
        NDArray z = NDArray::zeros(shape);
        bufs.emplace(id, InverseBuffer{z, std::vector<bool>(z.size(), false)});
    }
    for (const auto& entry : ri.entries()) {
        auto it = src_values.find(entry.target);
        if (it == src_values.end())
            throw EvalError("input relation targets unknown source tensor '" + entry.target + "'");
        invert_define(entry.expr, it->second, bufs, gd, dims);
    }
    std::map<std::string, NDArray> out;
    for (auto& [id, buf] : bufs) {
        bool any_undefined = std::any_of(buf.defined.begin(), buf.defined.end(),
                                         [](bool d) { return !d; });
        if (any_undefined) {
            // Free inputs: fill from a seeded stream.
            std::mt19937_64 rng(mix_seed(seed ^ 0x5bf03635ull, id));
            const TensorDecl& decl = gd.tensor(id);
            NDArray fill = decl.dtype == DType::I64
                               ? NDArray::random_ints(buf.value.shape(), 0, 4, rng)
                               : NDArray::random_normal(buf.value.shape(), rng);
            for (std::int64_t i = 0; i < buf.value.size(); i++)
                if (!buf.defined[i]) buf.value.data()[i] = fill.data()[i];
        }
        out.emplace(id, std::move(buf.value));
    }
    return out;
}

ReconstructionResult check_reconstruction(const ComputationGraph& gs, const ComputationGraph& gd,
                                          const Relation& ri, const Relation& ro,
                                          const std::vector<std::uint64_t>& seeds, double rel_tol,
                                          double abs_tol, const DimEnv& dims) {
    ReconstructionResult res;
    for (std::uint64_t seed : seeds) {
        auto src = sample_inputs(gs, seed, dims);
        auto dst = derive_dest_inputs(gd, ri, src, seed, dims);
        auto src_vals = eval_graph(gs, Binding{src, dims});
        auto dst_vals = eval_graph(gd, Binding{dst, dims});
        std::map<std::string, NDArray> dst_outputs;
        for (const auto& id : gd.outputs()) dst_outputs.emplace(id, dst_vals.at(id));

        for (const auto& entry : ro.entries()) {
            auto it = src_vals.find(entry.target);
            if (it == src_vals.end()) {
                res.ok = false;
                res.detail = "relation targets unknown tensor '" + entry.target + "'";
                return res;
            }
            NDArray recon = eval_expr(entry.expr, dst_outputs, dims);
            double dev = 0;
            bool ok = allclose(recon, it->second, rel_tol, abs_tol, &dev);
            res.max_dev = std::max(res.max_dev, dev);
            if (!ok) {
                res.ok = false;
                res.detail = "seed " + std::to_string(seed) + ": '" + entry.target +
                             "' deviates (normalized " + std::to_string(dev) + ") via " +
                             canonical_print(entry.expr);
                return res;
            }
        }
    }
    return res;
}

} // namespace refinery
