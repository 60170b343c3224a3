// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "refinery/ops.hpp"

namespace refinery {

struct TensorDecl {
    std::string id;
    Shape shape;
    DType dtype = DType::F32;
};

struct OpNode {
    std::string id;
    std::string op_kind;
    Attrs attrs;
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

/// Validated, immutable computation graph: operator nodes over declared
/// tensors, with graph inputs/outputs and symbolic dim constraints.
/// Safe to share across threads once constructed.
class ComputationGraph {
public:
    /// Parses and validates the JSON document form. SchemaError for malformed
    /// documents, ValidationError / CycleError / ShapeError for bad graphs.
    static ComputationGraph from_json(const nlohmann::json& doc);
    static ComputationGraph from_text(std::string_view text);
    static ComputationGraph from_file(const std::string& path);

    nlohmann::ordered_json to_json() const;

    const std::vector<TensorDecl>& tensors() const { return tensors_; }
    const std::vector<OpNode>& nodes() const { return nodes_; }
    const std::vector<std::string>& inputs() const { return inputs_; }
    const std::vector<std::string>& outputs() const { return outputs_; }
    const ConstraintStore& constraints() const { return constraints_; }

    const TensorDecl* find_tensor(const std::string& id) const;
    const TensorDecl& tensor(const std::string& id) const; // ValidationError
    /// Node producing this tensor, nullptr for graph inputs.
    const OpNode* producer(const std::string& tensor_id) const;
    const OpNode* find_node(const std::string& node_id) const;
    bool is_input(const std::string& tensor_id) const;
    bool is_output(const std::string& tensor_id) const;

    /// Dependency-respecting node order, deterministic (declaration order
    /// breaks ties). Computed during validation.
    const std::vector<const OpNode*>& topo_order() const { return topo_; }

    /// Re-derives every tensor's shape from producers and checks it against
    /// the declarations. ShapeError names the offending node.
    std::map<std::string, Shape> infer_shapes() const;

private:
    std::vector<TensorDecl> tensors_;
    std::vector<OpNode> nodes_;
    std::vector<std::string> inputs_;
    std::vector<std::string> outputs_;
    ConstraintStore constraints_;
    std::vector<std::string> constraint_lines_;

    std::map<std::string, size_t> tensor_index_;
    std::map<std::string, size_t> node_index_;
    std::map<std::string, size_t> producer_index_;
    std::vector<const OpNode*> topo_;

    void validate();
    void compute_topo();
};

} // namespace refinery
