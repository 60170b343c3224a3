// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/graph.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "refinery/errors.hpp"

namespace refinery {

namespace {

DimExpr dim_from_json(const nlohmann::json& j) {
    if (j.is_number_integer()) return DimExpr(j.get<std::int64_t>());
    if (j.is_string()) return DimExpr::parse(j.get<std::string>());
    throw SchemaError("shape entry must be an integer or an affine string");
}

nlohmann::ordered_json dim_to_json(const DimExpr& d) {
    if (d.is_concrete()) return d.value();
    return d.str();
}

AttrValue attr_from_json(const nlohmann::json& j, AttrSpec::Kind kind) {
    switch (kind) {
        case AttrSpec::Kind::Dim: return dim_from_json(j);
        case AttrSpec::Kind::DimList: {
            if (!j.is_array()) throw SchemaError("list attribute must be a JSON array");
            std::vector<DimExpr> out;
            for (const auto& item : j) out.push_back(dim_from_json(item));
            return out;
        }
        case AttrSpec::Kind::String:
            if (!j.is_string()) throw SchemaError("string attribute must be a JSON string");
            return j.get<std::string>();
    }
    throw SchemaError("unreachable attr kind");
}

nlohmann::ordered_json attr_to_json(const AttrValue& v) {
    if (const auto* d = std::get_if<DimExpr>(&v)) return dim_to_json(*d);
    if (const auto* l = std::get_if<std::vector<DimExpr>>(&v)) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& d : *l) arr.push_back(dim_to_json(d));
        return arr;
    }
    return std::get<std::string>(v);
}

} // namespace

ComputationGraph ComputationGraph::from_text(std::string_view text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("invalid graph JSON: ") + e.what());
    }
    return from_json(doc);
}

ComputationGraph ComputationGraph::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw SchemaError("cannot open graph file: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_text(ss.str());
}

ComputationGraph ComputationGraph::from_json(const nlohmann::json& doc) {
    if (!doc.is_object()) throw SchemaError("graph document must be a JSON object");
    for (const char* key : {"tensors", "nodes", "inputs", "outputs"})
        if (!doc.contains(key)) throw SchemaError(std::string("graph document missing '") + key + "'");

    ComputationGraph g;
    try {
        for (const auto& t : doc.at("tensors")) {
            TensorDecl decl;
            decl.id = t.at("id").get<std::string>();
            for (const auto& d : t.at("shape")) decl.shape.push_back(dim_from_json(d));
            decl.dtype = dtype_from_string(t.value("dtype", "f32"));
            g.tensors_.push_back(std::move(decl));
        }
        for (const auto& n : doc.at("nodes")) {
            OpNode node;
            node.id = n.at("id").get<std::string>();
            node.op_kind = n.at("op").get<std::string>();
            const OpSchema* schema = OpRegistry::instance().find(node.op_kind);
            if (!schema)
                throw ValidationError("node '" + node.id + "': unregistered op kind '" +
                                      node.op_kind + "'");
            if (n.contains("attrs")) {
                for (const auto& [name, value] : n.at("attrs").items()) {
                    auto spec = std::find_if(schema->attrs.begin(), schema->attrs.end(),
                                             [&](const AttrSpec& s) { return s.name == name; });
                    AttrSpec::Kind kind =
                        spec == schema->attrs.end() ? AttrSpec::Kind::Dim : spec->kind;
                    node.attrs.emplace_back(name, attr_from_json(value, kind));
                }
                node.attrs = order_attrs(node.op_kind, std::move(node.attrs));
            }
            node.inputs = n.value("inputs", std::vector<std::string>{});
            node.outputs = n.value("outputs", std::vector<std::string>{});
            g.nodes_.push_back(std::move(node));
        }
        g.inputs_ = doc.at("inputs").get<std::vector<std::string>>();
        g.outputs_ = doc.at("outputs").get<std::vector<std::string>>();
        if (doc.contains("dim_constraints")) {
            for (const auto& line : doc.at("dim_constraints")) {
                g.constraint_lines_.push_back(line.get<std::string>());
                g.constraints_.add_line(g.constraint_lines_.back());
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed graph document: ") + e.what());
    }
    g.validate();
    return g;
}

void ComputationGraph::validate() {
    for (size_t i = 0; i < tensors_.size(); i++) {
        if (!tensor_index_.emplace(tensors_[i].id, i).second)
            throw ValidationError("duplicate tensor id '" + tensors_[i].id + "'");
    }
    std::set<std::string> input_set(inputs_.begin(), inputs_.end());

    for (size_t i = 0; i < nodes_.size(); i++) {
        const OpNode& n = nodes_[i];
        if (!node_index_.emplace(n.id, i).second)
            throw ValidationError("duplicate node id '" + n.id + "'");
        const OpSchema& schema = OpRegistry::instance().get(n.op_kind);
        auto arity = static_cast<int>(n.inputs.size());
        if (arity < schema.min_inputs || (schema.max_inputs != -1 && arity > schema.max_inputs))
            throw ValidationError("node '" + n.id + "': " + n.op_kind + " does not take " +
                                  std::to_string(arity) + " inputs");
        if (static_cast<int>(n.outputs.size()) != schema.outputs_for(arity))
            throw ValidationError("node '" + n.id + "': " + n.op_kind + " produces " +
                                  std::to_string(schema.outputs_for(arity)) + " outputs, got " +
                                  std::to_string(n.outputs.size()));
        validate_attrs(schema, n.attrs, "node '" + n.id + "'");
        for (const auto& t : n.inputs)
            if (!tensor_index_.count(t))
                throw ValidationError("node '" + n.id + "' references undeclared tensor '" + t +
                                      "'");
        for (const auto& t : n.outputs) {
            if (!tensor_index_.count(t))
                throw ValidationError("node '" + n.id + "' references undeclared tensor '" + t +
                                      "'");
            if (input_set.count(t))
                throw ValidationError("graph input '" + t + "' is produced by node '" + n.id +
                                      "'");
            if (!producer_index_.emplace(t, i).second)
                throw ValidationError("tensor '" + t + "' has more than one producer");
        }
    }
    for (const auto& t : inputs_)
        if (!tensor_index_.count(t))
            throw ValidationError("graph input '" + t + "' is not declared");
    for (const auto& t : outputs_)
        if (!tensor_index_.count(t))
            throw ValidationError("graph output '" + t + "' is not declared");
    for (const auto& t : tensors_) {
        if (!input_set.count(t.id) && !producer_index_.count(t.id)) {
            // Tensors that are neither inputs nor produced are only legal as
            // never-consumed declarations if some graph marks them inputs;
            // require full coverage.
            bool consumed = false;
            for (const auto& n : nodes_)
                for (const auto& in : n.inputs) consumed |= in == t.id;
            bool is_out = std::find(outputs_.begin(), outputs_.end(), t.id) != outputs_.end();
            if (consumed || is_out)
                throw ValidationError("tensor '" + t.id +
                                      "' is consumed or exported but never produced and is not a "
                                      "graph input");
        }
        for (const auto& d : t.shape) {
            if (d.is_concrete() && d.value() < 0)
                throw ValidationError("tensor '" + t.id + "' has negative dimension");
        }
    }
    compute_topo();
    infer_shapes();
}

void ComputationGraph::compute_topo() {
    // Kahn's algorithm; the ready queue is kept in declaration order so the
    // result is stable under re-parse.
    std::vector<int> pending(nodes_.size(), 0);
    std::map<size_t, std::vector<size_t>> dependents;
    for (size_t i = 0; i < nodes_.size(); i++) {
        std::set<size_t> deps;
        for (const auto& t : nodes_[i].inputs) {
            auto it = producer_index_.find(t);
            if (it != producer_index_.end() && it->second != i) deps.insert(it->second);
        }
        pending[i] = static_cast<int>(deps.size());
        for (size_t d : deps) dependents[d].push_back(i);
    }
    std::set<size_t> ready;
    for (size_t i = 0; i < nodes_.size(); i++)
        if (pending[i] == 0) ready.insert(i);
    while (!ready.empty()) {
        size_t i = *ready.begin();
        ready.erase(ready.begin());
        topo_.push_back(&nodes_[i]);
        for (size_t d : dependents[i])
            if (--pending[d] == 0) ready.insert(d);
    }
    if (topo_.size() != nodes_.size()) {
        // Walk one cycle for the report.
        std::vector<std::string> cycle;
        std::set<size_t> stuck;
        for (size_t i = 0; i < nodes_.size(); i++)
            if (pending[i] > 0) stuck.insert(i);
        size_t cur = *stuck.begin();
        std::set<size_t> seen;
        while (seen.insert(cur).second) {
            cycle.push_back(nodes_[cur].id);
            for (const auto& t : nodes_[cur].inputs) {
                auto it = producer_index_.find(t);
                if (it != producer_index_.end() && stuck.count(it->second)) {
                    cur = it->second;
                    break;
                }
            }
        }
        throw CycleError("graph contains a cycle through: " + cycle.front(), cycle);
    }
}

std::map<std::string, Shape> ComputationGraph::infer_shapes() const {
    std::map<std::string, Shape> shapes;
    for (const auto& t : inputs_) shapes[t] = tensor(t).shape;
    // Unproduced, unconsumed declarations keep their declared shapes.
    for (const auto& t : tensors_)
        if (!producer_index_.count(t.id)) shapes[t.id] = t.shape;
    for (const OpNode* n : topo_) {
        const OpSchema& schema = OpRegistry::instance().get(n->op_kind);
        std::vector<Shape> in_shapes;
        for (const auto& t : n->inputs) in_shapes.push_back(shapes.at(t));
        std::vector<Shape> out_shapes;
        try {
            out_shapes = schema.infer(in_shapes, n->attrs, constraints_);
        } catch (const ShapeError& e) {
            throw ShapeError("node '" + n->id + "': " + e.what());
        }
        if (out_shapes.size() != n->outputs.size())
            throw ShapeError("node '" + n->id + "': shape rule produced " +
                             std::to_string(out_shapes.size()) + " outputs");
        for (size_t j = 0; j < n->outputs.size(); j++) {
            const Shape& declared = tensor(n->outputs[j]).shape;
            const Shape& computed = out_shapes[j];
            if (declared.size() != computed.size())
                throw ShapeError("node '" + n->id + "': output '" + n->outputs[j] +
                                 "' declared " + shape_str(declared) + " but computes " +
                                 shape_str(computed));
            for (size_t d = 0; d < declared.size(); d++)
                if (decide_cmp(declared[d], computed[d], CmpRel::Eq, constraints_) ==
                    Tristate::False)
                    throw ShapeError("node '" + n->id + "': output '" + n->outputs[j] +
                                     "' declared " + shape_str(declared) + " but computes " +
                                     shape_str(computed));
            shapes[n->outputs[j]] = computed;
        }
    }
    return shapes;
}

const TensorDecl* ComputationGraph::find_tensor(const std::string& id) const {
    auto it = tensor_index_.find(id);
    return it == tensor_index_.end() ? nullptr : &tensors_[it->second];
}

const TensorDecl& ComputationGraph::tensor(const std::string& id) const {
    const TensorDecl* t = find_tensor(id);
    if (!t) throw ValidationError("unknown tensor '" + id + "'");
    return *t;
}

const OpNode* ComputationGraph::producer(const std::string& tensor_id) const {
    auto it = producer_index_.find(tensor_id);
    return it == producer_index_.end() ? nullptr : &nodes_[it->second];
}

const OpNode* ComputationGraph::find_node(const std::string& node_id) const {
    auto it = node_index_.find(node_id);
    return it == node_index_.end() ? nullptr : &nodes_[it->second];
}

bool ComputationGraph::is_input(const std::string& tensor_id) const {
    return std::find(inputs_.begin(), inputs_.end(), tensor_id) != inputs_.end();
}

bool ComputationGraph::is_output(const std::string& tensor_id) const {
    return std::find(outputs_.begin(), outputs_.end(), tensor_id) != outputs_.end();
}

nlohmann::ordered_json ComputationGraph::to_json() const {
    nlohmann::ordered_json doc;
    doc["tensors"] = nlohmann::ordered_json::array();
    for (const auto& t : tensors_) {
        nlohmann::ordered_json jt;
        jt["id"] = t.id;
        nlohmann::ordered_json shape = nlohmann::ordered_json::array();
        for (const auto& d : t.shape) shape.push_back(dim_to_json(d));
        jt["shape"] = shape;
        jt["dtype"] = dtype_to_string(t.dtype);
        doc["tensors"].push_back(jt);
    }
    doc["nodes"] = nlohmann::ordered_json::array();
    for (const auto& n : nodes_) {
        nlohmann::ordered_json jn;
        jn["id"] = n.id;
        jn["op"] = n.op_kind;
        if (!n.attrs.empty()) {
            nlohmann::ordered_json attrs;
            for (const auto& [k, v] : n.attrs) attrs[k] = attr_to_json(v);
            jn["attrs"] = attrs;
        }
        jn["inputs"] = n.inputs;
        jn["outputs"] = n.outputs;
        doc["nodes"].push_back(jn);
    }
    doc["inputs"] = inputs_;
    doc["outputs"] = outputs_;
    doc["dim_constraints"] = constraint_lines_;
    return doc;
}

} // namespace refinery
