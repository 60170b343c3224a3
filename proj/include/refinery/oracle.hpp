// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "refinery/graph.hpp"
#include "refinery/ndarray.hpp"

namespace refinery {

/// Concrete inputs for a graph evaluation: tensor values plus an assignment
/// for symbolic dims.
struct Binding {
    std::map<std::string, NDArray> tensors;
    DimEnv dims;
};

/// Reference interpreter: evaluates every tensor of the graph in topological
/// order using each op's registered reference semantics. EvalError if an op
/// has no reference implementation or an input is unbound.
std::map<std::string, NDArray> eval_graph(const ComputationGraph& g, const Binding& b);

/// Evaluates an expression over given tensor values.
NDArray eval_expr(const Expr::Ptr& e, const std::map<std::string, NDArray>& values,
                  const DimEnv& dims = {});

/// Deterministic input sampling: float tensors ~N(0,1), integer tensors
/// uniform in [0, 4), per-tensor streams derived from `seed`.
std::map<std::string, NDArray> sample_inputs(const ComputationGraph& g, std::uint64_t seed,
                                             const DimEnv& dims = {});

/// Derives destination-graph inputs from source input values through the
/// input relation (inverting its clean expressions). Inputs the relation does
/// not determine are filled from a seeded stream. EvalError when an entry is
/// not invertible or entries conflict.
std::map<std::string, NDArray> derive_dest_inputs(const ComputationGraph& gd, const Relation& ri,
                                                  const std::map<std::string, NDArray>& src_values,
                                                  std::uint64_t seed, const DimEnv& dims = {});

struct ReconstructionResult {
    bool ok = true;
    double max_dev = 0; // worst |a-b| / (atol + rtol|b|)
    std::string detail;
};

/// For each seed: sample source inputs, derive destination inputs via `ri`,
/// evaluate both graphs, evaluate every `ro` entry over the destination
/// outputs, and compare against the source outputs.
ReconstructionResult check_reconstruction(const ComputationGraph& gs, const ComputationGraph& gd,
                                          const Relation& ri, const Relation& ro,
                                          const std::vector<std::uint64_t>& seeds,
                                          double rel_tol = 1e-5, double abs_tol = 1e-8,
                                          const DimEnv& dims = {});

} // namespace refinery
