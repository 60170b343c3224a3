// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refinery/graph.hpp"
#include "refinery/lemma.hpp"

namespace refinery {

struct CheckConfig {
    CleanOpSet clean_ops = CleanOpSet::defaults();
    SaturationBudget budget;
    enum class Mode { Optimized, Exhaustive } mode = Mode::Optimized;
    bool record_stats = true;
    bool prune = true;
    size_t exhaustive_cap = 2000; // node-count ceiling for exhaustive mode
    ExtractLimits extract;
    std::string solver_cmd;
    /// Lemmas to use; empty means the full registry at call time.
    std::vector<Lemma> lemmas;
};

/// Expressions known equivalent to an operator output, with the origin of
/// each (base expression, lemma name, or frontier tensor).
struct CandidateSet {
    struct Entry {
        Expr::Ptr expr;
        std::string provenance;
    };
    std::vector<Entry> entries;
};

/// Destination-graph exploration per the single-operator frontier discipline:
/// t_rel only grows, explored frontier entries are never reissued. `reached`
/// additionally tracks forward-closure reachability for the checker's
/// multi-operator exploration.
struct ExplorationState {
    std::set<std::string> t_rel;
    std::set<std::pair<std::string, std::string>> r_explored; // (tensor, expr print)
    Relation frontier;
    std::set<std::string> reached;
};

/// Admits destination tensors referenced by `newly_clean` into t_rel, then
/// returns the next frontier: one mapping per output of every node whose
/// inputs all lie in t_rel, minus everything already explored.
Relation explore_step(ExplorationState& st, const ComputationGraph& gd,
                      const CandidateSet& newly_clean);

struct NodeFailure {
    std::string node_id;
    std::vector<std::string> unmapped_outputs;
    Relation input_relation; // the R slice for this node's inputs
    std::vector<std::string> nearest_unclean;
    std::vector<std::string> candidate_provenance;
    size_t candidate_count = 0;
    std::string note;
};

struct CertEntry {
    std::string target;
    std::string expr; // simplicity-minimal mapping, canonical print
    std::vector<std::string> alternates;
};

struct CheckReport {
    enum class Verdict { Refines, RefinementError };
    Verdict verdict = Verdict::Refines;
    bool budget_warning = false;
    std::vector<CertEntry> certificate;
    std::optional<NodeFailure> failure;
    std::map<std::string, std::uint64_t> lemma_stats;
    std::vector<std::pair<std::string, double>> node_timings_ms;
    double total_ms = 0;
    std::map<std::string, std::vector<std::string>> node_relations; // record_stats only

    bool refines() const { return verdict == Verdict::Refines; }
    Relation certificate_relation() const; // preferred + alternates
    nlohmann::ordered_json to_json(bool include_timings = true) const;
    std::string to_text() const;
};

/// Checks the input relation's own contract: clean expressions, targets are
/// source inputs, references are destination inputs. ValidationError.
void validate_input_relation(const Relation& ri, const ComputationGraph& gs,
                             const ComputationGraph& gd, const CleanOpSet& clean_ops);

/// Inductive refinement check over the source graph's topological order.
CheckReport compute_out_rel(const ComputationGraph& gs, const ComputationGraph& gd,
                            const Relation& ri, const CheckConfig& cfg);

/// One operator step: seeds the output expressions, saturates under the
/// lemma library, explores the destination graph, and returns every clean
/// mapping found for the operator's outputs (possibly none).
Relation compute_node_out_rel(const OpNode& v, const ComputationGraph& gs,
                              const ComputationGraph& gd, const Relation& r,
                              const CheckConfig& cfg, ExplorationState& st,
                              LemmaStats* stats = nullptr, bool* budget_hit = nullptr,
                              NodeFailure* failure = nullptr);

/// Independent certificate check: completeness, cleanliness, reference
/// containment in the destination outputs, shape agreement, and numeric
/// reconstruction. No lemma machinery. Throws CertificateInvalid.
bool validate_certificate(const CheckReport& report, const ComputationGraph& gs,
                          const ComputationGraph& gd, const Relation& ri,
                          const std::vector<std::uint64_t>& seeds = {0, 1, 2},
                          double rel_tol = 1e-5, const DimEnv& dims = {});

/// Entries of `expected` with no matching produced mapping (empty == match).
std::vector<std::pair<std::string, std::string>> expectation_diff(const CheckReport& report,
                                                                  const Relation& expected);

} // namespace refinery
