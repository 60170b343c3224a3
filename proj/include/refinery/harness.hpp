// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "refinery/graph.hpp"

namespace refinery {

struct ModelSpec {
    enum class Family { MatmulSub, Mlp, AttentionRope, Moe, RegressionMse };
    Family family = Family::Mlp;
    int layers = 1;
    int hidden = 8;
    int heads = 2;   // attention only
    int experts = 2; // moe only
    int rows = 8;    // batch/sequence extent
};

struct StrategySpec {
    enum class Kind { Tp, Sp, Ep, GradAccum };
    Kind kind = Kind::Tp;
    int degree = 2;
};

struct BugSpec {
    enum class Id {
        RopeOffset,
        AuxlossScale,
        PadSliceMismatch,
        ShardVsReplicate,
        MissingLnAggregate,
        GradAccumScale,
    };
    Id id;
};

ModelSpec::Family family_from_string(const std::string& s);
std::string family_to_string(ModelSpec::Family f);
StrategySpec::Kind strategy_from_string(const std::string& s);
std::string strategy_to_string(StrategySpec::Kind k);
BugSpec::Id bug_from_string(const std::string& s);
std::string bug_to_string(BugSpec::Id id);

/// A generated check instance: both graphs, the input relation, the expected
/// outcome, and (for clean and expectation-diff fixtures) the reference
/// output relation.
struct Fixture {
    std::string name;
    ComputationGraph gs;
    ComputationGraph gd;
    Relation ri;
    nlohmann::ordered_json expected; // verdict / failure node / expectation flag
    std::optional<Relation> expected_ro;
};

/// Generates the paired graphs for a model/strategy/bug combination.
/// SpecError on indivisible dims or incompatible bugs.
Fixture generate(const ModelSpec& model, const StrategySpec& strat,
                 const std::optional<BugSpec>& bug);

struct CatalogEntry {
    std::string name;
    ModelSpec model;
    StrategySpec strategy;
    std::optional<BugSpec> bug;
    std::string description;
};

/// Stable fixture catalog: every clean pairing plus one entry per injected
/// bug, deterministic across runs.
const std::vector<CatalogEntry>& list_fixtures();
Fixture generate_entry(const CatalogEntry& entry);
Fixture generate_by_name(const std::string& name);

/// Writes gs.json / gd.json / ri.json / expected.json (and expected_ro.json
/// when available) into `dir`.
void write_fixture(const Fixture& f, const std::string& dir);

struct LoadedFixture {
    ComputationGraph gs;
    ComputationGraph gd;
    Relation ri;
    nlohmann::json expected;
    std::optional<Relation> expected_ro;
};
LoadedFixture load_fixture(const std::string& dir);

/// Registers the rotary-embedding custom ops and their distribution lemmas.
/// Idempotent; called by the CLI and bindings at startup.
void register_harness_extensions();

} // namespace refinery
