// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "refinery/errors.hpp"
#include "refinery/harness.hpp"
#include "refinery/oracle.hpp"

using namespace refinery;

TEST_CASE("catalog is stable and covers clean pairs plus every bug") {
    register_harness_extensions();
    const auto& a = list_fixtures();
    const auto& b = list_fixtures();
    REQUIRE(&a == &b); // one shared catalog
    size_t clean = 0, bugs = 0;
    std::set<std::string> bug_ids;
    for (const auto& e : a) {
        if (e.bug) {
            bugs++;
            bug_ids.insert(bug_to_string(e.bug->id));
        } else {
            clean++;
        }
    }
    CHECK(clean >= 6);
    CHECK(bugs == 6);
    CHECK(bug_ids == std::set<std::string>{"rope_offset", "auxloss_scale", "pad_slice_mismatch",
                                           "shard_vs_replicate", "missing_ln_aggregate",
                                           "grad_accum_scale"});
    // Regenerating a fixture yields the same documents.
    Fixture f1 = generate_by_name("mlp_tp2");
    Fixture f2 = generate_by_name("mlp_tp2");
    CHECK(f1.gs.to_json().dump() == f2.gs.to_json().dump());
    CHECK(f1.gd.to_json().dump() == f2.gd.to_json().dump());
    CHECK(f1.ri.to_json().dump() == f2.ri.to_json().dump());
}

TEST_CASE("grad accumulation wiring has no rank structure") {
    register_harness_extensions();
    Fixture f = generate_by_name("regression_grad_accum2");
    for (const auto& n : f.gd.nodes()) {
        CHECK(n.op_kind != "core.all_reduce");
        CHECK(n.op_kind != "core.all_gather");
        CHECK(n.op_kind != "core.reduce_scatter");
    }
}

TEST_CASE("every clean catalog fixture reconstructs numerically") {
    register_harness_extensions();
    for (const auto& entry : list_fixtures()) {
        if (entry.bug) continue;
        Fixture f = generate_entry(entry);
        CAPTURE(entry.name);
        REQUIRE(f.expected_ro.has_value());
        auto res = check_reconstruction(f.gs, f.gd, f.ri, *f.expected_ro, {0, 1}, 1e-5);
        CHECK(res.ok);
    }
}

TEST_CASE("spec violations are rejected before generation") {
    register_harness_extensions();
    ModelSpec m;
    m.family = ModelSpec::Family::Mlp;
    m.hidden = 7; // indivisible
    CHECK_THROWS_AS(generate(m, StrategySpec{StrategySpec::Kind::Tp, 2}, {}), SpecError);

    ModelSpec ok;
    ok.family = ModelSpec::Family::Mlp;
    CHECK_THROWS_AS(generate(ok, StrategySpec{StrategySpec::Kind::Tp, 1}, {}), SpecError);
    CHECK_THROWS_AS(generate(ok, StrategySpec{StrategySpec::Kind::Ep, 2}, {}), SpecError);

    // Bugs only apply to their pairing.
    CHECK_THROWS_AS(
        generate(ok, StrategySpec{StrategySpec::Kind::Tp, 2}, BugSpec{BugSpec::Id::RopeOffset}),
        SpecError);

    ModelSpec moe;
    moe.family = ModelSpec::Family::Moe;
    moe.experts = 3;
    CHECK_THROWS_AS(generate(moe, StrategySpec{StrategySpec::Kind::Ep, 2}, {}), SpecError);
}

TEST_CASE("destination node count grows linearly with the degree") {
    register_harness_extensions();
    ModelSpec m;
    m.family = ModelSpec::Family::Mlp;
    m.hidden = 8;
    auto nodes_at = [&](int d) {
        return generate(m, StrategySpec{StrategySpec::Kind::Tp, d}, {}).gd.nodes().size();
    };
    size_t n2 = nodes_at(2), n4 = nodes_at(4), n8 = nodes_at(8);
    // Linear in the degree: n(d) = a*d + b.
    CHECK(n8 - n4 == 2 * (n4 - n2));
    CHECK(n4 > n2);
}

TEST_CASE("fixture bundles round trip through the filesystem") {
    register_harness_extensions();
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "refinery_harness_rt";
    fs::remove_all(dir);
    Fixture f = generate_by_name("moe_ep2");
    write_fixture(f, dir.string());
    for (const char* file : {"gs.json", "gd.json", "ri.json", "expected.json", "expected_ro.json"})
        CHECK(fs::exists(dir / file));
    LoadedFixture lf = load_fixture(dir.string());
    CHECK(lf.gs.to_json().dump() == f.gs.to_json().dump());
    CHECK(lf.gd.to_json().dump() == f.gd.to_json().dump());
    CHECK(lf.ri.to_json().dump() == f.ri.to_json().dump());
    CHECK(lf.expected_ro.has_value());
    fs::remove_all(dir);
}

TEST_CASE("rotary ops have sound reference semantics") {
    register_harness_extensions();
    std::mt19937_64 rng(3);
    NDArray x = NDArray::random_normal({4, 6}, rng);
    NDArray c = NDArray::random_normal({4, 6}, rng);
    NDArray s = NDArray::random_normal({4, 6}, rng);
    NDArray dy = NDArray::random_normal({4, 6}, rng);
    std::map<std::string, NDArray> vals{{"X", x}, {"C", c}, {"S", s}, {"DY", dy}};
    NDArray y = eval_expr(parse_expr("(custom.rope (t X) (t C) (t S))"), vals);
    NDArray dx = eval_expr(parse_expr("(custom.rope_bwd (t DY) (t C) (t S))"), vals);
    // The backward op is the adjoint of the forward one: <rope(x), dy> == <x, rope_bwd(dy)>.
    double lhs = 0, rhs = 0;
    for (std::int64_t i = 0; i < y.size(); i++) {
        lhs += y.data()[i] * dy.data()[i];
        rhs += x.data()[i] * dx.data()[i];
    }
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
}
