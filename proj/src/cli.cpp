// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "refinery/checker.hpp"
#include "refinery/errors.hpp"
#include "refinery/harness.hpp"
#include "refinery/log.hpp"
#include "refinery/oracle.hpp"

namespace refinery {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRefinementError = 2;
constexpr int kExitExpectationMismatch = 3;

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw SchemaError("invalid JSON in " + path + ": " + e.what());
    }
    return j;
}

struct CheckOptions {
    std::string gs_path, gd_path, ri_path, expected_path, json_out, config_path, lemma_path;
    std::string mode = "optimized";
    bool no_prune = false;
    int budget_iterations = 0;
    std::int64_t budget_enodes = 0;
    std::string solver_cmd;
};

CheckConfig build_config(const CheckOptions& opt) {
    CheckConfig cfg;
    if (!opt.config_path.empty()) {
        nlohmann::json j = read_json_file(opt.config_path);
        if (j.contains("mode")) {
            std::string m = j["mode"].get<std::string>();
            cfg.mode = m == "exhaustive" ? CheckConfig::Mode::Exhaustive
                                         : CheckConfig::Mode::Optimized;
        }
        if (j.contains("budget_iterations"))
            cfg.budget.max_iterations = j["budget_iterations"].get<int>();
        if (j.contains("budget_max_enodes"))
            cfg.budget.max_enodes = j["budget_max_enodes"].get<size_t>();
        if (j.contains("prune")) cfg.prune = j["prune"].get<bool>();
        if (j.contains("record_stats")) cfg.record_stats = j["record_stats"].get<bool>();
        if (j.contains("solver_cmd")) cfg.solver_cmd = j["solver_cmd"].get<std::string>();
        if (j.contains("exhaustive_cap")) cfg.exhaustive_cap = j["exhaustive_cap"].get<size_t>();
        if (j.contains("clean_rearrangement"))
            cfg.clean_ops.rearrangement =
                j["clean_rearrangement"].get<std::set<std::string>>();
        if (j.contains("clean_reduction"))
            cfg.clean_ops.reduction = j["clean_reduction"].get<std::set<std::string>>();
    }
    // Flags win over the config file.
    if (opt.mode == "exhaustive") cfg.mode = CheckConfig::Mode::Exhaustive;
    else if (opt.mode == "optimized") cfg.mode = CheckConfig::Mode::Optimized;
    else throw ConfigError("unknown exploration mode: " + opt.mode);
    if (opt.no_prune) cfg.prune = false;
    if (opt.budget_iterations > 0) cfg.budget.max_iterations = opt.budget_iterations;
    if (opt.budget_enodes > 0) cfg.budget.max_enodes = static_cast<size_t>(opt.budget_enodes);
    if (!opt.solver_cmd.empty()) cfg.solver_cmd = opt.solver_cmd;
    return cfg;
}

int cmd_check(const CheckOptions& opt) {
    register_harness_extensions();
    if (!opt.lemma_path.empty()) {
        for (auto& l : parse_lemma_file(read_json_file(opt.lemma_path))) {
            if (!LemmaRegistry::instance().find(l.name))
                LemmaRegistry::instance().register_lemma(std::move(l));
        }
    }
    ComputationGraph gs = ComputationGraph::from_file(opt.gs_path);
    ComputationGraph gd = ComputationGraph::from_file(opt.gd_path);
    Relation ri = Relation::from_json(read_json_file(opt.ri_path));
    CheckConfig cfg = build_config(opt);

    CheckReport report = compute_out_rel(gs, gd, ri, cfg);

    int code = report.refines() ? kExitOk : kExitRefinementError;
    nlohmann::ordered_json doc = report.to_json();
    if (report.refines() && !opt.expected_path.empty()) {
        Relation expected = Relation::from_json(read_json_file(opt.expected_path));
        auto missing = expectation_diff(report, expected);
        nlohmann::ordered_json diff = nlohmann::ordered_json::array();
        for (const auto& [target, expr] : missing) {
            nlohmann::ordered_json e;
            e["target"] = target;
            e["expr"] = expr;
            diff.push_back(e);
        }
        doc["expectation"] = nlohmann::ordered_json::object();
        doc["expectation"]["matched"] = missing.empty();
        doc["expectation"]["missing"] = diff;
        if (!missing.empty()) code = kExitExpectationMismatch;
    }

    if (!opt.json_out.empty()) {
        if (opt.json_out == "-") {
            std::cout << doc.dump(2) << "\n";
        } else {
            std::ofstream out(opt.json_out);
            if (!out) throw Error("cannot write report to " + opt.json_out);
            out << doc.dump(2) << "\n";
        }
    }
    std::cout << report.to_text();
    if (doc.contains("expectation") && !doc["expectation"]["matched"].get<bool>()) {
        std::cout << "expectation mismatch: the certificate misses\n";
        for (const auto& e : doc["expectation"]["missing"])
            std::cout << "  " << e["target"].get<std::string>() << " := "
                      << e["expr"].get<std::string>() << "\n";
    }
    return code;
}

int cmd_gen(const std::string& fixture_name, const std::string& model, const std::string& strategy,
            int degree, const std::string& bug, int layers, int hidden, int heads, int experts,
            int rows, const std::string& out_dir) {
    register_harness_extensions();
    Fixture f = [&] {
        if (!fixture_name.empty()) return generate_by_name(fixture_name);
        ModelSpec m;
        m.family = family_from_string(model);
        m.layers = layers;
        m.hidden = hidden;
        m.heads = heads;
        m.experts = experts;
        m.rows = rows;
        StrategySpec s;
        s.kind = strategy_from_string(strategy);
        s.degree = degree;
        std::optional<BugSpec> b;
        if (!bug.empty()) b = BugSpec{bug_from_string(bug)};
        return generate(m, s, b);
    }();
    write_fixture(f, out_dir);
    std::cout << "wrote fixture '" << f.name << "' to " << out_dir << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& dir, std::uint64_t seed, const std::string& ro_path) {
    LoadedFixture f = load_fixture(dir);
    Relation ro;
    if (!ro_path.empty()) {
        ro = Relation::from_json(read_json_file(ro_path));
    } else if (f.expected_ro) {
        ro = *f.expected_ro;
    } else {
        std::cerr << "fixture has no expected_ro.json; pass --ro\n";
        return kExitUsage;
    }
    ReconstructionResult res = check_reconstruction(f.gs, f.gd, f.ri, ro, {seed});
    if (res.ok) {
        std::cout << "PASS max normalized deviation " << res.max_dev << "\n";
        return kExitOk;
    }
    std::cout << "FAIL " << res.detail << "\n";
    return kExitRefinementError;
}

int cmd_lemmas(bool list, const std::string& stats_path) {
    register_harness_extensions();
    if (!stats_path.empty()) {
        nlohmann::json report = read_json_file(stats_path);
        if (!report.contains("lemma_stats"))
            throw SchemaError("report has no lemma_stats: " + stats_path);
        std::vector<std::pair<std::string, std::uint64_t>> rows;
        for (const auto& [k, v] : report["lemma_stats"].items())
            rows.emplace_back(k, v.get<std::uint64_t>());
        std::sort(rows.begin(), rows.end(),
                  [](const auto& a, const auto& b) { return a.second > b.second; });
        for (const auto& [name, count] : rows) std::cout << count << "\t" << name << "\n";
        return kExitOk;
    }
    if (list) {
        for (const auto& l : LemmaRegistry::instance().all()) {
            std::cout << l.name << "\tfamily=" << l.family
                      << (l.direction == Lemma::Direction::Both ? "\tboth" : "\tforward")
                      << (l.constrained ? "\tconstrained" : "") << "\n";
        }
        return kExitOk;
    }
    std::cerr << "lemmas: pass --list or --stats REPORT\n";
    return kExitUsage;
}

int cmd_fixtures() {
    register_harness_extensions();
    for (const auto& e : list_fixtures()) {
        std::cout << e.name << "\t" << family_to_string(e.model.family) << "/"
                  << strategy_to_string(e.strategy.kind) << e.strategy.degree;
        if (e.bug) std::cout << "\tbug=" << bug_to_string(e.bug->id);
        std::cout << "\t" << e.description << "\n";
    }
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    log::init_from_env();
    CLI::App app{"refinery: proves or refutes model refinement between a sequential tensor "
                 "graph and a distributed implementation"};
    app.require_subcommand(1);
    std::string log_level;
    app.add_option("--log-level", log_level, "debug|info|warn|error|off (REFINERY_LOG wins)");

    CheckOptions check;
    auto* c = app.add_subcommand("check", "check that the distributed graph refines the "
                                          "sequential one");
    c->add_option("--gs", check.gs_path, "sequential graph JSON")->required();
    c->add_option("--gd", check.gd_path, "distributed graph JSON")->required();
    c->add_option("--ri", check.ri_path, "input relation JSON")->required();
    c->add_option("--expected", check.expected_path, "expected output relation to diff against");
    c->add_option("--mode", check.mode, "optimized|exhaustive");
    c->add_option("--json", check.json_out, "write the JSON report here ('-' for stdout)");
    c->add_option("--config", check.config_path, "JSON config file (flags win)");
    c->add_option("--lemmas", check.lemma_path, "extra lemma definitions (JSON)");
    c->add_flag("--no-prune", check.no_prune, "keep all equivalent mappings");
    c->add_option("--budget-iterations", check.budget_iterations, "saturation iteration cap");
    c->add_option("--budget-enodes", check.budget_enodes, "saturation e-node cap");
    c->add_option("--solver-cmd", check.solver_cmd, "external SMT-LIB solver command");

    std::string g_fixture, g_model, g_strategy, g_bug, g_out;
    int g_degree = 2, g_layers = 1, g_hidden = 8, g_heads = 2, g_experts = 2, g_rows = 8;
    auto* g = app.add_subcommand("gen", "generate a fixture directory");
    g->add_option("--fixture", g_fixture, "catalog fixture name (see `fixtures`)");
    g->add_option("--model", g_model, "matmul_sub|mlp|attention_rope|moe|regression_mse");
    g->add_option("--strategy", g_strategy, "tp|sp|ep|grad_accum");
    g->add_option("--degree", g_degree, "parallel degree / accumulation steps");
    g->add_option("--bug", g_bug, "bug id to inject");
    g->add_option("--layers", g_layers, "layer count");
    g->add_option("--hidden", g_hidden, "hidden size");
    g->add_option("--heads", g_heads, "attention heads");
    g->add_option("--experts", g_experts, "expert count");
    g->add_option("--rows", g_rows, "batch/sequence rows");
    g->add_option("--out", g_out, "output directory")->required();

    std::string e_dir, e_ro;
    std::uint64_t e_seed = 0;
    auto* ev = app.add_subcommand("eval", "numerically evaluate a fixture's relation");
    ev->add_option("--fixture", e_dir, "fixture directory")->required();
    ev->add_option("--seed", e_seed, "sampling seed");
    ev->add_option("--ro", e_ro, "output relation JSON (defaults to expected_ro.json)");

    bool l_list = false;
    std::string l_stats;
    auto* lm = app.add_subcommand("lemmas", "list the lemma library or print usage stats");
    lm->add_flag("--list", l_list, "list registered lemmas");
    lm->add_option("--stats", l_stats, "print lemma usage from a report JSON");

    app.add_subcommand("fixtures", "print the fixture catalog");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? kExitOk : kExitUsage;
    }
    if (!log_level.empty()) log::set_level(log_level);

    try {
        if (app.got_subcommand("check")) return cmd_check(check);
        if (app.got_subcommand("gen")) {
            if (g_fixture.empty() && (g_model.empty() || g_strategy.empty())) {
                std::cerr << "gen: pass --fixture NAME or --model and --strategy\n";
                return kExitUsage;
            }
            return cmd_gen(g_fixture, g_model, g_strategy, g_degree, g_bug, g_layers, g_hidden,
                           g_heads, g_experts, g_rows, g_out);
        }
        if (app.got_subcommand("eval")) return cmd_eval(e_dir, e_seed, e_ro);
        if (app.got_subcommand("lemmas")) return cmd_lemmas(l_list, l_stats);
        if (app.got_subcommand("fixtures")) return cmd_fixtures();
    } catch (const SchemaError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace refinery
