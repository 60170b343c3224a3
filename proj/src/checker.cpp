// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0

#include "refinery/checker.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "refinery/errors.hpp"
#include "refinery/log.hpp"
#include "refinery/oracle.hpp"

namespace refinery {

namespace {

constexpr const char* kSrc = "s:";
constexpr const char* kDst = "d:";

// The working e-graph namespaces tensor refs so source/destination id
// collisions cannot alias.
Expr::Ptr prefix_refs(const Expr::Ptr& e, const char* prefix) {
    if (e->is_tensor()) return Expr::tensor(prefix + e->op);
    if (!e->is_apply()) return e;
    std::vector<Expr::Ptr> kids;
    kids.reserve(e->children.size());
    for (const auto& c : e->children) kids.push_back(prefix_refs(c, prefix));
    return Expr::apply(e->op, std::move(kids), e->attrs);
}

Expr::Ptr strip_prefix(const Expr::Ptr& e) {
    if (e->is_tensor()) {
        if (e->op.rfind(kDst, 0) == 0 || e->op.rfind(kSrc, 0) == 0)
            return Expr::tensor(e->op.substr(2));
        return e;
    }
    if (!e->is_apply()) return e;
    std::vector<Expr::Ptr> kids;
    kids.reserve(e->children.size());
    for (const auto& c : e->children) kids.push_back(strip_prefix(c));
    return Expr::apply(e->op, std::move(kids), e->attrs);
}

ShapeResolver namespaced_resolver(const ComputationGraph& gs, const ComputationGraph& gd) {
    return [&gs, &gd](const std::string& id) -> std::optional<Shape> {
        if (id.rfind(kSrc, 0) == 0) {
            const TensorDecl* t = gs.find_tensor(id.substr(2));
            if (t) return t->shape;
            return std::nullopt;
        }
        if (id.rfind(kDst, 0) == 0) {
            const TensorDecl* t = gd.find_tensor(id.substr(2));
            if (t) return t->shape;
            return std::nullopt;
        }
        return std::nullopt;
    };
}

EGraph::NodeFilter clean_filter(const CleanOpSet& clean_ops) {
    return [&clean_ops](const ENode& n) {
        if (n.is_tensor()) return n.tensor_id.rfind(kDst, 0) == 0;
        if (n.is_scalar()) return false;
        return clean_ops.contains(n.op);
    };
}

EGraph::NodeFilter dest_only_filter() {
    return [](const ENode& n) {
        if (n.is_tensor()) return n.tensor_id.rfind(kDst, 0) == 0;
        return !n.is_scalar();
    };
}

struct NodeStep {
    EGraph eg;
    std::vector<std::string> output_ids;
    std::vector<ClassId> output_classes;

    NodeStep(ShapeResolver resolver, const ConstraintStore* cs) : eg(std::move(resolver), cs) {}
};

std::vector<std::string> provenance_summary(const EGraph& eg, ClassId c, size_t cap = 8) {
    std::set<std::string> tags;
    for (const auto& sn : eg.class_nodes(c)) {
        if (!sn.provenance.empty()) tags.insert(sn.provenance);
        if (tags.size() >= cap) break;
    }
    return {tags.begin(), tags.end()};
}

// Groups clean mappings by lemma-only equivalence and keeps the simplest
// member of each group. Pruning never changes which targets are mapped.
std::vector<Expr::Ptr> prune_self_provable(const std::vector<Expr::Ptr>& cleans,
                                           const ComputationGraph& gd, const ConstraintStore& cs,
                                           const std::vector<Lemma>& lemmas,
                                           const SaturationBudget& budget) {
    if (cleans.size() <= 1) return cleans;
    ShapeResolver resolver = [&gd](const std::string& id) -> std::optional<Shape> {
        const TensorDecl* t = gd.find_tensor(id);
        if (!t) return std::nullopt;
        return t->shape;
    };
    EGraph eg(resolver, &cs);
    std::vector<ClassId> roots;
    roots.reserve(cleans.size());
    for (const auto& e : cleans) roots.push_back(eg.add_expr(e));
    saturate(eg, lemmas, budget, nullptr);
    std::map<ClassId, std::pair<std::pair<int, std::string>, Expr::Ptr>> best;
    for (size_t i = 0; i < cleans.size(); i++) {
        ClassId c = eg.find(roots[i]);
        auto key = std::make_pair(simplicity(cleans[i]), canonical_print(cleans[i]));
        auto it = best.find(c);
        if (it == best.end() || key < it->second.first) best[c] = {key, cleans[i]};
    }
    std::vector<std::pair<std::pair<int, std::string>, Expr::Ptr>> kept;
    for (auto& [c, v] : best) kept.push_back(v);
    std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<Expr::Ptr> out;
    for (auto& [k, e] : kept) out.push_back(e);
    return out;
}

} // namespace

namespace {

// Single pass over the destination nodes; `closure` additionally treats
// every output of a fired node as reachable, so chains of operators whose
// only relatable tensors are their far endpoints still get explored.
Relation explore_pass(ExplorationState& st, const ComputationGraph& gd,
                      const CandidateSet& newly_clean, bool closure) {
    for (const auto& entry : newly_clean.entries)
        for (const auto& ref : tensor_refs(entry.expr)) {
            st.t_rel.insert(ref);
            st.reached.insert(ref);
        }

    Relation frontier;
    bool grew = true;
    while (grew) {
        grew = false;
        for (const OpNode& n : gd.nodes()) {
            auto in_set = closure ? &st.reached : &st.t_rel;
            bool ready = std::all_of(n.inputs.begin(), n.inputs.end(),
                                     [&](const std::string& t) { return in_set->count(t) > 0; });
            if (!ready) continue;
            std::vector<Expr::Ptr> refs;
            std::vector<Shape> shapes;
            for (const auto& t : n.inputs) {
                refs.push_back(Expr::tensor(t));
                shapes.push_back(gd.tensor(t).shape);
            }
            for (size_t j = 0; j < n.outputs.size(); j++) {
                if (closure && st.reached.insert(n.outputs[j]).second) grew = true;
                Expr::Ptr rho =
                    node_output_expr(n.op_kind, static_cast<int>(j), refs, shapes, n.attrs);
                auto key = std::make_pair(n.outputs[j], canonical_print(rho));
                if (st.r_explored.count(key)) continue;
                st.r_explored.insert(key);
                frontier.add(n.outputs[j], rho, "frontier:" + n.id);
            }
        }
        if (!closure) break;
    }
    st.frontier = frontier;
    return frontier;
}

} // namespace

Relation explore_step(ExplorationState& st, const ComputationGraph& gd,
                      const CandidateSet& newly_clean) {
    return explore_pass(st, gd, newly_clean, /*closure=*/false);
}

void validate_input_relation(const Relation& ri, const ComputationGraph& gs,
                             const ComputationGraph& gd, const CleanOpSet& clean_ops) {
    for (const auto& entry : ri.entries()) {
        if (!gs.is_input(entry.target))
            throw ValidationError("input relation targets '" + entry.target +
                                  "', which is not a source-graph input");
        if (!is_clean(entry.expr, clean_ops))
            throw ValidationError("input relation expression for '" + entry.target +
                                  "' is not clean: " + canonical_print(entry.expr));
        for (const auto& ref : tensor_refs(entry.expr))
            if (!gd.is_input(ref))
                throw ValidationError("input relation for '" + entry.target + "' references '" +
                                      ref + "', which is not a destination-graph input");
    }
}

Relation compute_node_out_rel(const OpNode& v, const ComputationGraph& gs,
                              const ComputationGraph& gd, const Relation& r,
                              const CheckConfig& cfg, ExplorationState& st, LemmaStats* stats,
                              bool* budget_hit, NodeFailure* failure) {
    const std::vector<Lemma>& lemmas =
        cfg.lemmas.empty() ? LemmaRegistry::instance().all() : cfg.lemmas;
    ConstraintStore cs = gs.constraints();
    cs.merge(gd.constraints());
    if (!cfg.solver_cmd.empty()) cs.set_solver_command(cfg.solver_cmd);

    NodeStep step(namespaced_resolver(gs, gd), &cs);
    EGraph& eg = step.eg;

    // Input classes: each source input is one class carrying every known
    // destination mapping (the e-graph form of tensor-to-expression rewriting).
    std::set<std::string> unmapped_inputs;
    for (const auto& t : v.inputs) {
        ClassId cls = eg.add_expr(Expr::tensor(kSrc + t), "input");
        auto mappings = r.for_target(t);
        if (mappings.empty()) unmapped_inputs.insert(t);
        for (const auto* m : mappings)
            eg.merge(cls, eg.add_expr(prefix_refs(m->expr, kDst), "relation"));
    }
    eg.rebuild();

    // Base expression per output.
    std::vector<Expr::Ptr> in_refs;
    std::vector<Shape> in_shapes;
    for (const auto& t : v.inputs) {
        in_refs.push_back(Expr::tensor(kSrc + t));
        in_shapes.push_back(gs.tensor(t).shape);
    }
    for (size_t j = 0; j < v.outputs.size(); j++) {
        Expr::Ptr base =
            node_output_expr(v.op_kind, static_cast<int>(j), in_refs, in_shapes, v.attrs);
        step.output_ids.push_back(v.outputs[j]);
        step.output_classes.push_back(eg.add_expr(base, "base"));
    }

    bool warned = false;
    SaturationResult sat = saturate(eg, lemmas, cfg.budget, stats);
    warned |= sat.budget_hit;

    // T_rel starts from the destination tensors reachable through this node's
    // own input mappings.
    st.t_rel.clear();
    st.r_explored.clear();
    st.reached.clear();
    for (const auto& t : v.inputs)
        for (const auto* m : r.for_target(t))
            for (const auto& ref : tensor_refs(m->expr)) {
                st.t_rel.insert(ref);
                st.reached.insert(ref);
            }

    auto cfilter = clean_filter(cfg.clean_ops);
    std::set<std::string> seen_clean;

    auto collect_new_cleans = [&]() {
        CandidateSet fresh;
        for (size_t j = 0; j < step.output_classes.size(); j++) {
            for (const auto& e : eg.extract_all(step.output_classes[j], cfilter, cfg.extract)) {
                Expr::Ptr plain = strip_prefix(e);
                std::string p = canonical_print(plain);
                if (seen_clean.insert(step.output_ids[j] + "|" + p).second)
                    fresh.entries.push_back({plain, "node:" + v.id});
            }
        }
        return fresh;
    };

    auto merge_frontier = [&](const Relation& frontier) {
        for (const auto& entry : frontier.entries())
            eg.merge(eg.add_expr(Expr::tensor(kDst + entry.target), "frontier"),
                     eg.add_expr(prefix_refs(entry.expr, kDst), entry.provenance));
    };

    if (cfg.mode == CheckConfig::Mode::Exhaustive) {
        if (gd.nodes().size() > cfg.exhaustive_cap)
            throw ConfigError("exhaustive exploration requires at most " +
                              std::to_string(cfg.exhaustive_cap) + " destination nodes, got " +
                              std::to_string(gd.nodes().size()));
        // Full forward closure from the initial T_rel, one saturation.
        Relation frontier = explore_pass(st, gd, CandidateSet{}, /*closure=*/true);
        merge_frontier(frontier);
        eg.rebuild();
        sat = saturate(eg, lemmas, cfg.budget, stats);
        warned |= sat.budget_hit;
    } else {
        // Iterative exploration: each round explores the forward closure of
        // the related region, saturates, and widens the region with tensors
        // named by newly found clean mappings.
        CandidateSet newly_clean = collect_new_cleans();
        while (true) {
            Relation frontier = explore_pass(st, gd, newly_clean, /*closure=*/true);
            if (frontier.empty()) break;
            merge_frontier(frontier);
            eg.rebuild();
            sat = saturate(eg, lemmas, cfg.budget, stats);
            warned |= sat.budget_hit;
            newly_clean = collect_new_cleans();
        }
    }

    if (budget_hit) *budget_hit = *budget_hit || warned;

    Relation rv;
    std::vector<std::string> missing;
    for (size_t j = 0; j < step.output_classes.size(); j++) {
        std::vector<Expr::Ptr> cleans;
        for (const auto& e : eg.extract_all(step.output_classes[j], cfilter, cfg.extract))
            cleans.push_back(strip_prefix(e));
        if (cfg.prune)
            cleans = prune_self_provable(cleans, gd, cs, lemmas, cfg.budget);
        for (const auto& e : cleans) rv.add(step.output_ids[j], e, "node:" + v.id);
        if (cleans.empty()) missing.push_back(step.output_ids[j]);
    }

    if (!missing.empty() && failure) {
        failure->node_id = v.id;
        failure->unmapped_outputs = missing;
        for (const auto& t : v.inputs)
            for (const auto* m : r.for_target(t)) failure->input_relation.add(t, m->expr);
        for (size_t j = 0; j < step.output_classes.size(); j++) {
            if (std::find(missing.begin(), missing.end(), step.output_ids[j]) == missing.end())
                continue;
            failure->candidate_count += eg.class_nodes(step.output_classes[j]).size();
            for (const auto& tag : provenance_summary(eg, step.output_classes[j]))
                failure->candidate_provenance.push_back(tag);
            auto nearest = eg.extract_min(step.output_classes[j], dest_only_filter());
            if (!nearest) nearest = eg.extract_min(step.output_classes[j], nullptr);
            if (nearest)
                failure->nearest_unclean.push_back(step.output_ids[j] + " ~ " +
                                                   canonical_print(strip_prefix(*nearest)));
        }
        std::sort(failure->candidate_provenance.begin(), failure->candidate_provenance.end());
        failure->candidate_provenance.erase(
            std::unique(failure->candidate_provenance.begin(), failure->candidate_provenance.end()),
            failure->candidate_provenance.end());
        if (!unmapped_inputs.empty()) {
            std::string note = "inputs with no mapping:";
            for (const auto& t : unmapped_inputs) note += " " + t;
            failure->note = note;
        }
    }
    return rv;
}

CheckReport compute_out_rel(const ComputationGraph& gs, const ComputationGraph& gd,
                            const Relation& ri, const CheckConfig& cfg) {
    using clock = std::chrono::steady_clock;
    auto t_start = clock::now();
    auto ms_since = [](clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    };

    if (cfg.budget.max_iterations <= 0 || cfg.budget.max_enodes == 0)
        throw ConfigError("saturation budget must be positive");
    validate_input_relation(ri, gs, gd, cfg.clean_ops);

    CheckReport report;
    LemmaStats stats;

    Relation r;
    for (const auto& e : ri.entries()) r.add(e.target, e.expr, "input");

    for (const OpNode* v : gs.topo_order()) {
        auto t0 = clock::now();
        ExplorationState st;
        NodeFailure failure;
        bool budget_hit = false;
        Relation rv = compute_node_out_rel(*v, gs, gd, r, cfg, st, &stats, &budget_hit, &failure);
        report.budget_warning |= budget_hit;
        report.node_timings_ms.emplace_back(v->id, ms_since(t0));
        if (cfg.record_stats) {
            std::vector<std::string> lines;
            for (const auto& e : rv.entries())
                lines.push_back(e.target + " := " + canonical_print(e.expr));
            report.node_relations[v->id] = std::move(lines);
        }
        if (!is_complete(rv, v->outputs)) {
            report.verdict = CheckReport::Verdict::RefinementError;
            report.failure = std::move(failure);
            report.lemma_stats = stats.applications;
            report.total_ms = ms_since(t_start);
            return report;
        }
        r.merge(rv);
    }

    // Keep only mappings of source outputs expressed over destination outputs.
    std::map<std::string, std::vector<Expr::Ptr>> out_mappings;
    for (const auto& e : r.entries()) {
        if (!gs.is_output(e.target)) continue;
        bool onto_outputs = true;
        for (const auto& ref : tensor_refs(e.expr)) onto_outputs &= gd.is_output(ref);
        if (onto_outputs) out_mappings[e.target].push_back(e.expr);
    }
    for (const auto& o : gs.outputs()) {
        if (out_mappings.count(o)) continue;
        const OpNode* producer = gs.producer(o);
        report.verdict = CheckReport::Verdict::RefinementError;
        NodeFailure f;
        f.node_id = producer ? producer->id : "<graph output " + o + ">";
        f.unmapped_outputs = {o};
        f.note = "mapped only through non-output destination tensors";
        report.failure = std::move(f);
        report.lemma_stats = stats.applications;
        report.total_ms = ms_since(t_start);
        return report;
    }

    for (const auto& o : gs.outputs()) {
        auto& exprs = out_mappings[o];
        std::vector<std::pair<std::pair<int, std::string>, Expr::Ptr>> keyed;
        for (const auto& e : exprs) keyed.push_back({{simplicity(e), canonical_print(e)}, e});
        std::sort(keyed.begin(), keyed.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        CertEntry entry;
        entry.target = o;
        entry.expr = keyed.front().first.second;
        for (size_t i = 1; i < keyed.size(); i++) entry.alternates.push_back(keyed[i].first.second);
        report.certificate.push_back(std::move(entry));
    }

    // Independent re-check of the certificate invariant before emission.
    Relation cert = report.certificate_relation();
    if (!is_complete(cert, gs.outputs()))
        throw Error("internal: certificate incomplete after filtering");
    for (const auto& e : cert.entries())
        if (!is_clean(e.expr, cfg.clean_ops))
            throw Error("internal: unclean certificate entry for " + e.target);

    report.lemma_stats = stats.applications;
    report.total_ms = ms_since(t_start);
    return report;
}

Relation CheckReport::certificate_relation() const {
    Relation rel;
    for (const auto& e : certificate) {
        rel.add(e.target, parse_expr(e.expr), "certificate");
        for (const auto& alt : e.alternates) rel.add(e.target, parse_expr(alt), "certificate");
    }
    return rel;
}

nlohmann::ordered_json CheckReport::to_json(bool include_timings) const {
    nlohmann::ordered_json doc;
    doc["schema_version"] = 1;
    doc["verdict"] = verdict == Verdict::Refines ? "refines" : "refinement_error";
    doc["budget_warning"] = budget_warning;
    if (verdict == Verdict::Refines) {
        nlohmann::ordered_json cert = nlohmann::ordered_json::array();
        for (const auto& e : certificate) {
            nlohmann::ordered_json je;
            je["target"] = e.target;
            je["expr"] = e.expr;
            je["alternates"] = e.alternates;
            cert.push_back(je);
        }
        doc["certificate"] = cert;
        doc["failure"] = nullptr;
    } else {
        doc["certificate"] = nullptr;
        nlohmann::ordered_json jf;
        jf["node"] = failure ? failure->node_id : "";
        jf["unmapped_outputs"] = failure ? failure->unmapped_outputs : std::vector<std::string>{};
        nlohmann::ordered_json ir = nlohmann::ordered_json::array();
        if (failure)
            for (const auto& e : failure->input_relation.entries()) {
                nlohmann::ordered_json je;
                je["target"] = e.target;
                je["expr"] = canonical_print(e.expr);
                ir.push_back(je);
            }
        jf["input_relation"] = ir;
        nlohmann::ordered_json cand;
        cand["count"] = failure ? failure->candidate_count : 0;
        cand["provenance"] = failure ? failure->candidate_provenance : std::vector<std::string>{};
        cand["nearest_unclean"] = failure ? failure->nearest_unclean : std::vector<std::string>{};
        jf["candidates"] = cand;
        jf["note"] = failure ? failure->note : "";
        doc["failure"] = jf;
    }
    nlohmann::ordered_json js;
    for (const auto& [k, n] : lemma_stats) js[k] = n;
    doc["lemma_stats"] = js;
    if (!node_relations.empty()) {
        nlohmann::ordered_json jr;
        for (const auto& [node, lines] : node_relations) jr[node] = lines;
        doc["node_relations"] = jr;
    }
    if (include_timings) {
        nlohmann::ordered_json jt;
        jt["total_ms"] = total_ms;
        nlohmann::ordered_json per;
        for (const auto& [node, ms] : node_timings_ms) per[node] = ms;
        jt["per_node"] = per;
        doc["timings"] = jt;
    }
    return doc;
}

std::string CheckReport::to_text() const {
    std::ostringstream os;
    if (verdict == Verdict::Refines) {
        os << "verdict: refines\n";
        for (const auto& e : certificate) {
            os << "  " << e.target << " := " << e.expr << "\n";
            for (const auto& alt : e.alternates) os << "    (also " << alt << ")\n";
        }
    } else {
        os << "verdict: refinement error\n";
        if (failure) {
            os << "  could not map outputs for operator '" << failure->node_id << "'";
            if (!failure->unmapped_outputs.empty()) {
                os << " (outputs:";
                for (const auto& o : failure->unmapped_outputs) os << " " << o;
                os << ")";
            }
            os << "\n";
            if (!failure->input_relation.empty()) {
                os << "  input relation at this operator:\n";
                for (const auto& e : failure->input_relation.entries())
                    os << "    " << e.target << " := " << canonical_print(e.expr) << "\n";
            }
            for (const auto& n : failure->nearest_unclean)
                os << "  nearest derived (not clean): " << n << "\n";
            if (!failure->note.empty()) os << "  note: " << failure->note << "\n";
        }
    }
    if (budget_warning)
        os << "warning: saturation budget exceeded; verdict is sound but the search was "
              "truncated\n";
    return os.str();
}

bool validate_certificate(const CheckReport& report, const ComputationGraph& gs,
                          const ComputationGraph& gd, const Relation& ri,
                          const std::vector<std::uint64_t>& seeds, double rel_tol,
                          const DimEnv& dims) {
    if (report.verdict != CheckReport::Verdict::Refines)
        throw CertificateInvalid("report does not claim refinement");
    Relation cert = report.certificate_relation();
    if (!is_complete(cert, gs.outputs()))
        throw CertificateInvalid("certificate does not map every source output");
    CleanOpSet clean = CleanOpSet::defaults();
    ShapeResolver gd_shapes = [&gd](const std::string& id) -> std::optional<Shape> {
        const TensorDecl* t = gd.find_tensor(id);
        if (!t) return std::nullopt;
        return t->shape;
    };
    ConstraintStore cs = gs.constraints();
    cs.merge(gd.constraints());
    for (const auto& e : cert.entries()) {
        if (!is_clean(e.expr, clean))
            throw CertificateInvalid("certificate entry for '" + e.target +
                                     "' is not clean: " + canonical_print(e.expr));
        for (const auto& ref : tensor_refs(e.expr))
            if (!gd.is_output(ref))
                throw CertificateInvalid("certificate entry for '" + e.target + "' references '" +
                                         ref + "', which is not a destination output");
        Shape got;
        try {
            got = infer_expr_shape(e.expr, gd_shapes, cs);
        } catch (const Error& err) {
            throw CertificateInvalid("certificate entry for '" + e.target +
                                     "' fails shape rules: " + err.what());
        }
        const Shape& want = gs.tensor(e.target).shape;
        if (got.size() != want.size())
            throw CertificateInvalid("certificate entry for '" + e.target + "' has rank " +
                                     std::to_string(got.size()) + ", expected " +
                                     std::to_string(want.size()));
        for (size_t i = 0; i < got.size(); i++)
            if (decide_cmp(got[i], want[i], CmpRel::Eq, cs) == Tristate::False)
                throw CertificateInvalid("certificate entry for '" + e.target +
                                         "' has shape " + shape_str(got) + ", expected " +
                                         shape_str(want));
    }
    ReconstructionResult rec = check_reconstruction(gs, gd, ri, cert, seeds, rel_tol, 1e-8, dims);
    if (!rec.ok)
        throw CertificateInvalid("certificate fails numeric reconstruction: " + rec.detail);
    return true;
}

std::vector<std::pair<std::string, std::string>> expectation_diff(const CheckReport& report,
                                                                  const Relation& expected) {
    std::set<std::pair<std::string, std::string>> produced;
    for (const auto& e : report.certificate) {
        produced.insert({e.target, e.expr});
        for (const auto& alt : e.alternates) produced.insert({e.target, alt});
    }
    std::vector<std::pair<std::string, std::string>> missing;
    for (const auto& e : expected.entries()) {
        auto key = std::make_pair(e.target, canonical_print(e.expr));
        if (!produced.count(key)) missing.push_back(key);
    }
    return missing;
}

} // namespace refinery
