// Copyright (c) 2026 The Refinery Authors
// SPDX-License-Identifier: Apache-2.0
//
// Paired fixture generators: a sequential graph, a distributed implementation
// under TP/SP/EP/gradient-accumulation, the input relation, and the expected
// checker outcome. Bug switches reproduce known distribution mistakes.

#include "refinery/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "refinery/errors.hpp"
#include "refinery/lemma.hpp"

namespace refinery {

namespace {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string rk(const std::string& base, int r) { return base + "_r" + std::to_string(r); }

struct GraphBuilder {
    ordered_json tensors = ordered_json::array();
    ordered_json nodes = ordered_json::array();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;

    void tensor(const std::string& id, const std::vector<std::int64_t>& shape,
                const std::string& dtype = "f32") {
        ordered_json t;
        t["id"] = id;
        t["shape"] = shape;
        t["dtype"] = dtype;
        tensors.push_back(t);
    }
    void input(const std::string& id, const std::vector<std::int64_t>& shape,
               const std::string& dtype = "f32") {
        tensor(id, shape, dtype);
        inputs.push_back(id);
    }
    void node(const std::string& id, const std::string& op, const std::vector<std::string>& in,
              const std::vector<std::string>& out, ordered_json attrs = ordered_json::object()) {
        ordered_json n;
        n["id"] = id;
        n["op"] = op;
        if (!attrs.empty()) n["attrs"] = attrs;
        n["inputs"] = in;
        n["outputs"] = out;
        nodes.push_back(n);
    }
    ComputationGraph build() const {
        ordered_json doc;
        doc["tensors"] = tensors;
        doc["nodes"] = nodes;
        doc["inputs"] = inputs;
        doc["outputs"] = outputs;
        return ComputationGraph::from_json(doc);
    }
};

Expr::Ptr tref(const std::string& id) { return Expr::tensor(id); }

// Shard mappings are emitted as right-nested binary concats; the structural
// lemmas peel one shard at a time and the flatten rule recovers the n-ary
// form for matching graph-side collectives.
Expr::Ptr nested_concat(const std::vector<std::string>& ids, std::int64_t dim) {
    Expr::Ptr acc = tref(ids.back());
    for (auto i = static_cast<std::int64_t>(ids.size()) - 2; i >= 0; i--)
        acc = Expr::apply("core.concat", {tref(ids[i]), acc}, {{"dim", DimExpr(dim)}});
    return acc;
}

Expr::Ptr flat_concat(const std::vector<std::string>& ids, std::int64_t dim) {
    if (ids.size() == 1) return tref(ids[0]);
    std::vector<Expr::Ptr> kids;
    for (const auto& id : ids) kids.push_back(tref(id));
    return Expr::apply("core.concat", std::move(kids), {{"dim", DimExpr(dim)}});
}

Expr::Ptr flat_sum(const std::vector<std::string>& ids) {
    if (ids.size() == 1) return tref(ids[0]);
    std::vector<Expr::Ptr> kids;
    for (const auto& id : ids) kids.push_back(tref(id));
    return Expr::apply("core.sum", std::move(kids));
}

std::vector<std::string> rank_names(const std::string& base, int d, int from = 0) {
    std::vector<std::string> out;
    for (int r = from; r < from + d; r++) out.push_back(rk(base, r));
    return out;
}

void require(bool cond, const std::string& msg) {
    if (!cond) throw SpecError(msg);
}

ordered_json expected_json(const std::string& name, const std::string& verdict,
                           const std::string& failure_node, bool expectation_diff,
                           const std::string& description) {
    ordered_json e;
    e["name"] = name;
    e["verdict"] = verdict;
    e["expected_failure_node"] =
        failure_node.empty() ? ordered_json(nullptr) : ordered_json(failure_node);
    e["expectation_diff"] = expectation_diff;
    e["description"] = description;
    return e;
}

// --- worked two-operator model: matmul followed by elementwise subtract ---

Fixture gen_matmul_sub(const ModelSpec& m, int d) {
    int T = m.rows, K = m.hidden, N = 4;
    require(K % d == 0, "matmul_sub: hidden must be divisible by the degree");
    require(T % d == 0, "matmul_sub: rows must be divisible by the degree");

    GraphBuilder gs;
    gs.input("A", {T, K});
    gs.input("B", {K, N});
    gs.input("E", {T, N});
    gs.tensor("C", {T, N});
    gs.tensor("F", {T, N});
    gs.node("matmul", "core.matmul", {"A", "B"}, {"C"});
    gs.node("matsub", "core.sub", {"C", "E"}, {"F"});
    gs.outputs = {"F"};

    GraphBuilder gd;
    std::vector<std::string> as, bs, cs, ds, es, fssh;
    for (int r = 1; r <= d; r++) {
        std::string s = std::to_string(r);
        as.push_back("A_" + s);
        bs.push_back("B_" + s);
        cs.push_back("C_" + s);
        ds.push_back("D_" + s);
        es.push_back("E_" + s);
        fssh.push_back("F_" + s);
        gd.input(as.back(), {T, K / d});
        gd.input(bs.back(), {K / d, N});
        gd.tensor(cs.back(), {T, N});
    }
    for (int r = 1; r <= d; r++) {
        std::string s = std::to_string(r);
        gd.tensor("D_" + s, {T / d, N});
        gd.input("E_" + s, {T / d, N});
        gd.tensor("F_" + s, {T / d, N});
    }
    for (int r = 0; r < d; r++)
        gd.node("matmul_" + std::to_string(r + 1), "core.matmul", {as[r], bs[r]}, {cs[r]});
    gd.node("reduce_scatter", "core.reduce_scatter", cs, ds, {{"dim", 0}});
    for (int r = 0; r < d; r++)
        gd.node("matsub_" + std::to_string(r + 1), "core.sub", {ds[r], es[r]}, {fssh[r]});
    gd.outputs = fssh;

    Fixture f;
    f.gs = gs.build();
    f.gd = gd.build();
    f.ri.add("A", nested_concat(as, 1));
    f.ri.add("B", nested_concat(bs, 0));
    f.ri.add("E", nested_concat(es, 0));
    Relation ro;
    ro.add("F", flat_concat(fssh, 0));
    f.expected_ro = ro;
    return f;
}

// --- MLP under TP: column-sharded first matmul, row-sharded second,
// sum-reduction via all-reduce ---

Fixture gen_mlp_tp(const ModelSpec& m, int d) {
    int T = m.rows, H = m.hidden, L = m.layers;
    require(H % d == 0, "mlp/tp: hidden must be divisible by the degree");

    GraphBuilder gs;
    gs.input("X", {T, H});
    GraphBuilder gd;
    for (int r = 0; r < d; r++) gd.input(rk("X", r), {T, H});

    Fixture f;
    for (int r = 0; r < d; r++) f.ri.add("X", tref(rk("X", r)));

    std::string cur = "X";
    std::vector<std::string> cur_d = rank_names("X", d);
    for (int l = 0; l < L; l++) {
        std::string p = "l" + std::to_string(l) + "_";
        gs.input(p + "W1", {H, H});
        gs.input(p + "W2", {H, H});
        gs.tensor(p + "C", {T, H});
        gs.tensor(p + "H", {T, H});
        gs.tensor(p + "Y", {T, H});
        gs.node(p + "mm1", "core.matmul", {cur, p + "W1"}, {p + "C"});
        gs.node(p + "relu", "core.relu", {p + "C"}, {p + "H"});
        gs.node(p + "mm2", "core.matmul", {p + "H", p + "W2"}, {p + "Y"});

        std::vector<std::string> w1s, w2s, parts, ys;
        for (int r = 0; r < d; r++) {
            std::string w1 = rk(p + "W1", r), w2 = rk(p + "W2", r);
            gd.input(w1, {H, H / d});
            gd.input(w2, {H / d, H});
            gd.tensor(rk(p + "C", r), {T, H / d});
            gd.tensor(rk(p + "H", r), {T, H / d});
            gd.tensor(rk(p + "P", r), {T, H});
            gd.tensor(rk(p + "Y", r), {T, H});
            gd.node(rk(p + "mm1", r), "core.matmul", {cur_d[r], w1}, {rk(p + "C", r)});
            gd.node(rk(p + "relu", r), "core.relu", {rk(p + "C", r)}, {rk(p + "H", r)});
            gd.node(rk(p + "mm2", r), "core.matmul", {rk(p + "H", r), w2}, {rk(p + "P", r)});
            w1s.push_back(w1);
            w2s.push_back(w2);
            parts.push_back(rk(p + "P", r));
            ys.push_back(rk(p + "Y", r));
        }
        gd.node(p + "allreduce", "core.all_reduce", parts, ys);
        f.ri.add(p + "W1", nested_concat(w1s, 1));
        f.ri.add(p + "W2", nested_concat(w2s, 0));
        cur = p + "Y";
        cur_d = ys;
    }
    gs.outputs = {cur};
    gd.outputs = cur_d;
    f.gs = gs.build();
    f.gd = gd.build();
    Relation ro;
    for (const auto& y : cur_d) ro.add(cur, tref(y));
    f.expected_ro = ro;
    return f;
}

// --- MLP under SP: row-sharded activations; the hidden state is re-gathered
// through pad / concat / slice before the final matmul. Hosts the mismatched
// pad/slice bug and the shard-instead-of-replicate bug. ---

Fixture gen_mlp_sp(const ModelSpec& m, int d, std::optional<BugSpec::Id> bug) {
    int T = m.rows, H = m.hidden;
    require(m.layers == 1, "mlp/sp: the gather wiring supports a single layer");
    require(T % d == 0, "mlp/sp: rows must be divisible by the degree");
    bool shard_bug = bug == BugSpec::Id::ShardVsReplicate;
    bool slice_bug = bug == BugSpec::Id::PadSliceMismatch;
    if (shard_bug) require(H % d == 0, "mlp/sp: hidden must be divisible by the degree");
    int Tr = T / d;
    int Hw = shard_bug ? H / d : H; // per-rank width of the hidden state

    GraphBuilder gs;
    gs.input("X", {T, H});
    gs.input("l0_W1", {H, H});
    gs.input("l0_W2", {H, H});
    gs.tensor("l0_C", {T, H});
    gs.tensor("l0_H", {T, H});
    gs.tensor("l0_Y", {T, H});
    gs.node("l0_mm1", "core.matmul", {"X", "l0_W1"}, {"l0_C"});
    gs.node("l0_relu", "core.relu", {"l0_C"}, {"l0_H"});
    gs.node("l0_mm2", "core.matmul", {"l0_H", "l0_W2"}, {"l0_Y"});
    gs.outputs = {"l0_Y"};

    GraphBuilder gd;
    std::vector<std::string> xs, w1s, w2s, pads, us;
    for (int r = 0; r < d; r++) {
        xs.push_back(rk("X", r));
        gd.input(xs.back(), {Tr, H});
    }
    for (int r = 0; r < d; r++) {
        w1s.push_back(rk("l0_W1", r));
        gd.input(w1s.back(), {H, Hw});
    }
    gd.input("l0_W2_d", {Hw, H});
    for (int r = 0; r < d; r++) {
        gd.tensor(rk("l0_C", r), {Tr, Hw});
        gd.tensor(rk("l0_H", r), {Tr, Hw});
        gd.tensor(rk("l0_Hpad", r), {Tr + 1, Hw});
        gd.node(rk("l0_mm1", r), "core.matmul", {xs[r], w1s[r]}, {rk("l0_C", r)});
        gd.node(rk("l0_relu", r), "core.relu", {rk("l0_C", r)}, {rk("l0_H", r)});
        gd.node(rk("l0_pad", r), "core.pad", {rk("l0_H", r)}, {rk("l0_Hpad", r)},
                {{"dim", 0}, {"before", 0}, {"after", 1}});
        pads.push_back(rk("l0_Hpad", r));
    }
    gd.tensor("l0_G", {T + d, Hw});
    gd.node("l0_gather", "core.concat", pads, {"l0_G"}, {{"dim", 0}});
    for (int r = 0; r < d; r++) {
        gd.tensor(rk("l0_U", r), {Tr, Hw});
        // Correct offsets skip one pad row per preceding rank.
        std::int64_t start = slice_bug ? static_cast<std::int64_t>(r) * Tr
                                       : static_cast<std::int64_t>(r) * (Tr + 1);
        gd.node(rk("l0_unpad", r), "core.slice", {"l0_G"}, {rk("l0_U", r)},
                {{"dim", 0}, {"start", start}, {"end", start + Tr}});
        us.push_back(rk("l0_U", r));
    }
    gd.tensor("l0_Hfull", {T, Hw});
    gd.node("l0_unpad_concat", "core.concat", us, {"l0_Hfull"}, {{"dim", 0}});
    gd.tensor("l0_Y_d", {T, H});
    gd.node("l0_mm2_d", "core.matmul", {"l0_Hfull", "l0_W2_d"}, {"l0_Y_d"});
    gd.outputs = {"l0_Y_d"};

    Fixture f;
    f.gs = gs.build();
    f.gd = gd.build();
    f.ri.add("X", nested_concat(xs, 0));
    if (shard_bug) {
        // The first weight is genuinely sharded; only one shard of the
        // second weight exists at all, so it has no reconstruction.
        f.ri.add("l0_W1", nested_concat(w1s, 1));
    } else {
        for (const auto& w : w1s) f.ri.add("l0_W1", tref(w));
        f.ri.add("l0_W2", tref("l0_W2_d"));
    }
    if (!bug) {
        Relation ro;
        ro.add("l0_Y", tref("l0_Y_d"));
        f.expected_ro = ro;
    }
    return f;
}

// --- attention stack under TP: heads sharded across ranks, output projection
// row-sharded, all-reduce plus residual per layer ---

Fixture gen_attention_tp(const ModelSpec& m, int d) {
    int T = m.rows, H = m.hidden, heads = m.heads, L = m.layers;
    require(heads >= 1 && H % heads == 0, "attention/tp: hidden must divide into heads");
    int dk = H / heads;
    require(dk % 2 == 0, "attention/tp: head dim must be even for rotary embedding");
    require(heads % d == 0, "attention/tp: heads must be divisible by the degree");
    int local = heads / d;

    GraphBuilder gs;
    gs.input("X", {T, H});
    gs.input("cos", {T, dk});
    gs.input("sin", {T, dk});
    GraphBuilder gd;
    for (int r = 0; r < d; r++) {
        gd.input(rk("X", r), {T, H});
        gd.input(rk("cos", r), {T, dk});
        gd.input(rk("sin", r), {T, dk});
    }

    Fixture f;
    for (int r = 0; r < d; r++) {
        f.ri.add("X", tref(rk("X", r)));
        f.ri.add("cos", tref(rk("cos", r)));
        f.ri.add("sin", tref(rk("sin", r)));
    }

    std::string cur = "X";
    std::vector<std::string> cur_d = rank_names("X", d);
    for (int l = 0; l < L; l++) {
        std::string p = "l" + std::to_string(l) + "_";
        std::vector<std::string> head_outs;
        for (int i = 0; i < heads; i++) {
            std::string hp = p + "h" + std::to_string(i) + "_";
            int owner = i / local;
            for (const char* w : {"Wq", "Wk", "Wv"}) gs.input(hp + w, {H, dk});
            gs.tensor(hp + "q", {T, dk});
            gs.tensor(hp + "k", {T, dk});
            gs.tensor(hp + "v", {T, dk});
            gs.tensor(hp + "qr", {T, dk});
            gs.tensor(hp + "kr", {T, dk});
            gs.tensor(hp + "kt", {dk, T});
            gs.tensor(hp + "s", {T, T});
            gs.tensor(hp + "pr", {T, T});
            gs.tensor(hp + "o", {T, dk});
            gs.node(hp + "mmq", "core.matmul", {cur, hp + "Wq"}, {hp + "q"});
            gs.node(hp + "mmk", "core.matmul", {cur, hp + "Wk"}, {hp + "k"});
            gs.node(hp + "mmv", "core.matmul", {cur, hp + "Wv"}, {hp + "v"});
            gs.node(hp + "ropeq", "custom.rope", {hp + "q", "cos", "sin"}, {hp + "qr"});
            gs.node(hp + "ropek", "custom.rope", {hp + "k", "cos", "sin"}, {hp + "kr"});
            gs.node(hp + "kt", "core.transpose", {hp + "kr"}, {hp + "kt"},
                    {{"dim0", 0}, {"dim1", 1}});
            gs.node(hp + "score", "core.matmul", {hp + "qr", hp + "kt"}, {hp + "s"});
            gs.node(hp + "soft", "core.softmax", {hp + "s"}, {hp + "pr"}, {{"dim", 1}});
            gs.node(hp + "attn", "core.matmul", {hp + "pr", hp + "v"}, {hp + "o"});
            head_outs.push_back(hp + "o");

            // Destination side: the head lives on its owner rank.
            std::string dq = hp + "q_d", dkid = hp + "k_d", dv = hp + "v_d";
            for (const char* w : {"Wq", "Wk", "Wv"}) gd.input(hp + w + "_d", {H, dk});
            gd.tensor(dq, {T, dk});
            gd.tensor(dkid, {T, dk});
            gd.tensor(dv, {T, dk});
            gd.tensor(hp + "qr_d", {T, dk});
            gd.tensor(hp + "kr_d", {T, dk});
            gd.tensor(hp + "kt_d", {dk, T});
            gd.tensor(hp + "s_d", {T, T});
            gd.tensor(hp + "pr_d", {T, T});
            gd.tensor(hp + "o_d", {T, dk});
            gd.node(hp + "mmq_d", "core.matmul", {cur_d[owner], hp + "Wq_d"}, {dq});
            gd.node(hp + "mmk_d", "core.matmul", {cur_d[owner], hp + "Wk_d"}, {dkid});
            gd.node(hp + "mmv_d", "core.matmul", {cur_d[owner], hp + "Wv_d"}, {dv});
            gd.node(hp + "ropeq_d", "custom.rope", {dq, rk("cos", owner), rk("sin", owner)},
                    {hp + "qr_d"});
            gd.node(hp + "ropek_d", "custom.rope", {dkid, rk("cos", owner), rk("sin", owner)},
                    {hp + "kr_d"});
            gd.node(hp + "kt_d", "core.transpose", {hp + "kr_d"}, {hp + "kt_d"},
                    {{"dim0", 0}, {"dim1", 1}});
            gd.node(hp + "score_d", "core.matmul", {hp + "qr_d", hp + "kt_d"}, {hp + "s_d"});
            gd.node(hp + "soft_d", "core.softmax", {hp + "s_d"}, {hp + "pr_d"}, {{"dim", 1}});
            gd.node(hp + "attn_d", "core.matmul", {hp + "pr_d", hp + "v_d"}, {hp + "o_d"});
            for (const char* w : {"Wq", "Wk", "Wv"})
                f.ri.add(hp + w, tref(hp + w + "_d"));
        }
        // Head concatenation: binary chain on both sides.
        auto chain_concat = [&](GraphBuilder& g, const std::string& stem,
                                const std::vector<std::string>& parts, int width) {
            if (parts.size() == 1) {
                g.tensor(stem, {T, width});
                g.node(stem + "_id", "core.identity", {parts[0]}, {stem});
                return;
            }
            std::string acc = parts.back();
            int w = width / static_cast<int>(parts.size());
            for (auto i = static_cast<std::int64_t>(parts.size()) - 2; i >= 0; i--) {
                int aw = w * static_cast<int>(parts.size() - i - 1) + w;
                std::string out =
                    i == 0 ? stem : stem + "_c" + std::to_string(i);
                g.tensor(out, {T, aw});
                g.node(out + "_cc", "core.concat", {parts[i], acc}, {out}, {{"dim", 1}});
                acc = out;
            }
        };
        gs.input(p + "Wo", {H, H});
        chain_concat(gs, p + "O", head_outs, H);
        gs.tensor(p + "proj", {T, H});
        gs.tensor(p + "Xn", {T, H});
        gs.node(p + "proj", "core.matmul", {p + "O", p + "Wo"}, {p + "proj"});
        gs.node(p + "res", "core.add", {p + "proj", cur}, {p + "Xn"});

        std::vector<std::string> wos, parts, zs, xn;
        for (int r = 0; r < d; r++) {
            std::vector<std::string> local_outs;
            for (int i = r * local; i < (r + 1) * local; i++)
                local_outs.push_back(p + "h" + std::to_string(i) + "_o_d");
            chain_concat(gd, rk(p + "O", r), local_outs, H / d);
            std::string wo = rk(p + "Wo", r);
            gd.input(wo, {H / d, H});
            wos.push_back(wo);
            gd.tensor(rk(p + "part", r), {T, H});
            gd.node(rk(p + "proj", r), "core.matmul", {rk(p + "O", r), wo}, {rk(p + "part", r)});
            parts.push_back(rk(p + "part", r));
            gd.tensor(rk(p + "Z", r), {T, H});
            zs.push_back(rk(p + "Z", r));
        }
        gd.node(p + "allreduce", "core.all_reduce", parts, zs);
        for (int r = 0; r < d; r++) {
            gd.tensor(rk(p + "Xn", r), {T, H});
            gd.node(rk(p + "res", r), "core.add", {zs[r], cur_d[r]}, {rk(p + "Xn", r)});
            xn.push_back(rk(p + "Xn", r));
        }
        f.ri.add(p + "Wo", nested_concat(wos, 0));
        cur = p + "Xn";
        cur_d = xn;
    }
    gs.outputs = {cur};
    gd.outputs = cur_d;
    f.gs = gs.build();
    f.gd = gd.build();
    Relation ro;
    for (const auto& x : cur_d) ro.add(cur, tref(x));
    f.expected_ro = ro;
    return f;
}

// --- rotary embedding under SP: forward and hand-written backward take
// per-rank slices of the precomputed tables; a norm-weight gradient is
// reduced across ranks. Hosts the wrong-backward-offset bug and the
// missing-aggregation bug. ---

Fixture gen_attention_sp(const ModelSpec& m, int d, std::optional<BugSpec::Id> bug) {
    int T = m.rows, H = m.hidden;
    require(T % d == 0, "attention/sp: rows must be divisible by the degree");
    require(H % 2 == 0, "attention/sp: hidden must be even for rotary embedding");
    int Tr = T / d;
    bool offset_bug = bug == BugSpec::Id::RopeOffset;
    bool agg_bug = bug == BugSpec::Id::MissingLnAggregate;

    GraphBuilder gs;
    gs.input("X", {T, H});
    gs.input("dY", {T, H});
    gs.input("cos_full", {T, H});
    gs.input("sin_full", {T, H});
    gs.tensor("Y", {T, H});
    gs.tensor("dX", {T, H});
    gs.tensor("Z", {T, H});
    gs.tensor("gW", {H});
    gs.node("rope_fwd", "custom.rope", {"X", "cos_full", "sin_full"}, {"Y"});
    gs.node("rope_bwd", "custom.rope_bwd", {"dY", "cos_full", "sin_full"}, {"dX"});
    gs.node("lngrad_mul", "core.mul", {"dY", "X"}, {"Z"});
    gs.node("lngrad_red", "core.reduce_sum", {"Z"}, {"gW"}, {{"dim", 0}});
    gs.outputs = {"Y", "dX", "gW"};

    GraphBuilder gd;
    std::vector<std::string> xs, dys, ys, dxs, gws, gwr;
    for (int r = 0; r < d; r++) {
        gd.input(rk("X", r), {Tr, H});
        gd.input(rk("dY", r), {Tr, H});
        gd.input(rk("cos_full", r), {T, H});
        gd.input(rk("sin_full", r), {T, H});
        xs.push_back(rk("X", r));
        dys.push_back(rk("dY", r));
        std::int64_t fwd_off = static_cast<std::int64_t>(r) * Tr;
        std::int64_t bwd_off = offset_bug ? 0 : fwd_off;
        gd.tensor(rk("cosF", r), {Tr, H});
        gd.tensor(rk("sinF", r), {Tr, H});
        gd.node(rk("slice_cos_f", r), "core.slice", {rk("cos_full", r)}, {rk("cosF", r)},
                {{"dim", 0}, {"start", fwd_off}, {"end", fwd_off + Tr}});
        gd.node(rk("slice_sin_f", r), "core.slice", {rk("sin_full", r)}, {rk("sinF", r)},
                {{"dim", 0}, {"start", fwd_off}, {"end", fwd_off + Tr}});
        gd.tensor(rk("Y", r), {Tr, H});
        gd.node(rk("rope_fwd", r), "custom.rope", {rk("X", r), rk("cosF", r), rk("sinF", r)},
                {rk("Y", r)});
        ys.push_back(rk("Y", r));
        gd.tensor(rk("cosB", r), {Tr, H});
        gd.tensor(rk("sinB", r), {Tr, H});
        gd.node(rk("slice_cos_b", r), "core.slice", {rk("cos_full", r)}, {rk("cosB", r)},
                {{"dim", 0}, {"start", bwd_off}, {"end", bwd_off + Tr}});
        gd.node(rk("slice_sin_b", r), "core.slice", {rk("sin_full", r)}, {rk("sinB", r)},
                {{"dim", 0}, {"start", bwd_off}, {"end", bwd_off + Tr}});
        gd.tensor(rk("dX", r), {Tr, H});
        gd.node(rk("rope_bwd", r), "custom.rope_bwd", {rk("dY", r), rk("cosB", r), rk("sinB", r)},
                {rk("dX", r)});
        dxs.push_back(rk("dX", r));
        gd.tensor(rk("Z", r), {Tr, H});
        gd.node(rk("lngrad_mul", r), "core.mul", {rk("dY", r), rk("X", r)}, {rk("Z", r)});
        gd.tensor(rk("gw", r), {H});
        gd.node(rk("lngrad_red", r), "core.reduce_sum", {rk("Z", r)}, {rk("gw", r)}, {{"dim", 0}});
        gws.push_back(rk("gw", r));
    }
    if (!agg_bug) {
        for (int r = 0; r < d; r++) {
            gd.tensor(rk("gwr", r), {H});
            gwr.push_back(rk("gwr", r));
        }
        gd.node("lngrad_ar", "core.all_reduce", gws, gwr);
    } else {
        gwr = gws; // per-rank partial gradients exposed directly
    }
    gd.outputs = ys;
    gd.outputs.insert(gd.outputs.end(), dxs.begin(), dxs.end());
    gd.outputs.insert(gd.outputs.end(), gwr.begin(), gwr.end());

    Fixture f;
    f.gs = gs.build();
    f.gd = gd.build();
    f.ri.add("X", nested_concat(xs, 0));
    f.ri.add("dY", nested_concat(dys, 0));
    for (int r = 0; r < d; r++) {
        f.ri.add("cos_full", tref(rk("cos_full", r)));
        f.ri.add("sin_full", tref(rk("sin_full", r)));
    }
    // The expected relation states the user's intent: sharded activations
    // re-concatenate, and each rank holds the full reduced gradient.
    Relation ro;
    ro.add("Y", flat_concat(ys, 0));
    ro.add("dX", flat_concat(dxs, 0));
    for (const auto& g : gwr) ro.add("gW", tref(g));
    if (!offset_bug) f.expected_ro = ro;
    return f;
}

// --- MoE under TP: expert weights and gate masks column-sharded; the
// auxiliary imbalance loss needs a 1/degree rescale per rank ---

Fixture gen_moe_tp(const ModelSpec& m, int d, std::optional<BugSpec::Id> bug) {
    int T = m.rows, H = m.hidden, F = m.hidden;
    require(m.experts == 2, "moe/tp: the auxiliary-loss wiring uses exactly two experts");
    require(F % d == 0, "moe/tp: expert width must be divisible by the degree");
    bool scale_bug = bug == BugSpec::Id::AuxlossScale;
    int Fr = F / d;

    GraphBuilder gs;
    gs.input("X", {T, H});
    for (int e = 1; e <= 2; e++) {
        std::string s = std::to_string(e);
        gs.input("W" + s, {H, F});
        gs.input("M" + s, {T, F});
        gs.tensor("z" + s, {T, F});
        gs.tensor("y" + s, {T, F});
        gs.tensor("load" + s, {F});
        gs.node("expert" + s, "core.matmul", {"X", "W" + s}, {"z" + s});
        gs.node("mask" + s, "core.mul", {"M" + s, "z" + s}, {"y" + s});
        gs.node("load" + s, "core.reduce_sum", {"y" + s}, {"load" + s}, {{"dim", 0}});
    }
    gs.tensor("y", {T, F});
    gs.tensor("aux", {});
    gs.node("route", "core.sum", {"y1", "y2"}, {"y"});
    gs.node("aux", "core.mse_loss", {"load1", "load2"}, {"aux"});
    gs.outputs = {"y", "aux"};

    GraphBuilder gd;
    Fixture f;
    std::vector<std::string> parts, auxs;
    std::vector<std::vector<std::string>> wsh(3), msh(3);
    for (int r = 0; r < d; r++) {
        gd.input(rk("X", r), {T, H});
        f.ri.add("X", tref(rk("X", r)));
        for (int e = 1; e <= 2; e++) {
            std::string s = std::to_string(e);
            std::string w = rk("W" + s, r), mk = rk("M" + s, r);
            gd.input(w, {H, Fr});
            gd.input(mk, {T, Fr});
            wsh[e].push_back(w);
            msh[e].push_back(mk);
            gd.tensor(rk("z" + s, r), {T, Fr});
            gd.tensor(rk("y" + s, r), {T, Fr});
            gd.tensor(rk("load" + s, r), {Fr});
            gd.node(rk("expert" + s, r), "core.matmul", {rk("X", r), w}, {rk("z" + s, r)});
            gd.node(rk("mask" + s, r), "core.mul", {mk, rk("z" + s, r)}, {rk("y" + s, r)});
            gd.node(rk("load" + s, r), "core.reduce_sum", {rk("y" + s, r)}, {rk("load" + s, r)},
                    {{"dim", 0}});
        }
        gd.tensor(rk("part", r), {T, Fr});
        gd.node(rk("route", r), "core.sum", {rk("y1", r), rk("y2", r)}, {rk("part", r)});
        parts.push_back(rk("part", r));
        gd.tensor(rk("aux", r), {});
        gd.node(rk("aux", r), "core.mse_loss", {rk("load1", r), rk("load2", r)}, {rk("aux", r)});
        if (!scale_bug) {
            gd.tensor(rk("auxs", r), {});
            gd.node(rk("aux_scale", r), "core.div_scalar", {rk("aux", r)}, {rk("auxs", r)},
                    {{"value", d}});
            auxs.push_back(rk("auxs", r));
        } else {
            auxs.push_back(rk("aux", r));
        }
    }
    gd.outputs = parts;
    gd.outputs.insert(gd.outputs.end(), auxs.begin(), auxs.end());
    f.gs = gs.build();
    f.gd = gd.build();
    for (int e = 1; e <= 2; e++) {
        std::string s = std::to_string(e);
        f.ri.add("W" + s, nested_concat(wsh[e], 1));
        f.ri.add("M" + s, nested_concat(msh[e], 1));
    }
    if (!scale_bug) {
        Relation ro;
        ro.add("y", flat_concat(parts, 1));
        ro.add("aux", flat_sum(auxs));
        f.expected_ro = ro;
    }
    return f;
}

// --- MoE under EP: whole experts distributed across ranks, outputs combined
// by summation of rank-local partials ---

Fixture gen_moe_ep(const ModelSpec& m, int d) {
    int T = m.rows, H = m.hidden, F = m.hidden, E = m.experts;
    require(E >= 2, "moe/ep: at least two experts");
    require(E % d == 0, "moe/ep: experts must be divisible by the degree");
    int local = E / d;

    GraphBuilder gs;
    gs.input("X", {T, H});
    std::vector<std::string> ys;
    for (int e = 1; e <= E; e++) {
        std::string s = std::to_string(e);
        gs.input("W" + s, {H, F});
        gs.input("M" + s, {T, F});
        gs.tensor("z" + s, {T, F});
        gs.tensor("y" + s, {T, F});
        gs.node("expert" + s, "core.matmul", {"X", "W" + s}, {"z" + s});
        gs.node("mask" + s, "core.mul", {"M" + s, "z" + s}, {"y" + s});
        ys.push_back("y" + s);
    }
    gs.tensor("y", {T, F});
    gs.node("route", "core.sum", ys, {"y"});
    gs.outputs = {"y"};

    GraphBuilder gd;
    Fixture f;
    std::vector<std::string> parts;
    for (int r = 0; r < d; r++) {
        gd.input(rk("X", r), {T, H});
        f.ri.add("X", tref(rk("X", r)));
        std::vector<std::string> local_ys;
        for (int e = r * local + 1; e <= (r + 1) * local; e++) {
            std::string s = std::to_string(e);
            gd.input("W" + s + "_d", {H, F});
            gd.input("M" + s + "_d", {T, F});
            gd.tensor(rk("z" + s, r), {T, F});
            gd.tensor(rk("y" + s, r), {T, F});
            gd.node(rk("expert" + s, r), "core.matmul", {rk("X", r), "W" + s + "_d"},
                    {rk("z" + s, r)});
            gd.node(rk("mask" + s, r), "core.mul", {"M" + s + "_d", rk("z" + s, r)},
                    {rk("y" + s, r)});
            local_ys.push_back(rk("y" + s, r));
            f.ri.add("W" + s, tref("W" + s + "_d"));
            f.ri.add("M" + s, tref("M" + s + "_d"));
        }
        gd.tensor(rk("part", r), {T, F});
        if (local_ys.size() == 1)
            gd.node(rk("route", r), "core.identity", local_ys, {rk("part", r)});
        else
            gd.node(rk("route", r), "core.sum", local_ys, {rk("part", r)});
        parts.push_back(rk("part", r));
    }
    gd.outputs = parts;
    f.gs = gs.build();
    f.gd = gd.build();
    Relation ro;
    ro.add("y", flat_sum(parts));
    f.expected_ro = ro;
    return f;
}

// --- regression model with MSE loss under gradient accumulation: each
// microbatch loss must be rescaled by the step count before accumulation ---

Fixture gen_regression_grad_accum(const ModelSpec& m, int k, std::optional<BugSpec::Id> bug) {
    int T = m.rows, H = m.hidden;
    require(T % k == 0, "regression/grad_accum: rows must be divisible by the step count");
    bool scale_bug = bug == BugSpec::Id::GradAccumScale;
    int Tr = T / k;

    GraphBuilder gs;
    gs.input("X", {T, H});
    gs.input("W", {H, 1});
    gs.input("Tgt", {T, 1});
    gs.tensor("P", {T, 1});
    gs.tensor("loss", {});
    gs.node("predict", "core.matmul", {"X", "W"}, {"P"});
    gs.node("loss", "core.mse_loss", {"P", "Tgt"}, {"loss"});
    gs.outputs = {"loss"};

    GraphBuilder gd;
    Fixture f;
    std::vector<std::string> xs, tgs, terms;
    for (int i = 0; i < k; i++) {
        gd.input(rk("X", i), {Tr, H});
        gd.input(rk("W", i), {H, 1});
        gd.input(rk("Tgt", i), {Tr, 1});
        xs.push_back(rk("X", i));
        tgs.push_back(rk("Tgt", i));
        f.ri.add("W", tref(rk("W", i)));
        gd.tensor(rk("P", i), {Tr, 1});
        gd.tensor(rk("m", i), {});
        gd.node(rk("predict", i), "core.matmul", {rk("X", i), rk("W", i)}, {rk("P", i)});
        gd.node(rk("loss", i), "core.mse_loss", {rk("P", i), rk("Tgt", i)}, {rk("m", i)});
        if (!scale_bug) {
            gd.tensor(rk("s", i), {});
            gd.node(rk("scale", i), "core.div_scalar", {rk("m", i)}, {rk("s", i)},
                    {{"value", k}});
            terms.push_back(rk("s", i));
        } else {
            terms.push_back(rk("m", i));
        }
    }
    gd.tensor("acc", {});
    gd.node("accum", "core.sum", terms, {"acc"});
    gd.outputs = {"acc"};
    f.gs = gs.build();
    f.gd = gd.build();
    f.ri.add("X", nested_concat(xs, 0));
    f.ri.add("Tgt", nested_concat(tgs, 0));
    if (!scale_bug) {
        Relation ro;
        ro.add("loss", tref("acc"));
        f.expected_ro = ro;
    }
    return f;
}

} // namespace

ModelSpec::Family family_from_string(const std::string& s) {
    if (s == "matmul_sub") return ModelSpec::Family::MatmulSub;
    if (s == "mlp") return ModelSpec::Family::Mlp;
    if (s == "attention_rope") return ModelSpec::Family::AttentionRope;
    if (s == "moe") return ModelSpec::Family::Moe;
    if (s == "regression_mse") return ModelSpec::Family::RegressionMse;
    throw SpecError("unknown model family: " + s);
}

std::string family_to_string(ModelSpec::Family f) {
    switch (f) {
        case ModelSpec::Family::MatmulSub: return "matmul_sub";
        case ModelSpec::Family::Mlp: return "mlp";
        case ModelSpec::Family::AttentionRope: return "attention_rope";
        case ModelSpec::Family::Moe: return "moe";
        default: return "regression_mse";
    }
}

StrategySpec::Kind strategy_from_string(const std::string& s) {
    if (s == "tp") return StrategySpec::Kind::Tp;
    if (s == "sp") return StrategySpec::Kind::Sp;
    if (s == "ep") return StrategySpec::Kind::Ep;
    if (s == "grad_accum") return StrategySpec::Kind::GradAccum;
    throw SpecError("unknown strategy: " + s);
}

std::string strategy_to_string(StrategySpec::Kind k) {
    switch (k) {
        case StrategySpec::Kind::Tp: return "tp";
        case StrategySpec::Kind::Sp: return "sp";
        case StrategySpec::Kind::Ep: return "ep";
        default: return "grad_accum";
    }
}

BugSpec::Id bug_from_string(const std::string& s) {
    if (s == "rope_offset") return BugSpec::Id::RopeOffset;
    if (s == "auxloss_scale") return BugSpec::Id::AuxlossScale;
    if (s == "pad_slice_mismatch") return BugSpec::Id::PadSliceMismatch;
    if (s == "shard_vs_replicate") return BugSpec::Id::ShardVsReplicate;
    if (s == "missing_ln_aggregate") return BugSpec::Id::MissingLnAggregate;
    if (s == "grad_accum_scale") return BugSpec::Id::GradAccumScale;
    throw SpecError("unknown bug id: " + s);
}

std::string bug_to_string(BugSpec::Id id) {
    switch (id) {
        case BugSpec::Id::RopeOffset: return "rope_offset";
        case BugSpec::Id::AuxlossScale: return "auxloss_scale";
        case BugSpec::Id::PadSliceMismatch: return "pad_slice_mismatch";
        case BugSpec::Id::ShardVsReplicate: return "shard_vs_replicate";
        case BugSpec::Id::MissingLnAggregate: return "missing_ln_aggregate";
        default: return "grad_accum_scale";
    }
}

namespace {

std::string failure_node_for(BugSpec::Id id) {
    switch (id) {
        case BugSpec::Id::RopeOffset: return "rope_bwd";
        case BugSpec::Id::AuxlossScale: return "aux";
        case BugSpec::Id::PadSliceMismatch: return "l0_mm2";
        case BugSpec::Id::ShardVsReplicate: return "l0_mm1";
        case BugSpec::Id::MissingLnAggregate: return ""; // verdict stays refines
        case BugSpec::Id::GradAccumScale: return "loss";
    }
    return "";
}

} // namespace

Fixture generate(const ModelSpec& model, const StrategySpec& strat,
                 const std::optional<BugSpec>& bug) {
    register_harness_extensions();
    require(strat.degree >= 2, "strategy degree must be at least 2");
    require(model.layers >= 1 && model.hidden >= 1 && model.rows >= 1,
            "model dims must be at least 1");

    std::optional<BugSpec::Id> bug_id;
    if (bug) bug_id = bug->id;
    auto bug_is = [&](BugSpec::Id id) { return bug_id && *bug_id == id; };
    if (bug_id) {
        bool compatible =
            (bug_is(BugSpec::Id::RopeOffset) && model.family == ModelSpec::Family::AttentionRope &&
             strat.kind == StrategySpec::Kind::Sp) ||
            (bug_is(BugSpec::Id::MissingLnAggregate) &&
             model.family == ModelSpec::Family::AttentionRope &&
             strat.kind == StrategySpec::Kind::Sp) ||
            (bug_is(BugSpec::Id::AuxlossScale) && model.family == ModelSpec::Family::Moe &&
             strat.kind == StrategySpec::Kind::Tp) ||
            ((bug_is(BugSpec::Id::PadSliceMismatch) || bug_is(BugSpec::Id::ShardVsReplicate)) &&
             model.family == ModelSpec::Family::Mlp && strat.kind == StrategySpec::Kind::Sp) ||
            (bug_is(BugSpec::Id::GradAccumScale) &&
             model.family == ModelSpec::Family::RegressionMse &&
             strat.kind == StrategySpec::Kind::GradAccum);
        if (!compatible)
            throw SpecError("bug '" + bug_to_string(*bug_id) + "' does not apply to (" +
                            family_to_string(model.family) + ", " +
                            strategy_to_string(strat.kind) + ")");
    }

    Fixture f;
    switch (model.family) {
        case ModelSpec::Family::MatmulSub:
            require(strat.kind == StrategySpec::Kind::Tp, "matmul_sub supports tp only");
            f = gen_matmul_sub(model, strat.degree);
            break;
        case ModelSpec::Family::Mlp:
            if (strat.kind == StrategySpec::Kind::Tp) {
                f = gen_mlp_tp(model, strat.degree);
            } else if (strat.kind == StrategySpec::Kind::Sp) {
                f = gen_mlp_sp(model, strat.degree, bug_id);
            } else {
                throw SpecError("mlp supports tp and sp");
            }
            break;
        case ModelSpec::Family::AttentionRope:
            if (strat.kind == StrategySpec::Kind::Tp) {
                f = gen_attention_tp(model, strat.degree);
            } else if (strat.kind == StrategySpec::Kind::Sp) {
                f = gen_attention_sp(model, strat.degree, bug_id);
            } else {
                throw SpecError("attention_rope supports tp and sp");
            }
            break;
        case ModelSpec::Family::Moe:
            if (strat.kind == StrategySpec::Kind::Tp) {
                f = gen_moe_tp(model, strat.degree, bug_id);
            } else if (strat.kind == StrategySpec::Kind::Ep) {
                f = gen_moe_ep(model, strat.degree);
            } else {
                throw SpecError("moe supports tp and ep");
            }
            break;
        case ModelSpec::Family::RegressionMse:
            require(strat.kind == StrategySpec::Kind::GradAccum,
                    "regression_mse supports grad_accum only");
            f = gen_regression_grad_accum(model, strat.degree, bug_id);
            break;
    }

    std::string name = family_to_string(model.family) + "_" + strategy_to_string(strat.kind) +
                       std::to_string(strat.degree);
    std::string verdict = "refines";
    std::string failure_node;
    bool expectation = false;
    std::string description = "clean " + family_to_string(model.family) + " under " +
                              strategy_to_string(strat.kind) + " degree " +
                              std::to_string(strat.degree);
    if (bug_id) {
        name = "bug_" + bug_to_string(*bug_id);
        failure_node = failure_node_for(*bug_id);
        verdict = failure_node.empty() ? "refines" : "refinement_error";
        expectation = failure_node.empty();
        description = "injected bug '" + bug_to_string(*bug_id) + "' on " +
                      family_to_string(model.family) + "/" + strategy_to_string(strat.kind);
    }
    f.name = name;
    f.expected = expected_json(name, verdict, failure_node, expectation, description);
    f.expected["model"] = family_to_string(model.family);
    f.expected["strategy"] = strategy_to_string(strat.kind);
    f.expected["degree"] = strat.degree;
    f.expected["bug"] = bug_id ? ordered_json(bug_to_string(*bug_id)) : ordered_json(nullptr);
    return f;
}

const std::vector<CatalogEntry>& list_fixtures() {
    static const std::vector<CatalogEntry> catalog = [] {
        std::vector<CatalogEntry> c;
        ModelSpec base;
        auto add = [&](const std::string& name, ModelSpec::Family fam, StrategySpec::Kind kind,
                       int degree, std::optional<BugSpec::Id> bug, const std::string& desc,
                       int experts = 2, int heads = 2) {
            ModelSpec m = base;
            m.family = fam;
            m.experts = experts;
            m.heads = heads;
            CatalogEntry e{name, m, StrategySpec{kind, degree},
                           bug ? std::optional<BugSpec>(BugSpec{*bug}) : std::nullopt, desc};
            c.push_back(std::move(e));
        };
        add("matmul_sub_tp2", ModelSpec::Family::MatmulSub, StrategySpec::Kind::Tp, 2, {},
            "two-operator worked example: column/row sharded matmul, reduce-scatter, "
            "per-rank subtract");
        add("mlp_tp2", ModelSpec::Family::Mlp, StrategySpec::Kind::Tp, 2, {},
            "one-layer MLP: column-sharded first matmul, row-sharded second, all-reduce");
        add("mlp_sp2", ModelSpec::Family::Mlp, StrategySpec::Kind::Sp, 2, {},
            "one-layer MLP with row-sharded activations re-gathered through pad/concat/slice");
        add("attention_rope_tp2", ModelSpec::Family::AttentionRope, StrategySpec::Kind::Tp, 2, {},
            "single attention layer, heads sharded, rotary tables replicated");
        add("attention_rope_sp2", ModelSpec::Family::AttentionRope, StrategySpec::Kind::Sp, 2, {},
            "rotary forward/backward on sequence shards plus a cross-rank reduced weight "
            "gradient");
        add("moe_tp2", ModelSpec::Family::Moe, StrategySpec::Kind::Tp, 2, {},
            "two experts column-sharded with a rescaled auxiliary imbalance loss");
        add("moe_ep2", ModelSpec::Family::Moe, StrategySpec::Kind::Ep, 2, {},
            "two experts, one per rank, outputs combined by summation");
        add("moe_ep2_x4", ModelSpec::Family::Moe, StrategySpec::Kind::Ep, 2, {},
            "four experts on two ranks, rank-local partial sums", /*experts=*/4);
        add("regression_grad_accum2", ModelSpec::Family::RegressionMse,
            StrategySpec::Kind::GradAccum, 2, {},
            "MSE regression split into microbatches with rescaled loss accumulation");
        add("bug_rope_offset", ModelSpec::Family::AttentionRope, StrategySpec::Kind::Sp, 2,
            BugSpec::Id::RopeOffset,
            "backward rotary slices use offset 0 on every rank; fails at rope_bwd");
        add("bug_auxloss_scale", ModelSpec::Family::Moe, StrategySpec::Kind::Tp, 2,
            BugSpec::Id::AuxlossScale,
            "auxiliary loss not divided by the degree; fails at the aux loss operator");
        add("bug_pad_slice_mismatch", ModelSpec::Family::Mlp, StrategySpec::Kind::Sp, 2,
            BugSpec::Id::PadSliceMismatch,
            "unpad slices ignore the padding offset; fails at the following matmul");
        add("bug_shard_vs_replicate", ModelSpec::Family::Mlp, StrategySpec::Kind::Sp, 2,
            BugSpec::Id::ShardVsReplicate,
            "weights sharded where replication is required; fails at the first matmul");
        add("bug_missing_ln_aggregate", ModelSpec::Family::AttentionRope, StrategySpec::Kind::Sp,
            2, BugSpec::Id::MissingLnAggregate,
            "weight gradient never all-reduced; refines but differs from the expected relation");
        add("bug_grad_accum_scale", ModelSpec::Family::RegressionMse,
            StrategySpec::Kind::GradAccum, 2, BugSpec::Id::GradAccumScale,
            "microbatch losses accumulated without the 1/steps rescale; fails at the loss");
        return c;
    }();
    return catalog;
}

Fixture generate_entry(const CatalogEntry& entry) {
    Fixture f = generate(entry.model, entry.strategy, entry.bug);
    f.name = entry.name;
    f.expected["name"] = entry.name;
    return f;
}

Fixture generate_by_name(const std::string& name) {
    for (const auto& e : list_fixtures())
        if (e.name == name) return generate_entry(e);
    throw SpecError("unknown fixture name: " + name);
}

void write_fixture(const Fixture& f, const std::string& dir) {
    fs::create_directories(dir);
    auto dump = [&](const std::string& file, const nlohmann::ordered_json& j) {
        std::ofstream out(fs::path(dir) / file);
        if (!out) throw Error("cannot write " + file + " under " + dir);
        out << j.dump(2) << "\n";
    };
    dump("gs.json", f.gs.to_json());
    dump("gd.json", f.gd.to_json());
    dump("ri.json", f.ri.to_json());
    dump("expected.json", f.expected);
    if (f.expected_ro) dump("expected_ro.json", f.expected_ro->to_json());
}

LoadedFixture load_fixture(const std::string& dir) {
    register_harness_extensions();
    auto read = [&](const std::string& file) {
        std::ifstream in(fs::path(dir) / file);
        if (!in) throw SchemaError("cannot open " + file + " under " + dir);
        nlohmann::json j;
        in >> j;
        return j;
    };
    LoadedFixture lf{ComputationGraph::from_json(read("gs.json")),
                     ComputationGraph::from_json(read("gd.json")),
                     Relation::from_json(read("ri.json")), read("expected.json"), std::nullopt};
    if (fs::exists(fs::path(dir) / "expected_ro.json"))
        lf.expected_ro = Relation::from_json(read("expected_ro.json"));
    return lf;
}

void register_harness_extensions() {
    static bool done = [] {
        auto& ops = OpRegistry::instance();

        // Rotary position embedding on [rows, width] with an even width:
        // out = x * cos + rotate_half(x) * sin.
        auto rope_eval = [](bool backward) {
            return [backward](const std::vector<NDArray>& in, const Attrs&, const DimEnv&) {
                const NDArray &x = in[0], &c = in[1], &s = in[2];
                auto shape = x.shape();
                std::int64_t w = shape.back();
                std::int64_t half = w / 2;
                std::int64_t rows = x.size() / w;
                NDArray out(shape);
                for (std::int64_t r = 0; r < rows; r++) {
                    for (std::int64_t j = 0; j < w; j++) {
                        double xv = x.data()[r * w + j];
                        double cv = c.data()[r * w + j];
                        if (!backward) {
                            double rot = j < half ? -x.data()[r * w + j + half]
                                                  : x.data()[r * w + j - half];
                            out.data()[r * w + j] = xv * cv + rot * s.data()[r * w + j];
                        } else {
                            // Adjoint of the rotation: transpose of the
                            // forward permutation-with-sign.
                            double rot = j < half
                                             ? x.data()[r * w + j + half] * s.data()[r * w + j + half]
                                             : -x.data()[r * w + j - half] * s.data()[r * w + j - half];
                            out.data()[r * w + j] = xv * cv + rot;
                        }
                    }
                }
                return std::vector<NDArray>{out};
            };
        };
        auto rope_infer = [](const std::vector<Shape>& in, const Attrs&,
                             const ConstraintStore& cs) {
            if (in[0].empty()) throw ShapeError("rope: rank-0 input");
            if (in[0].back().is_concrete() && in[0].back().value() % 2 != 0)
                throw ShapeError("rope: width must be even");
            for (int i = 1; i < 3; i++) {
                if (in[i].size() != in[0].size()) throw ShapeError("rope: table rank mismatch");
                for (size_t d = 0; d < in[0].size(); d++)
                    if (decide_cmp(in[i][d], in[0][d], CmpRel::Eq, cs) == Tristate::False)
                        throw ShapeError("rope: table shape mismatch");
            }
            return std::vector<Shape>{in[0]};
        };
        for (const char* kind : {"custom.rope", "custom.rope_bwd"}) {
            OpSchema schema;
            schema.kind = kind;
            schema.min_inputs = 3;
            schema.max_inputs = 3;
            schema.infer = rope_infer;
            schema.eval = rope_eval(std::string(kind) == "custom.rope_bwd");
            ops.register_op(std::move(schema));
        }

        // Row distribution: applying rotary embedding to row shards with the
        // matching table shards equals applying it to the gathered rows.
        auto rope_lemma = [](const char* name, const char* op) {
            Lemma l;
            l.name = name;
            l.family = "concat";
            l.direction = Lemma::Direction::Both;
            std::string o = op;
            l.lhs = parse_pattern("(" + o + " (concat ?x1 ?x2 :dim 0) (concat ?c1 ?c2 :dim 0) "
                                  "(concat ?s1 ?s2 :dim 0))");
            l.rhs = parse_pattern("(concat (" + o + " ?x1 ?c1 ?s1) (" + o +
                                  " ?x2 ?c2 ?s2) :dim 0)");
            l.condition = [](const MatchBindings& b, const EGraph& eg) -> Tristate {
                auto rows = [&](const char* v) -> std::optional<DimExpr> {
                    auto it = b.vars.find(v);
                    if (it == b.vars.end()) return std::nullopt;
                    auto s = eg.shape_of(it->second);
                    if (!s || s->empty()) return std::nullopt;
                    return (*s)[0];
                };
                auto x1 = rows("x1"), c1 = rows("c1"), s1 = rows("s1");
                if (!x1 || !c1 || !s1) return Tristate::Unknown;
                Tristate a = decide_cmp(*x1, *c1, CmpRel::Eq, eg.constraints());
                Tristate b2 = decide_cmp(*x1, *s1, CmpRel::Eq, eg.constraints());
                if (a == Tristate::False || b2 == Tristate::False) return Tristate::False;
                if (a == Tristate::Unknown || b2 == Tristate::Unknown) return Tristate::Unknown;
                return Tristate::True;
            };
            l.samples = {LemmaSample{{{"X1", {2, 4}}, {"X2", {3, 4}}, {"C1", {2, 4}},
                                      {"C2", {3, 4}}, {"S1", {2, 4}}, {"S2", {3, 4}}},
                                     "(" + o + " (concat (t X1) (t X2) :dim 0) (concat (t C1) "
                                     "(t C2) :dim 0) (concat (t S1) (t S2) :dim 0))",
                                     "(concat (" + o + " (t X1) (t C1) (t S1)) (" + o +
                                     " (t X2) (t C2) (t S2)) :dim 0)",
                                     {}}};
            return l;
        };
        LemmaRegistry::instance().register_lemma(rope_lemma("rope-of-concat-rows", "custom.rope"));
        LemmaRegistry::instance().register_lemma(
            rope_lemma("rope-bwd-of-concat-rows", "custom.rope_bwd"));
        return true;
    }();
    (void)done;
}

} // namespace refinery
