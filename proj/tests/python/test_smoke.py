# Copyright (c) 2026 The Refinery Authors
# SPDX-License-Identifier: Apache-2.0
"""Smoke tests for the python module: the main operations are reachable and
agree with the CLI contract."""

import json
import os
import subprocess

import pytest

refinery = pytest.importorskip("refinery")


@pytest.fixture(scope="module")
def fig_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("fig")
    refinery.generate_fixture("matmul_sub_tp2", str(d))
    return d


def test_catalog_and_lemmas():
    fixtures = refinery.list_fixtures()
    names = {f["name"] for f in fixtures}
    assert "matmul_sub_tp2" in names
    assert sum(1 for f in fixtures if f["bug"]) == 6
    assert len(refinery.builtin_lemmas()) >= 30


def test_graph_roundtrip(fig_dir):
    text = (fig_dir / "gs.json").read_text()
    g = refinery.Graph.from_json(text)
    assert g.topo_order() == ["matmul", "matsub"]
    assert g.outputs == ["F"]
    again = refinery.Graph.from_json(g.to_json())
    assert again.to_json() == g.to_json()


def test_check_refines(fig_dir):
    report = refinery.check(
        (fig_dir / "gs.json").read_text(),
        (fig_dir / "gd.json").read_text(),
        (fig_dir / "ri.json").read_text(),
    )
    assert report["verdict"] == "refines"
    assert report["certificate"][0]["expr"] == "(concat (t F_1) (t F_2) :dim 0)"
    rc = set(report["node_relations"]["matmul"])
    assert rc == {
        "C := (sum (t C_1) (t C_2))",
        "C := (concat (t D_1) (t D_2) :dim 0)",
    }


def test_bug_fixture_localizes(tmp_path):
    refinery.generate_fixture("bug_shard_vs_replicate", str(tmp_path))
    report = refinery.check_fixture(str(tmp_path))
    assert report["verdict"] == "refinement_error"
    assert report["failure"]["node"] == "l0_mm1"


def test_eval_fixture(fig_dir):
    res = refinery.eval_fixture(str(fig_dir), seed=1)
    assert res["ok"]
    assert res["max_dev"] < 1.0


def test_symbolic_helpers():
    assert refinery.decide_cmp("2*s0", "s0+s0", "==") == "true"
    assert refinery.decide_cmp("s0", "s0+1", "<") == "true"
    assert refinery.decide_cmp("s0+s1", "s2", "==") == "unknown"
    assert refinery.decide_cmp("s0", "2", "<", ["s0 <= 1"]) == "true"
    script = refinery.emit_smtlib("s0", "s1", "==", ["s0 == s1"])
    assert script.startswith("(set-logic QF_LIA)")
    assert "(check-sat)" in script


def test_expression_helpers():
    assert refinery.is_clean("(concat (t A) (t B) :dim 0)")
    assert not refinery.is_clean("(matmul (t A) (t B))")
    assert refinery.simplicity("(sum (t C1) (t C2))") == 1
    assert refinery.canonical("(sum (t B) (t A))") == "(sum (t A) (t B))"


def test_graph_errors():
    with pytest.raises(refinery.SchemaError):
        refinery.Graph.from_json("not json")
    bad = json.dumps(
        {
            "tensors": [{"id": "X", "shape": [2]}],
            "nodes": [{"id": "n", "op": "core.relu", "inputs": ["Z"], "outputs": ["X"]}],
            "inputs": [],
            "outputs": ["X"],
        }
    )
    with pytest.raises(refinery.GraphValidationError):
        refinery.Graph.from_json(bad)


@pytest.mark.skipif("REFINERY_BIN" not in os.environ, reason="CLI path not provided")
def test_cli_exit_codes(fig_dir, tmp_path):
    binary = os.environ["REFINERY_BIN"]
    ok = subprocess.run(
        [binary, "check", "--gs", str(fig_dir / "gs.json"), "--gd", str(fig_dir / "gd.json"),
         "--ri", str(fig_dir / "ri.json")],
        capture_output=True,
    )
    assert ok.returncode == 0

    bug = tmp_path / "bug"
    refinery.generate_fixture("bug_grad_accum_scale", str(bug))
    err = subprocess.run(
        [binary, "check", "--gs", str(bug / "gs.json"), "--gd", str(bug / "gd.json"),
         "--ri", str(bug / "ri.json")],
        capture_output=True,
    )
    assert err.returncode == 2

    diff = tmp_path / "diff"
    refinery.generate_fixture("bug_missing_ln_aggregate", str(diff))
    mism = subprocess.run(
        [binary, "check", "--gs", str(diff / "gs.json"), "--gd", str(diff / "gd.json"),
         "--ri", str(diff / "ri.json"), "--expected", str(diff / "expected_ro.json")],
        capture_output=True,
    )
    assert mism.returncode == 3

    usage = subprocess.run([binary, "check", "--gs", "missing.json"], capture_output=True)
    assert usage.returncode == 1
