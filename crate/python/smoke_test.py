"""Smoke test for the canon_gnn_py extension.

Builds the extension with cargo unless CANON_GNN_PY points at a built
library, loads it, and exercises each exported operation once.
"""

import importlib.util
import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load_module():
    lib = os.environ.get("CANON_GNN_PY")
    if lib is None:
        subprocess.run(
            ["cargo", "build", "--release", "-p", "canon-gnn-py", "--features", "extension-module"],
            cwd=ROOT,
            check=True,
        )
        lib = os.path.join(ROOT, "target", "release", "libcanon_gnn_py.so")
    tmp = tempfile.mkdtemp()
    target = os.path.join(tmp, "canon_gnn_py.so")
    shutil.copy(lib, target)
    spec = importlib.util.spec_from_file_location("canon_gnn_py", target)
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def main():
    cg = load_module()

    path = cg.Graph(4, [(0, 1), (1, 2), (2, 3)], id="p4")
    relabelled = path.permuted([2, 0, 3, 1]).with_id("p4b")
    ranks, cert = cg.canonical_form(path)
    assert sorted(ranks) == [1, 2, 3, 4]
    assert cert == cg.canonical_form(relabelled)[1]
    assert cg.isomorphic(path, relabelled)
    assert cg.distance(path, relabelled)["distance"] == 0.0

    recoloured = path.with_color(0, 1)
    d = cg.distance(path, recoloured, mode="exact")
    assert d["distance"] == 1.0 and d["exact"]

    a, b = cg.gen_wl_hard_pair(4)
    assert not cg.wl_test(a, b, pe="none")["distinguishable"]
    assert cg.wl_test(a, b, pe="gc")["distinguishable"]

    csl = cg.csl_benchmark(n=13, skips=[2, 3], copies=2, seed=1)
    assert len(csl) == 4
    assert cg.gen_csl(13, 2).n == 13

    labelled = cg.Dataset(
        [
            cg.Graph(3, [(0, 1)], id="x", labels=["a", "b", "c"]),
            cg.Graph(2, [(0, 1)], id="y", labels=["b", "a"]),
        ]
    )
    universe = cg.label_universe(labelled)
    assert universe == ["a", "b", "c"]
    assert cg.ugc_ranks(labelled.get("y"), universe) == [2, 1]
    assert cg.validate(labelled)["witnesses"] == []
    clash = cg.Dataset(
        [
            cg.Graph(2, [(0, 1)], id="x", labels=["a", "b"]),
            cg.Graph(2, [], id="y", labels=["b", "a"]),
        ]
    )
    assert cg.validate(clash)["edge_consistent_ok"] is False

    round_trip = cg.Dataset.from_json(labelled.to_json())
    assert json.loads(round_trip.to_json()) == json.loads(labelled.to_json())

    g1, g2 = cg.gen_counterexample(7, seed=3)
    assert cg.distance(g1, g2)["distance"] == 1.0

    probe = cg.run_probe(sizes=[6], trials=2, seed=0)
    assert len(probe["reports"]) == 2

    report = cg.train(cg.csl_benchmark(n=11, skips=[2, 3], copies=5), layers=2, dim=8, epochs=20)
    assert 0.0 <= report["test_accuracy"] <= 1.0

    try:
        cg.Graph(2, [(0, 5)])
    except ValueError:
        pass
    else:
        raise AssertionError("out-of-range edge accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    sys.exit(main())
