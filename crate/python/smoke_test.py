#!/usr/bin/env python3
"""Smoke test for the wlsh_py extension module.

Build the extension first:

    cargo build -p wlsh-python --release

then run:

    python3 python/smoke_test.py
"""

import math
import os
import shutil
import sys
import tempfile

REPO = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def import_extension():
    candidates = [
        os.path.join(REPO, "target", profile, name)
        for profile in ("release", "debug")
        for name in ("libwlsh_py.so", "wlsh_py.so", "libwlsh_py.dylib")
    ]
    built = next((c for c in candidates if os.path.exists(c)), None)
    if built is None:
        sys.exit("extension not built; run: cargo build -p wlsh-python --release")
    stage = tempfile.mkdtemp(prefix="wlsh_py_")
    shutil.copy(built, os.path.join(stage, "wlsh_py.so"))
    sys.path.insert(0, stage)
    import wlsh_py

    return wlsh_py


def main():
    w = import_extension()

    # Weighted distances.
    assert abs(w.weighted_distance([1.0, 1.0], [3.0, 4.0], [0.0, 0.0]) - 5.0) < 1e-12
    assert abs(w.weighted_distance([2.0, 1.0], [1.0, 2.0], [0.0, 0.0], metric="lp", p=1.0) - 4.0) < 1e-12
    assert abs(w.weighted_distance([1.0, 1.0], [1.0, 0.0], [0.0, 1.0], metric="angular") - math.pi / 2) < 1e-9

    # Parameter formulas and collision probability reference points.
    beta, mu = w.beta_mu(0.5, 0.3, 100_000)
    assert beta == 301 and 0 < mu < beta, (beta, mu)
    p_ref = 0.5 - math.log(2.0) / math.pi
    assert abs(w.collision_probability(1.0, 1.0, 1.0) - p_ref) < 1e-6

    # Sensitivity bounds.
    up, down = w.derived_bounds([2.0, 2.0], [1.0, 1.0], 1.0, 3)
    assert (up, down) == (2.0, 6.0)

    # Deterministic stable sampling.
    a = w.stable_sample(1.3, 8, seed=5)
    b = w.stable_sample(1.3, 8, seed=5)
    assert a == b and len(a) == 8

    # End to end: generate, build, search, compare against brute force.
    ds = w.Dataset.generate(1500, 8, hi=1000, seed=11)
    assert ds.n == 1500 and ds.d == 8
    weights = w.gen_weight_vectors(8, 2, 10, 8, seed=13)
    beta_total, naive_total, groups, tau_min = w.plan_summary(weights, ds.n, hi=1000, tau=600)
    assert beta_total <= naive_total and groups >= 1 and tau_min <= 600

    index = w.Index.build(ds, weights, p=2.0, c=3, tau=600, seed=17)
    assert index.table_count == beta_total
    group, beta_w = index.placement(3)
    assert 0 <= group < index.group_count and beta_w >= 1

    q = ds.point(7)
    res = index.search(ds, q, weight_id=3, k=5)
    assert len(res["neighbors"]) == 5
    assert res["neighbors"][0][0] == 7 and res["neighbors"][0][1] == 0.0
    truth = w.brute_force_knn(ds, weights[3], q, 5)
    for (_, got), (_, want) in zip(res["neighbors"], truth):
        assert got >= want - 1e-9

    # Persistence round trip keeps answers and costs identical.
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "index.wlsh")
        index.save(path)
        back = w.Index.load(path)
        res2 = back.search(ds, q, weight_id=3, k=5)
        assert res2 == res

    # Rho calculators.
    rho_weights = w.gen_weight_vectors(4, 4, 1, 400, seed=19)
    rho, tables = w.alsh_rho("sl", rho_weights, 400_000)
    assert 0.0 < rho < 1.0 and tables > 1.0

    print("smoke test OK")


if __name__ == "__main__":
    main()
