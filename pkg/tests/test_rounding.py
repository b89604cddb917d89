"""Offline dependent rounding: validation, marginal exactness, the
at-most-one structural invariant, and the statistics report."""

import math
from collections import deque

import numpy as np
import pytest

from dirmech.randomness import RngState
from dirmech.rounding import (
    BipartiteInstance,
    StatRow,
    dep_round,
    dep_round_batch,
    estimate_stats,
    selection_stats,
    stable_set_check,
    validate_instance,
)


def small_instance():
    return BipartiteInstance(
        left=["u0", "u1"],
        right=["v0", "v1", "v2"],
        edges=[
            ("u0", "v0", 0.3, 0.2),
            ("u0", "v1", 0.5, 0.3),
            ("u1", "v0", 0.4, 0.5),
            ("u1", "v2", 1.0, 0.3),
        ],
    )


def test_json_round_trip():
    inst = small_instance()
    again = BipartiteInstance.from_json(inst.to_json())
    assert again.left == inst.left
    assert again.right == inst.right
    assert again.edges == inst.edges


def test_validate_clean_instance():
    assert validate_instance(small_instance()) == []


def test_validate_catches_violations():
    bad = BipartiteInstance(
        left=["u0", "u0"],
        right=["v0"],
        edges=[
            ("u0", "v0", 0.7, 0.6),
            ("u0", "v0", 0.7, 0.6),
            ("uX", "v0", 0.1, 0.1),
            ("u0", "vX", 0.1, 0.1),
        ],
    )
    report = "; ".join(validate_instance(bad))
    assert "duplicate left" in report
    assert "duplicate edge" in report
    assert "undeclared left node" in report
    assert "undeclared right node" in report
    assert "sum of x" in report  # 1.4 at v0
    assert "sum of rho" in report  # 1.2 at u0
    bad2 = BipartiteInstance(left=["u"], right=["v"], edges=[("u", "v", 1.5, -0.1)])
    report2 = "; ".join(validate_instance(bad2))
    assert "outside [0,1]" in report2


def test_dep_round_rejects_invalid():
    bad = BipartiteInstance(left=["u"], right=["v"], edges=[("u", "v", 2.0, 0.5)])
    with pytest.raises(ValueError):
        dep_round(bad, RngState(0))
    with pytest.raises(ValueError):
        dep_round_batch(bad, 10, RngState(0))


def test_at_most_one_per_right_every_trial():
    inst = small_instance()
    X = dep_round_batch(inst, 20_000, RngState(1))
    for v, idxs in inst.edges_by_right().items():
        assert np.all(X[:, idxs].sum(axis=1) <= 1)


def test_marginal_exactness():
    inst = small_instance()
    trials = 200_000
    X = dep_round_batch(inst, trials, RngState(2))
    for i, (u, v, x, rho) in enumerate(inst.edges):
        emp = X[:, i].mean()
        hw = 4.0 * math.sqrt(max(x * (1 - x), 1e-12) / trials)
        assert abs(emp - x) <= hw, (i, emp, x)
    # the x = 1 edge is always selected
    assert X[:, 3].all()


def test_zero_weight_edge_never_selected():
    inst = BipartiteInstance(
        left=["u"], right=["v", "w"],
        edges=[("u", "v", 0.0, 0.0), ("u", "w", 0.5, 0.4)],
    )
    X = dep_round_batch(inst, 5000, RngState(3))
    assert not X[:, 0].any()


def test_degenerate_gap_marginal():
    # a lone edge with x(N(v)) = x_e exercises the independent-clock
    # completion of the selection rule; the marginal must still be x_e
    inst = BipartiteInstance(left=["u"], right=["v"], edges=[("u", "v", 0.4, 0.3)])
    trials = 200_000
    X = dep_round_batch(inst, trials, RngState(4))
    emp = X[:, 0].mean()
    assert abs(emp - 0.4) <= 4.0 * math.sqrt(0.4 * 0.6 / trials)


def test_same_left_negative_correlation():
    inst = BipartiteInstance(
        left=["u"], right=["v", "w"],
        edges=[("u", "v", 0.5, 0.45), ("u", "w", 0.5, 0.45)],
    )
    trials = 200_000
    X = dep_round_batch(inst, trials, RngState(5))
    joint = (X[:, 0] & X[:, 1]).mean()
    assert joint < 0.25  # strictly below the independent product


def _line_graph_distance(edges, a, b):
    """BFS distance in the line graph; the brute-force oracle."""
    def adjacent(i, j):
        return i != j and (edges[i][0] == edges[j][0] or edges[i][1] == edges[j][1])

    seen = {a: 0}
    queue = deque([a])
    while queue:
        cur = queue.popleft()
        for nxt in range(len(edges)):
            if nxt not in seen and adjacent(cur, nxt):
                seen[nxt] = seen[cur] + 1
                queue.append(nxt)
    return seen.get(b, math.inf)


def test_stable_set_check_against_bfs_oracle():
    rng = RngState(6)
    from dirmech.cli import _gen_bipartite

    inst = _gen_bipartite(4, 4, rng)
    n = len(inst.edges)
    if n < 3:
        pytest.skip("generator produced too few edges")
    gen = rng.generator
    for _ in range(50):
        size = int(gen.integers(2, 4))
        S = list(gen.choice(n, size=size, replace=False))
        expected = all(
            _line_graph_distance(inst.edges, int(a), int(b)) != 2
            for ai, a in enumerate(S)
            for b in S[ai + 1:]
        )
        assert stable_set_check(inst, [int(i) for i in S]) == expected
    with pytest.raises(ValueError):
        stable_set_check(inst, [n + 5])


def test_selection_stats_report_structure():
    inst = small_instance()
    trials = 50_000
    X = dep_round_batch(inst, trials, RngState(7))
    rows = selection_stats(inst, X)
    kinds = {}
    for r in rows:
        assert isinstance(r, StatRow)
        kinds.setdefault(r.kind, []).append(r)
    assert len(kinds["marginal"]) == len(inst.edges)
    # edges 0,1 share u0; edges 2,3 share u1
    same_left_ids = {r.ids for r in kinds["pair_same_left"]}
    assert same_left_ids == {(0, 1), (2, 3)}
    for r in kinds["pair_same_left"]:
        x1 = inst.edges[r.ids[0]][2]
        x2 = inst.edges[r.ids[1]][2]
        assert r.bound <= x1 * x2 + 1e-12  # the correlation bound tightens the product
    # distance-two pairs are informational with an infinite bound
    for r in kinds.get("pair_distance_two", []):
        assert math.isinf(r.bound) and r.passed


def test_selection_stats_stable_sets():
    inst = small_instance()
    X = dep_round_batch(inst, 20_000, RngState(8))
    # edges 1 (u0,v1) and 3 (u1,v2) form a stable set (distance three)
    rows = selection_stats(inst, X, stable_sets=[[1, 3]])
    row = [r for r in rows if r.kind == "stable_set"][0]
    assert row.ids == (1, 3)
    assert row.bound == pytest.approx(0.5 * 1.0)
    with pytest.raises(ValueError):
        selection_stats(inst, X, stable_sets=[[0, 3]])  # distance two via edge 2


def test_estimate_stats_runs_end_to_end():
    inst = small_instance()
    rows = estimate_stats(inst, 50_000, RngState(9))
    assert all(r.passed for r in rows if r.kind == "marginal")


def test_custom_psi_bound_is_used():
    inst = small_instance()
    X = dep_round_batch(inst, 1000, RngState(10))
    rows = selection_stats(inst, X, psi_bound=lambda x1, x2, r1, r2: 0.0)
    for r in rows:
        if r.kind == "pair_same_left":
            assert r.bound == 0.0
