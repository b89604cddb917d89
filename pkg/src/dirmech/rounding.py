"""Dependent rounding on a bipartite instance via the Dirichlet copula.

Each left-node u draws copula uniforms A_e for its edges, turned into
exponential clocks Z_e = -log(A_e)/x_e.  Each right-node v then selects
the incident edge (if any) satisfying

    (1 - x_e) Z_e < (x(N(v)) - x_e) * min_{f in N(v)\\{e}} Z_f

which marginally selects e with probability exactly x_e while edges
sharing a left-node are strongly negatively correlated.

Conventions for the degenerate corners:

* x_e = 0 gives Z_e = +inf and the edge is never selected;
* the min over an empty neighbour set is +inf; when x(N(v)) = x_e the
  right side is the indeterminate 0 * inf, and the selection rule is
  completed by its continuity limit: compare (1 - x_e) Z_e against an
  independent standard Exponential.  This keeps the conditional law
  E[X_e | A_e] = A_e^(1/x_e - 1) that every marginal and correlation
  guarantee rests on, and reduces to "always selected" when x_e = 1;
* floating-point ties in the strict inequality resolve as non-selection.

Left-nodes are processed in sorted-identifier order with one RNG
substream each, so outcomes are reproducible and order-independent.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .copula import exponential_clocks, uniformize_parts
from .randomness import DirichletParams, sample_dirichlet_full

__all__ = [
    "BipartiteInstance",
    "RoundingOutcome",
    "StatRow",
    "validate_instance",
    "dep_round",
    "dep_round_batch",
    "stable_set_check",
    "estimate_stats",
]

_SLACK = 1e-12


@dataclass
class BipartiteInstance:
    """Bipartite assignment graph with per-edge weight x and rate rho."""

    left: list
    right: list
    edges: list  # (u, v, x_e, rho_e) tuples

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else text
        edges = [(e["u"], e["v"], float(e["x"]), float(e["rho"])) for e in data["edges"]]
        return cls(left=list(data["left"]), right=list(data["right"]), edges=edges)

    def to_json(self):
        return json.dumps(
            {
                "left": list(self.left),
                "right": list(self.right),
                "edges": [
                    {"u": u, "v": v, "x": x, "rho": rho}
                    for (u, v, x, rho) in self.edges
                ],
            }
        )

    def edges_by_left(self):
        by_u = {u: [] for u in self.left}
        for idx, (u, v, x, rho) in enumerate(self.edges):
            by_u[u].append(idx)
        return by_u

    def edges_by_right(self):
        by_v = {v: [] for v in self.right}
        for idx, (u, v, x, rho) in enumerate(self.edges):
            by_v[v].append(idx)
        return by_v


@dataclass
class RoundingOutcome:
    """One realization: selection indicators plus the clock variables."""

    X: np.ndarray  # bool per edge
    Z: np.ndarray  # exponential clock per edge
    A: np.ndarray  # copula uniform per edge


def validate_instance(inst):
    """Structural and degree-sum checks; returns a list of violation
    strings (empty iff the instance is feasible for dep_round)."""
    violations = []
    left_set, right_set = set(inst.left), set(inst.right)
    if len(left_set) != len(inst.left):
        violations.append("duplicate left node identifiers")
    if len(right_set) != len(inst.right):
        violations.append("duplicate right node identifiers")
    seen_pairs = set()
    x_by_right = {v: 0.0 for v in right_set}
    rho_by_left = {u: 0.0 for u in left_set}
    for (u, v, x, rho) in inst.edges:
        if u not in left_set:
            violations.append(f"edge ({u},{v}) references undeclared left node {u}")
            continue
        if v not in right_set:
            violations.append(f"edge ({u},{v}) references undeclared right node {v}")
            continue
        if (u, v) in seen_pairs:
            violations.append(f"duplicate edge ({u},{v})")
        seen_pairs.add((u, v))
        if not (0.0 <= x <= 1.0):
            violations.append(f"edge ({u},{v}) has x={x} outside [0,1]")
        if not (0.0 <= rho <= 1.0):
            violations.append(f"edge ({u},{v}) has rho={rho} outside [0,1]")
        x_by_right[v] += x
        rho_by_left[u] += rho
    for v in inst.right:
        if x_by_right.get(v, 0.0) > 1.0 + _SLACK:
            violations.append(f"right node {v}: sum of x = {x_by_right[v]} exceeds 1")
    for u in inst.left:
        if rho_by_left.get(u, 0.0) > 1.0 + _SLACK:
            violations.append(f"left node {u}: sum of rho = {rho_by_left[u]} exceeds 1")
    return violations


def _draw_clocks(inst, trials, rng):
    """(A, Z) arrays of shape (trials, n_edges): copula uniforms and the
    exponential clocks, drawn per left-node on independent substreams."""
    n = len(inst.edges)
    A = np.empty((trials, n))
    Z = np.empty((trials, n))
    by_u = inst.edges_by_left()
    order = sorted(inst.left, key=str)
    subs = rng.split(len(order) + 1)
    aux = subs[-1]
    for sub, u in zip(subs, order):
        idxs = by_u[u]
        if not idxs:
            continue
        rho = np.array([inst.edges[i][3] for i in idxs])
        xs = np.array([inst.edges[i][2] for i in idxs])
        T, Tc, log_T = sample_dirichlet_full(
            DirichletParams(np.clip(rho, 0.0, 1.0)), trials, sub
        )
        Au, Ac = uniformize_parts(T, Tc, rho, sub, log_T=log_T)
        A[:, idxs] = Au
        Z[:, idxs] = exponential_clocks(Au, Ac, xs)
    return A, Z, aux


def _select(inst, Z, aux_rng):
    """Apply the right-node selection rule to clock matrix Z (trials, n).

    aux_rng supplies the independent Exponentials for degenerate
    comparisons (x(N(v)) = x_e, where the other clocks carry no weight).
    """
    trials = Z.shape[0]
    X = np.zeros_like(Z, dtype=bool)
    for v, idxs in inst.edges_by_right().items():
        if not idxs:
            continue
        xs = np.array([inst.edges[i][2] for i in idxs])
        total = xs.sum()
        Zv = Z[:, idxs]
        m = len(idxs)
        if m == 1:
            min_others = np.full(trials, np.inf)
            min_others = min_others[:, None]
        else:
            part = np.partition(Zv, 1, axis=1)
            smallest, second = part[:, 0], part[:, 1]
            is_min = Zv == smallest[:, None]
            # break ties: only the first argmin column counts as "the" min
            first_min = np.cumsum(is_min, axis=1) == 1
            is_min &= first_min
            min_others = np.where(is_min, second[:, None], smallest[:, None])
        for col, i in enumerate(idxs):
            x_e = xs[col]
            gap = total - x_e
            lhs = (1.0 - x_e) * Zv[:, col]
            if gap <= _SLACK:
                # the rule degenerates to 0*inf; its continuity limit is a
                # race against an independent unit-rate clock, preserving
                # E[X_e | A_e] = A_e^(1/x_e - 1)
                X[:, i] = lhs < aux_rng.generator.exponential(size=trials)
            else:
                rhs = gap * min_others[:, col]
                X[:, i] = lhs < rhs
    return X


def dep_round(inst, rng):
    """One rounding trial; raises ValueError with the validation report if
    the instance is infeasible."""
    violations = validate_instance(inst)
    if violations:
        raise ValueError("invalid instance: " + "; ".join(violations))
    A, Z, aux = _draw_clocks(inst, 1, rng)
    X = _select(inst, Z, aux)
    return RoundingOutcome(X=X[0], Z=Z[0], A=A[0])


def dep_round_batch(inst, trials, rng):
    """Selection indicator matrix of shape (trials, n_edges)."""
    violations = validate_instance(inst)
    if violations:
        raise ValueError("invalid instance: " + "; ".join(violations))
    _, Z, aux = _draw_clocks(inst, trials, rng)
    return _select(inst, Z, aux)


def _line_graph_adjacent(e1, e2):
    (u1, v1) = e1
    (u2, v2) = e2
    return (u1, v1) != (u2, v2) and (u1 == u2 or v1 == v2)


def stable_set_check(inst, edge_ids):
    """True iff no pair of the given edges is at line-graph distance
    exactly two (distance one, i.e. sharing an endpoint, is allowed)."""
    n = len(inst.edges)
    for i in edge_ids:
        if not (0 <= i < n):
            raise ValueError(f"unknown edge id {i}")
    pairs = [(inst.edges[i][0], inst.edges[i][1]) for i in edge_ids]
    all_pairs = [(u, v) for (u, v, _, _) in inst.edges]
    for a in range(len(pairs)):
        for b in range(a + 1, len(pairs)):
            e1, e2 = pairs[a], pairs[b]
            if e1 == e2 or _line_graph_adjacent(e1, e2):
                continue
            # distance two iff some edge is adjacent to both
            if any(
                _line_graph_adjacent(e1, f) and _line_graph_adjacent(e2, f)
                for f in all_pairs
            ):
                return False
    return True


@dataclass
class StatRow:
    kind: str
    ids: tuple
    empirical: float
    bound: float
    half_width: float
    passed: bool


def _moment_row(kind, ids, values, bound, trials):
    emp = float(values.mean())
    hw = 4.0 * math.sqrt(max(emp * (1.0 - emp), 0.0) / trials)
    return StatRow(kind, ids, emp, bound, hw, emp <= bound + hw)


def estimate_stats(inst, trials, rng, stable_sets=None, psi_bound=None):
    """Monte Carlo report: per-edge marginals, per-pair joint moments, and
    product moments over supplied stable sets, each against its theoretical
    bound with a 4-sigma half-width.

    psi_bound(x1, x2, rho1, rho2) supplies the pair bound for same-left
    pairs; defaults to the 3rd-order certified upper bound.
    """
    X = dep_round_batch(inst, trials, rng)
    return selection_stats(inst, X, stable_sets, psi_bound)


def selection_stats(inst, X, stable_sets=None, psi_bound=None):
    """The estimate_stats report computed from an existing selection
    matrix X of shape (trials, n_edges)."""
    if psi_bound is None:
        from .psi import PsiQuery, psi_upper_bound

        def psi_bound(x1, x2, r1, r2):
            return psi_upper_bound(PsiQuery(x1, x2, r1, r2), 3, 3)

    trials = X.shape[0]
    X = X.astype(np.float64)
    rows = []
    for i, (u, v, x, rho) in enumerate(inst.edges):
        emp = float(X[:, i].mean())
        hw = 4.0 * math.sqrt(max(x * (1.0 - x), 0.0) / trials)
        rows.append(StatRow("marginal", (i,), emp, x, hw, abs(emp - x) <= hw))
    n = len(inst.edges)
    for i in range(n):
        u1, v1, x1, r1 = inst.edges[i]
        for j in range(i + 1, n):
            u2, v2, x2, r2 = inst.edges[j]
            joint = X[:, i] * X[:, j]
            if u1 == u2:
                if x1 > 0 and x2 > 0 and r1 + r2 <= 1.0:
                    bound = x1 * x2 * psi_bound(x1, x2, r1, r2)
                else:
                    bound = x1 * x2
                rows.append(_moment_row("pair_same_left", (i, j), joint, bound, trials))
            elif v1 != v2:
                if stable_set_check(inst, [i, j]):
                    rows.append(_moment_row("pair_cross", (i, j), joint, x1 * x2, trials))
                else:
                    # distance-two pairs can be positively correlated; no
                    # product bound applies, report the moment informationally
                    emp = float(joint.mean())
                    hw = 4.0 * math.sqrt(max(emp * (1.0 - emp), 0.0) / trials)
                    rows.append(
                        StatRow("pair_distance_two", (i, j), emp, math.inf, hw, True)
                    )
    for S in stable_sets or []:
        if not stable_set_check(inst, S):
            raise ValueError(f"edge set {S} is not stable")
        prod = np.ones(trials)
        bound = 1.0
        for i in S:
            prod *= X[:, i]
            bound *= inst.edges[i][2]
        rows.append(_moment_row("stable_set", tuple(S), prod, bound, trials))
    return rows
