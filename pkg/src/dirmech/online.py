"""Oblivious online matching by running the Dirichlet rounding mechanism
vertex-by-vertex.

Offline nodes U are known up front; each arrival v reveals demands
g_(u,v).  The attenuation function

    F(t) = F0 / sqrt(1 - Fslope * t)

converts the demand profile into selection weights: with r_e the demand
already seen at e's offline node and y_e = Q(r_e, g_e) the attenuated
mass, the edge gets rate rho_e = alpha * y_e and weight

    x_e = (1 - beta) F(r_e) g_e + beta y_e.

Dirichlet draws are produced online by stick-breaking, so the induced
selection law is exactly the offline rounding mechanism on (x, rho).
Every edge then lands in the matching with probability at least 0.68 g_e.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .copula import exponential_clocks, uniformize_parts
from .randomness import StickBreaker
from .specialfn import gen_binomial

__all__ = [
    "OnlineParams",
    "MatchingStream",
    "EdgeTrace",
    "OdrsResult",
    "attenuation_F",
    "cumulative_Q",
    "edge_params",
    "run_odrs",
    "run_odrs_batch",
    "ratio_profile",
    "derive_Q",
    "gen_uniform_stream",
    "gen_overloaded_stream",
    "gen_sliver_stream",
]

_SLACK = 1e-12


@dataclass(frozen=True)
class OnlineParams:
    alpha: float = 1.2337
    beta: float = 0.7
    F0: float = 0.68145
    Fslope: float = 0.53562
    c: float = 0.3947


@dataclass
class MatchingStream:
    """Offline node list plus the ordered arrival sequence; each arrival
    carries a demand map {offline_node: g}."""

    offline: list
    arrivals: list  # (v, {u: g}) pairs in arrival order

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else text
        arrivals = [(a["v"], dict(a["g"])) for a in data["arrivals"]]
        return cls(offline=list(data["offline"]), arrivals=arrivals)

    def to_json(self):
        return json.dumps(
            {
                "offline": list(self.offline),
                "arrivals": [{"v": v, "g": g} for (v, g) in self.arrivals],
            }
        )

    def validate(self):
        violations = []
        offline_set = set(self.offline)
        if len(offline_set) != len(self.offline):
            violations.append("duplicate offline node identifiers")
        seen_v = set()
        load = {u: 0.0 for u in offline_set}
        for v, g in self.arrivals:
            if v in seen_v:
                violations.append(f"duplicate arrival {v}")
            seen_v.add(v)
            total = 0.0
            for u, ge in g.items():
                if u not in offline_set:
                    violations.append(f"arrival {v}: unknown offline node {u}")
                    continue
                if not (0.0 <= ge <= 1.0):
                    violations.append(f"edge ({u},{v}): g={ge} outside [0,1]")
                total += ge
                load[u] += ge
            if total > 1.0 + _SLACK:
                violations.append(f"arrival {v}: demand sum {total} exceeds 1")
        for u in self.offline:
            if load.get(u, 0.0) > 1.0 + _SLACK:
                violations.append(f"offline node {u}: total demand {load[u]} exceeds 1")
        return violations


def attenuation_F(t, params=None):
    """F(t) = F0 / sqrt(1 - Fslope*t) on [0,1]."""
    params = params or OnlineParams()
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise ValueError(f"attenuation_F requires t in [0,1], got {t}")
    out = params.F0 / np.sqrt(1.0 - params.Fslope * t)
    return float(out) if out.ndim == 0 else out


def cumulative_Q(t0, dt, params=None):
    """Q(t0, dt) = integral of F over [t0, t0+dt], in closed form."""
    params = params or OnlineParams()
    if not (t0 >= 0.0 and dt >= 0.0 and t0 + dt <= 1.0 + _SLACK):
        raise ValueError(f"cumulative_Q requires 0 <= t0 <= t0+dt <= 1, got ({t0}, {dt})")
    s = params.Fslope
    hi = min(t0 + dt, 1.0)
    return (2.0 * params.F0 / s) * (math.sqrt(1.0 - s * t0) - math.sqrt(1.0 - s * hi))


def edge_params(r_e, g_e, params=None):
    """(y_e, rho_e, x_e) for an edge with prior demand r_e and demand g_e."""
    params = params or OnlineParams()
    if r_e + g_e > 1.0 + _SLACK:
        raise ValueError(f"edge_params requires r+g <= 1, got r={r_e}, g={g_e}")
    if g_e == 0.0:
        return 0.0, 0.0, 0.0
    y = cumulative_Q(r_e, g_e, params)
    rho = params.alpha * y
    x = (1.0 - params.beta) * attenuation_F(r_e, params) * g_e + params.beta * y
    return y, rho, x


def ratio_profile(r, params=None):
    """F(r) * (1 - c*Q(0,r)); its floor over [0,1] is the matching ratio."""
    params = params or OnlineParams()
    return attenuation_F(r, params) * (1.0 - params.c * cumulative_Q(0.0, r, params))


def derive_Q(alpha, t):
    """Solution of the design equation for the cumulative attenuation.

    Requiring the per-edge matching probability F(r)(1 - c*Q(r)) to be
    independent of r, with c = 1/binom(2*alpha, alpha) and Q(0) = 0, gives

        Q(t) = (1 - sqrt(1 - t*(2c*sqrt(c^2+1) - 2c^2))) / c.

    Its derivative at the published alpha matches the tabulated F.
    """
    if not alpha > 0:
        raise ValueError(f"derive_Q requires alpha > 0, got {alpha}")
    if not (0.0 <= t <= 1.0):
        raise ValueError(f"derive_Q requires t in [0,1], got {t}")
    c = 1.0 / gen_binomial(2.0 * alpha, alpha)
    disc = 1.0 - t * (2.0 * c * math.sqrt(c * c + 1.0) - 2.0 * c * c)
    return (1.0 - math.sqrt(max(disc, 0.0))) / c


@dataclass
class EdgeTrace:
    arrival_index: int
    u: object
    v: object
    g: float
    r: float
    y: float
    rho: float
    x: float
    selected: bool
    committed: bool


@dataclass
class OdrsResult:
    matching: list  # (u, v) pairs
    trace: list  # EdgeTrace per edge in arrival order


def _stream_edge_schedule(stream, params):
    """Deterministic pass: per-arrival edge lists with (u, g, r, y, rho, x).

    The randomized quantities depend on the stream only through these.
    """
    schedule = []
    r_acc = {u: 0.0 for u in stream.offline}
    rho_acc = {u: 0.0 for u in stream.offline}
    for v, gmap in stream.arrivals:
        edges = []
        for u in sorted(gmap, key=str):
            g = float(gmap[u])
            r = r_acc[u]
            y, rho, x = edge_params(r, g, params)
            edges.append((u, g, r, y, rho, x, rho_acc[u]))
            r_acc[u] += g
            rho_acc[u] += rho
        schedule.append((v, edges))
    return schedule


def _select_arrival(x_arr, Z, aux_rng):
    """Indices selected by the right-node rule; Z has shape (trials, m).

    aux_rng supplies the independent unit-rate Exponentials that complete
    the rule when x(N(v)) = x_e (same continuity-limit convention as the
    offline rounding pass).
    """
    trials, m = Z.shape
    total = x_arr.sum()
    sel = np.full(trials, -1, dtype=np.int64)
    if m == 1:
        min_others = np.full((trials, 1), np.inf)
    else:
        part = np.partition(Z, 1, axis=1)
        smallest, second = part[:, 0], part[:, 1]
        is_min = Z == smallest[:, None]
        first_min = np.cumsum(is_min, axis=1) == 1
        is_min &= first_min
        min_others = np.where(is_min, second[:, None], smallest[:, None])
    for col in range(m):
        x_e = x_arr[col]
        gap = total - x_e
        lhs = (1.0 - x_e) * Z[:, col]
        if gap <= _SLACK:
            hit = lhs < aux_rng.generator.exponential(size=trials)
        else:
            hit = lhs < gap * min_others[:, col]
        sel = np.where(hit, col, sel)
    return sel


def run_odrs_batch(stream, trials, rng, params=None):
    """Run the online algorithm on `trials` independent replicas at once.

    Returns (committed, selected): boolean arrays of shape (trials,
    n_edges) over all stream edges in arrival order, plus the deterministic
    edge schedule as a third element.
    """
    params = params or OnlineParams()
    violations = stream.validate()
    if violations:
        raise ValueError("invalid stream: " + "; ".join(violations))
    schedule = _stream_edge_schedule(stream, params)
    n_edges = sum(len(edges) for _, edges in schedule)
    selected = np.zeros((trials, n_edges), dtype=bool)
    committed = np.zeros((trials, n_edges), dtype=bool)

    order = sorted(set(stream.offline), key=str)
    streams = rng.split(len(order) + 1)
    subs = dict(zip(order, streams))
    aux = streams[-1]
    sticks = {u: StickBreaker(subs[u], size=trials) for u in order}
    matched = {u: np.zeros(trials, dtype=bool) for u in order}

    flat = []
    col = 0
    for v, edges in schedule:
        m = len(edges)
        if m == 0:
            continue
        Z = np.empty((trials, m))
        xs = np.empty(m)
        for k, (u, g, r, y, rho, x, rho_prefix) in enumerate(edges):
            T, Tc, log_T = sticks[u].next_full(rho)
            A, Ac = uniformize_parts(
                T.reshape(trials, 1),
                Tc.reshape(trials, 1),
                [rho],
                subs[u],
                log_T=log_T.reshape(trials, 1),
            )
            Z[:, k] = exponential_clocks(A, Ac, np.array([x]))[:, 0]
            xs[k] = x
            flat.append((col + k, u, v))
        sel = _select_arrival(xs, Z, aux)
        for k, (u, g, r, y, rho, x, _) in enumerate(edges):
            hit = sel == k
            selected[:, col + k] = hit
            commit = hit & ~matched[u]
            committed[:, col + k] = commit
            matched[u] = matched[u] | commit
        col += m
    return committed, selected, schedule


def run_odrs(stream, rng, params=None):
    """One online run; returns the matching and the per-edge trace."""
    params = params or OnlineParams()
    committed, selected, schedule = run_odrs_batch(stream, 1, rng, params)
    trace = []
    matching = []
    col = 0
    for ai, (v, edges) in enumerate(schedule):
        for (u, g, r, y, rho, x, _) in edges:
            t = EdgeTrace(
                arrival_index=ai,
                u=u,
                v=v,
                g=g,
                r=r,
                y=y,
                rho=rho,
                x=x,
                selected=bool(selected[0, col]),
                committed=bool(committed[0, col]),
            )
            trace.append(t)
            if t.committed:
                matching.append((u, v))
            col += 1
    return OdrsResult(matching=matching, trace=trace)


def gen_uniform_stream(n_offline, n_arrivals, rng, density=0.5):
    """Random fractional matching: each arrival demands from a random
    subset of offline nodes, scaled to respect both matching constraints."""
    offline = [f"u{i}" for i in range(n_offline)]
    budget = {u: 1.0 for u in offline}
    arrivals = []
    for j in range(n_arrivals):
        gmap = {}
        total = 0.0
        for u in offline:
            if rng.generator.random() > density:
                continue
            raw = rng.generator.random()
            gmap[u] = raw
            total += raw
        if not gmap:
            arrivals.append((f"v{j}", {}))
            continue
        # scale the arrival to a random fraction of its unit budget, then
        # cap each edge by the offline node's remaining budget
        scale = rng.generator.random() / max(total, 1.0)
        for u in list(gmap):
            g = min(gmap[u] * scale, budget[u])
            if g <= 0.0:
                del gmap[u]
                continue
            gmap[u] = g
            budget[u] -= g
        arrivals.append((f"v{j}", gmap))
    return MatchingStream(offline=offline, arrivals=arrivals)


def gen_overloaded_stream(n_arrivals, g=None):
    """Adversarial family: one offline node demanded by every arrival."""
    if g is None:
        g = 1.0 / n_arrivals
    if g * n_arrivals > 1.0 + _SLACK:
        raise ValueError(f"total demand {g * n_arrivals} exceeds 1")
    arrivals = [(f"v{j}", {"u0": g}) for j in range(n_arrivals)]
    return MatchingStream(offline=["u0"], arrivals=arrivals)


def gen_sliver_stream(stream, m):
    """Split every arrival into m consecutive arrivals with demand g/m
    each, probing the infinitesimal-demand regime."""
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    arrivals = []
    for v, gmap in stream.arrivals:
        for s in range(m):
            arrivals.append((f"{v}#{s}", {u: g / m for u, g in gmap.items()}))
    return MatchingStream(offline=list(stream.offline), arrivals=arrivals)
