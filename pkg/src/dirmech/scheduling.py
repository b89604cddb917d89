"""Scheduling on unrelated machines to minimize weighted completion time,
by clustered dependent rounding.

Jobs carry machine-dependent processing times p, weights w, and a
fractional assignment x with sum_i x[i][j] = 1.  Per machine the jobs are
split into geometric processing-time classes (randomly shifted so no
adversarial instance straddles the boundaries), sorted by Smith ratio
w/p, and greedily packed into clusters.  A closed cluster hands each job
a rate rho; rounding the cluster/job bipartite graph then assigns every
job to exactly one cluster, hence one machine, with strong negative
correlation inside clusters.  The per-machine sequence is the Smith
order, and the analysis layer evaluates the quadratic completion-time
surrogate Z against its fractional lower bound LB.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .psi import PsiQuery, psi_upper_bound
from .rounding import BipartiteInstance, dep_round_batch
from .specialfn import gen_binomial

__all__ = [
    "SchedulingInstance",
    "SchedulingParams",
    "Cluster",
    "ClusterLayout",
    "AnalysisConstants",
    "validate_scheduling_instance",
    "cluster_jobs",
    "build_rounding_instance",
    "schedule",
    "compute_objective",
    "z_and_lb",
    "bonus_bound",
    "analysis_constants",
    "gen_random_scheduling_instance",
]

_SLACK = 1e-9


@dataclass
class SchedulingInstance:
    machines: int
    jobs: int
    p: list  # p[i][j] > 0 wherever x[i][j] > 0
    w: list  # w[i][j] >= 0
    x: list  # fractional assignment, sum_i x[i][j] = 1

    @classmethod
    def from_json(cls, text):
        data = json.loads(text) if isinstance(text, str) else text
        return cls(
            machines=int(data["machines"]),
            jobs=int(data["jobs"]),
            p=[list(map(float, row)) for row in data["p"]],
            w=[list(map(float, row)) for row in data["w"]],
            x=[list(map(float, row)) for row in data["x"]],
        )

    def to_json(self):
        return json.dumps(
            {
                "machines": self.machines,
                "jobs": self.jobs,
                "p": self.p,
                "w": self.w,
                "x": self.x,
            }
        )


@dataclass(frozen=True)
class SchedulingParams:
    pi: float = 4.5
    theta: float = 0.56
    tau: float = 0.608

    def __post_init__(self):
        if not (0.0 < self.theta < self.tau < 1.0):
            raise ValueError(
                f"require 0 < theta < tau < 1, got ({self.theta}, {self.tau})"
            )


def validate_scheduling_instance(inst):
    violations = []
    for name, mat in (("p", inst.p), ("w", inst.w), ("x", inst.x)):
        if len(mat) != inst.machines or any(len(row) != inst.jobs for row in mat):
            violations.append(f"{name} is not a {inst.machines}x{inst.jobs} matrix")
    if violations:
        return violations
    for j in range(inst.jobs):
        total = sum(inst.x[i][j] for i in range(inst.machines))
        if abs(total - 1.0) > _SLACK:
            violations.append(f"job {j}: assignment sums to {total}, not 1")
        for i in range(inst.machines):
            if not (0.0 <= inst.x[i][j] <= 1.0):
                violations.append(f"x[{i}][{j}]={inst.x[i][j]} outside [0,1]")
            if inst.w[i][j] < 0.0:
                violations.append(f"w[{i}][{j}]={inst.w[i][j]} negative")
            if inst.x[i][j] > 0.0 and not inst.p[i][j] > 0.0:
                violations.append(f"p[{i}][{j}]={inst.p[i][j]} not positive where x > 0")
    return violations


@dataclass
class Cluster:
    machine: int
    klass: int  # processing-time class index
    ell: int  # cluster index within the class
    jobs: list  # job ids in insertion order (dummy excluded)
    rho: dict  # job id -> rho
    truncated: object  # job id or None
    leftover: bool
    x_total: float

    @property
    def name(self):
        return f"m{self.machine}.k{self.klass}.c{self.ell}"


@dataclass
class ClusterLayout:
    offset: float
    clusters: list
    P: dict  # (machine, klass) -> class boundary P_k
    H: dict  # (machine, job) -> p / P_k in [1, pi)


def _smith_order(inst, i, job_ids):
    """Descending Smith ratio w/p, ties broken by job index."""
    return sorted(job_ids, key=lambda j: (-inst.w[i][j] / inst.p[i][j], j))


def cluster_jobs(inst, params, offset):
    """Deterministic clustering for a given class-boundary offset."""
    violations = validate_scheduling_instance(inst)
    if violations:
        raise ValueError("invalid instance: " + "; ".join(violations))
    if not (0.0 <= offset < 1.0):
        raise ValueError(f"offset must lie in [0,1), got {offset}")
    log_pi = math.log(params.pi)
    clusters = []
    P = {}
    H = {}
    DUMMY = object()
    for i in range(inst.machines):
        by_class = {}
        for j in range(inst.jobs):
            if inst.x[i][j] <= 0.0:
                continue
            k = math.floor(offset + math.log(inst.p[i][j]) / log_pi)
            by_class.setdefault(k, []).append(j)
        for k, members in sorted(by_class.items()):
            P[(i, k)] = params.pi ** (k - offset)
            for j in members:
                H[(i, j)] = inst.p[i][j] / P[(i, k)]
            order = _smith_order(inst, i, members) + [DUMMY]
            ell = 1
            cur, cur_x = [], 0.0
            for j in order:
                xj = 0.0 if j is DUMMY else inst.x[i][j]
                cur.append(j)
                cur_x += xj
                if cur_x > params.tau:
                    members_real = [q for q in cur if q is not DUMMY]
                    untrunc = [q for q in members_real if q != j]
                    x_u = sum(inst.x[i][q] for q in untrunc)
                    rho = {q: inst.x[i][q] / params.tau for q in untrunc}
                    rho[j] = 1.0 - x_u / params.tau
                    clusters.append(
                        Cluster(i, k, ell, members_real, rho, j, False, cur_x)
                    )
                    ell += 1
                    cur, cur_x = [], 0.0
                elif cur_x >= params.theta:
                    members_real = [q for q in cur if q is not DUMMY]
                    rho = {q: inst.x[i][q] / cur_x for q in members_real}
                    clusters.append(
                        Cluster(i, k, ell, members_real, rho, None, False, cur_x)
                    )
                    ell += 1
                    cur, cur_x = [], 0.0
            members_real = [q for q in cur if q is not DUMMY]
            if members_real:
                # never-closed leftover cluster; normalize rho by its own mass
                rho = {q: inst.x[i][q] / cur_x for q in members_real}
                clusters.append(
                    Cluster(i, k, ell, members_real, rho, None, True, cur_x)
                )
    return ClusterLayout(offset=offset, clusters=clusters, P=P, H=H)


def build_rounding_instance(inst, layout):
    """Bipartite graph: left nodes are clusters, right nodes are jobs."""
    left = [c.name for c in layout.clusters]
    right = [f"j{j}" for j in range(inst.jobs)]
    edges = []
    for c in layout.clusters:
        for j in c.jobs:
            edges.append((c.name, f"j{j}", inst.x[c.machine][j], c.rho[j]))
    return BipartiteInstance(left=left, right=right, edges=edges)


def _assignments_from_selection(inst, layout, graph, X):
    """(trials, jobs) machine indices from the edge selection matrix."""
    trials = X.shape[0]
    assign = np.full((trials, inst.jobs), -1, dtype=np.int64)
    machine_of_edge = []
    job_of_edge = []
    for c in layout.clusters:
        for j in c.jobs:
            machine_of_edge.append(c.machine)
            job_of_edge.append(j)
    for e, (i, j) in enumerate(zip(machine_of_edge, job_of_edge)):
        hit = X[:, e]
        assign[hit, j] = i
    return assign


def schedule(inst, rng, params=None):
    """Round once: returns (assignment, per-machine Smith orders, objective).

    assignment[j] is the machine for job j; the objective is the exact
    weighted completion time of running each machine's jobs in descending
    Smith-ratio order.
    """
    params = params or SchedulingParams()
    offset = float(rng.generator.random())
    layout = cluster_jobs(inst, params, offset)
    graph = build_rounding_instance(inst, layout)
    X = dep_round_batch(graph, 1, rng)
    assign = _assignments_from_selection(inst, layout, graph, X)[0]
    if np.any(assign < 0):
        # x(N(j)) = 1 makes non-selection a probability-zero event, but a
        # floating-point tie can still produce it; fall back to the
        # largest fractional assignment for such a job
        for j in np.nonzero(assign < 0)[0]:
            assign[j] = max(range(inst.machines), key=lambda i: inst.x[i][j])
    orders = {}
    for i in range(inst.machines):
        mine = [j for j in range(inst.jobs) if assign[j] == i]
        orders[i] = _smith_order(inst, i, mine)
    objective = compute_objective(inst, assign)
    return assign, orders, objective


def compute_objective(inst, assign):
    """Sum of w_j * C_j with per-machine Smith-order sequencing."""
    total = 0.0
    for i in range(inst.machines):
        mine = [j for j in range(inst.jobs) if assign[j] == i]
        t = 0.0
        for j in _smith_order(inst, i, mine):
            t += inst.p[i][j]
            total += inst.w[i][j] * t
    return total


def _smith_prefix(inst, i_star, j_star):
    """Jobs up to and including j_star in descending Smith order on i_star."""
    order = _smith_order(inst, i_star, range(inst.jobs))
    cut = order.index(j_star)
    return order[: cut + 1]


def z_and_lb(inst, i_star, j_star, rng, params=None, n_offsets=200, rounds_per_offset=20):
    """Monte Carlo estimate of the quadratic surrogate Z for the target
    (machine, job) pair, with its scalar lower bound LB.

    Z is driven by both the random class offset and the rounding; trials
    are grouped per offset and the standard error is taken across the
    per-offset means (which are iid).  LB uses the product convention for
    the pairwise fractional values, x_{j,j'} = x_j * x_{j'} (j != j'),
    x_{j,j} = x_j.

    Returns a dict with z_mean, z_se, lb, q, l.
    """
    params = params or SchedulingParams()
    prefix = _smith_prefix(inst, i_star, j_star)
    p = np.array([inst.p[i_star][j] for j in prefix])
    x = np.array([inst.x[i_star][j] for j in prefix])
    lb = 0.5 * (float(np.dot(x, p * p)) + float(np.dot(x, p)) ** 2
                - float(np.dot(x * x, p * p)) + float(np.dot(x, p * p)))
    q_par = float(np.dot(x, p * p))
    l_par = float(np.dot(x, p))
    offset_means = []
    for _ in range(n_offsets):
        offset = float(rng.generator.random())
        layout = cluster_jobs(inst, params, offset)
        graph = build_rounding_instance(inst, layout)
        X = dep_round_batch(graph, rounds_per_offset, rng)
        assign = _assignments_from_selection(inst, layout, graph, X)
        on_target = (assign[:, prefix] == i_star).astype(np.float64)
        s1 = on_target @ (p * p)
        sp = on_target @ p
        z = 0.5 * (s1 + sp * sp)
        offset_means.append(float(z.mean()))
    z_mean = float(np.mean(offset_means))
    z_se = float(np.std(offset_means, ddof=1) / math.sqrt(len(offset_means)))
    return {"z_mean": z_mean, "z_se": z_se, "lb": lb, "q": q_par, "l": l_par}


def bonus_bound(lam, r, s, y, d, params=None, grid=2000):
    """Lower bound on a cluster's quadratic bonus term.

    lam is the capped cluster mass min(tau, x(C)); r and s are the
    untruncated jobs' x-mass and xH-mass; y and d are the truncated job's
    (0 if none).  The truncated branch takes an infimum over the possible
    untruncated-job weight x in (0, r], evaluated with the 3rd-order
    upper bound on the correlation function.
    """
    params = params or SchedulingParams()
    if not (0.0 < lam <= params.tau + _SLACK):
        raise ValueError(f"lam must lie in (0, tau], got {lam}")
    if not (0.0 <= r <= s or r == s == 0.0):
        raise ValueError(f"require 0 <= r <= s, got r={r}, s={s}")
    if not (0.0 <= y <= d or y == d == 0.0):
        raise ValueError(f"require 0 <= y <= d, got y={y}, d={d}")
    a = 1.0 - 1.0 / gen_binomial(2.0 / lam, 1.0 / lam)
    if y == 0.0 or d == 0.0:
        return a * s * s / 2.0
    tau = params.tau

    def h(xv):
        psi = psi_upper_bound(
            PsiQuery(xv, y, xv / tau, 1.0 - r / tau), 3, 3
        )
        return xv * (1.0 - a) + 2.0 * d * (1.0 - psi)

    xs = np.linspace(r / grid, r, grid)
    vals = [h(v) for v in xs]
    best = int(np.argmin(vals))
    lo = xs[max(best - 1, 0)]
    hi = xs[min(best + 1, grid - 1)]
    inf_val = vals[best]
    # golden-section refinement around the grid minimum
    gr = (math.sqrt(5.0) - 1.0) / 2.0
    aa, bb = lo, hi
    c1 = bb - gr * (bb - aa)
    c2 = aa + gr * (bb - aa)
    f1, f2 = h(c1), h(c2)
    for _ in range(60):
        if f1 <= f2:
            bb, c2, f2 = c2, c1, f1
            c1 = bb - gr * (bb - aa)
            f1 = h(c1)
        else:
            aa, c1, f1 = c1, c2, f2
            c2 = aa + gr * (bb - aa)
            f2 = h(c2)
    inf_val = min(inf_val, f1, f2)
    return a * s * s / 2.0 + d * d / 2.0 + s * inf_val / 2.0


@dataclass(frozen=True)
class AnalysisConstants:
    c1: float = 0.684
    kappa: float = 0.778
    c2: float = 0.374713
    c3: float = 0.814462
    beta: float = 1.93
    gamma: float = 0.00594
    c5: float = 0.0048324
    c6: float = 0.069555
    target_ratio: float = 1.387


def analysis_constants(params=None, q_max=4.0, l_max=2.0, step=1e-3):
    """Recompute the analysis constants from their defining formulas and
    evaluate the final approximation-ratio expression on a (q, L) grid.

    Returns a report dict; each *_ok flag is the corresponding check.
    """
    params = params or SchedulingParams()
    k = AnalysisConstants()
    theta, tau, pi = params.theta, params.tau, params.pi
    c1_witness = (1.0 - 1.0 / gen_binomial(2.0 / theta, 1.0 / theta)) * theta * 2.0 * k.kappa
    c2_witness = (1.0 - 1.0 / gen_binomial(2.0 / tau, 1.0 / tau)) / 2.0
    c3_value = 1.0 - k.c1 * (
        (k.kappa - 2.0 * pi + 2.0 * pi**2 - k.kappa * pi**2)
        / (2.0 * pi**2 * math.log(pi))
    )
    # c2 and c6 are 6-figure display roundings of the defining quantities
    # (true witness 0.37471291..., true sqrt(gamma*c3) 0.06955504...), so
    # they are checked at display precision; the exact-value recheck below
    # confirms the final ratio bound does not depend on the rounding
    c6_exact = math.sqrt(max(k.gamma * c3_value, k.c5))
    q = np.arange(0.0, q_max + step / 2, step)
    l = np.arange(0.0, l_max + step / 2, step)
    qq, ll = np.meshgrid(q, l, indexing="ij")
    bc3 = k.beta * c3_value

    def grid_max(c6):
        num = (bc3 + 1.0) * (c3_value * qq + ll * ll / 2.0)
        den = bc3 * qq + np.maximum(0.0, ll - c6 * np.sqrt(qq)) ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(den > 0.0, num / den, 0.0)
        idx = np.unravel_index(int(ratio.argmax()), ratio.shape)
        return float(ratio.max()), (float(q[idx[0]]), float(l[idx[1]]))

    ratio_max, argmax = grid_max(k.c6)
    ratio_max_exact, _ = grid_max(c6_exact)
    return {
        "c1_witness": c1_witness,
        "c1_ok": c1_witness >= k.c1,
        "c2_witness": c2_witness,
        "c2_ok": c2_witness >= k.c2 - 5e-7,
        "c3_value": c3_value,
        "c3_ok": abs(c3_value - k.c3) <= 5e-7,
        "gamma_c3": k.gamma * c3_value,
        "c5": k.c5,
        "c6_sq": k.c6 * k.c6,
        "c6_exact": c6_exact,
        "c6_ok": max(k.gamma * c3_value, k.c5) <= k.c6 * k.c6 + 1e-8,
        "ratio_max": ratio_max,
        "ratio_argmax": argmax,
        "ratio_max_exact": ratio_max_exact,
        "ratio_ok": max(ratio_max, ratio_max_exact) <= 1.38695 + 1e-4,
        "constants": k,
    }


def gen_random_scheduling_instance(machines, jobs, rng):
    """Random instance: log-uniform processing times, uniform weights, and
    a Dirichlet fractional assignment per job."""
    p = np.exp(rng.generator.uniform(math.log(0.2), math.log(8.0), (machines, jobs)))
    w = rng.generator.uniform(0.1, 1.0, (machines, jobs))
    x = rng.generator.dirichlet(np.ones(machines), size=jobs).T
    return SchedulingInstance(
        machines=machines,
        jobs=jobs,
        p=p.tolist(),
        w=w.tolist(),
        x=x.tolist(),
    )
