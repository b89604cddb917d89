"""Reproducible random-variate generation: uniform, Gamma, Beta, and
Dirichlet draws in both batch and stick-breaking incremental form.

Streams are splittable: an ``RngState`` can spawn independent substreams
keyed by index, so per-left-node sampling (and parallel Monte Carlo) is
reproducible regardless of execution order.  Identical seed + identical
call sequence gives bit-identical output.
"""

import numpy as np

__all__ = [
    "RngState",
    "DirichletParams",
    "sample_gamma",
    "sample_gamma_log",
    "sample_beta",
    "sample_beta_parts",
    "sample_dirichlet",
    "sample_dirichlet_batch",
    "sample_dirichlet_parts",
    "sample_dirichlet_full",
    "stick_break_next",
    "stick_break_parts",
    "StickBreaker",
]

_SLACK_EPS = 1e-12


class RngState:
    """Deterministic, splittable random stream (PCG64 under the hood)."""

    def __init__(self, seed, _seed_seq=None):
        self.seed = seed
        self._seq = np.random.SeedSequence(seed) if _seed_seq is None else _seed_seq
        self.generator = np.random.Generator(np.random.PCG64(self._seq))

    def split(self, n):
        """Spawn n independent child streams; deterministic in (seed, n)."""
        children = self._seq.spawn(n)
        return [RngState(self.seed, _seed_seq=c) for c in children]


class DirichletParams:
    """Rate vector rho with sum(rho) <= 1; the slack 1 - sum(rho) becomes an
    extra hidden Dirichlet component so draws live on the sub-simplex."""

    def __init__(self, rho):
        rho = np.asarray(rho, dtype=float)
        if rho.ndim != 1:
            raise ValueError("rho must be a 1-d vector")
        if np.any(rho < 0) or np.any(rho > 1):
            raise ValueError(f"each rho_i must lie in [0,1], got {rho}")
        total = float(rho.sum())
        if total > 1.0 + _SLACK_EPS:
            raise ValueError(f"sum(rho) = {total} exceeds 1")
        self.rho = rho
        self.slack = max(0.0, 1.0 - total)

    def __len__(self):
        return len(self.rho)


# below this shape, Gamma draws underflow to exact 0 often enough to bias
# downstream transforms (Pr[G < 1e-308] ~ 10^(-308*shape)), so they are
# generated in log space instead
SMALL_SHAPE = 0.1


def sample_gamma_log(shape, rng, size=None):
    """log of Gamma(shape, 1) variate(s), exact for any shape in (0, 1).

    Uses the boost identity G_a =d G_(a+1) * U^(1/a); the log form keeps
    full information even when the variate itself is far below the
    smallest positive double.
    """
    if not (0.0 < shape < 1.0):
        raise ValueError(f"sample_gamma_log requires shape in (0,1), got {shape}")
    g = rng.generator.gamma(shape + 1.0, size=size)
    u = rng.generator.random(size)
    return np.log(g) + np.log(np.maximum(u, 1e-300)) / shape


def sample_gamma(shape, rng, size=None):
    """Gamma(shape, scale=1) variate(s).

    numpy's generator samples the exact density for all shape > 0 (for
    shape < 1 it uses a power-of-uniform boost of a shape+1 draw).
    """
    if not shape > 0:
        raise ValueError(f"sample_gamma requires shape > 0, got {shape}")
    return rng.generator.gamma(shape, size=size)


def sample_beta(a, b, rng, size=None):
    """Beta(a, b) variate(s), realized as G_a / (G_a + G_b) from two
    independent Gamma draws."""
    return sample_beta_parts(a, b, rng, size)[0]


def sample_beta_parts(a, b, rng, size=None):
    """(B, 1-B) for B ~ Beta(a, b); the complement G_b/(G_a+G_b) is formed
    directly so it stays accurate when B is within a few ulp of 1."""
    if not (a > 0 and b > 0):
        raise ValueError(f"sample_beta requires positive shapes, got ({a}, {b})")
    ga = rng.generator.gamma(a, size=size)
    gb = rng.generator.gamma(b, size=size)
    return ga / (ga + gb), gb / (ga + gb)


def sample_dirichlet(params, rng):
    """One draw (T_1, ..., T_n) with T_i >= 0 and sum T_i <= 1, distributed
    Dir(rho_1, ..., rho_n, slack).  Components with rho_i = 0 are exactly 0
    and consume no randomness."""
    return sample_dirichlet_batch(params, 1, rng)[0]


def sample_dirichlet_batch(params, n, rng):
    """(n, len(params)) array of independent Dirichlet draws.

    Gamma-normalization route: each positive component (including the slack)
    gets an independent Gamma(rho_i) draw; normalizing by the total yields
    the Dirichlet law with the slack aggregated away.
    """
    return sample_dirichlet_parts(params, n, rng)[0]


def sample_dirichlet_parts(params, n, rng):
    """Like sample_dirichlet_batch but also returns the complements 1 - T_i.

    The complement is formed from the gamma draws directly, rest_i/(gamma_i
    + rest_i), so it stays accurate even when T_i is within a few ulp of 1
    (a Beta with a tiny second shape concentrates there; the naive 1 - T_i
    would round to exactly 0 with substantial probability).
    """
    return sample_dirichlet_full(params, n, rng)[:2]


def sample_dirichlet_full(params, n, rng):
    """(T, 1-T, log T) for a batch of Dirichlet draws.

    log T is exact even for components whose gamma draw underflows to 0
    in double precision (tiny rho_i); for those rows T itself is 0 but
    log T still carries the value, which the CDF transform needs.
    """
    rho = params.rho
    k = len(rho)
    out = np.zeros((n, k))
    comp = np.ones((n, k))
    log_out = np.full((n, k), -np.inf)
    active_idx = [i for i in range(k) if rho[i] > 0.0]
    if not active_idx:
        return out, comp, log_out
    n_active = len(active_idx)
    gam = np.empty((n, n_active))
    log_gam = np.empty((n, n_active))
    for j, i in enumerate(active_idx):
        r = rho[i]
        if r < SMALL_SHAPE:
            lg = sample_gamma_log(r, rng, size=n)
            log_gam[:, j] = lg
            gam[:, j] = np.exp(lg)
        else:
            g = rng.generator.gamma(r, size=n)
            gam[:, j] = g
            log_gam[:, j] = np.log(np.maximum(g, 1e-300))
    if params.slack > 0.0:
        slack_gam = rng.generator.gamma(params.slack, size=n)
    else:
        slack_gam = np.zeros(n)
    # rest_i = sum of the other gammas + slack, built from prefix/suffix
    # sums of positives so no catastrophic cancellation can occur
    prefix = np.zeros((n, n_active + 1))
    np.cumsum(gam, axis=1, out=prefix[:, 1:])
    suffix = np.zeros((n, n_active + 1))
    np.cumsum(gam[:, ::-1], axis=1, out=suffix[:, 1:])
    suffix = suffix[:, ::-1]
    rest = prefix[:, :-1] + suffix[:, 1:] + slack_gam[:, None]
    denom = gam + rest
    # denom == 0 can only occur with measure zero; guard anyway
    denom = np.where(denom > 0.0, denom, 1.0)
    out[:, active_idx] = gam / denom
    comp[:, active_idx] = rest / denom
    log_out[:, active_idx] = log_gam - np.log(denom)
    return out, comp, log_out


def stick_break_next(prev_T, prev_rho, rho_new, rng, size=None):
    """Extend a partial Dirichlet draw by one component.

    Returns T_new = (1 - sum(prev_T)) * B with B ~ Beta(rho_new, 1 -
    rho_new - sum(prev_rho)).  Extending any prefix this way yields the
    same joint law as a batch Dirichlet draw.

    Degenerate shapes follow the Dirichlet aggregation limits: rho_new = 0
    gives 0 (with one consumed Beta draw that is constantly 0, so replay
    sequences match), and a zero second shape (rho budget exactly
    exhausted) gives B = 1.
    """
    return stick_break_parts(prev_T, prev_rho, rho_new, rng, size)[0]


def stick_break_parts(prev_T, prev_rho, rho_new, rng, size=None):
    """stick_break_next returning (T_new, 1 - T_new), the complement built
    without cancellation: 1 - rem*B = (1 - rem) + rem*(1 - B)."""
    prev_T = np.asarray(prev_T, dtype=float)
    prev_rho = np.asarray(prev_rho, dtype=float)
    budget = 1.0 - float(prev_rho.sum()) - rho_new
    if budget < -_SLACK_EPS:
        raise ValueError(
            f"rho budget exhausted: sum(prev_rho) + rho_new = {1.0 - budget}"
        )
    if not (0.0 <= rho_new <= 1.0):
        raise ValueError(f"rho_new must lie in [0,1], got {rho_new}")
    if prev_T.size:
        used = prev_T.sum(axis=-1)
        remaining = 1.0 - used
    else:
        used = 0.0
        remaining = 1.0
    if rho_new == 0.0:
        rng.generator.random(size)  # consumed so replay sequences stay aligned
        zero = np.zeros(size) if size is not None else 0.0
        return remaining * zero, 1.0 - remaining * zero
    if budget <= 0.0:
        rng.generator.random(size)
        one = np.ones(size) if size is not None else 1.0
        return remaining * one, used * one
    b, bc = sample_beta_parts(rho_new, budget, rng, size=size)
    return remaining * b, used + remaining * bc


class StickBreaker:
    """Incremental Dirichlet generation for one stream of components.

    Equivalent in law to stick_break_next applied step by step, but the
    unbroken remainder is maintained multiplicatively (rem *= 1 - B using
    the Beta complement) instead of as 1 - sum(T).  The subtraction form
    loses the remainder entirely once the sticks sum to within an ulp of
    1, which happens with substantial probability when some rho is large;
    the multiplicative form never cancels.
    """

    def __init__(self, rng, size=None):
        self.rng = rng
        self.size = size
        shape = () if size is None else (size,)
        self.sum_T = np.zeros(shape)
        self.rem = np.ones(shape)
        self.log_rem = np.zeros(shape)
        self.sum_rho = 0.0

    def next(self, rho_new):
        """Draw the next component; returns (T, 1 - T), both accurate."""
        return self.next_full(rho_new)[:2]

    def _log_gamma_draw(self, shape):
        if shape < SMALL_SHAPE:
            return sample_gamma_log(shape, self.rng, size=self.size)
        g = self.rng.generator.gamma(shape, size=self.size)
        return np.log(np.maximum(g, 1e-300))

    def next_full(self, rho_new):
        """(T, 1 - T, log T); log T is exact even when T underflows."""
        if not (0.0 <= rho_new <= 1.0):
            raise ValueError(f"rho_new must lie in [0,1], got {rho_new}")
        budget = 1.0 - self.sum_rho - rho_new
        if budget < -_SLACK_EPS:
            raise ValueError(
                f"rho budget exhausted: sum(rho) = {1.0 - budget}"
            )
        if rho_new == 0.0:
            self.rng.generator.random(self.size)  # keep replay aligned
            zero = np.zeros_like(self.sum_T)
            return zero, np.ones_like(self.sum_T), np.full_like(self.sum_T, -np.inf)
        self.sum_rho += rho_new
        if budget <= 0.0:
            self.rng.generator.random(self.size)
            T = self.rem.copy()
            Tc = self.sum_T.copy()
            log_T = self.log_rem.copy()
            self.sum_T = self.sum_T + T
            self.rem = np.zeros_like(self.rem)
            self.log_rem = np.full_like(self.log_rem, -np.inf)
            return T, Tc, log_T
        log_ga = self._log_gamma_draw(rho_new)
        log_gb = self._log_gamma_draw(budget)
        lse = np.logaddexp(log_ga, log_gb)
        log_b = log_ga - lse
        log_bc = log_gb - lse
        b = np.exp(log_b)
        bc = np.exp(log_bc)
        T = self.rem * b
        Tc = self.sum_T + self.rem * bc
        log_T = self.log_rem + log_b
        self.sum_T = self.sum_T + T
        self.rem = self.rem * bc
        self.log_rem = self.log_rem + log_bc
        return T, Tc, log_T
