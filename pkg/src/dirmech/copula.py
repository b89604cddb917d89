"""Dirichlet copula: transform a Dirichlet draw into negatively associated
Uniform[0,1] variables, plus the Monte Carlo moment oracle for the
correlation function used throughout the analysis.

The transform is A_i = I(T_i; rho_i, 1 - rho_i): each T_i is marginally
Beta(rho_i, 1 - rho_i), so its own CDF maps it to a Uniform, while the
joint negative association of the Dirichlet vector is preserved (the CDF
is monotone in each coordinate).

Degenerate components: rho_i = 0 forces T_i = 0 a.s. and the CDF transform
carries no information, so A_i is emitted as an independent fresh Uniform
(the correlation vanishes in the rho -> 0 limit).  rho_i = 1 (only possible
as a sole component) degenerates the same way and also gets a fresh
Uniform.
"""

import math

import numpy as np
from scipy import special as sp_special

from .randomness import DirichletParams, sample_dirichlet_full

__all__ = [
    "CopulaDraw",
    "dirichlet_copula",
    "dirichlet_copula_batch",
    "uniformize",
    "uniformize_parts",
    "exponential_clocks",
    "powered",
    "psi_mc_oracle",
]

# exp(-745) is the smallest positive normal-ish double; log A is clamped here
_LOG_CLAMP = -745.0

# 99% two-sided normal quantile, for Monte Carlo half-widths
Z99 = 2.5758293035489004


class CopulaDraw:
    """A Dirichlet draw T together with its uniformized image A."""

    def __init__(self, T, A):
        self.T = np.asarray(T)
        self.A = np.asarray(A)


def uniformize(T, rho, rng):
    """Map Dirichlet components to uniforms column-by-column.

    T has shape (n, k); rho has shape (k,).  Degenerate columns (rho = 0 or
    rho = 1) are replaced by fresh independent uniforms.
    """
    T = np.atleast_2d(T)
    A = np.empty_like(T)
    for i, r in enumerate(rho):
        if r <= 0.0 or r >= 1.0:
            A[:, i] = rng.generator.random(T.shape[0])
        else:
            A[:, i] = sp_special.betainc(r, 1.0 - r, np.clip(T[:, i], 0.0, 1.0))
    return A


def uniformize_parts(T, Tc, rho, rng, log_T=None):
    """(A, Ac) with each tail of the CDF transform evaluated where it is
    numerically stable.

    A = I(T; r, 1-r) loses all resolution near 1 exactly where the Beta
    law concentrates, so the upper tail is instead computed from the
    accurately-tracked complement Tc as Ac = I(Tc; 1-r, r).  If log_T is
    given, rows whose T underflowed to exactly 0 are recovered through the
    leading series term I(T; r, 1-r) ~ T^r/(r*B(r,1-r)), which can be a
    perfectly ordinary uniform value even for T around exp(-10^5).
    Degenerate columns get a fresh uniform, as in uniformize.
    """
    T = np.atleast_2d(T)
    Tc = np.atleast_2d(Tc)
    if log_T is not None:
        log_T = np.atleast_2d(log_T)
    A = np.empty_like(T)
    Ac = np.empty_like(T)
    for i, r in enumerate(rho):
        if r <= 0.0 or r >= 1.0:
            u = rng.generator.random(T.shape[0])
            A[:, i] = u
            Ac[:, i] = 1.0 - u
            continue
        # branch on which coordinate is far from its saturation point:
        # T <= 1/2 means T itself carries full precision (Tc may have
        # rounded to 1), and vice versa
        direct = sp_special.betainc(r, 1.0 - r, np.clip(T[:, i], 0.0, 1.0))
        if log_T is not None:
            under = (T[:, i] == 0.0) & (log_T[:, i] > -np.inf)
            if np.any(under):
                log_norm = math.log(r) + sp_special.betaln(r, 1.0 - r)
                direct = np.where(
                    under, np.exp(r * log_T[:, i] - log_norm), direct
                )
        comp = sp_special.betainc(1.0 - r, r, np.clip(Tc[:, i], 0.0, 1.0))
        lower = T[:, i] <= 0.5
        A[:, i] = np.where(lower, direct, 1.0 - comp)
        Ac[:, i] = np.where(lower, 1.0 - direct, comp)
    return A, Ac


def exponential_clocks(A, Ac, x):
    """Z = -log(A)/x per column, using log1p(-Ac) on the upper tail so
    small clocks keep full relative accuracy; x = 0 columns give +inf."""
    A = np.atleast_2d(A)
    Ac = np.atleast_2d(Ac)
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        neg_log = np.where(
            A <= 0.5,
            -np.log(np.maximum(A, 0.0)),
            -np.log1p(-np.minimum(Ac, 1.0)),
        )
        Z = np.where(x > 0.0, neg_log / np.where(x > 0.0, x, 1.0), np.inf)
    return Z


def dirichlet_copula(params, rng):
    """Run the copula for one draw: sample Dir(rho, slack), return (T, A)."""
    draws = dirichlet_copula_batch(params, 1, rng)
    return CopulaDraw(draws.T[0], draws.A[0])


def dirichlet_copula_batch(params, n, rng):
    """n independent copula draws; T and A have shape (n, len(params)).

    Uses the two-sided transform with the complement and log channels, so
    the uniforms stay exact across the whole rho range (the plain
    ``uniformize`` route loses the tails once the Beta law concentrates).
    """
    if not isinstance(params, DirichletParams):
        params = DirichletParams(params)
    T, Tc, log_T = sample_dirichlet_full(params, n, rng)
    A, _ = uniformize_parts(T, Tc, params.rho, rng, log_T=log_T)
    return CopulaDraw(T, A)


def powered(A, x):
    """A**(1/x - 1) with overflow/underflow guards.

    Computed as exp((1/x - 1) * log A) with log A clamped at -745; A = 0
    maps to 0 (the x < 1 limit).  x = 1 gives exactly 1.
    """
    q = 1.0 / x - 1.0
    if q == 0.0:
        return np.ones_like(np.asarray(A, dtype=float))
    A = np.asarray(A, dtype=float)
    out = np.zeros_like(A)
    pos = A > 0.0
    log_a = np.maximum(np.log(A[pos]), _LOG_CLAMP)
    out[pos] = np.exp(q * log_a)
    return out


def psi_mc_oracle(x1, x2, rho1, rho2, trials, rng):
    """Monte Carlo estimate of the pair-correlation function.

    Returns (estimate, half_width): the sample mean of
    A_1^(1/x1-1) * A_2^(1/x2-1) / (x1 * x2) over `trials` copula draws,
    with a 99% CLT half-width.  This is the independent oracle against
    which the series bounds are validated.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not (0.0 < x1 <= 1.0 and 0.0 < x2 <= 1.0):
        raise ValueError(f"x1, x2 must lie in (0,1], got ({x1}, {x2})")
    params = DirichletParams([rho1, rho2])
    draw = dirichlet_copula_batch(params, trials, rng)
    vals = powered(draw.A[:, 0], x1) * powered(draw.A[:, 1], x2) / (x1 * x2)
    estimate = float(vals.mean())
    if trials > 1:
        half_width = Z99 * float(vals.std(ddof=1)) / np.sqrt(trials)
    else:
        half_width = float("inf")
    return estimate, half_width
