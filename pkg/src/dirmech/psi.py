"""Series analysis of the pair-correlation function Psi(x1,x2;rho1,rho2) =
E[A_1^(1/x1-1) A_2^(1/x2-1)] / (x1 x2) for Dirichlet-copula uniforms.

Psi has no closed form, but it decomposes as the non-negative double series

    Psi = sum_{j1,j2 >= 0} alpha_{j1,j2} kappa_{1,j1} kappa_{2,j2}

where kappa_{i,j} >= 0 with sum_j kappa_{i,j} = 1, and alpha_{j1,j2} in
(0,1] is an inverse generalized binomial coefficient, nonincreasing in each
index.  Truncating the series from below gives a certified lower bound;
bounding the tails by the monotonicity of alpha gives the (k1,k2)-order
certified upper bound.  Order (0,0) is the plain inverse-binomial bound.

The kappa coefficients involve G_j(rho, q): the Taylor coefficients of the
q-th power of the scaled incomplete-Beta series, obtained via the Faa di
Bruno formula over integer partitions.  Positivity of all G_j follows from
log-absolute-monotonicity of the base series, certified by the coefficient
recursion in ``log_monotone_coefficients``.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

from .specialfn import gen_binomial, log_gen_binomial

__all__ = [
    "PsiQuery",
    "faa_di_bruno_partitions",
    "beta_series_coefficients",
    "log_convexity_ratio",
    "g_coefficient",
    "g_coefficients",
    "g_coefficient_partition_sum",
    "kappa_coefficient",
    "kappa_coefficients",
    "alpha_coefficient",
    "psi_upper_bound",
    "psi_partial_sum",
    "psi_infinitesimal_limit",
    "log_monotone_coefficients",
]

# Orders above this refuse rather than silently degrade; partition tables and
# G_j positivity are only routinely exercised up to here.
MAX_UPPER_BOUND_ORDER = 12


@dataclass(frozen=True)
class PsiQuery:
    """Parameters (x1, x2, rho1, rho2) of a pair-correlation query."""

    x1: float
    x2: float
    rho1: float
    rho2: float

    def __post_init__(self):
        if not (0.0 < self.x1 <= 1.0 and 0.0 < self.x2 <= 1.0):
            raise ValueError(f"x1, x2 must lie in (0,1], got ({self.x1}, {self.x2})")
        if self.rho1 < 0 or self.rho2 < 0:
            raise ValueError("rho1, rho2 must be non-negative")
        if self.rho1 + self.rho2 > 1.0 + 1e-12:
            raise ValueError(f"rho1 + rho2 = {self.rho1 + self.rho2} exceeds 1")

    @property
    def q1(self):
        return 1.0 / self.x1 - 1.0

    @property
    def q2(self):
        return 1.0 / self.x2 - 1.0


@lru_cache(maxsize=None)
def faa_di_bruno_partitions(j):
    """All multiplicity tuples (k_1, ..., k_j) with sum_i i*k_i = j.

    These index the terms of the Faa di Bruno formula for the j-th
    derivative of a composition; they are in bijection with the integer
    partitions of j (k_i = multiplicity of part i).  j = 0 yields [()].
    """
    if j < 0:
        raise ValueError(f"j must be non-negative, got {j}")
    if j == 0:
        return [()]
    results = []

    def build(remaining, max_part, counts):
        if remaining == 0:
            ks = [0] * j
            for part, mult in counts:
                ks[part - 1] = mult
            results.append(tuple(ks))
            return
        for part in range(min(max_part, remaining), 0, -1):
            max_mult = remaining // part
            for mult in range(1, max_mult + 1):
                build(remaining - part * mult, part - 1, counts + [(part, mult)])

    build(j, j, [])
    return results


def beta_series_coefficients(rho, n):
    """First n+1 Taylor coefficients a_i of rho*B(x;rho,1-rho)/x^rho.

    a_0 = 1 and a_i/a_{i-1} = (rho+i-1)^2 / (i (rho+i)); all positive and
    log-convex for rho in (0,1).
    """
    a = [1.0]
    for i in range(1, n + 1):
        a.append(a[-1] * (rho + i - 1.0) ** 2 / (i * (rho + i)))
    return a


def log_convexity_ratio(rho, i):
    """a_i a_{i-2} / a_{i-1}^2 = (i-1)(i+rho-1)^3 / (i (i+rho-2)^2 (i+rho)),
    for i >= 2; at least 1 throughout rho in (0,1)."""
    if i < 2:
        raise ValueError("log-convexity ratio needs i >= 2")
    return ((i - 1) * (i + rho - 1.0) ** 3) / (i * (i + rho - 2.0) ** 2 * (i + rho))


def _falling_binomial(q, k):
    """binom(q, k) for real q and integer k >= 0, via falling factorial.

    Valid for all real q (the log-gamma form breaks when q - k + 1 <= 0).
    """
    out = 1.0
    for m in range(k):
        out *= (q - m) / (k - m)
    return out


def g_coefficient_partition_sum(rho, q, j):
    """G_j(rho, q) evaluated literally as the Faa di Bruno partition sum:

    G_j = sum over partitions of j of
    (k_1+...+k_j)!/(k_1!...k_j!) * binom(q, K) * prod_i a_i^{k_i}.

    Exponential in j; intended for small j and for cross-validating the
    recursive route.
    """
    if j < 0:
        raise ValueError(f"j must be non-negative, got {j}")
    if j == 0:
        return 1.0
    a = beta_series_coefficients(rho, j)
    total = 0.0
    for ks in faa_di_bruno_partitions(j):
        big_k = sum(ks)
        term = _falling_binomial(q, big_k) * math.factorial(big_k)
        for i, k_i in enumerate(ks, start=1):
            if k_i:
                term *= a[i] ** k_i / math.factorial(k_i)
        total += term
    return total


def g_coefficients(rho, q, jmax):
    """[G_0, ..., G_jmax] via the power-series power recursion.

    With f(x) = sum a_i x^i (a_0 = 1), the coefficients b_j of f^q satisfy
    j b_j = sum_{i=1}^{j} ((q+1) i - j) a_i b_{j-i}; equal term-by-term to
    the Faa di Bruno partition sum but O(jmax^2) instead of exponential.
    """
    if jmax < 0:
        raise ValueError(f"jmax must be non-negative, got {jmax}")
    a = beta_series_coefficients(rho, jmax)
    b = [1.0] + [0.0] * jmax
    for j in range(1, jmax + 1):
        acc = 0.0
        for i in range(1, j + 1):
            acc += ((q + 1.0) * i - j) * a[i] * b[j - i]
        b[j] = acc / j
    return b


def g_coefficient(rho, q, j):
    """Series coefficient G_j(rho, q) of the q-th power expansion of the
    scaled incomplete-Beta series.  Non-negative for rho in [0,1], q >= 0."""
    return g_coefficients(rho, q, j)[j]


def kappa_coefficient(x, rho, j):
    """kappa_j for one side of the decomposition.

    kappa_j = theta * rho/(j x + rho) * binom(rho/x + j, rho) * G_j(rho, q)
    with theta = (Gamma(1+rho) Gamma(1-rho))^(1-1/x) and q = 1/x - 1.  The
    gamma factors are assembled in log space.  Degenerate sides (x = 1 or
    rho = 0) collapse to the point mass kappa_j = [j == 0].
    """
    if not (0.0 < x <= 1.0):
        raise ValueError(f"x must lie in (0,1], got {x}")
    if not (0.0 <= rho < 1.0):
        raise ValueError(f"rho must lie in [0,1), got {rho}")
    if j < 0:
        raise ValueError(f"j must be non-negative, got {j}")
    if x == 1.0 or rho == 0.0:
        return 1.0 if j == 0 else 0.0
    return kappa_coefficients(x, rho, j)[j]


def kappa_coefficients(x, rho, jmax):
    """[kappa_0, ..., kappa_jmax] for one side, sharing one G-table."""
    if x == 1.0 or rho == 0.0:
        return [1.0] + [0.0] * jmax
    q = 1.0 / x - 1.0
    log_theta = (1.0 - 1.0 / x) * (math.lgamma(1.0 + rho) + math.lgamma(1.0 - rho))
    g_table = g_coefficients(rho, q, jmax)
    out = []
    for j in range(jmax + 1):
        log_front = math.log(rho / (j * x + rho))
        log_binom = log_gen_binomial(rho / x + j, rho)
        out.append(math.exp(log_theta + log_front + log_binom) * g_table[j])
    return out


def _degenerate_side(x, rho):
    """A side with x = 1 or rho = 0 contributes no correlation (its kappa
    sequence is a point mass at 0 and its exponent weight vanishes)."""
    return x >= 1.0 or rho <= 0.0


def alpha_coefficient(query, j1, j2):
    """alpha_{j1,j2} = 1 / binom(s1 + s2 + j1 + j2, s1 + j1) with
    s_i = rho_i * (1/x_i - 1).  Lies in (0,1], nonincreasing in each index."""
    s1 = query.rho1 * query.q1
    s2 = query.rho2 * query.q2
    return math.exp(-log_gen_binomial(s1 + s2 + j1 + j2, s1 + j1))


def psi_upper_bound(query, k1, k2):
    """Certified upper bound on Psi: the (k1, k2)-order approximation.

    Bounds the series tails using monotonicity of alpha and the unit total
    mass of each kappa sequence.  k1 = k2 = 0 reproduces the plain
    inverse-binomial bound.  Refuses orders above MAX_UPPER_BOUND_ORDER.
    """
    if k1 < 0 or k2 < 0:
        raise ValueError("orders must be non-negative")
    if k1 > MAX_UPPER_BOUND_ORDER or k2 > MAX_UPPER_BOUND_ORDER:
        raise ValueError(
            f"order ({k1},{k2}) exceeds supported maximum {MAX_UPPER_BOUND_ORDER}"
        )
    if _degenerate_side(query.x1, query.rho1) or _degenerate_side(query.x2, query.rho2):
        return 1.0
    kap1 = kappa_coefficients(query.x1, query.rho1, max(k1 - 1, 0))[:k1]
    kap2 = kappa_coefficients(query.x2, query.rho2, max(k2 - 1, 0))[:k2]
    alpha = alpha_coefficient
    total = alpha(query, k1, k2)  # A4 tail-tail term
    for j1 in range(k1):
        total += (alpha(query, j1, k2) - alpha(query, k1, k2)) * kap1[j1]
    for j2 in range(k2):
        total += (alpha(query, k1, j2) - alpha(query, k1, k2)) * kap2[j2]
    for j1 in range(k1):
        for j2 in range(k2):
            head = (
                alpha(query, j1, j2)
                - alpha(query, j1, k2)
                - alpha(query, k1, j2)
                + alpha(query, k1, k2)
            )
            total += head * kap1[j1] * kap2[j2]
    return total


def psi_partial_sum(query, jmax):
    """Truncated double series: a lower bound on Psi (all terms are
    non-negative)."""
    if jmax < 0:
        raise ValueError(f"jmax must be non-negative, got {jmax}")
    if _degenerate_side(query.x1, query.rho1) or _degenerate_side(query.x2, query.rho2):
        return 1.0
    kap1 = kappa_coefficients(query.x1, query.rho1, jmax)
    kap2 = kappa_coefficients(query.x2, query.rho2, jmax)
    total = 0.0
    for j1 in range(jmax + 1):
        if kap1[j1] == 0.0:
            continue
        for j2 in range(jmax + 1):
            if kap2[j2] == 0.0:
                continue
            total += alpha_coefficient(query, j1, j2) * kap1[j1] * kap2[j2]
    return total


def psi_infinitesimal_limit(lambda1, lambda2):
    """Limit of Psi as x_i -> 0 with rho_i = lambda_i x_i:
    1 / binom(lambda1 + lambda2, lambda1)."""
    if not (lambda1 > 0 and lambda2 > 0):
        raise ValueError("lambda parameters must be positive")
    return 1.0 / gen_binomial(lambda1 + lambda2, lambda1)


def log_monotone_coefficients(a):
    """Taylor coefficients c_k of log f from the coefficients a_k of f.

    Uses the recursion  k a_0 c_k = k a_k - sum_{i=1}^{k-1} i a_{k-i} c_i.
    Returns [c_1, ..., c_{n-1}] for input of length n.  When a is positive
    and log-convex, every c_k is positive (f is log-absolutely monotonic).
    """
    a = list(a)
    if not a or not a[0] > 0:
        raise ValueError("need a_0 > 0")
    n = len(a)
    c = [0.0] * n  # c[0] unused
    for k in range(1, n):
        acc = k * a[k]
        for i in range(1, k):
            acc -= i * a[k - i] * c[i]
        c[k] = acc / (k * a[0])
    return c[1:]
