"""Deterministic special-function kernels: log-gamma, Beta, generalized
binomial coefficients, and the (regularized) incomplete Beta function.

Everything downstream -- the copula transform, the correlation-series
coefficients, and the certifier -- goes through these routines.  All gamma
factors are evaluated in log space so that arguments like rho/x + j with
tiny x do not overflow.

Evaluation strategy for B(z; a, b):

* power series  B(z;a,b) = z^a * sum_k  c_k z^k / (a+k),  c_k = prod (m-b)/m,
  used for z below the standard stability crossover (a+1)/(a+b+2) and for
  all b <= 0 (where the continued fraction is unavailable);
* a Lentz-style continued fraction otherwise (b > 0).
"""

import math
from dataclasses import dataclass

__all__ = [
    "RealTolerance",
    "NumericError",
    "log_gamma",
    "beta",
    "gen_binomial",
    "log_gen_binomial",
    "incomplete_beta",
    "reg_incomplete_beta",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 500


@dataclass(frozen=True)
class RealTolerance:
    """Convergence control for iterative B(z;a,b) evaluation."""

    rel_tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


class NumericError(ArithmeticError):
    """Iteration failed to converge; carries the partial value."""

    def __init__(self, message, partial):
        super().__init__(message)
        self.partial = partial


def log_gamma(x):
    """ln Gamma(x) for x > 0."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x}")
    return math.lgamma(x)


def beta(a, b):
    """Beta function B(a,b) = Gamma(a)Gamma(b)/Gamma(a+b), a, b > 0."""
    if not (a > 0 and b > 0):
        raise ValueError(f"beta requires positive arguments, got ({a}, {b})")
    return math.exp(math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b))


def log_gen_binomial(x, y):
    """ln of the generalized binomial coefficient Gamma(x+1)/(Gamma(y+1)Gamma(x-y+1)).

    All three Gamma arguments must be positive.
    """
    if not (x + 1 > 0 and y + 1 > 0 and x - y + 1 > 0):
        raise ValueError(
            f"gen_binomial({x}, {y}): requires x+1, y+1, x-y+1 all positive"
        )
    return math.lgamma(x + 1) - math.lgamma(y + 1) - math.lgamma(x - y + 1)


def gen_binomial(x, y):
    """Generalized binomial coefficient via log-gamma."""
    return math.exp(log_gen_binomial(x, y))


def _incbeta_series(z, a, b, tol):
    """Power series for B(z;a,b); valid for 0 <= z < 1 (any real b).

    B(z;a,b) = z^a sum_k c_k z^k/(a+k)  with c_0 = 1, c_k = c_{k-1} (k-b)/k.
    """
    if z == 0.0:
        return 0.0
    prefactor = z**a
    coeff = 1.0
    zk = 1.0
    total = coeff / a
    for k in range(1, tol.max_iter + 1):
        coeff *= (k - b) / k
        zk *= z
        term = coeff * zk / (a + k)
        total += term
        if abs(term) <= tol.rel_tol * abs(total):
            return prefactor * total
    raise NumericError(
        f"incomplete_beta series did not converge for (z={z}, a={a}, b={b})",
        prefactor * total,
    )


def _incbeta_contfrac(z, a, b, tol):
    """Continued fraction for B(z;a,b), b > 0, z < (a+1)/(a+b+2).

    Modified Lentz algorithm on the standard Numerical-Recipes expansion of
    I(z;a,b); rescaled back to the unregularized integral.
    """
    tiny = 1e-300
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * z / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, tol.max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * z / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * z / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + aa / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) <= tol.rel_tol:
            front = math.exp(a * math.log(z) + b * math.log1p(-z)) / a
            return front * h
    front = math.exp(a * math.log(z) + b * math.log1p(-z)) / a
    raise NumericError(
        f"incomplete_beta continued fraction did not converge for "
        f"(z={z}, a={a}, b={b})",
        front * h,
    )


def incomplete_beta(z, a, b, tol=None):
    """Incomplete Beta function B(z;a,b) = int_0^z t^(a-1)(1-t)^(b-1) dt.

    Requires 0 <= z <= 1 and a > 0.  b may be non-positive, in which case
    z < 1 is required (the integrand is non-integrably singular at t = 1).
    """
    if tol is None:
        tol = RealTolerance()
    if not (0.0 <= z <= 1.0):
        raise ValueError(f"incomplete_beta requires z in [0,1], got {z}")
    if not a > 0:
        raise ValueError(f"incomplete_beta requires a > 0, got {a}")
    if b <= 0 and z >= 1.0:
        raise ValueError(
            f"incomplete_beta with b={b} <= 0 requires z < 1 (divergent at 1)"
        )
    if z == 0.0:
        return 0.0
    if b <= 0:
        return _incbeta_series(z, a, b, tol)
    if z == 1.0:
        return beta(a, b)
    crossover = (a + 1.0) / (a + b + 2.0)
    if z < crossover:
        return _incbeta_series(z, a, b, tol)
    # Symmetry: B(z;a,b) = B(a,b) - B(1-z;b,a), with 1-z on the side where
    # the continued fraction is stable.
    return beta(a, b) - _incbeta_contfrac(1.0 - z, b, a, tol)


def reg_incomplete_beta(z, a, b, tol=None):
    """Regularized incomplete Beta I(z;a,b) = B(z;a,b)/B(a,b), a > 0, b > 0.

    Boundary conventions (distributional limits of Beta(a,b)):
    I(z;0,1) = 1 for z > 0 and I(z;1,0) = 0 for z < 1.
    """
    if not (0.0 <= z <= 1.0):
        raise ValueError(f"reg_incomplete_beta requires z in [0,1], got {z}")
    if a == 0.0 and b > 0:
        return 1.0 if z > 0.0 else 0.0
    if b == 0.0 and a > 0:
        return 1.0 if z >= 1.0 else 0.0
    if not (a > 0 and b > 0):
        raise ValueError(
            f"reg_incomplete_beta requires a, b >= 0, not both 0, got ({a}, {b})"
        )
    if z == 0.0:
        return 0.0
    if z == 1.0:
        return 1.0
    return incomplete_beta(z, a, b, tol) / beta(a, b)
