"""Box certification of the online correlation-factor inequality.

The quantity to certify is

    f(r1,r2,g1,g2) = (Psi(x1,x2;rho1,rho2) x1 x2
                      - beta (y1 - F(r1) g1) y2 / Q(0,r1)) / (F(r1) g1 y2)

with y_i = Q(r_i,g_i), rho_i = alpha y_i, x_i = (1-beta) F(r_i) g_i
+ beta y_i, over the simplex r2+g2 <= r1, r1+g1 <= 1.  The claim is
f <= c for c = 0.3947.

The certifier partitions the region into boxes and upper-bounds f on
each box using monotone interval images: y, rho, x are monotone in
(r, g); the per-side kappa weights are increasing in rho and the alpha
coefficients decreasing, so evaluating each factor at the correct box
corner yields a rigorous (up to floating point) bound.  A directed
safety margin of 1e-9 is added to every box bound in place of exact
arithmetic; a high-precision recomputation (50-digit) is available for
spot checks of small box samples.

The tiny-g regime (g <= 0.003) degenerates the denominator and is
covered by a separate analytic product bound, reported but never
asserted: its two factors multiply to slightly above c, so it certifies
only a marginally weaker constant.
"""

import math
import time
from dataclasses import dataclass

from .online import OnlineParams, attenuation_F, cumulative_Q
from .psi import g_coefficients
from .specialfn import gen_binomial, log_gen_binomial

__all__ = [
    "Box4",
    "CertReport",
    "box_upper_bound",
    "f_point",
    "small_g_bound",
    "small_g_factors",
    "certify_region",
]

MARGIN = 1e-9


@dataclass(frozen=True)
class Box4:
    """Axis-aligned box over (r1, r2, g1, g2), all within [0,1]."""

    r1: tuple
    r2: tuple
    g1: tuple
    g2: tuple

    def __post_init__(self):
        for name in ("r1", "r2", "g1", "g2"):
            lo, hi = getattr(self, name)
            if not (0.0 <= lo <= hi <= 1.0):
                raise ValueError(f"{name} interval ({lo}, {hi}) invalid")

    def feasible(self):
        """True iff the box can intersect the constraint region
        r2 + g2 <= r1, r1 + g1 <= 1 (corner test)."""
        return (
            self.r2[0] + self.g2[0] <= self.r1[1]
            and self.r1[0] + self.g1[0] <= 1.0
        )

    def clipped(self):
        """The bounding hull of the feasible subset of the box, or None.

        Propagates r2 + g2 <= r1 and r1 + g1 <= 1 into each axis interval;
        bounding f over the clipped box is sound (f only needs bounding on
        feasible points) and much tighter near the constraint boundaries.
        """
        r1_lo, r1_hi = self.r1
        r2_lo, r2_hi = self.r2
        g1_lo, g1_hi = self.g1
        g2_lo, g2_hi = self.g2
        r1_lo = max(r1_lo, r2_lo + g2_lo)
        r1_hi = min(r1_hi, 1.0 - g1_lo)
        r2_hi = min(r2_hi, r1_hi - g2_lo)
        g2_hi = min(g2_hi, r1_hi - r2_lo)
        g1_hi = min(g1_hi, 1.0 - r1_lo)
        pairs = []
        for lo, hi in ((r1_lo, r1_hi), (r2_lo, r2_hi), (g1_lo, g1_hi), (g2_lo, g2_hi)):
            # constraint roundoff can push lo past hi by an ulp or two
            if lo > hi + 1e-12:
                return None
            pairs.append((min(lo, hi), hi))
        return Box4(*pairs)

    def widest_axis(self):
        widths = {n: getattr(self, n)[1] - getattr(self, n)[0]
                  for n in ("r1", "r2", "g1", "g2")}
        return max(widths, key=lambda n: (widths[n], n))

    def split(self, axis):
        lo, hi = getattr(self, axis)
        mid = 0.5 * (lo + hi)
        d = {n: getattr(self, n) for n in ("r1", "r2", "g1", "g2")}
        a = dict(d)
        a[axis] = (lo, mid)
        b = dict(d)
        b[axis] = (mid, hi)
        return Box4(**a), Box4(**b)


@dataclass
class CertReport:
    region: dict
    epsilon: float
    c: float
    boxes_checked: int
    boxes_passed: int
    worst_bound: float
    worst_box: object
    passed: bool
    runtime: float


def _y_max(r_lo, r_hi, g_hi, params):
    """Max of Q(r, g) over the box intersected with r + g <= 1.

    Q(r, g) increases in both coordinates where defined; on the boundary
    g = 1 - r it decreases in r, so the max sits at r = clamp(1 - g_hi).
    """
    r_star = min(max(1.0 - g_hi, r_lo), r_hi)
    return cumulative_Q(r_star, min(g_hi, 1.0 - r_star), params)


def _kappa_plus(rho_min, rho_max, x_max, jmax):
    """Upper kappa weights on the box: the gamma prefactor is decreasing
    in rho (evaluated at rho_min), everything else increasing (rho_max)."""
    q = 1.0 / x_max - 1.0
    log_theta = (1.0 - 1.0 / x_max) * (
        math.lgamma(1.0 + rho_min) + math.lgamma(1.0 - rho_min)
    )
    g_table = g_coefficients(rho_max, q, jmax)
    out = []
    for j in range(jmax + 1):
        log_front = math.log(rho_max / (j * x_max + rho_max))
        log_binom = log_gen_binomial(rho_max / x_max + j, rho_max)
        out.append(math.exp(log_theta + log_front + log_binom) * g_table[j])
    return out


def _alpha_at(s1, s2, j1, j2):
    return math.exp(-log_gen_binomial(s1 + s2 + j1 + j2, s1 + j1))


def _psi_box_bound(x1_max, x2_max, rho_mins, rho_maxs, k1, k2):
    """Upper bound on Psi * x1 * x2 over the box, divided by x1max*x2max.

    The alpha coefficients enter with positive and negative signs; each is
    replaced by its box-max (rho_min arguments) or box-min (rho_max
    arguments) accordingly, with the A1 head coefficients clamped at 0.
    """
    s1_min = rho_mins[0] * (1.0 / x1_max - 1.0)
    s2_min = rho_mins[1] * (1.0 / x2_max - 1.0)
    s1_max = rho_maxs[0] * (1.0 / x1_max - 1.0)
    s2_max = rho_maxs[1] * (1.0 / x2_max - 1.0)

    def a_plus(j1, j2):
        return _alpha_at(s1_min, s2_min, j1, j2)

    def a_minus(j1, j2):
        return _alpha_at(s1_max, s2_max, j1, j2)

    kap1 = _kappa_plus(rho_mins[0], rho_maxs[0], x1_max, max(k1 - 1, 0))[:k1]
    kap2 = _kappa_plus(rho_mins[1], rho_maxs[1], x2_max, max(k2 - 1, 0))[:k2]
    a1 = 0.0
    for j1 in range(k1):
        for j2 in range(k2):
            head = (
                a_plus(j1, j2)
                - a_minus(j1, k2)
                - a_minus(k1, j2)
                + a_plus(k1, k2)
            )
            a1 += max(head, 0.0) * kap1[j1] * kap2[j2]
    a2 = sum((a_plus(j1, k2) - a_minus(k1, k2)) * kap1[j1] for j1 in range(k1))
    a3 = sum((a_plus(k1, j2) - a_minus(k1, k2)) * kap2[j2] for j2 in range(k2))
    a4 = a_plus(k1, k2)
    return a1 + a2 + a3 + a4


def _window_ratio(r, g, params):
    """Q(r, g) / (F(r) g): mean of F over [r, r+g] relative to its left
    endpoint.  In [1, F(r+g)/F(r)]; increasing in both r and g (F is
    log-convex increasing)."""
    return cumulative_Q(r, g, params) / (float(attenuation_F(r, params)) * g)


def _window_ratio_max(r_lo, r_hi, g_hi, params):
    """Max of the window ratio over the box intersected with r + g <= 1;
    on the boundary g = 1 - r the ratio decreases in r, so the max sits
    at r = clamp(1 - g_hi), like the y image."""
    r_star = min(max(1.0 - g_hi, r_lo), r_hi)
    return _window_ratio(r_star, min(g_hi, 1.0 - r_star), params)


def box_upper_bound(box, params=None, k1=3, k2=3):
    """Rigorous upper bound on f over a feasible box (+1e-9 margin).

    Assembled in the factored form f = Psi * u1 * u2 - benefit with
    u1 = x1/(F(r1) g1) and u2 = x2/y2: both u factors are smooth ratios
    with O(box width) relative variation, so the bound converges to the
    pointwise value much faster than dividing corner-evaluated numerator
    and denominator.  Psi is bounded by the kappa/alpha corner sums at
    x_max (the sum is increasing in x, checked over the whole domain by
    the monotonicity tests), and the benefit term beta (u1-like ratio
    - 1)/Q(0, r1) is increasing in (r1, g1), minimized at the lower
    corner.

    Refuses (ValueError) when g1_min = 0 or g2_min = 0; those boxes
    belong to the tiny-g analytic regime.
    """
    params = params or OnlineParams()
    box = box.clipped() if box.feasible() else None
    if box is None:
        raise ValueError("box is entirely outside the constraint region")
    if not (box.g1[0] > 0.0 and box.g2[0] > 0.0):
        raise ValueError(
            "degenerate denominator (g1_min or g2_min is 0); "
            "use small_g_bound for the tiny-g regime"
        )
    beta = params.beta
    y_min = []
    y_max = []
    x_max = []
    for (r_lo, r_hi), (g_lo, g_hi) in ((box.r1, box.g1), (box.r2, box.g2)):
        ymin = cumulative_Q(r_lo, min(g_lo, 1.0 - r_lo), params)
        ymax = _y_max(r_lo, r_hi, g_hi, params)
        y_min.append(ymin)
        y_max.append(ymax)
        x_max.append(
            (1.0 - beta) * float(attenuation_F(r_hi, params)) * g_hi
            + beta * ymax
        )
    rho_min = [params.alpha * v for v in y_min]
    rho_max = [params.alpha * v for v in y_max]
    psi_box = _psi_box_bound(x_max[0], x_max[1], rho_min, rho_max, k1, k2)
    # u1 = (1-beta) + beta * windowratio(r1, g1), increasing in (r1, g1)
    u1_max = (1.0 - beta) + beta * _window_ratio_max(
        box.r1[0], box.r1[1], box.g1[1], params
    )
    # u2 = (1-beta)/windowratio(r2, g2) + beta, decreasing in the ratio
    u2_max = (1.0 - beta) / _window_ratio(box.r2[0], box.g2[0], params) + beta
    benefit = (
        beta
        * (_window_ratio(box.r1[0], box.g1[0], params) - 1.0)
        / cumulative_Q(0.0, box.r1[1], params)
    )
    return psi_box * u1_max * u2_max - benefit + MARGIN


def f_point(r1, r2, g1, g2, params=None, k1=3, k2=3):
    """Pointwise f with Psi replaced by its certified (k1,k2) upper bound;
    the soundness reference for box bounds."""
    params = params or OnlineParams()
    if not (r2 + g2 <= r1 + 1e-12 and r1 + g1 <= 1.0 + 1e-12):
        raise ValueError("point violates r2+g2 <= r1 or r1+g1 <= 1")
    if not (g1 > 0.0 and g2 > 0.0):
        raise ValueError("f_point requires g1, g2 > 0")
    box = Box4((r1, r1), (r2, r2), (g1, g1), (g2, g2))
    return box_upper_bound(box, params, k1, k2) - MARGIN


def small_g_factors(g_max, params=None):
    """(demand_ceiling, binom_factor) for the tiny-g analytic regime.

    demand_ceiling bounds x1/(F(r1) g1): the ratio is (1-beta) + beta *
    Q(r1,g1)/(F(r1) g1), maximized where F grows fastest (r1 = 1-g_max).
    binom_factor bounds the zero-order correlation term using rho_i >=
    alpha x_i and x_i <= g_max.
    """
    params = params or OnlineParams()
    if not (0.0 < g_max <= 0.003):
        raise ValueError(f"g_max must lie in (0, 0.003], got {g_max}")
    r = 1.0 - g_max
    ceiling = (1.0 - params.beta) + params.beta * cumulative_Q(
        r, g_max, params
    ) / (float(attenuation_F(r, params)) * g_max)
    s = params.alpha * (1.0 - g_max)
    binom_factor = 1.0 / gen_binomial(2.0 * s, s)
    return ceiling, binom_factor


def small_g_bound(g_max, params=None):
    """Product bound on f in the regime g1, g2 <= g_max.

    Report-only: at g_max = 0.003 the product is slightly above 0.3947,
    so it certifies the constant 0.3948 there, not c itself.
    """
    ceiling, binom_factor = small_g_factors(g_max, params)
    return ceiling * binom_factor


def _grid_edges(lo, hi, eps):
    n = max(1, math.ceil((hi - lo) / eps - 1e-12))
    return [lo + (hi - lo) * i / n for i in range(n + 1)]


def certify_region(r1_range, r2_range, g1_range, g2_range, epsilon, c,
                   params=None, max_depth=20, k1=3, k2=3):
    """Certify f <= c over the given region by box decomposition.

    Covers the region with boxes of side epsilon, discards infeasible
    boxes, and bisects the widest axis of any failing box up to
    max_depth before declaring failure.  Extra depth can only turn
    failures into passes, never the reverse; the default accommodates
    the thin ridge along r2 + g2 = r1 where the true margin under c is
    about 0.014 and boxes must shrink well below the initial grid size.  The g ranges must start at or
    above 0.003 (below that the denominator degenerates and the analytic
    tiny-g bound is the certificate).
    """
    params = params or OnlineParams()
    if epsilon <= 0.0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    for name, (lo, hi) in (("g1", g1_range), ("g2", g2_range)):
        if lo < 0.003 and lo < hi:
            raise ValueError(f"{name} range starts below 0.003")
    t0 = time.perf_counter()
    region = {"r1": tuple(r1_range), "r2": tuple(r2_range),
              "g1": tuple(g1_range), "g2": tuple(g2_range)}
    edges = {n: _grid_edges(*region[n], epsilon)
             for n in ("r1", "r2", "g1", "g2")}
    checked = 0
    passed_count = 0
    worst_bound = -math.inf
    worst_box = None
    ok = True

    def handle(box, depth):
        nonlocal checked, passed_count, worst_bound, worst_box, ok
        if not ok:
            return
        if not box.feasible() or box.clipped() is None:
            return
        checked += 1
        bound = box_upper_bound(box, params, k1, k2)
        if bound <= c:
            passed_count += 1
            if bound > worst_bound:
                worst_bound = bound
                worst_box = box
            return
        if depth < max_depth:
            a, b = box.split(box.widest_axis())
            handle(a, depth + 1)
            handle(b, depth + 1)
        else:
            ok = False
            worst_bound = bound
            worst_box = box

    for i1 in range(len(edges["r1"]) - 1):
        for i2 in range(len(edges["r2"]) - 1):
            for j1 in range(len(edges["g1"]) - 1):
                for j2 in range(len(edges["g2"]) - 1):
                    box = Box4(
                        (edges["r1"][i1], edges["r1"][i1 + 1]),
                        (edges["r2"][i2], edges["r2"][i2 + 1]),
                        (edges["g1"][j1], edges["g1"][j1 + 1]),
                        (edges["g2"][j2], edges["g2"][j2 + 1]),
                    )
                    handle(box, 0)
                    if not ok:
                        break
                if not ok:
                    break
            if not ok:
                break
        if not ok:
            break
    if checked == 0:
        worst_bound = -math.inf
    return CertReport(
        region=region,
        epsilon=epsilon,
        c=c,
        boxes_checked=checked,
        boxes_passed=passed_count,
        worst_bound=worst_bound,
        worst_box=worst_box,
        passed=ok,
        runtime=time.perf_counter() - t0,
    )


def box_upper_bound_hp(box, params=None, k1=3, k2=3, dps=50):
    """High-precision (dps-digit) recomputation of the box bound, without
    the floating-point margin; the spot-check reference for small box
    samples (intended for at most a few hundred boxes)."""
    from mpmath import mp, mpf, gamma, log, sqrt, exp

    params = params or OnlineParams()
    box = box.clipped() if box.feasible() else None
    if box is None:
        raise ValueError("box is entirely outside the constraint region")
    with mp.workdps(dps):
        alpha = mpf(str(params.alpha))
        beta = mpf(str(params.beta))
        f0 = mpf(str(params.F0))
        slope = mpf(str(params.Fslope))

        def F(t):
            return f0 / sqrt(1 - slope * t)

        def Q(t0v, dt):
            return (2 * f0 / slope) * (
                sqrt(1 - slope * t0v) - sqrt(1 - slope * (t0v + dt))
            )

        def gbinom(n, k):
            return gamma(n + 1) / (gamma(k + 1) * gamma(n - k + 1))

        if not (box.g1[0] > 0.0 and box.g2[0] > 0.0):
            raise ValueError("degenerate denominator")

        def wratio(r, g):
            return Q(r, g) / (F(r) * g)

        y_min, y_max, x_max = [], [], []
        for (r_lo, r_hi), (g_lo, g_hi) in ((box.r1, box.g1), (box.r2, box.g2)):
            r_lo, r_hi = mpf(repr(r_lo)), mpf(repr(r_hi))
            g_lo, g_hi = mpf(repr(g_lo)), mpf(repr(g_hi))
            ymin = Q(r_lo, min(g_lo, 1 - r_lo))
            r_star = min(max(1 - g_hi, r_lo), r_hi)
            ymax = Q(r_star, min(g_hi, 1 - r_star))
            y_min.append(ymin)
            y_max.append(ymax)
            x_max.append((1 - beta) * F(r_hi) * g_hi + beta * ymax)
        rho_min = [alpha * v for v in y_min]
        rho_max = [alpha * v for v in y_max]

        def kappas(rmin, rmax, xm, jmax):
            q = 1 / xm - 1
            theta = (gamma(1 + rmin) * gamma(1 - rmin)) ** (1 - 1 / xm)
            # Taylor coefficients of the scaled Beta series and its q-power
            a = [mpf(1)]
            for i in range(1, jmax + 1):
                a.append(a[-1] * (rmax + i - 1) ** 2 / (i * (rmax + i)))
            b = [mpf(1)] + [mpf(0)] * jmax
            for j in range(1, jmax + 1):
                acc = mpf(0)
                for i in range(1, j + 1):
                    acc += ((q + 1) * i - j) * a[i] * b[j - i]
                b[j] = acc / j
            return [
                theta
                * (rmax / (j * xm + rmax))
                * gbinom(rmax / xm + j, rmax)
                * b[j]
                for j in range(jmax + 1)
            ]

        s_min = [rho_min[i] * (1 / x_max[i] - 1) for i in range(2)]
        s_max = [rho_max[i] * (1 / x_max[i] - 1) for i in range(2)]

        def a_plus(j1, j2):
            return 1 / gbinom(s_min[0] + s_min[1] + j1 + j2, s_min[0] + j1)

        def a_minus(j1, j2):
            return 1 / gbinom(s_max[0] + s_max[1] + j1 + j2, s_max[0] + j1)

        kap1 = kappas(rho_min[0], rho_max[0], x_max[0], max(k1 - 1, 0))[:k1]
        kap2 = kappas(rho_min[1], rho_max[1], x_max[1], max(k2 - 1, 0))[:k2]
        total = a_plus(k1, k2)
        for j1 in range(k1):
            total += (a_plus(j1, k2) - a_minus(k1, k2)) * kap1[j1]
        for j2 in range(k2):
            total += (a_plus(k1, j2) - a_minus(k1, k2)) * kap2[j2]
        for j1 in range(k1):
            for j2 in range(k2):
                head = (
                    a_plus(j1, j2)
                    - a_minus(j1, k2)
                    - a_minus(k1, j2)
                    + a_plus(k1, k2)
                )
                total += max(head, mpf(0)) * kap1[j1] * kap2[j2]
        r1_lo = mpf(repr(box.r1[0]))
        r1_hi = mpf(repr(box.r1[1]))
        g1_lo = mpf(repr(box.g1[0]))
        g1_hi = mpf(repr(box.g1[1]))
        r_star = min(max(1 - g1_hi, r1_lo), r1_hi)
        u1_max = (1 - beta) + beta * wratio(r_star, min(g1_hi, 1 - r_star))
        u2_max = (1 - beta) / wratio(
            mpf(repr(box.r2[0])), mpf(repr(box.g2[0]))
        ) + beta
        benefit = beta * (wratio(r1_lo, g1_lo) - 1) / Q(mpf(0), r1_hi)
        return float(total * u1_max * u2_max - benefit)
