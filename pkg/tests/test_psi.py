"""Series machinery for the pair-correlation function: coefficient
positivity, dual-route agreement, unit mass, and the Monte Carlo sandwich."""

import math

import pytest

from dirmech.copula import Z99, psi_mc_oracle
from dirmech.psi import (
    MAX_UPPER_BOUND_ORDER,
    PsiQuery,
    alpha_coefficient,
    beta_series_coefficients,
    faa_di_bruno_partitions,
    g_coefficient,
    g_coefficient_partition_sum,
    g_coefficients,
    kappa_coefficient,
    kappa_coefficients,
    log_convexity_ratio,
    log_monotone_coefficients,
    psi_infinitesimal_limit,
    psi_partial_sum,
    psi_upper_bound,
)
from dirmech.randomness import RngState
from dirmech.specialfn import gen_binomial

# number of integer partitions of 0, 1, 2, ...
PARTITION_COUNTS = [1, 1, 2, 3, 5, 7, 11, 15, 22, 30, 42]


def test_partitions_counts_and_structure():
    for j, count in enumerate(PARTITION_COUNTS):
        parts = faa_di_bruno_partitions(j)
        assert len(parts) == count
        for ks in parts:
            assert sum((i + 1) * k for i, k in enumerate(ks)) == j
    with pytest.raises(ValueError):
        faa_di_bruno_partitions(-1)


def test_beta_series_coefficients_closed_form():
    # independent route: B(z;a,b) = z^a sum c_k z^k/(a+k) with
    # c_k = c_{k-1}(k-b)/k; the scaled coefficients are a_k = rho c_k/(rho+k)
    for rho in [0.1, 0.45, 0.9]:
        a = beta_series_coefficients(rho, 10)
        c = 1.0
        for k in range(11):
            if k > 0:
                c *= (k - (1.0 - rho)) / k
            assert a[k] == pytest.approx(rho * c / (rho + k), rel=1e-12)
    assert beta_series_coefficients(0.5, 0)[0] == 1.0


def test_log_convexity_ratio_matches_coefficients():
    for rho in [0.2, 0.5, 0.8]:
        a = beta_series_coefficients(rho, 12)
        for i in range(2, 13):
            direct = a[i] * a[i - 2] / a[i - 1] ** 2
            assert log_convexity_ratio(rho, i) == pytest.approx(direct, rel=1e-10)
            assert log_convexity_ratio(rho, i) >= 1.0
    with pytest.raises(ValueError):
        log_convexity_ratio(0.5, 1)


def test_g_coefficients_dual_route():
    # quadratic recursion vs the literal (exponential) partition sum
    for rho in [0.15, 0.5, 0.85]:
        for q in [0.3, 1.0, 4.0]:
            rec = g_coefficients(rho, q, 8)
            for j in range(9):
                lit = g_coefficient_partition_sum(rho, q, j)
                assert rec[j] == pytest.approx(lit, rel=1e-9, abs=1e-12)
                assert rec[j] >= 0.0
    assert g_coefficient(0.5, 2.0, 3) == pytest.approx(
        g_coefficient_partition_sum(0.5, 2.0, 3), rel=1e-9
    )
    with pytest.raises(ValueError):
        g_coefficients(0.5, 1.0, -1)
    with pytest.raises(ValueError):
        g_coefficient_partition_sum(0.5, 1.0, -2)


def test_kappa_unit_mass():
    # the mass sums to one; the tail is polynomially heavy, so assert
    # bounded partial sums converging upward to 1 rather than a fixed cutoff
    for x, rho in [(0.3, 0.5), (0.6, 0.2), (0.2, 0.8)]:
        kap = kappa_coefficients(x, rho, 3000)
        assert all(k >= 0.0 for k in kap)
        s1000 = sum(kap[:1001])
        s3000 = sum(kap)
        assert s1000 <= s3000 <= 1.0 + 1e-9
        assert 1.0 - s3000 < 0.8 * (1.0 - s1000)  # still converging to 1
    # a light-tailed case reaches unit mass within the cutoff
    assert sum(kappa_coefficients(0.6, 0.2, 3000)) == pytest.approx(1.0, abs=1e-7)


def test_kappa_degenerate_point_mass():
    assert kappa_coefficients(1.0, 0.5, 4) == [1.0, 0.0, 0.0, 0.0, 0.0]
    assert kappa_coefficients(0.4, 0.0, 2) == [1.0, 0.0, 0.0]
    assert kappa_coefficient(1.0, 0.3, 0) == 1.0
    assert kappa_coefficient(0.4, 0.0, 5) == 0.0
    with pytest.raises(ValueError):
        kappa_coefficient(0.0, 0.5, 0)
    with pytest.raises(ValueError):
        kappa_coefficient(0.5, 1.0, 0)
    with pytest.raises(ValueError):
        kappa_coefficient(0.5, 0.5, -1)


def test_alpha_coefficient_range_and_monotonicity():
    q = PsiQuery(0.4, 0.6, 0.3, 0.5)
    prev = None
    for j in range(6):
        a = alpha_coefficient(q, j, j)
        assert 0.0 < a <= 1.0
        if prev is not None:
            assert a <= prev + 1e-15
        prev = a
    # nonincreasing in each index separately
    for j1 in range(4):
        for j2 in range(4):
            a = alpha_coefficient(q, j1, j2)
            assert alpha_coefficient(q, j1 + 1, j2) <= a + 1e-15
            assert alpha_coefficient(q, j1, j2 + 1) <= a + 1e-15
    # order (0,0) is the plain inverse binomial
    s1 = q.rho1 * q.q1
    s2 = q.rho2 * q.q2
    assert alpha_coefficient(q, 0, 0) == pytest.approx(
        1.0 / gen_binomial(s1 + s2, s1), rel=1e-12
    )


def test_upper_bound_dominates_partial_sum():
    for x1, x2, r1, r2 in [
        (0.3, 0.4, 0.2, 0.5),
        (0.7, 0.2, 0.4, 0.4),
        (0.9, 0.9, 0.05, 0.05),
    ]:
        q = PsiQuery(x1, x2, r1, r2)
        lower = psi_partial_sum(q, 20)
        for k in [0, 1, 3, 6]:
            assert psi_upper_bound(q, k, k) >= lower - 1e-12
        # higher order can only tighten the zero-order bound
        assert psi_upper_bound(q, 3, 3) <= psi_upper_bound(q, 0, 0) + 1e-12


def test_degenerate_queries_give_one():
    assert psi_upper_bound(PsiQuery(1.0, 1.0, 0.3, 0.3), 3, 3) == 1.0
    assert psi_partial_sum(PsiQuery(1.0, 1.0, 0.3, 0.3), 20) == 1.0
    assert psi_upper_bound(PsiQuery(0.5, 0.5, 0.0, 0.3), 3, 3) == 1.0


def test_order_refusal():
    q = PsiQuery(0.5, 0.5, 0.3, 0.3)
    with pytest.raises(ValueError):
        psi_upper_bound(q, MAX_UPPER_BOUND_ORDER + 1, 3)
    with pytest.raises(ValueError):
        psi_upper_bound(q, -1, 3)
    with pytest.raises(ValueError):
        psi_partial_sum(q, -1)


def test_query_validation():
    with pytest.raises(ValueError):
        PsiQuery(0.0, 0.5, 0.3, 0.3)
    with pytest.raises(ValueError):
        PsiQuery(0.5, 0.5, -0.1, 0.3)
    with pytest.raises(ValueError):
        PsiQuery(0.5, 0.5, 0.6, 0.6)


def test_monte_carlo_sandwich():
    trials = 300_000
    for seed, (x1, x2, r1, r2) in enumerate(
        [(0.4, 0.5, 0.3, 0.4), (0.2, 0.8, 0.5, 0.2), (0.6, 0.6, 0.45, 0.45)]
    ):
        q = PsiQuery(x1, x2, r1, r2)
        lower = psi_partial_sum(q, 20)
        upper = psi_upper_bound(q, 3, 3)
        est, hw = psi_mc_oracle(x1, x2, r1, r2, trials, RngState(500 + seed))
        sigma = hw / Z99
        assert lower - 4.0 * sigma <= est <= upper + 4.0 * sigma


def test_infinitesimal_limit():
    assert psi_infinitesimal_limit(1.0, 1.0) == pytest.approx(0.5, rel=1e-12)
    assert psi_infinitesimal_limit(2.0, 2.0) == pytest.approx(1.0 / 6.0, rel=1e-12)
    assert psi_infinitesimal_limit(1.0, 2.0) == pytest.approx(1.0 / 3.0, rel=1e-12)
    with pytest.raises(ValueError):
        psi_infinitesimal_limit(0.0, 1.0)


def test_log_monotone_coefficients_exponential():
    # f = exp: a_k = 1/k!, log f = x, so c_1 = 1 and the rest vanish
    a = [1.0 / math.factorial(k) for k in range(8)]
    c = log_monotone_coefficients(a)
    assert c[0] == pytest.approx(1.0, abs=1e-12)
    assert all(abs(v) < 1e-10 for v in c[1:])
    with pytest.raises(ValueError):
        log_monotone_coefficients([])
    with pytest.raises(ValueError):
        log_monotone_coefficients([0.0, 1.0])


def test_log_monotone_positivity_for_beta_series():
    for rho in [0.1, 0.5, 0.9]:
        a = beta_series_coefficients(rho, 31)
        c = log_monotone_coefficients(a)
        assert all(v > 0.0 for v in c)
