"""Box certifier: interval-image soundness, point collapse, bisection
behaviour, and the high-precision spot check."""

import math

import numpy as np
import pytest

from dirmech.certify import (
    MARGIN,
    Box4,
    CertReport,
    box_upper_bound,
    box_upper_bound_hp,
    certify_region,
    f_point,
    small_g_bound,
    small_g_factors,
)

C = 0.3947

SAMPLE_BOXES = [
    Box4((0.40, 0.50), (0.00, 0.10), (0.30, 0.40), (0.30, 0.40)),
    Box4((0.60, 0.70), (0.05, 0.15), (0.30, 0.35), (0.35, 0.45)),
    Box4((0.70, 0.80), (0.00, 0.05), (0.20, 0.30), (0.60, 0.70)),
    Box4((0.90, 1.00), (0.30, 0.40), (0.003, 0.05), (0.40, 0.50)),
]


def test_box_validation():
    with pytest.raises(ValueError):
        Box4((0.5, 0.4), (0, 1), (0, 1), (0, 1))
    with pytest.raises(ValueError):
        Box4((0, 1.5), (0, 1), (0, 1), (0, 1))


def test_feasibility_and_clipping():
    # r2 + g2 always exceeds r1: infeasible
    box = Box4((0.0, 0.1), (0.5, 0.6), (0.3, 0.4), (0.5, 0.6))
    assert not box.feasible()
    clipped = SAMPLE_BOXES[0].clipped()
    assert clipped is not None
    # clipping only shrinks, and keeps the feasible corner
    for name in ("r1", "r2", "g1", "g2"):
        lo0, hi0 = getattr(SAMPLE_BOXES[0], name)
        lo1, hi1 = getattr(clipped, name)
        assert lo0 <= lo1 + 1e-12 and hi1 <= hi0 + 1e-12


def test_split_and_widest_axis():
    box = Box4((0.0, 0.4), (0.0, 0.1), (0.3, 0.5), (0.3, 0.35))
    assert box.widest_axis() == "r1"
    a, b = box.split("r1")
    assert a.r1 == (0.0, 0.2) and b.r1 == (0.2, 0.4)
    assert a.g1 == box.g1 and b.g2 == box.g2


def test_point_collapse():
    # a zero-width box must reproduce the pointwise value exactly
    for (r1, r2, g1, g2) in [(0.5, 0.05, 0.35, 0.35), (0.7, 0.0, 0.3, 0.62)]:
        box = Box4((r1, r1), (r2, r2), (g1, g1), (g2, g2))
        assert box_upper_bound(box) - MARGIN == pytest.approx(
            f_point(r1, r2, g1, g2), abs=1e-14
        )


def test_nested_boxes_tighten():
    for box in SAMPLE_BOXES:
        parent = box_upper_bound(box)
        a, b = box.split(box.widest_axis())
        for child in (a, b):
            if child.feasible() and child.clipped() is not None:
                assert box_upper_bound(child) <= parent + 1e-12


def test_box_bound_dominates_interior_points():
    gen = np.random.default_rng(50)
    for box in SAMPLE_BOXES:
        bound = box_upper_bound(box)
        hits = 0
        while hits < 40:
            r1 = gen.uniform(*box.r1)
            r2 = gen.uniform(*box.r2)
            g1 = gen.uniform(*box.g1)
            g2 = gen.uniform(*box.g2)
            if not (r2 + g2 <= r1 and r1 + g1 <= 1.0):
                continue
            hits += 1
            assert f_point(r1, r2, g1, g2) <= bound + 1e-12


def test_high_precision_spot_check():
    for box in SAMPLE_BOXES:
        fast = box_upper_bound(box) - MARGIN
        precise = box_upper_bound_hp(box)
        assert fast == pytest.approx(precise, abs=1e-9)


def test_degenerate_denominator_refusal():
    with pytest.raises(ValueError):
        box_upper_bound(Box4((0.5, 0.6), (0.0, 0.1), (0.0, 0.1), (0.3, 0.4)))
    with pytest.raises(ValueError):
        f_point(0.5, 0.1, 0.3, 0.0)
    with pytest.raises(ValueError):
        f_point(0.2, 0.3, 0.3, 0.3)  # violates r2 + g2 <= r1
    with pytest.raises(ValueError):
        box_upper_bound(Box4((0.0, 0.1), (0.5, 0.6), (0.3, 0.4), (0.5, 0.6)))


def test_small_g_regime():
    ceiling, binom_factor = small_g_factors(0.003)
    assert ceiling == pytest.approx(1.000604, abs=1e-5)
    assert binom_factor == pytest.approx(0.394535, abs=1e-5)
    product = small_g_bound(0.003)
    # the documented near-miss: slightly above c but below 0.3948
    assert C < product < 0.3948
    with pytest.raises(ValueError):
        small_g_factors(0.004)
    with pytest.raises(ValueError):
        small_g_factors(0.0)


def test_certify_small_region_passes():
    report = certify_region((0.6, 0.7), (0.0, 0.1), (0.3, 0.4), (0.3, 0.4),
                            epsilon=0.05, c=C)
    assert isinstance(report, CertReport)
    assert report.passed
    assert report.boxes_checked >= report.boxes_passed > 0
    assert report.worst_bound < C
    assert report.worst_box is not None


def test_certify_reports_failure_with_witness():
    report = certify_region((0.6, 0.7), (0.0, 0.1), (0.3, 0.4), (0.3, 0.4),
                            epsilon=0.05, c=0.2, max_depth=2)
    assert not report.passed
    assert report.worst_bound > 0.2
    assert report.worst_box is not None


def test_certify_empty_region_passes_vacuously():
    report = certify_region((0.0, 0.05), (0.5, 0.6), (0.3, 0.4), (0.3, 0.4),
                            epsilon=0.05, c=C)
    assert report.passed
    assert report.boxes_checked == 0


def test_certify_input_validation():
    with pytest.raises(ValueError):
        certify_region((0, 1), (0, 1), (0.3, 1), (0.3, 1), epsilon=0.0, c=C)
    with pytest.raises(ValueError):
        certify_region((0, 1), (0, 1), (0.1, 1), (0.3, 1), epsilon=0.05, c=C)


def test_certify_deterministic():
    args = ((0.6, 0.7), (0.0, 0.1), (0.3, 0.4), (0.3, 0.4))
    a = certify_region(*args, epsilon=0.05, c=C)
    b = certify_region(*args, epsilon=0.05, c=C)
    assert a.boxes_checked == b.boxes_checked
    assert a.worst_bound == b.worst_bound
    assert a.worst_box == b.worst_box
