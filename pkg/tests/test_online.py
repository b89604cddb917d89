"""Online matching: attenuation arithmetic, stream validation, the
matching invariant, and agreement with the offline rounding law."""

import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from dirmech.online import (
    MatchingStream,
    OnlineParams,
    _stream_edge_schedule,
    attenuation_F,
    cumulative_Q,
    derive_Q,
    edge_params,
    gen_overloaded_stream,
    gen_sliver_stream,
    gen_uniform_stream,
    ratio_profile,
    run_odrs,
    run_odrs_batch,
)
from dirmech.randomness import RngState
from dirmech.rounding import BipartiteInstance, dep_round_batch

PARAMS = OnlineParams()


def test_attenuation_endpoints():
    assert attenuation_F(0.0) == pytest.approx(PARAMS.F0, rel=1e-15)
    assert attenuation_F(1.0) <= 1.0
    assert attenuation_F(1.0) == pytest.approx(
        PARAMS.F0 / math.sqrt(1.0 - PARAMS.Fslope), rel=1e-14
    )
    with pytest.raises(ValueError):
        attenuation_F(-0.01)
    with pytest.raises(ValueError):
        attenuation_F(1.01)


def test_cumulative_Q_matches_quadrature():
    for t0, dt in [(0.0, 1.0), (0.0, 0.3), (0.25, 0.5), (0.9, 0.1)]:
        ref, _ = sp_integrate.quad(lambda t: attenuation_F(t), t0, t0 + dt)
        assert cumulative_Q(t0, dt) == pytest.approx(ref, rel=1e-9)
    assert cumulative_Q(0.5, 0.0) == 0.0
    with pytest.raises(ValueError):
        cumulative_Q(0.8, 0.3)
    with pytest.raises(ValueError):
        cumulative_Q(-0.1, 0.2)


def test_total_attenuated_mass_fits_the_rate_budget():
    assert cumulative_Q(0.0, 1.0) <= 1.0 / PARAMS.alpha


def test_edge_params_bounds():
    # x_e <= g_e and y_e <= g_e across the feasible (r, g) grid
    for r in np.linspace(0.0, 0.99, 34):
        for g in np.linspace(0.001, 1.0 - r, 20):
            y, rho, x = edge_params(r, g)
            assert 0.0 < y <= g
            assert rho == pytest.approx(PARAMS.alpha * y, rel=1e-15)
            assert 0.0 < x <= g
    assert edge_params(0.3, 0.0) == (0.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        edge_params(0.8, 0.3)


def test_ratio_profile_floor():
    rs = np.linspace(0.0, 1.0, 10_000)
    vals = [ratio_profile(r) for r in rs]
    assert min(vals) >= 0.68


def test_derive_Q_matches_closed_form():
    for t in [0.0, 0.1, 0.5, 0.9, 1.0]:
        assert derive_Q(PARAMS.alpha, t) == pytest.approx(
            cumulative_Q(0.0, t), abs=1e-5
        )
    with pytest.raises(ValueError):
        derive_Q(0.0, 0.5)
    with pytest.raises(ValueError):
        derive_Q(1.0, 1.5)


def test_stream_validation():
    s = MatchingStream(
        offline=["a", "a"],
        arrivals=[("v", {"a": 0.5, "zz": 0.1}), ("v", {"a": 0.7})],
    )
    report = "; ".join(s.validate())
    assert "duplicate offline" in report
    assert "unknown offline node" in report
    assert "duplicate arrival" in report
    assert "total demand" in report  # a gets 1.2
    s2 = MatchingStream(offline=["a"], arrivals=[("v", {"a": 1.5})])
    assert any("exceeds 1" in v or "outside" in v for v in s2.validate())


def test_stream_json_round_trip():
    s = gen_uniform_stream(3, 5, RngState(20))
    again = MatchingStream.from_json(s.to_json())
    assert again.offline == s.offline
    assert again.arrivals == s.arrivals


def test_schedule_rate_budget_per_offline_node():
    stream = gen_uniform_stream(5, 12, RngState(21))
    schedule = _stream_edge_schedule(stream, PARAMS)
    rho_tot = {u: 0.0 for u in stream.offline}
    for v, edges in schedule:
        for (u, g, r, y, rho, x, rho_prefix) in edges:
            assert rho_prefix == pytest.approx(rho_tot[u], abs=1e-12)
            rho_tot[u] += rho
    assert all(t <= 1.0 for t in rho_tot.values())


def test_run_odrs_produces_a_matching():
    stream = gen_uniform_stream(6, 14, RngState(22))
    result = run_odrs(stream, RngState(23))
    us = [u for u, v in result.matching]
    vs = [v for u, v in result.matching]
    assert len(set(us)) == len(us)
    assert len(set(vs)) == len(vs)
    # committed implies selected in the trace
    for t in result.trace:
        if t.committed:
            assert t.selected


def test_run_odrs_batch_matching_invariant_every_trial():
    stream = gen_uniform_stream(4, 10, RngState(24))
    trials = 5000
    committed, selected, schedule = run_odrs_batch(stream, trials, RngState(25))
    col = 0
    cols_by_u = {}
    cols_by_v = {}
    for v, edges in schedule:
        for (u, *_rest) in edges:
            cols_by_u.setdefault(u, []).append(col)
            cols_by_v.setdefault(v, []).append(col)
            col += 1
    for cols in cols_by_u.values():
        assert np.all(committed[:, cols].sum(axis=1) <= 1)
    for cols in cols_by_v.values():
        assert np.all(committed[:, cols].sum(axis=1) <= 1)
        assert np.all(selected[:, cols].sum(axis=1) <= 1)
    assert np.all(committed <= selected)


def test_run_odrs_batch_rejects_invalid():
    bad = MatchingStream(offline=["a"], arrivals=[("v", {"a": 1.5})])
    with pytest.raises(ValueError):
        run_odrs_batch(bad, 10, RngState(0))


def test_online_selection_matches_offline_rounding():
    # the stick-broken online draws induce exactly the offline law on the
    # derived (x, rho) instance
    stream = MatchingStream(
        offline=["a", "b"],
        arrivals=[("v0", {"a": 0.5, "b": 0.3}), ("v1", {"a": 0.4, "b": 0.5})],
    )
    schedule = _stream_edge_schedule(stream, PARAMS)
    edges = []
    for v, es in schedule:
        for (u, g, r, y, rho, x, _) in es:
            edges.append((u, v, x, rho))
    inst = BipartiteInstance(
        left=list(stream.offline),
        right=[v for v, _ in stream.arrivals],
        edges=edges,
    )
    trials = 100_000
    _, selected, _ = run_odrs_batch(stream, trials, RngState(26))
    X = dep_round_batch(inst, trials, RngState(27))
    for e in range(len(edges)):
        p1 = selected[:, e].mean()
        p2 = X[:, e].mean()
        pool = 0.5 * (p1 + p2)
        hw = 4.0 * math.sqrt(max(pool * (1 - pool), 1e-12) * 2.0 / trials)
        assert abs(p1 - p2) <= hw, (e, p1, p2)


def test_overloaded_stream_floor():
    stream = gen_overloaded_stream(5)
    assert stream.validate() == []
    trials = 100_000
    committed, _, schedule = run_odrs_batch(stream, trials, RngState(28))
    g = 1.0 / 5.0
    for e in range(5):
        emp = committed[:, e].mean()
        hw = 4.0 * math.sqrt(max(emp * (1 - emp), 1e-12) / trials)
        assert emp >= 0.68 * g - hw
    with pytest.raises(ValueError):
        gen_overloaded_stream(4, g=0.3)


def test_sliver_stream():
    base = gen_uniform_stream(3, 4, RngState(29))
    sliced = gen_sliver_stream(base, 4)
    assert sliced.validate() == []
    assert len(sliced.arrivals) == 4 * len(base.arrivals)
    total_base = sum(g for _, gm in base.arrivals for g in gm.values())
    total_sliced = sum(g for _, gm in sliced.arrivals for g in gm.values())
    assert total_sliced == pytest.approx(total_base, rel=1e-12)
    with pytest.raises(ValueError):
        gen_sliver_stream(base, 0)
