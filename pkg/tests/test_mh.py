import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwcap.channel import AbsorptionProfile, ChannelState
from uwcap.cutset import cut_set_bound
from uwcap.errors import RegimeError, RoutingError, UsageError
from uwcap.mh import (Mode, bursty_params, cell_relays, cell_walk, checkerboard_slot,
                      interference_limit, interference_total, per_hop_sinr, random_mh_simulation,
                      random_mh_throughput, regular_mh_analytic, regular_mh_simulated,
                      regular_mh_throughput, route_mh, simulate_mh, tdma9_slot)
from uwcap.topology import (Placement, Topology, build_random, build_regular, routing_grid,
                            sample_matching)

PROFILE = AbsorptionProfile(unit_km=500.0)


def _node_at(topo, x, y):
    return int(np.flatnonzero((topo.positions[:, 0] == x) & (topo.positions[:, 1] == y))[0])


def test_bursty_arithmetic():
    p = bursty_params(ChannelState.from_parameters(3.0, ln_noise=-1.0), 1.0)
    assert p.duty_fraction_ln == -2.0 and not p.clamped
    p = bursty_params(ChannelState.from_parameters(0.0, ln_noise=0.0), 2.0)
    assert p.duty_fraction_ln == 0.0 and p.instantaneous_power_ln == pytest.approx(math.log(2.0))
    p = bursty_params(ChannelState.from_parameters(0.5, ln_noise=-2.0), 1.0)
    assert p.clamped and p.duty_fraction_ln == 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 50.0), st.floats(-20.0, 20.0), st.floats(1e-3, 1e3))
def test_duty_power_identity(ln_a, ln_n, P):
    p = bursty_params(ChannelState.from_parameters(ln_a, ln_noise=ln_n), P)
    assert p.duty_fraction_ln + p.instantaneous_power_ln == pytest.approx(math.log(P), abs=1e-12)
    assert p.duty_fraction_ln <= 0


def test_route_collinear():
    t = build_regular(16)
    g = routing_grid(t)
    r = route_mh(t, g, (_node_at(t, 1, 1), _node_at(t, 4, 1)))
    assert r.hops == 3
    np.testing.assert_allclose(r.hop_distances, 1.0)


def test_route_staircase():
    t = build_regular(16)
    g = routing_grid(t)
    r = route_mh(t, g, (_node_at(t, 1, 1), _node_at(t, 3, 2)))
    assert r.hops <= 3
    assert np.all(r.hop_distances <= math.sqrt(2) + 1e-12)
    assert r.cells == [(0, 0), (1, 0), (1, 1), (2, 1)]


def test_route_diagonal_bound():
    n = 64
    t = build_regular(n)
    r = route_mh(t, routing_grid(t), (_node_at(t, 1, 1), _node_at(t, 8, 8)))
    assert r.hops <= 2 * math.sqrt(n)
    with pytest.raises(UsageError):
        route_mh(t, routing_grid(t), (3, 3))


def _segment_hits_cell(p0, p1, cell):
    """Liang-Barsky clip of the segment against the closed unit cell."""
    t0, t1 = 0.0, 1.0
    d = p1 - p0
    for axis in range(2):
        lo, hi = cell[axis], cell[axis] + 1
        if d[axis] == 0:
            if not lo <= p0[axis] <= hi:
                return False
            continue
        a, b = sorted(((lo - p0[axis]) / d[axis], (hi - p0[axis]) / d[axis]))
        t0, t1 = max(t0, a), min(t1, b)
    return t0 <= t1 + 1e-12


@settings(max_examples=60, deadline=None)
@given(st.tuples(st.integers(0, 12), st.integers(0, 12)), st.tuples(st.integers(0, 12), st.integers(0, 12)))
def test_cell_walk_properties(a, b):
    walk = cell_walk(a, b)
    assert walk[0] == a and walk[-1] == b
    assert len(walk) == abs(a[0] - b[0]) + abs(a[1] - b[1]) + 1
    for (x0, y0), (x1, y1) in zip(walk, walk[1:]):
        assert abs(x1 - x0) + abs(y1 - y0) == 1
    c0, c1 = np.array(a) + 0.5, np.array(b) + 0.5
    assert all(_segment_hits_cell(c0, c1, c) for c in walk)


def test_empty_cell_routing_error():
    # two nodes in opposite corners, nothing in between
    t = Topology(np.array([[0.5, 0.5], [9.5, 9.5]]), 10.0, Placement.RANDOM, matching=[1, 0])
    g = routing_grid(t, 1.0)
    with pytest.raises(RoutingError):
        route_mh(t, g, (0, 1))
    with pytest.raises(RoutingError):
        random_mh_throughput(t, PROFILE.at(2.0), 1.0)


def test_relay_nearest_centre():
    t = Topology(np.array([[0.2, 0.2], [0.5, 0.6], [0.5, 0.4]]), 1.0, Placement.RANDOM)
    g = routing_grid(t, 1.0)
    # nodes 1 and 2 tie; the lower index wins
    assert cell_relays(t, g)[0] == 1


def test_interference_closed_form():
    ch = ChannelState.from_parameters(1.0, alpha=1.0, c0=1.0, ln_noise=0.3)
    res = interference_total(ch, 2.0, 50)
    closed = 8 * math.exp(0.3) * 2.0 / (1 - math.exp(-1.0))
    assert res.total.value == pytest.approx(closed, rel=1e-6)
    assert closed / (8 * math.exp(0.3) * 2.0) == pytest.approx(1.5820, abs=1e-4)
    # reported tail bound covers what the truncation left out
    assert closed - res.total.value <= res.tail_bound.value * (1 + 1e-9) + 1e-12 * closed
    assert interference_limit(ch, 2.0).value == pytest.approx(closed, rel=1e-12)


def test_interference_monotone_in_alpha():
    vals = [interference_total(ChannelState.from_parameters(0.7, alpha=a, ln_noise=1.0), 1.0, 30).total
            for a in (1.0, 1.5, 2.0)]
    assert vals[0] > vals[1] > vals[2]


def test_interference_divergence():
    ch = ChannelState.from_parameters(0.0, alpha=1.5)
    assert interference_total(ch, 1.0, 10).tail_bound is None
    with pytest.raises(RegimeError):
        interference_limit(ch, 1.0)
    with pytest.raises(UsageError):
        interference_total(ch, 1.0, 0)


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0])
def test_interference_over_noise_flat_in_f(alpha):
    prof = AbsorptionProfile(alpha=alpha, unit_km=500.0)
    vals = []
    for f in (1.0, 5.0, 10.0, 50.0):
        ch = prof.at(f)
        vals.append(interference_total(ch, 1.0, 50).total.ln_value - ch.ln_noise)
    assert math.expm1(max(vals) - min(vals)) < 0.01


def test_sinr_nearly_f_invariant():
    s = [per_hop_sinr(PROFILE.at(f), 1.0, 1.0, interference_total(PROFILE.at(f), 1.0, 50).total)
         for f in (1.0, 10.0, 100.0)]
    assert max(s) / min(s) - 1 < 1e-3
    # the limit is P / (c0 (1 + 8))
    assert s[-1] == pytest.approx(1.0 / 9.0, rel=1e-3)


def test_sinr_noise_only_and_doubling():
    ch = ChannelState.from_parameters(2.0, alpha=1.5, ln_noise=0.5)
    inst = bursty_params(ch, 1.0).instantaneous_power_ln
    s1 = per_hop_sinr(ch, 1.0, 1.0, -math.inf)
    assert s1 == pytest.approx(math.exp(inst - float(ch.ln_attenuation(1.0)) - 0.5))
    s2 = per_hop_sinr(ch, 1.0, 2.0, -math.inf)
    assert math.log(s2) - math.log(s1) == pytest.approx(-(1.5 * math.log(2) + 2.0), rel=1e-12)
    with pytest.raises(UsageError):
        per_hop_sinr(ch, 1.0, 0.0, 0.0)


def test_analytic_sqrt_n_scaling():
    ch = PROFILE.at(3.0)
    a, b = regular_mh_analytic(64, ch, 1.0), regular_mh_analytic(256, ch, 1.0)
    assert b.total_bits / a.total_bits == pytest.approx(2.0, rel=1e-12)
    assert a.active_sources == 8
    assert a.total_throughput_ln.ln_value == pytest.approx(a.per_pair_rate_ln.ln_value + math.log(8))


@pytest.mark.parametrize("n", [64, 256])
def test_simulated_close_to_analytic(n):
    ch = PROFILE.at(n ** 0.25)
    analytic, _ = regular_mh_throughput(n, ch, 1.0)
    ratios = [regular_mh_simulated(n, ch, 1.0, s).total_bits / analytic.total_bits for s in range(10)]
    assert 0.1 <= np.mean(ratios) <= 1.5
    assert analytic.total_bits <= cut_set_bound(n, ch, 1.0).bits


def test_simulation_schedule_legality():
    n = 64
    ch = PROFILE.at(n ** 0.25)
    t = build_regular(n).with_matching(sample_matching(n, 3))
    g = routing_grid(t)
    sim = simulate_mh(t, g, ch, 1.0, checkerboard_slot, 2, True, Mode.REGULAR_SIMULATED)
    k = g.cells_per_axis
    rx = np.concatenate([r.nodes[1:] for r in sim.routes])
    rx_cell = g.cell_xy[rx, 0] * k + g.cell_xy[rx, 1]
    rx_slot = checkerboard_slot(g.cell_xy[rx, 0], g.cell_xy[rx, 1])
    # a receiver is never in a slot where its own cell transmits
    assert np.all(rx_slot != sim.hop_slot)
    assert np.all(rx_cell != sim.hop_tx_cell)
    assert sim.report.max_hop_distance == 1.0


def test_tdma9_reuse():
    xs, ys = np.meshgrid(np.arange(12), np.arange(12), indexing="ij")
    slots = tdma9_slot(xs, ys)
    for x in range(10):
        for y in range(10):
            assert len(set(slots[x:x + 3, y:y + 3].ravel().tolist())) == 9
    cs = checkerboard_slot(xs, ys)
    assert np.all(cs[1:] != cs[:-1]) and np.all(cs[:, 1:] != cs[:, :-1])


def test_random_network():
    n = 256
    ch = PROFILE.at(n ** 0.25)
    t = build_random(n, 21).with_matching(sample_matching(n, 22))
    sim = random_mh_simulation(t, ch, 1.0)
    rep = sim.report
    g = routing_grid(t)
    assert rep.mode is Mode.RANDOM_SIMULATED and rep.duty_ln == 0.0
    assert rep.max_hop_distance <= math.sqrt(5) * g.cell_side + 1e-9
    assert rep.unroutable_fraction <= 0.01
    assert rep.total_throughput_ln < regular_mh_analytic(n, ch, 1.0).total_throughput_ln
    with pytest.raises(UsageError):
        random_mh_throughput(build_regular(64).with_matching(sample_matching(64, 1)), ch, 1.0)
    with pytest.raises(UsageError):
        random_mh_throughput(build_random(64, 1), ch, 1.0)
