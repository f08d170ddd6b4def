import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwcap.errors import ConfigError, UsageError
from uwcap.topology import (EMPTY_ZONE_LIMIT, Placement, build_random, build_regular,
                            displace_to_vertices, interference_layers, max_cell_occupancy,
                            random_cell_side, read_topology, routing_grid, sample_matching,
                            topology_from_text, topology_to_text, vertical_cut, write_topology)


def _euclid(topo, cut):
    p = topo.positions
    src, dst = p[cut.sources], p[cut.destinations]
    return np.hypot(dst[:, None, 0] - src[None, :, 0], dst[:, None, 1] - src[None, :, 1])


def test_regular_lattice():
    t = build_regular(16)
    assert t.n == 16 and t.side == 4.0
    assert t.positions.min() == 1 and t.positions.max() == 4
    assert len({tuple(p) for p in t.positions.tolist()}) == 16
    with pytest.raises(ConfigError):
        build_regular(15)
    with pytest.raises(ConfigError):
        build_regular(9)  # odd side has no centre cut between columns
    with pytest.raises(ValueError):
        t.positions[0, 0] = 5.0


def test_random_layout_seeded():
    a, b = build_random(100, 5), build_random(100, 5)
    assert np.array_equal(a.positions, b.positions)
    assert a.seed == 5 and a.placement is Placement.RANDOM
    assert a.positions.min() >= 0 and a.positions.max() <= 10.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 300), st.integers(0, 2**32 - 1))
def test_matching_is_derangement(n, seed):
    m = sample_matching(n, seed)
    assert sorted(m.tolist()) == list(range(n))
    assert not np.any(m == np.arange(n))


def test_matching_validation():
    t = build_regular(16)
    with pytest.raises(UsageError):
        t.with_matching(np.zeros(16, dtype=int))
    with pytest.raises(UsageError):
        t.pairs()


def test_unit_grid_on_lattice():
    t = build_regular(64)
    g = routing_grid(t)
    assert g.cells_per_axis == 8
    assert np.all(g.occupancy() == 1)
    assert max_cell_occupancy(t) == 1


def test_random_cell_side():
    for n in (64, 256, 1024, 4096):
        s = random_cell_side(n)
        assert s >= math.sqrt(2 * math.log(n)) - 1e-12
        k = math.sqrt(n) / s
        assert abs(k - round(k)) < 1e-9


def test_grid_assigns_every_node():
    t = build_random(1024, 2)
    g = routing_grid(t)
    assert g.occupancy().sum() == 1024
    centres = g.cell_center(g.cell_xy[:, 0], g.cell_xy[:, 1])
    assert np.all(np.abs(t.positions - centres) <= g.cell_side / 2 + 1e-9)


def test_interference_layers():
    layers = interference_layers(3)
    assert [l.cell_count for l in layers] == [8, 16, 24]
    assert [l.min_distance for l in layers] == [1, 2, 3]


@pytest.mark.parametrize("n", [4, 16, 64])
def test_cut_distances_match_geometry(n):
    t = build_regular(n)
    cut = vertical_cut(t)
    assert len(cut.sources) == len(cut.destinations) == n // 2
    assert cut.source_coords[:, 0].min() == 1 and cut.dest_coords[:, 0].min() == 1
    np.testing.assert_allclose(cut.distances(), _euclid(t, cut), rtol=0, atol=1e-12)
    np.testing.assert_allclose(
        cut.source_position(cut.source_coords[:, 0], cut.source_coords[:, 1]),
        t.positions[cut.sources])


def test_cut_rejects_random_layout():
    with pytest.raises(UsageError):
        vertical_cut(build_random(64, 1))


def test_displacement():
    t = build_random(1024, 11)
    width = 0.25
    d, mult = displace_to_vertices(t, width)
    x = t.positions[:, 0]
    cut_x = t.side / 2
    removed = np.sum((x > cut_x) & (x < cut_x + width))
    assert d.n == t.n - removed
    assert sum(mult.values()) == d.n
    assert d.placement is Placement.DISPLACED
    # left nodes move right, never across the cut; right nodes sit at least one unit right
    off = d.positions[:, 0] - cut_x
    assert np.all((off <= 0) | (off >= 1))
    assert np.allclose(off, np.round(off))
    assert np.allclose(d.positions[:, 1], np.round(d.positions[:, 1]))
    cut = vertical_cut(d)
    np.testing.assert_allclose(cut.distances(), _euclid(d, cut), atol=1e-9)
    assert Counter(map(tuple, d.positions.tolist())) == mult


def test_displacement_width_limit():
    t = build_random(64, 1)
    assert EMPTY_ZONE_LIMIT == pytest.approx(1 / (math.sqrt(7) * math.exp(0.25)))
    with pytest.raises(ConfigError):
        displace_to_vertices(t, EMPTY_ZONE_LIMIT)
    with pytest.raises(UsageError):
        displace_to_vertices(build_regular(64), 0.1)


def test_text_round_trip(tmp_path):
    t = build_random(50, 9)
    t = t.with_matching(sample_matching(50, 4))
    back = topology_from_text(topology_to_text(t))
    assert np.array_equal(back.positions, t.positions)
    assert np.array_equal(back.matching, t.matching)
    assert back.seed == 9 and back.side == t.side
    path = tmp_path / "topo.txt"
    write_topology(build_regular(16), path)
    r = read_topology(path)
    assert r.placement is Placement.REGULAR and r.matching is None and r.seed is None


def test_text_format_errors():
    with pytest.raises(ConfigError):
        topology_from_text("")
    with pytest.raises(ConfigError):
        topology_from_text("n 2 placement random seed none side 1.0\n0.1 0.2\n")
