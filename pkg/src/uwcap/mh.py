"""Nearest-neighbour multi-hop (MH) transmission.

Regular networks use unit routing cells and bursty transmission: a fraction
``1 / (a N)`` of the time at instantaneous power ``a N P``. Random networks
use cells of area about ``2 ln n``, a 3x3 (9-slot) TDMA reuse pattern and
continuous transmission.

Simulated throughput is a fluid time-sharing model. Every cell of the
active slot transmits, so each hop sees the exact interference of all
other active cells. A cell that relays several routes splits its airtime
between them, and all pairs get the same rate, which is set by the most
loaded cell.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import logsumexp

from .channel import LN2, ChannelState, LogValue, ln_log1p_exp
from .errors import RegimeError, RoutingError, UsageError
from .topology import (Placement, RoutingGrid, Topology, build_regular, routing_grid,
                       sample_matching)

LN_LN2 = math.log(LN2)
MAX_UNROUTABLE = 0.01


class Mode(str, enum.Enum):
    REGULAR_ANALYTIC = "regular_analytic"
    REGULAR_SIMULATED = "regular_simulated"
    RANDOM_SIMULATED = "random_simulated"


@dataclass(frozen=True)
class BurstyParams:
    duty_fraction_ln: float
    instantaneous_power_ln: float
    clamped: bool = False


def bursty_params(channel: ChannelState, P: float) -> BurstyParams:
    """Duty cycle ``1/(a N)`` (capped at 1) and the matching instantaneous power."""
    duty = -(channel.ln_a + channel.ln_noise)
    clamped = duty > 0
    if clamped:
        duty = 0.0
    return BurstyParams(duty, math.log(P) - duty, clamped)


def continuous_params(P: float) -> BurstyParams:
    return BurstyParams(0.0, math.log(P))


# -- routing -------------------------------------------------------------------

def cell_walk(start, end) -> list[tuple[int, int]]:
    """Cells crossed by the segment between two cell centres, edge-adjacent steps.

    When the segment passes exactly through a cell corner the horizontal step
    is taken first.
    """
    x, y = int(start[0]), int(start[1])
    x1, y1 = int(end[0]), int(end[1])
    dx, dy = abs(x1 - x), abs(y1 - y)
    sx, sy = (1 if x1 > x else -1), (1 if y1 > y else -1)
    cells = [(x, y)]
    ix = iy = 0
    while ix < dx or iy < dy:
        # compare parametric crossing times (2 ix + 1) / 2dx and (2 iy + 1) / 2dy
        if iy >= dy or (ix < dx and (2 * ix + 1) * dy <= (2 * iy + 1) * dx):
            x += sx
            ix += 1
        else:
            y += sy
            iy += 1
        cells.append((x, y))
    return cells


def cell_relays(topology: Topology, grid: RoutingGrid) -> np.ndarray:
    """Relay node of every cell: the member nearest the centre, lowest index on ties; -1 if empty."""
    k = grid.cells_per_axis
    relays = np.full(k * k, -1, dtype=np.int64)
    for c, members in grid.cells.items():
        members = np.asarray(members)
        centre = grid.cell_center(c // k, c % k)[0]
        dist = np.hypot(*(topology.positions[members] - centre).T)
        relays[c] = members[np.argmin(dist)]  # argmin returns the first minimum
    return relays


@dataclass(frozen=True, eq=False)
class Route:
    pair: tuple[int, int]
    cells: list
    nodes: list
    hop_distances: np.ndarray

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1


def route_mh(topology: Topology, grid: RoutingGrid, pair, relays: np.ndarray | None = None) -> Route:
    s, d = int(pair[0]), int(pair[1])
    if s == d:
        raise UsageError("a route needs distinct source and destination")
    if relays is None:
        relays = cell_relays(topology, grid)
    k = grid.cells_per_axis
    cells = cell_walk(grid.cell_xy[s], grid.cell_xy[d])
    nodes = [s]
    for cx, cy in cells[1:-1]:
        r = relays[cx * k + cy]
        if r < 0:
            raise RoutingError(f"no relay in cell ({cx}, {cy}) for pair ({s}, {d})")
        nodes.append(int(r))
    nodes.append(d)
    pos = topology.positions[nodes]
    hop = np.hypot(*np.diff(pos, axis=0).T)
    return Route((s, d), cells, nodes, hop)


# -- interference and SINR -----------------------------------------------------

class InterferenceTotal(NamedTuple):
    total: LogValue
    tail_bound: LogValue | None  # bound on the layers beyond max_layers


def interference_total(channel: ChannelState, P: float, max_layers: int = 50,
                       bursty: bool = True) -> InterferenceTotal:
    """Worst-case interference from ``8k`` transmitters at distance ``k``, ``k <= max_layers``."""
    if max_layers < 1:
        raise UsageError("need at least one interference layer")
    params = bursty_params(channel, P) if bursty else continuous_params(P)
    k = np.arange(1, max_layers + 1, dtype=float)
    terms = (np.log(8 * k) + params.instantaneous_power_ln - math.log(channel.c0)
             - channel.alpha * np.log(k) - k * channel.ln_a)
    total = LogValue(float(logsumexp(terms)))
    if channel.ln_a <= 0:
        # sum_k 8 k^(1-alpha) diverges for alpha <= 2
        return InterferenceTotal(total, None)
    # k^(1-alpha) <= 1, so the tail is below a geometric series
    tail = (math.log(8) + params.instantaneous_power_ln - math.log(channel.c0)
            - (max_layers + 1) * channel.ln_a - math.log(-math.expm1(-channel.ln_a)))
    return InterferenceTotal(total, LogValue(tail))


def interference_limit(channel: ChannelState, P: float, bursty: bool = True) -> LogValue:
    """Sum over all layers, summed until the geometric tail is negligible."""
    if channel.ln_a <= 0:
        raise RegimeError("interference over unbounded layers diverges unless a(f) > 1")
    layers = max(50, int(math.ceil(60.0 / channel.ln_a)) + 1)
    return interference_total(channel, P, layers, bursty).total


def sinr_ln(channel: ChannelState, instantaneous_power_ln: float, hop_distance, interference_ln):
    hop_distance = np.asarray(hop_distance, dtype=float)
    return (instantaneous_power_ln - channel.ln_attenuation(hop_distance)
            - np.logaddexp(channel.ln_noise, interference_ln))


def per_hop_sinr(channel: ChannelState, P: float, hop_distance: float,
                 interference_ln: float | LogValue, bursty: bool = True) -> float:
    """``SINR = P_inst / A(d) / (N + I)``, assembled in log domain."""
    if isinstance(interference_ln, LogValue):
        interference_ln = interference_ln.ln_value
    if not hop_distance > 0:
        raise UsageError("hop distance must be > 0")
    params = bursty_params(channel, P) if bursty else continuous_params(P)
    return float(np.exp(sinr_ln(channel, params.instantaneous_power_ln, hop_distance, interference_ln)))


def _ln_rate(duty_ln, sinr_ln_value):
    """``ln(duty * log2(1 + SINR))``."""
    return duty_ln + ln_log1p_exp(sinr_ln_value) - LN_LN2


# -- throughput ------------------------------------------------------------------

@dataclass(frozen=True)
class ThroughputReport:
    n: int
    f_khz: float
    per_pair_rate_ln: LogValue  # bits per channel use
    active_sources: int
    total_throughput_ln: LogValue
    mode: Mode
    duty_ln: float = 0.0
    duty_clamped: bool = False
    unroutable_fraction: float = 0.0
    max_hop_distance: float = math.nan
    seed: int | None = None

    @property
    def total_bits(self) -> float:
        return self.total_throughput_ln.value

    @property
    def per_pair_rate_bits(self) -> float:
        return self.per_pair_rate_ln.value


def regular_mh_analytic(n: int, channel: ChannelState, P: float, max_layers: int = 50) -> ThroughputReport:
    """``sqrt(n)`` concurrent pairs, each at ``duty * log2(1 + SINR)`` with worst-case interference."""
    params = bursty_params(channel, P)
    interf = interference_total(channel, P, max_layers, bursty=True).total
    s_ln = float(sinr_ln(channel, params.instantaneous_power_ln, 1.0, interf.ln_value))
    rate_ln = float(_ln_rate(params.duty_fraction_ln, s_ln))
    active = math.isqrt(n)
    build_regular(n)  # validates n
    return ThroughputReport(
        n=n, f_khz=channel.f_khz, per_pair_rate_ln=LogValue(rate_ln), active_sources=active,
        total_throughput_ln=LogValue(rate_ln + math.log(active)), mode=Mode.REGULAR_ANALYTIC,
        duty_ln=params.duty_fraction_ln, duty_clamped=params.clamped, max_hop_distance=1.0,
    )


def checkerboard_slot(cx, cy):
    """Two-slot schedule: edge-adjacent cells always differ."""
    return (np.asarray(cx) + np.asarray(cy)) % 2


def tdma9_slot(cx, cy):
    """Nine-slot schedule: the 3x3 block around any cell has one cell per slot."""
    return (np.asarray(cx) % 3) * 3 + np.asarray(cy) % 3


@dataclass(frozen=True, eq=False)
class MHSimulation:
    """Per-hop detail behind a simulated throughput report."""

    report: ThroughputReport
    routes: list
    hop_rate_ln: np.ndarray
    hop_tx_cell: np.ndarray
    hop_slot: np.ndarray
    cell_load: np.ndarray


def simulate_mh(topology: Topology, grid: RoutingGrid, channel: ChannelState, P: float,
                slot_of, n_slots: int, bursty: bool, mode: Mode, seed: int | None = None,
                chunk: int = 1024) -> MHSimulation:
    if topology.matching is None:
        raise UsageError("simulation needs an S-D matching")
    k = grid.cells_per_axis
    relays = cell_relays(topology, grid)
    routes, failed = [], 0
    for pair in topology.pairs():
        try:
            routes.append(route_mh(topology, grid, pair, relays))
        except RoutingError:
            failed += 1
    unroutable = failed / topology.n
    if unroutable > MAX_UNROUTABLE:
        raise RoutingError(f"{failed} of {topology.n} pairs unroutable (> {MAX_UNROUTABLE:.0%})")

    tx = np.concatenate([r.nodes[:-1] for r in routes])
    rx = np.concatenate([r.nodes[1:] for r in routes])
    dist = np.concatenate([r.hop_distances for r in routes])
    route_of = np.repeat(np.arange(len(routes)), [r.hops for r in routes])
    cxy = grid.cell_xy
    tx_cell = cxy[tx, 0] * k + cxy[tx, 1]
    slot = slot_of(cxy[tx, 0], cxy[tx, 1])

    params = bursty_params(channel, P) if bursty else continuous_params(P)
    occupied = np.flatnonzero(relays >= 0)
    occ_slot = slot_of(occupied // k, occupied % k)
    rep_pos = topology.positions[relays[occupied]]

    # interference at each distinct (receiver, transmitting cell) pair
    keys = rx * (k * k) + tx_cell
    uniq, inverse = np.unique(keys, return_inverse=True)
    u_rx, u_cell = uniq // (k * k), uniq % (k * k)
    u_slot = slot_of(u_cell // k, u_cell % k)
    interf = np.empty(len(uniq))
    for s in range(n_slots):
        act = occ_slot == s
        cells_s, pos_s = occupied[act], rep_pos[act]
        for start in range(0, int(np.count_nonzero(u_slot == s)), chunk):
            idx = np.flatnonzero(u_slot == s)[start:start + chunk]
            r = np.hypot(*(topology.positions[u_rx[idx]][:, None, :] - pos_s[None, :, :]).transpose(2, 0, 1))
            terms = params.instantaneous_power_ln - channel.ln_attenuation(np.maximum(r, 1e-9))
            terms[cells_s[None, :] == u_cell[idx][:, None]] = -np.inf
            interf[idx] = logsumexp(terms, axis=1) if terms.shape[1] else -np.inf
    s_ln = sinr_ln(channel, params.instantaneous_power_ln, dist, interf[inverse])
    hop_rate = _ln_rate(params.duty_fraction_ln - math.log(n_slots), s_ln)

    # each transmitting cell time-shares its airtime over the hops it carries
    cells_used, cell_inv = np.unique(tx_cell, return_inverse=True)
    need = np.full(len(cells_used), -np.inf)
    np.logaddexp.at(need, cell_inv, -hop_rate)
    lam_ln = float(-need.max())
    load = np.bincount(tx_cell, minlength=k * k)

    bottleneck = np.full(len(routes), np.inf)
    np.minimum.at(bottleneck, route_of, hop_rate)
    mean_bneck = float(logsumexp(bottleneck) - math.log(len(routes)))
    total_ln = lam_ln + math.log(len(routes))
    report = ThroughputReport(
        n=topology.n, f_khz=channel.f_khz, per_pair_rate_ln=LogValue(lam_ln),
        active_sources=max(1, int(round(math.exp(total_ln - mean_bneck)))),
        total_throughput_ln=LogValue(total_ln), mode=mode, duty_ln=params.duty_fraction_ln,
        duty_clamped=params.clamped, unroutable_fraction=unroutable,
        max_hop_distance=float(dist.max()), seed=seed,
    )
    return MHSimulation(report, routes, hop_rate, tx_cell, slot, load)


def regular_mh_simulated(n: int, channel: ChannelState, P: float, seed: int) -> ThroughputReport:
    """Random matching on the lattice, checkerboard half-duplex schedule, bursty power."""
    topo = build_regular(n)
    topo = topo.with_matching(sample_matching(n, seed))
    sim = simulate_mh(topo, routing_grid(topo, 1.0), channel, P, checkerboard_slot, 2,
                      bursty=True, mode=Mode.REGULAR_SIMULATED, seed=seed)
    return sim.report


def regular_mh_throughput(n: int, channel: ChannelState, P: float, seed: int | None = None):
    """Analytic report, plus a simulated one when a seed is given."""
    analytic = regular_mh_analytic(n, channel, P)
    if seed is None:
        return analytic, None
    return analytic, regular_mh_simulated(n, channel, P, seed)


def random_mh_simulation(topology: Topology, channel: ChannelState, P: float) -> MHSimulation:
    if topology.placement is not Placement.RANDOM:
        raise UsageError("random MH needs a random layout")
    if topology.matching is None:
        raise UsageError("random MH needs an S-D matching")
    return simulate_mh(topology, routing_grid(topology), channel, P, tdma9_slot, 9,
                       bursty=False, mode=Mode.RANDOM_SIMULATED, seed=topology.seed)


def random_mh_throughput(topology: Topology, channel: ChannelState, P: float) -> ThroughputReport:
    """Cells of area ~2 ln n, 9-slot TDMA, continuous transmission."""
    return random_mh_simulation(topology, channel, P).report
