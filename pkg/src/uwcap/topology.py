"""Node layouts, matchings, routing grids and the vertical cut."""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, UsageError

# width of the artificial empty slab right of the cut must stay below this
EMPTY_ZONE_LIMIT = 1.0 / (math.sqrt(7.0) * math.exp(0.25))


class Placement(str, enum.Enum):
    REGULAR = "regular"
    RANDOM = "random"
    DISPLACED = "displaced"


def _frozen(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class Topology:
    """Node positions on the square ``[0, side]^2`` plus an optional S-D matching.

    ``matching[i]`` is the destination of source ``i``.
    """

    positions: np.ndarray
    side: float
    placement: Placement
    matching: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "positions", _frozen(self.positions).reshape(-1, 2))
        object.__setattr__(self, "placement", Placement(self.placement))
        if self.matching is not None:
            m = _frozen(self.matching, dtype=np.int64)
            if m.shape != (self.n,) or not np.array_equal(np.sort(m), np.arange(self.n)):
                raise UsageError("matching must be a permutation of the node indices")
            object.__setattr__(self, "matching", m)

    @property
    def n(self) -> int:
        return len(self.positions)

    def with_matching(self, matching) -> "Topology":
        return replace(self, matching=matching)

    def pairs(self):
        if self.matching is None:
            raise UsageError("topology has no S-D matching")
        return list(zip(range(self.n), self.matching.tolist()))


def _side_of_square(n: int) -> int:
    m = math.isqrt(n)
    if n < 4 or m * m != n:
        raise ConfigError(f"regular networks need a perfect square n >= 4, got {n}")
    if m % 2:
        raise ConfigError(f"regular networks need an even side sqrt(n), got sqrt({n}) = {m}")
    return m


def build_regular(n: int) -> Topology:
    """Integer lattice ``{1..sqrt(n)}^2``, node index row-major in ``x`` then ``y``."""
    m = _side_of_square(n)
    xs, ys = np.meshgrid(np.arange(1, m + 1), np.arange(1, m + 1), indexing="ij")
    return Topology(np.column_stack([xs.ravel(), ys.ravel()]), float(m), Placement.REGULAR)


def _rng_and_seed(rng):
    if isinstance(rng, np.random.Generator):
        return rng, None
    return np.random.default_rng(rng), int(rng)


def build_random(n: int, rng) -> Topology:
    """``n`` i.i.d. uniform nodes on ``[0, sqrt(n)]^2``.

    ``rng`` is a Generator or an integer seed; an integer is recorded on the
    topology so serialised layouts stay traceable.
    """
    if n < 4:
        raise ConfigError(f"random networks need n >= 4, got {n}")
    gen, seed = _rng_and_seed(rng)
    side = math.sqrt(n)
    return Topology(gen.uniform(0.0, side, size=(n, 2)), side, Placement.RANDOM, seed=seed)


def sample_matching(n: int, rng) -> np.ndarray:
    """Uniform derangement by rejection (about ``e`` draws on average)."""
    if n < 2:
        raise ConfigError(f"a matching needs n >= 2, got {n}")
    gen, _ = _rng_and_seed(rng)
    idx = np.arange(n)
    while True:
        perm = gen.permutation(n)
        if not np.any(perm == idx):
            return perm


@dataclass(frozen=True, eq=False)
class RoutingGrid:
    """Row-major square cells of side ``cell_side`` tiling ``[0, side]^2``."""

    cell_side: float
    cells_per_axis: int
    cell_xy: np.ndarray  # (n, 2) integer cell coordinates of every node
    cells: dict = field(repr=False)  # cell index -> member node indices

    def cell_index(self, cx, cy):
        return np.asarray(cx) * self.cells_per_axis + np.asarray(cy)

    def cell_center(self, cx, cy) -> np.ndarray:
        return np.column_stack([(np.asarray(cx) + 0.5) * self.cell_side,
                                (np.asarray(cy) + 0.5) * self.cell_side])

    def occupancy(self) -> np.ndarray:
        counts = np.zeros(self.cells_per_axis ** 2, dtype=np.int64)
        for c, members in self.cells.items():
            counts[c] = len(members)
        return counts


def random_cell_side(n: int) -> float:
    """Smallest side >= sqrt(2 ln n) that tiles ``[0, sqrt(n)]`` exactly."""
    side = math.sqrt(n)
    target = math.sqrt(2.0 * math.log(n))
    k = max(1, int(side // target))
    return side / k


def routing_grid(topology: Topology, cell_side: float | None = None) -> RoutingGrid:
    """Assign every node to one cell.

    Default cell side is 1 for lattices and about ``sqrt(2 ln n)`` for random
    layouts. Points on a boundary go to the lower-index cell.
    """
    if cell_side is None:
        cell_side = 1.0 if topology.placement is Placement.REGULAR else random_cell_side(topology.n)
    if not cell_side > 0:
        raise ConfigError(f"cell side must be > 0, got {cell_side}")
    k = max(1, math.ceil(topology.side / cell_side - 1e-12))
    cxy = np.ceil(topology.positions / cell_side).astype(np.int64) - 1
    cxy = np.clip(cxy, 0, k - 1)
    cells: dict[int, list[int]] = {}
    for i, c in enumerate((cxy[:, 0] * k + cxy[:, 1]).tolist()):
        cells.setdefault(c, []).append(i)
    return RoutingGrid(float(cell_side), k, _frozen(cxy, np.int64), cells)


def max_cell_occupancy(topology: Topology, grid: RoutingGrid | None = None) -> int:
    if grid is None:
        grid = routing_grid(topology, 1.0)
    return int(grid.occupancy().max(initial=0))


class Layer(NamedTuple):
    k: int
    cell_count: int
    min_distance: int


def interference_layers(max_k: int) -> list[Layer]:
    """Square rings of cells around a receiver cell: ring ``k`` has ``8k`` cells."""
    if max_k < 1:
        raise ConfigError("need at least one interference layer")
    return [Layer(k, 8 * k, k) for k in range(1, max_k + 1)]


@dataclass(frozen=True, eq=False)
class CutInstance:
    """Sources left of a vertical centre line and destinations right of it.

    Sources sit at ``(-i_x + 1, i_y)`` and destinations at ``(k_x, k_y)`` in
    cut-relative coordinates, so the source-destination distance is
    ``hypot(i_x + k_x - 1, i_y - k_y)``.
    """

    sources: np.ndarray
    destinations: np.ndarray
    source_coords: np.ndarray  # (|S|, 2): i_x, i_y
    dest_coords: np.ndarray  # (|D|, 2): k_x, k_y
    origin_x: float  # x position of the i_x = 1 source column

    def distances(self) -> np.ndarray:
        """Matrix of distances, destinations along rows, sources along columns."""
        dx = self.dest_coords[:, 0][:, None] + self.source_coords[:, 0][None, :] - 1
        dy = self.dest_coords[:, 1][:, None] - self.source_coords[:, 1][None, :]
        return np.hypot(dx, dy)

    def source_position(self, i_x, i_y):
        return np.column_stack([self.origin_x - np.asarray(i_x) + 1, np.asarray(i_y)])


def vertical_cut(topology: Topology) -> CutInstance:
    if topology.placement is Placement.RANDOM:
        raise UsageError("random layouts must go through displace_to_vertices before cutting")
    x, y = topology.positions[:, 0], topology.positions[:, 1]
    # lattice column m/2 (regular) or the cut line itself (displaced) is i_x = 1
    origin = topology.side / 2
    left = x <= origin + 1e-9
    src = np.flatnonzero(left)
    dst = np.flatnonzero(~left)
    if len(src) == 0 or len(dst) == 0:
        raise UsageError("cut leaves one side empty")
    i_x = np.rint(origin - x[src]).astype(np.int64) + 1
    k_x = np.rint(x[dst] - origin).astype(np.int64)
    return CutInstance(
        sources=_frozen(src, np.int64),
        destinations=_frozen(dst, np.int64),
        source_coords=_frozen(np.column_stack([i_x, np.rint(y[src])]), np.int64),
        dest_coords=_frozen(np.column_stack([k_x, np.rint(y[dst])]), np.int64),
        origin_x=float(origin),
    )


def displace_to_vertices(topology: Topology, empty_zone_width: float):
    """Snap a random layout onto lattice vertices aligned with the cut.

    Left nodes move right to the nearest vertex column at or before the cut
    line; right nodes move left but never past the first column right of the
    cut. Rows snap to the nearest integer. Nodes inside the empty slab of
    width ``empty_zone_width`` just right of the cut are removed.

    Returns the displaced topology and a Counter of vertex multiplicities.
    """
    if topology.placement is not Placement.RANDOM:
        raise UsageError("displacement applies to random layouts only")
    if not 0 < empty_zone_width < EMPTY_ZONE_LIMIT:
        raise ConfigError(f"empty zone width must lie in (0, {EMPTY_ZONE_LIMIT:.4f}), "
                          f"got {empty_zone_width}")
    cut = topology.side / 2
    x, y = topology.positions[:, 0], topology.positions[:, 1]
    left = x <= cut
    in_slab = (~left) & (x < cut + empty_zone_width)
    keep = ~in_slab
    new_x = np.where(left, cut - np.floor(cut - x), cut + np.maximum(1.0, np.floor(x - cut)))
    new_y = np.clip(np.rint(y), 0.0, math.floor(topology.side))
    pos = np.column_stack([new_x, new_y])[keep]
    displaced = Topology(pos, topology.side, Placement.DISPLACED, seed=topology.seed)
    mult = Counter(map(tuple, pos.tolist()))
    return displaced, mult


# -- line-oriented text format -------------------------------------------------

def topology_to_text(topology: Topology) -> str:
    """Header line, then one ``x y`` row per node, then one ``src dst`` row per pair."""
    seed = "none" if topology.seed is None else str(topology.seed)
    lines = [f"n {topology.n} placement {topology.placement.value} seed {seed} side {topology.side!r}"]
    lines += [f"{x!r} {y!r}" for x, y in topology.positions.tolist()]
    if topology.matching is not None:
        lines += [f"{s} {d}" for s, d in topology.pairs()]
    return "\n".join(lines) + "\n"


def topology_from_text(text: str) -> Topology:
    rows = [ln for ln in text.splitlines() if ln.strip()]
    if not rows:
        raise ConfigError("empty topology file")
    head = rows[0].split()
    try:
        meta = dict(zip(head[::2], head[1::2]))
        n = int(meta["n"])
        placement = Placement(meta["placement"])
        seed = None if meta["seed"] == "none" else int(meta["seed"])
        side = float(meta["side"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"bad topology header {rows[0]!r}") from exc
    body = rows[1:]
    if len(body) not in (n, 2 * n):
        raise ConfigError(f"topology file has {len(body)} rows, expected {n} or {2 * n}")
    pos = np.array([[float(v) for v in r.split()] for r in body[:n]])
    matching = None
    if len(body) == 2 * n:
        pairs = np.array([[int(v) for v in r.split()] for r in body[n:]])
        matching = np.empty(n, dtype=np.int64)
        matching[pairs[:, 0]] = pairs[:, 1]
    return Topology(pos, side, placement, matching=matching, seed=seed)


def write_topology(topology: Topology, path) -> None:
    Path(path).write_text(topology_to_text(topology))


def read_topology(path) -> Topology:
    return topology_from_text(Path(path).read_text())
