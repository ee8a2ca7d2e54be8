"""Relay-constrained hierarchical frontier choice and the backup fireline.

A robot either takes the first pose of the pass-down path handed to it by the
robot above, or picks the highest-ranked frontier that can reach the WiFi
source through other frontier representatives (at most one per robot still
below it in the hierarchy). When no frontier qualifies, the backup choice
strings robots along an obstacle-aware path back to the source. Failing
that, the robot returns to its start pose.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .frontier import FrontierList
from .grid import GridIndex, Pose, grid_to_world, world_to_grid
from .planner import NavGrid, astar, point_at_arc_length

SOURCE = "source"
HOP_CAP = 8
RANGE_EPS = 1e-9


class CostError(ValueError):
    pass


class Mode(str, Enum):
    PASS_DOWN = "PassDown"
    PRIMARY = "Primary"
    BACKUP = "Backup"
    DEFAULT = "Default"


@dataclass(frozen=True)
class ChoiceWeights:
    w_r: float = 1.0
    w_n: float = 1.0

    def __post_init__(self):
        if self.w_r < 0 or self.w_n < 0 or (self.w_r == 0 and self.w_n == 0):
            raise ValueError("weights must be non-negative and not both zero")


@dataclass(frozen=True)
class PassDownPath:
    poses: tuple[Pose, ...] = ()

    def __len__(self) -> int:
        return len(self.poses)

    def __bool__(self) -> bool:
        return bool(self.poses)


@dataclass(frozen=True)
class ChoiceResult:
    chosen: Pose
    updated_frontiers: FrontierList
    pass_down: PassDownPath
    mode: Mode
    cost: float | None = None
    relay_ranks: tuple[int, ...] = ()


@dataclass
class RelayGraph:
    """Source plus frontier representatives, linked when within radio range."""

    positions: dict = field(default_factory=dict)
    adjacency: dict = field(default_factory=dict)
    wifi_range: float = 0.0

    @property
    def nodes(self) -> list:
        return list(self.positions)

    def has_edge(self, a, b) -> bool:
        return b in self.adjacency.get(a, ())


def build_relay_graph(frontiers: FrontierList, source: Pose, wifi_range: float, geometry) -> RelayGraph:
    """Obstacle-blind radio graph; an edge exists when Euclidean distance <= ``wifi_range``."""
    if not wifi_range > 0:
        raise ValueError("wifi_range must be positive")
    positions = {SOURCE: (source.x, source.y)}
    for f in frontiers:
        p = grid_to_world(geometry, f.representative)
        positions[f.representative] = (p.x, p.y)
    nodes = list(positions)
    adjacency = {n: [] for n in nodes}
    for i, a in enumerate(nodes):
        pa = positions[a]
        for b in nodes[i + 1:]:
            pb = positions[b]
            if math.hypot(pa[0] - pb[0], pa[1] - pb[1]) <= wifi_range + RANGE_EPS:
                adjacency[a].append(b)
                adjacency[b].append(a)
    return RelayGraph(positions, adjacency, wifi_range)


def enumerate_relay_paths(graph: RelayGraph, candidate, max_hops: int) -> list[tuple]:
    """All simple paths candidate -> ... -> source with at most ``max_hops`` intermediate nodes."""
    if candidate not in graph.adjacency or candidate == SOURCE:
        return []
    limit = min(max(max_hops, 0), HOP_CAP)
    paths: list[tuple] = []
    stack = [candidate]
    on_path = {candidate}

    def dfs(node):
        for nxt in graph.adjacency[node]:
            if nxt == SOURCE:
                paths.append(tuple(stack) + (SOURCE,))
            elif nxt not in on_path and len(stack) - 1 < limit:
                stack.append(nxt)
                on_path.add(nxt)
                dfs(nxt)
                on_path.discard(nxt)
                stack.pop()

    dfs(candidate)
    return paths


def path_cost(path: Sequence, frontiers: FrontierList, weights: ChoiceWeights) -> float:
    """g = sum over relay nodes of (w_r * rank + w_n); endpoints are not relays."""
    total = 0.0
    for node in path[1:-1]:
        rank = frontiers.rank_of(node) if node != SOURCE else None
        if rank is None:
            raise CostError(f"relay node {node!r} has no rank in the frontier list")
        total += weights.w_r * rank + weights.w_n
    return total


def _path_key(path, frontiers: FrontierList, weights: ChoiceWeights):
    ranks = tuple(frontiers.rank_of(n) for n in path[1:-1])
    return path_cost(path, frontiers, weights), len(ranks), ranks


def best_relay_path(paths: list[tuple], frontiers: FrontierList, weights: ChoiceWeights) -> tuple:
    """Minimum g; ties prefer fewer relays, then the lexicographically smaller rank sequence."""
    return min(paths, key=lambda p: _path_key(p, frontiers, weights))


def choose_frontier(
    frontiers: FrontierList,
    pass_down_in: PassDownPath,
    source: Pose,
    robots_remaining: int,
    wifi_range: float,
    weights: ChoiceWeights,
    nav: NavGrid,
    start: Pose,
    reserved: Sequence = (),
) -> ChoiceResult:
    geometry = nav.geometry
    if pass_down_in:
        chosen = pass_down_in.poses[0]
        cell = world_to_grid(geometry, chosen)
        return ChoiceResult(
            chosen, frontiers.without([cell]), PassDownPath(pass_down_in.poses[1:]), Mode.PASS_DOWN,
        )

    graph = build_relay_graph(frontiers, source, wifi_range, geometry)
    for frontier in frontiers:
        paths = enumerate_relay_paths(graph, frontier.representative, robots_remaining)
        if not paths:
            continue
        best = best_relay_path(paths, frontiers, weights)
        relays = best[1:-1]
        return ChoiceResult(
            chosen=grid_to_world(geometry, frontier.representative),
            updated_frontiers=frontiers.without((frontier.representative,) + relays),
            pass_down=PassDownPath(tuple(grid_to_world(geometry, r) for r in relays)),
            mode=Mode.PRIMARY,
            cost=path_cost(best, frontiers, weights),
            relay_ranks=tuple(frontiers.rank_of(r) for r in relays),
        )
    # the fireline is the chooser plus the robots below it
    source_cell = world_to_grid(geometry, source)
    return backup_choice(frontiers, nav, source_cell, robots_remaining + 1, wifi_range, start, reserved)


def relay_count(distance: float, wifi_range: float) -> int:
    return max(0, math.ceil(distance / wifi_range - 1e-12) - 1)


def _snap(nav: NavGrid, point: tuple[float, float], taken: set) -> GridIndex | None:
    """Nearest traversable, untaken cell to a fractional (row, col) point."""
    pr, pc = point
    best = None
    radius = 1
    limit = max(nav.width, nav.height)
    while radius <= limit:
        r_lo, r_hi = max(0, math.floor(pr) - radius), min(nav.height - 1, math.ceil(pr) + radius)
        c_lo, c_hi = max(0, math.floor(pc) - radius), min(nav.width - 1, math.ceil(pc) + radius)
        for r in range(r_lo, r_hi + 1):
            for c in range(c_lo, c_hi + 1):
                if nav.traversable[r, c] and (r, c) not in taken:
                    key = ((r - pr) ** 2 + (c - pc) ** 2, r, c)
                    if best is None or key < best:
                        best = key
        # any cell outside the searched box is farther than `radius` away
        if best is not None and best[0] <= radius * radius:
            return GridIndex(best[1], best[2])
        radius *= 2
    return GridIndex(best[1], best[2]) if best else None


def backup_choice(
    frontiers: FrontierList,
    nav: NavGrid,
    source_cell,
    robots_remaining: int,
    wifi_range: float,
    start: Pose,
    reserved: Sequence = (),
) -> ChoiceResult:
    """Fireline choice: first frontier whose path to the source is shorter than robots_remaining * wifi_range.

    ``robots_remaining`` counts every robot available to the fireline,
    the chooser included; ``k`` relays split the path into k + 1 hops.
    """
    geometry = nav.geometry
    bound = robots_remaining * wifi_range
    for frontier in frontiers:
        if bound <= 0:
            break
        path = astar(nav, frontier.representative, source_cell, epsilon=1.0, tolerance=0)
        if not path or not path.length < bound:
            continue
        distance = path.length
        k = relay_count(distance, wifi_range)
        taken = {tuple(c) for c in reserved}
        taken.add(frontier.representative)
        relays = []
        for j in range(1, k + 1):
            point = point_at_arc_length(path.cells, geometry.resolution, j * distance / (k + 1))
            cell = _snap(nav, point, taken)
            if cell is None:
                break
            taken.add(cell)
            relays.append(cell)
        if len(relays) != k:
            continue
        return ChoiceResult(
            chosen=grid_to_world(geometry, frontier.representative),
            updated_frontiers=frontiers.without([frontier.representative]),
            pass_down=PassDownPath(tuple(grid_to_world(geometry, c) for c in relays)),
            mode=Mode.BACKUP,
            cost=distance,
        )
    return ChoiceResult(start, frontiers, PassDownPath(), Mode.DEFAULT)
