"""Grid navigation: obstacle inflation and (weighted) A* over 8-connected cells."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .grid import CellState, GridGeometry, GridIndex, OccupancyGrid

SQRT2 = math.sqrt(2.0)

# (drow, dcol, step cost); orthogonal moves first
MOVES = (
    (-1, 0, 1.0), (0, -1, 1.0), (0, 1, 1.0), (1, 0, 1.0),
    (-1, -1, SQRT2), (-1, 1, SQRT2), (1, -1, SQRT2), (1, 1, SQRT2),
)


@dataclass(frozen=True, eq=False)
class NavGrid:
    width: int
    height: int
    resolution: float
    traversable: np.ndarray

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.width, self.height, self.resolution)

    def is_traversable(self, idx) -> bool:
        r, c = idx
        return 0 <= r < self.height and 0 <= c < self.width and bool(self.traversable[r, c])

    def with_blocked(self, cells: Iterable[tuple[int, int]]) -> "NavGrid":
        """Copy with ``cells`` made non-traversable."""
        trav = self.traversable.copy()
        for r, c in cells:
            if 0 <= r < self.height and 0 <= c < self.width:
                trav[r, c] = False
        return NavGrid(self.width, self.height, self.resolution, trav)


@dataclass(frozen=True)
class PathResult:
    cells: tuple[GridIndex, ...] = ()
    length: float = 0.0

    def __bool__(self) -> bool:
        return bool(self.cells)

    def to_csv(self) -> str:
        return "row,col\n" + "".join(f"{r},{c}\n" for r, c in self.cells)


EMPTY_PATH = PathResult()


def inflate(grid: OccupancyGrid, robot_radius: float) -> NavGrid:
    """Traversable cells are Free and farther than ``robot_radius`` from every Occupied cell."""
    if robot_radius < 0:
        raise ValueError("robot_radius must be non-negative")
    states = grid.states()
    occupied = states == CellState.OCCUPIED
    blocked = states != CellState.FREE
    h, w = occupied.shape
    # offsets at or beyond the grid size cannot connect any two cells
    reach = min(int(math.floor(robot_radius / grid.resolution + 1e-9)), max(h, w) - 1)
    if reach > 0 and occupied.any():
        r2 = (robot_radius / grid.resolution) ** 2 + 1e-9
        for dr in range(-reach, reach + 1):
            for dc in range(-reach, reach + 1):
                if (dr or dc) and dr * dr + dc * dc <= r2 and abs(dr) < h and abs(dc) < w:
                    src = occupied[max(0, -dr):h - max(0, dr), max(0, -dc):w - max(0, dc)]
                    blocked[max(0, dr):h - max(0, -dr), max(0, dc):w - max(0, -dc)] |= src
    return NavGrid(grid.width, grid.height, grid.resolution, ~blocked)


def octile(a, b) -> float:
    dr = abs(a[0] - b[0])
    dc = abs(a[1] - b[1])
    return max(dr, dc) + (SQRT2 - 1.0) * min(dr, dc)


def astar(nav: NavGrid, start, goal, epsilon: float = 1.0, tolerance: int = 1) -> PathResult:
    """Weighted A* (f = g + epsilon * h) with the octile heuristic.

    Stops at the first expanded cell within Chebyshev distance ``tolerance``
    of ``goal``. Diagonal moves need both orthogonal neighbours traversable.
    Equal f is broken by larger g, then by row-major index. Returns an empty
    PathResult when nothing within tolerance is reachable.
    """
    if epsilon < 1.0:
        raise ValueError("epsilon must be >= 1")
    if tolerance < 0:
        raise ValueError("tolerance must be >= 0")
    h, w = nav.height, nav.width
    sr, sc = start
    gr, gc = goal
    if not (0 <= sr < h and 0 <= sc < w):
        raise ValueError(f"start {tuple(start)} out of bounds")
    trav = nav.traversable.ravel().tolist()
    s = sr * w + sc
    g_score = {s: 0.0}
    parent = {s: -1}
    closed = set()
    heap = [(epsilon * octile(start, goal), -0.0, s)]
    found = -1
    while heap:
        _, neg_g, cur = heapq.heappop(heap)
        if cur in closed:
            continue
        closed.add(cur)
        r, c = divmod(cur, w)
        if abs(r - gr) <= tolerance and abs(c - gc) <= tolerance:
            found = cur
            break
        g = -neg_g
        for dr, dc, cost in MOVES:
            nr, nc = r + dr, c + dc
            if not (0 <= nr < h and 0 <= nc < w):
                continue
            n = nr * w + nc
            if not trav[n] or n in closed:
                continue
            if dr and dc and not (trav[r * w + nc] and trav[nr * w + c]):
                continue
            tentative = g + cost
            if tentative < g_score.get(n, math.inf):
                g_score[n] = tentative
                parent[n] = cur
                dh = abs(nr - gr)
                dw = abs(nc - gc)
                hval = max(dh, dw) + (SQRT2 - 1.0) * min(dh, dw)
                heapq.heappush(heap, (tentative + epsilon * hval, -tentative, n))
    if found < 0:
        return EMPTY_PATH
    cells = []
    node = found
    while node >= 0:
        cells.append(GridIndex(*divmod(node, w)))
        node = parent[node]
    cells.reverse()
    return PathResult(tuple(cells), g_score[found] * nav.resolution)


def shortest_path_distance(nav: NavGrid, a, b) -> float | None:
    """Obstacle-aware distance in meters, or None when ``b`` is unreachable."""
    path = astar(nav, a, b, epsilon=1.0, tolerance=0)
    return path.length if path else None


def path_length(cells, resolution: float) -> float:
    total = 0.0
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        total += SQRT2 if (r0 != r1 and c0 != c1) else 1.0
    return total * resolution


def point_at_arc_length(cells, resolution: float, s: float) -> tuple[float, float]:
    """Grid-unit (row, col) coordinates of the point at arc length ``s`` meters along a cell path."""
    if not cells:
        raise ValueError("empty path")
    remaining = s / resolution
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        seg = SQRT2 if (r0 != r1 and c0 != c1) else 1.0
        if remaining <= seg:
            f = remaining / seg
            return r0 + f * (r1 - r0), c0 + f * (c1 - c0)
        remaining -= seg
    r, c = cells[-1]
    return float(r), float(c)
