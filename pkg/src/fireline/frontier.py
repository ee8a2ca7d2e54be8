"""Wavefront frontier extraction with a double breadth-first search."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from .grid import CellState, GridIndex, OccupancyGrid, Pose, grid_to_world

NEIGHBORS8 = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


class FrontierError(ValueError):
    pass


@dataclass(frozen=True)
class Frontier:
    cells: tuple[GridIndex, ...]
    representative: GridIndex

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class FrontierList:
    """Frontiers ordered by size, largest first; a frontier's rank is its index."""

    frontiers: tuple[Frontier, ...] = ()

    def __len__(self) -> int:
        return len(self.frontiers)

    def __iter__(self):
        return iter(self.frontiers)

    def __getitem__(self, i) -> Frontier:
        return self.frontiers[i]

    def representatives(self) -> list[GridIndex]:
        return [f.representative for f in self.frontiers]

    def rank_of(self, cell) -> int | None:
        cell = tuple(cell)
        for i, f in enumerate(self.frontiers):
            if f.representative == cell:
                return i
        return None

    def without(self, cells) -> "FrontierList":
        """Copy with every frontier whose representative is in ``cells`` erased."""
        drop = {tuple(c) for c in cells}
        return FrontierList(tuple(f for f in self.frontiers if f.representative not in drop))


def _is_frontier(states, row: int, col: int) -> bool:
    if states[row][col] != CellState.FREE:
        return False
    h, w = len(states), len(states[0])
    for dr, dc in NEIGHBORS8:
        r, c = row + dr, col + dc
        if 0 <= r < h and 0 <= c < w and states[r][c] == CellState.UNKNOWN:
            return True
    return False


def is_frontier_cell(grid: OccupancyGrid, idx) -> bool:
    """A Free cell with at least one Unknown 8-neighbour."""
    if not grid.geometry.in_bounds(idx):
        raise IndexError(f"{tuple(idx)} outside grid")
    return _is_frontier(grid.states().tolist(), idx[0], idx[1])


def representative_cell(cells) -> GridIndex:
    """Component cell nearest the component's mean; ties go to row-major order."""
    n = len(cells)
    mr = sum(r for r, _ in cells) / n
    mc = sum(c for _, c in cells) / n
    return min(cells, key=lambda rc: ((rc[0] - mr) ** 2 + (rc[1] - mc) ** 2, rc[0], rc[1]))


def extract_frontiers(grid: OccupancyGrid, robot_cell, min_frontier_size: int = 5) -> FrontierList:
    """Frontier components reachable from ``robot_cell`` through known-free space.

    The outer search floods known-free cells from the robot; every frontier
    cell it reaches seeds an inner search that gathers the 8-connected
    frontier component. Components smaller than ``min_frontier_size`` are
    dropped.
    """
    states = grid.states().tolist()
    h, w = grid.height, grid.width
    r0, c0 = robot_cell
    if not (0 <= r0 < h and 0 <= c0 < w) or states[r0][c0] != CellState.FREE:
        raise FrontierError(f"robot cell {tuple(robot_cell)} is not known-free")

    map_open = [[False] * w for _ in range(h)]
    map_closed = [[False] * w for _ in range(h)]
    frontier_open = [[False] * w for _ in range(h)]
    frontier_closed = [[False] * w for _ in range(h)]

    found: list[tuple[GridIndex, ...]] = []
    map_queue = deque([(r0, c0)])
    map_open[r0][c0] = True
    while map_queue:
        rm, cm = map_queue.popleft()
        if map_closed[rm][cm]:
            continue
        if _is_frontier(states, rm, cm):
            frontier_queue = deque([(rm, cm)])
            new_frontier = []
            frontier_open[rm][cm] = True
            while frontier_queue:
                rf, cf = frontier_queue.popleft()
                if map_closed[rf][cf] or frontier_closed[rf][cf]:
                    continue
                if _is_frontier(states, rf, cf):
                    new_frontier.append(GridIndex(rf, cf))
                    for dr, dc in NEIGHBORS8:
                        r, c = rf + dr, cf + dc
                        if 0 <= r < h and 0 <= c < w and not (
                            frontier_open[r][c] or frontier_closed[r][c] or map_closed[r][c]
                        ):
                            frontier_queue.append((r, c))
                            frontier_open[r][c] = True
                frontier_closed[rf][cf] = True
            if new_frontier and len(new_frontier) >= min_frontier_size:
                found.append(tuple(new_frontier))
        for dr, dc in NEIGHBORS8:
            r, c = rm + dr, cm + dc
            if 0 <= r < h and 0 <= c < w and not (map_open[r][c] or map_closed[r][c]) \
                    and states[r][c] == CellState.FREE:
                map_queue.append((r, c))
                map_open[r][c] = True
        map_closed[rm][cm] = True

    frontiers = [Frontier(cells, representative_cell(cells)) for cells in found]
    frontiers.sort(key=lambda f: (-f.size, f.representative))
    return FrontierList(tuple(frontiers))


def frontier_pose(frontier: Frontier, geometry) -> Pose:
    return grid_to_world(geometry, frontier.representative)


def frontier_cells(frontiers: FrontierList) -> set[GridIndex]:
    return {c for f in frontiers for c in f.cells}

