"""Independent brute-force references used by the self-test and the test suite.

Nothing here calls the code it checks: Dijkstra stands in for A*, a full-grid
predicate scan plus flood fill for the frontier extractor, exhaustive
permutation search for relay paths, and fine-step ray marching for the exact
grid traversal.
"""

from __future__ import annotations

import heapq
import itertools
import math
from collections import deque

import numpy as np

UNKNOWN, FREE, OCCUPIED = 0, 1, 2


def dijkstra(traversable: np.ndarray, start, goal, resolution: float = 1.0) -> float | None:
    """Shortest 8-connected cost (straight 1, diagonal sqrt 2, no corner cutting), or None."""
    h, w = traversable.shape
    dist = {tuple(start): 0.0}
    heap = [(0.0, tuple(start))]
    done = set()
    goal = tuple(goal)
    while heap:
        d, (r, c) = heapq.heappop(heap)
        if (r, c) in done:
            continue
        done.add((r, c))
        if (r, c) == goal:
            return d * resolution
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                if dr == 0 and dc == 0:
                    continue
                nr, nc = r + dr, c + dc
                if not (0 <= nr < h and 0 <= nc < w) or not traversable[nr, nc]:
                    continue
                if dr != 0 and dc != 0 and not (traversable[r, nc] and traversable[nr, c]):
                    continue
                nd = d + (math.sqrt(2.0) if dr and dc else 1.0)
                if nd < dist.get((nr, nc), math.inf):
                    dist[(nr, nc)] = nd
                    heapq.heappush(heap, (nd, (nr, nc)))
    return None


def naive_frontier_cells(states: np.ndarray) -> set[tuple[int, int]]:
    """Every Free cell with an Unknown 8-neighbour, by scanning the whole grid."""
    h, w = states.shape
    padded = np.full((h + 2, w + 2), OCCUPIED, dtype=states.dtype)
    padded[1:-1, 1:-1] = states
    unknown_near = np.zeros((h, w), dtype=bool)
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr or dc:
                unknown_near |= padded[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] == UNKNOWN
    rows, cols = np.nonzero((states == FREE) & unknown_near)
    return set(zip(rows.tolist(), cols.tolist()))


def flood_fill_free(states: np.ndarray, seed) -> set[tuple[int, int]]:
    """Free cells 8-connected to ``seed`` through Free cells."""
    h, w = states.shape
    seen = {tuple(seed)}
    queue = deque([tuple(seed)])
    while queue:
        r, c = queue.popleft()
        for dr in (-1, 0, 1):
            for dc in (-1, 0, 1):
                n = (r + dr, c + dc)
                if n not in seen and 0 <= n[0] < h and 0 <= n[1] < w and states[n] == FREE:
                    seen.add(n)
                    queue.append(n)
    return seen


def frontier_components(cells: set) -> list[set]:
    """8-connected components of a cell set."""
    remaining = set(cells)
    comps = []
    while remaining:
        first = remaining.pop()
        comp = {first}
        queue = deque([first])
        while queue:
            r, c = queue.popleft()
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    n = (r + dr, c + dc)
                    if n in remaining:
                        remaining.discard(n)
                        comp.add(n)
                        queue.append(n)
        comps.append(comp)
    return comps


def brute_force_relay_paths(positions: dict, candidate, source_key, wifi_range: float, max_hops: int) -> list[tuple]:
    """Every ordered choice of distinct intermediates that forms a within-range chain."""
    others = [k for k in positions if k not in (candidate, source_key)]

    def close(a, b):
        pa, pb = positions[a], positions[b]
        return math.hypot(pa[0] - pb[0], pa[1] - pb[1]) <= wifi_range + 1e-9

    paths = []
    for k in range(0, max_hops + 1):
        for mids in itertools.permutations(others, k):
            chain = (candidate, *mids, source_key)
            if all(close(a, b) for a, b in zip(chain, chain[1:])):
                paths.append(chain)
    return paths


def brute_force_min_cost(paths: list[tuple], rank: dict, w_r: float, w_n: float) -> float | None:
    if not paths:
        return None
    return min(sum(w_r * rank[n] + w_n for n in p[1:-1]) for p in paths)


def march_ray(occupied: np.ndarray, resolution: float, x: float, y: float, bearing: float,
              max_range: float, step: float = 0.001) -> tuple[float, bool]:
    """Distance to the first occupied cell by fixed small steps; out of bounds counts as occupied."""
    h, w = occupied.shape
    dx, dy = math.cos(bearing), math.sin(bearing)

    def cell_at(t):
        return math.floor((y + t * dy) / resolution), math.floor((x + t * dx) / resolution)

    def blocked(rc):
        r, c = rc
        return not (0 <= r < h and 0 <= c < w) or occupied[r, c]

    n = int(max_range / step)
    prev = cell_at(0.0)
    for i in range(1, n + 1):
        t = i * step
        cur = cell_at(t)
        if cur[0] != prev[0] and cur[1] != prev[1]:
            # diagonal jump: the ray may have clipped a corner cell inside this step
            sub = 1000
            for j in range(1, sub):
                ts = t - step + j * step / sub
                if blocked(cell_at(ts)):
                    return ts, True
        if blocked(cur):
            return t, True
        prev = cur
    return max_range, False


def random_partial_grid(rng: np.random.Generator, h: int = 40, w: int = 40,
                        p_obstacle: float = 0.2, p_unknown: float = 0.3) -> tuple[np.ndarray, tuple[int, int]]:
    """Random state grid (codes UNKNOWN/FREE/OCCUPIED) plus a Free seed cell."""
    u = rng.random((h, w))
    states = np.full((h, w), FREE, dtype=np.int8)
    states[u < p_obstacle] = OCCUPIED
    # blob-shaped unknown regions read more like real partial maps than salt noise
    blobs = rng.random((h // 4 + 1, w // 4 + 1)) < p_unknown
    unknown = np.kron(blobs, np.ones((4, 4), dtype=bool))[:h, :w]
    unknown |= rng.random((h, w)) < p_unknown / 6
    states[unknown] = UNKNOWN
    free = np.argwhere(states == FREE)
    if len(free) == 0:
        states[h // 2, w // 2] = FREE
        return states, (h // 2, w // 2)
    r, c = free[rng.integers(len(free))]
    return states, (int(r), int(c))


def random_traversable(rng: np.random.Generator, h: int = 30, w: int = 30, p_obstacle: float = 0.3):
    trav = rng.random((h, w)) >= p_obstacle
    free = np.argwhere(trav)
    a = tuple(int(v) for v in free[rng.integers(len(free))])
    b = tuple(int(v) for v in free[rng.integers(len(free))])
    return trav, a, b
