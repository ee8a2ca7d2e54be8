"""Simulated range sensing and the inverse-sensor-model occupancy update."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .grid import BoundsError, GroundTruthWorld, OccupancyGrid, Pose, world_to_grid


class SensingError(ValueError):
    pass


@dataclass(frozen=True)
class SensorConfig:
    num_beams: int = 360
    fov: float = 2.0 * math.pi
    max_range: float = 3.5
    hit_log_odds: float = 0.85
    miss_log_odds: float = -0.4
    range_noise_std: float = 0.0

    def __post_init__(self):
        if self.num_beams < 0:
            raise ValueError("num_beams must be non-negative")
        if not (0.0 < self.fov <= 2.0 * math.pi + 1e-12):
            raise ValueError("fov must lie in (0, 2*pi]")
        if not self.max_range > 0:
            raise ValueError("max_range must be positive")
        if not (self.hit_log_odds > 0 > self.miss_log_odds):
            raise ValueError("need hit_log_odds > 0 > miss_log_odds")

    def bearings(self, theta: float) -> list[float]:
        n = self.num_beams
        step = self.fov / n if n else 0.0
        return [theta - self.fov / 2.0 + (i + 0.5) * step for i in range(n)]


class Beam(NamedTuple):
    bearing: float
    range: float
    hit: bool


@dataclass(frozen=True)
class Scan:
    origin: Pose
    ranges: tuple[Beam, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["bearing", "range", "hit"])
        for b in self.ranges:
            w.writerow([repr(b.bearing), repr(b.range), int(b.hit)])
        return buf.getvalue()


def traverse(x0: float, y0: float, bearing: float, resolution: float) -> Iterator[tuple[int, int, float]]:
    """Yield (row, col, t_enter) for every cell a ray crosses, origin cell first (t=0).

    Exact cell stepping: the ray leaves each cell through the nearer boundary.
    Exact corner crossings step along x first. The iterator is unbounded;
    callers stop it.
    """
    dx, dy = math.cos(bearing), math.sin(bearing)
    col = math.floor(x0 / resolution)
    row = math.floor(y0 / resolution)
    if dx > 0:
        step_c, t_max_x, t_dx = 1, ((col + 1) * resolution - x0) / dx, resolution / dx
    elif dx < 0:
        step_c, t_max_x, t_dx = -1, (col * resolution - x0) / dx, -resolution / dx
    else:
        step_c, t_max_x, t_dx = 0, math.inf, math.inf
    if dy > 0:
        step_r, t_max_y, t_dy = 1, ((row + 1) * resolution - y0) / dy, resolution / dy
    elif dy < 0:
        step_r, t_max_y, t_dy = -1, (row * resolution - y0) / dy, -resolution / dy
    else:
        step_r, t_max_y, t_dy = 0, math.inf, math.inf
    t = 0.0
    while True:
        yield row, col, t
        if t_max_x <= t_max_y:
            t = t_max_x
            col += step_c
            t_max_x += t_dx
        else:
            t = t_max_y
            row += step_r
            t_max_y += t_dy


def _cast_beam(is_occupied: Callable[[int, int], bool], x0, y0, bearing, resolution, max_range) -> Beam:
    for row, col, t in traverse(x0, y0, bearing, resolution):
        if t > max_range:
            return Beam(bearing, max_range, False)
        if t > 0.0 and is_occupied(row, col):
            return Beam(bearing, t, True)


def cast_scan(world: GroundTruthWorld, pose: Pose, config: SensorConfig, rng: np.random.Generator | None = None) -> Scan:
    """Noise-free range scan from ``pose``; the world boundary counts as a wall.

    Gaussian range noise is applied only when ``config.range_noise_std > 0``
    and an ``rng`` is supplied.
    """
    try:
        cell = world_to_grid(world.geometry, pose)
    except BoundsError as exc:
        raise SensingError(str(exc)) from None
    if world.occupied[cell]:
        raise SensingError(f"pose ({pose.x:.3f}, {pose.y:.3f}) lies inside an obstacle at {tuple(cell)}")
    beams = []
    for bearing in config.bearings(pose.theta):
        beam = _cast_beam(world.is_occupied, pose.x, pose.y, bearing, world.resolution, config.max_range)
        if config.range_noise_std > 0 and rng is not None and beam.hit:
            r = float(np.clip(beam.range + rng.normal(0.0, config.range_noise_std), 1e-6, config.max_range))
            beam = Beam(beam.bearing, r, r < config.max_range)
        beams.append(beam)
    return Scan(pose, tuple(beams))


def beam_cells(geometry, origin: Pose, beam: Beam) -> tuple[list[tuple[int, int]], tuple[int, int] | None]:
    """Cells a beam passes through before its endpoint, and the endpoint cell if it hit.

    Cells outside the grid truncate the beam.
    """
    rel = 1e-9 * max(1.0, beam.range)
    between: list[tuple[int, int]] = []
    for row, col, t in traverse(origin.x, origin.y, beam.bearing, geometry.resolution):
        if not geometry.in_bounds((row, col)):
            return between, None
        if t >= beam.range - rel:
            if beam.hit and t <= beam.range + rel:
                return between, (row, col)
            return between, None
        between.append((row, col))


def scan_delta(geometry, scan: Scan, config: SensorConfig) -> np.ndarray:
    """Additive log-odds change a scan contributes, before clamping."""
    n = geometry.width * geometry.height
    miss: list[int] = []
    hit: list[int] = []
    w = geometry.width
    for beam in scan.ranges:
        between, end = beam_cells(geometry, scan.origin, beam)
        miss.extend(r * w + c for r, c in between)
        if end is not None:
            hit.append(end[0] * w + end[1])
    delta = np.bincount(np.asarray(miss, dtype=np.intp), minlength=n) * config.miss_log_odds
    delta = delta + np.bincount(np.asarray(hit, dtype=np.intp), minlength=n) * config.hit_log_odds
    return delta.reshape(geometry.height, geometry.width)


def apply_delta(grid: OccupancyGrid, delta: np.ndarray) -> None:
    grid.log_odds += delta
    np.clip(grid.log_odds, grid.l_min, grid.l_max, out=grid.log_odds)
    grid.touch()


def apply_scan(grid: OccupancyGrid, scan: Scan, config: SensorConfig, inplace: bool = False) -> OccupancyGrid:
    """Log-odds update: misses along each beam, a hit at its endpoint, clamp once per scan."""
    world_to_grid(grid.geometry, scan.origin)
    out = grid if inplace else grid.copy()
    if scan.ranges:
        apply_delta(out, scan_delta(out.geometry, scan, config))
    return out
