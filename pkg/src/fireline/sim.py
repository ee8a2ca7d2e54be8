"""Discrete-time simulation of the exploration loop.

Each iteration: every robot scans, the central computer merges the local maps
and extracts frontiers, robots choose goals one after another in rank order,
then all robots drive to their goals in synchronous ticks (sensing after
every tick) and report completion back up the hierarchy.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import yaml

from .coordination import ChoiceResult, ChoiceWeights, Mode, PassDownPath, choose_frontier
from .frontier import FrontierError, FrontierList, extract_frontiers
from .grid import (
    GridIndex,
    GroundTruthWorld,
    OccupancyGrid,
    Pose,
    WorldFormatError,
    completion_percentage,
    grid_to_world,
    load_world,
    merge_maps,
    to_pgm_bytes,
    world_to_grid,
)
from .planner import NavGrid, PathResult, astar, inflate
from .sensing import SensorConfig, apply_delta, cast_scan, scan_delta

logger = logging.getLogger(__name__)

REPLAN_ATTEMPTS = 3
CSV_HEADER = "Number of Robots,Number of Iterations,Map Completion Percentage,Simulated WiFi Range"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    world_file: str
    num_robots: int = 1
    wifi_range: float = 3.0
    sensor: SensorConfig = field(default_factory=SensorConfig)
    weights: ChoiceWeights = field(default_factory=ChoiceWeights)
    min_frontier_size: int = 5
    robot_radius: float = 0.1
    max_iterations: int = 50
    seed: int = 0
    motion_budget: int = 1
    source: tuple[int, int] | None = None
    epsilon: float = 1.0

    def __post_init__(self):
        if self.num_robots < 1:
            raise ConfigError("num_robots must be >= 1")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not self.wifi_range > 0:
            raise ConfigError("wifi_range must be positive")
        if self.motion_budget < 1:
            raise ConfigError("motion_budget must be >= 1")
        if self.min_frontier_size < 1:
            raise ConfigError("min_frontier_size must be >= 1")

    def to_dict(self) -> dict:
        return {
            "world_file": str(self.world_file),
            "num_robots": self.num_robots,
            "wifi_range": self.wifi_range,
            "sensor": {
                "num_beams": self.sensor.num_beams,
                "fov": self.sensor.fov,
                "max_range": self.sensor.max_range,
                "hit_log_odds": self.sensor.hit_log_odds,
                "miss_log_odds": self.sensor.miss_log_odds,
                "range_noise_std": self.sensor.range_noise_std,
            },
            "weights": {"w_r": self.weights.w_r, "w_n": self.weights.w_n},
            "min_frontier_size": self.min_frontier_size,
            "robot_radius": self.robot_radius,
            "max_iterations": self.max_iterations,
            "seed": self.seed,
            "motion_budget": self.motion_budget,
            "source": list(self.source) if self.source is not None else None,
            "epsilon": self.epsilon,
        }


_CONFIG_KEYS = set(SimConfig.__dataclass_fields__)


def config_from_dict(data: dict, base_dir: Path | None = None) -> SimConfig:
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")
    if "world_file" not in data:
        raise ConfigError("config is missing world_file")
    kwargs = dict(data)
    world = Path(kwargs["world_file"])
    if base_dir is not None and not world.is_absolute():
        world = base_dir / world
    kwargs["world_file"] = str(world)
    try:
        if "sensor" in kwargs:
            kwargs["sensor"] = SensorConfig(**(kwargs["sensor"] or {}))
        if "weights" in kwargs:
            kwargs["weights"] = ChoiceWeights(**(kwargs["weights"] or {}))
        if kwargs.get("source") is not None:
            kwargs["source"] = tuple(int(v) for v in kwargs["source"])
        return SimConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> SimConfig:
    """Read a YAML config; a relative ``world_file`` resolves against the config's directory."""
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return config_from_dict(data, path.parent)


def read_world(config: SimConfig) -> GroundTruthWorld:
    path = Path(config.world_file)
    try:
        text = path.read_text()
    except OSError:
        raise ConfigError(f"cannot read world file {path}") from None
    try:
        return load_world(text)
    except WorldFormatError as exc:
        raise ConfigError(f"{path}: {exc}") from None


# ---------------------------------------------------------------- records


@dataclass
class RobotState:
    id: int
    rank: int
    pose: Pose
    start_pose: Pose
    local_map: OccupancyGrid
    current_path: PathResult | None = None
    goal: Pose | None = None
    done: bool = True


@dataclass(frozen=True)
class RobotTrace:
    robot: int
    mode: str
    chosen: tuple[float, float]
    chain: tuple[tuple[float, float], ...]
    cost: float | None
    arrived: bool
    final: tuple[float, float]


@dataclass(frozen=True)
class IterationTrace:
    iteration: int
    robots: tuple[RobotTrace, ...]
    frontiers_available: int
    completion_pct: float
    connectivity_ok: bool
    known_cells: int
    ticks: int


@dataclass(frozen=True)
class ExperimentRecord:
    num_robots: int
    wifi_range: float
    iterations: int
    completion_pct: float

    def csv_row(self) -> str:
        return f"{self.num_robots},{self.iterations},{self.completion_pct:.2f},{self.wifi_range:g}m"


@dataclass
class ExperimentResult:
    record: ExperimentRecord
    traces: list[IterationTrace]
    log: list[str]
    merged: OccupancyGrid
    snapshots: list[bytes] = field(default_factory=list)


def write_results_csv(records: Sequence[ExperimentRecord], path) -> None:
    Path(path).write_text(CSV_HEADER + "\n" + "".join(r.csv_row() + "\n" for r in records))


def relay_chain_valid(robot_goal, pass_down_chain: Sequence, source, wifi_range: float, tolerance: float = 0.0) -> bool:
    """Every consecutive hop of goal -> chain... -> source is within radio range."""
    points = [robot_goal, *pass_down_chain, source]
    limit = wifi_range + tolerance + 1e-9
    return all(math.hypot(a[0] - b[0], a[1] - b[1]) <= limit for a, b in zip(points, points[1:]))


# ---------------------------------------------------------------- sensing cache

_DELTA_CACHES: dict = {}


class ScanCache:
    """Per-cell scan deltas for one world and sensor; sensing is noise-free so they are reusable."""

    def __init__(self, world: GroundTruthWorld, sensor: SensorConfig):
        self.world = world
        self.sensor = sensor
        self._deltas: dict = {}

    @classmethod
    def shared(cls, world: GroundTruthWorld, sensor: SensorConfig) -> "ScanCache":
        key = (world.to_text(), sensor)
        cache = _DELTA_CACHES.get(key)
        if cache is None:
            cache = _DELTA_CACHES[key] = cls(world, sensor)
        return cache

    def delta(self, pose: Pose) -> np.ndarray:
        key = (pose.x, pose.y, pose.theta)
        d = self._deltas.get(key)
        if d is None:
            scan = cast_scan(self.world, pose, self.sensor)
            d = self._deltas[key] = scan_delta(self.world.geometry, scan, self.sensor)
        return d


# ---------------------------------------------------------------- simulation


def _xy(p) -> tuple[float, float]:
    return (float(p[0]), float(p[1]))


class Simulation:
    """One team exploring one world. Single-threaded and deterministic."""

    def __init__(self, config: SimConfig, world: GroundTruthWorld, reference: OccupancyGrid | None = None,
                 render: bool = False, tick_hook: Callable | None = None):
        self.config = config
        self.world = world
        self.geometry = world.geometry
        self.reference = reference
        self.render = render
        self.tick_hook = tick_hook
        self.iteration = 0
        self.log: list[str] = []
        self.snapshots: list[bytes] = []
        self.rng = np.random.default_rng(config.seed)
        self.scans = ScanCache.shared(world, config.sensor) if config.sensor.range_noise_std == 0 else None
        self.tick_budget = 4 * (world.width + world.height)

        source_cell, spawn = spawn_layout(world, config.num_robots, config.source)
        self.source = grid_to_world(self.geometry, source_cell)
        self.source_cell = source_cell
        self.robots = []
        for i, cell in enumerate(spawn):
            pose = grid_to_world(self.geometry, cell)
            self.robots.append(RobotState(i, i, pose, pose, OccupancyGrid.like(self.geometry)))
        self._emit(0, "-", "source", {"pose": _xy(self.source)})
        for r in self.robots:
            self._emit(0, r.id, "spawn", {"pose": _xy(r.pose)})

    # -- helpers

    def _emit(self, tick, robot, kind: str, payload: dict) -> None:
        body = json.dumps(payload, separators=(",", ":"), sort_keys=True)
        self.log.append(f"{self.iteration}\t{tick}\t{robot}\t{kind}\t{body}")

    def cell(self, pose) -> GridIndex:
        return world_to_grid(self.geometry, pose)

    def sense(self, robot: RobotState) -> None:
        if self.scans is not None:
            apply_delta(robot.local_map, self.scans.delta(robot.pose))
        else:
            scan = cast_scan(self.world, robot.pose, self.config.sensor, self.rng)
            apply_delta(robot.local_map, scan_delta(self.geometry, scan, self.config.sensor))

    def merged_map(self) -> OccupancyGrid:
        return merge_maps([r.local_map for r in self.robots])

    # -- the loop

    def run_iteration(self) -> IterationTrace:
        cfg = self.config
        self.iteration += 1
        n = len(self.robots)
        robots = sorted(self.robots, key=lambda r: r.rank)

        for r in robots:
            self.sense(r)
        merged = self.merged_map()
        if self.render:
            self.snapshots.append(to_pgm_bytes(merged))
        known_before = merged.known_count()

        try:
            frontiers = extract_frontiers(merged, self.cell(robots[0].pose), cfg.min_frontier_size)
        except FrontierError:
            frontiers = FrontierList()
        self._emit(0, "-", "frontiers", {
            "reps": [list(f.representative) for f in frontiers],
            "sizes": [f.size for f in frontiers],
            "cells": [[list(c) for c in f.cells] for f in frontiers],
        })
        nav = inflate(merged, cfg.robot_radius)

        # sequential choice down the hierarchy
        choices: list[ChoiceResult] = []
        chain_origin: list[Mode] = []
        reserved = [self.cell(r.start_pose) for r in robots]
        flist = frontiers
        pass_down = PassDownPath()
        origin = Mode.DEFAULT
        for r in robots:
            res = choose_frontier(
                flist, pass_down, self.source, n - 1 - r.rank, cfg.wifi_range, cfg.weights, nav,
                r.start_pose, reserved=reserved + [self.cell(c.chosen) for c in choices],
            )
            if res.mode != Mode.PASS_DOWN:
                origin = res.mode
            choices.append(res)
            chain_origin.append(origin)
            flist = res.updated_frontiers
            pass_down = res.pass_down
            self._emit(0, r.id, "choice", {
                "mode": res.mode.value,
                "chosen": _xy(res.chosen),
                "chain": [_xy(p) for p in res.pass_down.poses],
                "cost": res.cost,
                "relay_ranks": list(res.relay_ranks),
            })

        modes = [c.mode for c in choices]
        goals = [c.chosen for c in choices]
        # robot i relies on robots i+1 .. i+len(pass_down) sitting at its relay poses
        depends = [list(range(i + 1, i + 1 + len(c.pass_down))) for i, c in enumerate(choices)]

        paths: list[PathResult | None] = [None] * n
        for i, r in enumerate(robots):
            if modes[i] == Mode.DEFAULT:
                continue
            path = astar(nav, self.cell(r.pose), self.cell(goals[i]), cfg.epsilon, tolerance=0)
            if path:
                paths[i] = path
            else:
                modes[i] = Mode.DEFAULT
                self._emit(0, r.id, "revert", {"reason": "no path", "goal": _xy(goals[i])})
        changed = True
        while changed:
            changed = False
            for i in range(n):
                if modes[i] != Mode.DEFAULT and any(modes[j] == Mode.DEFAULT for j in depends[i]):
                    modes[i] = Mode.DEFAULT
                    changed = True
                    self._emit(0, robots[i].id, "revert", {"reason": "relay lost", "goal": _xy(goals[i])})
        for i, r in enumerate(robots):
            if modes[i] == Mode.DEFAULT:
                goals[i] = r.start_pose
                paths[i] = astar(nav, self.cell(r.pose), self.cell(r.start_pose), 1.0, tolerance=0)
                if not paths[i]:
                    goals[i] = r.pose
                    paths[i] = PathResult((self.cell(r.pose),), 0.0)
            r.goal = goals[i]
            r.current_path = paths[i]
            r.done = False

        ticks = self._drive(robots, nav)

        merged = self.merged_map()
        connectivity_ok = True
        robot_traces = []
        for i, r in enumerate(robots):
            arrived = self.cell(r.pose) == self.cell(goals[i])
            chain = [robots[j].pose for j in depends[i]] if modes[i] != Mode.DEFAULT else []
            if modes[i] != Mode.DEFAULT:
                tol = self.geometry.resolution * math.sqrt(2.0) if chain_origin[i] == Mode.BACKUP else 0.0
                ok = arrived and relay_chain_valid(r.pose, chain, self.source, cfg.wifi_range, tol)
                connectivity_ok = connectivity_ok and ok
            robot_traces.append(RobotTrace(
                r.id, modes[i].value, _xy(goals[i]), tuple(_xy(p) for p in choices[i].pass_down.poses),
                choices[i].cost, arrived, _xy(r.pose),
            ))
        for r in reversed(robots):
            self._emit(ticks, r.id, "complete", {"pose": _xy(r.pose)})
        pct = completion_percentage(merged, self.reference) if self.reference is not None else float("nan")
        known = merged.known_count()
        trace = IterationTrace(self.iteration, tuple(robot_traces), len(frontiers), pct, connectivity_ok, known, ticks)
        self._emit(ticks, "-", "iteration_end", {
            "completion_pct": None if math.isnan(pct) else pct,
            "connectivity_ok": connectivity_ok,
            "frontiers": len(frontiers),
            "known_cells": known,
            "known_before": known_before,
        })
        return trace

    def _drive(self, robots: list[RobotState], nav: NavGrid) -> int:
        """Advance all robots along their paths; returns ticks used."""
        progress = {r.id: 0 for r in robots}
        occupied = {self.cell(r.pose): r.id for r in robots}
        tick = 0
        while tick < self.tick_budget and not all(r.done for r in robots):
            tick += 1
            for r in robots:
                if r.done:
                    continue
                for _ in range(self.config.motion_budget):
                    cells = r.current_path.cells
                    k = progress[r.id]
                    if k >= len(cells) - 1:
                        break
                    nxt = cells[k + 1]
                    if nxt in occupied and occupied[nxt] != r.id:
                        new_path = self._replan(r, nav, occupied, nxt, tick)
                        if new_path is None:
                            self._emit(tick, r.id, "wait", {"blocked": list(nxt)})
                            break
                        r.current_path = new_path
                        progress[r.id] = 0
                        cells, k = new_path.cells, 0
                        nxt = cells[1]
                    del occupied[cells[k]]
                    occupied[nxt] = r.id
                    progress[r.id] = k + 1
                    r.pose = grid_to_world(self.geometry, nxt)
                    self._emit(tick, r.id, "move", {"cell": list(nxt)})
                if progress[r.id] >= len(r.current_path.cells) - 1:
                    r.done = True
                    self._emit(tick, r.id, "arrive", {"pose": _xy(r.pose)})
            for r in robots:
                self.sense(r)
            if self.tick_hook is not None:
                self.tick_hook(self, tick)
        return tick

    def _replan(self, robot: RobotState, nav: NavGrid, occupied: dict, blocker, tick: int = 0) -> PathResult | None:
        """Plan around the blocking robot's cell; None after REPLAN_ATTEMPTS failures."""
        start = self.cell(robot.pose)
        goal = self.cell(robot.goal)
        blocked = {blocker}
        for attempt in range(REPLAN_ATTEMPTS):
            path = astar(nav.with_blocked(blocked), start, goal, self.config.epsilon, tolerance=0)
            if not path or len(path.cells) < 2:
                return None
            nxt = path.cells[1]
            if nxt not in occupied or occupied[nxt] == robot.id:
                self._emit(tick, robot.id, "replan", {"attempt": attempt + 1, "length": path.length})
                return path
            blocked.add(nxt)
        return None


def spawn_layout(world: GroundTruthWorld, num_robots: int, source: tuple[int, int] | None):
    """Source cell and robot spawn cells: a column beside the source, rows 0, +1, -1, +2, ... from it."""
    free = ~world.occupied
    if source is None:
        rows, cols = np.nonzero(free)
        if rows.size == 0:
            raise ConfigError("world has no free cells")
        source = (int(rows[0]), int(cols[0]))
    sr, sc = source
    if not world.geometry.in_bounds((sr, sc)) or world.occupied[sr, sc]:
        raise ConfigError(f"source cell {source} is not free")
    offsets = [0]
    for k in range(1, num_robots + 1):
        offsets += [k, -k]
    for dc in (1, -1):
        cells = []
        for dr in offsets:
            cell = (sr + dr, sc + dc)
            if world.geometry.in_bounds(cell) and not world.occupied[cell]:
                cells.append(GridIndex(*cell))
            if len(cells) == num_robots:
                return GridIndex(sr, sc), cells
    raise ConfigError(f"no room to spawn {num_robots} robots beside source {source}")


# ---------------------------------------------------------------- experiments

_REFERENCES: dict = {}
REFERENCE_MAX_ITERATIONS = 400
# iterations in a row without a newly known cell before a run is declared stuck;
# the loop is deterministic, so an unobservable pocket would otherwise pin a robot forever
STALL_ITERATIONS = 3


class _Progress:
    """Termination bookkeeping shared by experiment and reference runs."""

    def __init__(self, known: int):
        self.known = known
        self.idle = 0

    def finished(self, trace: IterationTrace) -> bool:
        if trace.frontiers_available == 0:
            return True
        gained = trace.known_cells != self.known
        self.known = trace.known_cells
        self.idle = 0 if gained else self.idle + 1
        all_default = all(rt.mode == Mode.DEFAULT.value for rt in trace.robots)
        return (all_default and not gained) or self.idle >= STALL_ITERATIONS


def reference_map(config: SimConfig, world: GroundTruthWorld | None = None) -> OccupancyGrid:
    """Completed map: one robot, unlimited radio range, run until no frontier remains or it stops learning."""
    world = world or read_world(config)
    key = (world.to_text(), config.sensor, config.min_frontier_size, config.robot_radius, config.source,
           config.weights, config.epsilon)
    ref = _REFERENCES.get(key)
    if ref is None:
        ref_cfg = replace(config, num_robots=1, wifi_range=math.inf, max_iterations=REFERENCE_MAX_ITERATIONS)
        sim = Simulation(ref_cfg, world)
        progress = _Progress(sim.merged_map().known_count())
        for _ in range(REFERENCE_MAX_ITERATIONS):
            if progress.finished(sim.run_iteration()):
                break
        else:
            logger.warning("reference run hit the iteration cap with frontiers left")
        ref = _REFERENCES[key] = sim.merged_map()
    return ref.copy()


def run_experiment(config: SimConfig, render: bool = False, tick_hook: Callable | None = None) -> ExperimentResult:
    """Iterate until no frontier remains, the team stops learning, or max_iterations.

    The team has stopped learning when an all-Default iteration adds no known
    cell, or when STALL_ITERATIONS iterations in a row add none.
    """
    world = read_world(config)
    reference = reference_map(config, world)
    sim = Simulation(config, world, reference, render=render, tick_hook=tick_hook)
    traces: list[IterationTrace] = []
    progress = _Progress(sim.merged_map().known_count())
    for _ in range(config.max_iterations):
        trace = sim.run_iteration()
        traces.append(trace)
        if progress.finished(trace):
            break
    merged = sim.merged_map()
    pct = round(completion_percentage(merged, reference), 10)
    record = ExperimentRecord(config.num_robots, config.wifi_range, len(traces), pct)
    return ExperimentResult(record, traces, sim.log, merged, sim.snapshots)


def _run_record(config: SimConfig) -> ExperimentResult:
    return run_experiment(config)


def run_sweep(template: SimConfig, robots: Sequence[int], ranges: Sequence[float], workers: int = 1) -> list[ExperimentResult]:
    """Cartesian sweep, robot count outer and WiFi range inner."""
    if not robots or not ranges:
        raise ConfigError("robots and ranges must be non-empty")
    configs = [replace(template, num_robots=int(n), wifi_range=float(w)) for n in robots for w in ranges]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(_run_record, configs))
    return [run_experiment(c) for c in configs]
