"""Oracle suites: each pits a production routine against a brute-force reference.

A suite is a case function run over consecutive seeds; each case returns
``None`` on agreement or a JSON-serialisable dict describing the disagreement,
so a failing case can be replayed from its seed alone.
"""

from __future__ import annotations

import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import coordination, frontier, oracles, planner
from .grid import GroundTruthWorld, OccupancyGrid, make_pose
from .sensing import SensorConfig, cast_scan

FAILURE_FILE = "selftest_failures.json"


def grid_from_states(states: np.ndarray, resolution: float = 1.0) -> OccupancyGrid:
    """Saturated log-odds grid with the given oracle state codes."""
    lo = np.zeros(states.shape)
    lo[states == oracles.FREE] = -10.0
    lo[states == oracles.OCCUPIED] = 10.0
    return OccupancyGrid(states.shape[1], states.shape[0], resolution, lo)


def frontier_case(seed: int, size: int = 40) -> dict | None:
    rng = np.random.default_rng(seed)
    states, start = oracles.random_partial_grid(rng, size, size)
    found = frontier.extract_frontiers(grid_from_states(states), start, min_frontier_size=1)
    got = {tuple(c) for f in found for c in f.cells}
    want = oracles.naive_frontier_cells(states) & oracles.flood_fill_free(states, start)
    if got == want:
        return None
    return {"seed": seed, "start": list(start), "missing": sorted(map(list, want - got)),
            "extra": sorted(map(list, got - want))}


def planner_case(seed: int, size: int = 30, p_obstacle: float = 0.3) -> dict | None:
    rng = np.random.default_rng(seed)
    trav, a, b = oracles.random_traversable(rng, size, size, p_obstacle)
    nav = planner.NavGrid(size, size, 1.0, trav)
    want = oracles.dijkstra(trav, a, b)
    exact = planner.astar(nav, a, b, epsilon=1.0, tolerance=0)
    loose = planner.astar(nav, a, b, epsilon=1.5, tolerance=0)
    if want is None:
        ok = not exact and not loose
    else:
        ok = bool(exact) and abs(exact.length - want) <= 1e-9 \
            and bool(loose) and loose.length <= 1.5 * want + 1e-9
    if ok:
        return None
    return {"seed": seed, "start": list(a), "goal": list(b), "oracle": want,
            "astar": exact.length if exact else None, "weighted": loose.length if loose else None}


def relay_case(seed: int) -> dict | None:
    """Random layout of at most 7 representatives plus the source.

    Nodes fall in a long 4 x 16 strip with the source somewhere in its first
    columns, a short radio, and ranks assigned farthest first, so many
    accepted candidates need relays.
    """
    rng = np.random.default_rng(seed)
    rows, cols = 4, 16
    k = int(rng.integers(1, 8))
    src_cell = (int(rng.integers(0, rows)), int(rng.integers(0, 3)))
    flat = rng.choice(rows * cols, size=k + 1, replace=False)
    reps = [c for c in (tuple(int(v) for v in divmod(int(i), cols)) for i in flat) if c != src_cell][:k]
    # farthest first: the top-ranked candidates are the ones that need relays
    reps.sort(key=lambda c: (-((c[0] - src_cell[0]) ** 2 + (c[1] - src_cell[1]) ** 2), c))
    source = make_pose(src_cell[1] + 0.5, src_cell[0] + 0.5)
    flist = frontier.FrontierList(tuple(frontier.Frontier((r,), r) for r in reps))
    wifi = float(rng.uniform(2.0, 6.0))
    remaining = int(rng.integers(1, 7))
    weights = coordination.ChoiceWeights(float(rng.integers(0, 4)), float(rng.integers(1, 4)))
    nav = planner.NavGrid(cols, rows, 1.0, np.ones((rows, cols), dtype=bool))
    res = coordination.choose_frontier(flist, coordination.PassDownPath(), source, remaining, wifi,
                                       weights, nav, source)

    positions = {"S": (source.x, source.y)}
    positions.update({r: (r[1] + 0.5, r[0] + 0.5) for r in reps})
    rank = {r: i for i, r in enumerate(reps)}
    want_cand, want_cost = None, None
    for r in reps:
        paths = oracles.brute_force_relay_paths(positions, r, "S", wifi, remaining)
        if paths:
            want_cand, want_cost = r, oracles.brute_force_min_cost(paths, rank, weights.w_r, weights.w_n)
            break
    got_primary = res.mode == coordination.Mode.PRIMARY
    got_cand = (int(res.chosen.y), int(res.chosen.x)) if got_primary else None
    if want_cand is None and not got_primary:
        return None
    if got_primary and got_cand == want_cand and abs(res.cost - want_cost) <= 1e-9:
        return None
    return {"seed": seed, "oracle_candidate": want_cand and list(want_cand), "oracle_cost": want_cost,
            "mode": res.mode.value, "candidate": got_cand and list(got_cand), "cost": res.cost}


def sensing_case(seed: int, beams: int = 24) -> dict | None:
    """Exact traversal ranges agree with 1 mm ray marching to within the step."""
    rng = np.random.default_rng(seed)
    occ = rng.random((16, 16)) < 0.15
    free = np.argwhere(~occ)
    r, c = free[rng.integers(len(free))]
    res = 0.25
    x = (c + rng.uniform(0.05, 0.95)) * res
    y = (r + rng.uniform(0.05, 0.95)) * res
    world = GroundTruthWorld(res, occ)
    cfg = SensorConfig(num_beams=beams, max_range=2.0)
    scan = cast_scan(world, make_pose(x, y, float(rng.uniform(-math.pi, math.pi))), cfg)
    for beam in scan.ranges:
        want, hit = oracles.march_ray(occ, res, x, y, beam.bearing, cfg.max_range)
        if abs(beam.range - want) > 0.0015 or (hit != beam.hit and abs(want - cfg.max_range) > 0.0015):
            return {"seed": seed, "bearing": beam.bearing, "range": beam.range, "oracle": want,
                    "hit": beam.hit, "oracle_hit": hit}
    return None


SUITES = {
    "fireline.planner": (planner_case, 100),
    "fireline.frontier": (frontier_case, 200),
    "fireline.coordination": (relay_case, 100),
    "fireline.sensing": (sensing_case, 50),
}


@dataclass
class SuiteResult:
    module: str
    passed: int = 0
    failures: list = field(default_factory=list)


def run_suites(seed: int = 0) -> list[SuiteResult]:
    results = []
    for module, (case, count) in SUITES.items():
        result = SuiteResult(module)
        for i in range(count):
            try:
                failure = case(seed + i)
            except Exception as exc:  # a crash is a failure of that module, not of the harness
                failure = {"seed": seed + i, "error": f"{type(exc).__name__}: {exc}"}
            if failure is None:
                result.passed += 1
            else:
                result.failures.append(failure)
        results.append(result)
    return results


def main(out_dir=None, stream=None) -> int:
    stream = stream or sys.stdout
    results = run_suites()
    for r in results:
        status = "ok" if not r.failures else "FAIL"
        print(f"{r.module}: {r.passed} passed, {len(r.failures)} failed [{status}]", file=stream)
    failed = [r for r in results if r.failures]
    if not failed:
        return 0
    dump = {r.module: r.failures for r in failed}
    text = json.dumps(dump, indent=2, sort_keys=True)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / FAILURE_FILE).write_text(text + "\n")
    for r in failed:
        print(f"selftest failed in {r.module}; first case: {json.dumps(r.failures[0], sort_keys=True)}",
              file=sys.stderr)
    return 1
