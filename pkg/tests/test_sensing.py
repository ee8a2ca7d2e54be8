import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fireline import oracles
from fireline.grid import GroundTruthWorld, OccupancyGrid, make_pose
from fireline.sensing import SensingError, SensorConfig, apply_scan, cast_scan, traverse

ONE_BEAM = SensorConfig(num_beams=1, fov=0.1, max_range=5.0)


def wall_world():
    """3 x 12 strip at 0.5 m with a wall in column 7 (x in [3.5, 4.0))."""
    occ = np.zeros((3, 12), dtype=bool)
    occ[:, 7] = True
    return GroundTruthWorld(0.5, occ)


def test_beam_hits_wall_ahead():
    scan = cast_scan(wall_world(), make_pose(0.5, 0.75), ONE_BEAM)
    (beam,) = scan.ranges
    assert beam.range == pytest.approx(3.0)
    assert beam.hit


def test_beam_in_empty_world_reaches_max_range():
    world = GroundTruthWorld(0.5, np.zeros((3, 40), dtype=bool))
    (beam,) = cast_scan(world, make_pose(0.5, 0.75), ONE_BEAM).ranges
    assert (beam.range, beam.hit) == (5.0, False)


def test_world_edge_is_a_wall():
    world = GroundTruthWorld(1.0, np.zeros((1, 3), dtype=bool))
    (beam,) = cast_scan(world, make_pose(0.5, 0.5), ONE_BEAM).ranges
    assert beam.range == pytest.approx(2.5) and beam.hit


def test_pose_inside_obstacle_rejected():
    with pytest.raises(SensingError):
        cast_scan(wall_world(), make_pose(3.75, 0.75), ONE_BEAM)


def test_walled_room_matches_ray_marching():
    occ = np.zeros((11, 11), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    world = GroundTruthWorld(1.0, occ)
    cfg = SensorConfig(num_beams=8, max_range=10.0)
    scan = cast_scan(world, make_pose(5.5, 5.5), cfg)
    for beam in scan.ranges:
        want, hit = oracles.march_ray(occ, 1.0, 5.5, 5.5, beam.bearing, cfg.max_range)
        assert hit and beam.hit
        assert abs(beam.range - want) <= 0.5


def test_update_along_wall_beam():
    cfg = SensorConfig(num_beams=1, fov=0.1, max_range=5.0, hit_log_odds=0.85, miss_log_odds=-0.4)
    scan = cast_scan(wall_world(), make_pose(0.5, 0.75), cfg)
    grid = apply_scan(OccupancyGrid(12, 3, 0.5), scan, cfg)
    assert grid.log_odds[1, 1:7].tolist() == pytest.approx([-0.4] * 6)
    assert grid.log_odds[1, 7] == pytest.approx(0.85)
    touched = np.count_nonzero(grid.log_odds)
    assert touched == 7


def test_update_twice_doubles():
    cfg = SensorConfig(num_beams=90)
    world = wall_world()
    scan = cast_scan(world, make_pose(1.3, 0.8), cfg)
    once = apply_scan(OccupancyGrid(12, 3, 0.5), scan, cfg)
    twice = apply_scan(once, scan, cfg)
    below = np.abs(2 * once.log_odds) < 10.0
    assert below.sum() > 10
    assert np.allclose(twice.log_odds[below], 2 * once.log_odds[below])


def test_zero_beams_leaves_grid():
    cfg = SensorConfig(num_beams=0)
    grid = OccupancyGrid(12, 3, 0.5)
    scan = cast_scan(wall_world(), make_pose(1.3, 0.8), cfg)
    assert np.array_equal(apply_scan(grid, scan, cfg).log_odds, grid.log_odds)


def test_scan_is_deterministic():
    cfg = SensorConfig(num_beams=45)
    a = cast_scan(wall_world(), make_pose(1.3, 0.8, 0.2), cfg)
    b = cast_scan(wall_world(), make_pose(1.3, 0.8, 0.2), cfg)
    assert a == b


def test_scan_csv():
    scan = cast_scan(wall_world(), make_pose(0.5, 0.75), ONE_BEAM)
    lines = scan.to_csv().splitlines()
    assert lines[0] == "bearing,range,hit"
    assert len(lines) == 2


def test_traverse_visits_adjacent_cells():
    cells = []
    for r, c, t in traverse(0.3, 0.7, 0.9, 1.0):
        cells.append((r, c))
        if t > 6:
            break
    for (r0, c0), (r1, c1) in zip(cells, cells[1:]):
        assert abs(r0 - r1) + abs(c0 - c1) == 1


@given(st.integers(0, 10_000))
def test_locality(seed):
    rng = np.random.default_rng(seed)
    occ = rng.random((20, 20)) < 0.1
    free = np.argwhere(~occ)
    r, c = free[rng.integers(len(free))]
    res = 0.25
    x, y = (c + rng.random()) * res, (r + rng.random()) * res
    cfg = SensorConfig(num_beams=int(rng.integers(1, 60)), max_range=float(rng.uniform(0.3, 2.0)))
    scan = cast_scan(GroundTruthWorld(res, occ), make_pose(x, y, rng.uniform(-3, 3)), cfg)
    grid = apply_scan(OccupancyGrid(20, 20, res), scan, cfg)
    rows, cols = np.nonzero(grid.log_odds)
    limit = cfg.max_range + res * math.sqrt(2)
    for rr, cc in zip(rows, cols):
        assert math.hypot((cc + 0.5) * res - x, (rr + 0.5) * res - y) <= limit


@given(st.integers(1, 12))
def test_repeated_observation_converges(k):
    cfg = SensorConfig(num_beams=1, fov=0.1, max_range=5.0)
    scan = cast_scan(wall_world(), make_pose(0.5, 0.75), cfg)
    grid = OccupancyGrid(12, 3, 0.5)
    for _ in range(k):
        grid = apply_scan(grid, scan, cfg)
    assert grid.log_odds[1, 7] == pytest.approx(min(10.0, k * 0.85))


def test_noise_free_map_agrees_with_truth():
    occ = np.zeros((12, 12), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    occ[4:7, 5] = True
    world = GroundTruthWorld(0.5, occ)
    cfg = SensorConfig()
    grid = OccupancyGrid(12, 12, 0.5)
    for x, y in [(1.2, 1.2), (4.6, 4.4), (1.1, 4.9)]:
        grid = apply_scan(grid, cast_scan(world, make_pose(x, y), cfg), cfg)
    states = grid.states()
    assert not np.any((states == 2) & ~occ)
