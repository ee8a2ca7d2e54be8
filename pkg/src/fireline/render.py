"""Static per-iteration images rebuilt from a trace log and its map snapshots.

Each iteration yields an image set: the merged map as a PGM and an RGB
overlay (PPM) showing frontier cells, representatives, relay chains, robots
and the source. One pixel per grid cell, row 0 first, same as the map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import GridGeometry, read_pnm, world_to_grid

SNAPSHOT_DIR = "snapshots"

# map greys are the PGM values; overlay colours are reserved and never produced by the map
PALETTE = {
    "occupied": (0, 0, 0),
    "free": (254, 254, 254),
    "unknown": (205, 205, 205),
    "frontier": (255, 0, 0),
    "representative": (0, 160, 0),
    "relay": (255, 0, 255),
    "robot": (0, 0, 255),
    "source": (255, 160, 0),
}


class RenderError(ValueError):
    pass


def snapshot_name(iteration: int) -> str:
    return f"iter_{iteration:04d}.pgm"


@dataclass
class IterationView:
    iteration: int
    robots: dict = field(default_factory=dict)   # robot id -> (x, y) at iteration start
    frontier_cells: list = field(default_factory=list)
    representatives: list = field(default_factory=list)
    chains: list = field(default_factory=list)   # each a list of (x, y), chosen pose first, source last


def parse_trace(text: str) -> tuple[tuple[float, float] | None, list[IterationView]]:
    """Source pose plus one view per iteration that logged its frontiers."""
    source = None
    poses: dict = {}
    views: dict[int, IterationView] = {}
    reverted: set = set()
    pending: dict = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t", 4)
        if len(parts) != 5:
            raise RenderError(f"trace line {lineno}: expected 5 tab-separated fields")
        it, _tick, robot, kind, body = parts
        it = int(it)
        payload = json.loads(body)
        if kind == "source":
            source = tuple(payload["pose"])
        elif kind == "spawn":
            poses[robot] = tuple(payload["pose"])
        elif kind == "frontiers":
            views[it] = IterationView(
                it, dict(poses),
                [tuple(c) for comp in payload["cells"] for c in comp],
                [tuple(r) for r in payload["reps"]],
            )
            reverted = set()
            pending = {}
        elif kind == "choice":
            if payload["mode"] in ("Primary", "Backup"):
                pending[robot] = [tuple(payload["chosen"]), *(tuple(p) for p in payload["chain"])]
        elif kind == "revert":
            reverted.add(robot)
        elif kind == "complete":
            poses[robot] = tuple(payload["pose"])
        elif kind == "iteration_end" and it in views:
            views[it].chains = [pts + [source] for r, pts in sorted(pending.items()) if r not in reverted]
    return source, [views[k] for k in sorted(views)]


def bresenham(a: tuple[int, int], b: tuple[int, int]) -> list[tuple[int, int]]:
    """Cells on the digital line between two (row, col) cells, endpoints included."""
    (r0, c0), (r1, c1) = a, b
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr, sc = (1 if r1 >= r0 else -1), (1 if c1 >= c0 else -1)
    err = dc - dr
    out = []
    while True:
        out.append((r0, c0))
        if (r0, c0) == (r1, c1):
            return out
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c0 += sc
        if e2 < dc:
            err += dc
            r0 += sr


def render_overlay(map_pixels: np.ndarray, resolution: float, view: IterationView, source) -> np.ndarray:
    h, w = map_pixels.shape
    geometry = GridGeometry(w, h, resolution)
    img = np.repeat(map_pixels[:, :, None], 3, axis=2).copy()

    def cell(p):
        return tuple(world_to_grid(geometry, p))

    def paint(cells, colour):
        for r, c in cells:
            if 0 <= r < h and 0 <= c < w:
                img[r, c] = colour

    for chain in view.chains:
        for a, b in zip(chain, chain[1:]):
            paint(bresenham(cell(a), cell(b)), PALETTE["relay"])
    paint(view.frontier_cells, PALETTE["frontier"])
    paint(view.representatives, PALETTE["representative"])
    if source is not None:
        paint([cell(source)], PALETTE["source"])
    paint([cell(p) for p in view.robots.values()], PALETTE["robot"])
    return img


def ppm_bytes(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    return f"P6\n{w} {h}\n255\n".encode() + img.astype(np.uint8).tobytes()


def render_trace(trace_path, out_dir) -> list[Path]:
    """Write ``iter_NNNN.pgm`` and ``iter_NNNN.ppm`` per iteration; returns the written paths."""
    trace_path = Path(trace_path)
    if not trace_path.is_file():
        raise FileNotFoundError(str(trace_path))
    source, views = parse_trace(trace_path.read_text())
    snap_dir = trace_path.parent / SNAPSHOT_DIR
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for view in views:
        snap = snap_dir / snapshot_name(view.iteration)
        if not snap.is_file():
            raise FileNotFoundError(str(snap))
        data = snap.read_bytes()
        magic, pixels, comments = read_pnm(data)
        resolution = next((float(c.split()[1]) for c in comments if c.startswith("resolution")), None)
        if magic != "P5" or resolution is None:
            raise RenderError(f"{snap}: not a map snapshot")
        stem = out_dir / f"iter_{view.iteration:04d}"
        stem.with_suffix(".pgm").write_bytes(data)
        stem.with_suffix(".ppm").write_bytes(ppm_bytes(render_overlay(pixels, resolution, view, source)))
        written += [stem.with_suffix(".pgm"), stem.with_suffix(".ppm")]
    return written
