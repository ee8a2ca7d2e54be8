"""World and map representations, coordinate transforms, merging and the completion metric."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

L_MIN = -10.0
L_MAX = 10.0

PGM_OCCUPIED = 0
PGM_FREE = 254
PGM_UNKNOWN = 205


class WorldFormatError(ValueError):
    """Raised when a world file cannot be parsed."""


class BoundsError(ValueError):
    """Raised when a pose or index falls outside the grid."""


class MergeError(ValueError):
    """Raised when grids with different geometry are merged."""


class MetricError(ValueError):
    """Raised when the completion metric is undefined."""


class CellState(IntEnum):
    UNKNOWN = 0
    FREE = 1
    OCCUPIED = 2


class GridIndex(NamedTuple):
    row: int
    col: int


class Pose(NamedTuple):
    x: float
    y: float
    theta: float = 0.0


def normalize_angle(theta: float) -> float:
    """Wrap an angle into [-pi, pi)."""
    return (theta + math.pi) % (2.0 * math.pi) - math.pi


def make_pose(x: float, y: float, theta: float = 0.0) -> Pose:
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(theta)):
        raise ValueError(f"non-finite pose ({x}, {y}, {theta})")
    return Pose(float(x), float(y), normalize_angle(float(theta)))


@dataclass(frozen=True)
class GridGeometry:
    width: int
    height: int
    resolution: float

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")

    def in_bounds(self, idx: tuple[int, int]) -> bool:
        return 0 <= idx[0] < self.height and 0 <= idx[1] < self.width


def world_to_grid(geometry, pose) -> GridIndex:
    """Index of the cell containing ``pose``; cell (0, 0) has its corner at the origin."""
    res = geometry.resolution
    if not (0.0 <= pose[0] < geometry.width * res and 0.0 <= pose[1] < geometry.height * res):
        raise BoundsError(f"pose ({pose[0]:.3f}, {pose[1]:.3f}) outside grid bounds")
    col = min(int(math.floor(pose[0] / res)), geometry.width - 1)
    row = min(int(math.floor(pose[1] / res)), geometry.height - 1)
    return GridIndex(row, col)


def grid_to_world(geometry, idx) -> Pose:
    """Center of cell ``idx`` in world coordinates."""
    if not (0 <= idx[0] < geometry.height and 0 <= idx[1] < geometry.width):
        raise BoundsError(f"index {tuple(idx)} outside {geometry.height}x{geometry.width} grid")
    res = geometry.resolution
    return Pose((idx[1] + 0.5) * res, (idx[0] + 0.5) * res, 0.0)


@dataclass(frozen=True, eq=False)
class GroundTruthWorld:
    """Immutable obstacle map used by the sensor simulator.

    ``occupied`` is a (height, width) boolean array. Cells outside the array
    count as occupied.
    """

    resolution: float
    occupied: np.ndarray

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool)
        if occ.ndim != 2 or occ.shape[0] < 1 or occ.shape[1] < 1:
            raise ValueError("occupied must be a non-empty 2-D array")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.width, self.height, self.resolution)

    def is_occupied(self, row: int, col: int) -> bool:
        if 0 <= row < self.height and 0 <= col < self.width:
            return bool(self.occupied[row, col])
        return True

    def to_text(self) -> str:
        lines = [f"resolution {self.resolution!r}"]
        lines += ["".join("#" if v else "." for v in row) for row in self.occupied]
        return "\n".join(lines) + "\n"


def load_world(text: str) -> GroundTruthWorld:
    """Parse world-file content.

    The first non-empty line is ``resolution <float>``; the remaining lines form
    a rectangular block of ``#`` (occupied) and ``.`` (free). Row 0 is the first
    grid line.
    """
    lines = text.splitlines()
    start = 0
    while start < len(lines) and not lines[start].strip():
        start += 1
    if start == len(lines):
        raise WorldFormatError("line 1, column 1: empty world file")
    header = lines[start].split()
    if len(header) != 2 or header[0] != "resolution":
        raise WorldFormatError(f"line {start + 1}, column 1: expected 'resolution <float>' header")
    try:
        resolution = float(header[1])
    except ValueError:
        raise WorldFormatError(
            f"line {start + 1}, column {lines[start].index(header[1]) + 1}: invalid resolution {header[1]!r}"
        ) from None
    if not (math.isfinite(resolution) and resolution > 0):
        raise WorldFormatError(f"line {start + 1}, column 1: resolution must be positive, got {resolution}")

    rows = []
    width = None
    for lineno, raw in enumerate(lines[start + 1:], start=start + 2):
        line = raw.rstrip("\r\n").rstrip()
        if not line:
            if rows:
                # trailing blank lines end the block; anything after is an error
                rest = [(n, l) for n, l in enumerate(lines[lineno - 1:], start=lineno) if l.strip()]
                if rest:
                    raise WorldFormatError(f"line {rest[0][0]}, column 1: content after blank line")
                break
            continue
        for col, ch in enumerate(line):
            if ch not in "#.":
                raise WorldFormatError(f"line {lineno}, column {col + 1}: unknown character {ch!r}")
        if width is None:
            width = len(line)
        elif len(line) != width:
            raise WorldFormatError(
                f"line {lineno}, column {min(len(line), width) + 1}: ragged row (length {len(line)}, expected {width})"
            )
        rows.append([ch == "#" for ch in line])
    if not rows:
        raise WorldFormatError(f"line {start + 2}, column 1: no grid rows")
    return GroundTruthWorld(resolution, np.array(rows, dtype=bool))


def load_world_file(path) -> GroundTruthWorld:
    return load_world(Path(path).read_text())


def log_odds_to_prob(log_odds):
    return 1.0 - 1.0 / (1.0 + np.exp(log_odds))


def prob_to_log_odds(p: float) -> float:
    return math.log(p / (1.0 - p))


@dataclass(eq=False)
class OccupancyGrid:
    """Per-cell log-odds occupancy belief. Single writer; copy before sharing."""

    width: int
    height: int
    resolution: float
    log_odds: np.ndarray = None
    prior_log_odds: float = 0.0
    occ_threshold: float = 0.65
    free_threshold: float = 0.35
    l_min: float = L_MIN
    l_max: float = L_MAX
    _state_cache: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        GridGeometry(self.width, self.height, self.resolution)
        if not (0.0 < self.free_threshold < 0.5 < self.occ_threshold < 1.0):
            raise ValueError("thresholds must satisfy 0 < free < 0.5 < occ < 1")
        if self.log_odds is None:
            self.log_odds = np.full((self.height, self.width), self.prior_log_odds, dtype=float)
        else:
            self.log_odds = np.array(self.log_odds, dtype=float)
            if self.log_odds.shape != (self.height, self.width):
                raise ValueError(f"log_odds shape {self.log_odds.shape} != {(self.height, self.width)}")
        np.clip(self.log_odds, self.l_min, self.l_max, out=self.log_odds)

    @classmethod
    def like(cls, geometry, **kwargs) -> "OccupancyGrid":
        return cls(geometry.width, geometry.height, geometry.resolution, **kwargs)

    @property
    def geometry(self) -> GridGeometry:
        return GridGeometry(self.width, self.height, self.resolution)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(
            self.width, self.height, self.resolution, self.log_odds.copy(), self.prior_log_odds,
            self.occ_threshold, self.free_threshold, self.l_min, self.l_max,
        )

    def same_geometry(self, other: "OccupancyGrid") -> bool:
        return (self.width, self.height, self.resolution) == (other.width, other.height, other.resolution)

    def touch(self) -> None:
        """Invalidate cached cell states after writing to ``log_odds``."""
        self._state_cache = None

    def states(self) -> np.ndarray:
        """CellState codes as a (height, width) int8 array."""
        if self._state_cache is None:
            p = log_odds_to_prob(self.log_odds)
            st = np.full(self.log_odds.shape, CellState.UNKNOWN, dtype=np.int8)
            st[p > self.occ_threshold] = CellState.OCCUPIED
            st[p < self.free_threshold] = CellState.FREE
            self._state_cache = st
        return self._state_cache

    def state(self, row: int, col: int) -> CellState:
        return CellState(int(self.states()[row, col]))

    def known_mask(self) -> np.ndarray:
        return self.states() != CellState.UNKNOWN

    def known_count(self) -> int:
        return int(np.count_nonzero(self.known_mask()))


def merge_maps(grids: Sequence[OccupancyGrid]) -> OccupancyGrid:
    """Fuse independent evidence by summing deviations from the shared prior."""
    if not grids:
        raise MergeError("nothing to merge")
    first = grids[0]
    for g in grids[1:]:
        if not first.same_geometry(g) or g.prior_log_odds != first.prior_log_odds:
            raise MergeError(
                f"geometry mismatch: {first.height}x{first.width}@{first.resolution} prior {first.prior_log_odds} "
                f"vs {g.height}x{g.width}@{g.resolution} prior {g.prior_log_odds}"
            )
    total = np.zeros_like(first.log_odds)
    for g in grids:
        total += g.log_odds - g.prior_log_odds
    total += first.prior_log_odds
    return OccupancyGrid(
        first.width, first.height, first.resolution, total, first.prior_log_odds,
        first.occ_threshold, first.free_threshold, first.l_min, first.l_max,
    )


def completion_percentage(partial: OccupancyGrid, reference: OccupancyGrid) -> float:
    """Known cells of ``partial`` as a percentage of the reference's known cells.

    Only cells the reference also knows are counted, so the result stays in
    [0, 100] even when the partial run glimpsed a pocket the reference missed.
    """
    if not partial.same_geometry(reference):
        raise MetricError("partial and reference maps differ in geometry")
    ref_known = reference.known_mask()
    denom = int(np.count_nonzero(ref_known))
    if denom == 0:
        raise MetricError("reference map has no known cells")
    num = int(np.count_nonzero(partial.known_mask() & ref_known))
    return 100.0 * num / denom


def to_pgm_bytes(grid: OccupancyGrid) -> bytes:
    """Binary PGM (P5): 0 occupied, 254 free, 205 unknown; row 0 written first."""
    st = grid.states()
    img = np.full(st.shape, PGM_UNKNOWN, dtype=np.uint8)
    img[st == CellState.OCCUPIED] = PGM_OCCUPIED
    img[st == CellState.FREE] = PGM_FREE
    header = f"P5\n# resolution {grid.resolution!r}\n{grid.width} {grid.height}\n255\n".encode()
    return header + img.tobytes()


def write_pgm(grid: OccupancyGrid, path) -> None:
    """Write the map image plus a ``.meta`` sidecar carrying the resolution."""
    path = Path(path)
    path.write_bytes(to_pgm_bytes(grid))
    path.with_suffix(path.suffix + ".meta").write_text(f"resolution {grid.resolution!r}\n")


def read_pnm(data: bytes) -> tuple[str, np.ndarray, list[str]]:
    """Parse a binary P5/P6 image; returns (magic, pixels, comments)."""
    pos = 0
    tokens: list[str] = []
    comments: list[str] = []
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            end = data.index(b"\n", pos)
            comments.append(data[pos + 1:end].decode().strip())
            pos = end + 1
            continue
        end = pos
        while not data[end:end + 1].isspace():
            end += 1
        tokens.append(data[pos:end].decode())
        pos = end
    pos += 1
    magic, w, h, maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic not in ("P5", "P6") or maxval > 255:
        raise ValueError(f"unsupported image {magic} maxval {maxval}")
    channels = 3 if magic == "P6" else 1
    pixels = np.frombuffer(data[pos:pos + w * h * channels], dtype=np.uint8)
    shape = (h, w, 3) if channels == 3 else (h, w)
    return magic, pixels.reshape(shape), comments


def grid_from_pgm(data: bytes, resolution: float | None = None) -> OccupancyGrid:
    """Rebuild a saturated occupancy grid from a P5 map image."""
    magic, img, comments = read_pnm(data)
    if magic != "P5":
        raise ValueError("expected a P5 map image")
    if resolution is None:
        for c in comments:
            parts = c.split()
            if len(parts) == 2 and parts[0] == "resolution":
                resolution = float(parts[1])
        if resolution is None:
            raise ValueError("image carries no resolution")
    lo = np.zeros(img.shape)
    lo[img == PGM_OCCUPIED] = L_MAX
    lo[img == PGM_FREE] = L_MIN
    return OccupancyGrid(img.shape[1], img.shape[0], resolution, lo)
