from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

from fireline.grid import OccupancyGrid

settings.register_profile("fireline", deadline=None, max_examples=60)
settings.load_profile("fireline")

DATA = Path(__file__).resolve().parents[1] / "src" / "fireline" / "data"


def grid_with(states_text: str, resolution: float = 1.0) -> OccupancyGrid:
    """Saturated grid from rows of '.', '#', '?' (free, occupied, unknown)."""
    rows = [r for r in states_text.strip().splitlines()]
    lo = np.zeros((len(rows), len(rows[0])))
    for i, row in enumerate(rows):
        for j, ch in enumerate(row.strip()):
            lo[i, j] = {".": -10.0, "#": 10.0, "?": 0.0}[ch]
    return OccupancyGrid(lo.shape[1], lo.shape[0], resolution, lo)


@pytest.fixture
def data_dir():
    return DATA
