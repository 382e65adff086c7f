import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cdm import Grid2D, StateVector, gaussian_state


@pytest.fixture
def grid_desk() -> Grid2D:
    """The 192-pixel experiment grid."""
    return Grid2D(12, 16)


@pytest.fixture
def grid_small() -> Grid2D:
    return Grid2D(4, 4)


@pytest.fixture
def desk_state(grid_desk) -> StateVector:
    return gaussian_state(grid_desk, 4.0)


def random_state(grid: Grid2D, seed: int, ensure_overlap: bool = True) -> StateVector:
    """Random normalized complex state with a nonvanishing uniform overlap."""
    rng = np.random.default_rng(seed)
    amps = rng.standard_normal(grid.n) + 1j * rng.standard_normal(grid.n)
    if ensure_overlap:
        amps += 2.0  # bias the zero-frequency component away from 0
    return StateVector(grid, amps).normalize()
