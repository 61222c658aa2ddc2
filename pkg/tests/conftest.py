import numpy as np
import pytest

from oar_evalkit.schema import default_schema
from oar_evalkit.volume import Grid, LabelVolume


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def grid_of(shape, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    return Grid(tuple(shape), tuple(spacing), tuple(origin))


def label_volume(voxels, spacing=(1.0, 1.0, 1.0), origin=(0.0, 0.0, 0.0)):
    voxels = np.asarray(voxels)
    return LabelVolume(grid_of(voxels.shape, spacing, origin), voxels)


def cube_mask(shape, lo, hi):
    """Axis-aligned solid cube with inclusive corners lo..hi."""
    m = np.zeros(shape, dtype=bool)
    m[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1] = True
    return m


def random_blob(rng, shape, p=0.15):
    """Random non-empty boolean mask."""
    m = rng.random(shape) < p
    if not m.any():
        m[tuple(rng.integers(0, s) for s in shape)] = True
    return m
