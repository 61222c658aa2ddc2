"""3D volume containers and nearest-neighbor label regridding.

Volumes are immutable after construction (the voxel array is marked
read-only) and safe to share across threads. Geometry is axis-aligned:
a voxel axis maps to one anatomical world axis, identified by a code in
{R, L, A, P, S, I} giving the direction of increasing index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, LabelFormatError, OrientationError

AXIS_CODES = ("R", "L", "A", "P", "S", "I")

# world axis index and sign of the direction each code points to,
# in the canonical (x=R, y=A, z=S) frame
_CODE_TO_WORLD = {
    "R": (0, 1.0), "L": (0, -1.0),
    "A": (1, 1.0), "P": (1, -1.0),
    "S": (2, 1.0), "I": (2, -1.0),
}


def world_axis_and_sign(code: str) -> tuple[int, float]:
    """World axis index and direction sign for an anatomical axis code."""
    try:
        return _CODE_TO_WORLD[code]
    except KeyError:
        raise OrientationError(f"unknown axis code {code!r}") from None


@dataclass(frozen=True)
class Grid:
    """Voxel lattice geometry: shape, spacing (mm), world origin, axis codes."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    axis_codes: tuple[str, str, str] = ("R", "A", "S")

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(d) < 1 for d in self.dims):
            raise GeometryError(f"dims must be 3 integers >= 1, got {self.dims}")
        if len(self.spacing) != 3 or any(
            not math.isfinite(s) or s <= 0 for s in self.spacing
        ):
            raise GeometryError(f"spacing must be 3 finite positives, got {self.spacing}")
        codes = tuple(self.axis_codes)
        if sorted(world_axis_and_sign(c)[0] for c in codes) != [0, 1, 2]:
            raise OrientationError(f"axis codes {codes} do not span three world axes")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "axis_codes", codes)

    @property
    def voxel_volume_mm3(self) -> float:
        return self.spacing[0] * self.spacing[1] * self.spacing[2]

    def axial_axis(self) -> int:
        """Voxel axis running superior-inferior (the axial slice-stacking axis)."""
        for i, code in enumerate(self.axis_codes):
            if code in ("S", "I"):
                return i
        return 2

    def same_lattice(self, other: "Grid", tol: float = 1e-6) -> bool:
        """True when dims, spacing, origin, and axis codes all match."""
        return (
            self.dims == other.dims
            and self.axis_codes == other.axis_codes
            and all(
                math.isclose(a, b, rel_tol=tol, abs_tol=tol)
                for a, b in zip(self.spacing + self.origin, other.spacing + other.origin)
            )
        )

    def require_same_lattice(self, other: "Grid", what: str = "volumes"):
        if self.axis_codes != other.axis_codes:
            raise OrientationError(
                f"{what}: axis codes differ ({self.axis_codes} vs {other.axis_codes})"
            )
        if not self.same_lattice(other):
            raise GeometryError(
                f"{what}: grids differ "
                f"({self.dims}/{self.spacing}/{self.origin} vs "
                f"{other.dims}/{other.spacing}/{other.origin})"
            )


def _freeze(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a)
    if out is a:
        out = a.copy()
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class LabelVolume:
    """Dense 3D grid of non-negative integer label codes, 0 = background."""

    grid: Grid
    voxels: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.shape != self.grid.dims:
            raise GeometryError(f"voxel shape {v.shape} != dims {self.grid.dims}")
        if not np.issubdtype(v.dtype, np.integer):
            raise LabelFormatError(f"label voxels must be integer, got {v.dtype}")
        if v.size and int(v.min()) < 0:
            raise LabelFormatError("label codes must be non-negative")
        object.__setattr__(self, "voxels", _freeze(v))

    @property
    def dims(self):
        return self.grid.dims

    @property
    def spacing(self):
        return self.grid.spacing

    @property
    def origin(self):
        return self.grid.origin

    @property
    def axis_codes(self):
        return self.grid.axis_codes

    def mask(self, code: int) -> np.ndarray:
        """Boolean mask of one label code."""
        return self.voxels == code

    def codes_present(self) -> list[int]:
        """Sorted nonzero label codes present in the volume."""
        return sorted(int(c) for c in np.unique(self.voxels) if c != 0)


@dataclass(frozen=True)
class ImageVolume:
    """Dense 3D grid of signed intensities (CT: Hounsfield units)."""

    grid: Grid
    voxels: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.voxels)
        if v.shape != self.grid.dims:
            raise GeometryError(f"voxel shape {v.shape} != dims {self.grid.dims}")
        object.__setattr__(self, "voxels", _freeze(v))

    @property
    def dims(self):
        return self.grid.dims

    @property
    def spacing(self):
        return self.grid.spacing

    @property
    def origin(self):
        return self.grid.origin

    @property
    def axis_codes(self):
        return self.grid.axis_codes


def _axis_world_offsets(grid: Grid, axis: int) -> tuple[float, float]:
    """(world position of index 0, signed step per index) along one voxel axis."""
    world, sign = world_axis_and_sign(grid.axis_codes[axis])
    return grid.origin[world] * 1.0, sign * grid.spacing[axis]


def resample_labels_nearest(src: LabelVolume, ref_grid: Grid) -> LabelVolume:
    """Regrid a label volume onto ``ref_grid`` by nearest voxel center.

    Both grids must share axis codes; no reorientation is performed. Each
    output voxel takes the label of the source voxel whose center is nearest
    in world coordinates, ties resolved toward the lower source index.
    """
    if src.grid.axis_codes != ref_grid.axis_codes:
        raise OrientationError(
            f"axis codes differ: {src.grid.axis_codes} vs {ref_grid.axis_codes}"
        )
    if src.grid.same_lattice(ref_grid):
        return LabelVolume(ref_grid, src.voxels.copy())

    index_maps = []
    for axis in range(3):
        o_s, step_s = _axis_world_offsets(src.grid, axis)
        o_r, step_r = _axis_world_offsets(ref_grid, axis)
        j = np.arange(ref_grid.dims[axis], dtype=np.float64)
        # fractional source index whose center matches each ref center;
        # step signs are equal because the axis codes are equal
        x = (o_r + j * step_r - o_s) / step_s
        # round half toward the lower index
        i = np.ceil(x - 0.5).astype(np.int64)
        index_maps.append(np.clip(i, 0, src.grid.dims[axis] - 1))

    out = src.voxels[np.ix_(*index_maps)]
    return LabelVolume(ref_grid, out)
