"""Minimal NIfTI-1 reader/writer for label and image volumes.

Supports single-file .nii / .nii.gz (magic ``n+1``) plus read-only support
for detached .hdr/.img pairs (magic ``ni1``). Honored header fields: dim,
datatype, pixdim, scl_slope/scl_inter, qform/sform codes and matrices.
Data is stored x-fastest (Fortran order) as the format requires.
"""

from __future__ import annotations

import gzip
import math
import struct
from pathlib import Path

import numpy as np

from .errors import FormatError, LabelFormatError, UnsupportedRankError
from .volume import Grid, ImageVolume, LabelVolume, world_axis_and_sign

HEADER_SIZE = 348
_HDR_FMT = "i10s18sihcc8h3fhhhh8ffffhccffffii80s24shh6f12f16s4s"

# NIfTI-1 datatype code -> numpy dtype (the supported subset)
_DTYPES = {
    2: np.dtype(np.uint8),
    4: np.dtype(np.int16),
    8: np.dtype(np.int32),
    16: np.dtype(np.float32),
    64: np.dtype(np.float64),
    512: np.dtype(np.uint16),
}
_DTYPE_CODES = {v: k for k, v in _DTYPES.items()}

_MAGIC_SINGLE = b"n+1\x00"
_MAGIC_PAIR = b"ni1\x00"


def _open_maybe_gzip(path: Path):
    f = open(path, "rb")
    head = f.read(2)
    f.seek(0)
    if head == b"\x1f\x8b":
        f.close()
        return gzip.open(path, "rb")
    return f


def _quaternion_to_rotation(b: float, c: float, d: float) -> np.ndarray:
    a2 = 1.0 - (b * b + c * c + d * d)
    a = math.sqrt(a2) if a2 > 0 else 0.0
    return np.array(
        [
            [a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)],
            [2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)],
            [2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - b * b - c * c],
        ]
    )


def _axis_codes_from_affine(mat: np.ndarray) -> tuple[str, str, str]:
    pos = {0: "R", 1: "A", 2: "S"}
    neg = {0: "L", 1: "P", 2: "I"}
    codes = []
    taken = set()
    for j in range(3):
        col = mat[:, j]
        order = np.argsort(-np.abs(col))
        world = next((int(w) for w in order if int(w) not in taken), None)
        if world is None or col[world] == 0:
            raise FormatError("degenerate orientation matrix")
        taken.add(world)
        codes.append(pos[world] if col[world] > 0 else neg[world])
    return tuple(codes)


def _grid_affine(grid: Grid) -> np.ndarray:
    mat = np.zeros((3, 4))
    for j in range(3):
        world, sign = world_axis_and_sign(grid.axis_codes[j])
        mat[world, j] = sign * grid.spacing[j]
    mat[:, 3] = grid.origin
    return mat


class _Header:
    """Parsed NIfTI-1 header, keeping only the fields the toolkit honors."""

    __slots__ = (
        "byteorder", "shape", "datatype", "dtype", "pixdim", "vox_offset",
        "scl_slope", "scl_inter", "qform_code", "sform_code", "quatern",
        "qoffset", "srows", "qfac", "magic",
    )

    @classmethod
    def parse(cls, raw: bytes) -> "_Header":
        if len(raw) < HEADER_SIZE:
            raise FormatError(f"truncated header: {len(raw)} bytes < {HEADER_SIZE}")
        for bo in ("<", ">"):
            if struct.unpack(bo + "i", raw[:4])[0] == HEADER_SIZE:
                break
        else:
            raise FormatError("not a NIfTI-1 file (sizeof_hdr != 348)")
        fields = struct.unpack(bo + _HDR_FMT, raw[:HEADER_SIZE])
        h = cls()
        h.byteorder = bo
        h.magic = fields[-1]
        if h.magic not in (_MAGIC_SINGLE, _MAGIC_PAIR):
            raise FormatError(f"bad magic {h.magic!r}")
        dim = fields[7:15]
        ndim = dim[0]
        if ndim < 3 or ndim > 7:
            raise UnsupportedRankError(f"dim[0] = {ndim}, need a 3D volume")
        if any(dim[k] != 1 for k in range(4, ndim + 1)):
            raise UnsupportedRankError(
                f"{ndim}D volume with non-singleton trailing dims {dim[4:ndim + 1]}"
            )
        h.shape = (dim[1], dim[2], dim[3])
        h.datatype = fields[19]
        if h.datatype not in _DTYPES:
            raise FormatError(f"unsupported datatype code {h.datatype}")
        h.dtype = _DTYPES[h.datatype].newbyteorder(bo)
        pixdim = fields[22:30]
        h.qfac = -1.0 if pixdim[0] < 0 else 1.0
        h.pixdim = pixdim[1:4]
        h.vox_offset = int(fields[30])
        h.scl_slope = fields[31]
        h.scl_inter = fields[32]
        h.qform_code = fields[44]
        h.sform_code = fields[45]
        h.quatern = fields[46:49]
        h.qoffset = fields[49:52]
        h.srows = np.array(fields[52:64], dtype=np.float64).reshape(3, 4)
        return h

    def affine(self) -> np.ndarray:
        if self.sform_code > 0:
            return self.srows.copy()
        if self.qform_code > 0:
            rot = _quaternion_to_rotation(*self.quatern)
            mat = np.zeros((3, 4))
            scale = [abs(p) or 1.0 for p in self.pixdim]
            scale[2] *= self.qfac
            mat[:, :3] = rot * np.array(scale)
            mat[:, 3] = self.qoffset
            return mat
        mat = np.zeros((3, 4))
        for j in range(3):
            mat[j, j] = abs(self.pixdim[j]) or 1.0
        return mat

    def grid(self) -> Grid:
        mat = self.affine()
        spacing = []
        for j in range(3):
            p = abs(self.pixdim[j])
            if not math.isfinite(p) or p <= 0:
                p = float(np.linalg.norm(mat[:, j]))
            if not math.isfinite(p) or p <= 0:
                raise FormatError(f"cannot determine spacing of axis {j}")
            spacing.append(p)
        return Grid(
            dims=self.shape,
            spacing=tuple(spacing),
            origin=tuple(float(x) for x in mat[:, 3]),
            axis_codes=_axis_codes_from_affine(mat[:, :3]),
        )


def _read_raw(path) -> tuple[_Header, np.ndarray]:
    path = Path(path)
    with _open_maybe_gzip(path) as f:
        raw = f.read(HEADER_SIZE)
        header = _Header.parse(raw)
        if header.magic == _MAGIC_SINGLE:
            f.seek(max(header.vox_offset, HEADER_SIZE))
            payload = f.read()
        else:
            payload = None
    if payload is None:
        img_path = _companion_img(path)
        with _open_maybe_gzip(img_path) as f:
            f.seek(header.vox_offset)
            payload = f.read()
    count = int(np.prod(header.shape))
    nbytes = count * header.dtype.itemsize
    if len(payload) < nbytes:
        raise FormatError(
            f"truncated data: expected {nbytes} bytes, found {len(payload)}"
        )
    data = np.frombuffer(payload, dtype=header.dtype, count=count)
    return header, data.reshape(header.shape, order="F")


def _companion_img(path: Path) -> Path:
    name = path.name
    for suffix, repl in ((".hdr.gz", ".img.gz"), (".hdr", ".img")):
        if name.endswith(suffix):
            candidate = path.with_name(name[: -len(suffix)] + repl)
            if candidate.exists():
                return candidate
            candidate_plain = path.with_name(name[: -len(suffix)] + ".img")
            if candidate_plain.exists():
                return candidate_plain
    raise FormatError(f"no companion .img file for header {path}")


def _has_scaling(header: _Header) -> bool:
    slope = header.scl_slope
    if not math.isfinite(slope) or slope == 0.0:
        return False
    return slope != 1.0 or header.scl_inter != 0.0


def read_image_volume(path) -> ImageVolume:
    """Read a NIfTI-1 file as an intensity volume, applying scl scaling."""
    header, data = _read_raw(path)
    if _has_scaling(header):
        data = data.astype(np.float64) * header.scl_slope + header.scl_inter
    return ImageVolume(header.grid(), data)


def read_label_volume(path) -> LabelVolume:
    """Read a NIfTI-1 file as a label volume.

    Float-stored data is accepted only when every value is integral within
    1e-6; anything else raises LabelFormatError.
    """
    header, data = _read_raw(path)
    if _has_scaling(header):
        data = data.astype(np.float64) * header.scl_slope + header.scl_inter
    if not np.issubdtype(data.dtype, np.integer):
        rounded = np.rint(data)
        if data.size and float(np.abs(data - rounded).max()) > 1e-6:
            raise LabelFormatError(f"{path}: non-integer values in label data")
        data = rounded.astype(np.int32)
    if data.size and int(data.min()) < 0:
        raise LabelFormatError(f"{path}: negative label codes")
    return LabelVolume(header.grid(), data)


def read_grid(path) -> Grid:
    """Read only the header of a NIfTI-1 file and return its voxel grid."""
    with _open_maybe_gzip(Path(path)) as f:
        header = _Header.parse(f.read(HEADER_SIZE))
    return header.grid()


def read_nifti(path, kind: str = "auto") -> ImageVolume | LabelVolume:
    """Read a NIfTI-1 volume.

    kind = "label" or "image" forces the container type; "auto" returns a
    LabelVolume for unscaled integer data and an ImageVolume otherwise.
    """
    if kind == "label":
        return read_label_volume(path)
    if kind == "image":
        return read_image_volume(path)
    if kind != "auto":
        raise ValueError(f"kind must be auto/label/image, got {kind!r}")
    header, data = _read_raw(path)
    if np.issubdtype(header.dtype, np.integer) and not _has_scaling(header):
        return read_label_volume(path)
    return read_image_volume(path)


def _storage_array(volume) -> np.ndarray:
    v = volume.voxels
    if v.dtype in _DTYPE_CODES:
        return v
    if np.issubdtype(v.dtype, np.integer):
        lo = int(v.min()) if v.size else 0
        hi = int(v.max()) if v.size else 0
        for dt in (np.uint8, np.int16, np.uint16, np.int32):
            info = np.iinfo(dt)
            if info.min <= lo and hi <= info.max:
                return v.astype(dt)
        raise LabelFormatError(f"label codes [{lo}, {hi}] exceed int32 storage")
    if np.issubdtype(v.dtype, np.bool_):
        return v.astype(np.uint8)
    return v.astype(np.float64)


def write_nifti(volume, path) -> None:
    """Write a volume as single-file NIfTI-1 (.nii, or .nii.gz by extension)."""
    path = Path(path)
    data = _storage_array(volume)
    data = np.asarray(data, dtype=data.dtype.newbyteorder("<"))
    grid = volume.grid
    mat = _grid_affine(grid)

    dim = (3, *grid.dims, 1, 1, 1, 1)
    pixdim = (1.0, *grid.spacing, 0.0, 0.0, 0.0, 0.0)
    header = struct.pack(
        "<" + _HDR_FMT,
        HEADER_SIZE,            # sizeof_hdr
        b"", b"",               # data_type, db_name (unused)
        0, 0, b"r", b"\x00",    # extents, session_error, regular, dim_info
        *dim,
        0.0, 0.0, 0.0, 0,       # intent_p1..p3, intent_code
        _DTYPE_CODES[np.dtype(data.dtype.type)],
        data.dtype.itemsize * 8,  # bitpix
        0,                      # slice_start
        *pixdim,
        352.0,                  # vox_offset
        1.0, 0.0,               # scl_slope, scl_inter
        0, b"\x00", b"\x02",    # slice_end, slice_code, xyzt_units (mm)
        0.0, 0.0, 0.0, 0.0,     # cal_max, cal_min, slice_duration, toffset
        0, 0,                   # glmax, glmin
        b"oar-evalkit", b"",    # descrip, aux_file
        0, 1,                   # qform_code, sform_code
        0.0, 0.0, 0.0,          # quatern_b/c/d
        0.0, 0.0, 0.0,          # qoffset_x/y/z
        *(float(x) for x in mat.ravel()),
        b"",                    # intent_name
        _MAGIC_SINGLE,
    )
    body = header + b"\x00" * 4 + data.tobytes(order="F")
    opener = gzip.open if path.name.endswith(".gz") else open
    with opener(path, "wb") as f:
        f.write(body)
