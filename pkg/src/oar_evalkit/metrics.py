"""Segmentation quality metrics: DSC, HD95, MSD, masked evaluation, FPR.

Surface distances are exact Euclidean distances between voxel centers,
anisotropic spacing respected. Surfaces are foreground voxels with at least
one of their six face-neighbors background or outside the volume.

Distance evaluation is exact along two interchangeable routes: a full-field
Euclidean distance transform over the union bounding box (cheap for small
crops), or nearest-neighbor queries on spacing-scaled surface points (cheap
for very large volumes). Both return identical values; `surface_distances`
picks by cropped volume size unless forced.
"""

from __future__ import annotations

import csv
import json
import re
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from ._edt import distance_field
from .errors import EmptyStructureError, GeometryError, InputError
from .schema import OrganSchema
from .volume import LabelVolume

# above this many cropped voxels the KD-tree route wins over the full field
EDT_ROUTE_MAX_VOXELS = 1_500_000

STATUS_EVALUATED = "evaluated"
STATUS_EXCLUDED = "excluded_no_ground_truth"
STATUS_EMPTY_PRED = "empty_prediction"
STATUS_MASKED = "masked"

DEFAULT_MASK_POLICY = ("stomach_bowel",)

# pooled symmetric surface distances (both directed sets concatenated);
# HD95 uses the linear-interpolation percentile. Stated in report metadata
# so downstream comparisons name their convention.
DISTANCE_CONVENTION = (
    "pooled symmetric surface distances; HD95 = linearly interpolated "
    "95th percentile; voxel-center distances on 6-neighborhood surfaces"
)


@dataclass(frozen=True)
class MetricRow:
    case_id: str
    organ: str
    dsc: float | None
    hd95_mm: float | None
    msd_mm: float | None
    status: str
    gt_voxels: int
    pred_voxels: int
    slab: tuple[int, int] | None = None

    def status_label(self) -> str:
        if self.status == STATUS_MASKED and self.slab is not None:
            return f"masked({self.slab[0]}-{self.slab[1]})"
        return self.status

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "organ": self.organ,
            "dsc": self.dsc,
            "hd95_mm": self.hd95_mm,
            "msd_mm": self.msd_mm,
            "status": self.status_label(),
            "gt_voxels": self.gt_voxels,
            "pred_voxels": self.pred_voxels,
        }


@dataclass(frozen=True)
class FprResult:
    organ: str
    positives: int
    total: int
    threshold_mm3: float

    def __post_init__(self):
        if not 0 <= self.positives <= self.total:
            raise InputError(f"positives {self.positives} outside [0, {self.total}]")

    def display(self) -> str:
        return f"{self.positives}/{self.total}"

    def to_dict(self) -> dict:
        return {"organ": self.organ, "positives": self.positives,
                "total": self.total, "threshold_mm3": self.threshold_mm3,
                "display": self.display()}


def _check_same_shape(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape:
        raise GeometryError(f"mask shapes differ: {a.shape} vs {b.shape}")


def dsc(gt: np.ndarray, pred: np.ndarray) -> float:
    """Dice similarity coefficient 2|A∩B| / (|A|+|B|); both empty -> 1.0."""
    gt = np.asarray(gt, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    _check_same_shape(gt, pred)
    size_sum = int(gt.sum()) + int(pred.sum())
    if size_sum == 0:
        return 1.0
    overlap = int(np.count_nonzero(gt & pred))
    return 2.0 * overlap / size_sum


def extract_surface(mask: np.ndarray) -> np.ndarray:
    """Boolean mask of surface voxels (6-neighborhood boundary).

    A foreground voxel is surface iff any of its six face-neighbors is
    background or lies outside the volume.
    """
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        return np.zeros_like(mask)
    interior = mask.copy()
    for axis in range(mask.ndim):
        lo = np.zeros_like(mask)
        hi = np.zeros_like(mask)
        src = [slice(None)] * mask.ndim
        dst = [slice(None)] * mask.ndim
        src[axis], dst[axis] = slice(1, None), slice(None, -1)
        lo[tuple(dst)] = mask[tuple(src)]
        hi[tuple(src)] = mask[tuple(dst)]
        interior &= lo & hi
    return mask & ~interior


def edt(target_surface: np.ndarray, spacing) -> np.ndarray:
    """Exact Euclidean distance field (mm) to the nearest surface voxel center.

    Separable squared-distance transform with per-axis spacing scaling, one
    linear pass per axis. Raises EmptyStructureError when the surface set is
    empty.
    """
    target_surface = np.asarray(target_surface, dtype=bool)
    if not target_surface.any():
        raise EmptyStructureError("distance field to an empty surface is undefined")
    return distance_field(target_surface, spacing)


def _surface_points_mm(surface: np.ndarray, spacing) -> np.ndarray:
    pts = np.argwhere(surface).astype(np.float64)
    pts *= np.asarray(spacing, dtype=np.float64)
    return pts


def _union_bbox(a: np.ndarray, b: np.ndarray):
    union = a | b
    nz = np.nonzero(union)
    return tuple(slice(int(x.min()), int(x.max()) + 1) for x in nz)


def surface_distances(gt: np.ndarray, pred: np.ndarray, spacing,
                      method: str = "auto") -> np.ndarray:
    """Pooled directed surface distances between two non-empty masks (mm).

    Returns the concatenation of (pred-surface -> nearest gt-surface) and
    (gt-surface -> nearest pred-surface) distances.
    """
    gt = np.asarray(gt, dtype=bool)
    pred = np.asarray(pred, dtype=bool)
    _check_same_shape(gt, pred)
    if not gt.any() or not pred.any():
        raise EmptyStructureError("surface distances need two non-empty masks")
    s_gt = extract_surface(gt)
    s_pred = extract_surface(pred)
    box = _union_bbox(s_gt, s_pred)
    s_gt, s_pred = s_gt[box], s_pred[box]

    if method == "auto":
        method = "edt" if s_gt.size <= EDT_ROUTE_MAX_VOXELS else "kdtree"
    if method == "edt":
        pred_to_gt = edt(s_gt, spacing)[s_pred]
        gt_to_pred = edt(s_pred, spacing)[s_gt]
    elif method == "kdtree":
        p_gt = _surface_points_mm(s_gt, spacing)
        p_pred = _surface_points_mm(s_pred, spacing)
        pred_to_gt = cKDTree(p_gt).query(p_pred, workers=1)[0]
        gt_to_pred = cKDTree(p_pred).query(p_gt, workers=1)[0]
    else:
        raise ValueError(f"method must be auto/edt/kdtree, got {method!r}")
    return np.concatenate([pred_to_gt, gt_to_pred])


def hd95(distances) -> float:
    """95th percentile of pooled distances, linear interpolation between
    order statistics (rank 0.95*(n-1))."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise InputError("hd95 of an empty distance list")
    return float(np.percentile(d, 95.0))


def msd(distances) -> float:
    """Mean of the pooled surface distances."""
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0:
        raise InputError("msd of an empty distance list")
    return float(d.mean())


def _axial_slab(mask: np.ndarray, axis: int) -> tuple[int, int]:
    present = np.any(mask, axis=tuple(i for i in range(mask.ndim) if i != axis))
    idx = np.flatnonzero(present)
    return int(idx[0]), int(idx[-1])


def evaluate_case(gt: LabelVolume, pred: LabelVolume, schema: OrganSchema,
                  mask_policy=DEFAULT_MASK_POLICY, case_id: str = "",
                  organs=None) -> list[MetricRow]:
    """Per-organ DSC/HD95/MSD for one case.

    Organs with empty ground truth are excluded from evaluation. A non-empty
    ground truth with an empty prediction scores DSC 0 with distances absent.
    Organs named in ``mask_policy`` are first cropped, on both sides, to the
    contiguous axial slab of slices where the ground truth is present.
    """
    gt.grid.require_same_lattice(pred.grid, "gt/pred")
    axial = gt.grid.axial_axis()
    spacing = gt.grid.spacing
    rows = []
    for organ in schema:
        if organs is not None and organ.name not in organs:
            continue
        gt_mask = gt.voxels == organ.label_code
        pred_mask = pred.voxels == organ.label_code
        if not gt_mask.any():
            rows.append(MetricRow(case_id, organ.name, None, None, None,
                                  STATUS_EXCLUDED, 0, int(pred_mask.sum())))
            continue
        slab = None
        if organ.name in mask_policy:
            lo, hi = _axial_slab(gt_mask, axial)
            slab = (lo, hi)
            cut = [slice(None)] * 3
            cut[axial] = slice(lo, hi + 1)
            gt_mask = gt_mask[tuple(cut)]
            pred_mask = pred_mask[tuple(cut)]
        n_gt = int(gt_mask.sum())
        n_pred = int(pred_mask.sum())
        if n_pred == 0:
            rows.append(MetricRow(case_id, organ.name, 0.0, None, None,
                                  STATUS_EMPTY_PRED, n_gt, 0, slab))
            continue
        distances = surface_distances(gt_mask, pred_mask, spacing)
        status = STATUS_MASKED if slab is not None else STATUS_EVALUATED
        rows.append(MetricRow(case_id, organ.name, dsc(gt_mask, pred_mask),
                              hd95(distances), msd(distances), status,
                              n_gt, n_pred, slab))
    return rows


def predicted_volume_mm3(pred: LabelVolume, label_code: int) -> float:
    """Predicted volume of one label class in mm^3."""
    return float(np.count_nonzero(pred.voxels == label_code)) * pred.grid.voxel_volume_mm3


def fpr_absent_organ(cases, threshold_mm3: float = 0.0,
                     organ: str = "kidney") -> FprResult:
    """False positive rate over surgically removed organs.

    ``cases`` is a list of (case_id, nephrectomy_side, predicted removed-side
    volume in mm^3). A case counts positive when the predicted volume of the
    removed organ exceeds the threshold (default 0: any voxel counts).
    """
    positives = 0
    total = 0
    for case_id, side, volume in cases:
        if side not in ("left", "right"):
            raise InputError(
                f"case {case_id}: nephrectomy_side must be left/right, got {side!r}")
        total += 1
        if volume > threshold_mm3:
            positives += 1
    return FprResult(organ=organ, positives=positives, total=total,
                     threshold_mm3=threshold_mm3)


# ---------------------------------------------------------------------------
# metric table I/O

CSV_HEADER = ["case_id", "organ", "dsc", "hd95_mm", "msd_mm", "status",
              "gt_voxels", "pred_voxels"]

_MASKED_RE = re.compile(r"masked\((\d+)-(\d+)\)")


def write_metric_csv(rows: list[MetricRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(CSV_HEADER)
        for r in rows:
            w.writerow([
                r.case_id, r.organ,
                "" if r.dsc is None else repr(float(r.dsc)),
                "" if r.hd95_mm is None else repr(float(r.hd95_mm)),
                "" if r.msd_mm is None else repr(float(r.msd_mm)),
                r.status_label(), r.gt_voxels, r.pred_voxels,
            ])


def write_metric_json(rows: list[MetricRow], path, fpr: list[FprResult] = (),
                      notes: str = DISTANCE_CONVENTION) -> None:
    doc = {
        "convention_notes": notes,
        "rows": [r.to_dict() for r in rows],
        "fpr": [f.to_dict() for f in fpr],
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def _parse_status(label: str) -> tuple[str, tuple[int, int] | None]:
    m = _MASKED_RE.fullmatch(label)
    if m:
        return STATUS_MASKED, (int(m.group(1)), int(m.group(2)))
    return label, None


def read_metric_csv(path) -> list[MetricRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        missing = set(CSV_HEADER) - set(reader.fieldnames or ())
        if missing:
            raise InputError(f"metric table {path} lacks columns {sorted(missing)}")
        for rec in reader:
            status, slab = _parse_status(rec["status"])
            rows.append(MetricRow(
                case_id=rec["case_id"],
                organ=rec["organ"],
                dsc=float(rec["dsc"]) if rec["dsc"] else None,
                hd95_mm=float(rec["hd95_mm"]) if rec["hd95_mm"] else None,
                msd_mm=float(rec["msd_mm"]) if rec["msd_mm"] else None,
                status=status,
                gt_voxels=int(rec["gt_voxels"]),
                pred_voxels=int(rec["pred_voxels"]),
                slab=slab,
            ))
    return rows
