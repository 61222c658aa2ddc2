"""Label-volume harmonization: merging, complementation, overlap resolution,
case filtering, and largest-component post-processing.

All functions are pure over immutable inputs; per-case harmonization is safe
to parallelize. Masks are boolean numpy arrays on one shared grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import GeometryError, UnknownStructureError
from .manifest import CaseRecord, Manifest
from .schema import OrganSchema, canonical_name
from .volume import Grid, LabelVolume

PROV_CLINICAL = "clinical"
PROV_AUXILIARY = "auxiliary"
PROV_ABSENT = "absent"

# Type 1 organs whose missing clinical delineations may be filled from the
# auxiliary source; all Type 2 organs are always fillable.
DEFAULT_COMPLEMENTABLE_TYPE1 = frozenset({"heart", "pancreas", "stomach_bowel"})


@dataclass(frozen=True)
class ComplementPolicy:
    type1_organs: frozenset[str] = DEFAULT_COMPLEMENTABLE_TYPE1
    all_type2: bool = True

    def allows(self, organ_name: str, organ_type: str) -> bool:
        if organ_type == "type2":
            return self.all_type2
        return organ_name in self.type1_organs


@dataclass(frozen=True)
class FilterRules:
    slice_range: tuple[int, int] = (80, 400)
    max_missing_organs: int = 4


@dataclass(frozen=True)
class Exclusion:
    case_id: str
    reason: str
    detail: str

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "reason": self.reason, "detail": self.detail}


@dataclass(frozen=True)
class FilterResult:
    included: tuple[CaseRecord, ...]
    excluded: tuple[Exclusion, ...]

    def included_manifest(self, schema_ref: str = "default") -> Manifest:
        return Manifest(cases=self.included, schema_ref=schema_ref)


@dataclass(frozen=True)
class HarmonizedCase:
    case_id: str
    labels: LabelVolume
    provenance: dict[str, str] = field(default_factory=dict)
    filter_status: str = "included"
    exclusion_reason: str | None = None

    def missing_organ_count(self) -> int:
        return sum(1 for v in self.provenance.values() if v == PROV_ABSENT)


def _as_mask(source, grid: Grid | None) -> tuple[np.ndarray, Grid | None]:
    if isinstance(source, LabelVolume):
        return source.voxels != 0, source.grid
    arr = np.asarray(source)
    return arr != 0, grid


def merge_labels(sources, schema: OrganSchema, grid: Grid | None = None
                 ) -> dict[str, np.ndarray]:
    """Union source masks into canonical per-organ masks.

    ``sources`` is a list of (mask, source_name) pairs where a mask is a
    LabelVolume (nonzero = foreground) or boolean array. Source names matched
    by a merge rule land in the rule's target organ; canonical organ names
    pass through; anything else is an unknown structure.
    """
    out: dict[str, np.ndarray] = {}
    ref_shape = None
    ref_grid = grid
    for source, name in sources:
        mask, src_grid = _as_mask(source, None)
        if ref_shape is None:
            ref_shape = mask.shape
            ref_grid = ref_grid or src_grid
        if mask.shape != ref_shape:
            raise GeometryError(
                f"source {name!r}: shape {mask.shape} != {ref_shape}")
        if src_grid is not None and ref_grid is not None:
            ref_grid.require_same_lattice(src_grid, f"source {name!r}")
        canon = canonical_name(name)
        target = schema.merge_target(canon)
        if target is None:
            if canon not in schema.names():
                raise UnknownStructureError(
                    f"source {name!r} is not a schema organ and no merge rule covers it")
            target = canon
        if target in out:
            out[target] = out[target] | mask
        else:
            out[target] = mask.copy()
    return out


def decompose_labels(volume: LabelVolume, schema: OrganSchema) -> dict[str, np.ndarray]:
    """Split a multi-label volume into per-organ masks, skipping empty organs."""
    unknown = set(volume.codes_present()) - schema.codes()
    if unknown:
        raise UnknownStructureError(f"label codes {sorted(unknown)} not in schema")
    out = {}
    for organ in schema:
        mask = volume.voxels == organ.label_code
        if mask.any():
            out[organ.name] = mask
    return out


def complement_missing(clinical: dict[str, np.ndarray],
                       auxiliary: dict[str, np.ndarray],
                       schema: OrganSchema,
                       policy: ComplementPolicy = ComplementPolicy(),
                       ) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    """Fill missing clinical organs from the auxiliary mask set.

    A non-empty clinical mask always wins. Missing organs are taken from the
    auxiliary set when the policy allows (by default: heart, pancreas, and
    stomach_bowel among Type 1; every Type 2 organ). Returns the combined
    mask set and a per-organ provenance map covering the whole schema.
    """
    shapes = {m.shape for m in list(clinical.values()) + list(auxiliary.values())}
    if len(shapes) > 1:
        raise GeometryError(f"clinical/auxiliary mask shapes differ: {shapes}")
    masks: dict[str, np.ndarray] = {}
    provenance: dict[str, str] = {}
    for organ in schema:
        clin = clinical.get(organ.name)
        aux = auxiliary.get(organ.name)
        if clin is not None and clin.any():
            masks[organ.name] = clin
            provenance[organ.name] = PROV_CLINICAL
        elif (aux is not None and aux.any()
              and policy.allows(organ.name, organ.organ_type)):
            masks[organ.name] = aux
            provenance[organ.name] = PROV_AUXILIARY
        else:
            provenance[organ.name] = PROV_ABSENT
    return masks, provenance


def resolve_overlaps(masks: dict[str, np.ndarray], schema: OrganSchema,
                     grid: Grid) -> LabelVolume:
    """Combine per-organ masks into one multi-label volume.

    A voxel claimed by several organs goes to the one in the earliest
    priority tier, ties broken by schema order. Unclaimed voxels stay 0.
    """
    shapes = {m.shape for m in masks.values()}
    if shapes and shapes != {grid.dims}:
        raise GeometryError(f"mask shapes {shapes} != grid dims {grid.dims}")
    out = np.zeros(grid.dims, dtype=np.uint8)
    # paint lowest priority first so the highest-priority claimant wins
    order = sorted(masks, key=schema.priority_rank, reverse=True)
    for name in order:
        out[masks[name]] = schema.code_of(name)
    return LabelVolume(grid, out)


def keep_largest_component(mask: np.ndarray, connectivity: int = 26) -> np.ndarray:
    """Keep only the largest connected component of a binary mask.

    Size ties go to the component containing the smallest linear voxel index.
    An empty mask is returned unchanged.
    """
    structure = _connectivity_structure(connectivity)
    mask = np.asarray(mask) != 0
    if not mask.any():
        return mask.copy()
    labeled, n = ndimage.label(mask, structure=structure)
    if n == 1:
        return mask.copy()
    sizes = np.bincount(labeled.ravel())
    sizes[0] = 0
    best = sizes.max()
    candidates = np.flatnonzero(sizes == best)
    if len(candidates) > 1:
        flat = labeled.ravel()
        candidates = sorted(candidates, key=lambda c: int(np.argmax(flat == c)))
    return labeled == candidates[0]


def _connectivity_structure(connectivity: int) -> np.ndarray:
    try:
        rank = {6: 1, 18: 2, 26: 3}[connectivity]
    except KeyError:
        raise ValueError(f"connectivity must be 6, 18, or 26, got {connectivity}")
    return ndimage.generate_binary_structure(3, rank)


def largest_component_cleanup(volume: LabelVolume, schema: OrganSchema,
                              connectivity: int = 26) -> LabelVolume:
    """Apply keep_largest_component to every organ class of a label volume."""
    out = np.zeros(volume.dims, dtype=volume.voxels.dtype)
    for code in volume.codes_present():
        kept = keep_largest_component(volume.voxels == code, connectivity)
        out[kept] = code
    return LabelVolume(volume.grid, out)


@dataclass(frozen=True)
class CaseStats:
    slice_count: int
    missing_organs: int


def filter_cases(manifest: Manifest, rules: FilterRules,
                 stats: dict[str, CaseStats]) -> FilterResult:
    """Partition manifest cases into included and excluded.

    Excludes cases whose axial slice count falls outside rules.slice_range or
    that miss more than rules.max_missing_organs organs after complementation.
    ``stats`` must carry a CaseStats for every case.
    """
    lo, hi = rules.slice_range
    included, excluded = [], []
    for case in manifest:
        try:
            st = stats[case.case_id]
        except KeyError:
            raise KeyError(f"no CaseStats supplied for case {case.case_id!r}")
        if not (lo <= st.slice_count <= hi):
            excluded.append(Exclusion(
                case.case_id, "slice_count",
                f"{st.slice_count} slices outside [{lo}, {hi}]"))
        elif st.missing_organs > rules.max_missing_organs:
            excluded.append(Exclusion(
                case.case_id, "missing_organs",
                f"{st.missing_organs} organs absent, limit {rules.max_missing_organs}"))
        else:
            included.append(case)
    return FilterResult(included=tuple(included), excluded=tuple(excluded))
