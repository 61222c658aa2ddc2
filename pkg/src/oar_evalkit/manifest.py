"""Study manifest: case records binding volumes to patient metadata.

The manifest is a JSON document::

    {
      "schema_ref": "default",
      "cases": [
        {"case_id": "...", "patient_id": "...", "dataset": "...",
         "age_years": 4.0, "sex": "male", "tumor_type": "renal",
         "iv_contrast": "no", "nephrectomy_side": "left",
         "image_path": "...", "label_paths": {"name": "path", ...}}
      ]
    }

Unknown keys are ignored. Unknown enum strings map to the "unknown"
member with a warning. ``label_paths`` keys are structure names; the key
"multilabel" denotes a composite multi-label volume, and an ``aux:``
prefix marks auxiliary (auto-generated) sources used for complementation.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

from .errors import ValidationError

SEXES = ("male", "female", "unknown")
TUMOR_TYPES = ("renal", "neuroblastoma", "unspecified")
IV_CONTRAST = ("yes", "no", "unknown")
NEPHRECTOMY_SIDES = ("left", "right", "none", "unknown")

MULTILABEL_KEY = "multilabel"
AUX_PREFIX = "aux:"


@dataclass(frozen=True)
class CaseRecord:
    case_id: str
    patient_id: str
    image_path: str
    dataset: str = ""
    age_years: float = 0.0
    sex: str = "unknown"
    tumor_type: str = "unspecified"
    iv_contrast: str = "unknown"
    nephrectomy_side: str = "unknown"
    label_paths: dict[str, str] = field(default_factory=dict)

    def age_group(self) -> str:
        """Whole-year age bin: 0-2, 3-4, 5-6, or 7+."""
        years = int(math.floor(self.age_years))
        if years <= 2:
            return "0-2"
        if years <= 4:
            return "3-4"
        if years <= 6:
            return "5-6"
        return "7+"


@dataclass(frozen=True)
class Manifest:
    cases: tuple[CaseRecord, ...]
    schema_ref: str = "default"

    def __post_init__(self):
        if not self.cases:
            raise ValidationError("manifest has no cases")
        seen = set()
        for c in self.cases:
            if c.case_id in seen:
                raise ValidationError(f"duplicate case_id {c.case_id!r}")
            seen.add(c.case_id)
        object.__setattr__(self, "cases", tuple(self.cases))

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    def case(self, case_id: str) -> CaseRecord:
        for c in self.cases:
            if c.case_id == case_id:
                return c
        raise KeyError(case_id)

    def case_ids(self) -> list[str]:
        return [c.case_id for c in self.cases]


def _coerce_enum(value, allowed, fallback, case_id, fieldname):
    if value is None:
        return fallback
    v = str(value).strip().lower().replace("-", "_")
    if v in allowed:
        return v
    warnings.warn(
        f"case {case_id}: unknown {fieldname} {value!r}, treating as {fallback!r}",
        stacklevel=3,
    )
    return fallback


def parse_case(entry: dict) -> tuple[CaseRecord | None, list[str]]:
    """Build one CaseRecord from a manifest entry; returns (record, problems)."""
    problems = []
    case_id = str(entry.get("case_id") or "").strip()
    patient_id = str(entry.get("patient_id") or "").strip()
    image_path = str(entry.get("image_path") or "").strip()
    for name, value in (("case_id", case_id), ("patient_id", patient_id),
                        ("image_path", image_path)):
        if not value:
            problems.append(f"missing required field {name}")

    age_raw = entry.get("age_years")
    if age_raw is None:
        warnings.warn(f"case {case_id or '?'}: age_years missing, assuming 0.0",
                      stacklevel=2)
        age = 0.0
    else:
        try:
            age = float(age_raw)
        except (TypeError, ValueError):
            age = math.nan
        if not math.isfinite(age) or age < 0:
            problems.append(f"age_years must be finite and >= 0, got {age_raw!r}")
            age = 0.0

    label_paths = entry.get("label_paths") or {}
    if not isinstance(label_paths, dict):
        problems.append("label_paths must be a map of name -> path")
        label_paths = {}

    if problems:
        return None, problems

    record = CaseRecord(
        case_id=case_id,
        patient_id=patient_id,
        image_path=image_path,
        dataset=str(entry.get("dataset") or ""),
        age_years=age,
        sex=_coerce_enum(entry.get("sex"), SEXES, "unknown", case_id, "sex"),
        tumor_type=_coerce_enum(entry.get("tumor_type"), TUMOR_TYPES,
                                "unspecified", case_id, "tumor_type"),
        iv_contrast=_coerce_enum(entry.get("iv_contrast"), IV_CONTRAST,
                                 "unknown", case_id, "iv_contrast"),
        nephrectomy_side=_coerce_enum(entry.get("nephrectomy_side"),
                                      NEPHRECTOMY_SIDES, "unknown", case_id,
                                      "nephrectomy_side"),
        label_paths={str(k): str(v) for k, v in label_paths.items()},
    )
    return record, []


def load_manifest(path) -> Manifest:
    """Load and validate a manifest JSON file.

    Raises ValidationError listing every offending record when any case is
    missing required fields, violates the age invariant, or duplicates a
    case_id.
    """
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    return manifest_from_dict(doc)


def manifest_from_dict(doc: dict) -> Manifest:
    entries = doc.get("cases")
    if not isinstance(entries, list) or not entries:
        raise ValidationError("manifest must carry a non-empty 'cases' list")
    records, bad = [], []
    seen_ids = set()
    for i, entry in enumerate(entries):
        record, problems = parse_case(entry)
        if record is not None and record.case_id in seen_ids:
            problems = [f"duplicate case_id {record.case_id!r}"]
            record = None
        if record is None:
            ident = entry.get("case_id") or f"cases[{i}]"
            bad.append({"case": str(ident), "problems": problems})
        else:
            seen_ids.add(record.case_id)
            records.append(record)
    if bad:
        detail = "; ".join(f"{b['case']}: {', '.join(b['problems'])}" for b in bad)
        raise ValidationError(f"invalid manifest records: {detail}", records=bad)
    return Manifest(cases=tuple(records), schema_ref=str(doc.get("schema_ref") or "default"))


def manifest_to_dict(manifest: Manifest) -> dict:
    return {
        "schema_ref": manifest.schema_ref,
        "cases": [
            {
                "case_id": c.case_id,
                "patient_id": c.patient_id,
                "dataset": c.dataset,
                "age_years": c.age_years,
                "sex": c.sex,
                "tumor_type": c.tumor_type,
                "iv_contrast": c.iv_contrast,
                "nephrectomy_side": c.nephrectomy_side,
                "image_path": c.image_path,
                "label_paths": dict(c.label_paths),
            }
            for c in manifest.cases
        ],
    }


def save_manifest(manifest: Manifest, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest_to_dict(manifest), f, indent=2, sort_keys=True)
        f.write("\n")
