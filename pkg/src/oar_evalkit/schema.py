"""The 17-organ catalog: label codes, organ types, merge rules, priority tiers.

Type 1 organs carry clinician delineations used for planning; Type 2 organs
are auto-generated. Overlapping voxel claims are settled by priority tiers:
earlier tiers win, ties within a tier go to the organ listed first. Every
Type 1 tier precedes every Type 2 tier, and each Type 2 organ occupies its
own tier so Type-2/Type-2 conflicts stay deterministic.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from .errors import SchemaError, UnknownStructureError

TYPE1 = "type1"
TYPE2 = "type2"


@dataclass(frozen=True)
class OrganDef:
    name: str
    label_code: int
    organ_type: str
    paired_side: str = "none"

    def __post_init__(self):
        if self.organ_type not in (TYPE1, TYPE2):
            raise SchemaError(f"{self.name}: organ_type must be type1/type2")
        if self.paired_side not in ("left", "right", "none"):
            raise SchemaError(f"{self.name}: paired_side must be left/right/none")
        if not re.fullmatch(r"[a-z][a-z0-9_]*", self.name):
            raise SchemaError(f"organ name {self.name!r} is not canonical snake_case")


@dataclass(frozen=True)
class MergeRule:
    sources: tuple[str, ...]
    target: str


@dataclass(frozen=True)
class OrganSchema:
    organs: tuple[OrganDef, ...]
    merge_rules: tuple[MergeRule, ...] = ()
    priority_tiers: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        names = [o.name for o in self.organs]
        codes = [o.label_code for o in self.organs]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate organ names")
        if len(set(codes)) != len(codes):
            raise SchemaError("duplicate label codes")
        tiered = [n for tier in self.priority_tiers for n in tier]
        if sorted(tiered) != sorted(names):
            raise SchemaError("priority tiers must cover every organ exactly once")
        by_name = {o.name: o for o in self.organs}
        last_t1_tier = max(
            (i for i, tier in enumerate(self.priority_tiers)
             if any(by_name[n].organ_type == TYPE1 for n in tier)),
            default=-1,
        )
        first_t2_tier = min(
            (i for i, tier in enumerate(self.priority_tiers)
             if any(by_name[n].organ_type == TYPE2 for n in tier)),
            default=len(self.priority_tiers),
        )
        if last_t1_tier >= first_t2_tier:
            raise SchemaError("every Type 1 tier must precede every Type 2 tier")

    def __iter__(self):
        return iter(self.organs)

    def names(self) -> list[str]:
        return [o.name for o in self.organs]

    def organ(self, name: str) -> OrganDef:
        for o in self.organs:
            if o.name == name:
                return o
        raise UnknownStructureError(f"organ {name!r} not in schema")

    def code_of(self, name: str) -> int:
        return self.organ(name).label_code

    def name_of(self, code: int) -> str:
        for o in self.organs:
            if o.label_code == code:
                return o.name
        raise UnknownStructureError(f"label code {code} not in schema")

    def codes(self) -> set[int]:
        return {o.label_code for o in self.organs}

    def type1_names(self) -> list[str]:
        return [o.name for o in self.organs if o.organ_type == TYPE1]

    def type2_names(self) -> list[str]:
        return [o.name for o in self.organs if o.organ_type == TYPE2]

    def priority_rank(self, name: str) -> tuple[int, int]:
        """(tier index, position within schema order); lower wins conflicts."""
        order = {o.name: i for i, o in enumerate(self.organs)}
        for tier_idx, tier in enumerate(self.priority_tiers):
            if name in tier:
                return tier_idx, order[name]
        raise UnknownStructureError(f"organ {name!r} not in any priority tier")

    def merge_target(self, source_name: str) -> str | None:
        """Target organ for a source structure name, or None if not merged."""
        canon = canonical_name(source_name)
        for rule in self.merge_rules:
            if canon in rule.sources:
                return rule.target
        return None


def canonical_name(name: str) -> str:
    """Normalize a structure name: lowercase, non-alphanumerics to underscores."""
    return re.sub(r"[^a-z0-9]+", "_", name.strip().lower()).strip("_")


# organs in schema (and within-tier tie-break) order
_DEFAULT_ORGANS = (
    ("spleen", TYPE1, "none"),
    ("kidney_left", TYPE1, "left"),
    ("kidney_right", TYPE1, "right"),
    ("heart", TYPE1, "none"),
    ("pancreas", TYPE1, "none"),
    ("liver", TYPE1, "none"),
    ("stomach_bowel", TYPE1, "none"),
    ("lung_left", TYPE1, "left"),
    ("lung_right", TYPE1, "right"),
    ("vertebrae", TYPE2, "none"),
    ("spinal_canal", TYPE2, "none"),
    ("aorta_abdominal", TYPE2, "none"),
    ("inferior_vena_cava", TYPE2, "none"),
    ("autochthon_left", TYPE2, "left"),
    ("autochthon_right", TYPE2, "right"),
    ("iliopsoas_left", TYPE2, "left"),
    ("iliopsoas_right", TYPE2, "right"),
)

_DEFAULT_MERGES = (
    MergeRule(
        sources=("stomach", "small_intestine", "large_intestine",
                 "stomach_intestine_bowel", "bowel", "intestine"),
        target="stomach_bowel",
    ),
)

# spleen/kidneys/heart > pancreas/liver > stomach-bowel > lungs,
# then each Type 2 organ in schema order, one tier apiece
_DEFAULT_TIERS = (
    ("spleen", "kidney_left", "kidney_right", "heart"),
    ("pancreas", "liver"),
    ("stomach_bowel",),
    ("lung_left", "lung_right"),
    ("vertebrae",),
    ("spinal_canal",),
    ("aorta_abdominal",),
    ("inferior_vena_cava",),
    ("autochthon_left",),
    ("autochthon_right",),
    ("iliopsoas_left",),
    ("iliopsoas_right",),
)


def default_schema() -> OrganSchema:
    """The built-in 17-organ schema (9 Type 1, 8 Type 2), codes 1..17."""
    organs = tuple(
        OrganDef(name=n, label_code=i + 1, organ_type=t, paired_side=s)
        for i, (n, t, s) in enumerate(_DEFAULT_ORGANS)
    )
    return OrganSchema(organs=organs, merge_rules=_DEFAULT_MERGES,
                       priority_tiers=_DEFAULT_TIERS)


def schema_to_dict(schema: OrganSchema) -> dict:
    return {
        "organs": [
            {"name": o.name, "label_code": o.label_code,
             "organ_type": o.organ_type, "paired_side": o.paired_side}
            for o in schema.organs
        ],
        "merge_rules": [
            {"sources": list(r.sources), "target": r.target}
            for r in schema.merge_rules
        ],
        "priority_tiers": [list(t) for t in schema.priority_tiers],
    }


def schema_from_dict(doc: dict) -> OrganSchema:
    try:
        organs = tuple(
            OrganDef(name=o["name"], label_code=int(o["label_code"]),
                     organ_type=o["organ_type"],
                     paired_side=o.get("paired_side", "none"))
            for o in doc["organs"]
        )
        merges = tuple(
            MergeRule(sources=tuple(r["sources"]), target=r["target"])
            for r in doc.get("merge_rules", [])
        )
        tiers = tuple(tuple(t) for t in doc.get("priority_tiers", []))
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema document: {exc}") from exc
    return OrganSchema(organs=organs, merge_rules=merges, priority_tiers=tiers)


def load_schema(path_or_name) -> OrganSchema:
    """Load a schema JSON file; the name "default" returns the built-in one."""
    if str(path_or_name) in ("", "default"):
        return default_schema()
    with open(path_or_name, "r", encoding="utf-8") as f:
        return schema_from_dict(json.load(f))


def save_schema(schema: OrganSchema, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(schema_to_dict(schema), f, indent=2)
        f.write("\n")
