"""Aggregation of metric tables and Likert review scores.

Summary statistics use the sample SD (n-1 denominator, 0 for a single
value). Quartiles are Tukey hinges: the median splits the sorted data into
halves that both include it when n is odd, and each hinge is the median of
its half. Box-plot whiskers follow the 1.5 IQR rule clamped to the data.
Both conventions are named in the exported metadata.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .metrics import (MetricRow, STATUS_EMPTY_PRED, STATUS_EVALUATED,
                      STATUS_EXCLUDED, STATUS_MASKED)

QUARTILE_RULE = "tukey_hinges"
WHISKER_RULE = "1.5*IQR clamped to data"

USABILITY_ACCEPTABLE = "acceptable_minor_mods"   # combined mean >= 4
USABILITY_USABLE = "clinically_usable"           # combined mean >= 3
USABILITY_NOT_USABLE = "not_usable"              # combined mean < 3


@dataclass(frozen=True)
class MetricStats:
    n: int
    mean: float
    sd: float
    quartiles: tuple[float, float, float, float, float]  # min, q1, median, q3, max

    def to_dict(self) -> dict:
        qmin, q1, med, q3, qmax = self.quartiles
        return {"n": self.n, "mean": self.mean, "sd": self.sd,
                "min": qmin, "q1": q1, "median": med, "q3": q3, "max": qmax}


@dataclass(frozen=True)
class OrganSummary:
    organ: str
    n_evaluated: int
    n_excluded: int
    n_empty_prediction: int
    dsc: MetricStats | None
    hd95_mm: MetricStats | None
    msd_mm: MetricStats | None

    def to_dict(self) -> dict:
        return {
            "organ": self.organ,
            "n_evaluated": self.n_evaluated,
            "n_excluded": self.n_excluded,
            "n_empty_prediction": self.n_empty_prediction,
            "dsc": self.dsc.to_dict() if self.dsc else None,
            "hd95_mm": self.hd95_mm.to_dict() if self.hd95_mm else None,
            "msd_mm": self.msd_mm.to_dict() if self.msd_mm else None,
        }


def sample_sd(values) -> float:
    v = np.asarray(values, dtype=np.float64)
    if v.size <= 1:
        return 0.0
    return float(np.std(v, ddof=1))


def tukey_quartiles(values) -> tuple[float, float, float, float, float]:
    """(min, q1, median, q3, max) with hinges = medians of the inclusive halves."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    n = v.size
    if n == 0:
        raise ValueError("quartiles of empty data")
    med = float(np.median(v))
    half = (n + 1) // 2  # halves include the median position when n is odd
    q1 = float(np.median(v[:half]))
    q3 = float(np.median(v[n - half:]))
    return float(v[0]), q1, med, q3, float(v[-1])


def _stats_of(values) -> MetricStats | None:
    if not values:
        return None
    return MetricStats(n=len(values), mean=float(np.mean(values)),
                       sd=sample_sd(values), quartiles=tukey_quartiles(values))


def summarize(rows: list[MetricRow]) -> list[OrganSummary]:
    """Per-organ summary statistics over a metric table.

    Excluded and empty-prediction rows are counted separately from evaluated
    ones; the DSC 0 of an empty prediction participates in DSC statistics
    but not in the distance statistics.
    """
    organs: dict[str, dict] = {}
    for row in rows:
        slot = organs.setdefault(row.organ, {
            "evaluated": 0, "excluded": 0, "empty": 0,
            "dsc": [], "hd95": [], "msd": [],
        })
        if row.status == STATUS_EXCLUDED:
            slot["excluded"] += 1
            continue
        if row.status == STATUS_EMPTY_PRED:
            slot["empty"] += 1
            slot["dsc"].append(float(row.dsc))
            continue
        if row.status in (STATUS_EVALUATED, STATUS_MASKED):
            slot["evaluated"] += 1
            slot["dsc"].append(float(row.dsc))
            slot["hd95"].append(float(row.hd95_mm))
            slot["msd"].append(float(row.msd_mm))
    out = []
    for organ in sorted(organs):
        s = organs[organ]
        out.append(OrganSummary(
            organ=organ,
            n_evaluated=s["evaluated"],
            n_excluded=s["excluded"],
            n_empty_prediction=s["empty"],
            dsc=_stats_of(s["dsc"]),
            hd95_mm=_stats_of(s["hd95"]),
            msd_mm=_stats_of(s["msd"]),
        ))
    return out


def write_summary_json(summaries: list[OrganSummary], path) -> None:
    doc = {"quartile_rule": QUARTILE_RULE,
           "organs": [s.to_dict() for s in summaries]}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


def write_summary_csv(summaries: list[OrganSummary], path) -> None:
    cols = ["organ", "n_evaluated", "n_excluded", "n_empty_prediction",
            "dsc_mean", "dsc_sd", "hd95_mean", "hd95_sd", "msd_mean", "msd_sd"]
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f)
        w.writerow(cols)
        for s in summaries:
            w.writerow([
                s.organ, s.n_evaluated, s.n_excluded, s.n_empty_prediction,
                *(("", "") if s.dsc is None else (repr(s.dsc.mean), repr(s.dsc.sd))),
                *(("", "") if s.hd95_mm is None else (repr(s.hd95_mm.mean), repr(s.hd95_mm.sd))),
                *(("", "") if s.msd_mm is None else (repr(s.msd_mm.mean), repr(s.msd_mm.sd))),
            ])


# ---------------------------------------------------------------------------
# box-plot export

@dataclass(frozen=True)
class BoxGroup:
    keys: dict[str, str]
    q1: float
    median: float
    q3: float
    whisker_lo: float
    whisker_hi: float
    outliers: tuple[float, ...]
    n: int

    def to_dict(self) -> dict:
        return {"keys": dict(self.keys), "q1": self.q1, "median": self.median,
                "q3": self.q3, "whisker_lo": self.whisker_lo,
                "whisker_hi": self.whisker_hi,
                "outliers": list(self.outliers), "n": self.n}


def box_stats(values) -> dict:
    """Five-number box with 1.5 IQR whiskers clamped to the data."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    _, q1, med, q3, _ = tukey_quartiles(v)
    iqr = q3 - q1
    lo_fence = q1 - 1.5 * iqr
    hi_fence = q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    whisker_lo = float(inside[0]) if inside.size else q1
    whisker_hi = float(inside[-1]) if inside.size else q3
    outliers = tuple(float(x) for x in v[(v < whisker_lo) | (v > whisker_hi)])
    return {"q1": q1, "median": med, "q3": q3, "whisker_lo": whisker_lo,
            "whisker_hi": whisker_hi, "outliers": outliers, "n": int(v.size)}


def boxplot_export(rows: list[MetricRow], metric: str = "dsc",
                   group_by: tuple[str, ...] = ("organ",),
                   extra_keys: dict[str, dict[str, str]] | None = None) -> dict:
    """Machine-readable grouped box-plot data for a metric table.

    ``group_by`` names the grouping keys: "organ" comes from the row, and
    other keys (model, dataset) are looked up per case_id in ``extra_keys``.
    Empty groups are omitted and listed under "omitted".
    """
    getter = {"dsc": lambda r: r.dsc, "hd95": lambda r: r.hd95_mm,
              "msd": lambda r: r.msd_mm}[metric]
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        value = getter(row)
        if value is None:
            continue
        key = []
        for dim in group_by:
            if dim == "organ":
                key.append(row.organ)
            else:
                key.append((extra_keys or {}).get(row.case_id, {}).get(dim, ""))
        groups.setdefault(tuple(key), []).append(float(value))

    out_groups, omitted = [], []
    for key in sorted(groups):
        values = groups[key]
        keys = dict(zip(group_by, key))
        if not values:
            omitted.append({"keys": keys, "note": "empty group"})
            continue
        stats = box_stats(values)
        out_groups.append(BoxGroup(keys=keys, **stats).to_dict())
    return {"metric": metric, "quartile_rule": QUARTILE_RULE,
            "whisker_rule": WHISKER_RULE, "groups": out_groups,
            "omitted": omitted}


# ---------------------------------------------------------------------------
# Likert review aggregation

@dataclass(frozen=True)
class LikertRecord:
    case_id: str
    organ: str
    rater_id: str
    score: int
    timestamp: float = field(default_factory=time.time)
    comment: str = ""

    def __post_init__(self):
        if not isinstance(self.score, int) or not 1 <= self.score <= 5:
            raise ValidationError(f"Likert score must be an integer in 1..5, "
                                  f"got {self.score!r}")
        if not self.case_id or not self.organ or not self.rater_id:
            raise ValidationError("LikertRecord needs case_id, organ, rater_id")

    def to_dict(self) -> dict:
        return {"case_id": self.case_id, "organ": self.organ,
                "rater_id": self.rater_id, "score": self.score,
                "timestamp": self.timestamp, "comment": self.comment}


@dataclass(frozen=True)
class RaterStats:
    rater_id: str
    n: int
    mean: float
    sd: float

    def to_dict(self) -> dict:
        return {"rater_id": self.rater_id, "n": self.n,
                "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class LikertSummary:
    organ: str
    raters: tuple[RaterStats, ...]
    combined_mean: float
    usability: str
    n_cases: int
    n_scores: int
    disagreement: bool

    def to_dict(self) -> dict:
        return {"organ": self.organ,
                "raters": [r.to_dict() for r in self.raters],
                "combined_mean": self.combined_mean,
                "usability": self.usability,
                "n_cases": self.n_cases,
                "n_scores": self.n_scores,
                "disagreement": self.disagreement}


def usability_of(combined_mean: float) -> str:
    if combined_mean >= 4.0:
        return USABILITY_ACCEPTABLE
    if combined_mean >= 3.0:
        return USABILITY_USABLE
    return USABILITY_NOT_USABLE


def likert_summarize(records: list[LikertRecord]) -> list[LikertSummary]:
    """Per-organ Likert aggregation.

    The combined mean pools every (case, rater) score. Usability thresholds:
    >= 4 acceptable with minor modifications, >= 3 clinically usable,
    < 3 not usable. Raters whose per-organ means differ by more than 1.0
    raise the disagreement flag.
    """
    by_organ: dict[str, list[LikertRecord]] = {}
    for rec in records:
        by_organ.setdefault(rec.organ, []).append(rec)
    out = []
    for organ in sorted(by_organ):
        recs = by_organ[organ]
        by_rater: dict[str, list[int]] = {}
        for rec in recs:
            by_rater.setdefault(rec.rater_id, []).append(rec.score)
        raters = tuple(
            RaterStats(rater_id=r, n=len(scores),
                       mean=float(np.mean(scores)), sd=sample_sd(scores))
            for r, scores in sorted(by_rater.items())
        )
        all_scores = [rec.score for rec in recs]
        combined = float(np.mean(all_scores))
        means = [r.mean for r in raters]
        disagreement = (max(means) - min(means)) > 1.0 if len(means) > 1 else False
        out.append(LikertSummary(
            organ=organ, raters=raters, combined_mean=combined,
            usability=usability_of(combined),
            n_cases=len({rec.case_id for rec in recs}),
            n_scores=len(all_scores), disagreement=disagreement))
    return out


def append_likert_record(record: LikertRecord, path) -> None:
    """Append one record to the JSON-lines scores file."""
    with open(path, "a", encoding="utf-8") as f:
        f.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")


def load_likert_records(path) -> list[LikertRecord]:
    """Replay a JSON-lines scores file; invalid records raise ValidationError."""
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
                score = doc["score"]
                if isinstance(score, bool) or not isinstance(score, int):
                    raise ValidationError(f"score {score!r} is not an integer")
                records.append(LikertRecord(
                    case_id=doc["case_id"], organ=doc["organ"],
                    rater_id=doc["rater_id"], score=score,
                    timestamp=float(doc.get("timestamp", 0.0)),
                    comment=str(doc.get("comment", ""))))
            except (KeyError, TypeError, json.JSONDecodeError) as exc:
                raise ValidationError(f"{path}:{line_no}: bad score record: {exc}")
    return records
