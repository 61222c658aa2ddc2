"""Nonparametric statistics for the study protocol.

Paired Wilcoxon signed-rank and unpaired Wilcoxon rank-sum (Mann-Whitney)
tests, both two-sided with midranks for ties. Small samples use exact
permutation distributions (sign flips / group assignments, enumerated with
the observed ranks, ties included); larger samples fall back to the normal
approximation with tie-corrected variance and a 0.5 continuity correction.
Bonferroni correction, significance stars, subgroup robustness analysis,
and deterministic patient-level split generation live here too.

Randomness: splits shuffle patients with numpy's default PCG64 generator
seeded explicitly, so identical inputs and seeds reproduce byte-identical
plans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError, SplitError
from .manifest import Manifest

SIGNED_RANK_EXACT_MAX_N = 25   # exact sign-flip enumeration up to this n_effective
RANK_SUM_EXACT_MAX_N = 20      # exact assignment enumeration up to this n + m

AGE_GROUPS = ("0-2", "3-4", "5-6", "7+")
SUBGROUP_DIMENSIONS = ("sex", "tumor_type", "iv_contrast", "age_group")
DEFAULT_DESCRIPTIVE_ONLY = ("iv_contrast",)

BUCKETS = ("train", "val", "test")


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    n_effective: int


@dataclass(frozen=True)
class PairedSample:
    labels: tuple[str, ...]
    a: tuple[float, ...]
    b: tuple[float, ...]

    def __post_init__(self):
        if not (len(self.labels) == len(self.a) == len(self.b)):
            raise InputError("PairedSample fields must have equal lengths")
        if len(self.a) < 1:
            raise InputError("PairedSample needs at least one pair")


@dataclass(frozen=True)
class SignificanceLevel:
    stars: str
    adjusted: bool = False


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties given the mean of the ranks they span."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _tie_term(values: np.ndarray) -> float:
    """Sum of t^3 - t over tie groups."""
    _, counts = np.unique(values, return_counts=True)
    return float(np.sum(counts.astype(np.float64) ** 3 - counts))


def _normal_two_sided(stat: float, mean: float, var: float) -> float:
    if var <= 0:
        return 1.0
    z = (stat - mean + 0.5) / math.sqrt(var)
    p = math.erfc(-z / math.sqrt(2.0))  # 2 * Phi(z)
    return min(1.0, max(p, 1e-300))


def _doubled_int_ranks(ranks: np.ndarray) -> np.ndarray:
    """Midranks are multiples of 0.5; double to exact integers."""
    doubled = np.rint(ranks * 2.0).astype(np.int64)
    if not np.allclose(doubled, ranks * 2.0):
        raise InputError("ranks are not half-integers")  # cannot happen
    return doubled


def wilcoxon_signed_rank(a, b) -> TestResult:
    """Two-sided Wilcoxon signed-rank test on paired samples.

    Zero differences are discarded (classic zero handling); the statistic is
    W = min(W+, W-). For n_effective <= 25 the p-value enumerates all
    2^n_effective sign assignments over the observed midranks; beyond that
    the tie-corrected normal approximation with continuity correction is
    used. n_effective = 0 yields p = 1.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise InputError(f"paired samples must be equal-length vectors, "
                         f"got {a.shape} and {b.shape}")
    if a.size < 1:
        raise InputError("need at least one pair")
    d = a - b
    d = d[d != 0.0]
    n = int(d.size)
    if n == 0:
        return TestResult(0.0, 1.0, "signed_rank_exact", 0)
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    w = min(w_plus, w_minus)
    if n <= SIGNED_RANK_EXACT_MAX_N:
        p = _signed_rank_exact_p(ranks, w)
        return TestResult(w, p, "signed_rank_exact", n)
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(np.abs(d)) / 48.0
    return TestResult(w, _normal_two_sided(w, mean, var), "signed_rank_normal", n)


def _signed_rank_exact_p(ranks: np.ndarray, w: float) -> float:
    """P(min(W+, W-) <= w) under uniformly random sign assignments."""
    r2 = _doubled_int_ranks(ranks)
    total2 = int(r2.sum())
    # subset-sum distribution of doubled W+ over all sign patterns
    freq = np.zeros(total2 + 1, dtype=np.float64)
    freq[0] = 1.0
    for r in r2:
        freq[r:] += freq[:-r]  # numpy buffers the overlapping operands
    w2 = int(round(2.0 * w))
    low = freq[: w2 + 1].sum()
    high = freq[max(total2 - w2, 0):].sum()
    overlap = 0.0
    if total2 - w2 <= w2:
        overlap = freq[max(total2 - w2, 0): w2 + 1].sum()
    count = low + high - overlap
    p = count / (2.0 ** len(r2))
    return float(min(1.0, max(p, 1e-300)))


def wilcoxon_rank_sum(x, y) -> TestResult:
    """Two-sided Wilcoxon rank-sum (Mann-Whitney U) test.

    The statistic is U = min(U_x, U_y) computed from midranks. For
    n + m <= 20 the p-value enumerates all C(n+m, n) group assignments of
    the observed ranks; beyond that the tie-corrected normal approximation
    with continuity correction is used.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1 or x.size < 1 or y.size < 1:
        raise InputError("both groups must be non-empty vectors")
    n, m = int(x.size), int(y.size)
    combined = np.concatenate([x, y])
    ranks = _midranks(combined)
    r_x = float(ranks[:n].sum())
    u_x = r_x - n * (n + 1) / 2.0
    u_y = n * m - u_x
    u = min(u_x, u_y)
    if n + m <= RANK_SUM_EXACT_MAX_N:
        p = _rank_sum_exact_p(ranks, n, u)
        return TestResult(u, p, "rank_sum_exact", n + m)
    total = n + m
    tie = _tie_term(combined)
    var = n * m / 12.0 * ((total + 1) - tie / (total * (total - 1)))
    return TestResult(u, _normal_two_sided(u, n * m / 2.0, var),
                      "rank_sum_normal", n + m)


def _rank_sum_exact_p(ranks: np.ndarray, n: int, u: float) -> float:
    """P(min(U_x, U_y) <= u) over all C(n+m, n) assignments of the ranks."""
    r2 = _doubled_int_ranks(ranks)
    total = len(r2)
    m = total - n
    total2 = int(r2.sum())
    # dp[k][s] = number of k-subsets of the doubled ranks summing to s
    dp = np.zeros((n + 1, total2 + 1), dtype=np.float64)
    dp[0, 0] = 1.0
    for r in r2:
        for k in range(n, 0, -1):
            dp[k, r:] += dp[k - 1, :-r]
    counts = dp[n]
    u2 = int(round(2.0 * u))
    base2 = n * (n + 1)  # doubled n(n+1)/2
    # subset sum s2 gives doubled U_x = s2 - base2
    lo_cut = base2 + u2                      # U_x <= u
    hi_cut = 2 * n * m - u2 + base2          # U_x >= nm - u
    s = np.arange(total2 + 1)
    select = (s <= lo_cut) | (s >= hi_cut)
    count = counts[select].sum()
    p = count / math.comb(total, n)
    return float(min(1.0, max(p, 1e-300)))


def bonferroni(p_values, m: int | None = None) -> list[float]:
    """Bonferroni adjustment: min(1, p * m), order preserved."""
    p_values = list(p_values)
    for p in p_values:
        if not (0.0 < p <= 1.0):
            raise InputError(f"p-values must lie in (0, 1], got {p}")
    if m is None:
        m = len(p_values)
    elif m < len(p_values):
        raise InputError(f"family size {m} smaller than {len(p_values)} p-values")
    return [min(1.0, p * m) for p in p_values]


def star_label(p: float) -> str:
    if not (0.0 < p <= 1.0):
        raise InputError(f"p-value must lie in (0, 1], got {p}")
    if p <= 0.0001:
        return "****"
    if p <= 0.001:
        return "***"
    if p <= 0.01:
        return "**"
    if p <= 0.05:
        return "*"
    return "ns"


def stars(p: float, adjusted: bool = False) -> SignificanceLevel:
    """Significance stars for a (possibly adjusted) p-value."""
    return SignificanceLevel(stars=star_label(p), adjusted=adjusted)


# ---------------------------------------------------------------------------
# subgroup robustness analysis

@dataclass(frozen=True)
class GroupSummary:
    name: str
    n: int
    mean: float
    sd: float

    def to_dict(self) -> dict:
        return {"name": self.name, "n": self.n, "mean": self.mean, "sd": self.sd}


@dataclass(frozen=True)
class PairwiseComparison:
    group_a: str
    group_b: str
    p_raw: float
    p_adjusted: float
    stars: str
    method: str

    def to_dict(self) -> dict:
        return {"group_a": self.group_a, "group_b": self.group_b,
                "p_raw": self.p_raw, "p_adjusted": self.p_adjusted,
                "stars": self.stars, "method": self.method}


@dataclass(frozen=True)
class OrganComparison:
    organ: str
    groups: tuple[GroupSummary, ...]
    comparisons: tuple[PairwiseComparison, ...]
    note: str = ""

    def to_dict(self) -> dict:
        d = {"organ": self.organ,
             "groups": [g.to_dict() for g in self.groups],
             "comparisons": [c.to_dict() for c in self.comparisons]}
        if self.note:
            d["note"] = self.note
        return d


@dataclass(frozen=True)
class ComparisonReport:
    metric: str
    dimension: str
    organs: tuple[OrganComparison, ...]
    family_size: int
    convention_notes: str

    def to_dict(self) -> dict:
        return {"metric": self.metric, "dimension": self.dimension,
                "organs": [o.to_dict() for o in self.organs],
                "family_size": self.family_size,
                "convention_notes": self.convention_notes}


def _sample_sd(values: list[float]) -> float:
    if len(values) <= 1:
        return 0.0
    return float(np.std(np.asarray(values, dtype=np.float64), ddof=1))


def _group_of(case, dimension: str) -> str | None:
    if dimension == "sex":
        return case.sex if case.sex in ("male", "female") else None
    if dimension == "tumor_type":
        return case.tumor_type if case.tumor_type in ("renal", "neuroblastoma") else None
    if dimension == "iv_contrast":
        return case.iv_contrast if case.iv_contrast in ("yes", "no") else None
    if dimension == "age_group":
        return case.age_group()
    raise InputError(f"unknown subgroup dimension {dimension!r}")


def _dimension_group_order(dimension: str) -> tuple[str, ...]:
    return {
        "sex": ("male", "female"),
        "tumor_type": ("renal", "neuroblastoma"),
        "iv_contrast": ("yes", "no"),
        "age_group": AGE_GROUPS,
    }[dimension]


def _metric_value(row, metric: str) -> float | None:
    return {"dsc": row.dsc, "hd95": row.hd95_mm, "msd": row.msd_mm}[metric]


def subgroup_analysis(metric_rows, manifest: Manifest, dimension: str,
                      metric: str = "dsc", min_n: int = 3,
                      descriptive_only=DEFAULT_DESCRIPTIVE_ONLY,
                      ) -> ComparisonReport:
    """Per-organ pairwise rank-sum tests across one subgroup dimension.

    Cases are partitioned by the dimension; every unordered pair of groups
    with at least ``min_n`` values on both sides is tested, and p-values are
    Bonferroni-adjusted within the organ's comparison family. Dimensions in
    ``descriptive_only`` emit group summaries without tests.
    """
    if dimension not in SUBGROUP_DIMENSIONS:
        raise InputError(f"unknown subgroup dimension {dimension!r}; "
                         f"expected one of {SUBGROUP_DIMENSIONS}")
    if metric not in ("dsc", "hd95", "msd"):
        raise InputError(f"metric must be dsc/hd95/msd, got {metric!r}")
    case_group = {}
    for case in manifest:
        group = _group_of(case, dimension)
        if group is not None:
            case_group[case.case_id] = group

    known_ids = set(manifest.case_ids())
    # organ -> group -> values
    by_organ: dict[str, dict[str, list[float]]] = {}
    for row in metric_rows:
        if row.case_id not in case_group:
            if row.case_id not in known_ids:
                raise InputError(f"metric row for unknown case {row.case_id!r}")
            continue
        value = _metric_value(row, metric)
        if value is None:
            continue
        by_organ.setdefault(row.organ, {}).setdefault(
            case_group[row.case_id], []).append(float(value))

    order = _dimension_group_order(dimension)
    descriptive = dimension in descriptive_only
    organ_blocks = []
    max_family = 0
    for organ in sorted(by_organ):
        groups = by_organ[organ]
        summaries = tuple(
            GroupSummary(g, len(groups[g]), float(np.mean(groups[g])),
                         _sample_sd(groups[g]))
            for g in order if g in groups
        )
        pairs = []
        if not descriptive:
            present = [g for g in order if len(groups.get(g, ())) >= min_n]
            for i in range(len(present)):
                for j in range(i + 1, len(present)):
                    pairs.append((present[i], present[j]))
        raw = []
        methods = []
        for ga, gb in pairs:
            result = wilcoxon_rank_sum(groups[ga], groups[gb])
            raw.append(result.p_value)
            methods.append(result.method)
        adjusted = bonferroni(raw) if raw else []
        comparisons = tuple(
            PairwiseComparison(ga, gb, p, padj, star_label(padj), meth)
            for (ga, gb), p, padj, meth in zip(pairs, raw, adjusted, methods)
        )
        max_family = max(max_family, len(comparisons))
        note = "descriptive only (no tests for this dimension)" if descriptive else ""
        organ_blocks.append(OrganComparison(organ, summaries, comparisons, note))

    notes = (
        "two-sided Wilcoxon rank-sum with midranks; Bonferroni family = "
        "pairwise comparisons within one organ x one dimension; stars from "
        "adjusted p-values"
    )
    if descriptive:
        notes += f"; dimension {dimension!r} is descriptive-only"
    return ComparisonReport(metric=metric, dimension=dimension,
                            organs=tuple(organ_blocks), family_size=max_family,
                            convention_notes=notes)


# ---------------------------------------------------------------------------
# split generation

@dataclass(frozen=True)
class SplitPlan:
    assignments: dict[str, str]
    seed: int
    ratio: tuple[int, int, int]
    stratify: tuple[str, ...] = ()

    def bucket_cases(self, bucket: str) -> list[str]:
        return [c for c, b in self.assignments.items() if b == bucket]

    def to_dict(self) -> dict:
        return {"seed": self.seed, "ratio": list(self.ratio),
                "stratify": list(self.stratify),
                "assignments": dict(sorted(self.assignments.items()))}


def largest_remainder_targets(total: int, ratio) -> list[int]:
    """Integer bucket sizes proportional to ratio, summing exactly to total."""
    ratio = [int(r) for r in ratio]
    if any(r <= 0 for r in ratio):
        raise InputError(f"ratio components must be positive, got {ratio}")
    denom = sum(ratio)
    quotas = [total * r / denom for r in ratio]
    floors = [int(math.floor(q)) for q in quotas]
    leftover = total - sum(floors)
    remainders = sorted(range(len(ratio)), key=lambda i: (-(quotas[i] - floors[i]), i))
    for i in remainders[:leftover]:
        floors[i] += 1
    return floors


def _patient_stratum(cases, stratify) -> tuple:
    first = cases[0]
    key = []
    for dim in stratify:
        if dim == "age_group":
            key.append(first.age_group())
        elif dim == "dataset":
            key.append(first.dataset)
        elif dim in ("sex", "tumor_type", "iv_contrast"):
            key.append(getattr(first, dim))
        else:
            raise InputError(f"unknown stratification dimension {dim!r}")
    return tuple(key)


def make_split(manifest: Manifest, ratio, seed: int, stratify=()) -> SplitPlan:
    """Deterministic patient-level train/val/test split.

    Patients are shuffled (PCG64 seeded with ``seed``) within strata and
    assigned greedily to the bucket with the greatest relative deficit, so
    final case counts hit the largest-remainder targets exactly and no
    patient straddles buckets. Raises SplitError when a patient's case count
    cannot fit any remaining bucket capacity.
    """
    ratio = tuple(int(r) for r in ratio)
    if len(ratio) != 3:
        raise InputError(f"ratio must have three components, got {ratio}")
    targets = largest_remainder_targets(len(manifest), ratio)

    patients: dict[str, list] = {}
    for case in manifest:
        patients.setdefault(case.patient_id, []).append(case)

    strata: dict[tuple, list[str]] = {}
    for pid, cases in patients.items():
        strata.setdefault(_patient_stratum(cases, stratify), []).append(pid)

    rng = np.random.default_rng(seed)
    ordered_patients: list[str] = []
    for key in sorted(strata):
        ids = strata[key]
        ordered_patients.extend(ids[i] for i in rng.permutation(len(ids)))
    # place multi-scan patients first (stable, so single-case order is the
    # pure shuffle); greedy cannot strand them behind singletons then
    ordered_patients.sort(key=lambda pid: -len(patients[pid]))

    deficits = list(targets)
    assignments: dict[str, str] = {}
    for pid in ordered_patients:
        need = len(patients[pid])
        feasible = [i for i in range(3) if deficits[i] >= need]
        if not feasible:
            raise SplitError(
                f"patient {pid!r} has {need} cases but remaining bucket "
                f"capacities are {deficits} (ratio {ratio} infeasible)")
        best = max(feasible, key=lambda i: (deficits[i] / targets[i] if targets[i] else 0.0, -i))
        for case in patients[pid]:
            assignments[case.case_id] = BUCKETS[best]
        deficits[best] -= need
    return SplitPlan(assignments=assignments, seed=int(seed), ratio=ratio,
                     stratify=tuple(stratify))


def make_cv_folds(manifest: Manifest, k: int, ratio, seed: int,
                  stratify=()) -> list[SplitPlan]:
    """k independent seeded splits (seed + fold index), not rotating folds."""
    if k < 2:
        raise InputError(f"k must be >= 2, got {k}")
    return [make_split(manifest, ratio, seed + i, stratify) for i in range(k)]
