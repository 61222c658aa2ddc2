"""The study's statistical protocol.

Exact Wilcoxon tests, Bonferroni correction with significance stars,
subgroup robustness across age groups, and deterministic patient-level
splits (189 cases -> 132/21/36).
"""

import numpy as np

from oar_evalkit import (CaseRecord, Manifest, MetricRow, bonferroni,
                         make_cv_folds, make_split, stars, subgroup_analysis,
                         wilcoxon_rank_sum, wilcoxon_signed_rank)

# paired comparison of two models over the same cases (exact branch)
model_a = [0.91, 0.88, 0.95, 0.90, 0.87, 0.93, 0.89, 0.92]
model_b = [0.89, 0.86, 0.94, 0.88, 0.86, 0.91, 0.88, 0.90]
result = wilcoxon_signed_rank(model_a, model_b)
print(f"signed-rank: W={result.statistic} p={result.p_value:.4f} "
      f"({result.method}, n_eff={result.n_effective})")

# unpaired comparison of two groups
young = [0.78, 0.81, 0.75, 0.80]
older = [0.88, 0.91, 0.86, 0.90, 0.87]
result = wilcoxon_rank_sum(young, older)
print(f"rank-sum:    U={result.statistic} p={result.p_value:.4f} "
      f"({result.method})")

# Bonferroni over the six pairwise age comparisons, then stars
raw = [0.004, 0.03, 0.2, 0.008, 0.5, 0.001]
adjusted = bonferroni(raw)
for p, padj in zip(raw, adjusted):
    print(f"  raw p={p:<6} adjusted={padj:<6} -> {stars(padj, adjusted=True).stars}")

# subgroup robustness: metric rows + manifest demographics -> report
rng = np.random.default_rng(3)
cases, rows = [], []
for i in range(40):
    age = float(rng.uniform(0, 12))
    cases.append(CaseRecord(case_id=f"c{i}", patient_id=f"p{i}",
                            image_path="x.nii", age_years=age,
                            sex="male" if i % 2 else "female"))
    rows.append(MetricRow(f"c{i}", "pancreas",
                          float(np.clip(0.55 + 0.02 * age + rng.normal(0, 0.05),
                                        0, 1)),
                          3.0, 1.5, "evaluated", 100, 100))
report = subgroup_analysis(rows, Manifest(tuple(cases)), "age_group",
                           metric="dsc")
block = report.organs[0]
print(f"age-group analysis: {len(block.groups)} groups, "
      f"{len(block.comparisons)} pairwise tests (family {report.family_size})")
for c in block.comparisons:
    print(f"  {c.group_a} vs {c.group_b}: adj p={c.p_adjusted:.4f} {c.stars}")

# the study split: 189 single-scan patients at 132:21:36, seeded
manifest = Manifest(tuple(CaseRecord(case_id=f"s{i}", patient_id=f"q{i}",
                                     image_path="x.nii")
                          for i in range(189)))
plan = make_split(manifest, (132, 21, 36), seed=42)
sizes = {b: len(plan.bucket_cases(b)) for b in ("train", "val", "test")}
print(f"split sizes: {sizes} (deterministic under seed 42)")

folds = make_cv_folds(manifest, k=5, ratio=(64, 16, 20), seed=7)
print(f"5-fold CV: {len(folds)} independent seeded splits, "
      f"test sizes {[len(f.bucket_cases('test')) for f in folds]}")
