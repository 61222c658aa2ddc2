"""oar-evalkit: evaluation toolkit for pediatric multi-organ CT auto-contouring.

Submodules
----------
volume     3D label/image containers, nearest-neighbor regridding
nifti      NIfTI-1 reader/writer
manifest   study manifest (cases, demographics, file paths)
schema     17-organ catalog, merge rules, priority tiers
harmonize  label merging, overlap resolution, complementation, filtering
metrics    DSC / HD95 / MSD, masked evaluation, nephrectomy FPR
stats      Wilcoxon tests, Bonferroni, subgroup analysis, split generation
report     per-organ summaries, box-plot export, Likert aggregation
review     HTTP service hosting the clinician Likert review
cli        command-line entry point
"""

__version__ = "0.1.0"

from .harmonize import (complement_missing, filter_cases,
                        keep_largest_component, merge_labels,
                        resolve_overlaps)
from .manifest import CaseRecord, Manifest, load_manifest
from .metrics import (MetricRow, dsc, edt, evaluate_case, extract_surface,
                      fpr_absent_organ, hd95, msd, surface_distances)
from .nifti import read_nifti, write_nifti
from .report import likert_summarize, summarize
from .schema import OrganSchema, default_schema
from .stats import (bonferroni, make_cv_folds, make_split, stars,
                    subgroup_analysis, wilcoxon_rank_sum,
                    wilcoxon_signed_rank)
from .volume import Grid, ImageVolume, LabelVolume, resample_labels_nearest

__all__ = [
    "CaseRecord",
    "Grid",
    "ImageVolume",
    "LabelVolume",
    "Manifest",
    "MetricRow",
    "OrganSchema",
    "bonferroni",
    "complement_missing",
    "default_schema",
    "dsc",
    "edt",
    "evaluate_case",
    "extract_surface",
    "filter_cases",
    "fpr_absent_organ",
    "hd95",
    "keep_largest_component",
    "likert_summarize",
    "load_manifest",
    "make_cv_folds",
    "make_split",
    "merge_labels",
    "msd",
    "read_nifti",
    "resample_labels_nearest",
    "resolve_overlaps",
    "stars",
    "subgroup_analysis",
    "summarize",
    "surface_distances",
    "wilcoxon_rank_sum",
    "wilcoxon_signed_rank",
    "write_nifti",
    "__version__",
]
