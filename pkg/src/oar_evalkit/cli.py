"""Command-line entry point: oar-evalkit.

Subcommands: harmonize, evaluate, compare, subgroup, split, postprocess,
review (select/serve), schema. Exit codes: 0 success, 1 validation,
2 I/O, 3 computation. With --json-errors failures are emitted as one JSON
object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import harmonize as hz
from . import metrics as mx
from . import report as rp
from . import stats as st
from .errors import (EvalkitError, FormatError, GeometryError, InputError,
                     LabelFormatError, SchemaError, UnknownStructureError,
                     ValidationError)
from .manifest import (AUX_PREFIX, MULTILABEL_KEY, Manifest, load_manifest,
                       manifest_to_dict)
from .nifti import read_grid, read_label_volume, write_nifti
from .review import DEFAULT_LEVEL, DEFAULT_WINDOW, ReviewService, serve_forever
from .schema import default_schema, load_schema, save_schema, schema_to_dict
from .volume import resample_labels_nearest

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_COMPUTE = 3


def _thread_count(args) -> int:
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("OAR_EVALKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(4, os.cpu_count() or 1)


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _load_schema_for(args, manifest=None):
    if getattr(args, "schema", None):
        return load_schema(args.schema)
    if manifest is not None and manifest.schema_ref not in ("", "default"):
        return load_schema(manifest.schema_ref)
    return default_schema()


def _write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, indent=2, sort_keys=True)
        f.write("\n")


# ---------------------------------------------------------------------------
# harmonize

def _case_mask_sets(case, schema, base_dir):
    """Load and merge one case's clinical and auxiliary mask sets."""
    clinical_sources, aux_sources = [], []
    grid = None
    for key, rel_path in sorted(case.label_paths.items()):
        is_aux = key.startswith(AUX_PREFIX)
        name = key[len(AUX_PREFIX):] if is_aux else key
        volume = read_label_volume(_resolve(base_dir, rel_path))
        if grid is None:
            grid = volume.grid
        else:
            grid.require_same_lattice(volume.grid, f"case {case.case_id} label {key!r}")
        bucket = aux_sources if is_aux else clinical_sources
        if name == MULTILABEL_KEY:
            for organ_name, mask in hz.decompose_labels(volume, schema).items():
                bucket.append((mask, organ_name))
        else:
            bucket.append((volume.voxels != 0, name))
    if grid is None:
        raise ValidationError(f"case {case.case_id} has no label_paths")
    clinical = hz.merge_labels(clinical_sources, schema, grid) if clinical_sources else {}
    auxiliary = hz.merge_labels(aux_sources, schema, grid) if aux_sources else {}
    return grid, clinical, auxiliary


def _harmonize_one(case, schema, base_dir):
    grid, clinical, auxiliary = _case_mask_sets(case, schema, base_dir)
    masks, provenance = hz.complement_missing(clinical, auxiliary, schema)
    image_path = _resolve(base_dir, case.image_path)
    if image_path.exists():
        igrid = read_grid(image_path)
        slice_count = igrid.dims[igrid.axial_axis()]
    else:
        slice_count = grid.dims[grid.axial_axis()]
    missing = sum(1 for v in provenance.values() if v == hz.PROV_ABSENT)
    return grid, masks, provenance, hz.CaseStats(slice_count, missing)


def cmd_harmonize(args) -> int:
    manifest = load_manifest(args.manifest)
    schema = _load_schema_for(args, manifest)
    base_dir = Path(args.manifest).parent
    out_dir = Path(args.out)
    (out_dir / "labels").mkdir(parents=True, exist_ok=True)
    (out_dir / "provenance").mkdir(parents=True, exist_ok=True)

    rules = hz.FilterRules(slice_range=(args.min_slices, args.max_slices),
                           max_missing_organs=args.max_missing)
    prepared, failures = {}, []

    def prepare(case):
        return case.case_id, _harmonize_one(case, schema, base_dir)

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        futures = {pool.submit(prepare, c): c for c in manifest}
        for future, case in futures.items():
            try:
                case_id, payload = future.result()
                prepared[case_id] = payload
            except Exception as exc:
                if args.strict:
                    raise
                failures.append({"case_id": case.case_id, "error": str(exc)})

    stats = {cid: payload[3] for cid, payload in prepared.items()}
    ok_cases = tuple(c for c in manifest.cases if c.case_id in prepared)
    result = hz.filter_cases(Manifest(ok_cases, manifest.schema_ref), rules, stats) \
        if ok_cases else hz.FilterResult((), ())

    for case in result.included:
        grid, masks, provenance, _ = prepared[case.case_id]
        labels = hz.resolve_overlaps(masks, schema, grid)
        write_nifti(labels, out_dir / "labels" / f"{case.case_id}.nii.gz")
        _write_json({"case_id": case.case_id, "provenance": provenance},
                    out_dir / "provenance" / f"{case.case_id}.json")

    with open(out_dir / "exclusions.jsonl", "w", encoding="utf-8") as f:
        for exc in result.excluded:
            f.write(json.dumps(exc.to_dict(), sort_keys=True) + "\n")

    _write_json({
        "included": [c.case_id for c in result.included],
        "excluded": [e.to_dict() for e in result.excluded],
        "failures": failures,
    }, out_dir / "harmonize_summary.json")

    print(f"harmonize: {len(result.included)} included, "
          f"{len(result.excluded)} excluded, {len(failures)} failed")
    if failures:
        for f_ in failures:
            print(f"  FAILED {f_['case_id']}: {f_['error']}", file=sys.stderr)
        return EXIT_COMPUTE
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate

def _volume_path(directory: Path, case_id: str) -> Path:
    for suffix in (".nii.gz", ".nii"):
        p = directory / f"{case_id}{suffix}"
        if p.exists():
            return p
    raise FileNotFoundError(f"no volume for case {case_id!r} in {directory}")


def _case_ids_from_dir(directory: Path) -> list[str]:
    ids = set()
    for p in directory.iterdir():
        name = p.name
        for suffix in (".nii.gz", ".nii"):
            if name.endswith(suffix):
                ids.add(name[: -len(suffix)])
                break
    return sorted(ids)


def cmd_evaluate(args) -> int:
    ref_dir, pred_dir = Path(args.ref), Path(args.pred)
    manifest = load_manifest(args.manifest) if args.manifest else None
    schema = _load_schema_for(args, manifest)
    case_ids = manifest.case_ids() if manifest else _case_ids_from_dir(ref_dir)
    if not case_ids:
        raise ValidationError(f"no cases found under {ref_dir}")
    mask_policy = tuple(s for s in (args.mask_policy or "").split(",") if s) \
        if args.mask_policy is not None else mx.DEFAULT_MASK_POLICY

    rows_by_case: dict[str, list] = {}
    fpr_inputs: list[tuple[str, str, float]] = []
    errors = []

    def evaluate_one(case_id: str):
        ref = read_label_volume(_volume_path(ref_dir, case_id))
        pred = read_label_volume(_volume_path(pred_dir, case_id))
        if not ref.grid.same_lattice(pred.grid):
            if args.resample:
                pred = resample_labels_nearest(pred, ref.grid)
            else:
                raise GeometryError(
                    f"case {case_id}: prediction grid differs from reference "
                    f"(use --resample to regrid)")
        rows = mx.evaluate_case(ref, pred, schema, mask_policy, case_id=case_id)
        fpr_entry = None
        if manifest:
            case = manifest.case(case_id)
            if case.nephrectomy_side in ("left", "right"):
                organ = f"kidney_{case.nephrectomy_side}"
                volume = mx.predicted_volume_mm3(pred, schema.code_of(organ))
                fpr_entry = (case_id, case.nephrectomy_side, volume)
        return case_id, rows, fpr_entry

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        futures = {pool.submit(evaluate_one, cid): cid for cid in case_ids}
        for future, cid in futures.items():
            try:
                case_id, rows, fpr_entry = future.result()
                rows_by_case[case_id] = rows
                if fpr_entry:
                    fpr_inputs.append(fpr_entry)
            except Exception as exc:
                if args.strict:
                    raise
                errors.append({"case_id": cid, "error": str(exc)})

    all_rows = [r for cid in case_ids for r in rows_by_case.get(cid, [])]
    fpr_results = []
    if fpr_inputs:
        fpr_results.append(mx.fpr_absent_organ(sorted(fpr_inputs),
                                               threshold_mm3=args.fpr_threshold))

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    mx.write_metric_csv(all_rows, out_dir / "metrics.csv")
    doc = {
        "convention_notes": mx.DISTANCE_CONVENTION,
        "rows": [r.to_dict() for r in all_rows],
        "fpr": [f.to_dict() for f in fpr_results],
        "errors": errors,
    }
    _write_json(doc, out_dir / "metrics.json")

    summaries = rp.summarize(all_rows)
    rp.write_summary_csv(summaries, out_dir / "summary.csv")
    rp.write_summary_json(summaries, out_dir / "summary.json")
    boxplots = {metric: rp.boxplot_export(all_rows, metric=metric)
                for metric in ("dsc", "hd95", "msd")}
    _write_json(boxplots, out_dir / "boxplot.json")

    print(f"evaluate: {len(rows_by_case)} cases, {len(all_rows)} rows, "
          f"{len(errors)} errors")
    for f_ in fpr_results:
        print(f"  FPR {f_.organ}: {f_.display()} (threshold {f_.threshold_mm3} mm^3)")
    if errors:
        for e in errors:
            print(f"  ERROR {e['case_id']}: {e['error']}", file=sys.stderr)
    return EXIT_OK


# ---------------------------------------------------------------------------
# compare

def _organ_values(rows, metric: str) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for row in rows:
        value = {"dsc": row.dsc, "hd95": row.hd95_mm, "msd": row.msd_mm}[metric]
        if value is not None:
            out.setdefault(row.organ, {})[row.case_id] = float(value)
    return out


def cmd_compare(args) -> int:
    rows_a = mx.read_metric_csv(args.table_a)
    rows_b = mx.read_metric_csv(args.table_b)
    name_a = Path(args.table_a).stem
    name_b = Path(args.table_b).stem
    if name_a == name_b:
        name_a, name_b = f"{name_a}:a", f"{name_b}:b"
    by_organ_a = _organ_values(rows_a, args.metric)
    by_organ_b = _organ_values(rows_b, args.metric)

    organs = sorted(set(by_organ_a) | set(by_organ_b))
    blocks = []
    for organ in organs:
        va = by_organ_a.get(organ, {})
        vb = by_organ_b.get(organ, {})
        if args.paired:
            common = sorted(set(va) & set(vb))
            if len(common) < 1:
                blocks.append(st.OrganComparison(
                    organ, (), (), note="skipped: no common cases"))
                continue
            a_vals = [va[c] for c in common]
            b_vals = [vb[c] for c in common]
            result = st.wilcoxon_signed_rank(a_vals, b_vals)
            mean_diff = float(np.mean(np.asarray(a_vals) - np.asarray(b_vals)))
            groups = (
                st.GroupSummary(name_a, len(a_vals), float(np.mean(a_vals)),
                                rp.sample_sd(a_vals)),
                st.GroupSummary(name_b, len(b_vals), float(np.mean(b_vals)),
                                rp.sample_sd(b_vals)),
            )
        else:
            a_vals = sorted(va.values())
            b_vals = sorted(vb.values())
            if not a_vals or not b_vals:
                blocks.append(st.OrganComparison(
                    organ, (), (), note="skipped: a table has no rows"))
                continue
            result = st.wilcoxon_rank_sum(a_vals, b_vals)
            mean_diff = float(np.mean(a_vals) - np.mean(b_vals))
            groups = (
                st.GroupSummary(name_a, len(a_vals), float(np.mean(a_vals)),
                                rp.sample_sd(a_vals)),
                st.GroupSummary(name_b, len(b_vals), float(np.mean(b_vals)),
                                rp.sample_sd(b_vals)),
            )
        comparison = st.PairwiseComparison(
            group_a=name_a, group_b=name_b, p_raw=result.p_value,
            p_adjusted=result.p_value, stars=st.star_label(result.p_value),
            method=result.method)
        blocks.append(st.OrganComparison(
            organ, groups, (comparison,),
            note=f"mean difference ({name_a} - {name_b}): {mean_diff:+.6g}"))

    report = st.ComparisonReport(
        metric=args.metric,
        dimension="paired_models" if args.paired else "unpaired_models",
        organs=tuple(blocks), family_size=1,
        convention_notes=("Wilcoxon signed-rank on matched (case, organ) rows"
                          if args.paired else
                          "Wilcoxon rank-sum on per-table value sets")
        + "; stars from raw p-values, no multiplicity correction")
    doc = report.to_dict()
    doc["table_a"] = str(args.table_a)
    doc["table_b"] = str(args.table_b)
    if args.out:
        _write_json(doc, args.out)
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        print()
    return EXIT_OK


# ---------------------------------------------------------------------------
# subgroup / split

def cmd_subgroup(args) -> int:
    manifest = load_manifest(args.manifest)
    rows = mx.read_metric_csv(args.table)
    report = st.subgroup_analysis(rows, manifest, dimension=args.by,
                                  metric=args.metric, min_n=args.min_n)
    doc = report.to_dict()
    if args.out:
        _write_json(doc, args.out)
    else:
        json.dump(doc, sys.stdout, indent=2, sort_keys=True)
        print()
    n_tests = sum(len(o["comparisons"]) for o in doc["organs"])
    print(f"subgroup: {args.by} on {args.metric}: {len(doc['organs'])} organs, "
          f"{n_tests} tests, family size {doc['family_size']}", file=sys.stderr)
    return EXIT_OK


def _parse_ratio(text: str) -> tuple[int, int, int]:
    parts = text.replace(",", ":").split(":")
    if len(parts) != 3:
        raise InputError(f"ratio must be train:val:test, got {text!r}")
    try:
        ratio = tuple(int(p) for p in parts)
    except ValueError:
        raise InputError(f"ratio components must be integers, got {text!r}")
    return ratio


def _plan_json(plan: st.SplitPlan) -> str:
    return json.dumps(plan.to_dict(), indent=2, sort_keys=True) + "\n"


def cmd_split(args) -> int:
    manifest = load_manifest(args.manifest)
    ratio = _parse_ratio(args.ratio)
    stratify = tuple(s for s in (args.stratify or "").split(",") if s)
    if args.cv:
        plans = st.make_cv_folds(manifest, args.cv, ratio, args.seed, stratify)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, plan in enumerate(plans):
            (out_dir / f"fold_{i}.json").write_text(_plan_json(plan),
                                                    encoding="utf-8")
        print(f"split: wrote {len(plans)} folds to {out_dir}")
    else:
        plan = st.make_split(manifest, ratio, args.seed, stratify)
        Path(args.out).write_text(_plan_json(plan), encoding="utf-8")
        sizes = {b: len(plan.bucket_cases(b)) for b in st.BUCKETS}
        print(f"split: {sizes} -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# postprocess / review / schema

def cmd_postprocess(args) -> int:
    pred_dir, out_dir = Path(args.pred), Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    schema = _load_schema_for(args)
    case_ids = _case_ids_from_dir(pred_dir)
    if not case_ids:
        raise ValidationError(f"no volumes found under {pred_dir}")

    def process(case_id: str):
        volume = read_label_volume(_volume_path(pred_dir, case_id))
        cleaned = hz.largest_component_cleanup(volume, schema, args.connectivity)
        write_nifti(cleaned, out_dir / f"{case_id}.nii.gz")
        return case_id

    with ThreadPoolExecutor(max_workers=_thread_count(args)) as pool:
        for case_id in pool.map(process, case_ids):
            pass
    print(f"postprocess: {len(case_ids)} volumes -> {out_dir}")
    return EXIT_OK


def cmd_review_select(args) -> int:
    manifest = load_manifest(args.manifest)
    patients: dict[str, list] = {}
    for case in manifest:
        patients.setdefault(case.patient_id, []).append(case)
    pids = list(patients)
    if args.n > len(pids):
        raise InputError(f"cannot select {args.n} patients from {len(pids)}")
    rng = np.random.default_rng(args.seed)
    chosen = sorted(rng.choice(len(pids), size=args.n, replace=False).tolist())
    selected = [c for i in chosen for c in patients[pids[i]]]
    doc = manifest_to_dict(Manifest(tuple(selected), manifest.schema_ref))
    _write_json(doc, args.out)
    print(f"review select: {len(selected)} cases ({args.n} patients) -> {args.out}")
    return EXIT_OK


def cmd_review_serve(args) -> int:
    manifest = load_manifest(args.manifest)
    schema = _load_schema_for(args, manifest)
    service = ReviewService(
        manifest=manifest, schema=schema, labels_dir=args.labels,
        scores_path=args.scores, base_dir=Path(args.manifest).parent,
        frontend_dir=args.frontend, window=args.window, level=args.level)
    serve_forever(service, host=args.host, port=args.port)
    return EXIT_OK


def cmd_schema(args) -> int:
    schema = load_schema(args.schema) if args.schema else default_schema()
    if args.out:
        save_schema(schema, args.out)
        print(f"schema: wrote {args.out}")
    else:
        json.dump(schema_to_dict(schema), sys.stdout, indent=2)
        print()
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser / entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oar-evalkit",
        description="Evaluation toolkit for multi-organ CT auto-contouring.")
    parser.add_argument("--json-errors", action="store_true",
                        help="emit failures as JSON on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, threads=True, strict=True, schema=True):
        if threads:
            p.add_argument("--threads", type=int, default=None,
                           help="worker threads (env OAR_EVALKIT_THREADS)")
        if strict:
            p.add_argument("--strict", action="store_true",
                           help="abort on the first per-case failure")
        if schema:
            p.add_argument("--schema", default=None,
                           help="organ schema JSON (default: built-in)")

    p = sub.add_parser("harmonize", help="merge, complement, resolve, filter")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--min-slices", type=int, default=80)
    p.add_argument("--max-slices", type=int, default=400)
    p.add_argument("--max-missing", type=int, default=4)
    common(p)
    p.set_defaults(func=cmd_harmonize)

    p = sub.add_parser("evaluate", help="compute DSC/HD95/MSD metric tables")
    p.add_argument("--pred", required=True, help="directory of predicted label volumes")
    p.add_argument("--ref", required=True, help="directory of reference label volumes")
    p.add_argument("--out", required=True)
    p.add_argument("--manifest", default=None)
    p.add_argument("--resample", action="store_true",
                   help="regrid predictions onto the reference grid")
    p.add_argument("--mask-policy", default=None,
                   help="comma list of organs evaluated on the GT axial slab "
                        "(default: stomach_bowel)")
    p.add_argument("--fpr-threshold", type=float, default=0.0,
                   help="removed-kidney volume threshold in mm^3")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="compare two metric tables per organ")
    p.add_argument("table_a")
    p.add_argument("table_b")
    p.add_argument("--paired", action="store_true")
    p.add_argument("--metric", choices=("dsc", "hd95", "msd"), default="dsc")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("subgroup", help="subgroup robustness tests")
    p.add_argument("table")
    p.add_argument("--manifest", required=True)
    p.add_argument("--by", required=True,
                   choices=("sex", "tumor_type", "iv_contrast", "age_group"))
    p.add_argument("--metric", choices=("dsc", "hd95", "msd"), default="dsc")
    p.add_argument("--min-n", type=int, default=3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_subgroup)

    p = sub.add_parser("split", help="deterministic patient-level splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--ratio", required=True, help="train:val:test, e.g. 132:21:36")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stratify", default="",
                   help="comma list of sex,tumor_type,iv_contrast,age_group,dataset")
    p.add_argument("--cv", type=int, default=None,
                   help="emit this many independent seeded splits")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("postprocess", help="keep largest component per class")
    p.add_argument("--pred", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--connectivity", type=int, choices=(6, 18, 26), default=26)
    common(p)
    p.set_defaults(func=cmd_postprocess)

    p = sub.add_parser("review", help="clinician review workflow")
    rsub = p.add_subparsers(dest="review_command", required=True)

    ps = rsub.add_parser("select", help="sample patients for review")
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--n", type=int, default=15)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--out", required=True)
    ps.set_defaults(func=cmd_review_select)

    ps = rsub.add_parser("serve", help="run the review HTTP service")
    ps.add_argument("--manifest", required=True)
    ps.add_argument("--labels", required=True,
                    help="directory of label volumes named {case_id}.nii[.gz]")
    ps.add_argument("--scores", required=True, help="JSON-lines scores file")
    ps.add_argument("--host", default="127.0.0.1")
    ps.add_argument("--port", type=int, default=8000)
    ps.add_argument("--frontend", default=None, help="static assets directory")
    ps.add_argument("--window", type=float, default=DEFAULT_WINDOW)
    ps.add_argument("--level", type=float, default=DEFAULT_LEVEL)
    ps.add_argument("--schema", default=None)
    ps.set_defaults(func=cmd_review_serve)

    p = sub.add_parser("schema", help="dump the organ schema")
    p.add_argument("--schema", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_schema)

    return parser


def _exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (ValidationError, InputError, SchemaError,
                        UnknownStructureError, LabelFormatError)):
        return EXIT_VALIDATION
    if isinstance(exc, (FormatError, OSError)):
        return EXIT_IO
    if isinstance(exc, EvalkitError):
        return EXIT_COMPUTE
    return EXIT_COMPUTE


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single exit funnel
        code = _exit_code_for(exc)
        if args.json_errors:
            doc = {"error": type(exc).__name__, "message": str(exc),
                   "exit_code": code}
            print(json.dumps(doc), file=sys.stderr)
        else:
            print(f"oar-evalkit: {type(exc).__name__}: {exc}", file=sys.stderr)
            if os.environ.get("OAR_EVALKIT_DEBUG"):
                traceback.print_exc()
        return code


if __name__ == "__main__":
    sys.exit(main())
