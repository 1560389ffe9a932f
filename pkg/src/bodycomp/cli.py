"""Command-line entry point.

Subcommands::

    measure       body-composition metrics for one CT/tissue/vertebrae
                  triple or a manifest CSV of triples
    evaluate      Dice/MRAE/R² report for a gt/pred mask pair
    select-slice  print the largest-label slice for a vertebra level
    postprocess   sat-skin dilation or muscular-fat filtering on .bcv files
    cohort        demographic group stats and metric correlations

Exit codes: 0 success, 1 partial failure (some inputs failed), 2 invalid
invocation. Outputs are deterministic: rows are ordered by subject_id,
floats are printed with 6 significant digits, and ``--jobs`` never
changes any output byte. ``BODYCOMP_JOBS`` sets the default worker count.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .cohort import GROUP_BY_CHOICES, correlation_matrix, group_stats
from .errors import BodycompError
from .evaluation import (
    EVAL_CSV_COLUMNS,
    EvalReport,
    _normalize_regions,
    evaluate_masks,
)
from .io import format_number, read_cohort_csv, read_volume, write_volume
from .measures import measure_subject
from .model import (
    BodyCompResult,
    LabelVolume,
    MergePolicy,
    SubjectRecord,
    VoxelVolume,
    to_hu,
    vertebra_label,
)
from .postprocess import dilate_sat_to_skin, muscular_fat_candidates
from .regions import label_area_per_slice, largest_label_slice

RESULTS_CSV_COLUMNS = (
    "subject_id",
    "policy",
    "region_2d",
    "region_3d_lo",
    "region_3d_hi",
    "muscle_density_2d_hu",
    "muscle_density_3d_hu",
    "vat_sat_ratio_2d",
    "vat_sat_ratio_3d",
    "muscle_area_2d_cm2",
    "muscle_volume_3d_cm3",
    "smi_2d_cm2_m2",
)

_POLICIES = {p.value: p for p in MergePolicy}


def _default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("BODYCOMP_JOBS", "1")))
    except ValueError:
        return 1


def _read_ct(path) -> VoxelVolume:
    vol = read_volume(path)
    if not isinstance(vol, VoxelVolume):
        raise BodycompError(f"{path}: expected a CT volume, got labels")
    return vol


def _read_labels(path) -> LabelVolume:
    vol = read_volume(path)
    if not isinstance(vol, LabelVolume):
        raise BodycompError(f"{path}: expected a label volume, got CT")
    return vol


def _write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        writer.writerows(rows)


def _result_row(result) -> list[str]:
    return [
        result.subject_id,
        result.policy.value,
        str(result.region_2d),
        str(result.region_3d[0]),
        str(result.region_3d[1]),
        format_number(result.muscle_density_2d),
        format_number(result.muscle_density_3d),
        format_number(result.vat_sat_ratio_2d),
        format_number(result.vat_sat_ratio_3d),
        format_number(result.muscle_area_2d),
        format_number(result.muscle_volume_3d),
        format_number(result.smi_2d) if result.smi_2d is not None else "",
    ]


def _load_manifest(path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        needed = [c for c in ("ct", "tissue", "vertebrae") if c not in fields]
        if needed:
            raise BodycompError(f"{path}: manifest missing columns {needed}")
        base = Path(path).parent
        rows = []
        for row in reader:
            entry = {
                "ct": str(base / row["ct"]),
                "tissue": str(base / row["tissue"]),
                "vertebrae": str(base / row["vertebrae"]),
                "subject_id": (row.get("subject_id") or "").strip() or None,
            }
            rows.append(entry)
    return rows


def _measure_one(entry: dict, policy: MergePolicy, cohort: dict):
    ct = _read_ct(entry["ct"])
    tissue = _read_labels(entry["tissue"])
    vertebrae = _read_labels(entry["vertebrae"])
    subject_id = entry["subject_id"] or ct.subject_id or Path(entry["ct"]).stem
    record = cohort.get(subject_id)
    if record is None:
        record = SubjectRecord(subject_id=subject_id, age_years=0.0)
    hu = to_hu(ct)
    return measure_subject(hu, tissue, vertebrae, record, policy)


def cmd_measure(args) -> int:
    policy = _POLICIES[args.policy]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    if args.manifest:
        entries = _load_manifest(args.manifest)
    else:
        if not (args.ct and args.tissue and args.vertebrae):
            print("measure: need --ct/--tissue/--vertebrae or --manifest", file=sys.stderr)
            return 2
        entries = [
            {
                "ct": args.ct,
                "tissue": args.tissue,
                "vertebrae": args.vertebrae,
                "subject_id": None,
            }
        ]

    cohort = {}
    if args.cohort:
        cohort = {r.subject_id: r for r in read_cohort_csv(args.cohort)}

    def work(entry):
        try:
            return _measure_one(entry, policy, cohort), None
        except (BodycompError, OSError, ValueError) as exc:
            return None, f"{entry['ct']}: {exc}"

    if args.jobs > 1 and len(entries) > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            outcomes = list(pool.map(work, entries))
    else:
        outcomes = [work(e) for e in entries]

    results = [r for r, _ in outcomes if r is not None]
    failures = [msg for _, msg in outcomes if msg is not None]

    seen = set()
    for r in results:
        if r.subject_id in seen:
            print(f"measure: duplicate subject_id {r.subject_id!r}", file=sys.stderr)
            return 2
        seen.add(r.subject_id)

    results.sort(key=lambda r: r.subject_id)
    for result in results:
        doc = json.dumps(result.to_dict(), sort_keys=True, indent=2)
        (out_dir / f"{result.subject_id}.json").write_text(doc + "\n", encoding="utf-8")
    _write_csv(out_dir / "results.csv", RESULTS_CSV_COLUMNS, map(_result_row, results))

    for message in failures:
        print(f"measure: {message}", file=sys.stderr)
    if failures:
        print(f"measure: {len(failures)} of {len(entries)} inputs failed", file=sys.stderr)
        return 1
    return 0


def _eval_row(row) -> list[str]:
    return [
        row.label,
        row.region,
        str(row.cases),
        format_number(row.dice_mean),
        format_number(row.dice_sd),
        format_number(row.dice_slice_mean),
        format_number(row.dice_slice_sd),
        str(row.degenerate_cases),
        str(row.degenerate_slices),
        format_number(row.mrae) if row.mrae is not None else "",
        format_number(row.mrae_sd) if row.mrae_sd is not None else "",
        str(row.mrae_skipped),
        format_number(row.r_squared) if row.r_squared is not None else "",
    ]


def cmd_evaluate(args) -> int:
    policy = _POLICIES[args.policy]
    regions = args.regions.split(",") if args.regions else None
    if regions is not None:
        try:
            _normalize_regions(regions)
        except ValueError as exc:
            print(f"evaluate: {exc}", file=sys.stderr)
            return 2
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    gt = _read_labels(args.gt)
    pred = _read_labels(args.pred)
    hu = to_hu(_read_ct(args.ct))
    vertebrae = _read_labels(args.vertebrae) if args.vertebrae else None

    report: EvalReport = evaluate_masks(gt, pred, hu, vertebrae, policy, regions)

    (out_dir / "eval.json").write_text(report.to_json() + "\n", encoding="utf-8")
    _write_csv(out_dir / "eval.csv", EVAL_CSV_COLUMNS, map(_eval_row, report.rows))
    return 0


def cmd_select_slice(args) -> int:
    vertebrae = _read_labels(args.vertebrae)
    name = vertebra_label(args.level)
    index = largest_label_slice(vertebrae, name)
    area = label_area_per_slice(vertebrae, name)[index]
    print(f"{name} index {index} area_cm2 {format_number(float(area))}")
    return 0


def cmd_postprocess(args) -> int:
    hu = to_hu(_read_ct(args.ct))
    mask = _read_labels(args.mask)
    if args.mode == "sat-skin":
        out = dilate_sat_to_skin(mask, hu)
    else:
        out = muscular_fat_candidates(hu, mask)
    write_volume(out, args.out)
    return 0


def cmd_cohort(args) -> int:
    group_bys = [g.strip() for g in args.group_by.split(",") if g.strip()]
    bad = [g for g in group_bys if g not in GROUP_BY_CHOICES]
    if bad or not group_bys:
        print(
            f"cohort: --group-by must be a comma list of {GROUP_BY_CHOICES}, "
            f"got {args.group_by!r}",
            file=sys.stderr,
        )
        return 2
    results_dir = Path(args.results)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    results = []
    for path in sorted(results_dir.glob("*.json")):
        doc = json.loads(path.read_text(encoding="utf-8"))
        results.append(
            BodyCompResult(
                subject_id=doc["subject_id"],
                policy=_POLICIES[doc["policy"]],
                region_2d=doc["region_2d"],
                region_3d=tuple(doc["region_3d"]),
                muscle_density_2d=doc["muscle_density_2d"],
                muscle_density_3d=doc["muscle_density_3d"],
                vat_sat_ratio_2d=doc["vat_sat_ratio_2d"],
                vat_sat_ratio_3d=doc["vat_sat_ratio_3d"],
                muscle_area_2d=doc["muscle_area_2d"],
                muscle_volume_3d=doc["muscle_volume_3d"],
                smi_2d=doc["smi_2d"],
            )
        )
    if not results:
        print(f"cohort: no result JSON files in {results_dir}", file=sys.stderr)
        return 2
    records = read_cohort_csv(args.demographics)

    group_rows = []
    for group_by in group_bys:
        stats = group_stats(results, records, group_by, min_group_size=args.min_group)
        for s in stats:
            group_rows.append(
                [s.group, s.metric, str(s.count), format_number(s.mean), format_number(s.sd)]
            )
    _write_csv(out_dir / "group_stats.csv", ("group", "metric", "count", "mean", "sd"), group_rows)

    entries = correlation_matrix(results)
    corr_rows = [
        [e.metric_a, e.metric_b, format_number(e.r) if e.r is not None else "", str(e.n)]
        for e in entries
    ]
    _write_csv(out_dir / "correlations.csv", ("metric_a", "metric_b", "r", "n"), corr_rows)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bodycomp",
        description="CT body composition measurement and evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("measure", help="measure body-composition metrics")
    m.add_argument("--ct", help="raw CT .bcv")
    m.add_argument("--tissue", help="tissue label .bcv")
    m.add_argument("--vertebrae", help="vertebra label .bcv")
    m.add_argument("--manifest", help="CSV of ct,tissue,vertebrae[,subject_id] triples")
    m.add_argument("--cohort", help="demographics CSV (enables SMI)")
    m.add_argument("--policy", choices=sorted(_POLICIES), default="muscle")
    m.add_argument("--out", default="out")
    m.add_argument("--jobs", type=int, default=_default_jobs())
    m.set_defaults(func=cmd_measure)

    e = sub.add_parser("evaluate", help="evaluate predicted masks against ground truth")
    e.add_argument("--gt", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--ct", required=True, help="raw CT .bcv")
    e.add_argument("--vertebrae")
    e.add_argument("--regions", help="comma list of l3,t12l4,all")
    e.add_argument("--policy", choices=sorted(_POLICIES), default="muscle")
    e.add_argument("--out", default="out")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("select-slice", help="print the largest-label slice")
    s.add_argument("--vertebrae", required=True)
    s.add_argument("--level", required=True, help="vertebra level, e.g. L3")
    s.set_defaults(func=cmd_select_slice)

    p = sub.add_parser("postprocess", help="mask post-processing")
    p.add_argument("mode", choices=("sat-skin", "mf-filter"))
    p.add_argument("--ct", required=True)
    p.add_argument("--mask", required=True, help="tissue mask (sat-skin) or ROI (mf-filter)")
    p.add_argument("--out", required=True, help="output .bcv path")
    p.set_defaults(func=cmd_postprocess)

    c = sub.add_parser("cohort", help="group stats and correlations over results")
    c.add_argument("--results", required=True, help="directory of per-subject JSON")
    c.add_argument("--demographics", required=True, help="cohort CSV")
    c.add_argument("--group-by", default=",".join(GROUP_BY_CHOICES))
    c.add_argument("--min-group", type=int, default=20)
    c.add_argument("--out", default="out")
    c.set_defaults(func=cmd_cohort)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BodycompError, OSError, ValueError) as exc:
        print(f"bodycomp: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
