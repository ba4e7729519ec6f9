"""Case evaluation, CSV metric tables and configuration comparison reports.

The CSV schema is versioned with a leading `# lesionmetrics-v1` comment.
Floats are serialized with 6 significant digits and an explicit "NaN"
token, and all row/key orderings are fixed, so identical inputs produce
byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .components import Connectivity, DEFAULT_CONNECTIVITY
from .overlap import (
    adaptive_dice,
    adaptive_dice_normalized,
    detection_metrics,
    lesionwise_dice,
    volumetric_dice,
)
from .stats import DegenerateSampleError, MetricRow, PairedSample, aggregate_runs, config_mean, wilcoxon_signed_rank
from .surface import hd95, mean_surface_distance, surface_dice, surface_distances
from .volume import LABEL_NAMES, BinaryMask, LabelVolume, ProbVolume, check_same_grid, load_volume

SCHEMA_TOKEN = "# lesionmetrics-v1"

METRIC_COLUMNS = [
    "dice",
    "adaptive_dice",
    "adaptive_dice_norm",
    "lesionwise_dice",
    "sds",
    "msd",
    "hd95",
    "det_sensitivity",
    "det_precision",
]
COUNT_COLUMNS = ["det_tp_gt", "det_fn", "det_tp_pred", "det_fp"]
CSV_HEADER = ["case_id", "config", "fold", "repeat", "class"] + METRIC_COLUMNS + COUNT_COLUMNS + ["error"]

REPORT_METRICS = METRIC_COLUMNS  # compared per class in configuration reports


def fmt_float(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "NaN"
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.6g}"


def parse_float(s: str) -> float:
    if s == "NaN":
        return float("nan")
    return float(s)


@dataclass(frozen=True)
class ManifestRow:
    case_id: str
    gt: Path
    pred: Path
    fold: int
    repeat: int
    config: str


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Parse the evaluation manifest CSV (`case_id,gt,pred,fold,repeat,config`)."""
    path = Path(path)
    rows: list[ManifestRow] = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["case_id", "gt", "pred", "fold", "repeat", "config"]
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != expected:
            raise ValueError(f"manifest header must be {','.join(expected)}, got {reader.fieldnames}")
        base = path.parent
        for i, rec in enumerate(reader):
            try:
                rows.append(
                    ManifestRow(
                        case_id=rec["case_id"].strip(),
                        gt=(base / rec["gt"].strip()),
                        pred=(base / rec["pred"].strip()),
                        fold=int(rec["fold"]),
                        repeat=int(rec["repeat"]),
                        config=rec["config"].strip(),
                    )
                )
            except (KeyError, ValueError) as exc:
                raise ValueError(f"bad manifest row {i + 2}: {exc}") from exc
    seen = set()
    for row in rows:
        key = (row.case_id, row.repeat, row.config)
        if key in seen:
            raise ValueError(f"duplicate manifest entry for (case_id, repeat, config) = {key}")
        seen.add(key)
    return rows


@dataclass(frozen=True)
class EvalOptions:
    tolerance_mm: float = 1.0
    connectivity: Connectivity = DEFAULT_CONNECTIVITY
    classes: tuple[int, ...] = (1, 2)
    jobs: int = 1
    strict: bool = False
    match_tables: bool = False


def _binarize_prediction(pred: LabelVolume | ProbVolume, label: int) -> BinaryMask:
    if isinstance(pred, ProbVolume):
        # single-channel probability predictions: threshold at 0.5 for every class
        return BinaryMask(data=pred.data >= 0.5, spacing=pred.spacing)
    return BinaryMask(data=pred.data == label, spacing=pred.spacing)


def evaluate_case(
    gt: LabelVolume,
    pred: LabelVolume | ProbVolume,
    options: EvalOptions,
) -> tuple[dict[int, dict[str, float]], dict[int, dict]]:
    """All per-class metrics for one case; returns (metrics, match tables)."""
    check_same_grid(gt, pred)
    per_class: dict[int, dict[str, float]] = {}
    tables: dict[int, dict] = {}
    for label in options.classes:
        g = BinaryMask(data=gt.data == label, spacing=gt.spacing)
        p = _binarize_prediction(pred, label)
        det = detection_metrics(g, p, options.connectivity)
        m = {
            "dice": volumetric_dice(g, p),
            "adaptive_dice": adaptive_dice(g, p, options.connectivity),
            "adaptive_dice_norm": adaptive_dice_normalized(g, p, options.connectivity),
            "lesionwise_dice": lesionwise_dice(g, p, options.connectivity),
            "det_sensitivity": det.sensitivity,
            "det_precision": det.precision,
        }
        if g.count == 0 and p.count == 0:
            m["sds"] = float("nan")
            m["msd"] = float("nan")
            m["hd95"] = float("nan")
        else:
            d = surface_distances(g, p)
            m["sds"] = surface_dice(d, options.tolerance_mm)
            m["msd"] = mean_surface_distance(d)
            m["hd95"] = hd95(d)
        m["det_tp_gt"] = det.matched_gt
        m["det_fn"] = det.missed_gt
        m["det_tp_pred"] = det.matched_pred
        m["det_fp"] = det.spurious_pred
        per_class[label] = m
        tables[label] = det.table.to_json()
    return per_class, tables


@dataclass
class EvaluationResult:
    rows: list[dict]  # CSV-ready dicts, one per (case, repeat, class)
    errors: list[dict]
    match_tables: dict[str, dict] = field(default_factory=dict)
    options: EvalOptions = field(default_factory=EvalOptions)


def _n_jobs(options: EvalOptions) -> int:
    if options.jobs > 0:
        return options.jobs
    env = os.environ.get("LESIONMETRICS_THREADS")
    return max(1, int(env)) if env else 1


def evaluate_manifest(rows: list[ManifestRow], options: EvalOptions) -> EvaluationResult:
    """Evaluate every manifest row; row order of the output is deterministic."""

    def run_one(row: ManifestRow):
        try:
            gt = load_volume(row.gt)
            if not isinstance(gt, LabelVolume):
                raise ValueError(f"ground truth {row.gt} must be a label volume")
            pred = load_volume(row.pred)
            metrics, tables = evaluate_case(gt, pred, options)
            return row, metrics, tables, None
        except (OSError, ValueError) as exc:
            return row, None, None, str(exc)

    jobs = _n_jobs(options)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_one, rows))
    else:
        results = [run_one(row) for row in rows]

    out = EvaluationResult(rows=[], errors=[], options=options)
    for row, metrics, tables, error in results:
        if error is not None:
            out.errors.append({"case_id": row.case_id, "config": row.config, "repeat": row.repeat, "error": error})
            continue
        for label in options.classes:
            rec = {
                "case_id": row.case_id,
                "config": row.config,
                "fold": row.fold,
                "repeat": row.repeat,
                "class": label,
            }
            rec.update(metrics[label])
            rec["error"] = ""
            out.rows.append(rec)
        if options.match_tables:
            for label, table in tables.items():
                out.match_tables[f"{row.case_id}|r{row.repeat}|{LABEL_NAMES.get(label, label)}"] = table
    out.rows.sort(key=lambda r: (r["case_id"], r["repeat"], r["class"]))
    out.errors.sort(key=lambda r: (r["case_id"], r["repeat"]))
    return out


def write_csv(result: EvaluationResult, path: str | Path) -> None:
    buf = io.StringIO()
    buf.write(SCHEMA_TOKEN + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rec in result.rows:
        writer.writerow(
            [rec["case_id"], rec["config"], rec["fold"], rec["repeat"], rec["class"]]
            + [fmt_float(rec[m]) for m in METRIC_COLUMNS]
            + [str(rec[c]) for c in COUNT_COLUMNS]
            + [rec["error"]]
        )
    for err in result.errors:
        writer.writerow([err["case_id"], err["config"], "", err["repeat"], ""] + [""] * len(METRIC_COLUMNS) + [""] * len(COUNT_COLUMNS) + [err["error"]])
    Path(path).write_text(buf.getvalue())


def _json_safe(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    return v


def write_json(result: EvaluationResult, path: str | Path) -> None:
    doc = {
        "schema": SCHEMA_TOKEN.lstrip("# "),
        "options": {
            "tolerance_mm": result.options.tolerance_mm,
            "connectivity": result.options.connectivity.value,
            "classes": list(result.options.classes),
        },
        "rows": [{k: _json_safe(v) for k, v in rec.items()} for rec in result.rows],
        "errors": result.errors,
    }
    if result.match_tables:
        doc["match_tables"] = result.match_tables
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


def read_metric_csv(path: str | Path) -> list[MetricRow]:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != SCHEMA_TOKEN:
        raise ValueError(f"{path} is not a {SCHEMA_TOKEN} metric table")
    reader = csv.DictReader(io.StringIO("\n".join(lines[1:])))
    rows = []
    for rec in reader:
        if rec["error"]:
            continue
        rows.append(
            MetricRow(
                case_id=rec["case_id"],
                fold=int(rec["fold"]),
                repeat=int(rec["repeat"]),
                config=rec["config"],
                class_label=int(rec["class"]),
                metrics={m: parse_float(rec[m]) for m in METRIC_COLUMNS},
            )
        )
    return rows


CONVENTIONS = {
    "hd95": "max of directed area-weighted 95th percentiles",
    "zero_differences": "dropped before ranking",
    "adaptive_dice": "binarized volume-weighted ratio (raw + normalized variant)",
    "lesion_matching": "any-overlap (>= 1 shared voxel)",
    "nan_policy": "NaN cases excluded per metric (pairwise deletion)",
}


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    class_label: int
    mean_a: float
    mean_b: float
    p_value: float | None  # None when the Wilcoxon sample is degenerate
    n_effective: int
    significant: bool
    method: str


@dataclass(frozen=True)
class ComparisonReport:
    config_a: str
    config_b: str
    rows: list[ComparisonRow]
    metadata: dict


def compare_tables(rows_a: list[MetricRow], rows_b: list[MetricRow], tolerance_mm: float = 1.0,
                   connectivity: Connectivity = DEFAULT_CONNECTIVITY) -> ComparisonReport:
    """Per-patient reduction of both tables, then paired Wilcoxon per metric."""
    cases_a = {r.case_id for r in rows_a}
    cases_b = {r.case_id for r in rows_b}
    if cases_a != cases_b:
        missing = sorted(cases_a ^ cases_b)
        raise ValueError(f"case sets differ between tables; unmatched ids: {missing}")
    config_a = rows_a[0].config if rows_a else "A"
    config_b = rows_b[0].config if rows_b else "B"
    folds_a = {(r.case_id): r.fold for r in rows_a}
    for r in rows_b:
        if folds_a.get(r.case_id) != r.fold:
            raise ValueError(f"case {r.case_id!r} has inconsistent fold assignment across configurations")

    agg_a = aggregate_runs(rows_a)
    agg_b = aggregate_runs(rows_b)
    classes = sorted({r.class_label for r in rows_a})
    report_rows: list[ComparisonRow] = []
    for class_label in classes:
        for metric in REPORT_METRICS:
            per_a = agg_a.get((config_a, class_label, metric), {})
            per_b = agg_b.get((config_b, class_label, metric), {})
            ids = sorted(per_a)
            sample = PairedSample(
                case_ids=ids,
                a=[per_a[i] for i in ids],
                b=[per_b.get(i, float("nan")) for i in ids],
            )
            try:
                res = wilcoxon_signed_rank(sample)
                p, n_eff, method = res.p_value, res.n_effective, res.method
            except DegenerateSampleError:
                p, n_eff, method = None, 0, "degenerate"
            report_rows.append(
                ComparisonRow(
                    metric=metric,
                    class_label=class_label,
                    mean_a=config_mean(per_a),
                    mean_b=config_mean(per_b),
                    p_value=p,
                    n_effective=n_eff,
                    significant=(p is not None and p < 0.05),
                    method=method,
                )
            )
    metadata = {
        "config_a": config_a,
        "config_b": config_b,
        "tolerance_mm": tolerance_mm,
        "connectivity": connectivity.value,
        "conventions": CONVENTIONS,
        "significance_threshold": 0.05,
    }
    return ComparisonReport(config_a=config_a, config_b=config_b, rows=report_rows, metadata=metadata)


def report_to_json(report: ComparisonReport) -> str:
    doc = {
        "metadata": report.metadata,
        "rows": [
            {
                "metric": r.metric,
                "class": r.class_label,
                "class_name": LABEL_NAMES.get(r.class_label, str(r.class_label)),
                "mean_a": _json_safe(r.mean_a),
                "mean_b": _json_safe(r.mean_b),
                "p_value": _json_safe(r.p_value) if r.p_value is not None else None,
                "n_effective": r.n_effective,
                "significant": r.significant,
                "method": r.method,
                "conventions": report.metadata["conventions"],
            }
            for r in report.rows
        ],
    }
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def report_to_text(report: ComparisonReport) -> str:
    """Fixed-width table in the metric x configuration x p-value layout."""
    name_a = report.config_a
    name_b = report.config_b
    lines = []
    header = f"{'Metric':<28} {name_a:>12} {name_b:>12} {'p value':>10}"
    lines.append(header)
    lines.append("-" * len(header))
    for r in report.rows:
        label = f"{LABEL_NAMES.get(r.class_label, r.class_label)} {r.metric}"
        p_txt = "—" if r.p_value is None else f"{r.p_value:.3f}" + (" *" if r.significant else "")
        lines.append(f"{label:<28} {fmt_float(r.mean_a):>12} {fmt_float(r.mean_b):>12} {p_txt:>10}")
    lines.append("")
    lines.append(f"* p < {report.metadata['significance_threshold']} (two-sided Wilcoxon signed-rank, per-patient pairing)")
    lines.append(f"conventions: hd95={report.metadata['conventions']['hd95']}; zero diffs {report.metadata['conventions']['zero_differences']}")
    return "\n".join(lines) + "\n"
