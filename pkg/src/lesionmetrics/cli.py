"""Command-line interface.

Subcommands: evaluate, compare, loss eval, loss gradcheck, phantom,
components dump. Exit codes: 0 success, 2 validation failure, 3 partial
evaluation in non-strict mode.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import report as report_mod
from .components import Connectivity, label_components
from .loss import (
    DEFAULT_EPSILON,
    DEFAULT_NUMERATOR_CONSTANT,
    LossConfig,
    configured_loss,
    cross_entropy_loss,
    preset,
    soft_dice_loss,
    va_dice_loss,
)
from .phantom import PhantomSpec, generate
from .report import EvalOptions, compare_tables, evaluate_manifest, read_manifest, read_metric_csv
from .volume import (
    LABEL_NAMES,
    BinaryMask,
    LabelVolume,
    ProbVolume,
    Spacing,
    VolumeFormatError,
    extract_class,
    load_volume,
    save_raw,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_PARTIAL = 3


def _connectivity(value: str) -> Connectivity:
    return Connectivity(int(value))


def _full_float(v: float) -> float | str:
    if math.isnan(v):
        return "NaN"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def cmd_evaluate(args) -> int:
    try:
        rows = read_manifest(args.manifest)
        options = EvalOptions(
            tolerance_mm=args.tolerance_mm,
            connectivity=args.connectivity,
            classes=tuple(args.classes),
            jobs=args.jobs,
            strict=args.strict,
            match_tables=args.match_table is not None,
        )
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    result = evaluate_manifest(rows, options)
    report_mod.write_csv(result, args.out)
    if args.json:
        report_mod.write_json(result, args.json)
    if args.match_table:
        Path(args.match_table).write_text(json.dumps(result.match_tables, sort_keys=True, indent=1) + "\n")
    for err in result.errors:
        print(f"error: case {err['case_id']} repeat {err['repeat']}: {err['error']}", file=sys.stderr)
    if result.errors:
        return EXIT_VALIDATION if args.strict else EXIT_PARTIAL
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        rows_a = read_metric_csv(args.a)
        rows_b = read_metric_csv(args.b)
        rep = compare_tables(rows_a, rows_b, tolerance_mm=args.tolerance_mm, connectivity=args.connectivity)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    text = report_mod.report_to_text(rep)
    if args.json:
        Path(args.json).write_text(report_mod.report_to_json(rep))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _load_prob(path: str) -> ProbVolume:
    vol = load_volume(path)
    if isinstance(vol, LabelVolume):
        # label predictions act as hard probabilities of their nonzero voxels
        return ProbVolume(data=(vol.data > 0).astype(np.float64), spacing=vol.spacing)
    return vol


def _single_loss(kind: str, p: ProbVolume, g: BinaryMask, epsilon: float, c: float, conn: Connectivity):
    if kind == "soft":
        return soft_dice_loss(p, g, epsilon)
    if kind == "ce":
        return cross_entropy_loss(p, g, epsilon)
    if kind == "va":
        cfg = LossConfig(epsilon=epsilon, numerator_constant=c, connectivity=conn)
        return va_dice_loss(p, g, cfg)
    raise ValueError(f"unknown loss {kind!r}")


def cmd_loss_eval(args) -> int:
    try:
        if args.batch:
            return _loss_eval_batch(args)
        gt = load_volume(args.gt)
        if not isinstance(gt, LabelVolume):
            raise ValueError("ground truth must be a label volume")
        if args.loss:
            preds = [_load_prob(p) for p in args.pred]
            mask = BinaryMask(data=gt.data > 0, spacing=gt.spacing)
            res = _single_loss(args.loss, preds[0], mask, args.epsilon, args.numerator_constant, args.connectivity)
            doc = {"loss": args.loss, "value": _full_float(res.value)}
            if args.grad_out:
                _save_grad(res.gradient, gt, args.grad_out)
                doc["gradient"] = str(args.grad_out)
            print(json.dumps(doc, sort_keys=True))
            return EXIT_OK
        cfg = preset(args.preset)
        labels = sorted(cfg.per_class_mode)
        if len(args.pred) != len(labels):
            raise ValueError(f"preset {args.preset!r} needs {len(labels)} prediction channel(s) for classes {labels}")
        p_per_class = {label: _load_prob(path) for label, path in zip(labels, args.pred)}
        res = configured_loss(p_per_class, gt, cfg)
        doc = {
            "preset": args.preset,
            "value": _full_float(res.value),
            "per_class": {
                LABEL_NAMES.get(label, str(label)): {"value": _full_float(r.value)}
                for label, r in res.per_class.items()
            },
        }
        if res.cross_entropy is not None:
            for label, r in res.cross_entropy.items():
                doc["per_class"][LABEL_NAMES.get(label, str(label))]["cross_entropy"] = _full_float(r.value)
        print(json.dumps(doc, sort_keys=True))
        return EXIT_OK
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def _save_grad(gradient: np.ndarray, like, path: str) -> None:
    # gradients are not probabilities, so bypass the ProbVolume range check
    from .volume import _raw_paths

    header_path, payload_path = _raw_paths(path)
    header = {"dims": list(gradient.shape), "spacing": [like.spacing.dx, like.spacing.dy, like.spacing.dz], "dtype": "f64"}
    header_path.write_text(json.dumps(header, sort_keys=True) + "\n")
    payload_path.write_bytes(np.ascontiguousarray(gradient.astype("<f8")).tobytes())


def _loss_eval_batch(args) -> int:
    """Evaluate many (loss, pred, gt) triples listed in a CSV in one process.

    Columns: loss,pred,gt,grad_out (grad_out optional/empty). Emits one
    JSON line per row with the exact float64 value.
    """
    out_lines = []
    with open(args.batch, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            gt = load_volume(rec["gt"])
            if not isinstance(gt, LabelVolume):
                raise ValueError(f"{rec['gt']}: ground truth must be a label volume")
            mask = BinaryMask(data=gt.data > 0, spacing=gt.spacing)
            p = _load_prob(rec["pred"])
            res = _single_loss(rec["loss"], p, mask, args.epsilon, args.numerator_constant, args.connectivity)
            doc = {"loss": rec["loss"], "pred": rec["pred"], "value": _full_float(res.value)}
            grad_out = (rec.get("grad_out") or "").strip()
            if grad_out:
                _save_grad(res.gradient, gt, grad_out)
                doc["gradient"] = grad_out
            out_lines.append(json.dumps(doc, sort_keys=True))
    print("\n".join(out_lines))
    return EXIT_OK


def cmd_loss_gradcheck(args) -> int:
    """Finite-difference check of all three analytic gradients."""
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    h = 1e-4
    for _ in range(args.trials):
        dims = tuple(int(rng.integers(3, 7)) for _ in range(3))
        sp = Spacing(1.0, 1.0, 1.0)
        g = BinaryMask(data=rng.random(dims) < 0.4, spacing=sp)
        p = ProbVolume(data=rng.uniform(0.01, 0.99, dims), spacing=sp)
        for kind in ("soft", "va", "ce"):
            res = _single_loss(kind, p, g, args.epsilon, args.numerator_constant, args.connectivity)
            flat = p.data.ravel()
            idxs = rng.choice(flat.size, size=min(10, flat.size), replace=False)
            for k in idxs:
                up = flat.copy()
                up[k] += h
                dn = flat.copy()
                dn[k] -= h
                v_up = _single_loss(kind, ProbVolume(data=up.reshape(dims), spacing=sp), g, args.epsilon, args.numerator_constant, args.connectivity).value
                v_dn = _single_loss(kind, ProbVolume(data=dn.reshape(dims), spacing=sp), g, args.epsilon, args.numerator_constant, args.connectivity).value
                fd = (v_up - v_dn) / (2 * h)
                an = res.gradient.ravel()[k]
                err = abs(fd - an) / max(abs(fd), abs(an), 1e-7)
                worst = max(worst, err)
    print(f"max relative gradient error over {args.trials} trials: {worst:.3e}")
    return EXIT_OK if worst < 1e-4 else EXIT_VALIDATION


def cmd_phantom(args) -> int:
    try:
        spec = PhantomSpec.from_json(args.spec)
        result = generate(spec)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_raw(result.volume, out_dir / "ground_truth.json")
    for label, prob in result.prob_volumes.items():
        save_raw(prob, out_dir / f"pred_{LABEL_NAMES.get(label, label)}.json")
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote phantom to {out_dir}")
    return EXIT_OK


def cmd_components_dump(args) -> int:
    try:
        vol = load_volume(args.mask)
        if isinstance(vol, ProbVolume):
            mask = BinaryMask(data=vol.data >= 0.5, spacing=vol.spacing)
        elif args.label is not None:
            mask = extract_class(vol, args.label)
        else:
            mask = BinaryMask(data=vol.data > 0, spacing=vol.spacing)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    comp = label_components(mask, args.connectivity)
    ids_vol = LabelVolume(data=comp.ids, spacing=mask.spacing, labels=tuple(range(1, comp.count + 1)))
    save_raw(ids_vol, args.out, dtype="i32")
    table = {
        "connectivity": args.connectivity.value,
        "count": comp.count,
        "volumes": {str(j): v for j, v in comp.volume_table().items()},
    }
    Path(args.out).with_suffix(".volumes.json").write_text(json.dumps(table, sort_keys=True, indent=1) + "\n")
    print(f"{comp.count} component(s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesionmetrics", description="Volume-aware losses and lesion-wise evaluation for 3D segmentations")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--connectivity", type=_connectivity, choices=list(Connectivity), default=Connectivity.CORNER26, metavar="{6,18,26}")

    p_eval = sub.add_parser("evaluate", parents=[common], help="evaluate a manifest of cases to a metric CSV/JSON")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--out", required=True, help="output metric CSV")
    p_eval.add_argument("--json", help="optional JSON mirror of the CSV")
    p_eval.add_argument("--tolerance-mm", type=float, default=1.0)
    p_eval.add_argument("--classes", type=int, nargs="+", default=[1, 2])
    p_eval.add_argument("--jobs", type=int, default=0, help="parallel cases (default: LESIONMETRICS_THREADS or 1)")
    p_eval.add_argument("--strict", action="store_true")
    p_eval.add_argument("--match-table", help="write per-case lesion match tables to this JSON file")
    p_eval.set_defaults(func=cmd_evaluate)

    p_cmp = sub.add_parser("compare", parents=[common], help="compare two metric CSVs with paired Wilcoxon tests")
    p_cmp.add_argument("--a", required=True, help="baseline metric CSV")
    p_cmp.add_argument("--b", required=True, help="variant metric CSV")
    p_cmp.add_argument("--json", help="write the report as JSON")
    p_cmp.add_argument("--out", help="write the text table here instead of stdout")
    p_cmp.add_argument("--tolerance-mm", type=float, default=1.0)
    p_cmp.set_defaults(func=cmd_compare)

    p_loss = sub.add_parser("loss", help="loss evaluation and gradient checking")
    loss_sub = p_loss.add_subparsers(dest="loss_command", required=True)

    p_le = loss_sub.add_parser("eval", parents=[common], help="evaluate a loss on prediction/ground-truth volumes")
    p_le.add_argument("--pred", action="append", default=[], help="prediction volume (repeat per class channel)")
    p_le.add_argument("--gt", help="ground-truth label volume")
    p_le.add_argument("--preset", choices=["baseline", "dual", "selective"], default="baseline")
    p_le.add_argument("--loss", choices=["soft", "va", "ce"], help="single-channel loss instead of a preset")
    p_le.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p_le.add_argument("--numerator-constant", type=float, default=DEFAULT_NUMERATOR_CONSTANT)
    p_le.add_argument("--grad-out", help="write the gradient as a raw f64 volume")
    p_le.add_argument("--batch", help="CSV of loss,pred,gt,grad_out rows evaluated in one process")
    p_le.add_argument("--json", action="store_true", help="accepted for compatibility; output is always JSON")
    p_le.set_defaults(func=cmd_loss_eval)

    p_gc = loss_sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    p_gc.add_argument("--seed", type=int, default=0)
    p_gc.add_argument("--trials", type=int, default=20)
    p_gc.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON)
    p_gc.add_argument("--numerator-constant", type=float, default=DEFAULT_NUMERATOR_CONSTANT)
    p_gc.set_defaults(func=cmd_loss_gradcheck)

    p_ph = sub.add_parser("phantom", help="generate a synthetic phantom suite")
    p_ph.add_argument("--spec", required=True, help="phantom spec JSON")
    p_ph.add_argument("--out-dir", required=True)
    p_ph.set_defaults(func=cmd_phantom)

    p_comp = sub.add_parser("components", help="connected-component utilities")
    comp_sub = p_comp.add_subparsers(dest="components_command", required=True)
    p_cd = comp_sub.add_parser("dump", parents=[common], help="label a mask and dump ids + volume table")
    p_cd.add_argument("--mask", required=True)
    p_cd.add_argument("--label", type=int, help="extract this class of a label volume first")
    p_cd.add_argument("--out", required=True, help="output raw volume base path (ids as int32)")
    p_cd.set_defaults(func=cmd_components_dump)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except VolumeFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
