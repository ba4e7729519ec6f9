from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from lesionmetrics import LabelVolume, Spacing
from lesionmetrics.cli import main as cli_main
from lesionmetrics.report import SCHEMA_TOKEN, fmt_float, read_metric_csv
from lesionmetrics.volume import load_raw, save_raw

from e2e_utils import build_suite


def _read_rows(path):
    lines = path.read_text().splitlines()
    assert lines[0] == SCHEMA_TOKEN
    return list(csv.DictReader(lines[1:]))


@pytest.fixture(scope="module")
def suite(tmp_path_factory):
    root = tmp_path_factory.mktemp("suite")
    manifests = build_suite(root, n_cases=4, repeats=2)
    csv_a = root / "a.csv"
    csv_b = root / "b.csv"
    assert cli_main(["evaluate", "--manifest", str(manifests["a"]), "--out", str(csv_a), "--json", str(root / "a.json")]) == 0
    assert cli_main(["evaluate", "--manifest", str(manifests["b"]), "--out", str(csv_b)]) == 0
    return {"root": root, "a": csv_a, "b": csv_b, "manifests": manifests}


def test_perfect_prediction_row(suite):
    rows = _read_rows(suite["b"])
    # config B predicts the ground truth exactly
    for r in rows:
        assert r["dice"] == "1"
        assert r["sds"] == "1"
        assert r["msd"] == "0"
        assert r["hd95"] == "0"
        assert r["det_sensitivity"] == "1"
        assert r["det_precision"] == "1"
        assert r["error"] == ""


def test_deleted_lesion_changes_ln_only(suite):
    rows_a = _read_rows(suite["a"])
    ln = [r for r in rows_a if r["class"] == "2"]
    pt = [r for r in rows_a if r["class"] == "1"]
    for r in ln:
        assert float(r["det_sensitivity"]) == 0.5  # one of two LN lesions deleted
        assert float(r["det_fn"]) == 1
    for r in pt:
        assert r["dice"] == "1" and r["det_sensitivity"] == "1"


def test_row_count_and_order(suite):
    rows = _read_rows(suite["a"])
    assert len(rows) == 4 * 2 * 2  # cases x repeats x classes
    keys = [(r["case_id"], int(r["repeat"]), int(r["class"])) for r in rows]
    assert keys == sorted(keys)


def test_evaluate_deterministic(suite, tmp_path):
    out1 = tmp_path / "rep1.csv"
    out2 = tmp_path / "rep2.csv"
    j1 = tmp_path / "rep1.json"
    j2 = tmp_path / "rep2.json"
    m = suite["manifests"]["a"]
    assert cli_main(["evaluate", "--manifest", str(m), "--out", str(out1), "--json", str(j1)]) == 0
    assert cli_main(["evaluate", "--manifest", str(m), "--out", str(out2), "--json", str(j2), "--jobs", "4"]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert j1.read_bytes() == j2.read_bytes()
    assert out1.read_bytes() == suite["a"].read_bytes()


def test_compare_selective_ln_effect(suite, tmp_path):
    report_json = tmp_path / "cmp.json"
    report_txt = tmp_path / "cmp.txt"
    rc = cli_main(["compare", "--a", str(suite["a"]), "--b", str(suite["b"]), "--json", str(report_json), "--out", str(report_txt)])
    assert rc == 0
    doc = json.loads(report_json.read_text())
    rows = {(r["class"], r["metric"]): r for r in doc["rows"]}

    ln_sens = rows[(2, "det_sensitivity")]
    assert ln_sens["mean_b"] > ln_sens["mean_a"]
    ln_dice = rows[(2, "dice")]
    assert ln_dice["mean_b"] > ln_dice["mean_a"]
    for metric in ("dice", "sds", "msd", "hd95", "det_sensitivity", "det_precision"):
        pt = rows[(1, metric)]
        assert pt["mean_a"] == pt["mean_b"]
        assert pt["method"] == "degenerate"  # PT untouched: no nonzero differences
        assert pt["p_value"] is None

    text = report_txt.read_text()
    assert "PT dice" in text and "LN dice" in text
    assert "—" in text  # degenerate rows render as an em dash

    # identical inputs compare equal: every mean matches and Wilcoxon degenerates
    rc = cli_main(["compare", "--a", str(suite["a"]), "--b", str(suite["a"]), "--json", str(tmp_path / "same.json")])
    assert rc == 0
    same = json.loads((tmp_path / "same.json").read_text())
    for r in same["rows"]:
        if isinstance(r["mean_a"], float):
            assert r["mean_a"] == r["mean_b"] or (math.isnan(r["mean_a"]) and math.isnan(r["mean_b"]))
        assert r["p_value"] is None


def test_compare_deterministic(suite, tmp_path):
    j1 = tmp_path / "c1.json"
    j2 = tmp_path / "c2.json"
    for j in (j1, j2):
        assert cli_main(["compare", "--a", str(suite["a"]), "--b", str(suite["b"]), "--json", str(j)]) == 0
    assert j1.read_bytes() == j2.read_bytes()


def test_significance_flag_thresholds(tmp_path):
    # construct two tables whose LN dice differences give p = 0.03125 (n=6, same sign)
    def write_table(path, config, dice_values):
        lines = [SCHEMA_TOKEN]
        header = "case_id,config,fold,repeat,class,dice,adaptive_dice,adaptive_dice_norm,lesionwise_dice,sds,msd,hd95,det_sensitivity,det_precision,det_tp_gt,det_fn,det_tp_pred,det_fp,error"
        lines.append(header)
        for i, v in enumerate(dice_values):
            lines.append(f"case{i},{config},0,0,2,{fmt_float(v)},0.5,0.5,0.5,0.5,1,1,0.5,0.5,1,0,1,0,")
        path.write_text("\n".join(lines) + "\n")

    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    base = [0.70, 0.72, 0.74, 0.76, 0.78, 0.80]
    write_table(a, "base", base)
    write_table(b, "var", [v + 0.01 * (i + 1) for i, v in enumerate(base)])
    out = tmp_path / "r.json"
    assert cli_main(["compare", "--a", str(a), "--b", str(b), "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    row = next(r for r in doc["rows"] if r["metric"] == "dice")
    assert row["p_value"] == 0.03125
    assert row["significant"] is True

    # n = 4 same-sign differences: p = 0.125, not significant
    write_table(a, "base", base[:4])
    write_table(b, "var", [v + 0.01 for v in base[:4]])
    assert cli_main(["compare", "--a", str(a), "--b", str(b), "--json", str(out)]) == 0
    doc = json.loads(out.read_text())
    row = next(r for r in doc["rows"] if r["metric"] == "dice")
    assert row["p_value"] == 0.125
    assert row["significant"] is False


def test_compare_case_set_mismatch(tmp_path, suite, capsys):
    rows = read_metric_csv(suite["a"])
    truncated = suite["root"] / "short.csv"
    lines = suite["a"].read_text().splitlines()
    truncated.write_text("\n".join(lines[:-4]) + "\n")  # drop the last case entirely (2 repeats x 2 classes)
    rc = cli_main(["compare", "--a", str(suite["a"]), "--b", str(truncated)])
    assert rc == 2
    assert "case sets differ" in capsys.readouterr().err


def test_evaluate_missing_file_partial_vs_strict(tmp_path, suite, capsys):
    root = suite["root"]
    manifest = tmp_path / "broken.csv"
    with manifest.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["case_id", "gt", "pred", "fold", "repeat", "config"])
        w.writerow(["case00", str(root / "case00/ground_truth.json"), str(root / "case00/pred_a.json"), 0, 0, "x"])
        w.writerow(["ghost", str(root / "nope.json"), str(root / "nope.json"), 0, 0, "x"])
    out = tmp_path / "out.csv"
    rc = cli_main(["evaluate", "--manifest", str(manifest), "--out", str(out)])
    assert rc == 3  # partial: good rows evaluated, bad row reported
    rows = _read_rows(out)
    good = [r for r in rows if r["error"] == ""]
    bad = [r for r in rows if r["error"] != ""]
    assert len(good) == 2 and len(bad) == 1
    rc = cli_main(["evaluate", "--manifest", str(manifest), "--out", str(out), "--strict"])
    assert rc == 2


def test_manifest_validation(tmp_path, capsys):
    bad_header = tmp_path / "m1.csv"
    bad_header.write_text("id,gt,pred\n")
    assert cli_main(["evaluate", "--manifest", str(bad_header), "--out", str(tmp_path / "o.csv")]) == 2
    assert "manifest header" in capsys.readouterr().err

    dup = tmp_path / "m2.csv"
    dup.write_text(
        "case_id,gt,pred,fold,repeat,config\n"
        "c1,a.json,b.json,0,0,x\n"
        "c1,a.json,b.json,0,0,x\n"
    )
    assert cli_main(["evaluate", "--manifest", str(dup), "--out", str(tmp_path / "o.csv")]) == 2
    assert "duplicate manifest entry" in capsys.readouterr().err


def test_empty_class_rows_are_nan(tmp_path):
    # a case with no LN voxels in gt or pred: every LN metric is NaN
    data = np.zeros((8, 8, 8), dtype=np.int32)
    data[2:5, 2:5, 2:5] = 1
    vol = LabelVolume(data=data, spacing=Spacing(1, 1, 1))
    save_raw(vol, tmp_path / "gt.json")
    save_raw(vol, tmp_path / "pred.json")
    manifest = tmp_path / "m.csv"
    manifest.write_text("case_id,gt,pred,fold,repeat,config\nc1,gt.json,pred.json,0,0,x\n")
    out = tmp_path / "out.csv"
    assert cli_main(["evaluate", "--manifest", str(manifest), "--out", str(out)]) == 0
    rows = _read_rows(out)
    ln = next(r for r in rows if r["class"] == "2")
    for m in ("dice", "adaptive_dice", "lesionwise_dice", "sds", "msd", "hd95", "det_sensitivity", "det_precision"):
        assert ln[m] == "NaN"
    pt = next(r for r in rows if r["class"] == "1")
    assert pt["dice"] == "1"


def test_match_table_flag(suite, tmp_path):
    out = tmp_path / "o.csv"
    table_path = tmp_path / "match.json"
    m = suite["manifests"]["a"]
    assert cli_main(["evaluate", "--manifest", str(m), "--out", str(out), "--match-table", str(table_path)]) == 0
    doc = json.loads(table_path.read_text())
    key = next(k for k in doc if k.endswith("|LN"))
    entry = doc[key]
    assert {"gt_lesions", "pred_lesions", "overlap_pairs"} <= set(entry)
    assert len(entry["gt_lesions"]) == 2  # both LN lesions in gt


def test_loss_eval_cli(tmp_path, suite, capsys):
    root = suite["root"]
    gt = str(root / "case00/ground_truth.json")
    rc = cli_main([
        "loss", "eval",
        "--pred", str(root / "case00/pred_PT.json"),
        "--pred", str(root / "case00/pred_LN.json"),
        "--gt", gt,
        "--preset", "selective",
        "--json",
    ])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(doc["per_class"]) == {"PT", "LN"}
    assert doc["value"] == pytest.approx((doc["per_class"]["PT"]["value"] + doc["per_class"]["LN"]["value"]) / 2)

    grad_path = tmp_path / "grad.json"
    rc = cli_main(["loss", "eval", "--pred", str(root / "case00/pred_LN.json"), "--gt", gt, "--loss", "va", "--grad-out", str(grad_path)])
    assert rc == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["loss"] == "va"
    header = json.loads(grad_path.read_text())
    assert header["dtype"] == "f64"
    grad = np.frombuffer((tmp_path / "grad.bin").read_bytes(), dtype="<f8")
    assert grad.shape[0] == 22 * 16 * 16


def test_loss_gradcheck_cli(capsys):
    rc = cli_main(["loss", "gradcheck", "--seed", "7", "--trials", "3"])
    assert rc == 0
    assert "max relative gradient error" in capsys.readouterr().out


def test_components_dump_cli(tmp_path, suite, capsys):
    root = suite["root"]
    out_base = tmp_path / "comp.json"
    rc = cli_main([
        "components", "dump",
        "--mask", str(root / "case00/ground_truth.json"),
        "--label", "2",
        "--connectivity", "26",
        "--out", str(out_base),
    ])
    assert rc == 0
    ids = load_raw(out_base, labels=tuple(range(1, 100)))
    vols = json.loads((tmp_path / "comp.volumes.json").read_text())
    assert vols["count"] == 2
    assert sorted(int(v) for v in vols["volumes"].values()) == sorted(
        int(np.sum(ids.data == j)) for j in (1, 2)
    )


def test_phantom_cli_writes_probs(tmp_path):
    spec = {
        "dims": [10, 10, 10],
        "spacing": [1, 1, 1],
        "lesions": [{"center": [5, 5, 5], "radius_mm": 2.0, "label": 1}],
        "noise": 0.3,
        "seed": 3,
    }
    spec_path = tmp_path / "s.json"
    spec_path.write_text(json.dumps(spec))
    assert cli_main(["phantom", "--spec", str(spec_path), "--out-dir", str(tmp_path / "out")]) == 0
    for name in ("ground_truth.json", "pred_PT.json", "pred_LN.json"):
        assert (tmp_path / "out" / name).exists()


def test_console_script_entry():
    proc = subprocess.run(
        [sys.executable, "-m", "lesionmetrics.cli", "loss", "gradcheck", "--trials", "1"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "gradient error" in proc.stdout
