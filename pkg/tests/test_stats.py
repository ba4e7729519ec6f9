from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.stats import rankdata

from lesionmetrics import (
    DegenerateSampleError,
    MetricRow,
    PairedSample,
    aggregate_runs,
    config_mean,
    wilcoxon_signed_rank,
)
from lesionmetrics.stats import _approx_two_sided_p, _exact_two_sided_p

from oracles import enumerate_wilcoxon_two_sided


def _sample(a, b, ids=None):
    a = np.asarray(a, dtype=np.float64)
    ids = ids or [f"c{i}" for i in range(len(a))]
    return PairedSample(case_ids=ids, a=a, b=np.asarray(b, dtype=np.float64))


def test_six_same_sign_differences():
    a = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 6.0])
    b = np.zeros(6)
    res = wilcoxon_signed_rank(_sample(a, b))
    assert res.p_value == 0.03125  # 2/64 by exhaustive enumeration
    assert res.method == "exact"
    assert res.statistic == 0.0
    assert res.n_effective == 6


def test_degenerate_sample():
    with pytest.raises(DegenerateSampleError, match="degenerate sample"):
        wilcoxon_signed_rank(_sample([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]))


def test_zero_differences_dropped():
    a = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]
    b = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]  # first pair ties and is dropped
    res = wilcoxon_signed_rank(_sample(a, b))
    assert res.n_effective == 6
    assert res.p_value == 0.03125


def test_exact_matches_enumeration_oracle(rng):
    for trial in range(40):
        n = int(rng.integers(2, 12))
        # small integer grid forces ties between absolute differences
        diffs = rng.integers(-4, 5, n).astype(np.float64)
        if not np.any(diffs != 0):
            diffs[0] = 1.0
        a = diffs
        b = np.zeros(n)
        res = wilcoxon_signed_rank(_sample(a, b))
        oracle = enumerate_wilcoxon_two_sided(diffs)
        assert res.p_value == pytest.approx(oracle, abs=1e-12)


def test_exact_and_approx_agree_at_boundary(rng):
    for trial in range(20):
        n = 25
        diffs = rng.normal(size=n)
        diffs[diffs == 0] = 0.5
        ranks = rankdata(np.abs(diffs))
        w_plus = float(ranks[diffs > 0].sum())
        p_exact = _exact_two_sided_p(ranks, w_plus)
        p_approx = _approx_two_sided_p(ranks, w_plus)
        assert abs(p_exact - p_approx) < 0.01


def test_method_switches_at_25(rng):
    a26 = rng.normal(size=26)
    res = wilcoxon_signed_rank(_sample(a26, np.zeros(26)))
    assert res.method == "approx"
    a25 = rng.normal(size=25)
    res = wilcoxon_signed_rank(_sample(a25, np.zeros(25)))
    assert res.method == "exact"


def test_swap_symmetry(rng):
    for _ in range(10):
        n = int(rng.integers(4, 20))
        a = rng.normal(size=n)
        b = rng.normal(size=n)
        p_ab = wilcoxon_signed_rank(_sample(a, b)).p_value
        p_ba = wilcoxon_signed_rank(_sample(b, a)).p_value
        assert p_ab == p_ba


def test_positive_scaling_invariance(rng):
    n = 15
    a = rng.normal(size=n)
    b = rng.normal(size=n)
    p1 = wilcoxon_signed_rank(_sample(a, b)).p_value
    p2 = wilcoxon_signed_rank(_sample(3.7 * (a - b), np.zeros(n))).p_value
    assert p1 == p2


def test_nan_pairs_removed():
    a = [1.0, 2.0, 3.0, float("nan"), 5.0, 6.0, 7.0]
    b = [0.0, 0.0, 0.0, 0.0, float("nan"), 0.0, 0.0]
    res = wilcoxon_signed_rank(_sample(a, b))
    ref = wilcoxon_signed_rank(_sample([1.0, 2.0, 3.0, 6.0, 7.0], [0.0] * 5))
    assert res.n_effective == 5
    assert res.p_value == ref.p_value


def test_paired_sample_validation():
    with pytest.raises(ValueError, match="equal lengths"):
        PairedSample(case_ids=["a"], a=np.zeros(2), b=np.zeros(2))
    with pytest.raises(ValueError, match="unique"):
        PairedSample(case_ids=["a", "a"], a=np.zeros(2), b=np.zeros(2))


def _row(case, fold, repeat, config, dice, cls=2):
    return MetricRow(case_id=case, fold=fold, repeat=repeat, config=config, class_label=cls, metrics={"dice": dice})


def test_aggregate_per_patient_mean():
    rows = [_row("p1", 0, r, "base", v) for r, v in enumerate([0.7, 0.8, 0.9])]
    agg = aggregate_runs(rows)
    assert agg[("base", 2, "dice")]["p1"] == pytest.approx(0.8)


def test_aggregate_nan_repeat_excluded():
    rows = [_row("p1", 0, 0, "base", 0.7), _row("p1", 0, 1, "base", float("nan"))]
    agg = aggregate_runs(rows)
    assert agg[("base", 2, "dice")]["p1"] == pytest.approx(0.7)
    only_nan = [_row("p2", 0, 0, "base", float("nan"))]
    assert math.isnan(aggregate_runs(only_nan)[("base", 2, "dice")]["p2"])


def test_aggregate_cross_validation_shape():
    # 150 cases x 5 folds x 3 repeats reduce to 150 per-patient scores
    rows = []
    rng = np.random.default_rng(0)
    for i in range(150):
        fold = i % 5
        for rep in range(3):
            rows.append(_row(f"case{i:03d}", fold, rep, "base", float(rng.random())))
    agg = aggregate_runs(rows)
    scores = agg[("base", 2, "dice")]
    assert len(scores) == 150
    assert len(rows) == 450


def test_aggregate_permutation_invariant(rng):
    rows = []
    for i in range(12):
        for rep in range(3):
            rows.append(_row(f"c{i}", i % 3, rep, "base", float(rng.random())))
    agg1 = aggregate_runs(rows)
    agg2 = aggregate_runs(list(reversed(rows)))
    assert agg1 == agg2


def test_aggregate_fold_conflict():
    rows = [_row("p1", 0, 0, "base", 0.5), _row("p1", 1, 1, "base", 0.6)]
    with pytest.raises(ValueError, match="folds"):
        aggregate_runs(rows)


def test_config_mean_skips_nan():
    assert config_mean({"a": 0.5, "b": float("nan"), "c": 1.0}) == pytest.approx(0.75)
    assert math.isnan(config_mean({"a": float("nan")}))
