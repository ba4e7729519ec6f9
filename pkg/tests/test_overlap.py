from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lesionmetrics import (
    Connectivity,
    adaptive_dice,
    adaptive_dice_normalized,
    detection_metrics,
    lesionwise_dice,
    volumetric_dice,
)

from conftest import bm, random_mask
from oracles import brute_detection, brute_lesionwise_dice


def _two_lesion_mask(small_at=(0, 0, 0)):
    m = np.zeros((12, 5, 5), dtype=bool)
    m[small_at] = True
    m[2:6, :, :] = True  # 100-voxel lesion
    return m


def test_volumetric_dice_examples(rng):
    m = random_mask(rng, 8)
    if not m.any():
        m[0, 0, 0] = True
    assert volumetric_dice(bm(m), bm(m)) == 1.0

    a = np.zeros((4, 4, 4), dtype=bool)
    b = np.zeros((4, 4, 4), dtype=bool)
    a[0, 0, 0] = True
    b[3, 3, 3] = True
    assert volumetric_dice(bm(a), bm(b)) == 0.0

    a = np.zeros((4, 4, 4), dtype=bool)
    b = np.zeros((4, 4, 4), dtype=bool)
    a[0, 0, 0:4] = True
    b[0, 0, 2:4] = True
    b[1, 1, 0:2] = True
    assert volumetric_dice(bm(a), bm(b)) == 0.5  # |gt|=4, |pred|=4, inter=2

    z = bm(np.zeros((3, 3, 3), dtype=bool))
    assert math.isnan(volumetric_dice(z, z))


def test_adaptive_dice_unit_lesion_perfect():
    m = np.zeros((3, 3, 3), dtype=bool)
    m[1, 1, 1] = True
    assert adaptive_dice(bm(m), bm(m)) == 1.0  # (2*1)/(1+1)


def test_adaptive_dice_empty_prediction():
    m = _two_lesion_mask()
    assert adaptive_dice(bm(m), bm(np.zeros_like(m))) == 0.0


def test_adaptive_dice_penalizes_small_miss_more():
    gt = _two_lesion_mask()
    pred = gt.copy()
    pred[0, 0, 0] = False  # miss the small lesion entirely
    g, p = bm(gt), bm(pred)
    assert adaptive_dice(g, p) < volumetric_dice(g, p)
    # direct evaluation: num = 2*(100*0.1), den = 100 + (1 + 10)
    assert adaptive_dice(g, p) == pytest.approx(20.0 / 111.0, rel=1e-12)


def test_adaptive_dice_normalized_perfect_is_one(rng):
    for _ in range(5):
        m = random_mask(rng, 9)
        if not m.any():
            m[0, 0, 0] = True
        assert adaptive_dice_normalized(bm(m), bm(m)) == pytest.approx(1.0, rel=1e-12)


def test_adaptive_dice_nan_and_zero_edges():
    z = np.zeros((3, 3, 3), dtype=bool)
    o = z.copy()
    o[1, 1, 1] = True
    assert math.isnan(adaptive_dice(bm(z), bm(z)))
    assert math.isnan(adaptive_dice_normalized(bm(z), bm(z)))
    assert adaptive_dice(bm(z), bm(o)) == 0.0
    assert adaptive_dice_normalized(bm(z), bm(o)) == 0.0


def test_lesionwise_dice_examples():
    m = np.zeros((10, 6, 6), dtype=bool)
    m[0, 0, 0] = True
    m[2:4, 2:4, 2:4] = True
    m[7:9, 0:2, 4:6] = True
    assert lesionwise_dice(bm(m), bm(m)) == 1.0  # 3 lesions, perfect

    gt = np.zeros((10, 4, 4), dtype=bool)
    gt[0:2, 0:2, 0:2] = True
    gt[6:8, 0:2, 0:2] = True
    pred = np.zeros_like(gt)
    pred[0:2, 0:2, 0:2] = True  # one matched exactly, one missed
    assert lesionwise_dice(bm(gt), bm(pred)) == 0.5

    gt2 = np.zeros((10, 4, 4), dtype=bool)
    gt2[0:2, 0:2, 0:2] = True
    pred2 = gt2.copy()
    pred2[8, 3, 3] = True  # perfect match + spurious lesion
    assert lesionwise_dice(bm(gt2), bm(pred2)) == 0.5


def test_lesionwise_equals_volumetric_single_components(rng):
    for _ in range(10):
        gt = np.zeros((8, 8, 8), dtype=bool)
        pred = np.zeros_like(gt)
        x, y, z = (int(v) for v in rng.integers(1, 4, 3))
        gt[x : x + 3, y : y + 3, z : z + 3] = True
        pred[x + 1 : x + 4, y : y + 3, z : z + 3] = True
        g, p = bm(gt), bm(pred)
        assert lesionwise_dice(g, p) == pytest.approx(volumetric_dice(g, p), rel=1e-12)


def test_detection_examples():
    gt = np.zeros((12, 6, 6), dtype=bool)
    gt[0:2, 0:2, 0:2] = True
    gt[5:7, 0:2, 0:2] = True
    gt[10:12, 4:6, 4:6] = True
    pred = np.zeros_like(gt)
    pred[0:2, 0:2, 0:2] = True
    pred[5, 0, 0] = True  # overlaps second lesion
    res = detection_metrics(bm(gt), bm(pred))
    assert res.sensitivity == pytest.approx(2.0 / 3.0)
    assert res.precision == 1.0
    assert res.matched_gt == 2 and res.missed_gt == 1
    assert res.matched_pred == 2 and res.spurious_pred == 0

    perfect = detection_metrics(bm(gt), bm(gt))
    assert perfect.sensitivity == 1.0 and perfect.precision == 1.0

    gt2 = np.zeros((14, 4, 4), dtype=bool)
    gt2[0:2, 0:2, 0:2] = True
    pred2 = np.zeros_like(gt2)
    pred2[0, 0, 0] = True  # hits the gt lesion
    pred2[5, 0, 0] = True
    pred2[8, 2, 2] = True
    pred2[12, 1, 1] = True
    res2 = detection_metrics(bm(gt2), bm(pred2))
    assert res2.sensitivity == 1.0
    assert res2.precision == 0.25


def test_single_shared_voxel_counts_as_detection():
    gt = np.zeros((6, 6, 6), dtype=bool)
    gt[1:4, 1:4, 1:4] = True
    pred = np.zeros_like(gt)
    pred[3:6, 3:6, 3:6] = True  # overlap is exactly voxel (3,3,3)
    assert int((gt & pred).sum()) == 1
    res = detection_metrics(bm(gt), bm(pred))
    assert res.sensitivity == 1.0
    assert res.precision == 1.0


def test_detection_nan_denominators():
    z = np.zeros((4, 4, 4), dtype=bool)
    o = z.copy()
    o[0, 0, 0] = True
    res = detection_metrics(bm(z), bm(o))
    assert math.isnan(res.sensitivity)
    assert res.precision == 0.0
    res2 = detection_metrics(bm(o), bm(z))
    assert res2.sensitivity == 0.0
    assert math.isnan(res2.precision)
    assert math.isnan(lesionwise_dice(bm(z), bm(z)))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_detection_duality(seed):
    g = np.random.default_rng(seed)
    dims = tuple(int(g.integers(3, 11)) for _ in range(3))
    a = g.random(dims) < 0.25
    b = g.random(dims) < 0.25
    if not a.any():
        a[0, 0, 0] = True
    if not b.any():
        b[0, 0, 0] = True
    ra = detection_metrics(bm(a), bm(b))
    rb = detection_metrics(bm(b), bm(a))
    assert ra.sensitivity == rb.precision
    assert ra.precision == rb.sensitivity


def test_matches_brute_force_oracles(rng):
    for _ in range(30):
        dims = tuple(int(rng.integers(3, 10)) for _ in range(3))
        gt = rng.random(dims) < 0.25
        pred = rng.random(dims) < 0.25
        g, p = bm(gt), bm(pred)
        for conn in (Connectivity.FACE6, Connectivity.CORNER26):
            res = detection_metrics(g, p, conn)
            sens_b, prec_b = brute_detection(gt, pred, conn.value)
            assert (math.isnan(res.sensitivity) and math.isnan(sens_b)) or res.sensitivity == sens_b
            assert (math.isnan(res.precision) and math.isnan(prec_b)) or res.precision == prec_b
            lw = lesionwise_dice(g, p, conn)
            lw_b = brute_lesionwise_dice(gt, pred, conn.value)
            assert (math.isnan(lw) and math.isnan(lw_b)) or lw == pytest.approx(lw_b, rel=1e-12)


def test_match_table_invariants(rng):
    for _ in range(15):
        dims = (8, 8, 8)
        gt = rng.random(dims) < 0.2
        pred = rng.random(dims) < 0.2
        res = detection_metrics(bm(gt), bm(pred))
        t = res.table
        paired_gt = {a for a, _, _ in t.overlap_pairs}
        paired_pred = {b for _, b, _ in t.overlap_pairs}
        for i, vol, matched in t.gt_lesions:
            assert matched == (i in paired_gt)
            assert vol > 0
        for i, vol, matched in t.pred_lesions:
            assert matched == (i in paired_pred)
        gt_vol = {i: v for i, v, _ in t.gt_lesions}
        pred_vol = {i: v for i, v, _ in t.pred_lesions}
        for a, b, n in t.overlap_pairs:
            assert 1 <= n <= min(gt_vol[a], pred_vol[b])
        doc = t.to_json()
        assert set(doc) == {"gt_lesions", "pred_lesions", "overlap_pairs"}


def test_dimension_mismatch(rng):
    a = bm(np.zeros((3, 3, 3), dtype=bool))
    b = bm(np.zeros((3, 3, 4), dtype=bool))
    for fn in (volumetric_dice, adaptive_dice, lesionwise_dice):
        with pytest.raises(ValueError, match="dimension mismatch"):
            fn(a, b)
    with pytest.raises(ValueError, match="dimension mismatch"):
        detection_metrics(a, b)
