"""Volumetric, volume-weighted and lesion-wise overlap/detection metrics.

Lesion matching is any-overlap: a single shared voxel pairs a ground
truth component with a predicted component. Metrics that are undefined
for a case (e.g. both masks empty) return NaN, and NaN values are
excluded from aggregation downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .components import Connectivity, DEFAULT_CONNECTIVITY, label_components, weight_map
from .loss import DEFAULT_NUMERATOR_CONSTANT
from .volume import BinaryMask, check_same_grid


def volumetric_dice(gt: BinaryMask, pred: BinaryMask) -> float:
    """2|A∩B| / (|A|+|B|); NaN when both masks are empty."""
    check_same_grid(gt, pred)
    n_gt = gt.count
    n_pred = pred.count
    if n_gt + n_pred == 0:
        return float("nan")
    inter = int(np.sum(gt.data & pred.data))
    return 2.0 * inter / (n_gt + n_pred)


def adaptive_dice(
    gt: BinaryMask,
    pred: BinaryMask,
    conn: Connectivity = DEFAULT_CONNECTIVITY,
    c: float = DEFAULT_NUMERATOR_CONSTANT,
) -> float:
    """Volume-weighted Dice ratio on binarized predictions.

    (c * sum(w*pred over gt voxels)) / (|pred| + sum(w)) with w the
    inverse-sqrt-volume weights of the ground-truth components; the
    epsilon-free, binarized analogue of the volume-aware loss ratio.
    NaN when both masks are empty.
    """
    check_same_grid(gt, pred)
    if gt.count + pred.count == 0:
        return float("nan")
    w = weight_map(label_components(gt, conn)).w
    num = c * float(np.sum(w[pred.data]))
    den = float(pred.count) + float(np.sum(w))
    return num / den


def adaptive_dice_normalized(
    gt: BinaryMask,
    pred: BinaryMask,
    conn: Connectivity = DEFAULT_CONNECTIVITY,
    c: float = DEFAULT_NUMERATOR_CONSTANT,
) -> float:
    """adaptive_dice rescaled so a perfect prediction scores exactly 1.

    The raw ratio tops out below 1 whenever any component has volume > 1
    (weights < 1 shrink the numerator), so reports emit this variant
    alongside the raw one.
    """
    check_same_grid(gt, pred)
    if gt.count == 0:
        return float("nan") if pred.count == 0 else 0.0
    raw = adaptive_dice(gt, pred, conn, c)
    perfect = adaptive_dice(gt, gt, conn, c)
    return raw / perfect


@dataclass(frozen=True)
class LesionMatchTable:
    """Per-lesion any-overlap matching between two component sets."""

    gt_lesions: list[tuple[int, int, bool]]  # (component id, volume, matched)
    pred_lesions: list[tuple[int, int, bool]]
    overlap_pairs: list[tuple[int, int, int]]  # (gt id, pred id, shared voxels)

    def to_json(self) -> dict:
        return {
            "gt_lesions": [{"id": i, "volume": v, "matched": m} for i, v, m in self.gt_lesions],
            "pred_lesions": [{"id": i, "volume": v, "matched": m} for i, v, m in self.pred_lesions],
            "overlap_pairs": [{"gt": a, "pred": b, "voxels": n} for a, b, n in self.overlap_pairs],
        }


def _match_components(gt: BinaryMask, pred: BinaryMask, conn: Connectivity):
    comp_gt = label_components(gt, conn)
    comp_pred = label_components(pred, conn)
    both = gt.data & pred.data
    if both.any():
        pairs = np.stack([comp_gt.ids[both], comp_pred.ids[both]], axis=1)
        uniq, counts = np.unique(pairs, axis=0, return_counts=True)
        overlap = [(int(a), int(b), int(n)) for (a, b), n in zip(uniq, counts)]
    else:
        overlap = []
    return comp_gt, comp_pred, overlap


@dataclass(frozen=True)
class DetectionResult:
    sensitivity: float
    precision: float
    table: LesionMatchTable
    matched_gt: int
    missed_gt: int
    matched_pred: int
    spurious_pred: int


def detection_metrics(gt: BinaryMask, pred: BinaryMask, conn: Connectivity = DEFAULT_CONNECTIVITY) -> DetectionResult:
    """Any-overlap lesion detection: sensitivity over gt lesions, precision over predicted ones."""
    check_same_grid(gt, pred)
    comp_gt, comp_pred, overlap = _match_components(gt, pred, conn)
    matched_gt_ids = {a for a, _, _ in overlap}
    matched_pred_ids = {b for _, b, _ in overlap}
    gt_rows = [(j, int(comp_gt.volumes[j]), j in matched_gt_ids) for j in range(1, comp_gt.count + 1)]
    pred_rows = [(j, int(comp_pred.volumes[j]), j in matched_pred_ids) for j in range(1, comp_pred.count + 1)]
    table = LesionMatchTable(gt_lesions=gt_rows, pred_lesions=pred_rows, overlap_pairs=overlap)
    k_gt = comp_gt.count
    k_pred = comp_pred.count
    sens = len(matched_gt_ids) / k_gt if k_gt else float("nan")
    prec = len(matched_pred_ids) / k_pred if k_pred else float("nan")
    return DetectionResult(
        sensitivity=sens,
        precision=prec,
        table=table,
        matched_gt=len(matched_gt_ids),
        missed_gt=k_gt - len(matched_gt_ids),
        matched_pred=len(matched_pred_ids),
        spurious_pred=k_pred - len(matched_pred_ids),
    )


def lesionwise_dice(gt: BinaryMask, pred: BinaryMask, conn: Connectivity = DEFAULT_CONNECTIVITY) -> float:
    """Mean per-lesion Dice.

    Each gt component j scores 2|j ∩ P_j| / (|j| + |P_j|), P_j being the
    union of predicted components overlapping j; every unmatched predicted
    component contributes a 0. NaN when neither side has components.
    """
    check_same_grid(gt, pred)
    comp_gt, comp_pred, overlap = _match_components(gt, pred, conn)
    if comp_gt.count == 0 and comp_pred.count == 0:
        return float("nan")
    inter_by_gt: dict[int, int] = {}
    preds_by_gt: dict[int, set[int]] = {}
    matched_pred_ids: set[int] = set()
    for a, b, n in overlap:
        inter_by_gt[a] = inter_by_gt.get(a, 0) + n
        preds_by_gt.setdefault(a, set()).add(b)
        matched_pred_ids.add(b)
    scores = []
    for j in range(1, comp_gt.count + 1):
        inter = inter_by_gt.get(j, 0)
        p_union = sum(int(comp_pred.volumes[b]) for b in preds_by_gt.get(j, ()))
        vol = int(comp_gt.volumes[j])
        scores.append(2.0 * inter / (vol + p_union) if inter else 0.0)
    spurious = comp_pred.count - len(matched_pred_ids)
    scores.extend([0.0] * spurious)
    return float(np.mean(scores))
