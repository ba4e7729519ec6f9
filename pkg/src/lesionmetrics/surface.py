"""Boundary extraction and the surface metrics SDS, MSD and HD95.

The surface of a mask is the multiset of its exposed voxel faces: one
element per true-voxel face whose neighbor is false or outside the
volume. Each element carries the face area (product of the two in-plane
spacings) and is positioned at its voxel's center in physical mm, so a
one-voxel-thick plate has a single coplanar surface. All aggregations
are area-weighted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .volume import BinaryMask, Spacing, check_same_grid

_AXES = (0, 1, 2)


def _exposed_face_counts(mask: np.ndarray) -> list[np.ndarray]:
    """Per axis: boolean arrays of faces exposed on the -side and +side."""
    out = []
    for ax in _AXES:
        lo = np.ones_like(mask)
        hi = np.ones_like(mask)
        sl_lo = [slice(None)] * 3
        sl_hi = [slice(None)] * 3
        sl_lo[ax] = slice(1, None)
        sl_hi[ax] = slice(None, -1)
        # neighbor on the -side of voxel i is voxel i-1; missing neighbors count as false
        lo[tuple(sl_lo)] = ~mask[tuple(sl_hi)]
        hi[tuple(sl_hi)] = ~mask[tuple(sl_lo)]
        out.append(mask & lo)
        out.append(mask & hi)
    return out


@dataclass(frozen=True)
class SurfaceElementSet:
    positions: np.ndarray  # (M, 3) mm coordinates of the owning voxel centers
    areas: np.ndarray  # (M,) mm^2 face areas

    @property
    def total_area(self) -> float:
        return float(self.areas.sum())

    def __len__(self) -> int:
        return len(self.areas)


def extract_surface(mask: BinaryMask) -> SurfaceElementSet:
    """One element per exposed voxel face. Empty mask yields an empty set."""
    sp = mask.spacing
    face_area = {0: sp.dy * sp.dz, 1: sp.dx * sp.dz, 2: sp.dx * sp.dy}
    scale = sp.as_array()
    positions = []
    areas = []
    exposed = _exposed_face_counts(mask.data)
    for k, faces in enumerate(exposed):
        ax = k // 2
        idx = np.argwhere(faces)
        if len(idx) == 0:
            continue
        positions.append(idx.astype(np.float64) * scale)
        areas.append(np.full(len(idx), face_area[ax], dtype=np.float64))
    if not positions:
        return SurfaceElementSet(
            positions=np.empty((0, 3), dtype=np.float64), areas=np.empty(0, dtype=np.float64)
        )
    return SurfaceElementSet(positions=np.concatenate(positions), areas=np.concatenate(areas))


@dataclass(frozen=True)
class SurfaceDistances:
    """Directed element distances, each sorted ascending with its areas."""

    d_gt_to_pred: np.ndarray
    a_gt: np.ndarray
    d_pred_to_gt: np.ndarray
    a_pred: np.ndarray

    @property
    def gt_total_area(self) -> float:
        return float(self.a_gt.sum())

    @property
    def pred_total_area(self) -> float:
        return float(self.a_pred.sum())


def _directed(src: SurfaceElementSet, dst: SurfaceElementSet) -> tuple[np.ndarray, np.ndarray]:
    if len(src) == 0:
        return np.empty(0, dtype=np.float64), np.empty(0, dtype=np.float64)
    if len(dst) == 0:
        d = np.full(len(src), np.inf)
    else:
        # elements of one voxel share a position; query unique points once
        pts, inverse = np.unique(src.positions, axis=0, return_inverse=True)
        tree = cKDTree(np.unique(dst.positions, axis=0))
        d = tree.query(pts)[0][inverse]
    # tied distances sort by area so the percentile's cumulative-area curve is canonical
    order = np.lexsort((src.areas, d))
    return d[order], src.areas[order]


def surface_distances(gt: BinaryMask, pred: BinaryMask) -> SurfaceDistances:
    """Directed minimum distances between the two surfaces, in mm.

    Raises when both masks are empty (the metrics are undefined); when
    exactly one is empty the nonempty side's distances are +inf.
    """
    check_same_grid(gt, pred)
    s_gt = extract_surface(gt)
    s_pred = extract_surface(pred)
    if len(s_gt) == 0 and len(s_pred) == 0:
        raise ValueError("undefined distances: both masks are empty")
    d_gp, a_g = _directed(s_gt, s_pred)
    d_pg, a_p = _directed(s_pred, s_gt)
    return SurfaceDistances(d_gt_to_pred=d_gp, a_gt=a_g, d_pred_to_gt=d_pg, a_pred=a_p)


def surface_dice(d: SurfaceDistances, tolerance_mm: float) -> float:
    """Area fraction of both surfaces lying within `tolerance_mm` of the other."""
    if tolerance_mm < 0:
        raise ValueError(f"tolerance must be >= 0, got {tolerance_mm}")
    hit = float(d.a_gt[d.d_gt_to_pred <= tolerance_mm].sum()) + float(
        d.a_pred[d.d_pred_to_gt <= tolerance_mm].sum()
    )
    total = d.gt_total_area + d.pred_total_area
    return hit / total


def mean_surface_distance(d: SurfaceDistances) -> float:
    """Area-weighted mean of all directed distances, both directions pooled."""
    if np.isinf(d.d_gt_to_pred).any() or np.isinf(d.d_pred_to_gt).any():
        return float("inf")
    # per-direction partial sums keep the result exactly symmetric in (gt, pred)
    s1 = float(np.sum(d.d_gt_to_pred * d.a_gt))
    s2 = float(np.sum(d.d_pred_to_gt * d.a_pred))
    return (s1 + s2) / (d.gt_total_area + d.pred_total_area)


def _weighted_percentile(values: np.ndarray, weights: np.ndarray, q: float) -> float:
    """Percentile of area-weighted values (Hazen positions, linear interpolation).

    `values` must be sorted ascending; ties resolve by cumulative-area order.
    """
    if len(values) == 1:
        return float(values[0])
    cum = np.cumsum(weights)
    total = cum[-1]
    pos = (cum - 0.5 * weights) / total
    target = q / 100.0
    if target <= pos[0]:
        return float(values[0])
    if target >= pos[-1]:
        return float(values[-1])
    return float(np.interp(target, pos, values))


def hd95(d: SurfaceDistances) -> float:
    """Robust Hausdorff: max of the two directed area-weighted 95th percentiles."""
    best = 0.0
    for dist, areas in ((d.d_gt_to_pred, d.a_gt), (d.d_pred_to_gt, d.a_pred)):
        if len(dist) == 0:
            continue
        if np.isinf(dist).any():
            return float("inf")
        best = max(best, _weighted_percentile(dist, areas, 95.0))
    return best
