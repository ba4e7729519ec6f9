"""Soft Dice, volume-aware Dice and cross-entropy losses with analytic gradients.

The volume-aware loss weights every ground-truth voxel by the inverse
square root of its connected component's volume, so small lesions
contribute to the overlap term on equal footing with large ones. Its
value is negative with optimum near -1 (the sign convention is kept as
is; trainers minimize it directly), unlike the 1 - overlap form of the
standard soft Dice loss.

Floating-point evaluation order is part of the wire contract: the
frontend/ package mirrors every reduction and elementwise expression
op-for-op to achieve bit-identical values, so keep the order of sums,
products and divisions stable when editing.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass, field

import numpy as np

from .components import Connectivity, DEFAULT_CONNECTIVITY, WeightMap, label_components, weight_map
from .portable_log import log_array
from .volume import BinaryMask, LabelVolume, ProbVolume, check_same_grid, extract_class

DEFAULT_EPSILON = 1e-5
DEFAULT_NUMERATOR_CONSTANT = 2.0


class DiceMode(enum.Enum):
    STANDARD = "standard-dice"
    VOLUME_AWARE = "volume-aware"


@dataclass(frozen=True)
class LossConfig:
    """Loss configuration applied per class channel."""

    epsilon: float = DEFAULT_EPSILON
    numerator_constant: float = DEFAULT_NUMERATOR_CONSTANT  # C in the weighted overlap term
    per_class_mode: dict[int, DiceMode] = field(default_factory=lambda: {1: DiceMode.STANDARD, 2: DiceMode.STANDARD})
    include_cross_entropy: bool = False
    connectivity: Connectivity = DEFAULT_CONNECTIVITY

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.numerator_constant <= 0:
            raise ValueError(f"numerator constant must be > 0, got {self.numerator_constant}")


PRESETS = {
    "baseline": LossConfig(per_class_mode={1: DiceMode.STANDARD, 2: DiceMode.STANDARD}, include_cross_entropy=True),
    "dual": LossConfig(per_class_mode={1: DiceMode.VOLUME_AWARE, 2: DiceMode.VOLUME_AWARE}),
    "selective": LossConfig(per_class_mode={1: DiceMode.STANDARD, 2: DiceMode.VOLUME_AWARE}),
}


def preset(name: str) -> LossConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


@dataclass(frozen=True)
class LossResult:
    value: float
    gradient: np.ndarray  # dL/dp per voxel, same shape as p


class WeightMapCache:
    """Per-mask weight-map memo, safe for concurrent reads and inserts.

    Keyed by the identity of the mask's (immutable) data buffer, since
    ground truth is constant across loss evaluations.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._entries: dict[tuple[int, int, bool], tuple[BinaryMask, WeightMap]] = {}

    def get(self, g: BinaryMask, conn: Connectivity, physical: bool = False) -> WeightMap:
        key = (id(g.data), conn.value, physical)
        with self._lock:
            hit = self._entries.get(key)
        if hit is not None and hit[0].data is g.data:
            return hit[1]
        wm = weight_map(label_components(g, conn), physical=physical)
        with self._lock:
            self._entries[key] = (g, wm)
        return wm


_default_cache = WeightMapCache()


def _as_float_arrays(p: ProbVolume, g: BinaryMask) -> tuple[np.ndarray, np.ndarray]:
    check_same_grid(p, g)
    return p.data.ravel(), g.data.ravel().astype(np.float64)


def soft_dice_loss(p: ProbVolume, g: BinaryMask, epsilon: float = DEFAULT_EPSILON) -> LossResult:
    """1 - (2*sum(p*g) + eps) / (sum(p^2) + sum(g) + eps), with exact gradient.

    g is binary so sum(g^2) == sum(g).
    """
    pf, gf = _as_float_arrays(p, g)
    inter = float(np.sum(pf * gf))
    sp2 = float(np.sum(pf * pf))
    sg = float(np.sum(gf))
    num = 2.0 * inter + epsilon
    den = sp2 + sg + epsilon
    value = 1.0 - num / den
    a = -2.0 / den
    b = 2.0 * num / (den * den)
    grad = a * gf + b * pf
    return LossResult(value=value, gradient=grad.reshape(p.dims))


def weighted_overlap_term(p: ProbVolume, g: BinaryMask, weights: WeightMap, c: float = DEFAULT_NUMERATOR_CONSTANT) -> LossResult:
    """The weighted overlap numerator c*sum(w*g*p) and its gradient c*w*g.

    Exposed separately so the weighting law (scaling all weights scales
    the term and its gradient uniformly) can be tested in isolation.
    """
    pf, gf = _as_float_arrays(p, g)
    wf = weights.w.ravel() * gf  # w is already 0 off the mask; the product keeps that explicit
    value = c * float(np.sum(wf * pf))
    grad = c * wf
    return LossResult(value=value, gradient=grad.reshape(p.dims))


def va_dice_loss(
    p: ProbVolume,
    g: BinaryMask,
    cfg: LossConfig | None = None,
    weights: WeightMap | None = None,
    cache: WeightMapCache | None = None,
) -> LossResult:
    """Volume-aware Dice loss -(c*sum(w*g*p) + eps) / (sum(p^2) + sum(w*g) + eps).

    w = 1/sqrt(V) of the ground-truth component owning each voxel, so the
    per-voxel overlap reward scales with 1/sqrt(lesion volume). Weights
    come from the ground truth only; prediction voxels outside it enter
    through the unweighted sum(p^2) term. Gradient:
        dL/dp_k = -c*w_k*g_k/D + 2*N*p_k/D^2
    with N the (eps-shifted) numerator and D the denominator.
    """
    cfg = cfg or LossConfig()
    if weights is None:
        weights = (cache or _default_cache).get(g, cfg.connectivity)
    pf, gf = _as_float_arrays(p, g)
    wf = weights.w.ravel() * gf
    c = cfg.numerator_constant
    eps = cfg.epsilon
    swp = float(np.sum(wf * pf))
    sp2 = float(np.sum(pf * pf))
    sw = float(np.sum(wf))
    num = c * swp + eps
    den = sp2 + sw + eps
    value = -(num / den)
    a = -c / den
    b = 2.0 * num / (den * den)
    grad = a * wf + b * pf
    return LossResult(value=value, gradient=grad.reshape(p.dims))


def cross_entropy_loss(p: ProbVolume, g: BinaryMask, epsilon: float = DEFAULT_EPSILON) -> LossResult:
    """Mean binary cross-entropy with epsilon-clamped logs and exact gradient."""
    pf, gf = _as_float_arrays(p, g)
    gb = g.data.ravel()
    n = pf.size
    terms = np.where(gb, log_array(pf + epsilon), log_array((1.0 - pf) + epsilon))
    value = -(float(np.sum(terms)) / n)
    inv_n = 1.0 / n
    grad = np.where(gb, -(inv_n / (pf + epsilon)), inv_n / ((1.0 - pf) + epsilon))
    return LossResult(value=value, gradient=grad.reshape(p.dims))


@dataclass(frozen=True)
class ConfiguredLossResult:
    value: float  # mean of per-class dice-family values (+ mean CE when enabled)
    per_class: dict[int, LossResult]
    cross_entropy: dict[int, LossResult] | None


def configured_loss(
    p_per_class: dict[int, ProbVolume],
    g: LabelVolume,
    cfg: LossConfig,
    cache: WeightMapCache | None = None,
) -> ConfiguredLossResult:
    """Apply the per-class loss modes of `cfg` and combine.

    Per class the mode picks standard soft Dice or the volume-aware loss;
    the combined scalar is the unweighted mean over classes, plus the mean
    cross-entropy term (weight 1) when enabled.
    """
    missing = [c for c in cfg.per_class_mode if c not in p_per_class]
    if missing:
        raise ValueError(f"missing class channel(s) {missing}")
    per_class: dict[int, LossResult] = {}
    ce: dict[int, LossResult] = {}
    for label in sorted(cfg.per_class_mode):
        mask = extract_class(g, label)
        pv = p_per_class[label]
        if cfg.per_class_mode[label] is DiceMode.VOLUME_AWARE:
            per_class[label] = va_dice_loss(pv, mask, cfg, cache=cache)
        else:
            per_class[label] = soft_dice_loss(pv, mask, cfg.epsilon)
        if cfg.include_cross_entropy:
            ce[label] = cross_entropy_loss(pv, mask, cfg.epsilon)
    k = len(per_class)
    value = sum(r.value for r in per_class.values()) / k
    if cfg.include_cross_entropy:
        value += sum(r.value for r in ce.values()) / k
    return ConfiguredLossResult(value=value, per_class=per_class, cross_entropy=ce if cfg.include_cross_entropy else None)
