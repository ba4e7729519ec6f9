"""Deterministic synthetic multi-lesion volumes for oracle tests and demos.

Lesions are spheres in physical coordinates: a voxel belongs to a lesion
when its center lies within the radius, so component volumes can be
verified exactly by brute-force center counting. Optional boundary noise
flips surface voxels of the per-class probability maps toward 0.5.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .volume import LabelVolume, ProbVolume, Spacing


@dataclass(frozen=True)
class Lesion:
    center: tuple[float, float, float]  # voxel coordinates
    radius_mm: float
    label: int

    def __post_init__(self):
        if self.label not in (1, 2):
            raise ValueError(f"lesion label must be 1 or 2, got {self.label}")
        if self.radius_mm < 0:
            raise ValueError(f"lesion radius must be >= 0, got {self.radius_mm}")


@dataclass(frozen=True)
class PhantomSpec:
    dims: tuple[int, int, int]
    spacing: Spacing
    lesions: list[Lesion]
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.noise < 1.0):
            raise ValueError(f"noise must be in [0, 1), got {self.noise}")

    @classmethod
    def from_json(cls, path: str | Path) -> "PhantomSpec":
        doc = json.loads(Path(path).read_text())
        return cls(
            dims=tuple(int(v) for v in doc["dims"]),
            spacing=Spacing(*(float(v) for v in doc["spacing"])),
            lesions=[
                Lesion(center=tuple(float(v) for v in l["center"]), radius_mm=float(l["radius_mm"]), label=int(l["label"]))
                for l in doc["lesions"]
            ],
            noise=float(doc.get("noise", 0.0)),
            seed=int(doc.get("seed", 0)),
        )


@dataclass(frozen=True)
class PhantomResult:
    volume: LabelVolume
    prob_volumes: dict[int, ProbVolume]
    warnings: list[str] = field(default_factory=list)


def _surface_voxels(mask: np.ndarray) -> np.ndarray:
    """Voxels of `mask` with at least one exposed face."""
    from .surface import _exposed_face_counts

    surf = np.zeros_like(mask)
    for faces in _exposed_face_counts(mask):
        surf |= faces
    return surf


def generate(spec: PhantomSpec) -> PhantomResult:
    """Render the phantom; deterministic for a fixed (spec, seed)."""
    nx, ny, nz = spec.dims
    scale = spec.spacing.as_array()
    coords = np.stack(
        np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij"), axis=-1
    ).astype(np.float64) * scale

    labels = np.zeros(spec.dims, dtype=np.int32)
    warnings: list[str] = []
    lo_mm = np.zeros(3)
    hi_mm = (np.array(spec.dims, dtype=np.float64) - 1.0) * scale
    for i, lesion in enumerate(spec.lesions):
        center_mm = np.array(lesion.center, dtype=np.float64) * scale
        if np.any(center_mm - lesion.radius_mm < lo_mm) or np.any(center_mm + lesion.radius_mm > hi_mm):
            raise ValueError(f"lesion {i} (center {lesion.center}, r={lesion.radius_mm}mm) extends out of bounds")
        dist = np.sqrt(np.sum((coords - center_mm) ** 2, axis=-1))
        inside = dist <= lesion.radius_mm
        clash = inside & (labels != 0) & (labels != lesion.label)
        if clash.any():
            warnings.append(f"lesion {i} (label {lesion.label}) overwrites {int(clash.sum())} voxel(s) of another label")
        labels[inside] = lesion.label

    vol = LabelVolume(data=labels, spacing=spec.spacing)
    rng = np.random.default_rng(spec.seed)
    probs: dict[int, ProbVolume] = {}
    for label in (1, 2):
        mask = labels == label
        p = mask.astype(np.float64)
        if spec.noise > 0.0 and mask.any():
            surf = np.argwhere(_surface_voxels(mask))
            flip = rng.random(len(surf)) < spec.noise
            chosen = surf[flip]
            p[chosen[:, 0], chosen[:, 1], chosen[:, 2]] = 0.5
        probs[label] = ProbVolume(data=p, spacing=spec.spacing)
    return PhantomResult(volume=vol, prob_volumes=probs, warnings=warnings)
