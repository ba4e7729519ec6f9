"""3D connected-component labeling and per-component volume accounting.

Components are numbered deterministically by the raster-scan order of
their first voxel; per-voxel weights are the inverse square root of the
owning component's volume, so smaller structures weigh more.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .volume import BinaryMask, Spacing


class Connectivity(enum.Enum):
    """Voxel adjacency: shared face, face or edge, or face/edge/corner."""

    FACE6 = 6
    EDGE18 = 18
    CORNER26 = 26

    @property
    def structure(self) -> np.ndarray:
        order = {Connectivity.FACE6: 1, Connectivity.EDGE18: 2, Connectivity.CORNER26: 3}[self]
        return ndimage.generate_binary_structure(3, order)

    @property
    def offsets(self) -> list[tuple[int, int, int]]:
        st = self.structure
        out = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    if (dx, dy, dz) != (0, 0, 0) and st[dx + 1, dy + 1, dz + 1]:
                        out.append((dx, dy, dz))
        return out


DEFAULT_CONNECTIVITY = Connectivity.CORNER26


@dataclass(frozen=True)
class ComponentMap:
    """Per-voxel component ids (0 = background) plus a volume table."""

    ids: np.ndarray  # int32, shape (nx, ny, nz)
    volumes: np.ndarray  # voxel counts indexed by component id; volumes[0] == 0
    spacing: Spacing
    connectivity: Connectivity

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.ids.shape

    @property
    def count(self) -> int:
        return len(self.volumes) - 1

    def volume_table(self) -> dict[int, int]:
        return {j: int(self.volumes[j]) for j in range(1, len(self.volumes))}


@dataclass(frozen=True)
class WeightMap:
    """Per-voxel weights 1/sqrt(V_j) on component j, 0 on background."""

    w: np.ndarray  # float64, shape (nx, ny, nz)
    spacing: Spacing

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.w.shape


def label_components(mask: BinaryMask, conn: Connectivity = DEFAULT_CONNECTIVITY) -> ComponentMap:
    """Label connected components of `mask` under the given adjacency.

    Numbering is deterministic: component j's first voxel (in row-major
    scan order) precedes component j+1's first voxel.
    """
    ids, k = ndimage.label(mask.data, structure=conn.structure)
    ids = ids.astype(np.int32)
    if k > 0:
        # enforce first-encounter numbering regardless of the labeling backend
        flat = ids.ravel()
        nz = flat[flat > 0]
        _, first = np.unique(nz, return_index=True)
        order = nz[np.sort(first)]
        remap = np.zeros(k + 1, dtype=np.int32)
        remap[order] = np.arange(1, k + 1, dtype=np.int32)
        ids = remap[ids]
    volumes = np.bincount(ids.ravel(), minlength=k + 1).astype(np.int64)
    volumes[0] = 0
    return ComponentMap(ids=ids, volumes=volumes, spacing=mask.spacing, connectivity=conn)


def weight_map(comp: ComponentMap, physical: bool = False) -> WeightMap:
    """Weights w = 1/sqrt(V_j) per voxel of component j, 0 elsewhere.

    With `physical`, V_j is the component volume in mm^3 instead of a
    voxel count.
    """
    volumes = comp.volumes.astype(np.float64)
    if physical:
        volumes = volumes * comp.spacing.voxel_volume_mm3
    per_component = np.zeros(len(volumes), dtype=np.float64)
    if len(volumes) > 1:
        per_component[1:] = 1.0 / np.sqrt(volumes[1:])
    w = per_component[comp.ids]
    return WeightMap(w=w, spacing=comp.spacing)
