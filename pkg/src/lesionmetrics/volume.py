"""Voxel-grid containers with physical spacing, plus the raw on-disk format.

Volumes are immutable after construction (the numpy buffer is marked
read-only), so they can be shared freely across threads and evaluated in
parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PAPER_LABELS = (1, 2)  # 1 = PT (primary tumor), 2 = LN (lymph nodes)
LABEL_NAMES = {1: "PT", 2: "LN"}


class VolumeFormatError(ValueError):
    """Malformed or unsupported volume file."""


@dataclass(frozen=True)
class Spacing:
    """Voxel edge lengths in millimeters."""

    dx: float
    dy: float
    dz: float

    def __post_init__(self):
        if not (self.dx > 0 and self.dy > 0 and self.dz > 0):
            raise ValueError(f"spacing components must be > 0, got {self}")

    def as_array(self) -> np.ndarray:
        return np.array([self.dx, self.dy, self.dz], dtype=np.float64)

    @property
    def voxel_volume_mm3(self) -> float:
        return self.dx * self.dy * self.dz

    def isclose(self, other: "Spacing", tol: float = 1e-6) -> bool:
        return bool(np.all(np.abs(self.as_array() - other.as_array()) <= tol))


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LabelVolume:
    """Dense 3D grid of small non-negative integer labels (0 = background)."""

    data: np.ndarray  # shape (nx, ny, nz), integer dtype
    spacing: Spacing
    labels: tuple[int, ...] = PAPER_LABELS  # declared foreground labels

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"expected 3D data, got shape {self.data.shape}")
        if not np.issubdtype(self.data.dtype, np.integer):
            raise ValueError(f"label data must be integer, got {self.data.dtype}")
        object.__setattr__(self, "data", _freeze(self.data))
        present = set(np.unique(self.data).tolist()) - {0}
        undeclared = present - set(self.labels)
        if undeclared:
            raise VolumeFormatError(
                f"unexpected label values {sorted(undeclared)}; declared labels are {list(self.labels)}"
            )

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class ProbVolume:
    """Dense 3D grid of per-voxel probabilities in [0, 1]."""

    data: np.ndarray  # shape (nx, ny, nz), float64
    spacing: Spacing

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"expected 3D data, got shape {self.data.shape}")
        data = np.asarray(self.data, dtype=np.float64)
        lo, hi = float(data.min(initial=0.0)), float(data.max(initial=0.0))
        if lo < 0.0 or hi > 1.0:
            raise VolumeFormatError(f"probability values outside [0, 1]: range [{lo}, {hi}]")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape


@dataclass(frozen=True)
class BinaryMask:
    """Dense 3D boolean mask."""

    data: np.ndarray  # shape (nx, ny, nz), bool
    spacing: Spacing

    def __post_init__(self):
        if self.data.ndim != 3:
            raise ValueError(f"expected 3D data, got shape {self.data.shape}")
        object.__setattr__(self, "data", _freeze(self.data.astype(bool)))

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def count(self) -> int:
        return int(self.data.sum())


def extract_class(vol: LabelVolume, label: int) -> BinaryMask:
    """Binary mask of the voxels carrying `label`; spacing preserved."""
    if label not in vol.labels:
        raise ValueError(f"undeclared label {label}; declared labels are {list(vol.labels)}")
    return BinaryMask(data=vol.data == label, spacing=vol.spacing)


def check_same_grid(a, b) -> None:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    if not a.spacing.isclose(b.spacing):
        raise ValueError(f"spacing mismatch: {a.spacing} vs {b.spacing}")


# ---------------------------------------------------------------------------
# Raw format: <name>.json header sidecar + <name>.bin little-endian payload.
# Row-major over dims (nx, ny, nz): index (x, y, z) at x*ny*nz + y*nz + z.
# ---------------------------------------------------------------------------

_RAW_DTYPES = {
    "u8": np.dtype("<u1"),
    "i16": np.dtype("<i2"),
    "i32": np.dtype("<i4"),
    "f32": np.dtype("<f4"),
    "f64": np.dtype("<f8"),
}


def _raw_paths(path: str | Path) -> tuple[Path, Path]:
    path = Path(path)
    if path.suffix == ".json":
        return path, path.with_suffix(".bin")
    if path.suffix == ".bin":
        return path.with_suffix(".json"), path
    return path.with_suffix(path.suffix + ".json"), path.with_suffix(path.suffix + ".bin")


def load_raw(path: str | Path, labels: tuple[int, ...] = PAPER_LABELS) -> LabelVolume | ProbVolume:
    header_path, payload_path = _raw_paths(path)
    try:
        header = json.loads(header_path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise VolumeFormatError(f"malformed raw header {header_path}: {exc}") from exc
    try:
        dims = tuple(int(v) for v in header["dims"])
        spacing = Spacing(*(float(v) for v in header["spacing"]))
        dtype_name = header["dtype"]
    except (KeyError, TypeError, ValueError) as exc:
        raise VolumeFormatError(f"malformed raw header {header_path}: {exc}") from exc
    if len(dims) != 3 or any(d <= 0 for d in dims):
        raise VolumeFormatError(f"bad dims {dims} in {header_path}")
    if dtype_name not in _RAW_DTYPES:
        raise VolumeFormatError(f"unsupported dtype {dtype_name!r} in {header_path}")
    dtype = _RAW_DTYPES[dtype_name]
    payload = payload_path.read_bytes()
    expected = int(np.prod(dims)) * dtype.itemsize
    if len(payload) != expected:
        raise VolumeFormatError(
            f"payload size mismatch in {payload_path}: got {len(payload)} bytes, header implies {expected}"
        )
    data = np.frombuffer(payload, dtype=dtype).reshape(dims)
    if dtype_name in ("f32", "f64"):
        return ProbVolume(data=data.astype(np.float64), spacing=spacing)
    return LabelVolume(data=data.astype(np.int32), spacing=spacing, labels=labels)


def save_raw(vol: LabelVolume | ProbVolume | BinaryMask, path: str | Path, dtype: str | None = None) -> Path:
    """Write a volume in the raw format; returns the header path."""
    header_path, payload_path = _raw_paths(path)
    if dtype is None:
        if isinstance(vol, ProbVolume):
            dtype = "f64"
        elif isinstance(vol, BinaryMask):
            dtype = "u8"
        else:
            dtype = "u8" if int(vol.data.max(initial=0)) < 256 else "i32"
    if dtype not in _RAW_DTYPES:
        raise ValueError(f"unsupported raw dtype {dtype!r}")
    arr = np.ascontiguousarray(vol.data.astype(_RAW_DTYPES[dtype]))
    header = {
        "dims": list(vol.dims),
        "spacing": [vol.spacing.dx, vol.spacing.dy, vol.spacing.dz],
        "dtype": dtype,
    }
    header_path.write_text(json.dumps(header, sort_keys=True) + "\n")
    payload_path.write_bytes(arr.tobytes())
    return header_path


def load_volume(path: str | Path, labels: tuple[int, ...] = PAPER_LABELS) -> LabelVolume | ProbVolume:
    """Load a NIfTI-1 (.nii / .nii.gz) or raw (.json/.bin) volume.

    Integer-typed files load as LabelVolume, floating-point files as
    ProbVolume (values outside [0, 1] are rejected).
    """
    path = Path(path)
    name = path.name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        from . import nifti

        return nifti.load_nifti(path, labels=labels)
    if name.endswith(".json") or name.endswith(".bin"):
        return load_raw(path, labels=labels)
    raise VolumeFormatError(f"unrecognized volume format: {path}")


def save_volume(vol: LabelVolume | ProbVolume | BinaryMask, path: str | Path) -> Path:
    path = Path(path)
    name = path.name.lower()
    if name.endswith(".nii") or name.endswith(".nii.gz"):
        from . import nifti

        return nifti.save_nifti(vol, path)
    return save_raw(vol, path)
