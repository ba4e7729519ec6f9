from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # make oracles importable

from lesionmetrics import BinaryMask, LabelVolume, ProbVolume, Spacing

UNIT = Spacing(1.0, 1.0, 1.0)


def bm(arr, spacing: Spacing = UNIT) -> BinaryMask:
    return BinaryMask(data=np.asarray(arr, dtype=bool), spacing=spacing)


def pv(arr, spacing: Spacing = UNIT) -> ProbVolume:
    return ProbVolume(data=np.asarray(arr, dtype=np.float64), spacing=spacing)


def lv(arr, spacing: Spacing = UNIT, labels=(1, 2)) -> LabelVolume:
    return LabelVolume(data=np.asarray(arr, dtype=np.int32), spacing=spacing, labels=labels)


def random_mask(rng: np.random.Generator, max_dim: int, fill: float = 0.3, min_dim: int = 3) -> np.ndarray:
    dims = tuple(int(rng.integers(min_dim, max_dim + 1)) for _ in range(3))
    return rng.random(dims) < fill


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240814)
