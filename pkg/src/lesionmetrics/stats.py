"""Paired Wilcoxon signed-rank test and cross-validation aggregation.

The test is two-sided on paired per-patient scores. Zero differences are
dropped; tied absolute differences get average ranks. For n <= 25 the
p-value comes from the exact (tie-aware) null distribution of the rank
sum, computed by dynamic programming over all 2^n sign assignments; for
larger n a normal approximation with tie-corrected variance and a 0.5
continuity correction is used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

EXACT_LIMIT = 25


class DegenerateSampleError(ValueError):
    """All paired differences are zero; the test is undefined."""


@dataclass(frozen=True)
class PairedSample:
    """Per-patient scores of two configurations, aligned by case id."""

    case_ids: list[str]
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if not (len(self.case_ids) == len(self.a) == len(self.b)):
            raise ValueError("case_ids, a and b must have equal lengths")
        if len(set(self.case_ids)) != len(self.case_ids):
            raise ValueError("case ids must be unique")
        object.__setattr__(self, "a", np.asarray(self.a, dtype=np.float64))
        object.__setattr__(self, "b", np.asarray(self.b, dtype=np.float64))

    def drop_nan_pairs(self) -> "PairedSample":
        keep = ~(np.isnan(self.a) | np.isnan(self.b))
        return PairedSample(
            case_ids=[c for c, k in zip(self.case_ids, keep) if k], a=self.a[keep], b=self.b[keep]
        )


@dataclass(frozen=True)
class WilcoxonResult:
    p_value: float
    statistic: float  # min(W+, W-)
    n_effective: int  # nonzero differences used
    method: str  # "exact" or "approx"


def _exact_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    """P(W <= min(W+,W-)) + P(W >= max(W+,W-)) under the exact null.

    Ranks are average ranks (multiples of 1/2); doubling makes them
    integers so the null distribution of 2*W+ is a table of counts built
    by convolving each rank's (absent, present) choice.
    """
    doubled = np.rint(ranks * 2).astype(np.int64)
    total = int(doubled.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    top = 0
    for r in doubled:
        counts[r : top + r + 1] += counts[: top + 1]
        top += r
    n = len(ranks)
    w2 = int(round(w_plus * 2))
    lo = min(w2, total - w2)
    hi = max(w2, total - w2)
    p = (counts[: lo + 1].sum() + counts[hi:].sum()) / (2.0**n)
    return min(1.0, float(p))


def _approx_two_sided_p(ranks: np.ndarray, w_plus: float) -> float:
    n = len(ranks)
    w_minus = ranks.sum() - w_plus
    t_stat = min(w_plus, w_minus)
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    # tie correction: each group of t tied ranks removes (t^3 - t)/48
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts)) / 48.0
    sd = math.sqrt(var)
    z = (t_stat - mu + 0.5) / sd  # continuity correction toward the mean
    p = math.erfc(-z / math.sqrt(2.0))  # 2 * Phi(z), z <= 0
    return min(1.0, p)


def wilcoxon_signed_rank(sample: PairedSample) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test on paired per-patient scores."""
    clean = sample.drop_nan_pairs()
    diff = clean.a - clean.b
    diff = diff[diff != 0.0]
    if len(diff) == 0:
        raise DegenerateSampleError("degenerate sample: all paired differences are zero")
    ranks = rankdata(np.abs(diff), method="average")
    w_plus = float(ranks[diff > 0].sum())
    n = len(diff)
    if n <= EXACT_LIMIT:
        p = _exact_two_sided_p(ranks, w_plus)
        method = "exact"
    else:
        p = _approx_two_sided_p(ranks, w_plus)
        method = "approx"
    w_minus = float(ranks.sum()) - w_plus
    return WilcoxonResult(p_value=p, statistic=min(w_plus, w_minus), n_effective=n, method=method)


@dataclass(frozen=True)
class MetricRow:
    """One evaluated (case, repeat, class) observation of all metrics."""

    case_id: str
    fold: int
    repeat: int
    config: str
    class_label: int
    metrics: dict[str, float]


def aggregate_runs(rows: list[MetricRow]) -> dict[tuple[str, int, str], dict[str, float]]:
    """Reduce repeated runs to per-patient mean scores.

    Returns {(config, class_label, metric): {case_id: mean over that
    patient's repeats}}. NaN repeats are excluded from the per-patient
    mean (a patient with only NaN repeats stays NaN). Raises when a case
    appears in more than one fold within a configuration.
    """
    folds: dict[tuple[str, str], int] = {}
    for row in rows:
        key = (row.config, row.case_id)
        if key in folds and folds[key] != row.fold:
            raise ValueError(f"case {row.case_id!r} assigned to folds {folds[key]} and {row.fold} in {row.config!r}")
        folds[key] = row.fold

    values: dict[tuple[str, int, str], dict[str, list[tuple[int, float]]]] = {}
    for row in rows:
        for metric, v in row.metrics.items():
            per_case = values.setdefault((row.config, row.class_label, metric), {})
            per_case.setdefault(row.case_id, []).append((row.repeat, v))

    out: dict[tuple[str, int, str], dict[str, float]] = {}
    for key, per_case in values.items():
        out[key] = {}
        for case_id, pairs in per_case.items():
            # canonical repeat order makes the mean independent of row order
            finite = [v for _, v in sorted(pairs) if not math.isnan(v)]
            out[key][case_id] = float(np.mean(finite)) if finite else float("nan")
    return out


def config_mean(per_patient: dict[str, float]) -> float:
    """Mean over patients, excluding NaN; NaN if nothing remains."""
    vals = [v for v in per_patient.values() if not math.isnan(v)]
    return float(np.mean(vals)) if vals else float("nan")
