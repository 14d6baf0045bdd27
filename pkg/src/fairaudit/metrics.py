"""Per-group classification metrics at a score cutoff.

A record is called high risk when its score is strictly greater than
the cutoff; a score equal to the cutoff is low risk. Rates whose
denominator is zero are reported as explicitly undefined (``None``),
never as 0 or NaN. Interval estimates use the Wilson score method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Mapping

from .dataset import Dataset
from .errors import DataError


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts at a cutoff: rows are outcomes, columns are risk calls."""

    tn: int
    fp: int
    fn: int
    tp: int

    def __post_init__(self) -> None:
        for name in ("tn", "fp", "fn", "tp"):
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise DataError(f"confusion count {name}={value!r} is not a non-negative integer")

    @property
    def total(self) -> int:
        return self.tn + self.fp + self.fn + self.tp

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    @property
    def predicted_positive(self) -> int:
        return self.tp + self.fp


@dataclass(frozen=True)
class Interval:
    """Two-sided confidence interval at a given level."""

    lo: float
    hi: float
    level: float


@dataclass(frozen=True)
class GroupMetrics:
    """Rates for one group at one cutoff, with interval estimates.

    prevalence      P(Y = 1)
    ppv             P(Y = 1 | high risk)
    fpr             P(high risk | Y = 0)
    fnr             P(low risk | Y = 1)
    high_risk_rate  P(high risk)

    A rate is None when its denominator is zero; its interval is then
    absent from ``intervals``.
    """

    group: str
    threshold: int
    matrix: ConfusionMatrix
    prevalence: float | None
    ppv: float | None
    fpr: float | None
    fnr: float | None
    high_risk_rate: float | None
    intervals: Mapping[str, Interval]


def wilson_interval(successes: int, trials: int, level: float = 0.95) -> Interval:
    """Wilson score interval for a binomial proportion.

    Always contains the point estimate successes/trials and stays inside
    [0, 1] even for extreme counts.
    """
    if trials < 1:
        raise DataError(f"wilson_interval needs at least one trial, got {trials}")
    if not 0 <= successes <= trials:
        raise DataError(f"successes {successes} outside [0, {trials}]")
    if not 0.0 < level < 1.0:
        raise DataError(f"confidence level {level} outside (0, 1)")
    z = NormalDist().inv_cdf((1.0 + level) / 2.0)
    n = trials
    phat = successes / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2.0 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n))
    # At the boundary counts the exact bound is the point estimate itself;
    # evaluating the formula in floats can leave it on the wrong side.
    lo = 0.0 if successes == 0 else max(0.0, min(center - half, phat))
    hi = 1.0 if successes == n else min(1.0, max(center + half, phat))
    return Interval(lo, hi, level)


def _check_cutoff(ds: Dataset, s_hr: int) -> None:
    lo = ds.schema.score_min - 1
    hi = ds.schema.score_max
    if not isinstance(s_hr, int) or isinstance(s_hr, bool):
        raise DataError(f"cutoff {s_hr!r} is not an integer")
    if not (lo <= s_hr <= hi):
        raise DataError(f"cutoff {s_hr} outside [{lo}, {hi}]")


def confusion(ds: Dataset, group: str, s_hr: int) -> ConfusionMatrix:
    """Confusion counts for one group at a cutoff (high risk = score > s_hr)."""
    _check_cutoff(ds, s_hr)
    records = ds.records_for(group)
    if not records:
        raise DataError(f"group {group!r} has no records")
    tn = fp = fn = tp = 0
    for rec in records:
        high = rec.score > s_hr
        if rec.outcome == 1:
            if high:
                tp += 1
            else:
                fn += 1
        else:
            if high:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tn, fp, fn, tp)


def _rate(numerator: int, denominator: int) -> float | None:
    return None if denominator == 0 else numerator / denominator


def metrics_from_matrix(matrix: ConfusionMatrix, group: str = "",
                        threshold: int = 0, ci_level: float = 0.95) -> GroupMetrics:
    """Rates and Wilson intervals from explicit confusion counts."""
    if matrix.total == 0:
        raise DataError("confusion matrix is empty")
    pieces = {
        "prevalence": (matrix.positives, matrix.total),
        "ppv": (matrix.tp, matrix.predicted_positive),
        "fpr": (matrix.fp, matrix.negatives),
        "fnr": (matrix.fn, matrix.positives),
        "high_risk_rate": (matrix.predicted_positive, matrix.total),
    }
    rates: dict[str, float | None] = {}
    intervals: dict[str, Interval] = {}
    for name, (num, den) in pieces.items():
        rates[name] = _rate(num, den)
        if rates[name] is not None:
            intervals[name] = wilson_interval(num, den, ci_level)
    return GroupMetrics(group=group, threshold=threshold, matrix=matrix,
                        prevalence=rates["prevalence"], ppv=rates["ppv"],
                        fpr=rates["fpr"], fnr=rates["fnr"],
                        high_risk_rate=rates["high_risk_rate"],
                        intervals=intervals)


def group_metrics(ds: Dataset, group: str, s_hr: int, ci_level: float = 0.95) -> GroupMetrics:
    """Rates for one group of a dataset at a cutoff."""
    matrix = confusion(ds, group, s_hr)
    return metrics_from_matrix(matrix, group=group, threshold=s_hr, ci_level=ci_level)


def sweep_cutoffs(ds: Dataset) -> range:
    """All meaningful cutoffs: score_min - 1 (everyone high risk) through
    score_max - 1 (only the top score high risk)."""
    return range(ds.schema.score_min - 1, ds.schema.score_max)


def threshold_sweep(ds: Dataset, ci_level: float = 0.95) -> list[GroupMetrics]:
    """GroupMetrics for every present group at every cutoff.

    Ordered by group (schema declaration order) then cutoff ascending.
    """
    out = []
    for group in ds.groups_present():
        for s_hr in sweep_cutoffs(ds):
            out.append(group_metrics(ds, group, s_hr, ci_level))
    return out


@dataclass(frozen=True)
class CellEstimate:
    """Observed outcome rate in one (group, score) cell."""

    count: int
    positives: int
    estimate: float
    interval: Interval


def calibration_curve(ds: Dataset, ci_level: float = 0.95) -> dict[str, dict[int, CellEstimate]]:
    """P(Y = 1 | S = s, group) for every nonempty (group, score) cell.

    Empty cells are absent from the result rather than reported as zero.
    Ordering is deterministic: groups in schema order, scores ascending.
    """
    counts: dict[str, dict[int, list[int]]] = {}
    for rec in ds.records:
        cell = counts.setdefault(rec.group, {}).setdefault(rec.score, [0, 0])
        cell[0] += 1
        cell[1] += rec.outcome
    out: dict[str, dict[int, CellEstimate]] = {}
    for group in ds.groups_present():
        per_score: dict[int, CellEstimate] = {}
        for score in sorted(counts.get(group, {})):
            n, k = counts[group][score]
            per_score[score] = CellEstimate(
                count=n, positives=k, estimate=k / n,
                interval=wilson_interval(k, n, ci_level),
            )
        out[group] = per_score
    return out
