"""Fairness criteria for a two-group risk instrument.

Four checks, all reported as a maximum absolute between-group gap
against a tolerance:

  calibration            P(Y=1 | S=s, group) equal at every score s
  predictive parity      equal PPV at a cutoff
  error rate balance     equal FPR and equal FNR at a cutoff
  statistical parity     equal P(high risk) at a cutoff

The identity tying them together: for any group with defined rates,

  FPR = p/(1-p) * (1-PPV)/PPV * (1-FNR)

so groups sharing PPV but differing in prevalence p cannot share both
FPR and FNR. ``implied_fpr`` evaluates the right-hand side and
``impossibility_report`` packages the conflict.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .dataset import Dataset
from .errors import DataError
from .metrics import GroupMetrics, calibration_curve, group_metrics

DEFAULT_TOLERANCE = 0.02


@dataclass(frozen=True)
class CriterionResult:
    """Outcome of one fairness check.

    ``values`` maps each group to the quantities compared; ``gaps`` maps
    each compared quantity to its absolute between-group gap. The check
    is satisfied when the largest gap is within tolerance.
    """

    criterion: str
    threshold: int | None
    groups: tuple[str, str]
    values: Mapping[str, Mapping]
    gaps: Mapping[str, float]
    max_abs_gap: float
    tolerance: float
    satisfied: bool
    notes: tuple[str, ...] = ()


def _comparison_groups(ds: Dataset, groups: tuple[str, str] | None) -> tuple[str, str]:
    """Resolve the pair under comparison.

    Default: the first two declared groups with records. More may be
    present; pass ``groups`` explicitly to compare a different pair.
    """
    present = ds.groups_present()
    if groups is None:
        if len(present) < 2:
            raise DataError(
                f"comparison needs two groups present, found {len(present)}: {present}"
            )
        return present[0], present[1]
    g1, g2 = groups
    for g in (g1, g2):
        if g not in present:
            raise DataError(f"group {g!r} has no records")
    if g1 == g2:
        raise DataError("comparison groups must be distinct")
    return g1, g2


def _result(criterion: str, threshold: int | None, groups: tuple[str, str],
            values: Mapping, gaps: Mapping[str, float], tolerance: float,
            notes: tuple[str, ...] = ()) -> CriterionResult:
    if not gaps:
        raise DataError(f"{criterion}: no comparable quantities between groups")
    max_gap = max(gaps.values())
    return CriterionResult(criterion=criterion, threshold=threshold, groups=groups,
                           values=values, gaps=gaps, max_abs_gap=max_gap,
                           tolerance=tolerance, satisfied=max_gap <= tolerance,
                           notes=notes)


def check_calibration(ds: Dataset, tolerance: float = DEFAULT_TOLERANCE,
                      ci_level: float = 0.95,
                      groups: tuple[str, str] | None = None) -> CriterionResult:
    """Compare observed outcome rates score by score.

    Only scores where both groups have at least one record contribute a
    gap; scores present for just one group are listed in ``notes``.
    """
    g1, g2 = _comparison_groups(ds, groups)
    curves = calibration_curve(ds, ci_level)
    cells_1 = curves.get(g1, {})
    cells_2 = curves.get(g2, {})
    common = sorted(set(cells_1) & set(cells_2))
    skipped = sorted(set(cells_1) ^ set(cells_2))
    gaps = {str(s): abs(cells_1[s].estimate - cells_2[s].estimate) for s in common}
    values = {
        g1: {s: cells_1[s].estimate for s in sorted(cells_1)},
        g2: {s: cells_2[s].estimate for s in sorted(cells_2)},
    }
    notes = tuple(f"score {s}: present for only one group, skipped" for s in skipped)
    return _result("calibration", None, (g1, g2), values, gaps, tolerance, notes)


def _paired_metrics(ds: Dataset, s_hr: int, ci_level: float,
                    groups: tuple[str, str] | None) -> tuple[GroupMetrics, GroupMetrics]:
    g1, g2 = _comparison_groups(ds, groups)
    return (group_metrics(ds, g1, s_hr, ci_level),
            group_metrics(ds, g2, s_hr, ci_level))


def check_predictive_parity(ds: Dataset, s_hr: int,
                            tolerance: float = DEFAULT_TOLERANCE,
                            ci_level: float = 0.95,
                            groups: tuple[str, str] | None = None) -> CriterionResult:
    """Equal PPV at the cutoff."""
    m1, m2 = _paired_metrics(ds, s_hr, ci_level, groups)
    for m in (m1, m2):
        if m.ppv is None:
            raise DataError(
                f"PPV undefined for group {m.group!r} at cutoff {s_hr} (no high-risk records)"
            )
    values = {m1.group: {"ppv": m1.ppv}, m2.group: {"ppv": m2.ppv}}
    gaps = {"ppv": abs(m1.ppv - m2.ppv)}
    return _result("predictive_parity", s_hr, (m1.group, m2.group), values, gaps, tolerance)


def check_error_rate_balance(ds: Dataset, s_hr: int,
                             tolerance: float = DEFAULT_TOLERANCE,
                             ci_level: float = 0.95,
                             groups: tuple[str, str] | None = None) -> CriterionResult:
    """Equal FPR and equal FNR at the cutoff; the gap is the larger of the two."""
    m1, m2 = _paired_metrics(ds, s_hr, ci_level, groups)
    for m in (m1, m2):
        if m.fpr is None or m.fnr is None:
            raise DataError(
                f"FPR/FNR undefined for group {m.group!r}: needs both outcomes present"
            )
    values = {m1.group: {"fpr": m1.fpr, "fnr": m1.fnr},
              m2.group: {"fpr": m2.fpr, "fnr": m2.fnr}}
    gaps = {"fpr": abs(m1.fpr - m2.fpr), "fnr": abs(m1.fnr - m2.fnr)}
    return _result("error_rate_balance", s_hr, (m1.group, m2.group), values, gaps, tolerance)


def check_statistical_parity(ds: Dataset, s_hr: int,
                             tolerance: float = DEFAULT_TOLERANCE,
                             ci_level: float = 0.95,
                             groups: tuple[str, str] | None = None) -> CriterionResult:
    """Equal share of records called high risk at the cutoff."""
    m1, m2 = _paired_metrics(ds, s_hr, ci_level, groups)
    values = {m1.group: {"high_risk_rate": m1.high_risk_rate},
              m2.group: {"high_risk_rate": m2.high_risk_rate}}
    gaps = {"high_risk_rate": abs(m1.high_risk_rate - m2.high_risk_rate)}
    return _result("statistical_parity", s_hr, (m1.group, m2.group), values, gaps, tolerance)


def implied_fpr(prevalence: float, ppv: float, fnr: float) -> float:
    """FPR forced by (prevalence, PPV, FNR).

    Evaluates p/(1-p) * (1-PPV)/PPV * (1-FNR). The value is returned as
    computed; callers check feasibility (a value above 1 means no
    instrument with these three quantities exists).
    """
    if not 0.0 < prevalence < 1.0:
        raise ValueError(f"prevalence {prevalence} outside (0, 1)")
    if not 0.0 < ppv <= 1.0:
        raise ValueError(f"ppv {ppv} outside (0, 1]")
    if not 0.0 <= fnr <= 1.0:
        raise ValueError(f"fnr {fnr} outside [0, 1]")
    return (prevalence / (1.0 - prevalence)) * ((1.0 - ppv) / ppv) * (1.0 - fnr)


@dataclass(frozen=True)
class ImpossibilityFinding:
    """Whether equal PPV plus unequal prevalence rules out error rate balance.

    When it applies, the finding evaluates the FPR each group would need
    at a shared counterfactual FNR (the midpoint of the observed FNRs):
    those implied FPRs differ whenever the shared FNR is below 1, so FPR
    equality and FNR equality cannot jointly hold.
    """

    group_b: str
    group_w: str
    prevalence_b: float
    prevalence_w: float
    prevalence_gap: float
    ppv_b: float
    ppv_w: float
    ppv_gap: float
    tolerance: float
    applies: bool
    observed_fpr_gap: float
    observed_fnr_gap: float
    reference_fnr: float
    implied_fpr_b: float
    implied_fpr_w: float
    implied_fpr_gap: float
    error_rate_balance_impossible: bool


def impossibility_report(metrics_b: GroupMetrics, metrics_w: GroupMetrics,
                         tolerance: float = DEFAULT_TOLERANCE) -> ImpossibilityFinding:
    """Package the prevalence/PPV conflict for a pair of group metrics."""
    for m in (metrics_b, metrics_w):
        if m.prevalence is None or m.ppv is None or m.fpr is None or m.fnr is None:
            raise DataError(f"group {m.group!r}: all of prevalence/PPV/FPR/FNR must be defined")
        if not 0.0 < m.prevalence < 1.0:
            raise DataError(f"group {m.group!r}: prevalence {m.prevalence} outside (0, 1)")
    prevalence_gap = abs(metrics_b.prevalence - metrics_w.prevalence)
    ppv_gap = abs(metrics_b.ppv - metrics_w.ppv)
    applies = prevalence_gap > tolerance and ppv_gap <= tolerance
    reference_fnr = (metrics_b.fnr + metrics_w.fnr) / 2.0
    implied_b = implied_fpr(metrics_b.prevalence, metrics_b.ppv, reference_fnr)
    implied_w = implied_fpr(metrics_w.prevalence, metrics_w.ppv, reference_fnr)
    implied_gap = abs(implied_b - implied_w)
    return ImpossibilityFinding(
        group_b=metrics_b.group, group_w=metrics_w.group,
        prevalence_b=metrics_b.prevalence, prevalence_w=metrics_w.prevalence,
        prevalence_gap=prevalence_gap,
        ppv_b=metrics_b.ppv, ppv_w=metrics_w.ppv, ppv_gap=ppv_gap,
        tolerance=tolerance, applies=applies,
        observed_fpr_gap=abs(metrics_b.fpr - metrics_w.fpr),
        observed_fnr_gap=abs(metrics_b.fnr - metrics_w.fnr),
        reference_fnr=reference_fnr,
        implied_fpr_b=implied_b, implied_fpr_w=implied_w,
        implied_fpr_gap=implied_gap,
        error_rate_balance_impossible=applies and implied_gap > 0.0,
    )
