"""Geometry of attainable (FNR, FPR) pairs at fixed prevalence and PPV.

Fixing a group's prevalence p and PPV pins its error rates to the line

  FPR = p/(1-p) * (1-PPV)/PPV * (1-FNR),

decreasing in FNR and hitting FPR = 0 at FNR = 1. Letting PPV move in a
band around a center sweeps the line through a region; smaller bands
give nested regions. The strategy report solves the same identity three
ways for a group b relative to a reference group w: for the FNR_b that
matches w's FPR, for the FPR_b implied by matching w's FNR, and for the
PPV_b that would permit matching both error rates at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import DataError
from .fairness import implied_fpr
from .metrics import GroupMetrics


@dataclass(frozen=True)
class FeasibleLine:
    """All (FNR, FPR) pairs compatible with one (prevalence, PPV) pair."""

    prevalence: float
    ppv: float

    @property
    def slope(self) -> float:
        """d FPR / d FNR, always non-positive."""
        return -(self.prevalence / (1.0 - self.prevalence)) * (1.0 - self.ppv) / self.ppv

    def fpr_at(self, fnr: float) -> float:
        """FPR on the line, as computed (may exceed 1 for small FNR)."""
        return implied_fpr(self.prevalence, self.ppv, fnr)

    @property
    def max_fpr(self) -> float:
        return self.fpr_at(0.0)

    @property
    def infeasible_below(self) -> float | None:
        """FNR value below which the line leaves the unit square, if any."""
        if self.max_fpr <= 1.0:
            return None
        return 1.0 - 1.0 / self.max_fpr


def feasible_line(prevalence: float, ppv: float) -> FeasibleLine:
    if not 0.0 < prevalence < 1.0:
        raise DataError(f"prevalence {prevalence} outside (0, 1)")
    if not 0.0 < ppv <= 1.0:
        raise DataError(f"ppv {ppv} outside (0, 1]")
    return FeasibleLine(prevalence, ppv)


@dataclass(frozen=True)
class FeasibleRegion:
    """Band of feasible lines for PPV in [ppv_center - delta, ppv_center + delta].

    FPR decreases as PPV grows, so the line at the top of the band is the
    region's lower boundary. When the band reaches PPV values at or
    below 0 the upper boundary is unbounded and the region is clipped to
    the unit square; ``clipped`` flags any clipping.
    """

    prevalence: float
    ppv_center: float
    delta: float
    lower_line: FeasibleLine
    upper_line: FeasibleLine | None
    clipped: bool

    def bounds_at(self, fnr: float) -> tuple[float, float]:
        """FPR bounds of the region at one FNR, clipped to [0, 1]."""
        if not 0.0 <= fnr <= 1.0:
            raise DataError(f"fnr {fnr} outside [0, 1]")
        lo = min(self.lower_line.fpr_at(fnr), 1.0)
        hi = 1.0 if self.upper_line is None else min(self.upper_line.fpr_at(fnr), 1.0)
        return lo, hi

    def contains(self, fnr: float, fpr: float) -> bool:
        """Inclusive membership in the clipped region."""
        if not (0.0 <= fnr <= 1.0 and 0.0 <= fpr <= 1.0):
            return False
        lo, hi = self.bounds_at(fnr)
        return lo <= fpr <= hi


def feasible_region(prevalence: float, ppv_center: float, delta: float) -> FeasibleRegion:
    if not 0.0 < prevalence < 1.0:
        raise DataError(f"prevalence {prevalence} outside (0, 1)")
    if not 0.0 < ppv_center <= 1.0:
        raise DataError(f"ppv_center {ppv_center} outside (0, 1]")
    if delta < 0.0:
        raise DataError(f"delta {delta} must be non-negative")
    ppv_hi = min(ppv_center + delta, 1.0)
    ppv_lo = ppv_center - delta
    lower = FeasibleLine(prevalence, ppv_hi)
    upper = FeasibleLine(prevalence, ppv_lo) if ppv_lo > 0.0 else None
    clipped = (
        ppv_center + delta > 1.0
        or ppv_lo <= 0.0
        or (upper is not None and upper.max_fpr > 1.0)
    )
    return FeasibleRegion(prevalence=prevalence, ppv_center=ppv_center, delta=delta,
                          lower_line=lower, upper_line=upper, clipped=clipped)


@dataclass(frozen=True)
class StrategyOutcome:
    """One way of reconciling group b with group w's operating point."""

    strategy: str
    quantity: str
    value: float | None
    feasible: bool
    note: str = ""


@dataclass(frozen=True)
class StrategyReport:
    group_b: str
    group_w: str
    observed: Mapping[str, float | None]
    outcomes: tuple[StrategyOutcome, ...]


def strategy_report(metrics_b: GroupMetrics, metrics_w: GroupMetrics) -> StrategyReport:
    """Solve the prevalence/PPV identity three ways for group b.

    Holding PPV at group w's value: (i) the FNR_b whose implied FPR
    equals group w's FPR, (ii) the FPR_b implied by adopting group w's
    FNR. Then (iii) the PPV_b under which group b could match both of
    group w's error rates. A solution outside its valid range is
    reported with ``feasible=False``, never clamped.
    """
    p_b = metrics_b.prevalence
    if p_b is None or not 0.0 < p_b < 1.0:
        raise DataError(f"group {metrics_b.group!r}: prevalence must be defined in (0, 1)")
    ppv_w = metrics_w.ppv
    fnr_w = metrics_w.fnr
    fpr_w = metrics_w.fpr
    if ppv_w is None or fnr_w is None or fpr_w is None:
        raise DataError(f"group {metrics_w.group!r}: PPV, FNR, and FPR must all be defined")
    if ppv_w == 0.0:
        raise DataError(f"group {metrics_w.group!r}: PPV of 0 admits no solution")

    outcomes: list[StrategyOutcome] = []

    # (i) choose FNR_b so that the implied FPR matches group w's FPR.
    slope_mag = implied_fpr(p_b, ppv_w, 0.0)
    if slope_mag == 0.0:
        feasible = fpr_w == 0.0
        note = ("any FNR works: PPV of 1 implies FPR 0" if feasible
                else "PPV of 1 forces FPR 0, which differs from group w's FPR")
        outcomes.append(StrategyOutcome("equal_fpr_given_ppv", "fnr_b", None, feasible, note))
    else:
        fnr_b = 1.0 - fpr_w / slope_mag
        feasible = 0.0 <= fnr_b <= 1.0
        note = "" if feasible else "solution falls outside [0, 1]"
        outcomes.append(StrategyOutcome("equal_fpr_given_ppv", "fnr_b", fnr_b, feasible, note))

    # (ii) adopt group w's FNR and report the implied FPR.
    fpr_b = implied_fpr(p_b, ppv_w, fnr_w)
    feasible = fpr_b <= 1.0
    note = "" if feasible else "implied FPR exceeds 1; unattainable"
    outcomes.append(StrategyOutcome("equal_fnr_given_ppv", "fpr_b", fpr_b, feasible, note))

    # (iii) find the PPV_b at which both of group w's error rates are attainable.
    if fnr_w == 1.0:
        if fpr_w == 0.0:
            outcomes.append(StrategyOutcome(
                "equal_error_rates", "ppv_b", None, True,
                "degenerate target (FNR 1, FPR 0): every PPV is compatible"))
        else:
            outcomes.append(StrategyOutcome(
                "equal_error_rates", "ppv_b", None, False,
                "FNR of 1 with positive FPR admits no PPV in (0, 1]"))
    else:
        ratio = fpr_w * (1.0 - p_b) / (p_b * (1.0 - fnr_w))
        ppv_b = 1.0 / (1.0 + ratio)
        outcomes.append(StrategyOutcome("equal_error_rates", "ppv_b", ppv_b, True, ""))

    observed = {
        "prevalence_b": metrics_b.prevalence, "ppv_b": metrics_b.ppv,
        "fpr_b": metrics_b.fpr, "fnr_b": metrics_b.fnr,
        "prevalence_w": metrics_w.prevalence, "ppv_w": ppv_w,
        "fpr_w": fpr_w, "fnr_w": fnr_w,
    }
    return StrategyReport(group_b=metrics_b.group, group_w=metrics_w.group,
                          observed=observed, outcomes=tuple(outcomes))
