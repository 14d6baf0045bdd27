"""Disparate impact of penalty policies driven by a risk score.

A penalty policy maps a score to a penalty in [t_min, t_max]. Two
shapes are supported: a two-level policy assigning t_max above a cutoff
and t_min at or below it, and a linear interpolation across the score
range. The central quantity is the between-group difference in average
penalty for chosen outcome strata,

  delta(y1, y2) = E(T | group b, Y=y1) - E(T | group w, Y=y2),

which for the two-level policy collapses to the share of each stratum
above the cutoff:

  delta(y1, y2) = (t_max - t_min) * (P(S > s_hr | b, y1) - P(S > s_hr | w, y2)).

Specializing y1 = y2 = 0 gives (t_max - t_min) * (FPR_b - FPR_w) and
y1 = y2 = 1 gives (t_max - t_min) * (FNR_w - FNR_b). Whatever the
stratum choice, |delta| is bounded by (t_max - t_min) times the total
variation distance between the two score distributions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from statistics import fmean, variance
from typing import Mapping

from scipy import stats as _scipy_stats

from ._kv import read_kv
from .dataset import CATEGORICAL, Dataset, Record
from .errors import ConfigError, DataError

MINMAX = "minmax"
INTERPOLATION = "interpolation"


@dataclass(frozen=True)
class ScoreDistribution:
    """Probability mass function over an integer score support."""

    support: tuple[int, ...]
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "support", tuple(self.support))
        object.__setattr__(self, "probs", tuple(float(p) for p in self.probs))
        if len(self.support) != len(self.probs):
            raise DataError("support and probs have different lengths")
        if len(self.support) == 0:
            raise DataError("score distribution needs a nonempty support")
        if any(s2 <= s1 for s1, s2 in zip(self.support, self.support[1:])):
            raise DataError("support must be strictly increasing")
        if any(p < 0.0 for p in self.probs):
            raise DataError("probabilities must be non-negative")
        total = math.fsum(self.probs)
        if abs(total - 1.0) > 1e-9:
            raise DataError(f"probabilities sum to {total!r}, not 1")

    @classmethod
    def from_counts(cls, support: tuple[int, ...], counts: list[int] | tuple[int, ...]) -> "ScoreDistribution":
        total = sum(counts)
        if total <= 0:
            raise DataError("cannot normalize an empty count vector")
        return cls(tuple(support), tuple(c / total for c in counts))

    def mass_above(self, s_hr: int) -> float:
        return math.fsum(p for s, p in zip(self.support, self.probs) if s > s_hr)


def score_distribution(ds: Dataset, group: str, outcome: int | None = None) -> ScoreDistribution:
    """Empirical score pmf for a group over the schema's full score range.

    With ``outcome`` given, conditions on that outcome; otherwise uses
    all of the group's records.
    """
    if outcome not in (None, 0, 1):
        raise DataError(f"outcome {outcome!r} must be 0, 1, or None")
    lo, hi = ds.schema.score_min, ds.schema.score_max
    support = tuple(range(lo, hi + 1))
    counts = [0] * len(support)
    for rec in ds.records_for(group):
        if outcome is not None and rec.outcome != outcome:
            continue
        counts[rec.score - lo] += 1
    if sum(counts) == 0:
        which = "records" if outcome is None else f"records with outcome {outcome}"
        raise DataError(f"group {group!r} has no {which}")
    return ScoreDistribution.from_counts(support, counts)


@dataclass(frozen=True)
class PenaltyPolicy:
    """Score-to-penalty map, two-level or interpolated."""

    kind: str
    t_min: float
    t_max: float
    s_hr: int | None = None
    score_range: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.kind not in (MINMAX, INTERPOLATION):
            raise ConfigError(f"unknown policy kind {self.kind!r}")
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)):
            raise ConfigError("penalty bounds must be finite")
        if self.t_min > self.t_max:
            raise ConfigError(f"t_min {self.t_min} exceeds t_max {self.t_max}")
        if self.kind == MINMAX:
            if self.s_hr is None or isinstance(self.s_hr, bool) or not isinstance(self.s_hr, int):
                raise ConfigError("two-level policy needs an integer cutoff s_hr")
            if self.score_range is not None:
                raise ConfigError("score_range applies only to interpolation policies")
        else:
            if self.score_range is None:
                raise ConfigError("interpolation policy needs a score_range")
            if self.s_hr is not None:
                raise ConfigError("s_hr applies only to two-level policies")
            lo, hi = self.score_range
            if lo >= hi:
                raise ConfigError(f"score_range ({lo}, {hi}) must be increasing")

    @classmethod
    def minmax(cls, t_min: float, t_max: float, s_hr: int) -> "PenaltyPolicy":
        return cls(MINMAX, float(t_min), float(t_max), s_hr=s_hr)

    @classmethod
    def interpolation(cls, t_min: float, t_max: float,
                      score_min: int, score_max: int) -> "PenaltyPolicy":
        return cls(INTERPOLATION, float(t_min), float(t_max),
                   score_range=(score_min, score_max))


def apply_policy(policy: PenaltyPolicy, score: int) -> float:
    """Penalty assigned to one score.

    Two-level: t_max for scores strictly above the cutoff, t_min at or
    below it. Interpolation: linear from t_min at the bottom of the
    score range to t_max at the top.
    """
    if policy.kind == MINMAX:
        return policy.t_max if score > policy.s_hr else policy.t_min
    lo, hi = policy.score_range
    if not (lo <= score <= hi):
        raise DataError(f"score {score} outside policy range [{lo}, {hi}]")
    return policy.t_min + (score - lo) / (hi - lo) * (policy.t_max - policy.t_min)


def expected_penalty(policy: PenaltyPolicy, dist: ScoreDistribution) -> float:
    """Mean penalty under a policy for a score distribution."""
    return math.fsum(p * apply_policy(policy, s) for s, p in zip(dist.support, dist.probs))


def tv_distance(f: ScoreDistribution, g: ScoreDistribution) -> float:
    """Total variation distance between two pmfs on the same support."""
    if f.support != g.support:
        raise DataError("distributions have different supports")
    return 0.5 * math.fsum(abs(pf - pg) for pf, pg in zip(f.probs, g.probs))


def overlap_bound(policy: PenaltyPolicy, f_b: ScoreDistribution,
                  f_w: ScoreDistribution) -> float:
    """Upper bound (t_max - t_min) * TV(f_b, f_w) on |delta| for a two-level policy."""
    if policy.kind != MINMAX:
        raise ConfigError("overlap_bound applies to two-level policies")
    return (policy.t_max - policy.t_min) * tv_distance(f_b, f_w)


def cohens_d(ds: Dataset, groups: tuple[str, str] | None = None) -> float:
    """Standardized mean score difference between the two groups.

    (mean_b - mean_w) / pooled SD, pooling the sample variances with
    n_r - 1 weights. Needs at least two records per group and a nonzero
    pooled variance.
    """
    from .fairness import _comparison_groups
    g_b, g_w = _comparison_groups(ds, groups)
    scores_b = [rec.score for rec in ds.records_for(g_b)]
    scores_w = [rec.score for rec in ds.records_for(g_w)]
    for g, scores in ((g_b, scores_b), (g_w, scores_w)):
        if len(scores) < 2:
            raise DataError(f"group {g!r} needs at least two records for a pooled SD")
    n_b, n_w = len(scores_b), len(scores_w)
    pooled_var = ((n_b - 1) * variance(scores_b) + (n_w - 1) * variance(scores_w)) / (n_b + n_w - 2)
    if pooled_var == 0.0:
        raise DataError("pooled score variance is zero; standardized difference undefined")
    return (fmean(scores_b) - fmean(scores_w)) / math.sqrt(pooled_var)


@dataclass(frozen=True)
class ImpactReport:
    """Average-penalty gap for one (y1, y2) stratum pair."""

    policy: PenaltyPolicy
    group_b: str
    group_w: str
    y1: int
    y2: int
    n_b: int
    n_w: int
    mean_b: float
    mean_w: float
    delta_empirical: float
    delta_closed_form: float | None
    tv_bound: float


def delta(ds: Dataset, policy: PenaltyPolicy, y1: int, y2: int,
          groups: tuple[str, str] | None = None) -> ImpactReport:
    """Between-group difference in average penalty for chosen outcome strata.

    delta_empirical averages per-record penalties directly;
    delta_closed_form (two-level policies only) recomputes it from the
    share of each stratum above the cutoff. The two agree to floating
    precision on the same data. tv_bound is the total-variation upper
    bound on |delta| for these strata.
    """
    if y1 not in (0, 1) or y2 not in (0, 1):
        raise DataError(f"outcome selectors must be 0 or 1, got {y1!r}, {y2!r}")
    from .fairness import _comparison_groups
    g_b, g_w = _comparison_groups(ds, groups)
    stratum_b = [rec for rec in ds.records_for(g_b) if rec.outcome == y1]
    stratum_w = [rec for rec in ds.records_for(g_w) if rec.outcome == y2]
    if not stratum_b:
        raise DataError(f"stratum (group {g_b!r}, outcome {y1}) is empty")
    if not stratum_w:
        raise DataError(f"stratum (group {g_w!r}, outcome {y2}) is empty")
    mean_b = math.fsum(apply_policy(policy, rec.score) for rec in stratum_b) / len(stratum_b)
    mean_w = math.fsum(apply_policy(policy, rec.score) for rec in stratum_w) / len(stratum_w)
    closed: float | None = None
    if policy.kind == MINMAX:
        share_b = sum(1 for rec in stratum_b if rec.score > policy.s_hr) / len(stratum_b)
        share_w = sum(1 for rec in stratum_w if rec.score > policy.s_hr) / len(stratum_w)
        closed = (policy.t_max - policy.t_min) * (share_b - share_w)
    f_b = score_distribution(ds, g_b, y1)
    f_w = score_distribution(ds, g_w, y2)
    bound = (policy.t_max - policy.t_min) * tv_distance(f_b, f_w)
    return ImpactReport(policy=policy, group_b=g_b, group_w=g_w, y1=y1, y2=y2,
                        n_b=len(stratum_b), n_w=len(stratum_w),
                        mean_b=mean_b, mean_w=mean_w,
                        delta_empirical=mean_b - mean_w,
                        delta_closed_form=closed, tv_bound=bound)


# Default mapping from granular charge degrees to offense-gravity labels.
DEFAULT_CHARGE_TO_OGS: Mapping[str, str] = {
    "M2": "2", "M1": "3", "F3": "5", "F2": "7", "F1": "8",
}
DEFAULT_CHARGE_COVARIATE = "c_charge_degree"


@dataclass(frozen=True)
class SentencingConfig:
    """Offense-gravity penalty ranges plus a charge-degree mapping.

    ``ranges`` maps an offense-gravity label to a (t_min, t_max) penalty
    range in months; ``charge_to_ogs`` maps each charge degree value to
    one of those labels. ``prior_record_score`` states the assumed
    prior-record column and is informational. Shipped example values are
    illustrative, not an official guidelines matrix.
    """

    ranges: Mapping[str, tuple[float, float]]
    charge_to_ogs: Mapping[str, str] = None  # type: ignore[assignment]
    charge_covariate: str = DEFAULT_CHARGE_COVARIATE
    prior_record_score: int = 1

    def __post_init__(self) -> None:
        if self.charge_to_ogs is None:
            object.__setattr__(self, "charge_to_ogs", dict(DEFAULT_CHARGE_TO_OGS))
        object.__setattr__(self, "ranges", dict(self.ranges))
        object.__setattr__(self, "charge_to_ogs", dict(self.charge_to_ogs))
        if not self.ranges:
            raise ConfigError("sentencing config declares no offense-gravity ranges")
        for label, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ConfigError(f"offense gravity {label!r}: t_min {lo} exceeds t_max {hi}")
        for degree, label in self.charge_to_ogs.items():
            if label not in self.ranges:
                raise ConfigError(
                    f"charge degree {degree!r} maps to undeclared offense gravity {label!r}"
                )

    @property
    def ogs_order(self) -> tuple[str, ...]:
        return tuple(self.ranges)

    @classmethod
    def from_file(cls, path) -> "SentencingConfig":
        kv = read_kv(path)
        ranges: dict[str, tuple[float, float]] = {}
        charge_map: dict[str, str] = {}
        for key, value in kv.items():
            if key.startswith("ogs."):
                label = key[len("ogs."):]
                parts = [p.strip() for p in value.split(",")]
                if len(parts) != 2:
                    raise ConfigError(f"{key}: expected 't_min, t_max', got {value!r}")
                try:
                    ranges[label] = (float(parts[0]), float(parts[1]))
                except ValueError as exc:
                    raise ConfigError(f"{key}: non-numeric bound in {value!r}") from exc
            elif key.startswith("charge."):
                charge_map[key[len("charge."):]] = value
        charge_covariate = kv.get("charge_covariate", DEFAULT_CHARGE_COVARIATE)
        prior = kv.get("prior_record_score", "1")
        try:
            prior_record_score = int(prior)
        except ValueError as exc:
            raise ConfigError(f"prior_record_score is not an integer: {prior!r}") from exc
        return cls(ranges=ranges,
                   charge_to_ogs=charge_map or None,
                   charge_covariate=charge_covariate,
                   prior_record_score=prior_record_score)


@dataclass(frozen=True)
class SentencingCell:
    ogs: str
    group: str
    outcome: int
    n: int
    mean_penalty: float | None


@dataclass(frozen=True)
class SentencingDelta:
    """Per-stratum average-penalty gap with a Welch two-sample test."""

    ogs: str
    outcome: int
    n_b: int
    n_w: int
    delta: float | None
    welch_t: float | None
    p_value: float | None
    significant: bool | None


@dataclass(frozen=True)
class SentencingAnalysis:
    policy_kind: str
    s_hr: int | None
    group_b: str
    group_w: str
    alpha: float
    cells: tuple[SentencingCell, ...]
    deltas: tuple[SentencingDelta, ...]
    excluded_missing: int
    ranges: Mapping[str, tuple[float, float]]


def _welch(sample_b: list[float], sample_w: list[float]) -> tuple[float | None, float | None]:
    if len(sample_b) < 2 or len(sample_w) < 2:
        return None, None
    with warnings.catch_warnings():
        # scipy warns on (near-)constant samples; the NaN/inf handling
        # below covers exactly those cases.
        warnings.simplefilter("ignore", RuntimeWarning)
        t_stat, p_value = _scipy_stats.ttest_ind(sample_b, sample_w, equal_var=False)
    if math.isnan(p_value):
        return None, None
    # Zero variance with distinct means gives t = +-inf, p = 0; reports
    # must stay finite, so carry the p-value and drop the statistic.
    t = float(t_stat) if math.isfinite(t_stat) else None
    return t, float(p_value)


def sentencing_analysis(ds: Dataset, cfg: SentencingConfig, kind: str = MINMAX,
                        s_hr: int | None = None, alpha: float = 0.01,
                        groups: tuple[str, str] | None = None) -> SentencingAnalysis:
    """Average penalties by offense-gravity stratum, group, and outcome.

    Each record is assigned to a stratum via its charge-degree covariate
    and receives the stratum's penalty range under the chosen policy
    kind. Per stratum and outcome, the report carries the between-group
    mean gap (group b minus group w) and a Welch two-sample test at
    ``alpha``. Records with a missing charge degree are excluded and
    counted; an unmapped degree is an error.
    """
    if kind not in (MINMAX, INTERPOLATION):
        raise ConfigError(f"unknown policy kind {kind!r}")
    if kind == MINMAX and s_hr is None:
        raise ConfigError("two-level sentencing analysis needs a cutoff s_hr")
    from .fairness import _comparison_groups
    g_b, g_w = _comparison_groups(ds, groups)
    kinds = ds.schema.covariate_kinds()
    cov = cfg.charge_covariate
    if kinds.get(cov) != CATEGORICAL:
        raise DataError(f"charge covariate {cov!r} must be a declared categorical covariate")

    by_ogs: dict[str, list[Record]] = {label: [] for label in cfg.ogs_order}
    excluded = 0
    for rec in ds.records:
        if rec.group not in (g_b, g_w):
            continue
        degree = rec.covariates.get(cov)
        if degree is None:
            excluded += 1
            continue
        label = cfg.charge_to_ogs.get(degree)
        if label is None:
            raise DataError(f"charge degree {degree!r} has no offense-gravity mapping")
        by_ogs[label].append(rec)

    def policy_for(label: str) -> PenaltyPolicy:
        lo, hi = cfg.ranges[label]
        if kind == MINMAX:
            return PenaltyPolicy.minmax(lo, hi, s_hr)
        return PenaltyPolicy.interpolation(lo, hi, ds.schema.score_min, ds.schema.score_max)

    cells: list[SentencingCell] = []
    deltas: list[SentencingDelta] = []
    used_ranges: dict[str, tuple[float, float]] = {}
    for label in cfg.ogs_order:
        records = by_ogs[label]
        if not records:
            continue
        used_ranges[label] = cfg.ranges[label]
        policy = policy_for(label)
        samples: dict[tuple[str, int], list[float]] = {}
        for rec in records:
            samples.setdefault((rec.group, rec.outcome), []).append(
                apply_policy(policy, rec.score)
            )
        for group in (g_b, g_w):
            for outcome in (0, 1):
                sample = samples.get((group, outcome), [])
                cells.append(SentencingCell(
                    ogs=label, group=group, outcome=outcome, n=len(sample),
                    mean_penalty=fmean(sample) if sample else None,
                ))
        for outcome in (0, 1):
            sample_b = samples.get((g_b, outcome), [])
            sample_w = samples.get((g_w, outcome), [])
            gap = None
            if sample_b and sample_w:
                gap = fmean(sample_b) - fmean(sample_w)
            t_stat, p_value = _welch(sample_b, sample_w)
            deltas.append(SentencingDelta(
                ogs=label, outcome=outcome, n_b=len(sample_b), n_w=len(sample_w),
                delta=gap, welch_t=t_stat, p_value=p_value,
                significant=None if p_value is None else p_value < alpha,
            ))
    return SentencingAnalysis(policy_kind=kind, s_hr=s_hr, group_b=g_b, group_w=g_w,
                              alpha=alpha, cells=tuple(cells), deltas=tuple(deltas),
                              excluded_missing=excluded, ranges=used_ranges)
