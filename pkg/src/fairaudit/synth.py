"""Synthetic populations with known ground truth.

A PopulationSpec fixes, per group, a size, a prevalence, and one score
pmf per outcome. Exact-count generation materializes it with largest
remainder rounding, so the realized counts match the spec up to less
than one record per cell and property tests can rely on exact
arithmetic; sampled generation draws instead, with one seeded stream
per group-by-outcome cell.

Two constructions build instruments witnessing the structural results:
``construct_parity_instrument`` realizes exact PPV equality at a cutoff
together with a prevalence gap (forcing unequal error rates), and
``construct_calibrated_instrument`` realizes exact score-by-score
calibration from shared per-score outcome rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from ._kv import read_kv
from .dataset import Dataset, DatasetSchema, Provenance, Record
from .errors import ConfigError, DataError
from .impact import ScoreDistribution

EXACT = "exact"
SAMPLE = "sample"

_MAX_GROUP_SIZE = 500_000


@dataclass(frozen=True)
class GroupSpec:
    """One group's size, prevalence, and per-outcome score pmfs."""

    size: int
    prevalence: float
    pmf_y0: ScoreDistribution
    pmf_y1: ScoreDistribution

    def __post_init__(self) -> None:
        if not isinstance(self.size, int) or isinstance(self.size, bool) or self.size < 1:
            raise ConfigError(f"group size {self.size!r} must be a positive integer")
        if not 0.0 <= self.prevalence <= 1.0:
            raise ConfigError(f"prevalence {self.prevalence} outside [0, 1]")
        if self.pmf_y0.support != self.pmf_y1.support:
            raise ConfigError("per-outcome pmfs must share a support")


@dataclass(frozen=True)
class PopulationSpec:
    """Blueprint for a synthetic two-or-more-group population."""

    groups: Mapping[str, GroupSpec]
    seed: int = 0
    annotations: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", dict(self.groups))
        object.__setattr__(self, "annotations", dict(self.annotations))
        if not self.groups:
            raise ConfigError("population spec declares no groups")
        supports = {gs.pmf_y0.support for gs in self.groups.values()}
        if len(supports) != 1:
            raise ConfigError("all groups must share one score support")
        for label, gs in self.groups.items():
            for pmf in (gs.pmf_y0, gs.pmf_y1):
                total = math.fsum(pmf.probs)
                if abs(total - 1.0) > 1e-12:
                    raise ConfigError(
                        f"group {label!r}: pmf sums to {total!r}, beyond 1e-12 of 1"
                    )

    @property
    def support(self) -> tuple[int, ...]:
        return next(iter(self.groups.values())).pmf_y0.support

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.groups)

    @classmethod
    def from_file(cls, path) -> "PopulationSpec":
        kv = read_kv(path)
        if "support" not in kv:
            raise ConfigError("population spec needs a 'support' key")
        support = _parse_support(kv["support"])
        seed = 0
        if "seed" in kv:
            try:
                seed = int(kv["seed"])
            except ValueError as exc:
                raise ConfigError(f"seed is not an integer: {kv['seed']!r}") from exc
        labels = []
        for key in kv:
            if key.startswith("group.") and key.endswith(".size"):
                labels.append(key[len("group."):-len(".size")])
        if not labels:
            raise ConfigError("population spec declares no group.<label>.size keys")
        groups: dict[str, GroupSpec] = {}
        for label in labels:
            prefix = f"group.{label}."
            def need(suffix: str) -> str:
                key = prefix + suffix
                if key not in kv:
                    raise ConfigError(f"population spec missing {key!r}")
                return kv[key]
            try:
                size = int(need("size"))
                prevalence = float(need("prevalence"))
            except ValueError as exc:
                raise ConfigError(f"group {label!r}: non-numeric size or prevalence") from exc
            pmf0 = _parse_pmf(need("pmf_y0"), support, f"group.{label}.pmf_y0")
            pmf1 = _parse_pmf(need("pmf_y1"), support, f"group.{label}.pmf_y1")
            groups[label] = GroupSpec(size, prevalence, pmf0, pmf1)
        return cls(groups=groups, seed=seed)


def _parse_support(text: str) -> tuple[int, ...]:
    try:
        if ":" in text:
            lo_text, hi_text = text.split(":", 1)
            lo, hi = int(lo_text), int(hi_text)
            if lo > hi:
                raise ConfigError(f"support range {text!r} is decreasing")
            return tuple(range(lo, hi + 1))
        return tuple(int(part.strip()) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"cannot parse support {text!r}") from exc


def _parse_pmf(text: str, support: tuple[int, ...], where: str) -> ScoreDistribution:
    try:
        probs = tuple(float(part.strip()) for part in text.split(","))
    except ValueError as exc:
        raise ConfigError(f"{where}: non-numeric probability") from exc
    if len(probs) != len(support):
        raise ConfigError(f"{where}: {len(probs)} probabilities for {len(support)} support points")
    try:
        return ScoreDistribution(support, probs)
    except DataError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def apportion(total: int, weights: Sequence[float]) -> list[int]:
    """Largest remainder rounding of ``total * weights`` to integers.

    Deterministic: ties order by remainder descending, then index. When
    a target is within 1e-9 of an integer it is treated as exact, so
    count-derived weights reproduce their counts.
    """
    if not isinstance(total, int) or isinstance(total, bool) or total < 0:
        raise DataError(f"total {total!r} must be a non-negative integer")
    if len(weights) == 0:
        raise DataError("cannot apportion over zero cells")
    if any(w < 0.0 for w in weights):
        raise DataError("weights must be non-negative")
    scale = math.fsum(weights)
    if scale <= 0.0:
        raise DataError("weights sum to zero")
    targets = []
    for w in weights:
        t = total * (w / scale)
        nearest = round(t)
        if abs(t - nearest) < 1e-9:
            t = float(nearest)
        targets.append(t)
    base = [math.floor(t) for t in targets]
    leftover = total - sum(base)
    order = sorted(range(len(weights)), key=lambda i: (-(targets[i] - base[i]), i))
    for i in order[:leftover]:
        base[i] += 1
    return base


def _schema_for(spec: PopulationSpec) -> DatasetSchema:
    support = spec.support
    return DatasetSchema(groups=spec.labels, score_min=support[0], score_max=support[-1])


def generate(spec: PopulationSpec, mode: str = EXACT) -> Dataset:
    """Materialize a PopulationSpec as a Dataset.

    Exact mode rounds expected counts deterministically (largest
    remainder), first splitting each group by outcome, then each outcome
    cell across scores. Sample mode draws the outcome split binomially
    and the score placement multinomially, with independent seeded
    streams per group and per group-by-outcome cell. Record order is
    deterministic either way.
    """
    if mode not in (EXACT, SAMPLE):
        raise ConfigError(f"unknown generation mode {mode!r}")
    support = spec.support
    records: list[Record] = []
    for gi, (label, gs) in enumerate(spec.groups.items()):
        if mode == EXACT:
            positives = apportion(gs.size, [gs.prevalence, 1.0 - gs.prevalence])[0]
        else:
            group_rng = np.random.default_rng(np.random.SeedSequence(spec.seed, spawn_key=(gi,)))
            positives = int(group_rng.binomial(gs.size, gs.prevalence))
        for outcome, cell_n, pmf in ((0, gs.size - positives, gs.pmf_y0),
                                     (1, positives, gs.pmf_y1)):
            if cell_n == 0:
                continue
            if mode == EXACT:
                counts = apportion(cell_n, pmf.probs)
            else:
                cell_rng = np.random.default_rng(
                    np.random.SeedSequence(spec.seed, spawn_key=(gi, outcome))
                )
                counts = cell_rng.multinomial(cell_n, pmf.probs).tolist()
            for score, count in zip(support, counts):
                records.extend(Record(label, score, outcome) for _ in range(count))
    return Dataset(tuple(records), _schema_for(spec),
                   Provenance(f"synth:{mode}:seed={spec.seed}"))


def _split_support(support: Sequence[int], s_hr: int) -> tuple[tuple[int, ...], int, int]:
    ordered = tuple(sorted(set(int(s) for s in support)))
    if not ordered:
        raise DataError("support is empty")
    low = [s for s in ordered if s <= s_hr]
    high = [s for s in ordered if s > s_hr]
    if not low or not high:
        raise DataError(f"cutoff {s_hr} must split the support {ordered}")
    return ordered, low[-1], high[0]


def _point_mass_pair(support: tuple[int, ...], s_lo: int, s_hi: int,
                     mass_lo: float, mass_hi: float) -> ScoreDistribution:
    probs = [0.0] * len(support)
    probs[support.index(s_lo)] = mass_lo
    probs[support.index(s_hi)] = mass_hi
    return ScoreDistribution(support, tuple(probs))


def construct_parity_instrument(p_b: float, p_w: float, s_hr: int, target_ppv: float,
                                support: Sequence[int],
                                fnrs: tuple[float, float] | None = None,
                                seed: int = 0,
                                max_denominator: int = 100) -> PopulationSpec:
    """Spec whose exact-count population has equal PPV but unequal prevalence.

    Both groups receive the identical (TP, FP) integer pair, so the
    realized PPVs are exactly equal (the target rationalized to
    ``max_denominator``); prevalences and FNRs are realized as close to
    the requests as integer counts allow, with the achieved values in
    ``annotations``. Infeasible requests (the implied FPR would exceed
    1, forcing a negative TN count) raise a DataError. Choose FNRs via
    ``fnrs``; the default picks, per group, the midpoint of the feasible
    FNR interval, which is symmetric when p_b = p_w.
    """
    for name, p in (("p_b", p_b), ("p_w", p_w)):
        if not 0.0 < p < 1.0:
            raise DataError(f"{name} {p} outside (0, 1)")
    if not 0.0 < target_ppv <= 1.0:
        raise DataError(f"target_ppv {target_ppv} outside (0, 1]")
    ordered, s_lo, s_hi = _split_support(support, s_hr)
    ppv_frac = Fraction(target_ppv).limit_denominator(max_denominator)
    tp = ppv_frac.numerator
    fp = ppv_frac.denominator - ppv_frac.numerator
    if tp == 0:
        raise DataError(f"target_ppv {target_ppv} rationalizes to 0")

    chosen_fnrs: list[float] = []
    if fnrs is None:
        for p in (p_b, p_w):
            ceiling = (p / (1.0 - p)) * (fp / tp)
            lower = 0.0 if ceiling <= 1.0 else 1.0 - 1.0 / ceiling
            chosen_fnrs.append((lower + 1.0) / 2.0)
    else:
        for f in fnrs:
            if not 0.0 <= f < 1.0:
                raise DataError(f"fnr {f} outside [0, 1)")
        chosen_fnrs = list(fnrs)

    groups: dict[str, GroupSpec] = {}
    annotations: dict[str, float] = {"target_ppv": tp / (tp + fp)}
    for label, p, fnr in (("b", p_b, chosen_fnrs[0]), ("w", p_w, chosen_fnrs[1])):
        fn = round(tp * fnr / (1.0 - fnr))
        k = tp + fn
        n = round(k / p)
        m = n - k
        tn = m - fp
        if tn < 0:
            raise DataError(
                f"group {label!r}: target PPV {target_ppv} infeasible at prevalence {p} "
                f"and FNR {fnr} (implied FPR exceeds 1)"
            )
        if n > _MAX_GROUP_SIZE:
            raise DataError(
                f"group {label!r}: exact realization needs {n} records; "
                f"coarsen the target or raise the FNR"
            )
        pmf_y1 = _point_mass_pair(ordered, s_lo, s_hi, fn / k, tp / k)
        if m > 0:
            pmf_y0 = _point_mass_pair(ordered, s_lo, s_hi, tn / m, fp / m)
        else:
            pmf_y0 = _point_mass_pair(ordered, s_lo, s_hi, 1.0, 0.0)
        groups[label] = GroupSpec(size=n, prevalence=k / n, pmf_y0=pmf_y0, pmf_y1=pmf_y1)
        annotations[f"chosen_fnr_{label}"] = fnr
        annotations[f"fnr_{label}"] = fn / k
        annotations[f"prevalence_{label}"] = k / n
        if m > 0:
            annotations[f"fpr_{label}"] = fp / m
    return PopulationSpec(groups=groups, seed=seed, annotations=annotations)


def construct_calibrated_instrument(per_score_rates: Mapping[int, float],
                                    group_pmfs: Mapping[str, ScoreDistribution],
                                    sizes: Mapping[str, int],
                                    seed: int = 0,
                                    max_denominator: int = 50) -> PopulationSpec:
    """Spec whose exact-count population is calibrated score by score.

    Every group shares the per-score outcome rates; each rate is
    rationalized to ``max_denominator`` and every nonempty (group,
    score) cell is sized to a multiple of that rate's denominator, so
    the realized outcome rate in each cell is exactly the shared value.
    Group score pmfs and sizes are honored up to that rounding; realized
    sizes land in ``annotations``.
    """
    if not group_pmfs:
        raise ConfigError("no group pmfs given")
    if set(group_pmfs) != set(sizes):
        raise ConfigError("group_pmfs and sizes must cover the same groups")
    supports = {pmf.support for pmf in group_pmfs.values()}
    if len(supports) != 1:
        raise ConfigError("all group pmfs must share one support")
    support = next(iter(supports))
    rates: dict[int, Fraction] = {}
    for s in support:
        if s not in per_score_rates:
            raise DataError(f"no outcome rate given for score {s}")
        rate = per_score_rates[s]
        if not 0.0 <= rate <= 1.0:
            raise DataError(f"outcome rate {rate} at score {s} outside [0, 1]")
        rates[s] = Fraction(rate).limit_denominator(max_denominator)

    groups: dict[str, GroupSpec] = {}
    annotations: dict[str, float] = {}
    for label, pmf in group_pmfs.items():
        size = sizes[label]
        if not isinstance(size, int) or isinstance(size, bool) or size < 1:
            raise ConfigError(f"group {label!r}: size {size!r} must be a positive integer")
        cell_counts: list[int] = []
        cell_positives: list[int] = []
        for s, f in zip(support, pmf.probs):
            if f <= 0.0:
                cell_counts.append(0)
                cell_positives.append(0)
                continue
            den = rates[s].denominator
            count = max(den, round(size * f / den) * den)
            positives_frac = count * rates[s]
            assert positives_frac.denominator == 1
            cell_counts.append(count)
            cell_positives.append(int(positives_frac))
        n = sum(cell_counts)
        k = sum(cell_positives)
        m = n - k
        if n == 0:
            raise DataError(f"group {label!r}: pmf has no mass")
        if k > 0:
            pmf_y1 = ScoreDistribution(support, tuple(pos / k for pos in cell_positives))
        else:
            pmf_y1 = _degenerate_at(support, 0)
        if m > 0:
            pmf_y0 = ScoreDistribution(
                support, tuple((c - pos) / m for c, pos in zip(cell_counts, cell_positives))
            )
        else:
            pmf_y0 = _degenerate_at(support, 0)
        groups[label] = GroupSpec(size=n, prevalence=k / n, pmf_y0=pmf_y0, pmf_y1=pmf_y1)
        annotations[f"size_{label}"] = float(n)
        annotations[f"prevalence_{label}"] = k / n
    return PopulationSpec(groups=groups, seed=seed, annotations=annotations)


def _degenerate_at(support: tuple[int, ...], index: int) -> ScoreDistribution:
    probs = [0.0] * len(support)
    probs[index] = 1.0
    return ScoreDistribution(support, tuple(probs))
