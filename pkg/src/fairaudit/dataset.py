"""Loading, validating, and filtering risk-score datasets.

A dataset is an immutable collection of records, each carrying a group
label, an integer score, a binary outcome, and optional covariates.
Covariate values may be explicitly missing (``None``); they are never
silently coerced to a default. Every derived dataset records how it was
produced in its provenance.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from ._kv import read_kv
from .errors import ConfigError, DataError

# Shared empty covariate map so covariate-free records stay lightweight.
EMPTY_COVARIATES: Mapping[str, object] = MappingProxyType({})

NUMERIC = "numeric"
CATEGORICAL = "categorical"
_KINDS = (NUMERIC, CATEGORICAL)

# Field names reserved for the canonical columns written by write_csv.
_RESERVED_NAMES = ("group", "score", "outcome")


@dataclass(frozen=True)
class CovariateSpec:
    """Declared covariate: a name plus a kind (numeric or categorical)."""

    name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ConfigError(f"covariate {self.name!r}: unknown kind {self.kind!r}")


@dataclass(frozen=True)
class DatasetSchema:
    """Declared group labels, integer score range, and covariates."""

    groups: tuple[str, ...]
    score_min: int
    score_max: int
    covariates: tuple[CovariateSpec, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if len(self.groups) == 0:
            raise ConfigError("schema must declare at least one group label")
        if len(set(self.groups)) != len(self.groups):
            raise ConfigError("schema group labels must be distinct")
        if self.score_min > self.score_max:
            raise ConfigError(
                f"score_min {self.score_min} exceeds score_max {self.score_max}"
            )
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ConfigError("covariate names must be distinct")
        for name in names:
            if name in _RESERVED_NAMES:
                raise ConfigError(
                    f"covariate name {name!r} is reserved for a canonical column"
                )

    def covariate_kinds(self) -> dict[str, str]:
        return {c.name: c.kind for c in self.covariates}


@dataclass(frozen=True)
class Record:
    """One scored individual."""

    group: str
    score: int
    outcome: int
    covariates: Mapping[str, object] = EMPTY_COVARIATES


@dataclass(frozen=True)
class Provenance:
    """Where a dataset came from and which filters produced it."""

    source: str
    filters: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "filters", tuple(self.filters))

    def with_filter(self, description: str) -> "Provenance":
        return Provenance(self.source, self.filters + (description,))


@dataclass(frozen=True)
class CovariateFilter:
    """Predicate over covariates.

    ``membership`` constrains categorical covariates to a set of values;
    ``ranges`` constrains numeric covariates to an inclusive interval.
    A record whose referenced covariate is missing matches neither way:
    filtering excludes it and reports the exclusion count.
    """

    membership: Mapping[str, frozenset] = field(default_factory=dict)
    ranges: Mapping[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "membership", {k: frozenset(v) for k, v in self.membership.items()}
        )
        object.__setattr__(
            self,
            "ranges",
            {k: (float(lo), float(hi)) for k, (lo, hi) in self.ranges.items()},
        )
        for name, (lo, hi) in self.ranges.items():
            if lo > hi:
                raise ConfigError(f"range for {name!r} has lo {lo} > hi {hi}")

    def names(self) -> set[str]:
        return set(self.membership) | set(self.ranges)

    def describe(self) -> str:
        parts = []
        for name in sorted(self.membership):
            values = ", ".join(sorted(map(str, self.membership[name])))
            parts.append(f"{name} in {{{values}}}")
        for name in sorted(self.ranges):
            lo, hi = self.ranges[name]
            parts.append(f"{name} in [{lo}, {hi}]")
        return " and ".join(parts) if parts else "<no constraints>"

    def evaluate(self, record: Record) -> bool | None:
        """True/False for a definite match, None if a referenced value is missing."""
        for name, allowed in self.membership.items():
            value = record.covariates.get(name)
            if value is None:
                return None
            if value not in allowed:
                return False
        for name, (lo, hi) in self.ranges.items():
            value = record.covariates.get(name)
            if value is None:
                return None
            if not (lo <= value <= hi):
                return False
        return True


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of records with a schema and provenance."""

    records: tuple[Record, ...]
    schema: DatasetSchema
    provenance: Provenance

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(self.records))
        declared = set(self.schema.groups)
        kinds = self.schema.covariate_kinds()
        lo, hi = self.schema.score_min, self.schema.score_max
        for i, rec in enumerate(self.records):
            if rec.group not in declared:
                raise DataError(f"record {i}: group {rec.group!r} not declared in schema")
            if not isinstance(rec.score, int) or isinstance(rec.score, bool):
                raise DataError(f"record {i}: score {rec.score!r} is not an integer")
            if not (lo <= rec.score <= hi):
                raise DataError(
                    f"record {i}: score {rec.score} outside declared range [{lo}, {hi}]"
                )
            if rec.outcome not in (0, 1) or isinstance(rec.outcome, bool):
                raise DataError(f"record {i}: outcome {rec.outcome!r} is not 0 or 1")
            for name, value in rec.covariates.items():
                kind = kinds.get(name)
                if kind is None:
                    raise DataError(f"record {i}: covariate {name!r} not declared in schema")
                if value is None:
                    continue
                if kind == NUMERIC and (
                    isinstance(value, bool) or not isinstance(value, (int, float))
                ):
                    raise DataError(
                        f"record {i}: numeric covariate {name!r} has value {value!r}"
                    )
                if kind == CATEGORICAL and not isinstance(value, str):
                    raise DataError(
                        f"record {i}: categorical covariate {name!r} has value {value!r}"
                    )

    @property
    def n(self) -> int:
        return len(self.records)

    def groups_present(self) -> tuple[str, ...]:
        """Declared groups with at least one record, in declaration order."""
        present = {rec.group for rec in self.records}
        return tuple(g for g in self.schema.groups if g in present)

    def records_for(self, group: str) -> tuple[Record, ...]:
        if group not in self.schema.groups:
            raise DataError(f"group {group!r} not declared in schema")
        return tuple(rec for rec in self.records if rec.group == group)

    def group_counts(self) -> dict[str, int]:
        counts = {g: 0 for g in self.groups_present()}
        for rec in self.records:
            counts[rec.group] += 1
        return counts

    def filter(self, predicate: CovariateFilter) -> "Dataset":
        """Keep records matching the predicate.

        Records whose referenced covariates are missing are excluded and
        the exclusion count is recorded in the provenance. The schema is
        unchanged, so filtering is composable and idempotent.
        """
        unknown = predicate.names() - set(self.schema.covariate_kinds())
        if unknown:
            raise DataError(f"filter references undeclared covariates: {sorted(unknown)}")
        kinds = self.schema.covariate_kinds()
        for name in predicate.membership:
            if kinds[name] != CATEGORICAL:
                raise DataError(f"membership constraint on non-categorical covariate {name!r}")
        for name in predicate.ranges:
            if kinds[name] != NUMERIC:
                raise DataError(f"range constraint on non-numeric covariate {name!r}")
        kept = []
        missing = 0
        for rec in self.records:
            verdict = predicate.evaluate(rec)
            if verdict is None:
                missing += 1
            elif verdict:
                kept.append(rec)
        note = (
            f"filter {predicate.describe()} "
            f"(kept {len(kept)} of {self.n}; excluded {missing} with missing values)"
        )
        return Dataset(tuple(kept), self.schema, self.provenance.with_filter(note))


@dataclass(frozen=True)
class LoadConfig:
    """Parsed loader configuration: column mapping plus schema."""

    schema: DatasetSchema
    group_column: str
    score_column: str
    outcome_column: str
    covariate_columns: Mapping[str, str]
    raw: Mapping[str, str]

    @classmethod
    def from_file(cls, path: str | os.PathLike[str]) -> "LoadConfig":
        return cls.from_mapping(read_kv(path))

    @classmethod
    def from_mapping(cls, kv: Mapping[str, str]) -> "LoadConfig":
        def require(key: str) -> str:
            if key not in kv or not kv[key]:
                raise ConfigError(f"schema config missing required key {key!r}")
            return kv[key]

        group_column = require("group_column")
        score_column = require("score_column")
        outcome_column = require("outcome_column")
        groups = tuple(part.strip() for part in require("groups").split(","))
        if any(not g for g in groups):
            raise ConfigError("schema config 'groups' contains an empty label")

        def parse_int(key: str, default: int) -> int:
            if key not in kv:
                return default
            try:
                return int(kv[key])
            except ValueError as exc:
                raise ConfigError(f"schema config {key!r} is not an integer: {kv[key]!r}") from exc

        score_min = parse_int("score_min", 1)
        score_max = parse_int("score_max", 10)

        covariates = []
        covariate_columns: dict[str, str] = {}
        for key, value in kv.items():
            if not key.startswith("covariate."):
                continue
            name = key[len("covariate."):]
            if not name:
                raise ConfigError("schema config has a covariate key with no name")
            if name in _RESERVED_NAMES:
                raise ConfigError(f"covariate name {name!r} is reserved")
            parts = [p.strip() for p in value.split(":")]
            if not parts[0]:
                raise ConfigError(f"covariate {name!r} has no CSV column")
            kind = parts[1] if len(parts) > 1 and parts[1] else CATEGORICAL
            if len(parts) > 2:
                raise ConfigError(f"covariate {name!r}: too many ':' fields in {value!r}")
            covariates.append(CovariateSpec(name, kind))
            covariate_columns[name] = parts[0]

        schema = DatasetSchema(groups, score_min, score_max, tuple(covariates))
        return cls(schema, group_column, score_column, outcome_column,
                   covariate_columns, dict(kv))


_MAX_DIAGNOSTICS = 15


def load_csv(path: str | os.PathLike[str],
             schema_config: LoadConfig | str | os.PathLike[str]) -> Dataset:
    """Load a CSV file into a Dataset.

    ``schema_config`` is either a parsed LoadConfig or the path of a flat
    key-value config mapping canonical fields to CSV columns (see
    LoadConfig.from_file). The load is strict: any row with an
    unparseable score or outcome, an undeclared group label, or a
    malformed declared-numeric covariate fails the whole load with
    row-numbered diagnostics. Empty covariate cells become explicit
    missing values (``None``).
    """
    if not isinstance(schema_config, LoadConfig):
        schema_config = LoadConfig.from_file(schema_config)
    cfg = schema_config
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise DataError(f"cannot read data file {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        col_index: dict[str, int] = {}
        for col in [cfg.group_column, cfg.score_column, cfg.outcome_column,
                    *cfg.covariate_columns.values()]:
            if col in col_index:
                continue
            try:
                col_index[col] = header.index(col)
            except ValueError:
                raise DataError(f"{path}: mapped column {col!r} not found in header") from None

        declared_groups = set(cfg.schema.groups)
        kinds = cfg.schema.covariate_kinds()
        lo, hi = cfg.schema.score_min, cfg.schema.score_max
        records: list[Record] = []
        problems: list[str] = []

        def complain(line: int, message: str) -> None:
            problems.append(f"line {line}: {message}")

        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(header):
                complain(line, f"expected {len(header)} fields, got {len(row)}")
                continue
            group = row[col_index[cfg.group_column]]
            score_text = row[col_index[cfg.score_column]]
            outcome_text = row[col_index[cfg.outcome_column]]
            ok = True
            if group not in declared_groups:
                complain(line, f"group {group!r} not in declared labels")
                ok = False
            try:
                score = int(score_text)
            except ValueError:
                complain(line, f"score {score_text!r} is not an integer")
                ok = False
            else:
                if not (lo <= score <= hi):
                    complain(line, f"score {score} outside declared range [{lo}, {hi}]")
                    ok = False
            if outcome_text in ("0", "1"):
                outcome = int(outcome_text)
            else:
                complain(line, f"outcome {outcome_text!r} is not 0 or 1")
                ok = False
            covariates: dict[str, object] = {}
            for name, col in cfg.covariate_columns.items():
                text = row[col_index[col]]
                if text == "":
                    covariates[name] = None
                elif kinds[name] == NUMERIC:
                    try:
                        covariates[name] = float(text)
                    except ValueError:
                        complain(line, f"numeric covariate {name!r} has value {text!r}")
                        ok = False
                else:
                    covariates[name] = text
            if ok:
                records.append(Record(group, score, outcome, covariates or EMPTY_COVARIATES))

    if problems:
        shown = "; ".join(problems[:_MAX_DIAGNOSTICS])
        extra = "" if len(problems) <= _MAX_DIAGNOSTICS else f" (and {len(problems) - _MAX_DIAGNOSTICS} more)"
        raise DataError(f"{path}: {len(problems)} invalid rows: {shown}{extra}")
    if not records:
        raise DataError(f"{path}: no data rows")
    return Dataset(tuple(records), cfg.schema, Provenance(str(path)))


# Canonical covariate names the standard two-year column mapping declares.
PROPUBLICA_DAY_GAP = "days_b_screening_arrest"
PROPUBLICA_RECID_FLAG = "is_recid"
PROPUBLICA_CHARGE_DEGREE = "c_charge_degree"
PROPUBLICA_SCORE_TEXT = "score_text"
PROPUBLICA_GROUPS = ("African-American", "Caucasian")


def apply_propublica_filters(ds: Dataset) -> Dataset:
    """Apply the standard two-year cohort restrictions.

    Keeps records where the screening-to-arrest day gap is within 30
    days in either direction, the recidivism flag is not -1, the charge
    degree is not the ordinary-traffic code "O", the score text is not
    "N/A", and the group is one of the two analysis groups. Records with
    a missing value in a referenced covariate are excluded by the step
    that touches it. Idempotent: applying twice changes nothing.
    """
    kinds = ds.schema.covariate_kinds()
    for name in (PROPUBLICA_DAY_GAP, PROPUBLICA_RECID_FLAG,
                 PROPUBLICA_CHARGE_DEGREE, PROPUBLICA_SCORE_TEXT):
        if name not in kinds:
            raise DataError(
                f"covariate {name!r} not declared; the standard column mapping is required"
            )

    def day_gap_ok(rec: Record) -> bool | None:
        value = rec.covariates.get(PROPUBLICA_DAY_GAP)
        if value is None:
            return None
        return -30 <= value <= 30

    def recid_flag_ok(rec: Record) -> bool | None:
        value = rec.covariates.get(PROPUBLICA_RECID_FLAG)
        if value is None:
            return None
        return value != -1

    def charge_ok(rec: Record) -> bool | None:
        value = rec.covariates.get(PROPUBLICA_CHARGE_DEGREE)
        if value is None:
            return None
        return value != "O"

    def score_text_ok(rec: Record) -> bool | None:
        value = rec.covariates.get(PROPUBLICA_SCORE_TEXT)
        if value is None:
            return None
        return value != "N/A"

    def group_ok(rec: Record) -> bool | None:
        return rec.group in PROPUBLICA_GROUPS

    steps = (
        ("day gap within +/-30", day_gap_ok),
        ("recidivism flag != -1", recid_flag_ok),
        ("charge degree != 'O'", charge_ok),
        ("score text != 'N/A'", score_text_ok),
        ("group in {African-American, Caucasian}", group_ok),
    )
    records = list(ds.records)
    provenance = ds.provenance
    for label, step in steps:
        kept = [rec for rec in records if step(rec) is True]
        removed = len(records) - len(kept)
        provenance = provenance.with_filter(f"two-year cohort: {label} (removed {removed})")
        records = kept
    return Dataset(tuple(records), ds.schema, provenance)


def write_csv(ds: Dataset, path: str | os.PathLike[str]) -> None:
    """Serialize a Dataset to CSV with canonical column names.

    Columns are group, score, outcome, then the schema's covariates in
    declaration order. Missing covariate values become empty cells.
    Together with write_schema_config the output round-trips through
    load_csv.
    """
    names = [c.name for c in ds.schema.covariates]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(_RESERVED_NAMES) + names)
        for rec in ds.records:
            row: list[str] = [rec.group, str(rec.score), str(rec.outcome)]
            for name in names:
                value = rec.covariates.get(name)
                row.append("" if value is None else str(value))
            writer.writerow(row)


def write_schema_config(ds: Dataset, path: str | os.PathLike[str]) -> None:
    """Write a loader config matching write_csv output for this dataset."""
    for g in ds.schema.groups:
        if "," in g:
            raise ConfigError(f"group label {g!r} contains a comma; not expressible in config")
    lines = [
        "# generated loader config",
        "group_column = group",
        "score_column = score",
        "outcome_column = outcome",
        f"score_min = {ds.schema.score_min}",
        f"score_max = {ds.schema.score_max}",
        f"groups = {', '.join(ds.schema.groups)}",
    ]
    for cov in ds.schema.covariates:
        lines.append(f"covariate.{cov.name} = {cov.name} : {cov.kind}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
