"""Shared fixtures: dataset builders and discovery of the optional benchmark file."""

from __future__ import annotations

import csv
import os
from pathlib import Path

import pytest

from fairaudit.dataset import (
    CovariateSpec,
    Dataset,
    DatasetSchema,
    Provenance,
    Record,
    apply_propublica_filters,
    load_csv,
)

REPO_ROOT = Path(__file__).resolve().parent.parent
COMPAS_SCHEMA = REPO_ROOT / "configs" / "compas.cfg"

# One line per acceptance criterion, filled in by tests/test_acceptance.py
# and echoed after the run so the verdicts survive output capture.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


def compas_csv_path() -> Path | None:
    env = os.environ.get("COMPAS_CSV")
    if env:
        p = Path(env)
        return p if p.is_file() else None
    p = REPO_ROOT / "data" / "compas-scores-two-years.csv"
    return p if p.is_file() else None


@pytest.fixture(scope="session")
def compas_path() -> Path:
    p = compas_csv_path()
    if p is None:
        pytest.skip("benchmark CSV not present (see data/README.md)")
    return p


@pytest.fixture(scope="session")
def compas_filtered(compas_path: Path) -> Dataset:
    return apply_propublica_filters(load_csv(compas_path, COMPAS_SCHEMA))


def build_dataset(rows, groups=("b", "w"), score_min=1, score_max=10,
                  covariates=(), source="test") -> Dataset:
    """rows: iterable of (group, score, outcome) or (group, score, outcome, covs)."""
    records = []
    for row in rows:
        covs = row[3] if len(row) > 3 else {}
        records.append(Record(group=row[0], score=row[1], outcome=row[2], covariates=covs))
    schema = DatasetSchema(groups=tuple(groups), score_min=score_min, score_max=score_max,
                           covariates=tuple(covariates))
    return Dataset(records=tuple(records), schema=schema, provenance=Provenance(source=source))


def from_counts(counts, groups=("b", "w"), score_min=1, score_max=10,
                covariates=(), source="test") -> Dataset:
    """counts: mapping (group, score, outcome) -> n."""
    rows = []
    for (g, s, y), n in counts.items():
        rows.extend([(g, s, y)] * n)
    return build_dataset(rows, groups=groups, score_min=score_min, score_max=score_max,
                         covariates=covariates, source=source)


# Confusion-matrix-shaped builder: puts true positives and false positives
# just above the cutoff, the rest just below.
def from_matrix(per_group, s_hr=4, groups=("b", "w"), score_min=1, score_max=10,
                s_lo=None, s_hi=None) -> Dataset:
    """per_group: mapping group -> (tn, fp, fn, tp)."""
    lo = s_lo if s_lo is not None else s_hr
    hi = s_hi if s_hi is not None else s_hr + 1
    counts = {}
    for g, (tn, fp, fn, tp) in per_group.items():
        counts[(g, lo, 0)] = tn
        counts[(g, hi, 0)] = fp
        counts[(g, lo, 1)] = fn
        counts[(g, hi, 1)] = tp
    return from_counts(counts, groups=groups, score_min=score_min, score_max=score_max)


_COMPAS_LIKE_COLUMNS = [
    "id", "race", "decile_score", "two_year_recid", "age", "sex",
    "priors_count", "c_charge_degree", "days_b_screening_arrest",
    "is_recid", "score_text",
]


def write_compas_like_csv(path: Path, rows: list[dict]) -> Path:
    """Write a CSV with the benchmark file's column names.

    Each row dict gives overrides; unspecified cells get innocuous
    defaults that survive every cohort filter.
    """
    defaults = {
        "id": "0", "race": "Caucasian", "decile_score": "1",
        "two_year_recid": "0", "age": "30", "sex": "Male",
        "priors_count": "0", "c_charge_degree": "F",
        "days_b_screening_arrest": "0", "is_recid": "0",
        "score_text": "Low",
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=_COMPAS_LIKE_COLUMNS)
        writer.writeheader()
        for i, row in enumerate(rows):
            merged = {**defaults, "id": str(i), **{k: str(v) for k, v in row.items()}}
            writer.writerow(merged)
    return path
