"""Logistic regression of false-positive indicators on covariates.

The response is built from the non-recidivist subset: y = 1 when the
score exceeds a cutoff (default 4), so coefficients describe who gets
flagged high risk despite not reoffending. Categorical predictors are
reference-coded (one indicator per non-reference level); numeric
predictors enter as-is. The solver is Newton/IRLS on the Bernoulli
log-likelihood with Wald standard errors from the inverse Fisher
information at the optimum and two-sided normal p-values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .dataset import CATEGORICAL, NUMERIC, Dataset
from .errors import ConfigError, DataError

# Coefficients beyond this magnitude on the log-odds scale indicate
# (quasi-)separation rather than a meaningful fit.
_SEPARATION_BOUND = 30.0


@dataclass(frozen=True)
class Predictor:
    """One model term: a covariate, its kind, and encoding options."""

    covariate: str
    kind: str
    reference: str | None = None
    name: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in (NUMERIC, CATEGORICAL):
            raise ConfigError(f"predictor {self.covariate!r}: unknown kind {self.kind!r}")
        if self.kind == NUMERIC and self.reference is not None:
            raise ConfigError(f"numeric predictor {self.covariate!r} cannot have a reference")
        if self.kind == CATEGORICAL and self.reference is None:
            raise ConfigError(f"categorical predictor {self.covariate!r} needs a reference level")


@dataclass(frozen=True)
class DesignSpec:
    """Response cutoff plus an ordered predictor list."""

    predictors: tuple[Predictor, ...]
    cutoff: int = 4

    def __post_init__(self) -> None:
        object.__setattr__(self, "predictors", tuple(self.predictors))
        if not self.predictors:
            raise ConfigError("design spec needs at least one predictor")
        names = [p.covariate for p in self.predictors]
        if len(set(names)) != len(names):
            raise ConfigError("design spec lists a covariate twice")

    @classmethod
    def from_config(cls, raw: Mapping[str, str]) -> "DesignSpec":
        """Parse regress.* keys from a loader config mapping.

        regress.cutoff = 4
        regress.predictor.<i> = covariate : kind [: ref=LEVEL] [: name=DISPLAY]
        """
        cutoff = 4
        if "regress.cutoff" in raw:
            try:
                cutoff = int(raw["regress.cutoff"])
            except ValueError as exc:
                raise ConfigError(f"regress.cutoff is not an integer: {raw['regress.cutoff']!r}") from exc
        indexed: list[tuple[int, Predictor]] = []
        for key, value in raw.items():
            if not key.startswith("regress.predictor."):
                continue
            suffix = key[len("regress.predictor."):]
            try:
                index = int(suffix)
            except ValueError as exc:
                raise ConfigError(f"{key}: predictor index must be an integer") from exc
            parts = [p.strip() for p in value.split(":")]
            if len(parts) < 2:
                raise ConfigError(f"{key}: expected 'covariate : kind [: options]'")
            covariate, kind = parts[0], parts[1]
            reference = None
            name = None
            for option in parts[2:]:
                if option.startswith("ref="):
                    reference = option[len("ref="):]
                elif option.startswith("name="):
                    name = option[len("name="):]
                else:
                    raise ConfigError(f"{key}: unknown option {option!r}")
            indexed.append((index, Predictor(covariate, kind, reference, name)))
        if not indexed:
            raise ConfigError("config declares no regress.predictor.* entries")
        indexed.sort(key=lambda pair: pair[0])
        return cls(predictors=tuple(p for _, p in indexed), cutoff=cutoff)


@dataclass(frozen=True)
class Design:
    """Materialized design matrix with its response and column names."""

    matrix: np.ndarray
    response: np.ndarray
    columns: tuple[str, ...]
    cutoff: int
    n_used: int
    n_excluded_missing: int


def build_design(ds: Dataset, spec: DesignSpec) -> Design:
    """Design matrix over the non-recidivist subset.

    Rows with a missing value in any referenced covariate are dropped
    (listwise) and counted. A categorical predictor must show its
    reference level and at least one other level in the subset.
    """
    kinds = ds.schema.covariate_kinds()
    for pred in spec.predictors:
        declared = kinds.get(pred.covariate)
        if declared is None:
            raise DataError(f"predictor covariate {pred.covariate!r} not declared in schema")
        if declared != pred.kind:
            raise DataError(
                f"predictor {pred.covariate!r} is declared {declared}, spec says {pred.kind}"
            )
    lo, hi = ds.schema.score_min - 1, ds.schema.score_max
    if not (lo <= spec.cutoff <= hi):
        raise DataError(f"cutoff {spec.cutoff} outside [{lo}, {hi}]")

    subset = [rec for rec in ds.records if rec.outcome == 0]
    if not subset:
        raise DataError("no records with outcome 0; response subset is empty")
    used = []
    excluded = 0
    for rec in subset:
        if any(rec.covariates.get(p.covariate) is None for p in spec.predictors):
            excluded += 1
        else:
            used.append(rec)
    if not used:
        raise DataError("all candidate rows have missing predictor values")

    columns: list[str] = ["(Intercept)"]
    encoders = []  # (predictor, levels) pairs; levels is None for numeric terms
    for pred in spec.predictors:
        if pred.kind == NUMERIC:
            columns.append(pred.name or pred.covariate)
            encoders.append((pred, None))
        else:
            levels = sorted({rec.covariates[pred.covariate] for rec in used})
            if pred.reference not in levels:
                raise DataError(
                    f"reference level {pred.reference!r} of {pred.covariate!r} not present in data"
                )
            others = [lv for lv in levels if lv != pred.reference]
            if not others:
                raise DataError(
                    f"categorical predictor {pred.covariate!r} has a single observed level"
                )
            if pred.name is not None and len(others) == 1:
                columns.append(pred.name)
            else:
                columns.extend(f"{pred.covariate}{lv}" for lv in others)
            encoders.append((pred, others))

    matrix = np.zeros((len(used), len(columns)))
    matrix[:, 0] = 1.0
    response = np.zeros(len(used))
    for i, rec in enumerate(used):
        response[i] = 1.0 if rec.score > spec.cutoff else 0.0
        j = 1
        for pred, levels in encoders:
            value = rec.covariates[pred.covariate]
            if levels is None:
                matrix[i, j] = float(value)
                j += 1
            else:
                for level in levels:
                    matrix[i, j] = 1.0 if value == level else 0.0
                    j += 1
    return Design(matrix=matrix, response=response, columns=tuple(columns),
                  cutoff=spec.cutoff, n_used=len(used), n_excluded_missing=excluded)


@dataclass(frozen=True)
class Coefficient:
    name: str
    estimate: float
    std_error: float
    z_value: float
    p_value: float


@dataclass(frozen=True)
class FitResult:
    """Fitted logistic model: per-coefficient Wald table plus diagnostics."""

    coefficients: tuple[Coefficient, ...]
    converged: bool
    iterations: int
    log_likelihood: float
    n: int
    separation: bool

    def coefficient(self, name: str) -> Coefficient:
        for coef in self.coefficients:
            if coef.name == name:
                return coef
        raise DataError(f"no coefficient named {name!r}")

    def estimate(self, name: str) -> float:
        return self.coefficient(name).estimate

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.coefficients)


def _log_likelihood(matrix: np.ndarray, response: np.ndarray, beta: np.ndarray) -> float:
    eta = matrix @ beta
    return float(response @ eta - np.logaddexp(0.0, eta).sum())


def fit_logistic(design: Design | np.ndarray, response: Sequence[float] | None = None,
                 *, columns: Sequence[str] | None = None,
                 tol: float = 1e-10, max_iter: int = 50) -> FitResult:
    """Newton/IRLS fit of a logistic model.

    Iterates beta <- beta + (X'WX)^-1 X'(y - mu) from beta = 0 until the
    largest coefficient change drops below ``tol``. Requires a full-rank
    design. Divergence past a log-odds bound is flagged as separation;
    an unconverged fit is returned with ``converged=False`` carrying the
    last iterate.
    """
    if isinstance(design, Design):
        if response is not None:
            raise DataError("response is taken from the Design; do not pass it separately")
        matrix, y = design.matrix, design.response
        names: Sequence[str] = design.columns
    else:
        matrix = np.asarray(design, dtype=float)
        if response is None:
            raise DataError("response vector required when design is a plain matrix")
        y = np.asarray(response, dtype=float)
        names = tuple(columns) if columns is not None else tuple(
            f"x{j}" for j in range(matrix.shape[1])
        )
    if matrix.ndim != 2:
        raise DataError("design matrix must be two-dimensional")
    n, k = matrix.shape
    if y.shape != (n,):
        raise DataError(f"response length {y.shape} does not match {n} rows")
    if len(names) != k:
        raise DataError(f"{len(names)} column names for {k} columns")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError("response entries must be 0 or 1")
    if n < k:
        raise DataError(f"{n} rows cannot identify {k} coefficients")
    if np.linalg.matrix_rank(matrix) < k:
        raise DataError("design matrix is rank deficient")
    if tol <= 0 or max_iter < 1:
        raise DataError("tol must be positive and max_iter at least 1")

    beta = np.zeros(k)
    converged = False
    separation = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        mu = expit(matrix @ beta)
        weights = mu * (1.0 - mu)
        info = matrix.T @ (matrix * weights[:, None])
        score = matrix.T @ (y - mu)
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise DataError(
                "Fisher information is singular; data may be separated or collinear"
            ) from exc
        beta = beta + step
        if np.abs(beta).max() > _SEPARATION_BOUND:
            separation = True
            break
        if np.abs(step).max() < tol:
            converged = True
            break

    mu = expit(matrix @ beta)
    weights = mu * (1.0 - mu)
    info = matrix.T @ (matrix * weights[:, None])
    try:
        covariance = np.linalg.inv(info)
    except np.linalg.LinAlgError as exc:
        raise DataError("Fisher information is singular at the final iterate") from exc
    std_errors = np.sqrt(np.diag(covariance))
    coefficients = []
    for name, est, se in zip(names, beta, std_errors):
        z = est / se if se > 0 else math.inf if est > 0 else -math.inf if est < 0 else 0.0
        p = 2.0 * float(norm.sf(abs(z))) if math.isfinite(z) else 0.0
        coefficients.append(Coefficient(name=name, estimate=float(est),
                                        std_error=float(se), z_value=float(z),
                                        p_value=p))
    return FitResult(coefficients=tuple(coefficients), converged=converged,
                     iterations=iterations,
                     log_likelihood=_log_likelihood(matrix, y, beta),
                     n=n, separation=separation)


def odds_ratio(fit: FitResult, name: str) -> float:
    """exp of a fitted coefficient."""
    return math.exp(fit.estimate(name))
