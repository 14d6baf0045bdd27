"""Confusion matrices, rates, Wilson intervals, sweeps, calibration curves."""

from __future__ import annotations

import math

import pytest
from hypothesis import given, strategies as st

from fairaudit import metrics
from fairaudit.errors import DataError

from conftest import build_dataset, from_counts, from_matrix


# ---------------------------------------------------------------------------
# confusion matrices

def test_confusion_counts_by_hand():
    # b: (2,0) (2,1) (5,0) (5,1) (9,0) (9,1); high-risk means score > 4
    ds = build_dataset([
        ("b", 2, 0), ("b", 2, 1), ("b", 5, 0),
        ("b", 5, 1), ("b", 9, 0), ("b", 9, 1),
    ])
    m = metrics.confusion(ds, "b", 4)
    assert (m.tn, m.fp, m.fn, m.tp) == (1, 2, 1, 2)
    assert m.total == 6
    assert m.positives == 3 and m.negatives == 3
    assert m.predicted_positive == 4


def test_confusion_cutoff_is_strict():
    ds = build_dataset([("b", 4, 1), ("b", 5, 1)])
    m = metrics.confusion(ds, 4 if False else "b", 4)
    # score 4 is not high risk at cutoff 4; score 5 is
    assert (m.fn, m.tp) == (1, 1)


def test_confusion_extreme_cutoffs():
    ds = build_dataset([("b", 1, 0), ("b", 10, 1)])
    everyone = metrics.confusion(ds, "b", 0)
    assert (everyone.tn, everyone.fp, everyone.fn, everyone.tp) == (0, 1, 0, 1)
    nobody = metrics.confusion(ds, "b", 10)
    assert (nobody.tn, nobody.fp, nobody.fn, nobody.tp) == (1, 0, 1, 0)


def test_confusion_cutoff_below_range_raises():
    ds = build_dataset([("b", 5, 0)])
    with pytest.raises(DataError, match="outside"):
        metrics.confusion(ds, "b", -1)
    with pytest.raises(DataError, match="outside"):
        metrics.confusion(ds, "b", 11)


def test_confusion_empty_group_raises():
    ds = build_dataset([("b", 5, 0)])
    with pytest.raises(DataError, match="no records"):
        metrics.confusion(ds, "w", 4)


def test_matrix_validation():
    with pytest.raises(DataError):
        metrics.ConfusionMatrix(tn=-1, fp=0, fn=0, tp=0)
    with pytest.raises(DataError):
        metrics.ConfusionMatrix(tn=1.5, fp=0, fn=0, tp=0)


# ---------------------------------------------------------------------------
# rates

def test_rates_by_hand():
    gm = metrics.metrics_from_matrix(metrics.ConfusionMatrix(tn=2, fp=1, fn=1, tp=2))
    assert gm.prevalence == pytest.approx(0.5)
    assert gm.ppv == pytest.approx(2 / 3)
    assert gm.fpr == pytest.approx(1 / 3)
    assert gm.fnr == pytest.approx(1 / 3)
    assert gm.high_risk_rate == pytest.approx(0.5)


def test_undefined_rates_are_none():
    # nobody classified high risk: PPV undefined
    gm = metrics.metrics_from_matrix(metrics.ConfusionMatrix(tn=3, fp=0, fn=2, tp=0))
    assert gm.ppv is None
    assert "ppv" not in gm.intervals
    # no negatives: FPR undefined
    gm = metrics.metrics_from_matrix(metrics.ConfusionMatrix(tn=0, fp=0, fn=1, tp=1))
    assert gm.fpr is None
    # no positives: FNR undefined
    gm = metrics.metrics_from_matrix(metrics.ConfusionMatrix(tn=1, fp=1, fn=0, tp=0))
    assert gm.fnr is None


def test_empty_matrix_raises():
    with pytest.raises(DataError, match="empty"):
        metrics.metrics_from_matrix(metrics.ConfusionMatrix(0, 0, 0, 0))


# ---------------------------------------------------------------------------
# Wilson intervals

def test_wilson_known_values():
    iv = metrics.wilson_interval(5, 10)
    assert iv.lo == pytest.approx(0.23659309051256405, abs=1e-12)
    assert iv.hi == pytest.approx(0.763406909487436, abs=1e-12)
    iv90 = metrics.wilson_interval(59, 100, 0.9)
    assert iv90.lo == pytest.approx(0.507767242662746, abs=1e-12)
    assert iv90.hi == pytest.approx(0.6674910675962826, abs=1e-12)


def test_wilson_boundaries_clamped():
    lo_iv = metrics.wilson_interval(0, 10)
    assert lo_iv.lo == pytest.approx(0.0, abs=1e-15)
    assert 0.0 <= lo_iv.lo < lo_iv.hi < 1.0
    hi_iv = metrics.wilson_interval(10, 10)
    assert 0.0 < hi_iv.lo < hi_iv.hi <= 1.0
    assert hi_iv.hi == pytest.approx(1.0, abs=1e-15)


def test_wilson_validation():
    with pytest.raises(DataError):
        metrics.wilson_interval(1, 0)
    with pytest.raises(DataError):
        metrics.wilson_interval(5, 4)
    with pytest.raises(DataError):
        metrics.wilson_interval(1, 10, 1.5)


@given(st.integers(0, 200), st.integers(1, 200), st.floats(0.5, 0.999))
def test_wilson_contains_point_estimate(successes, trials, level):
    if successes > trials:
        successes = trials
    iv = metrics.wilson_interval(successes, trials, level)
    assert 0.0 <= iv.lo <= successes / trials <= iv.hi <= 1.0


@given(st.integers(1, 100), st.integers(1, 100))
def test_wilson_widens_with_level(successes, trials):
    if successes > trials:
        successes = trials
    narrow = metrics.wilson_interval(successes, trials, 0.8)
    wide = metrics.wilson_interval(successes, trials, 0.99)
    assert wide.lo <= narrow.lo and narrow.hi <= wide.hi


# ---------------------------------------------------------------------------
# group metrics and sweeps

def test_group_metrics_carries_intervals():
    ds = from_matrix({"b": (20, 10, 10, 20)})
    gm = metrics.group_metrics(ds, "b", 4, ci_level=0.9)
    assert gm.group == "b" and gm.threshold == 4
    for name in ("prevalence", "ppv", "fpr", "fnr", "high_risk_rate"):
        iv = gm.intervals[name]
        assert iv.level == 0.9
        assert iv.lo <= getattr(gm, name) <= iv.hi


def test_sweep_cutoffs_covers_everyone_to_nobody():
    ds = build_dataset([("b", 1, 0)])
    assert list(metrics.sweep_cutoffs(ds)) == list(range(0, 10))


def test_threshold_sweep_order_and_shape():
    ds = from_matrix({"b": (5, 5, 5, 5), "w": (5, 5, 5, 5)})
    sweep = metrics.threshold_sweep(ds)
    cutoffs = list(metrics.sweep_cutoffs(ds))
    assert len(sweep) == 2 * len(cutoffs)
    assert [gm.group for gm in sweep[:len(cutoffs)]] == ["b"] * len(cutoffs)
    assert [gm.threshold for gm in sweep[:len(cutoffs)]] == cutoffs
    assert sweep[len(cutoffs)].group == "w"


@given(st.lists(st.tuples(st.integers(1, 10), st.integers(0, 1)),
                min_size=1, max_size=50))
def test_high_risk_rate_monotone_in_cutoff(rows):
    ds = build_dataset([("b", s, y) for s, y in rows])
    rates = [metrics.group_metrics(ds, "b", c).high_risk_rate
             for c in metrics.sweep_cutoffs(ds)]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    # prevalence never depends on the cutoff
    prevs = {metrics.group_metrics(ds, "b", c).prevalence
             for c in metrics.sweep_cutoffs(ds)}
    assert len(prevs) == 1


@given(st.lists(st.tuples(st.integers(1, 10), st.integers(0, 1)),
                min_size=1, max_size=50),
       st.integers(0, 9))
def test_confusion_partitions_group(rows, s_hr):
    ds = build_dataset([("b", s, y) for s, y in rows])
    m = metrics.confusion(ds, "b", s_hr)
    assert m.total == ds.n
    assert m.positives == sum(y for _, y in rows)
    assert m.predicted_positive == sum(1 for s, _ in rows if s > s_hr)


# ---------------------------------------------------------------------------
# calibration curves

def test_calibration_curve_cells():
    ds = from_counts({
        ("b", 3, 1): 3, ("b", 3, 0): 1,   # rate 0.75 at score 3
        ("b", 7, 1): 1, ("b", 7, 0): 4,   # rate 0.2 at score 7
        ("w", 3, 1): 1, ("w", 3, 0): 3,   # rate 0.25 at score 3
    })
    curve = metrics.calibration_curve(ds)
    assert set(curve) == {"b", "w"}
    assert set(curve["b"]) == {3, 7}
    assert set(curve["w"]) == {3}
    cell = curve["b"][3]
    assert (cell.count, cell.positives) == (4, 3)
    assert cell.estimate == pytest.approx(0.75)
    assert cell.interval.lo <= 0.75 <= cell.interval.hi


def test_calibration_curve_empty_cells_absent():
    ds = build_dataset([("b", 5, 1)])
    curve = metrics.calibration_curve(ds)
    assert list(curve["b"]) == [5]


@given(st.lists(st.tuples(st.sampled_from(["b", "w"]), st.integers(1, 5),
                          st.integers(0, 1)), min_size=1, max_size=80))
def test_calibration_curve_matches_brute_force(rows):
    ds = build_dataset(rows, score_min=1, score_max=5)
    curve = metrics.calibration_curve(ds)
    for g, s, _ in rows:
        members = [y for (gg, ss, y) in rows if gg == g and ss == s]
        cell = curve[g][s]
        assert cell.count == len(members)
        assert cell.positives == sum(members)
        assert cell.estimate == pytest.approx(sum(members) / len(members))
