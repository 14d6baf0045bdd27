"""Dataset construction, CSV loading, and cohort filtering."""

from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from fairaudit.dataset import (
    CATEGORICAL,
    NUMERIC,
    CovariateFilter,
    CovariateSpec,
    Dataset,
    DatasetSchema,
    LoadConfig,
    Provenance,
    Record,
    apply_propublica_filters,
    load_csv,
    write_csv,
    write_schema_config,
)
from fairaudit.errors import ConfigError, DataError

from conftest import COMPAS_SCHEMA, build_dataset, write_compas_like_csv


# ---------------------------------------------------------------------------
# schema and record validation

def test_schema_rejects_duplicate_groups():
    with pytest.raises(ConfigError):
        DatasetSchema(groups=("b", "b"), score_min=1, score_max=10)


def test_schema_rejects_empty_groups():
    with pytest.raises(ConfigError):
        DatasetSchema(groups=(), score_min=1, score_max=10)


def test_schema_rejects_inverted_score_range():
    with pytest.raises(ConfigError):
        DatasetSchema(groups=("b",), score_min=5, score_max=4)


def test_schema_rejects_reserved_covariate_names():
    with pytest.raises(ConfigError):
        DatasetSchema(groups=("b",), score_min=1, score_max=10,
                      covariates=(CovariateSpec("score", NUMERIC),))


def test_covariate_spec_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        CovariateSpec("age", "continuous")


def test_dataset_rejects_undeclared_group():
    with pytest.raises(DataError, match="not declared"):
        build_dataset([("x", 5, 0)])


def test_dataset_rejects_score_out_of_range():
    with pytest.raises(DataError, match="outside declared range"):
        build_dataset([("b", 11, 0)])


def test_dataset_rejects_non_integer_score():
    with pytest.raises(DataError, match="not an integer"):
        build_dataset([("b", 5.0, 0)])


def test_dataset_rejects_bad_outcome():
    with pytest.raises(DataError, match="not 0 or 1"):
        build_dataset([("b", 5, 2)])


def test_dataset_rejects_undeclared_covariate():
    with pytest.raises(DataError, match="covariate"):
        build_dataset([("b", 5, 0, {"age": 30})])


def test_dataset_rejects_covariate_kind_mismatch():
    cov = (CovariateSpec("age", NUMERIC),)
    with pytest.raises(DataError, match="numeric covariate"):
        build_dataset([("b", 5, 0, {"age": "thirty"})], covariates=cov)


def test_missing_covariate_value_is_allowed():
    cov = (CovariateSpec("age", NUMERIC),)
    ds = build_dataset([("b", 5, 0, {"age": None})], covariates=cov)
    assert ds.records[0].covariates["age"] is None


def test_groups_present_declaration_order():
    ds = build_dataset([("w", 2, 0), ("b", 3, 1), ("w", 4, 0)], groups=("b", "w", "h"))
    assert ds.groups_present() == ("b", "w")
    assert ds.group_counts() == {"b": 1, "w": 2}


def test_records_for_unknown_group_raises():
    ds = build_dataset([("b", 2, 0)])
    with pytest.raises(DataError):
        ds.records_for("nope")


# ---------------------------------------------------------------------------
# covariate filters

def test_filter_membership_and_range():
    cov = (CovariateSpec("sex", CATEGORICAL), CovariateSpec("age", NUMERIC))
    ds = build_dataset(
        [
            ("b", 2, 0, {"sex": "Male", "age": 25}),
            ("b", 3, 0, {"sex": "Female", "age": 25}),
            ("b", 4, 0, {"sex": "Male", "age": 70}),
            ("b", 5, 0, {"sex": "Male", "age": None}),
        ],
        covariates=cov,
    )
    pred = CovariateFilter(membership={"sex": {"Male"}}, ranges={"age": (18, 65)})
    out = ds.filter(pred)
    assert [r.score for r in out.records] == [2]
    assert "excluded 1 with missing values" in out.provenance.filters[-1]


def test_filter_evaluate_missing_returns_none():
    cov = (CovariateSpec("age", NUMERIC),)
    ds = build_dataset([("b", 2, 0, {"age": None})], covariates=cov)
    pred = CovariateFilter(ranges={"age": (0, 99)})
    assert pred.evaluate(ds.records[0]) is None


def test_filter_rejects_undeclared_covariate():
    ds = build_dataset([("b", 2, 0)])
    with pytest.raises(DataError, match="undeclared"):
        ds.filter(CovariateFilter(membership={"sex": {"Male"}}))


def test_filter_rejects_kind_mismatch():
    cov = (CovariateSpec("age", NUMERIC),)
    ds = build_dataset([("b", 2, 0, {"age": 30})], covariates=cov)
    with pytest.raises(DataError, match="non-numeric|non-categorical"):
        ds.filter(CovariateFilter(membership={"age": {"30"}}))


def test_filter_range_validation():
    with pytest.raises(ConfigError):
        CovariateFilter(ranges={"age": (10, 5)})


# ---------------------------------------------------------------------------
# loader config

def test_load_config_parses_schema(tmp_path):
    cfg = LoadConfig.from_file(COMPAS_SCHEMA)
    assert cfg.group_column == "race"
    assert cfg.score_column == "decile_score"
    assert cfg.outcome_column == "two_year_recid"
    assert cfg.schema.score_min == 1 and cfg.schema.score_max == 10
    assert cfg.schema.groups[:2] == ("African-American", "Caucasian")
    kinds = cfg.schema.covariate_kinds()
    assert kinds["age"] == NUMERIC
    assert kinds["c_charge_degree"] == CATEGORICAL


def test_load_config_missing_required_key(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("group_column = g\nscore_column = s\n")
    with pytest.raises(ConfigError):
        LoadConfig.from_file(p)


def test_load_config_duplicate_key(tmp_path):
    p = tmp_path / "dup.cfg"
    p.write_text("group_column = g\ngroup_column = h\n")
    with pytest.raises(ConfigError, match="duplicate"):
        LoadConfig.from_file(p)


def test_load_config_bad_covariate_kind(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text(
        "group_column = g\nscore_column = s\noutcome_column = y\n"
        "groups = a, b\ncovariate.age = age : fancy\n"
    )
    with pytest.raises(ConfigError):
        LoadConfig.from_file(p)


# ---------------------------------------------------------------------------
# CSV loading

def test_load_csv_happy_path(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [
        {"race": "African-American", "decile_score": 7, "two_year_recid": 1, "age": 23},
        {"race": "Caucasian", "decile_score": 2, "two_year_recid": 0, "age": 41},
    ])
    ds = load_csv(csv_path, COMPAS_SCHEMA)
    assert ds.n == 2
    assert ds.records[0].group == "African-American"
    assert ds.records[0].score == 7
    assert ds.records[0].outcome == 1
    assert ds.records[0].covariates["age"] == 23.0
    assert ds.records[1].covariates["c_charge_degree"] == "F"
    assert str(csv_path) in ds.provenance.source


def test_load_csv_empty_covariate_becomes_none(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [
        {"days_b_screening_arrest": ""},
    ])
    ds = load_csv(csv_path, COMPAS_SCHEMA)
    assert ds.records[0].covariates["days_b_screening_arrest"] is None


def test_load_csv_bad_score_reports_row(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [
        {"decile_score": 3},
        {"decile_score": "eleven"},
    ])
    with pytest.raises(DataError, match="line 3"):
        load_csv(csv_path, COMPAS_SCHEMA)


def test_load_csv_score_out_of_declared_range(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [{"decile_score": 0}])
    with pytest.raises(DataError, match="outside"):
        load_csv(csv_path, COMPAS_SCHEMA)


def test_load_csv_unknown_group_label(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [{"race": "Martian"}])
    with pytest.raises(DataError, match="Martian"):
        load_csv(csv_path, COMPAS_SCHEMA)


def test_load_csv_missing_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("race,decile_score\nCaucasian,3\n")
    with pytest.raises(DataError, match="two_year_recid"):
        load_csv(p, COMPAS_SCHEMA)


def test_load_csv_empty_file(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("")
    with pytest.raises(DataError):
        load_csv(p, COMPAS_SCHEMA)


def test_load_csv_header_only(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [])
    with pytest.raises(DataError, match="no data rows"):
        load_csv(csv_path, COMPAS_SCHEMA)


def test_load_csv_caps_reported_errors(tmp_path):
    rows = [{"decile_score": "bad"} for _ in range(40)]
    csv_path = write_compas_like_csv(tmp_path / "d.csv", rows)
    with pytest.raises(DataError) as exc:
        load_csv(csv_path, COMPAS_SCHEMA)
    text = str(exc.value)
    assert text.count("line") <= 16
    assert "40" in text


# ---------------------------------------------------------------------------
# cohort filters

def _cohort_rows():
    keep = {"race": "African-American", "decile_score": 5, "two_year_recid": 1}
    return [
        dict(keep),
        {**keep, "days_b_screening_arrest": 45},     # step 1
        {**keep, "days_b_screening_arrest": -31},    # step 1
        {**keep, "is_recid": -1},                    # step 2
        {**keep, "c_charge_degree": "O"},            # step 3
        {**keep, "score_text": "N/A"},               # step 4
        {**keep, "race": "Hispanic"},                # step 5
        {**keep, "days_b_screening_arrest": ""},     # missing: excluded at step 1
        {**keep, "race": "Caucasian"},
    ]


def test_propublica_filters_step_counts(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", _cohort_rows())
    ds = apply_propublica_filters(load_csv(csv_path, COMPAS_SCHEMA))
    assert ds.n == 2
    assert ds.group_counts() == {"African-American": 1, "Caucasian": 1}
    removals = [f for f in ds.provenance.filters if f.startswith("two-year cohort")]
    assert len(removals) == 5
    assert "(removed 3)" in removals[0]   # two out-of-window gaps + one missing
    assert "(removed 1)" in removals[1]
    assert "(removed 1)" in removals[2]
    assert "(removed 1)" in removals[3]
    assert "(removed 1)" in removals[4]


def test_propublica_filters_boundary_days_kept(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", [
        {"days_b_screening_arrest": 30}, {"days_b_screening_arrest": -30},
    ])
    ds = apply_propublica_filters(load_csv(csv_path, COMPAS_SCHEMA))
    assert ds.n == 2


def test_propublica_filters_idempotent(tmp_path):
    csv_path = write_compas_like_csv(tmp_path / "d.csv", _cohort_rows())
    once = apply_propublica_filters(load_csv(csv_path, COMPAS_SCHEMA))
    twice = apply_propublica_filters(once)
    assert twice.records == once.records
    assert all("(removed 0)" in f for f in twice.provenance.filters[-5:])


def test_propublica_filters_requires_standard_covariates():
    ds = build_dataset([("b", 2, 0)])
    with pytest.raises(DataError, match="standard column mapping"):
        apply_propublica_filters(ds)


# ---------------------------------------------------------------------------
# round trip

def test_write_then_load_round_trip(tmp_path):
    cov = (CovariateSpec("sex", CATEGORICAL), CovariateSpec("age", NUMERIC))
    ds = build_dataset(
        [
            ("b", 2, 0, {"sex": "Male", "age": 25.5}),
            ("w", 9, 1, {"sex": None, "age": None}),
        ],
        covariates=cov,
    )
    csv_path = tmp_path / "out.csv"
    cfg_path = tmp_path / "out.cfg"
    write_csv(ds, csv_path)
    write_schema_config(ds, cfg_path)
    back = load_csv(csv_path, cfg_path)
    assert back.n == ds.n
    for a, b in zip(ds.records, back.records):
        assert (a.group, a.score, a.outcome) == (b.group, b.score, b.outcome)
        assert dict(a.covariates) == dict(b.covariates)


def test_schema_config_rejects_comma_in_group(tmp_path):
    ds = build_dataset([("a,b", 2, 0)], groups=("a,b",))
    with pytest.raises(ConfigError, match="comma"):
        write_schema_config(ds, tmp_path / "x.cfg")


# ---------------------------------------------------------------------------
# properties

@given(st.lists(st.tuples(st.sampled_from(["b", "w"]), st.integers(1, 10),
                          st.integers(0, 1)), min_size=1, max_size=60))
def test_group_counts_partition_records(rows):
    ds = build_dataset(rows)
    counts = ds.group_counts()
    assert sum(counts.values()) == ds.n
    for g, c in counts.items():
        assert len(ds.records_for(g)) == c
