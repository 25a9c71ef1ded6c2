import csv
import itertools

import numpy as np
import pytest

from driftscope.eventlog import (
    CATEGORICAL,
    MISSING_VALUE,
    NUMERIC,
    AttributeSpec,
    DiscretizerSpec,
    ParseError,
    Schema,
    SchemaError,
    apply_bins,
    discretize,
    filter_attributes,
    from_rows,
    infer_schema,
    load_schema,
    parse_log,
    split_train,
    write_csv,
)
from conftest import make_log

TABLE1_COLUMNS = ["case", "activity", "doctype", "subprocess", "success", "year", "department"]


def table1_log():
    rows = [
        ["8b99873a6136cfa6", "mail income", "Payment application", "Application", "true", "2015", "e7"],
        ["8b99873a6136cfa6", "mail valid", "Payment application", "Application", "true", "2015", "e7"],
        ["8b99873a6136cfa6", "mail valid", "Entitlement application", "Main", "true", "2015", "e7"],
    ]
    return make_log(TABLE1_COLUMNS, rows)


def test_parse_row_to_event_fields():
    log = table1_log()
    event = log.trace(0).events[0]
    # all 7 file columns survive: the trace id plus 6 categorical values
    assert event.trace_id == "8b99873a6136cfa6"
    assert len(event.values) == 6
    assert event.value("activity") == "mail income"
    assert event.value("doctype") == "Payment application"
    assert event.as_dict()["department"] == "e7"


def test_rows_sharing_trace_id_group_into_one_trace():
    log = table1_log()
    assert log.n_traces == 1
    assert len(log.trace(0)) == 3


def test_interleaved_trace_ids_group_and_keep_positions():
    log = make_log(["case", "activity"], [["A", "x"], ["B", "y"], ["A", "z"]])
    assert log.trace_ids == ["A", "B"]
    trace_a = log.trace(0)
    assert [e.position for e in trace_a.events] == [0, 1]
    assert [e.value("activity") for e in trace_a.events] == ["x", "z"]


def test_traces_ordered_by_earliest_timestamp_file_order_ties(tmp_path):
    rows = [
        ["B", "x", "2020-01-02 00:00:00"],
        ["A", "y", "2020-01-01 00:00:00"],
        ["C", "z", "2020-01-01 00:00:00"],
        ["A", "w", "2020-01-03 00:00:00"],
    ]
    log = make_log(["case", "activity", "ts"], rows, timestamp="ts")
    # A and C tie on the earliest stamp; A came later in the file than C?
    # file order of first rows: B(0), A(1), C(2) -> tie between A and C broken
    # by first appearance: A before C
    assert log.trace_ids == ["A", "C", "B"]
    assert [e.value("activity") for e in log.trace(0).events] == ["y", "w"]


def test_missing_cells_become_reserved_symbol():
    log = make_log(["case", "activity"], [["A", ""], ["A", "x"]])
    assert log.trace(0).events[0].value("activity") == MISSING_VALUE


def test_parse_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("")
    schema = infer_schema(["case", "activity"], trace_id="case")
    with pytest.raises(ParseError, match="empty"):
        parse_log(path, schema)

    path.write_text("case,activity\n")
    with pytest.raises(ParseError, match="empty log"):
        parse_log(path, schema)

    path.write_text("case,activity\nA,x,EXTRA\n")
    with pytest.raises(ParseError, match=":2"):
        parse_log(path, schema)

    path.write_text("case,other\nA,x\n")
    with pytest.raises(SchemaError, match="activity"):
        parse_log(path, schema)


def test_unparseable_numeric_names_line(tmp_path):
    path = tmp_path / "n.csv"
    path.write_text("case,amount\nA,1.5\nA,abc\n")
    schema = infer_schema(["case", "amount"], trace_id="case", numeric=["amount"])
    with pytest.raises(ParseError, match=":3"):
        parse_log(path, schema)


def test_unparseable_timestamp_names_line(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("case,ts\nA,2020-01-01\nA,not-a-date\n")
    schema = infer_schema(["case", "ts"], trace_id="case", timestamp="ts")
    with pytest.raises(ParseError, match=":3"):
        parse_log(path, schema)


def test_schema_validation():
    with pytest.raises(SchemaError, match="trace-id"):
        Schema((AttributeSpec("a", CATEGORICAL),))
    with pytest.raises(SchemaError, match="unique"):
        Schema((AttributeSpec("a", "trace-id"), AttributeSpec("a", CATEGORICAL)))
    with pytest.raises(SchemaError):
        AttributeSpec("a", "bogus")


def test_load_schema_formats(tmp_path):
    kv = tmp_path / "schema.txt"
    kv.write_text("case = trace-id\nactivity = categorical\namount = numeric\n")
    schema = load_schema(kv)
    assert schema.trace_id_column == "case"
    assert schema.attribute("amount").kind == NUMERIC

    js = tmp_path / "schema.json"
    js.write_text('{"case": "trace-id", "activity": "categorical"}')
    assert load_schema(js).trace_id_column == "case"


# --- filtering ---------------------------------------------------------------

def test_filter_drops_columns_keeps_everything_else():
    log = table1_log()
    out = filter_attributes(log, ["success", "year", "department"])
    assert [a.name for a in out.schema.attributes] == ["case", "activity", "doctype", "subprocess"]
    assert out.n_events == log.n_events
    assert out.trace_ids == log.trace_ids


def test_filter_empty_is_identity():
    log = table1_log()
    out = filter_attributes(log, [])
    assert [a.name for a in out.schema.attributes] == [a.name for a in log.schema.attributes]
    assert out.n_events == log.n_events


def test_filter_year_like_column():
    log = table1_log()
    out = filter_attributes(log, ["year"])
    assert "year" not in [a.name for a in out.schema.attributes]


def test_filter_trace_id_is_error():
    log = table1_log()
    with pytest.raises(SchemaError, match="trace-id"):
        filter_attributes(log, ["case"])
    with pytest.raises(SchemaError):
        filter_attributes(log, ["not-there"])


# --- discretization ----------------------------------------------------------

def numeric_log(values):
    rows = [["T", repr(float(v))] for v in values]
    return make_log(["case", "amount"], rows, numeric=["amount"])


def oracle_quantile(sorted_values, q):
    """Independent linear-interpolation quantile (matches the stated method)."""
    h = (len(sorted_values) - 1) * q
    lo = int(np.floor(h))
    hi = int(np.ceil(h))
    return sorted_values[lo] + (h - lo) * (sorted_values[hi] - sorted_values[lo])


def test_equal_frequency_bins_uniform_distinct():
    log = numeric_log(range(1, 9))
    out = discretize(log, DiscretizerSpec("amount", 4))
    labels = [e.value("amount") for e in out.trace(0).events]
    assert labels == ["bin00", "bin00", "bin01", "bin01", "bin02", "bin02", "bin03", "bin03"]


def test_constant_column_single_bin():
    log = numeric_log([5.0] * 6)
    with pytest.warns(UserWarning, match="distinct"):
        out = discretize(log, DiscretizerSpec("amount", 4))
    assert {e.value("amount") for e in out.trace(0).events} == {"bin00"}


def test_stored_boundaries_route_new_values_to_outer_bins():
    train = numeric_log(range(1, 101))
    binned = discretize(train, DiscretizerSpec("amount", 10))
    boundaries = binned.schema.attribute("amount").bins
    # oracle: recompute the quantile cuts independently
    ordered = sorted(float(v) for v in range(1, 101))
    expected = tuple(oracle_quantile(ordered, i / 10) for i in range(1, 10))
    assert boundaries == pytest.approx(expected, abs=0.0)

    test = numeric_log([101.0, -5.0, 50.0])
    out = apply_bins(test, "amount", boundaries)
    values = [e.value("amount") for e in out.trace(0).events]
    assert values[0] == "bin09"  # beyond the recorded maximum: top bin
    assert values[1] == "bin00"  # below the recorded minimum: bottom bin


def test_discretize_non_numeric_is_error():
    log = table1_log()
    with pytest.raises(SchemaError, match="numeric"):
        discretize(log, DiscretizerSpec("activity", 4))


def test_equal_frequency_populations_balanced_when_distinct():
    rng = np.random.default_rng(5)
    for trial in range(25):
        n = int(rng.integers(4, 60))
        k = int(rng.integers(2, min(n, 9) + 1))
        values = rng.permutation(rng.normal(size=n) * 10)
        values = np.unique(values)  # all distinct
        log = numeric_log(values)
        out = discretize(log, DiscretizerSpec("amount", k))
        labels = [e.value("amount") for e in out.trace(0).events]
        counts = [labels.count(f"bin{i:02d}") for i in range(k)]
        assert max(counts) - min(counts) <= 1, (n, k, counts)


# --- training split ----------------------------------------------------------

def test_split_never_breaks_traces():
    rows = [[tid, "x"] for tid in ["A"] * 10 + ["B"] * 10 + ["C"] * 10]
    log = make_log(["case", "activity"], rows)
    train, full = split_train(log, 15)
    assert train.trace_ids == ["A", "B"]
    assert train.n_events == 20
    assert full.n_events == 30


def test_split_boundary_and_errors():
    rows = [[tid, "x"] for tid in ["A"] * 3 + ["B"] * 3]
    log = make_log(["case", "activity"], rows)
    train, full = split_train(log, 6)
    assert train.n_events == full.n_events == 6
    with pytest.raises(ValueError):
        split_train(log, 7)
    with pytest.raises(ValueError):
        split_train(log, 0)


def test_split_cumulative_oracle_on_skewed_lengths():
    # lengths shaped like the data set in the docs: mean around 57
    rng = np.random.default_rng(42)
    lengths = np.minimum(24 + rng.geometric(1 / 33, size=900), 2973)
    rows = []
    for i, length in enumerate(lengths):
        rows.extend([[f"t{i:04d}", "x"]] * int(length))
    log = make_log(["case", "activity"], rows)
    train, _ = split_train(log, 30000)
    cumulative = list(itertools.accumulate(int(v) for v in lengths))
    expected_traces = next(i for i, c in enumerate(cumulative) if c >= 30000) + 1
    assert train.n_traces == expected_traces
    assert train.n_events == cumulative[expected_traces - 1]


# --- invariants ----------------------------------------------------------------

def test_dictionary_round_trip(fig1_log):
    log, _ = fig1_log
    for name in log.schema.categorical_names:
        d = log.dictionaries[name]
        for value in d.values:
            assert d.decode(d.encode(value)) == value


def test_round_trip_via_csv(tmp_path, fig1_log):
    log, _ = fig1_log
    path = tmp_path / "out.csv"
    write_csv(log, path)
    again = parse_log(path, log.schema)
    assert again.trace_ids == log.trace_ids
    for name in log.schema.categorical_names:
        assert again.decode_column(name) == log.decode_column(name)


def test_trace_order_invariant_under_filter_and_discretize():
    rows = []
    rng = np.random.default_rng(1)
    for i in range(30):
        for _ in range(int(rng.integers(1, 5))):
            rows.append([f"t{i}", "x", repr(float(rng.integers(0, 50)))])
    log = make_log(["case", "activity", "amount"], rows, numeric=["amount"])
    order = log.trace_ids
    assert filter_attributes(log, ["activity"]).trace_ids == order
    assert discretize(log, DiscretizerSpec("amount", 3)).trace_ids == order


def test_split_train_is_prefix(fig1_log):
    log, _ = fig1_log
    train, full = split_train(log, 500)
    assert full.trace_ids[: train.n_traces] == train.trace_ids
