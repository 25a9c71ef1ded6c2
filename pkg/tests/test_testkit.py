import numpy as np
import pytest

from driftscope import testkit
from driftscope.eventlog import write_csv
from driftscope.structure import CURRENT, PREVIOUS, StructureConfig, discover_fds


def test_same_seed_same_csv_bytes(tmp_path):
    for run in range(2):
        log, _ = testkit.generate_log(testkit.default_spec(seed=3), 150)
        write_csv(log, tmp_path / f"run{run}.csv")
    assert (tmp_path / "run0.csv").read_bytes() == (tmp_path / "run1.csv").read_bytes()


def test_different_seeds_differ(tmp_path):
    a, _ = testkit.generate_log(testkit.default_spec(seed=1), 50)
    b, _ = testkit.generate_log(testkit.default_spec(seed=2), 50)
    write_csv(a, tmp_path / "a.csv")
    write_csv(b, tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() != (tmp_path / "b.csv").read_bytes()


def test_transition_frequencies_follow_matrix():
    spec = testkit.default_spec(seed=9)
    log, _ = testkit.generate_log(spec, 1500)
    activity = log.decode_column("activity")
    starts = {int(v) for v in log.offsets[:-1]}
    counts: dict[str, dict[str, int]] = {}
    for row in range(1, log.n_events):
        if row in starts:
            continue
        counts.setdefault(activity[row - 1], {}).setdefault(activity[row], 0)
        counts[activity[row - 1]][activity[row]] += 1
    for source, row in spec.transitions.items():
        total = sum(counts[source].values())
        assert total > 500
        for target, expected in row.items():
            observed = counts[source].get(target, 0) / total
            assert abs(observed - expected) < 0.05, (source, target)


def test_planted_fds_hold_exactly_before_drift():
    log, truth = testkit.generate_log(testkit.default_spec(seed=5), 500)
    columns = {n: log.decode_column(n) for n in log.schema.categorical_names}
    starts = {int(v) for v in log.offsets[:-1]}
    for edge in truth.fd_edges:
        seen: dict[str, str] = {}
        for row in range(log.n_events):
            if edge.source.slice == CURRENT:
                a, b = columns[edge.source.attr][row], columns[edge.target][row]
            else:
                if row in starts:
                    continue
                a, b = columns[edge.source.attr][row - 1], columns[edge.target][row]
            assert seen.setdefault(a, b) == b


def test_discovery_recovers_planted_fds():
    log, truth = testkit.generate_log(testkit.default_spec(seed=2), 1500)
    found = {(e.source.attr, e.source.slice, e.target)
             for e in discover_fds(log, StructureConfig(fd_threshold=1.0))}
    expected = {(e.source.attr, e.source.slice, e.target) for e in truth.fd_edges}
    assert found == expected


def test_drift_ground_truth_and_regime_change():
    spec, drift = testkit.drift_benchmark(seed=1, at_trace=50)
    log, truth = testkit.generate_log(spec, 120, [drift])
    assert truth.drift_indices == [50]
    doctype = log.decode_column("doctype")
    pre = {doctype[r] for r in range(int(log.offsets[50]))}
    post_rows = range(int(log.offsets[50]), log.n_events)
    post = {doctype[r] for r in post_rows}
    assert "doc_new" not in pre
    assert "doc_new" in post


def test_trace_lengths_respect_bounds():
    spec = testkit.default_spec(seed=8)
    log, _ = testkit.generate_log(spec, 400)
    lengths = log.trace_lengths()
    assert lengths.min() >= spec.lengths.minimum
    assert lengths.max() <= spec.lengths.maximum


def test_planted_outliers_reported():
    spec = testkit.default_spec(seed=4)
    spec = testkit.ProcessSpec(
        **{**spec.__dict__, "planted_outliers": (testkit.OutlierPlant(7, {"area": "zz"}),)}
    )
    log, truth = testkit.generate_log(spec, 20)
    assert truth.outlier_trace_indices == [7]
    assert truth.outlier_trace_ids == ["t00007"]
    trace = log.trace(7)
    assert {e.value("area") for e in trace.events} == {"zz"}


def test_spec_validation():
    with pytest.raises(ValueError, match="sum"):
        testkit.Pool(("a", "b"), (0.5, 0.6))
    with pytest.raises(ValueError, match="branch"):
        testkit.ProcessSpec(
            activities=("a", "b"),
            transitions={"a": {"b": 1.0}, "b": {"a": 1.0}},
        )
    spec = testkit.default_spec()
    with pytest.raises(ValueError, match="at_trace"):
        testkit.generate_log(spec, 10, [testkit.DriftSpec(at_trace=10)])
    with pytest.raises(ValueError):
        testkit.generate_log(spec, 0)


def test_generated_log_parses_as_standard_csv(tmp_path):
    from driftscope.eventlog import parse_log

    log, _ = testkit.generate_log(testkit.default_spec(seed=6, id_column="eventid"), 30)
    path = tmp_path / "log.csv"
    write_csv(log, path)
    again = parse_log(path, log.schema)
    assert again.n_events == log.n_events
    assert again.trace_ids == log.trace_ids
