import json

import pytest

from driftscope.eventlog import START_VALUE
from driftscope.parameters import (
    EDBNModel,
    ModelFormatError,
    fd_edge_key,
    learn_parameters,
    load_model,
    save_model,
    train_model,
)
from driftscope.scoring import score_event, score_log
from driftscope.structure import (
    CDEdge,
    CURRENT,
    DependencyGraph,
    FDEdge,
    Node,
    PREVIOUS,
    build_structure,
)
from conftest import make_log


def activity_pairs_log():
    """Two-event traces realizing a known transition count table."""
    pairs = (
        [("mail income", "mail valid")] * 10
        + [("initialize", "initialize")] * 6
        + [("initialize", "begin editing")] * 3
        + [("initialize", "performed")] * 1
        + [("begin editing", "finish editing")] * 7
        + [("begin editing", "calculate")] * 3
    )
    rows = []
    for i, (first, second) in enumerate(pairs):
        rows.append([f"t{i:03d}", first])
        rows.append([f"t{i:03d}", second])
    return make_log(["case", "activity"], rows)


def activity_model():
    log = activity_pairs_log()
    graph = DependencyGraph(
        attributes=("activity",),
        fd_edges=(),
        cd_edges=(CDEdge((Node("activity", PREVIOUS),), "activity"),),
    )
    return learn_parameters(log, graph), log


def test_cpt_rows_are_maximum_likelihood_frequencies():
    model, _ = activity_model()
    rows = model.cpts["activity"].rows
    assert rows[("initialize",)] == {"initialize": 0.6, "begin editing": 0.3, "performed": 0.1}
    assert rows[("mail income",)] == {"mail valid": 1.0}
    assert rows[("begin editing",)] == {"finish editing": 0.7, "calculate": 0.3}


def test_trace_start_sentinel_learned_like_any_parent():
    model, _ = activity_model()
    rows = model.cpts["activity"].rows
    start_row = rows[(START_VALUE,)]
    assert abs(sum(start_row.values()) - 1.0) < 1e-9
    assert start_row["mail income"] == 10 / 30


def test_new_value_rate_is_distinct_over_events():
    rows = [[f"t{i}", f"v{i % 5}"] for i in range(100)]
    log = make_log(["case", "value"], rows)
    model = learn_parameters(log, DependencyGraph(("value",), (), ()))
    assert model.rates.new_value["value"] == 0.05


def test_new_value_rate_one_iff_all_unique():
    rows = [[f"t{i}", f"v{i}"] for i in range(20)]
    log = make_log(["case", "value"], rows)
    model = learn_parameters(log, DependencyGraph(("value",), (), ()))
    assert model.rates.new_value["value"] == 1.0


def test_cpt_rows_sum_to_one(fig1_log, fig1_model):
    for cpt in fig1_model.cpts.values():
        for row in cpt.rows.values():
            assert abs(sum(row.values()) - 1.0) < 1e-9
            assert all(0 < p <= 1 for p in row.values())


def test_all_rates_in_unit_interval(fig1_model):
    assert set(fig1_model.rates.new_value) == set(fig1_model.vocab)
    for rate in fig1_model.rates.new_value.values():
        assert 0 < rate <= 1
    for rate in fig1_model.rates.new_relation.values():
        assert 0 < rate <= 1


def test_model_file_top_level_keys(fig1_model, tmp_path):
    path = tmp_path / "model.json"
    save_model(fig1_model, path)
    doc = json.loads(path.read_text())
    assert set(doc) == {"version", "schema", "graph", "cpts", "fdmaps", "rates", "metadata"}
    assert set(doc["schema"]["dictionaries"]) == set(fig1_model.vocab)


def test_training_pairs_always_in_fdmap(fig1_log, fig1_model):
    log, _ = fig1_log
    columns = {n: log.decode_column(n) for n in log.schema.categorical_names}
    starts = {int(v) for v in log.offsets[:-1]}
    for fdmap in fig1_model.fdmaps.values():
        source, target = fdmap.edge.source, fdmap.edge.target
        for row in range(log.n_events):
            b = columns[target][row]
            if source.slice == CURRENT:
                a = columns[source.attr][row]
            elif row in starts:
                a = START_VALUE
            else:
                a = columns[source.attr][row - 1]
            assert fdmap.permits(a, b) is True


def test_learning_deterministic(fig1_log, tmp_path):
    log, _ = fig1_log
    m1 = train_model(log)
    m2 = train_model(log)
    p1, p2 = tmp_path / "m1.json", tmp_path / "m2.json"
    save_model(m1, p1)
    save_model(m2, p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_empty_training_is_error(fig1_log):
    from driftscope.eventlog import slice_traces

    log, _ = fig1_log
    empty = slice_traces(log, 0, 0)
    with pytest.raises(ValueError):
        learn_parameters(empty, DependencyGraph((), (), ()))


# --- persistence ----------------------------------------------------------------

def test_round_trip_scores_bitwise_equal(fig1_log, fig1_model, tmp_path):
    log, _ = fig1_log
    path = tmp_path / "model.json"
    save_model(fig1_model, path)
    loaded = load_model(path)
    fresh = score_log(fig1_model, log)[:100]
    reloaded = score_log(loaded, log)[:100]
    for a, b in zip(fresh, reloaded):
        assert a.mean == b.mean
        for ea, eb in zip(a.event_scores, b.event_scores):
            assert ea.total == eb.total


def test_unknown_version_names_versions(fig1_model, tmp_path):
    path = tmp_path / "model.json"
    save_model(fig1_model, path)
    doc = json.loads(path.read_text())
    doc["version"] = 99
    path.write_text(json.dumps(doc))
    with pytest.raises(ModelFormatError, match="99.*version 1|version 1.*99"):
        load_model(path)


def test_truncated_file_is_integrity_error(fig1_model, tmp_path):
    path = tmp_path / "model.json"
    save_model(fig1_model, path)
    path.write_bytes(path.read_bytes()[: path.stat().st_size // 2])
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_not_json_is_integrity_error(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("definitely not a model")
    with pytest.raises(ModelFormatError):
        load_model(path)


def test_reserved_start_value_rejected_in_data():
    rows = [["t0", START_VALUE], ["t0", "x"]]
    log = make_log(["case", "activity"], rows)
    with pytest.raises(ValueError, match="reserved"):
        learn_parameters(log, DependencyGraph(("activity",), (), ()))
