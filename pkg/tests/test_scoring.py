import numpy as np
import pytest

from driftscope import testkit
from driftscope.eventlog import split_train
from driftscope.parameters import learn_parameters, train_model
from driftscope.scoring import (
    score_event,
    score_log,
    score_log_table,
    score_trace,
    sequential_mean,
    write_scores_csv,
)
from driftscope.structure import CDEdge, DependencyGraph, Node, PREVIOUS, StructureConfig
from conftest import make_log
from test_parameters import activity_model


def test_cpt_component_from_learned_table():
    model, _ = activity_model()
    scored = score_event(model, {"activity": "mail valid"}, {"activity": "mail income"})
    assert scored.attribute("activity").cpt_component == 1.0
    scored = score_event(model, {"activity": "begin editing"}, {"activity": "initialize"})
    assert scored.attribute("activity").cpt_component == 0.3


def test_unseen_value_scores_new_value_rate():
    rows = [[f"t{i}", f"v{i % 5}"] for i in range(100)]
    log = make_log(["case", "value"], rows)
    model = learn_parameters(log, DependencyGraph(("value",), (), ()))
    scored = score_event(model, {"value": "never-seen"})
    assert scored.attribute("value").value_component == 0.05
    assert scored.total == 0.05


def test_seen_parent_unseen_child_scores_zero():
    model, _ = activity_model()
    scored = score_event(model, {"activity": "performed"}, {"activity": "mail income"})
    # "performed" was seen in training (value 1) but never after "mail income"
    attr = scored.attribute("activity")
    assert attr.value_component == 1.0
    assert attr.cpt_component == 0.0
    assert scored.total == 0.0


def test_unseen_parent_tuple_scores_new_relation_rate():
    model, _ = activity_model()
    scored = score_event(model, {"activity": "mail valid"}, {"activity": "zzz-unseen"})
    rate = model.rates.new_relation["cpt:activity"]
    assert scored.attribute("activity").cpt_component == rate


def test_fd_contradiction_zeroes_partial(fig1_model):
    # applicant a00 maps to area00; claim area05 instead
    scored = score_event(
        fig1_model,
        {"activity": "receive", "applicant": "a00", "area": "area05",
         "young_farmer": "true", "doctype": "payment"},
    )
    area = scored.attribute("area")
    assert any(v == 0.0 for v in area.fd_components.values())
    assert area.partial == 0.0
    assert scored.total == 0.0


def test_fd_unseen_antecedent_uses_new_relation_rate(fig1_model):
    scored = score_event(
        fig1_model,
        {"activity": "receive", "applicant": "brand-new", "area": "area05",
         "young_farmer": "true", "doctype": "payment"},
    )
    area = scored.attribute("area")
    from driftscope.structure import CURRENT, FDEdge

    edge = FDEdge(Node("applicant", CURRENT), "area")
    rate = fig1_model.rates.new_relation["applicant->area"]
    assert area.fd_components[edge] == rate


def test_trace_mean_is_arithmetic_mean(fig1_log, fig1_model):
    log, _ = fig1_log
    scored = score_trace(fig1_model, log.trace(0))
    totals = [e.total for e in scored.event_scores]
    assert scored.mean == sequential_mean(totals)


def test_single_event_trace_mean():
    rows = [["t0", "x"], ["t1", "x"], ["t1", "y"]]
    log = make_log(["case", "activity"], rows)
    model = learn_parameters(log, DependencyGraph(("activity",), (), ()))
    scored = score_trace(model, log.trace(0))
    assert scored.mean == scored.event_scores[0].total


def test_two_event_mean_arithmetic():
    assert sequential_mean([0.2, 0.4]) == pytest.approx(0.3)


def test_fd_violation_dampens_instead_of_zeroing(fig1_model):
    """One zero-score event among m leaves a (m-1)/m share of the clean mean."""
    base = {"activity": "receive", "applicant": "a00", "area": "area00",
            "young_farmer": "true", "doctype": "payment"}
    broken = dict(base, area="area05")  # contradicts applicant->area
    events = [base] * 56 + [broken]
    totals = []
    prev = None
    for event in events:
        totals.append(score_event(fig1_model, event, prev).total)
        prev = event
    mean = sequential_mean(totals)
    assert totals[-1] == 0.0
    assert mean > 0.0
    clean_mean = sequential_mean(totals[:-1])
    assert mean == pytest.approx(clean_mean * 56 / 57)


def test_training_traces_never_violate_own_fds(fig1_log, fig1_model):
    log, _ = fig1_log
    table = score_log_table(fig1_model, log)
    for edge in table.fd_edges:
        assert np.all(table.fd[edge] == 1.0)


def test_score_log_preserves_trace_order_and_empty(fig1_log, fig1_model):
    from driftscope.eventlog import slice_traces

    log, _ = fig1_log
    scores = score_log(fig1_model, log)
    assert [s.trace_id for s in scores] == log.trace_ids
    assert score_log(fig1_model, slice_traces(log, 0, 0)) == []


def test_post_drift_scores_stochastically_lower(bench_scored):
    model, full, table, truth = bench_scored
    at = truth.drift_indices[0]
    from driftscope.drift import ks_two_sample

    d, p = ks_two_sample(table.trace_means[:at], table.trace_means[at:])
    assert p < 1e-6
    assert table.trace_means[at:].mean() < table.trace_means[:at].mean()


# --- decomposition identities ---------------------------------------------------

def test_decomposition_identity_exact(fig1_log, fig1_model):
    log, _ = fig1_log
    for trace_score in score_log(fig1_model, log)[:50]:
        for event in trace_score.event_scores:
            total = 1.0
            for attr in event.per_attribute:
                partial = attr.value_component * attr.cpt_component
                for component in attr.fd_components.values():
                    partial = partial * component
                assert partial == attr.partial
                total = total * attr.partial
            assert total == event.total


def test_monotone_under_unseen_substitution(fig1_model):
    base = {"activity": "receive", "applicant": "a00", "area": "area00",
            "young_farmer": "true", "doctype": "payment"}
    baseline = score_event(fig1_model, base)
    for attr in base:
        mutated = dict(base, **{attr: "utterly-new-value"})
        scored = score_event(fig1_model, mutated)
        assert scored.attribute(attr).partial <= baseline.attribute(attr).partial


def test_determinism_and_equal_traces_equal_scores(fig1_log, fig1_model):
    log, _ = fig1_log
    once = score_trace(fig1_model, log.trace(3))
    twice = score_trace(fig1_model, log.trace(3))
    assert once.mean == twice.mean
    assert [e.total for e in once.event_scores] == [e.total for e in twice.event_scores]


def test_single_event_matches_bulk_bitwise(fig1_log, fig1_model):
    """The per-event entry point and the vectorized log path agree exactly."""
    log, _ = fig1_log
    table = score_log_table(fig1_model, log)
    for t_idx in range(0, 40, 7):
        trace = log.trace(t_idx)
        start, _ = trace.bounds
        prev = None
        for event in trace.events:
            single = score_event(fig1_model, event.as_dict(), prev)
            row = start + event.position
            assert single.total == table.total[row]
            for attr_score in single.per_attribute:
                assert attr_score.partial == table.partial[attr_score.attribute][row]
            prev = event.as_dict()


def test_schema_mismatch_is_error(fig1_model):
    from driftscope.eventlog import SchemaError

    with pytest.raises(SchemaError):
        score_event(fig1_model, {"activity": "receive"})  # missing attributes
    with pytest.raises(SchemaError):
        score_event(fig1_model, {"activity": "receive", "applicant": "a00", "area": "area00",
                                 "young_farmer": "true", "doctype": "payment",
                                 "bogus": "x"})


def test_scores_csv_round_trip(tmp_path, fig1_log, fig1_model):
    import csv

    log, _ = fig1_log
    path = tmp_path / "scores.csv"
    write_scores_csv(fig1_model, log, path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    n_attrs = len(log.schema.categorical_names)
    assert len(rows) == log.n_events * n_attrs
    # identity re-checkable from the export alone
    by_event = {}
    for row in rows:
        key = (row["trace_id"], row["position"])
        by_event.setdefault(key, []).append(row)
    for key, attrs in list(by_event.items())[:200]:
        total = 1.0
        for row in sorted(attrs, key=lambda r: log.schema.categorical_names.index(r["attribute"])):
            total = total * float(row["partial"])
        assert total == float(attrs[0]["event_total"])
