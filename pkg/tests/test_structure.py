import numpy as np
import pytest

from driftscope import testkit
from driftscope.structure import (
    CURRENT,
    PREVIOUS,
    FDEdge,
    Node,
    StructureConfig,
    _CDCounter,
    build_structure,
    discover_cds,
    discover_fds,
)
from conftest import make_log


def edge_set(edges):
    return {(e.source.attr, e.source.slice, e.target) for e in edges}


# --- functional dependencies --------------------------------------------------

def test_constant_flag_per_applicant_is_fd():
    rows = []
    flags = {"a1": "yes", "a2": "no", "a3": "yes"}
    for applicant, flag in flags.items():
        for i in range(4):
            rows.append([f"{applicant}-{i}", applicant, flag])
    log = make_log(["case", "applicant", "flag"], rows)
    fds = edge_set(discover_fds(log, StructureConfig(fd_threshold=1.0)))
    assert ("applicant", CURRENT, "flag") in fds


def test_half_consistent_mapping_rejected_at_high_threshold():
    # antecedent u maps to two consequents in half the rows: u(A, B) = 0.5
    rows = []
    for i in range(10):
        rows.append([f"t{i}", "u", "x" if i % 2 else "y"])
    log = make_log(["case", "a", "b"], rows)
    fds = edge_set(discover_fds(log, StructureConfig(fd_threshold=0.99)))
    assert ("a", CURRENT, "b") not in fds


def test_per_event_unique_id_removed_by_cardinality_guard():
    rows = []
    for i in range(40):
        rows.append([f"t{i % 5}", f"id{i}", "x" if i % 2 else "y"])
    log = make_log(["case", "eventid", "b"], rows)
    fds = discover_fds(log, StructureConfig(fd_threshold=1.0))
    assert all("eventid" not in (e.source.attr, e.target) for e in fds)


def test_constant_column_yields_prev_slice_self_fd():
    rows = [[f"t{i}", "x" if i % 2 else "y", "const"] for i in range(8) for _ in range(3)]
    log = make_log(["case", "activity", "c"], rows)
    fds = edge_set(discover_fds(log, StructureConfig(fd_threshold=1.0)))
    assert ("c", PREVIOUS, "c") in fds


def test_fd_set_invariant_under_trace_permutation(fig1_log):
    log, _ = fig1_log
    fds = edge_set(discover_fds(log))
    # rebuild the log with traces in reversed order
    rows = []
    for trace in reversed(log.traces):
        for event in trace.events:
            rows.append([trace.trace_id] + [event.value(n) for n in log.schema.categorical_names])
    shuffled = make_log([a.name for a in log.schema.attributes], rows)
    assert edge_set(discover_fds(shuffled)) == fds


def test_strict_fds_never_contradicted_in_training(fig1_log):
    log, _ = fig1_log
    fds = discover_fds(log, StructureConfig(fd_threshold=1.0))
    columns = {n: log.decode_column(n) for n in log.schema.categorical_names}
    starts = set(int(v) for v in log.offsets[:-1])
    for edge in fds:
        seen: dict[str, str] = {}
        for row in range(log.n_events):
            if edge.source.slice == CURRENT:
                a, b = columns[edge.source.attr][row], columns[edge.target][row]
            else:
                if row in starts:
                    continue
                a, b = columns[edge.source.attr][row - 1], columns[edge.target][row]
            assert seen.setdefault(a, b) == b, f"{edge} contradicted at row {row}"


# --- conditional dependencies ---------------------------------------------------

def test_markov_activity_recovers_prev_edge_across_seeds():
    hits = 0
    for seed in range(20):
        log, _ = testkit.generate_log(testkit.default_spec(seed=seed), 250)
        cds = discover_cds(log, discover_fds(log), StructureConfig())
        for edge in cds:
            if edge.target == "activity" and Node("activity", PREVIOUS) in edge.parents:
                hits += 1
                break
    assert hits == 20


def test_independent_uniform_columns_get_no_cd():
    rng = np.random.default_rng(3)
    rows = []
    for t in range(300):
        for _ in range(4):
            rows.append([f"t{t}", f"u{rng.integers(6)}", f"v{rng.integers(6)}"])
    log = make_log(["case", "a", "b"], rows)
    cds = discover_cds(log, [], StructureConfig())
    assert cds == []


def test_fd_pair_excluded_from_cd_candidates(fig1_log):
    log, _ = fig1_log
    fds = discover_fds(log, StructureConfig(fd_threshold=1.0))
    fd_pairs = {(e.source, e.target) for e in fds}
    assert (Node("applicant", CURRENT), "area") in fd_pairs  # planted
    cds = discover_cds(log, fds, StructureConfig(fd_threshold=1.0))
    for edge in cds:
        for parent in edge.parents:
            assert (parent, edge.target) not in fd_pairs


def test_greedy_score_never_below_parentless_baseline(fig1_log):
    log, _ = fig1_log
    fds = discover_fds(log)
    cds = discover_cds(log, fds)
    counter = _CDCounter(log, [a.name for a in log.schema.data_attributes])
    for edge in cds:
        base = counter.score(edge.target, ())
        final = counter.score(edge.target, edge.parents)
        assert final > base


# --- whole-graph construction ---------------------------------------------------

def test_structure_on_planted_process(fig1_log):
    log, truth = fig1_log
    graph = build_structure(log, StructureConfig(fd_threshold=1.0))
    fds = edge_set(graph.fd_edges)
    assert ("applicant", CURRENT, "area") in fds
    assert ("applicant", CURRENT, "young_farmer") in fds
    assert ("applicant", PREVIOUS, "applicant") in fds
    assert ("area", PREVIOUS, "area") in fds
    assert ("young_farmer", PREVIOUS, "young_farmer") in fds
    assert not any(t == "activity" for _, _, t in fds)
    assert any(
        e.target == "activity" and Node("activity", PREVIOUS) in e.parents
        for e in graph.cd_edges
    )


def test_single_iid_attribute_log_has_no_edges():
    rng = np.random.default_rng(0)
    rows = [[f"t{t}", f"v{rng.integers(5)}"] for t in range(200) for _ in range(3)]
    log = make_log(["case", "activity"], rows)
    graph = build_structure(log)
    assert graph.fd_edges == ()
    assert graph.cd_edges == ()


def test_current_slice_graph_is_acyclic(fig1_log):
    log, _ = fig1_log
    graph = build_structure(log)
    edges = [(e.source.attr, e.target) for e in graph.fd_edges if e.source.slice == CURRENT]
    edges += [
        (p.attr, e.target)
        for e in graph.cd_edges
        for p in e.parents
        if p.slice == CURRENT
    ]
    # Kahn's algorithm as the independent acyclicity oracle
    nodes = set(graph.attributes)
    out = {n: set() for n in nodes}
    indeg = {n: 0 for n in nodes}
    for src, dst in set(edges):
        out[src].add(dst)
        indeg[dst] += 1
    queue = [n for n in nodes if indeg[n] == 0]
    visited = 0
    while queue:
        n = queue.pop()
        visited += 1
        for m in out[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                queue.append(m)
    assert visited == len(nodes)


def test_bijective_fd_pair_keeps_one_direction():
    # x and y are bijectively linked; only one current-slice direction survives
    rows = []
    for t in range(40):
        value = t % 4
        for _ in range(3):
            rows.append([f"t{t}", f"x{value}", f"y{value}", f"a{t % 3}"])
    log = make_log(["case", "x", "y", "act"], rows)
    graph = build_structure(log, StructureConfig(fd_threshold=1.0))
    current = {(e.source.attr, e.target) for e in graph.fd_edges if e.source.slice == CURRENT}
    assert ("x", "y") in current
    assert ("y", "x") not in current


def test_config_validation():
    with pytest.raises(ValueError):
        StructureConfig(fd_threshold=0)
    with pytest.raises(ValueError):
        StructureConfig(cardinality_guard=1.5)
    with pytest.raises(ValueError):
        StructureConfig(k_max=0)
