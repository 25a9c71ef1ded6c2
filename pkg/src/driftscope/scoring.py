"""Event and trace scoring against a learned model, fully decomposable.

Every event score is the product over attributes of three factor groups:
a value factor (1 for training-seen values, otherwise the attribute's
new-value rate), a CPT factor (table probability, new-relation rate for an
unseen parent combination, and a hard 0 for an unseen child under a seen
combination), and one factor per functional dependency (1 when the observed
pair was seen, the edge's new-relation rate for a new antecedent, 0 for a
contradiction).  A trace scores the arithmetic mean of its event scores, so
a single zero-score event dampens rather than annihilates the trace.

Scores stay in linear [0, 1] space here; log scaling happens at
presentation time only.

The numeric core is vectorized: a log is translated into integer code
matrices once, and every factor is computed with array lookups.  The
per-event objects are thin views over those arrays, so bulk scoring and
single-event scoring cannot disagree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .eventlog import START_VALUE, Event, EventLog, SchemaError, Trace
from .parameters import EDBNModel, cd_edge_key, fd_edge_key
from .structure import CURRENT, FDEdge

#: floor applied before log10 when exporting plot data, keeping zero scores drawable
LOG_FLOOR = 1e-300


def log10_floor(x: float) -> float:
    import math

    return math.log10(max(x, LOG_FLOOR))


def sequential_mean(values) -> float:
    """Left-to-right sum divided by length; the one true trace-mean order."""
    if isinstance(values, np.ndarray):
        values = values.tolist()
    total = 0.0
    for v in values:
        total += v
    return total / len(values)


@dataclass
class AttributeScore:
    attribute: str
    value_component: float
    cpt_component: float
    fd_components: dict[FDEdge, float]
    partial: float


@dataclass
class EventScore:
    per_attribute: list[AttributeScore]
    total: float

    def attribute(self, name: str) -> AttributeScore:
        for a in self.per_attribute:
            if a.attribute == name:
                return a
        raise KeyError(name)


@dataclass
class TraceScore:
    trace_id: str
    event_scores: list[EventScore]
    mean: float
    first_event_time: float | None = None


def _sorted_lookup(sorted_keys: np.ndarray, payload: np.ndarray | None, queries: np.ndarray):
    """(found mask, payload values) for queries against a sorted key array."""
    if sorted_keys.size == 0:
        found = np.zeros(queries.shape, dtype=bool)
        return found, np.zeros(queries.shape) if payload is not None else None
    idx = np.searchsorted(sorted_keys, queries)
    idx_c = np.minimum(idx, sorted_keys.size - 1)
    found = sorted_keys[idx_c] == queries
    values = payload[idx_c] if payload is not None else None
    return found, values


class _CDLookup:
    __slots__ = ("parents", "sizes", "tuple_keys", "pair_keys", "pair_probs", "child_stride", "rate")

    def __init__(self, parents, sizes, tuple_keys, pair_keys, pair_probs, child_stride, rate):
        self.parents = parents
        self.sizes = sizes
        self.tuple_keys = tuple_keys
        self.pair_keys = pair_keys
        self.pair_probs = pair_probs
        self.child_stride = child_stride
        self.rate = rate


class _FDLookup:
    __slots__ = ("edge", "a_keys", "pair_keys", "stride", "rate")

    def __init__(self, edge, a_keys, pair_keys, stride, rate):
        self.edge = edge
        self.a_keys = a_keys
        self.pair_keys = pair_keys
        self.stride = stride
        self.rate = rate


class _Engine:
    """Array-lookup form of an EDBNModel; one instance cached per model."""

    def __init__(self, model: EDBNModel):
        self.model = model
        self.attrs = [a.name for a in model.schema.data_attributes]
        self.code_of = {a: {v: i for i, v in enumerate(model.vocab[a])} for a in self.attrs}
        self.vocab_size = {a: len(model.vocab[a]) for a in self.attrs}
        self.value_rate = {a: model.rates.new_value[a] for a in self.attrs}

        self.cd: dict[str, _CDLookup] = {}
        for target, cpt in model.cpts.items():
            sizes = [self.vocab_size[p.attr] + 2 for p in cpt.parents]
            child_stride = self.vocab_size[target] + 2
            tuple_keys, pair_keys, pair_probs = [], [], []
            for tv, children in cpt.rows.items():
                key = 0
                for p, size, value in zip(cpt.parents, sizes, tv):
                    key = key * size + self._encode_value(p.attr, value)
                tuple_keys.append(key)
                for child, prob in children.items():
                    pair_keys.append(key * child_stride + self._encode_value(target, child))
                    pair_probs.append(prob)
            order = np.argsort(pair_keys, kind="stable")
            self.cd[target] = _CDLookup(
                parents=cpt.parents,
                sizes=sizes,
                tuple_keys=np.sort(np.asarray(tuple_keys, dtype=np.int64)),
                pair_keys=np.asarray(pair_keys, dtype=np.int64)[order],
                pair_probs=np.asarray(pair_probs)[order],
                child_stride=child_stride,
                rate=model.rates.new_relation[cd_edge_key(target)],
            )

        self.fd: list[_FDLookup] = []
        for edge in model.graph.fd_edges:
            m = model.fdmap_for(edge)
            stride = self.vocab_size[edge.target] + 2
            a_keys, pair_keys = [], []
            for a_value, b_values in m.mapping.items():
                a_code = self._encode_value(edge.source.attr, a_value)
                a_keys.append(a_code)
                for b_value in b_values:
                    pair_keys.append(a_code * stride + self._encode_value(edge.target, b_value))
            self.fd.append(
                _FDLookup(
                    edge=edge,
                    a_keys=np.sort(np.asarray(a_keys, dtype=np.int64)),
                    pair_keys=np.sort(np.asarray(pair_keys, dtype=np.int64)),
                    stride=stride,
                    rate=model.rates.new_relation[fd_edge_key(edge)],
                )
            )

    def _encode_value(self, attr: str, value: str) -> int:
        if value == START_VALUE:
            return self.vocab_size[attr]  # sentinel code
        return self.code_of[attr][value]

    # --- encoding -----------------------------------------------------

    def encode_log(self, log: EventLog) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        """Translate a log into model codes; unseen strings collapse to one
        out-of-vocabulary code per attribute (they all score identically)."""
        missing = [a for a in self.attrs if a not in log.columns]
        if missing:
            raise SchemaError(f"log lacks model attributes {missing}")
        cur: dict[str, np.ndarray] = {}
        prev: dict[str, np.ndarray] = {}
        starts = log.offsets[:-1]
        for attr in self.attrs:
            spec = log.schema.attribute(attr)
            if spec.kind != "categorical":
                raise SchemaError(f"attribute {attr!r} is not categorical; apply stored bins first")
            codes = log.columns[attr]
            d = log.dictionaries[attr]
            translate = np.empty(len(d), dtype=np.int64)
            lookup = self.code_of[attr]
            unknown = self.vocab_size[attr] + 1
            for code, value in enumerate(d.values):
                translate[code] = lookup.get(value, unknown)
            c = translate[codes]
            p = np.empty_like(c)
            p[1:] = c[:-1]
            p[starts] = self.vocab_size[attr]  # sentinel
            cur[attr] = c
            prev[attr] = p
        return cur, prev

    def encode_mappings(self, event: Mapping[str, str],
                        previous: Mapping[str, str] | None) -> tuple[dict, dict]:
        cur, prev = {}, {}
        for attr in self.attrs:
            if attr not in event:
                raise SchemaError(f"event lacks attribute {attr!r}")
            unknown = self.vocab_size[attr] + 1
            cur[attr] = np.asarray([self.code_of[attr].get(event[attr], unknown)], dtype=np.int64)
            if previous is None:
                prev[attr] = np.asarray([self.vocab_size[attr]], dtype=np.int64)
            else:
                if attr not in previous:
                    raise SchemaError(f"previous event lacks attribute {attr!r}")
                prev[attr] = np.asarray(
                    [self.code_of[attr].get(previous[attr], unknown)], dtype=np.int64
                )
        return cur, prev

    # --- factor computation --------------------------------------------

    def components(self, cur: dict[str, np.ndarray], prev: dict[str, np.ndarray]):
        """All factor arrays plus partial products and event totals."""
        value: dict[str, np.ndarray] = {}
        cpt: dict[str, np.ndarray | None] = {}
        fd: dict[FDEdge, np.ndarray] = {}

        for attr in self.attrs:
            c = cur[attr]
            value[attr] = np.where(c < self.vocab_size[attr], 1.0, self.value_rate[attr])
            cpt[attr] = None

        for target, lk in self.cd.items():
            keys = np.zeros(cur[target].shape, dtype=np.int64)
            for p, size in zip(lk.parents, lk.sizes):
                col = cur[p.attr] if p.slice == CURRENT else prev[p.attr]
                keys = keys * size + col
            tuple_found, _ = _sorted_lookup(lk.tuple_keys, None, keys)
            pair_found, probs = _sorted_lookup(
                lk.pair_keys, lk.pair_probs, keys * lk.child_stride + cur[target]
            )
            cpt[target] = np.where(
                pair_found, probs, np.where(tuple_found, 0.0, lk.rate)
            )

        for lk in self.fd:
            src = lk.edge.source
            a = cur[src.attr] if src.slice == CURRENT else prev[src.attr]
            a_found, _ = _sorted_lookup(lk.a_keys, None, a)
            pair_found, _ = _sorted_lookup(lk.pair_keys, None, a * lk.stride + cur[lk.edge.target])
            fd[lk.edge] = np.where(pair_found, 1.0, np.where(a_found, 0.0, lk.rate))

        partial: dict[str, np.ndarray] = {}
        for attr in self.attrs:
            acc = value[attr]
            if cpt[attr] is not None:
                acc = acc * cpt[attr]
            for lk in self.fd:
                if lk.edge.target == attr:
                    acc = acc * fd[lk.edge]
            partial[attr] = acc

        total = np.ones(len(next(iter(cur.values()))))
        for attr in self.attrs:
            total = total * partial[attr]
        return value, cpt, fd, partial, total


def _engine(model: EDBNModel) -> _Engine:
    eng = getattr(model, "_engine", None)
    if eng is None:
        eng = _Engine(model)
        model._engine = eng
    return eng


@dataclass
class LogScores:
    """Vector form of a scored log; object views are built from this on demand."""

    attrs: list[str]
    fd_edges: list[FDEdge]
    value: dict[str, np.ndarray]
    cpt: dict[str, np.ndarray | None]
    fd: dict[FDEdge, np.ndarray]
    partial: dict[str, np.ndarray]
    total: np.ndarray
    offsets: np.ndarray
    trace_ids: list[str]
    first_event_epochs: list[float | None]
    trace_means: np.ndarray

    @property
    def n_traces(self) -> int:
        return len(self.trace_ids)

    def trace_slice(self, i: int) -> tuple[int, int]:
        return int(self.offsets[i]), int(self.offsets[i + 1])

    def event_score(self, row: int) -> EventScore:
        per_attr = []
        for attr in self.attrs:
            fd_components = {
                e: float(self.fd[e][row]) for e in self.fd_edges if e.target == attr
            }
            cpt_arr = self.cpt[attr]
            per_attr.append(
                AttributeScore(
                    attribute=attr,
                    value_component=float(self.value[attr][row]),
                    cpt_component=1.0 if cpt_arr is None else float(cpt_arr[row]),
                    fd_components=fd_components,
                    partial=float(self.partial[attr][row]),
                )
            )
        return EventScore(per_attribute=per_attr, total=float(self.total[row]))

    def trace_score(self, i: int) -> TraceScore:
        start, end = self.trace_slice(i)
        return TraceScore(
            trace_id=self.trace_ids[i],
            event_scores=[self.event_score(r) for r in range(start, end)],
            mean=float(self.trace_means[i]),
            first_event_time=self.first_event_epochs[i],
        )


def score_log_table(model: EDBNModel, log: EventLog) -> LogScores:
    """Score a whole log into component arrays (the fast path)."""
    eng = _engine(model)
    cur, prev = eng.encode_log(log)
    value, cpt, fd, partial, total = eng.components(cur, prev)
    means = np.empty(log.n_traces)
    totals_list = total.tolist()
    offsets = log.offsets
    for i in range(log.n_traces):
        start, end = int(offsets[i]), int(offsets[i + 1])
        acc = 0.0
        for r in range(start, end):
            acc += totals_list[r]
        means[i] = acc / (end - start)
    epochs = [log.trace_start_epoch(i) for i in range(log.n_traces)]
    return LogScores(
        attrs=eng.attrs,
        fd_edges=[lk.edge for lk in eng.fd],
        value=value,
        cpt=cpt,
        fd=fd,
        partial=partial,
        total=total,
        offsets=offsets,
        trace_ids=list(log.trace_ids),
        first_event_epochs=epochs,
        trace_means=means,
    )


def score_log(model: EDBNModel, log: EventLog) -> list[TraceScore]:
    """One TraceScore per trace, in trace order."""
    if log.n_traces == 0:
        return []
    table = score_log_table(model, log)
    return [table.trace_score(i) for i in range(table.n_traces)]


def score_trace(model: EDBNModel, trace: Trace) -> TraceScore:
    """Score one trace; its first event reads previous-slice values as start."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    eng = _engine(model)
    log = trace.log
    start, end = trace.bounds
    cur, prev = {}, {}
    for attr in eng.attrs:
        spec = log.schema.attribute(attr)
        if spec.kind != "categorical":
            raise SchemaError(f"attribute {attr!r} is not categorical; apply stored bins first")
        d = log.dictionaries[attr]
        lookup = eng.code_of[attr]
        unknown = eng.vocab_size[attr] + 1
        translate = np.asarray([lookup.get(v, unknown) for v in d.values], dtype=np.int64)
        c = translate[log.columns[attr][start:end]]
        p = np.empty_like(c)
        p[1:] = c[:-1]
        p[0] = eng.vocab_size[attr]
        cur[attr] = c
        prev[attr] = p
    value, cpt, fd, partial, total = eng.components(cur, prev)
    scores = LogScores(
        attrs=eng.attrs,
        fd_edges=[lk.edge for lk in eng.fd],
        value=value,
        cpt=cpt,
        fd=fd,
        partial=partial,
        total=total,
        offsets=np.asarray([0, end - start]),
        trace_ids=[trace.trace_id],
        first_event_epochs=[trace.first_event_epoch],
        trace_means=np.asarray([sequential_mean(total)]),
    )
    return scores.trace_score(0)


def score_event(model: EDBNModel, event, previous=None) -> EventScore:
    """Score a single event given its predecessor (or none at a trace start).

    ``event`` and ``previous`` are either :class:`Event` views or plain
    ``{attribute: value}`` mappings; unseen strings count as new values.
    """
    if isinstance(event, Event):
        event = event.as_dict()
    if isinstance(previous, Event):
        previous = previous.as_dict()
    if previous is not None and not isinstance(previous, Mapping):
        raise TypeError("previous must be an Event, a mapping, or None")
    eng = _engine(model)
    extras = set(event) - set(eng.attrs)
    if extras:
        raise SchemaError(f"event carries unknown attributes {sorted(extras)}")
    cur, prev = eng.encode_mappings(event, previous)
    value, cpt, fd, partial, total = eng.components(cur, prev)
    scores = LogScores(
        attrs=eng.attrs,
        fd_edges=[lk.edge for lk in eng.fd],
        value=value,
        cpt=cpt,
        fd=fd,
        partial=partial,
        total=total,
        offsets=np.asarray([0, 1]),
        trace_ids=["_"],
        first_event_epochs=[None],
        trace_means=np.asarray([float(total[0])]),
    )
    return scores.event_score(0)


def write_scores_csv(model: EDBNModel, log: EventLog, path,
                     table: LogScores | None = None) -> None:
    """Long-format per-attribute score export.

    One row per (event, attribute) with the value/CPT factors, one column per
    model FD edge (blank when the edge does not target the row's attribute),
    the attribute partial, the event total and the trace mean.
    """
    import csv as _csv

    table = table or score_log_table(model, log)
    edge_cols = [fd_edge_key(e) for e in table.fd_edges]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = _csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["trace_id", "position", "attribute", "value_component", "cpt_component"]
            + [f"fd[{k}]" for k in edge_cols]
            + ["partial", "event_total", "trace_mean"]
        )
        for i in range(table.n_traces):
            start, end = table.trace_slice(i)
            tid = table.trace_ids[i]
            mean = repr(float(table.trace_means[i]))
            for r in range(start, end):
                total = repr(float(table.total[r]))
                for attr in table.attrs:
                    cpt_arr = table.cpt[attr]
                    fd_cells = []
                    for e in table.fd_edges:
                        fd_cells.append(repr(float(table.fd[e][r])) if e.target == attr else "")
                    writer.writerow(
                        [tid, r - start, attr,
                         repr(float(table.value[attr][r])),
                         "1.0" if cpt_arr is None else repr(float(cpt_arr[r]))]
                        + fd_cells
                        + [repr(float(table.partial[attr][r])), total, mean]
                    )
