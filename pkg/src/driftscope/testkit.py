"""Deterministic synthetic process-log generation with known ground truth.

Logs mimic a case-management process: a Markov chain drives the activity
column, case attributes stay constant within a trace (optionally derived
from one another, which plants functional dependencies), and event
attributes are drawn independently per event.  Drifts can replace the
transition matrix, swap attribute pools (introducing values unseen before
the drift), or remap a derived attribute at a chosen trace index.  The
generator reports the drift indices, the exact functional-dependency edge
set of the pre-drift regime, and any planted outlier traces, so recovery
tests have an independent answer key.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .eventlog import EventLog, from_rows, infer_schema
from .structure import CURRENT, FDEdge, Node, PREVIOUS


@dataclass(frozen=True)
class Pool:
    """Categorical value pool with optional draw weights (uniform when None)."""

    values: tuple[str, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.values:
            raise ValueError("empty value pool")
        if self.weights is not None:
            if len(self.weights) != len(self.values):
                raise ValueError("weights length must match values")
            if abs(sum(self.weights) - 1.0) > 1e-9:
                raise ValueError("pool weights must sum to 1")

    def cumulative(self) -> np.ndarray:
        if self.weights is None:
            w = np.full(len(self.values), 1.0 / len(self.values))
        else:
            w = np.asarray(self.weights)
        return np.cumsum(w)


@dataclass(frozen=True)
class DerivedAttribute:
    """Case attribute computed from another one; plants an FD source->name."""

    source: str
    mapping: dict[str, str]


@dataclass(frozen=True)
class TraceLength:
    minimum: int = 5
    geometric_p: float = 0.3
    maximum: int = 60

    def __post_init__(self):
        if self.minimum < 1 or self.maximum < self.minimum:
            raise ValueError("invalid trace length bounds")
        if not (0 < self.geometric_p <= 1):
            raise ValueError("geometric_p must be in (0, 1]")


@dataclass(frozen=True)
class OutlierPlant:
    """Pin attribute values (typically never generated) for one whole trace."""

    trace_index: int
    overrides: dict[str, str]


@dataclass(frozen=True)
class ProcessSpec:
    activities: tuple[str, ...]
    transitions: dict[str, dict[str, float]]
    case_attributes: dict[str, Pool] = field(default_factory=dict)
    derived_attributes: dict[str, DerivedAttribute] = field(default_factory=dict)
    event_attributes: dict[str, Pool] = field(default_factory=dict)
    start_activities: Pool | None = None
    id_column: str | None = None
    lengths: TraceLength = TraceLength()
    seed: int = 0
    planted_outliers: tuple[OutlierPlant, ...] = ()

    def __post_init__(self):
        if len(self.activities) < 2:
            raise ValueError("need at least two activities")
        branching = 0
        for act in self.activities:
            row = self.transitions.get(act)
            if row is None:
                raise ValueError(f"transition row missing for activity {act!r}")
            if abs(sum(row.values()) - 1.0) > 1e-9:
                raise ValueError(f"transition row for {act!r} must sum to 1")
            if any(nxt not in self.activities for nxt in row):
                raise ValueError(f"transition row for {act!r} names unknown activities")
            if sum(1 for p in row.values() if p > 0) >= 2:
                branching += 1
        if branching == 0:
            raise ValueError("transition matrix must branch somewhere, otherwise the "
                             "activity chain itself forms a functional dependency")
        for name, derived in self.derived_attributes.items():
            src_pool = self.case_attributes.get(derived.source)
            if src_pool is None and derived.source not in self.derived_attributes:
                raise ValueError(f"derived attribute {name!r} references unknown source")
            if src_pool is not None:
                missing = [v for v in src_pool.values if v not in derived.mapping]
                if missing:
                    raise ValueError(f"derived attribute {name!r} lacks mappings for {missing}")
        for name, pool in self.event_attributes.items():
            positive = sum(1 for _ in pool.values) if pool.weights is None else sum(
                1 for w in pool.weights if w > 0
            )
            if positive < 2:
                raise ValueError(f"event attribute {name!r} needs >= 2 drawable values")

    @property
    def case_attr_names(self) -> list[str]:
        return list(self.case_attributes) + list(self.derived_attributes)

    @property
    def columns(self) -> list[str]:
        cols = ["case", "activity"]
        cols += self.case_attr_names
        cols += list(self.event_attributes)
        if self.id_column:
            cols.append(self.id_column)
        return cols


@dataclass(frozen=True)
class DriftSpec:
    """Process mutation applied to all traces from ``at_trace`` onward."""

    at_trace: int
    transitions: dict[str, dict[str, float]] | None = None
    event_attribute_pools: dict[str, Pool] = field(default_factory=dict)
    case_attribute_pools: dict[str, Pool] = field(default_factory=dict)
    derived_remaps: dict[str, dict[str, str]] = field(default_factory=dict)


@dataclass
class GroundTruth:
    drift_indices: list[int]
    fd_edges: list[FDEdge]
    outlier_trace_indices: list[int]
    outlier_trace_ids: list[str]

    def to_dict(self) -> dict:
        return {
            "drift_indices": self.drift_indices,
            "fd_edges": [
                {"source_attr": e.source.attr, "source_slice": e.source.slice, "target": e.target}
                for e in self.fd_edges
            ],
            "outlier_trace_indices": self.outlier_trace_indices,
            "outlier_trace_ids": self.outlier_trace_ids,
        }


def _apply_drift(spec: ProcessSpec, drift: DriftSpec) -> ProcessSpec:
    case_attrs = dict(spec.case_attributes)
    case_attrs.update(drift.case_attribute_pools)
    event_attrs = dict(spec.event_attributes)
    event_attrs.update(drift.event_attribute_pools)
    derived = dict(spec.derived_attributes)
    for name, mapping in drift.derived_remaps.items():
        if name not in derived:
            raise ValueError(f"drift remaps unknown derived attribute {name!r}")
        derived[name] = DerivedAttribute(derived[name].source, mapping)
    return replace(
        spec,
        transitions=drift.transitions or spec.transitions,
        case_attributes=case_attrs,
        event_attributes=event_attrs,
        derived_attributes=derived,
    )


def _draw_codes(rng: np.random.Generator, pool: Pool, size: int) -> np.ndarray:
    return np.searchsorted(pool.cumulative(), rng.random(size), side="right")


def _resolve_case_values(spec: ProcessSpec, root_values: dict[str, str]) -> dict[str, str]:
    values = dict(root_values)
    # derived attributes may chain; resolve in declaration order, twice for
    # forward references
    for _ in range(2):
        for name, derived in spec.derived_attributes.items():
            src = values.get(derived.source)
            if src is not None:
                values[name] = derived.mapping[src]
    missing = [n for n in spec.derived_attributes if n not in values]
    if missing:
        raise ValueError(f"could not resolve derived attributes {missing}")
    return values


def generate_log(spec: ProcessSpec, n_traces: int,
                 drifts: tuple[DriftSpec, ...] | list[DriftSpec] = ()) -> tuple[EventLog, GroundTruth]:
    """Generate ``n_traces`` traces; deterministic for a fixed spec seed."""
    if n_traces <= 0:
        raise ValueError("n_traces must be positive")
    drifts = sorted(drifts, key=lambda d: d.at_trace)
    for d in drifts:
        if not (0 < d.at_trace < n_traces):
            raise ValueError(f"drift at_trace {d.at_trace} outside (0, {n_traces})")

    rng = np.random.default_rng(spec.seed)
    outliers = {p.trace_index: p.overrides for p in spec.planted_outliers}
    for idx in outliers:
        if not (0 <= idx < n_traces):
            raise ValueError(f"planted outlier index {idx} outside [0, {n_traces})")

    # regime boundaries: [start, end) trace ranges with an effective spec each
    bounds = [0] + [d.at_trace for d in drifts] + [n_traces]
    regimes = []
    current = spec
    for i, (start, end) in enumerate(zip(bounds, bounds[1:])):
        if i > 0:
            current = _apply_drift(current, drifts[i - 1])
        regimes.append((start, end, current))

    columns = spec.columns
    rows: list[list[str]] = []
    event_counter = 0
    pre_drift_profiles: list[tuple[str, ...]] = []
    case_names = spec.case_attr_names

    for start, end, regime in regimes:
        n_regime = end - start
        lengths = np.minimum(
            regime.lengths.minimum + rng.geometric(regime.lengths.geometric_p, n_regime) - 1,
            regime.lengths.maximum,
        )
        total_events = int(lengths.sum())

        root_draws = {
            name: _draw_codes(rng, pool, n_regime)
            for name, pool in regime.case_attributes.items()
        }
        event_draws = {
            name: _draw_codes(rng, pool, total_events)
            for name, pool in regime.event_attributes.items()
        }
        start_pool = regime.start_activities or Pool(regime.activities)
        start_draws = _draw_codes(rng, start_pool, n_regime)
        uniforms = rng.random(total_events)

        # per-activity cumulative successor distributions
        successor_values: dict[str, list[str]] = {}
        successor_cum: dict[str, np.ndarray] = {}
        for act, row in regime.transitions.items():
            succ = [a for a in regime.activities if row.get(a, 0.0) > 0]
            successor_values[act] = succ
            successor_cum[act] = np.cumsum([row[a] for a in succ])

        offset = 0
        for j in range(n_regime):
            t = start + j
            length = int(lengths[j])
            tid = f"t{t:05d}"

            roots = {
                name: regime.case_attributes[name].values[int(root_draws[name][j])]
                for name in regime.case_attributes
            }
            case_values = _resolve_case_values(regime, roots)
            overrides = outliers.get(t, {})
            case_values.update({k: v for k, v in overrides.items() if k in case_values})

            activity = start_pool.values[int(start_draws[j])]
            for pos in range(length):
                if pos > 0:
                    u = uniforms[offset + pos]
                    cum = successor_cum[activity]
                    activity = successor_values[activity][int(np.searchsorted(cum, u, side="right"))]
                row = [tid, activity]
                row += [case_values[name] for name in case_names]
                for name in regime.event_attributes:
                    value = regime.event_attributes[name].values[int(event_draws[name][offset + pos])]
                    row.append(overrides.get(name, value))
                if regime.id_column:
                    row.append(f"e{event_counter:07d}")
                event_counter += 1
                rows.append(row)
            offset += length

            if (not drifts or t < drifts[0].at_trace) and t not in outliers:
                pre_drift_profiles.append(tuple(case_values[name] for name in case_names))

    schema = infer_schema(columns, trace_id="case")
    log = from_rows(schema, rows)
    truth = GroundTruth(
        drift_indices=[d.at_trace for d in drifts],
        fd_edges=_fd_ground_truth(case_names, pre_drift_profiles),
        outlier_trace_indices=sorted(outliers),
        outlier_trace_ids=[f"t{i:05d}" for i in sorted(outliers)],
    )
    return log, truth


def _fd_ground_truth(case_names: list[str], profiles: list[tuple[str, ...]]) -> list[FDEdge]:
    """Exact FD edge set implied by the observed case-attribute profiles.

    Case attributes are constant within a trace, so attribute X determines Y
    exactly when no X value co-occurs with two Y values across the observed
    profiles; determination holds identically in the current slice and from
    the previous slice, and every case attribute trivially determines itself
    across slices.
    """
    edges: list[FDEdge] = []
    unique_profiles = set(profiles)
    for i, x in enumerate(case_names):
        edges.append(FDEdge(Node(x, PREVIOUS), x))
        for j, y in enumerate(case_names):
            if i == j:
                continue
            seen: dict[str, str] = {}
            functional = True
            for profile in unique_profiles:
                xv, yv = profile[i], profile[j]
                if seen.setdefault(xv, yv) != yv:
                    functional = False
                    break
            if functional:
                edges.append(FDEdge(Node(x, CURRENT), y))
                edges.append(FDEdge(Node(x, PREVIOUS), y))
    return edges


def drift_benchmark(seed: int = 0, at_trace: int = 3000) -> tuple[ProcessSpec, DriftSpec]:
    """Fixture for drift-localization runs: clean before, loud after.

    Before the drift every value and relation is seen during training, so all
    traces score exactly 1; the drift swaps the transition matrix and makes a
    ninth, never-seen document type dominant, which drops most later traces
    onto a single low score atom.  Trace lengths are fixed so the score
    distribution stays coarse and the windowed test is quiet off the change
    point.
    """
    acts = tuple("abcdef")
    uniform = {a: {b: 1.0 / 6 for b in acts} for a in acts}
    skewed = {
        a: {acts[(i + 1) % 6]: 0.6, acts[(i + 2) % 6]: 0.25, acts[(i + 3) % 6]: 0.15}
        for i, a in enumerate(acts)
    }
    docs = tuple(f"doc{i}" for i in range(8))
    spec = ProcessSpec(
        activities=acts,
        transitions=uniform,
        case_attributes={"doctype": Pool(docs)},
        event_attributes={"applicant": Pool(tuple(f"a{i:02d}" for i in range(40)))},
        lengths=TraceLength(minimum=10, geometric_p=1.0, maximum=10),
        seed=seed,
    )
    drift = DriftSpec(
        at_trace=at_trace,
        transitions=skewed,
        case_attribute_pools={"doctype": Pool(docs + ("doc_new",), tuple([0.1 / 8] * 8 + [0.9]))},
    )
    return spec, drift


def default_spec(seed: int = 0, **overrides) -> ProcessSpec:
    """A small application-handling process with planted FDs.

    Forty applicants map onto twelve areas (several applicants per area) and
    a two-valued flag that varies within every area group, so the planted FD
    set is exactly: applicant determines area and the flag, and each case
    attribute persists across the slice boundary.
    """
    applicants = tuple(f"a{i:02d}" for i in range(40))
    area_map = {a: f"area{int(a[1:]) % 12:02d}" for a in applicants}
    flag_map = {a: ("true" if (int(a[1:]) // 12) % 2 == 0 else "false") for a in applicants}
    activities = ("receive", "validate", "edit", "calculate", "decide", "finish")
    transitions = {
        "receive": {"validate": 0.7, "edit": 0.3},
        "validate": {"edit": 0.5, "calculate": 0.5},
        "edit": {"edit": 0.3, "calculate": 0.4, "decide": 0.3},
        "calculate": {"decide": 0.6, "edit": 0.4},
        "decide": {"finish": 0.8, "edit": 0.2},
        "finish": {"receive": 1.0},
    }
    base = dict(
        activities=activities,
        transitions=transitions,
        case_attributes={"applicant": Pool(applicants)},
        derived_attributes={
            "area": DerivedAttribute("applicant", area_map),
            "young_farmer": DerivedAttribute("applicant", flag_map),
        },
        event_attributes={"doctype": Pool(("payment", "entitlement", "parcel"), (0.5, 0.3, 0.2))},
        start_activities=Pool(("receive",), (1.0,)),
        lengths=TraceLength(minimum=5, geometric_p=0.3, maximum=40),
        seed=seed,
    )
    base.update(overrides)
    return ProcessSpec(**base)
