"""CSV event logs as columnar, dictionary-encoded tables grouped into traces.

A parsed log keeps one integer column per categorical attribute (codes into a
per-attribute value dictionary) plus float columns for not-yet-discretized
numeric attributes.  Rows are physically reordered so every trace is a
contiguous block and traces follow first-event time (file order on ties or
when no timestamp column exists).  All views (`Trace`, `Event`) are cheap
wrappers over the column arrays.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace
from datetime import datetime
from typing import Iterator, Sequence

import numpy as np

CATEGORICAL = "categorical"
NUMERIC = "numeric"
TRACE_ID = "trace-id"
TIMESTAMP = "timestamp"

_KINDS = (CATEGORICAL, NUMERIC, TRACE_ID, TIMESTAMP)

#: Reserved symbol for empty cells; behaves as an ordinary category.
MISSING_VALUE = "⟨missing⟩"
#: Reserved previous-slice symbol used when an event starts a trace.
START_VALUE = "⟨start⟩"

_TS_FORMATS = (
    "%Y-%m-%d %H:%M:%S.%f",
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d",
    "%d-%m-%Y %H:%M:%S.%f",
    "%d-%m-%Y %H:%M:%S",
    "%Y/%m/%d %H:%M:%S",
)


class SchemaError(ValueError):
    """Schema definition or schema/file mismatch problems."""


class ParseError(ValueError):
    """Malformed CSV content; names the offending file line when known."""


@dataclass(frozen=True)
class AttributeSpec:
    name: str
    kind: str
    #: Equal-frequency bin boundaries, recorded once a numeric attribute has
    #: been discretized so the same cuts can be replayed on test data.
    bins: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise SchemaError(f"unknown attribute kind {self.kind!r} for {self.name!r}")


@dataclass(frozen=True)
class Schema:
    """Ordered column descriptors; exactly one trace-id column."""

    attributes: tuple[AttributeSpec, ...]

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise SchemaError("attribute names must be unique")
        trace_ids = [a.name for a in self.attributes if a.kind == TRACE_ID]
        if len(trace_ids) != 1:
            raise SchemaError(f"schema needs exactly one trace-id column, got {trace_ids}")
        stamps = [a.name for a in self.attributes if a.kind == TIMESTAMP]
        if len(stamps) > 1:
            raise SchemaError(f"at most one timestamp column allowed, got {stamps}")

    @property
    def trace_id_column(self) -> str:
        return next(a.name for a in self.attributes if a.kind == TRACE_ID)

    @property
    def timestamp_column(self) -> str | None:
        return next((a.name for a in self.attributes if a.kind == TIMESTAMP), None)

    @property
    def data_attributes(self) -> tuple[AttributeSpec, ...]:
        """Attributes that carry event payload (categorical or numeric)."""
        return tuple(a for a in self.attributes if a.kind in (CATEGORICAL, NUMERIC))

    @property
    def categorical_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes if a.kind == CATEGORICAL)

    def attribute(self, name: str) -> AttributeSpec:
        for a in self.attributes:
            if a.name == name:
                return a
        raise SchemaError(f"unknown attribute {name!r}")

    def to_dict(self) -> dict:
        return {
            "attributes": [
                {"name": a.name, "kind": a.kind, "bins": list(a.bins) if a.bins else None}
                for a in self.attributes
            ]
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Schema":
        return cls(
            tuple(
                AttributeSpec(a["name"], a["kind"], tuple(a["bins"]) if a.get("bins") else None)
                for a in doc["attributes"]
            )
        )


def infer_schema(columns: Sequence[str], trace_id: str, timestamp: str | None = None,
                 numeric: Sequence[str] = ()) -> Schema:
    """Schema with every non-id, non-timestamp column treated as categorical."""
    if trace_id not in columns:
        raise SchemaError(f"trace-id column {trace_id!r} not in {list(columns)}")
    if timestamp is not None and timestamp not in columns:
        raise SchemaError(f"timestamp column {timestamp!r} not in {list(columns)}")
    specs = []
    for name in columns:
        if name == trace_id:
            kind = TRACE_ID
        elif name == timestamp:
            kind = TIMESTAMP
        elif name in numeric:
            kind = NUMERIC
        else:
            kind = CATEGORICAL
        specs.append(AttributeSpec(name, kind))
    return Schema(tuple(specs))


def load_schema(path) -> Schema:
    """Read a column->kind config file (``name = kind`` lines or a JSON map)."""
    import json

    text = open(path, "r", encoding="utf-8").read().strip()
    if not text:
        raise SchemaError(f"empty schema file {path}")
    if text.startswith("{"):
        mapping = json.loads(text)
        items = list(mapping.items())
    else:
        items = []
        for ln, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise SchemaError(f"{path}:{ln}: expected 'column = kind'")
            name, kind = (part.strip() for part in line.split("=", 1))
            items.append((name, kind))
    alias = {"trace_id": TRACE_ID, "traceid": TRACE_ID, "case": TRACE_ID}
    specs = tuple(AttributeSpec(n, alias.get(k, k)) for n, k in items)
    return Schema(specs)


@dataclass(frozen=True)
class DiscretizerSpec:
    attribute: str
    bin_count: int
    method: str = "equal-frequency"

    def __post_init__(self):
        if self.bin_count < 2:
            raise ValueError("bin_count must be >= 2")
        if self.method != "equal-frequency":
            raise ValueError(f"unsupported discretization method {self.method!r}")


class Dictionary:
    """Bijection between attribute value strings and dense integer codes."""

    __slots__ = ("values", "index")

    def __init__(self, values: Sequence[str] = ()):
        self.values: list[str] = list(values)
        self.index: dict[str, int] = {v: i for i, v in enumerate(self.values)}

    def encode(self, value: str) -> int:
        code = self.index.get(value)
        if code is None:
            code = len(self.values)
            self.values.append(value)
            self.index[value] = code
        return code

    def decode(self, code: int) -> str:
        return self.values[code]

    def __len__(self) -> int:
        return len(self.values)

    def __contains__(self, value: str) -> bool:
        return value in self.index


class Event:
    """One log row: a trace id, a position, and one symbol per categorical attribute."""

    __slots__ = ("_log", "_row", "trace_id", "position")

    def __init__(self, log: "EventLog", row: int, trace_id: str, position: int):
        self._log = log
        self._row = row
        self.trace_id = trace_id
        self.position = position

    @property
    def values(self) -> tuple[int, ...]:
        return tuple(int(self._log.columns[n][self._row]) for n in self._log.schema.categorical_names)

    def value(self, attribute: str) -> str:
        """Decoded string value of one categorical attribute."""
        code = int(self._log.columns[attribute][self._row])
        return self._log.dictionaries[attribute].decode(code)

    def as_dict(self) -> dict[str, str]:
        return {n: self.value(n) for n in self._log.schema.categorical_names}

    def __repr__(self):
        return f"Event({self.trace_id!r}, pos={self.position}, {self.as_dict()})"


class Trace:
    """Contiguous block of events sharing a trace id, in event order."""

    __slots__ = ("_log", "index")

    def __init__(self, log: "EventLog", index: int):
        self._log = log
        self.index = index

    @property
    def trace_id(self) -> str:
        return self._log.trace_ids[self.index]

    @property
    def bounds(self) -> tuple[int, int]:
        off = self._log.offsets
        return int(off[self.index]), int(off[self.index + 1])

    @property
    def events(self) -> list[Event]:
        start, end = self.bounds
        tid = self.trace_id
        return [Event(self._log, r, tid, r - start) for r in range(start, end)]

    @property
    def first_event_epoch(self) -> float | None:
        return self._log.trace_start_epoch(self.index)

    @property
    def log(self) -> "EventLog":
        return self._log

    def __len__(self) -> int:
        start, end = self.bounds
        return end - start

    def __iter__(self) -> Iterator[Event]:
        return iter(self.events)

    def __repr__(self):
        return f"Trace({self.trace_id!r}, {len(self)} events)"


@dataclass
class EventLog:
    """Immutable-by-convention event log; operations return new instances."""

    schema: Schema
    #: code or float column per data attribute, trace-grouped row order
    columns: dict[str, np.ndarray]
    dictionaries: dict[str, Dictionary]
    trace_ids: list[str]
    offsets: np.ndarray  # (n_traces + 1,) row offsets
    #: epoch seconds per row (NaN when absent); None when no timestamp column
    timestamps: np.ndarray | None = None
    #: original timestamp strings, kept verbatim for faithful CSV export
    timestamp_text: list[str] | None = None

    @property
    def n_traces(self) -> int:
        return len(self.trace_ids)

    @property
    def n_events(self) -> int:
        return int(self.offsets[-1])

    @property
    def traces(self) -> list[Trace]:
        return [Trace(self, i) for i in range(self.n_traces)]

    def trace(self, index: int) -> Trace:
        return Trace(self, index)

    def column(self, name: str) -> np.ndarray:
        return self.columns[name]

    def trace_start_epoch(self, index: int) -> float | None:
        if self.timestamps is None:
            return None
        start, end = int(self.offsets[index]), int(self.offsets[index + 1])
        window = self.timestamps[start:end]
        finite = window[~np.isnan(window)]
        return float(finite.min()) if finite.size else None

    def trace_lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def decode_column(self, name: str) -> list[str]:
        d = self.dictionaries[name]
        return [d.decode(int(c)) for c in self.columns[name]]

    def __len__(self) -> int:
        return self.n_events


def _parse_timestamp(raw: str) -> float:
    try:
        return datetime.fromisoformat(raw).timestamp()
    except ValueError:
        pass
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(raw, fmt).timestamp()
        except ValueError:
            continue
    return float(raw)  # plain epoch numbers; raises ValueError otherwise


def parse_log(path, schema: Schema) -> EventLog:
    """Parse a CSV file into an :class:`EventLog` under the given schema.

    Rows become events grouped by the trace-id column; traces are ordered by
    earliest timestamp with file order breaking ties (and supplying the order
    outright when the schema has no timestamp column).  Every categorical
    value is dictionary-encoded; empty cells become ``MISSING_VALUE``.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        schema_names = {a.name for a in schema.attributes}
        missing = schema_names - set(header)
        if missing:
            raise SchemaError(f"{path}: columns {sorted(missing)} declared in schema but absent from header")
        extra = set(header) - schema_names
        if extra:
            raise SchemaError(f"{path}: columns {sorted(extra)} present in file but not in schema")

        col_of = {name: i for i, name in enumerate(header)}
        raw_columns: dict[str, list] = {name: [] for name in header}
        n_rows = 0
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
            for name in header:
                raw_columns[name].append(row[col_of[name]])
            n_rows += 1

    return _build_log(header, raw_columns, n_rows, schema, str(path))


def from_rows(schema: Schema, rows: Sequence[Sequence[str]]) -> EventLog:
    """Build a log from in-memory string rows (same semantics as CSV parsing)."""
    header = [a.name for a in schema.attributes]
    raw_columns: dict[str, list] = {name: [] for name in header}
    for row in rows:
        if len(row) != len(header):
            raise ParseError(f"<memory>: expected {len(header)} fields, got {len(row)}")
        for name, cell in zip(header, row):
            raw_columns[name].append(str(cell))
    return _build_log(header, raw_columns, len(rows), schema, "<memory>")


def _build_log(header: list[str], raw_columns: dict[str, list], n_rows: int,
               schema: Schema, source: str) -> EventLog:
    if n_rows == 0:
        raise ParseError(f"{source}: empty log (header but no data rows)")

    # normalize attribute order to the file's column order
    by_name = {a.name: a for a in schema.attributes}
    schema = Schema(tuple(by_name[h] for h in header))
    path = source
    tid_col = schema.trace_id_column
    ts_col = schema.timestamp_column

    timestamps = None
    ts_text = None
    if ts_col is not None:
        ts_text = raw_columns[ts_col]
        timestamps = np.full(n_rows, np.nan)
        for i, raw in enumerate(ts_text):
            raw = raw.strip()
            if not raw:
                continue
            try:
                timestamps[i] = _parse_timestamp(raw)
            except ValueError:
                raise ParseError(f"{path}:{i + 2}: cannot parse timestamp {raw!r}") from None

    columns: dict[str, np.ndarray] = {}
    dictionaries: dict[str, Dictionary] = {}
    for spec in schema.data_attributes:
        raw = raw_columns[spec.name]
        if spec.kind == NUMERIC:
            out = np.full(n_rows, np.nan)
            for i, cell in enumerate(raw):
                cell = cell.strip()
                if not cell:
                    continue
                try:
                    out[i] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}:{i + 2}: non-numeric value {cell!r} in numeric column {spec.name!r}"
                    ) from None
            columns[spec.name] = out
        else:
            d = Dictionary()
            codes = np.empty(n_rows, dtype=np.int32)
            for i, cell in enumerate(raw):
                codes[i] = d.encode(cell if cell != "" else MISSING_VALUE)
            columns[spec.name] = codes
            dictionaries[spec.name] = d

    order, trace_ids, offsets = _group_rows(raw_columns[tid_col], timestamps)
    for name in columns:
        columns[name] = columns[name][order]
    if timestamps is not None:
        timestamps = timestamps[order]
        ts_text = [ts_text[i] for i in order]

    return EventLog(
        schema=schema,
        columns=columns,
        dictionaries=dictionaries,
        trace_ids=trace_ids,
        offsets=offsets,
        timestamps=timestamps,
        timestamp_text=ts_text,
    )


def _group_rows(trace_col: list[str], timestamps: np.ndarray | None):
    """Row permutation putting traces contiguous and ordered by first event."""
    first_row: dict[str, int] = {}
    members: dict[str, list[int]] = {}
    for i, tid in enumerate(trace_col):
        if tid not in members:
            members[tid] = []
            first_row[tid] = i
        members[tid].append(i)

    def trace_key(tid: str):
        if timestamps is None:
            return (0.0, first_row[tid])
        ts = timestamps[members[tid]]
        finite = ts[~np.isnan(ts)]
        earliest = float(finite.min()) if finite.size else math.inf
        return (earliest, first_row[tid])

    ordered = sorted(members, key=trace_key)

    order: list[int] = []
    offsets = [0]
    for tid in ordered:
        rows = members[tid]
        if timestamps is not None:
            rows = sorted(rows, key=lambda r: (timestamps[r] if not np.isnan(timestamps[r]) else math.inf, r))
        order.extend(rows)
        offsets.append(len(order))
    return np.asarray(order), ordered, np.asarray(offsets, dtype=np.int64)


def filter_attributes(log: EventLog, drop: Sequence[str]) -> EventLog:
    """Return a log without the named data attributes; trace order unchanged."""
    drop = list(drop)
    for name in drop:
        spec = log.schema.attribute(name)  # raises on unknown names
        if spec.kind == TRACE_ID:
            raise SchemaError("cannot drop the trace-id column")
    keep = tuple(a for a in log.schema.attributes if a.name not in drop)
    return replace(
        log,
        schema=Schema(keep),
        columns={n: c for n, c in log.columns.items() if n not in drop},
        dictionaries={n: d for n, d in log.dictionaries.items() if n not in drop},
    )


def _quantile_boundaries(values: np.ndarray, bin_count: int) -> tuple[float, ...]:
    cuts = np.quantile(values, [i / bin_count for i in range(1, bin_count)])
    return tuple(float(c) for c in cuts)


def bin_label(index: int) -> str:
    return f"bin{index:02d}"


def discretize(log: EventLog, spec: DiscretizerSpec) -> EventLog:
    """Replace a numeric attribute with equal-frequency bin labels.

    Boundaries are the 1/k..(k-1)/k quantiles of the non-missing values and
    are recorded on the attribute spec so test data can reuse them.  When the
    column has fewer distinct values than requested bins, the bin count drops
    to the distinct count (with a warning).
    """
    attr = log.schema.attribute(spec.attribute)
    if attr.kind != NUMERIC:
        raise SchemaError(f"attribute {spec.attribute!r} is {attr.kind}, not numeric")
    values = log.columns[spec.attribute]
    finite = values[~np.isnan(values)]
    if finite.size == 0:
        raise ValueError(f"attribute {spec.attribute!r} has no numeric values to bin")
    n_distinct = np.unique(finite).size
    bin_count = spec.bin_count
    if n_distinct < bin_count:
        warnings.warn(
            f"{spec.attribute}: only {n_distinct} distinct values; reducing bin count from {bin_count}"
        )
        bin_count = max(n_distinct, 1)
    boundaries = _quantile_boundaries(finite, bin_count) if bin_count > 1 else ()
    return apply_bins(log, spec.attribute, boundaries)


def apply_bins(log: EventLog, attribute: str, boundaries: Sequence[float]) -> EventLog:
    """Map a numeric attribute onto stored bin boundaries (reused on test data).

    A value falls in the bin counting the boundaries strictly below it, so
    values beyond the recorded extremes land in the outermost bins.
    """
    attr = log.schema.attribute(attribute)
    if attr.kind != NUMERIC:
        raise SchemaError(f"attribute {attribute!r} is {attr.kind}, not numeric")
    values = log.columns[attribute]
    cuts = np.asarray(sorted(boundaries))
    bins = np.searchsorted(cuts, values, side="left")

    d = Dictionary()
    labels = [bin_label(i) for i in range(len(cuts) + 1)]
    codes = np.empty(len(values), dtype=np.int32)
    nan_mask = np.isnan(values)
    for i in range(len(values)):
        codes[i] = d.encode(MISSING_VALUE if nan_mask[i] else labels[int(bins[i])])

    new_spec = AttributeSpec(attribute, CATEGORICAL, bins=tuple(float(c) for c in cuts))
    new_attrs = tuple(new_spec if a.name == attribute else a for a in log.schema.attributes)
    columns = dict(log.columns)
    columns[attribute] = codes
    dictionaries = dict(log.dictionaries)
    dictionaries[attribute] = d
    return replace(log, schema=Schema(new_attrs), columns=columns, dictionaries=dictionaries)


def split_train(log: EventLog, n_events: int) -> tuple[EventLog, EventLog]:
    """First whole traces reaching ``n_events`` cumulative events, plus the full log.

    Traces are never split: the training log ends at the first trace boundary
    where the running event count reaches ``n_events``.
    """
    if n_events <= 0:
        raise ValueError("n_events must be positive")
    if n_events > log.n_events:
        raise ValueError(f"n_events={n_events} exceeds log size {log.n_events}")
    cut = int(np.searchsorted(log.offsets, n_events, side="left"))
    # offsets[cut] is the first cumulative count >= n_events
    train = _slice_traces(log, 0, cut)
    return train, log


def _slice_traces(log: EventLog, start: int, end: int) -> EventLog:
    """Log restricted to traces [start, end); shares no mutable state."""
    row_lo, row_hi = int(log.offsets[start]), int(log.offsets[end])
    return replace(
        log,
        columns={n: c[row_lo:row_hi] for n, c in log.columns.items()},
        trace_ids=log.trace_ids[start:end],
        offsets=log.offsets[start:end + 1] - row_lo,
        timestamps=None if log.timestamps is None else log.timestamps[row_lo:row_hi],
        timestamp_text=None if log.timestamp_text is None else log.timestamp_text[row_lo:row_hi],
    )


def slice_traces(log: EventLog, start: int, end: int) -> EventLog:
    if not (0 <= start <= end <= log.n_traces):
        raise ValueError(f"trace range [{start}, {end}) out of bounds for {log.n_traces} traces")
    return _slice_traces(log, start, end)


def write_csv(log: EventLog, path) -> None:
    """Write the log back to CSV in schema column order (RFC 4180 quoting)."""
    names = [a.name for a in log.schema.attributes]
    decoders = {}
    for spec in log.schema.data_attributes:
        if spec.kind == CATEGORICAL:
            decoders[spec.name] = log.dictionaries[spec.name]
    tid_col = log.schema.trace_id_column
    ts_col = log.schema.timestamp_column

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        row_idx = 0
        for t in range(log.n_traces):
            tid = log.trace_ids[t]
            start, end = int(log.offsets[t]), int(log.offsets[t + 1])
            for r in range(start, end):
                row = []
                for name in names:
                    if name == tid_col:
                        row.append(tid)
                    elif name == ts_col:
                        row.append(log.timestamp_text[r] if log.timestamp_text else "")
                    elif name in decoders:
                        value = decoders[name].decode(int(log.columns[name][r]))
                        row.append("" if value == MISSING_VALUE else value)
                    else:
                        value = log.columns[name][r]
                        row.append("" if np.isnan(value) else repr(float(value)))
                writer.writerow(row)
                row_idx += 1
