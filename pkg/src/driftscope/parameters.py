"""Parameter estimation and model persistence.

Given a discovered dependency graph, learn every conditional probability
table (maximum-likelihood row frequencies), every functional-dependency value
map, and the novelty rates used in place of hard zeros when scoring unseen
values or unseen parent combinations.  The first event of each trace reads
its previous-slice parents as the reserved start symbol, which is learned
like any other value so trace heads need no special casing later.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .eventlog import CATEGORICAL, START_VALUE, EventLog, Schema, SchemaError
from .structure import CURRENT, DependencyGraph, FDEdge, Node, StructureConfig

MODEL_FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """Unreadable or incompatible model file."""


@dataclass
class CPT:
    """Conditional probability table for one attribute given its parents."""

    target: str
    parents: tuple[Node, ...]
    #: parent value tuple -> {child value -> probability}; start-of-trace
    #: previous-slice values appear as START_VALUE
    rows: dict[tuple[str, ...], dict[str, float]]

    def probability(self, parent_values: tuple[str, ...], child: str) -> float | None:
        row = self.rows.get(parent_values)
        if row is None:
            return None
        return row.get(child, 0.0)


@dataclass
class FDMap:
    """Observed value mapping for one functional dependency."""

    edge: FDEdge
    mapping: dict[str, set[str]]

    def permits(self, antecedent: str, consequent: str) -> bool | None:
        """True/False when the antecedent was seen; None when it is new."""
        allowed = self.mapping.get(antecedent)
        if allowed is None:
            return None
        return consequent in allowed


@dataclass
class Rates:
    new_value: dict[str, float]
    #: keyed by edge label: CD edges by target attribute, FD edges by
    #: "source[@prev]->target"
    new_relation: dict[str, float]


def fd_edge_key(edge: FDEdge) -> str:
    return f"{edge.source.label()}->{edge.target}"


def cd_edge_key(target: str) -> str:
    return f"cpt:{target}"


@dataclass
class EDBNModel:
    """Learned two-slice dependency model, sufficient to score any event."""

    schema: Schema
    graph: DependencyGraph
    #: training-observed values per attribute, in stable code order
    vocab: dict[str, list[str]]
    cpts: dict[str, CPT]
    fdmaps: dict[str, FDMap]  # keyed by fd_edge_key
    rates: Rates
    metadata: dict

    def __post_init__(self):
        self._engine = None

    def seen(self, attribute: str, value: str) -> bool:
        return value in self._vocab_index(attribute)

    def _vocab_index(self, attribute: str) -> dict[str, int]:
        cache = getattr(self, "_vocab_idx", None)
        if cache is None:
            cache = {a: {v: i for i, v in enumerate(vs)} for a, vs in self.vocab.items()}
            self._vocab_idx = cache
        return cache[attribute]

    def fdmap_for(self, edge: FDEdge) -> FDMap:
        return self.fdmaps[fd_edge_key(edge)]


def _prev_column(log: EventLog, attr: str, sentinel: int) -> np.ndarray:
    col = log.columns[attr].astype(np.int64)
    prev = np.empty_like(col)
    prev[1:] = col[:-1]
    prev[log.offsets[:-1]] = sentinel
    return prev


def learn_parameters(train: EventLog, graph: DependencyGraph,
                     config: StructureConfig | None = None) -> EDBNModel:
    """Estimate CPTs, FD maps and novelty rates from the training log."""
    if train.n_events == 0:
        raise ValueError("empty training log")
    for spec in train.schema.data_attributes:
        if spec.kind != CATEGORICAL:
            raise SchemaError(f"attribute {spec.name!r} must be discretized before training")

    n = train.n_events
    names = [a.name for a in train.schema.data_attributes]

    vocab: dict[str, list[str]] = {}
    decode: dict[str, dict[int, str]] = {}
    sentinel: dict[str, int] = {}
    cur: dict[str, np.ndarray] = {}
    prev: dict[str, np.ndarray] = {}
    for name in names:
        col = train.columns[name].astype(np.int64)
        codes = np.unique(col)
        d = train.dictionaries[name]
        values = [d.decode(int(c)) for c in codes]
        if START_VALUE in values:
            raise ValueError(f"attribute {name!r} contains the reserved value {START_VALUE!r}")
        vocab[name] = values
        decode[name] = {int(c): v for c, v in zip(codes, values)}
        decode[name][len(d)] = START_VALUE
        sentinel[name] = len(d)
        cur[name] = col
        prev[name] = _prev_column(train, name, sentinel[name])

    def node_column(node: Node) -> np.ndarray:
        return cur[node.attr] if node.slice == CURRENT else prev[node.attr]

    new_value = {name: len(vocab[name]) / n for name in names}
    new_relation: dict[str, float] = {}

    cpts: dict[str, CPT] = {}
    for edge in graph.cd_edges:
        child = cur[edge.target]
        child_decode = decode[edge.target]
        cols = [node_column(p) for p in edge.parents]
        sizes = [sentinel[p.attr] + 1 for p in edge.parents]
        keys = np.zeros(n, dtype=np.int64)
        for col, size in zip(cols, sizes):
            keys = keys * size + col
        uniq_keys, inv = np.unique(keys, return_inverse=True)
        child_stride = int(child.max()) + 1
        pair_keys = inv.astype(np.int64) * child_stride + child
        uniq_pairs, pair_counts = np.unique(pair_keys, return_counts=True)
        tuple_totals = np.bincount(inv, minlength=uniq_keys.size)

        # decode unique tuple keys back into parent value strings
        tuple_values: list[tuple[str, ...]] = []
        for key in uniq_keys:
            k = int(key)
            digits = []
            for size in reversed(sizes):
                k, code = divmod(k, size)
                digits.append(code)
            digits.reverse()
            tuple_values.append(tuple(decode[p.attr][d] for p, d in zip(edge.parents, digits)))

        rows: dict[tuple[str, ...], dict[str, float]] = {tv: {} for tv in tuple_values}
        for pair_key, count in zip(uniq_pairs, pair_counts):
            tuple_idx, child_code = divmod(int(pair_key), child_stride)
            rows[tuple_values[tuple_idx]][child_decode[child_code]] = (
                int(count) / int(tuple_totals[tuple_idx])
            )
        cpts[edge.target] = CPT(edge.target, edge.parents, rows)
        new_relation[cd_edge_key(edge.target)] = uniq_keys.size / n

    fdmaps: dict[str, FDMap] = {}
    for edge in graph.fd_edges:
        a = node_column(edge.source)
        b = cur[edge.target]
        stride = int(b.max()) + 1
        pairs = np.unique(a * stride + b)
        mapping: dict[str, set[str]] = {}
        a_decode = decode[edge.source.attr]
        b_decode = decode[edge.target]
        for pair in pairs:
            a_code, b_code = divmod(int(pair), stride)
            mapping.setdefault(a_decode[a_code], set()).add(b_decode[b_code])
        key = fd_edge_key(edge)
        fdmaps[key] = FDMap(edge, mapping)
        new_relation[key] = len(mapping) / n

    metadata = {
        "n_traces": train.n_traces,
        "n_events": n,
        "config": {
            "fd_threshold": (config or StructureConfig()).fd_threshold,
            "cardinality_guard": (config or StructureConfig()).cardinality_guard,
            "k_max": (config or StructureConfig()).k_max,
        },
    }
    return EDBNModel(
        schema=train.schema,
        graph=graph,
        vocab=vocab,
        cpts=cpts,
        fdmaps=fdmaps,
        rates=Rates(new_value=new_value, new_relation=new_relation),
        metadata=metadata,
    )


def train_model(train: EventLog, config: StructureConfig | None = None) -> EDBNModel:
    """Structure discovery followed by parameter learning on the same log."""
    from .structure import build_structure

    config = config or StructureConfig()
    graph = build_structure(train, config)
    return learn_parameters(train, graph, config)


def save_model(model: EDBNModel, path) -> None:
    doc = {
        "version": MODEL_FORMAT_VERSION,
        "schema": {**model.schema.to_dict(), "dictionaries": model.vocab},
        "graph": model.graph.to_dict(),
        "cpts": [
            {
                "target": cpt.target,
                "parents": [{"attr": p.attr, "slice": p.slice} for p in cpt.parents],
                "rows": [
                    {"parents": list(tv), "children": children}
                    for tv, children in cpt.rows.items()
                ],
            }
            for cpt in model.cpts.values()
        ],
        "fdmaps": [
            {
                "source_attr": m.edge.source.attr,
                "source_slice": m.edge.source.slice,
                "target": m.edge.target,
                "mapping": {a: sorted(bs) for a, bs in m.mapping.items()},
            }
            for m in model.fdmaps.values()
        ],
        "rates": {"new_value": model.rates.new_value, "new_relation": model.rates.new_relation},
        "metadata": model.metadata,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load_model(path) -> EDBNModel:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ModelFormatError(f"{path}: not a valid model file ({exc})") from None
    if not isinstance(doc, dict) or "version" not in doc:
        raise ModelFormatError(f"{path}: missing model format version")
    if doc["version"] != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: model format version {doc['version']} unsupported "
            f"(this build reads version {MODEL_FORMAT_VERSION})"
        )
    try:
        schema = Schema.from_dict(doc["schema"])
        graph = DependencyGraph.from_dict(doc["graph"])
        cpts = {}
        for entry in doc["cpts"]:
            parents = tuple(Node(p["attr"], p["slice"]) for p in entry["parents"])
            rows = {
                tuple(row["parents"]): dict(row["children"]) for row in entry["rows"]
            }
            cpts[entry["target"]] = CPT(entry["target"], parents, rows)
        fdmaps = {}
        for entry in doc["fdmaps"]:
            edge = FDEdge(Node(entry["source_attr"], entry["source_slice"]), entry["target"])
            fdmaps[fd_edge_key(edge)] = FDMap(
                edge, {a: set(bs) for a, bs in entry["mapping"].items()}
            )
        model = EDBNModel(
            schema=schema,
            graph=graph,
            vocab={a: list(vs) for a, vs in doc["schema"]["dictionaries"].items()},
            cpts=cpts,
            fdmaps=fdmaps,
            rates=Rates(
                new_value=dict(doc["rates"]["new_value"]),
                new_relation=dict(doc["rates"]["new_relation"]),
            ),
            metadata=dict(doc["metadata"]),
        )
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: corrupt model file (missing {exc})") from None
    return model
