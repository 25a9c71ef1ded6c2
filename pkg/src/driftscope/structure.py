"""Dependency-structure discovery over two time slices of an event log.

Two edge kinds are discovered.  Functional dependencies (FDs) are value
mappings: attribute A determines attribute B when the observed (A, B) pairs
have (almost) as many distinct antecedent values as distinct pairs.  The
scope covers same-event pairs and pairs across consecutive events of a trace,
so constants within a trace show up as previous-slice self-dependencies.
Conditional dependencies (CDs) are probabilistic parents chosen greedily by a
penalized log-likelihood score.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .eventlog import CATEGORICAL, EventLog, SchemaError

PREVIOUS = "previous"
CURRENT = "current"


class Node(NamedTuple):
    """An attribute in one time slice."""

    attr: str
    slice: str

    def label(self) -> str:
        return self.attr if self.slice == CURRENT else f"{self.attr}@prev"


class FDEdge(NamedTuple):
    source: Node
    target: str  # current-slice attribute


class CDEdge(NamedTuple):
    parents: tuple[Node, ...]
    target: str


@dataclass(frozen=True)
class StructureConfig:
    #: minimum uniqueness ratio |distinct A| / |distinct (A,B)| for an FD
    fd_threshold: float = 0.99
    #: attributes with more than this fraction of distinct values per event
    #: are treated as identifiers and excluded from FD discovery
    cardinality_guard: float = 0.95
    #: maximum number of CD parents per attribute
    k_max: int = 2
    cd_score: str = "penalized-loglik"

    def __post_init__(self):
        if not (0 < self.fd_threshold <= 1):
            raise ValueError("fd_threshold must be in (0, 1]")
        if not (0 < self.cardinality_guard <= 1):
            raise ValueError("cardinality_guard must be in (0, 1]")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")


@dataclass(frozen=True)
class DependencyGraph:
    attributes: tuple[str, ...]
    fd_edges: tuple[FDEdge, ...]
    cd_edges: tuple[CDEdge, ...]

    def fd_edges_for(self, target: str) -> tuple[FDEdge, ...]:
        return tuple(e for e in self.fd_edges if e.target == target)

    def cd_edge_for(self, target: str) -> CDEdge | None:
        for e in self.cd_edges:
            if e.target == target:
                return e
        return None

    def to_dict(self) -> dict:
        return {
            "attributes": list(self.attributes),
            "fd_edges": [
                {"source_attr": e.source.attr, "source_slice": e.source.slice, "target": e.target}
                for e in self.fd_edges
            ],
            "cd_edges": [
                {"parents": [{"attr": p.attr, "slice": p.slice} for p in e.parents], "target": e.target}
                for e in self.cd_edges
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DependencyGraph":
        return cls(
            attributes=tuple(doc["attributes"]),
            fd_edges=tuple(
                FDEdge(Node(e["source_attr"], e["source_slice"]), e["target"]) for e in doc["fd_edges"]
            ),
            cd_edges=tuple(
                CDEdge(tuple(Node(p["attr"], p["slice"]) for p in e["parents"]), e["target"])
                for e in doc["cd_edges"]
            ),
        )


def _require_categorical(log: EventLog) -> list[str]:
    names = []
    for spec in log.schema.data_attributes:
        if spec.kind != CATEGORICAL:
            raise SchemaError(
                f"attribute {spec.name!r} is numeric; discretize it before structure discovery"
            )
        names.append(spec.name)
    return names


def _consecutive_masks(log: EventLog) -> tuple[np.ndarray, np.ndarray]:
    """Row indices of (previous, current) positions across consecutive events."""
    starts = log.offsets[:-1]
    n = log.n_events
    is_start = np.zeros(n, dtype=bool)
    is_start[starts] = True
    cur = np.flatnonzero(~is_start)
    return cur - 1, cur


def _pair_stats(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    """(#distinct antecedent values, #distinct pairs) over the given columns."""
    stride = int(b.max()) + 1 if b.size else 1
    keys = a.astype(np.int64) * stride + b.astype(np.int64)
    return int(np.unique(a).size), int(np.unique(keys).size)


def discover_fds(train: EventLog, config: StructureConfig | None = None) -> list[FDEdge]:
    """Functional dependencies over same-event and consecutive-event pairs.

    An edge A -> B is emitted when the uniqueness ratio
    ``|distinct A| / |distinct (A, B) pairs|`` reaches the configured
    threshold.  Identifier-like attributes (distinct count above the
    cardinality guard) never participate.
    """
    config = config or StructureConfig()
    if train.n_events == 0:
        raise ValueError("empty training log")
    names = _require_categorical(train)

    n = train.n_events
    eligible = [
        name for name in names
        if np.unique(train.columns[name]).size <= config.cardinality_guard * n
    ]

    prev_rows, cur_rows = _consecutive_masks(train)
    edges: list[FDEdge] = []
    for a_name in eligible:
        col_a = train.columns[a_name]
        for b_name in eligible:
            col_b = train.columns[b_name]
            if a_name != b_name:
                n_a, n_pairs = _pair_stats(col_a, col_b)
                if n_a / n_pairs >= config.fd_threshold:
                    edges.append(FDEdge(Node(a_name, CURRENT), b_name))
            if prev_rows.size:
                n_a, n_pairs = _pair_stats(col_a[prev_rows], col_b[cur_rows])
                if n_a / n_pairs >= config.fd_threshold:
                    edges.append(FDEdge(Node(a_name, PREVIOUS), b_name))
    return edges


def _creates_cycle(edges_current: set[tuple[str, str]], new_edge: tuple[str, str]) -> bool:
    """Would adding new_edge close a cycle among current-slice edges?"""
    src, dst = new_edge
    if src == dst:
        return True
    adjacency: dict[str, set[str]] = {}
    for s, d in edges_current | {new_edge}:
        adjacency.setdefault(s, set()).add(d)
    # DFS from dst looking for src
    stack, seen = [dst], set()
    while stack:
        node = stack.pop()
        if node == src:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency.get(node, ()))
    return False


def _prune_fd_cycles(edges: list[FDEdge]) -> list[FDEdge]:
    """Drop current-slice FDs that would close a cycle (kept in name order)."""
    kept: list[FDEdge] = []
    current: set[tuple[str, str]] = set()
    for edge in sorted(edges, key=lambda e: (e.source.attr, e.target, e.source.slice)):
        if edge.source.slice == CURRENT:
            pair = (edge.source.attr, edge.target)
            if _creates_cycle(current, pair):
                continue
            current.add(pair)
        kept.append(edge)
    return kept


def _tuple_keys(columns: list[np.ndarray], sizes: list[int]) -> np.ndarray:
    keys = np.zeros(len(columns[0]) if columns else 0, dtype=np.int64)
    for col, size in zip(columns, sizes):
        keys = keys * size + col.astype(np.int64)
    return keys


class _CDCounter:
    """Count-based penalized log-likelihood scoring for candidate parent sets."""

    def __init__(self, log: EventLog, names: list[str]):
        self.n = log.n_events
        self.cur = {name: log.columns[name].astype(np.int64) for name in names}
        self.prev = {}
        self.sizes = {}
        starts = log.offsets[:-1]
        for name in names:
            col = self.cur[name]
            size = int(col.max()) + 1 if col.size else 1
            prev = np.empty_like(col)
            prev[1:] = col[:-1]
            prev[starts] = size  # start-of-trace sentinel code
            self.prev[name] = prev
            self.sizes[name] = size + 1  # account for the sentinel

    def column(self, node: Node) -> np.ndarray:
        return self.cur[node.attr] if node.slice == CURRENT else self.prev[node.attr]

    def score(self, target: str, parents: tuple[Node, ...]) -> float:
        """sum over events of log P(target | parents), MLE, minus free parameters."""
        child = self.cur[target]
        n_child = int(np.unique(child).size)
        if parents:
            cols = [self.column(p) for p in parents]
            sizes = [self.sizes[p.attr] for p in parents]
            keys = _tuple_keys(cols, sizes)
        else:
            keys = np.zeros(self.n, dtype=np.int64)
        _, tuple_inv, tuple_counts = np.unique(keys, return_inverse=True, return_counts=True)
        pair_keys = tuple_inv.astype(np.int64) * (int(child.max()) + 1) + child
        _, pair_inv, pair_counts = np.unique(pair_keys, return_inverse=True, return_counts=True)

        n_pair = pair_counts[pair_inv].astype(np.float64)
        n_tuple = tuple_counts[tuple_inv].astype(np.float64)
        loglik = float(np.log(n_pair / n_tuple).sum())
        free_params = tuple_counts.size * (n_child - 1)
        return loglik - free_params


def discover_cds(train: EventLog, fds: list[FDEdge],
                 config: StructureConfig | None = None) -> list[CDEdge]:
    """Greedy parent selection per attribute by penalized log-likelihood.

    Candidates are every previous-slice attribute plus current-slice
    attributes that keep the current-slice graph acyclic; sources already
    linked to the target by an FD are ineligible.  Search stops when no
    candidate improves the score or ``k_max`` parents are reached.  Ties
    prefer previous-slice parents, then lexicographic attribute order.
    """
    config = config or StructureConfig()
    if train.n_events == 0:
        raise ValueError("empty training log")
    names = _require_categorical(train)
    counter = _CDCounter(train, names)

    fd_pairs = {(e.source, e.target) for e in fds}
    current_edges = {(e.source.attr, e.target) for e in fds if e.source.slice == CURRENT}

    edges: list[CDEdge] = []
    for target in names:
        parents: tuple[Node, ...] = ()
        best = counter.score(target, parents)
        while len(parents) < config.k_max:
            candidates = []
            for name in names:
                for slc in (PREVIOUS, CURRENT):
                    node = Node(name, slc)
                    if node in parents or (node, target) in fd_pairs:
                        continue
                    if slc == CURRENT and (
                        name == target or _creates_cycle(current_edges, (name, target))
                    ):
                        continue
                    candidates.append(node)
            scored = []
            for node in candidates:
                s = counter.score(target, parents + (node,))
                # prefer previous-slice then lexicographic name on ties
                scored.append((-s, 0 if node.slice == PREVIOUS else 1, node.attr, node))
            scored.sort(key=lambda item: item[:3])
            if not scored or -scored[0][0] <= best:
                break
            best = -scored[0][0]
            chosen = scored[0][3]
            parents = parents + (chosen,)
            if chosen.slice == CURRENT:
                current_edges.add((chosen.attr, target))
        if parents:
            edges.append(CDEdge(parents, target))
    return edges


def build_structure(train: EventLog, config: StructureConfig | None = None) -> DependencyGraph:
    """Full dependency graph: FDs first, then CDs over the remaining pairs."""
    config = config or StructureConfig()
    fds = _prune_fd_cycles(discover_fds(train, config))
    cds = discover_cds(train, fds, config)
    names = tuple(a.name for a in train.schema.data_attributes)
    return DependencyGraph(attributes=names, fd_edges=tuple(fds), cd_edges=tuple(cds))
