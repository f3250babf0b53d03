"""Snapshot-structured temporal networks.

A temporal network is a fixed node universe plus one undirected edge set per
time step.  Each edge set is stored in CSR form (``indptr``/``indices``) so
that random walks can be vectorised over many walkers at once.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

EPS_DRIFT = 1e-3


class GraphFormatError(ValueError):
    """Malformed edge-list or label file."""


class EmptyGraphError(ValueError):
    """No usable edges remained after filtering."""


class EmptyTableError(ValueError):
    """Negative-sampling table requested for a snapshot without edges."""


@dataclass(frozen=True)
class SnapshotSpec:
    """How the time column of an edge list maps to snapshot indices.

    ``mode="by-id"`` takes the column as an integer snapshot id,
    ``mode="by-interval"`` floor-divides raw timestamps by ``width``.
    """

    mode: str = "by-id"
    width: float | None = None

    def __post_init__(self):
        if self.mode not in ("by-id", "by-interval"):
            raise ValueError(f"unknown snapshot mode {self.mode!r}")
        if self.mode == "by-interval" and (self.width is None or self.width <= 0):
            raise ValueError("by-interval slicing needs a positive width")

    @classmethod
    def parse(cls, text: str) -> "SnapshotSpec":
        # "by-id" or "by-interval(3600)"
        text = text.strip()
        if text == "by-id":
            return cls("by-id")
        if text.startswith("by-interval(") and text.endswith(")"):
            return cls("by-interval", float(text[len("by-interval("):-1]))
        raise ValueError(f"cannot parse snapshot spec {text!r}")

    @property
    def text(self) -> str:
        return "by-id" if self.mode == "by-id" else f"by-interval({self.width:g})"

    def bin(self, raw: str) -> int:
        if self.mode == "by-id":
            return int(raw)
        return int(np.floor(float(raw) / self.width))


class EdgeSet:
    """Undirected, unweighted edge set over nodes ``0..n-1`` in CSR layout."""

    def __init__(self, n_nodes: int, edges: Iterable[tuple[int, int]] | np.ndarray = ()):
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        arr = arr[arr[:, 0] != arr[:, 1]]
        lo = np.minimum(arr[:, 0], arr[:, 1])
        hi = np.maximum(arr[:, 0], arr[:, 1])
        und = np.unique(np.stack([lo, hi], axis=1), axis=0) if len(arr) else arr
        self.n_nodes = int(n_nodes)
        self.edge_count = int(len(und))
        both = np.concatenate([und, und[:, ::-1]]) if len(und) else und
        order = np.lexsort((both[:, 1], both[:, 0])) if len(both) else np.zeros(0, np.int64)
        both = both[order]
        counts = np.bincount(both[:, 0], minlength=self.n_nodes) if len(both) else np.zeros(self.n_nodes, np.int64)
        self.indptr = np.zeros(self.n_nodes + 1, dtype=np.int64)
        np.cumsum(counts, out=self.indptr[1:])
        self.indices = both[:, 1].astype(np.int64).copy() if len(both) else np.zeros(0, np.int64)

    def neighbors(self, v: int) -> np.ndarray:
        return self.indices[self.indptr[v]:self.indptr[v + 1]]

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def adjacency(self) -> dict[int, list[int]]:
        return {v: self.neighbors(v).tolist() for v in range(self.n_nodes)}

    def has_edge(self, i: int, j: int) -> bool:
        nb = self.neighbors(i)
        k = np.searchsorted(nb, j)
        return bool(k < len(nb) and nb[k] == j)

    def edges(self) -> np.ndarray:
        """Each undirected edge once, as ``(i, j)`` rows with ``i < j``."""
        src = np.repeat(np.arange(self.n_nodes), self.degrees)
        mask = src < self.indices
        return np.stack([src[mask], self.indices[mask]], axis=1)

    def __eq__(self, other):
        return (isinstance(other, EdgeSet) and self.n_nodes == other.n_nodes
                and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices))

    def __repr__(self):
        return f"EdgeSet(n_nodes={self.n_nodes}, edge_count={self.edge_count})"


@dataclass
class TemporalGraph:
    """Node universe plus snapshots ``E^1..E^T`` (1-based via :meth:`snapshot`)."""

    n_nodes: int
    snapshots: list[EdgeSet]
    node_names: list[str] = field(default_factory=list)
    bin_ids: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.snapshots:
            raise EmptyGraphError("a temporal graph needs at least one snapshot")
        if not self.node_names:
            self.node_names = [str(i) for i in range(self.n_nodes)]
        if len(self.node_names) != self.n_nodes:
            raise ValueError("node_names length does not match n_nodes")
        self._index = {name: i for i, name in enumerate(self.node_names)}

    @classmethod
    def from_edges(cls, n_nodes: int, per_snapshot: Sequence, node_names=None) -> "TemporalGraph":
        return cls(n_nodes, [EdgeSet(n_nodes, e) for e in per_snapshot], list(node_names or []))

    @property
    def T(self) -> int:
        return len(self.snapshots)

    def snapshot(self, t: int) -> EdgeSet:
        if not 1 <= t <= self.T:
            raise IndexError(f"snapshot {t} outside 1..{self.T}")
        return self.snapshots[t - 1]

    def node_id(self, name: str) -> int:
        return self._index[name]

    def has_node(self, name: str) -> bool:
        return name in self._index


def load_edge_list(path, slicing: SnapshotSpec | str = "by-id") -> TemporalGraph:
    """Read ``src<TAB>dst<TAB>time`` records into a :class:`TemporalGraph`.

    Snapshot bins are renumbered contiguously from 1 in increasing bin order;
    empty bins never produce snapshots.  Node ids are assigned in order of
    first appearance.
    """
    if isinstance(slicing, str):
        slicing = SnapshotSpec.parse(slicing)
    names: dict[str, int] = {}
    records: list[tuple[int, int, int]] = []
    self_loops = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise GraphFormatError(f"{path}:{lineno}: expected 3 tab-separated fields, got {len(parts)}")
            src, dst, raw_t = (p.strip() for p in parts)
            if not src or not dst:
                raise GraphFormatError(f"{path}:{lineno}: empty node id")
            try:
                b = slicing.bin(raw_t)
            except ValueError:
                raise GraphFormatError(f"{path}:{lineno}: bad time value {raw_t!r}") from None
            if src == dst:
                self_loops += 1
                continue
            i = names.setdefault(src, len(names))
            j = names.setdefault(dst, len(names))
            records.append((i, j, b))
    if self_loops:
        logger.warning("dropped %d self-loop record(s) from %s", self_loops, path)
    if not records:
        raise EmptyGraphError(f"{path}: no edges left after filtering")

    arr = np.asarray(records, dtype=np.int64)
    bins = np.unique(arr[:, 2])
    t_index = np.searchsorted(bins, arr[:, 2])
    n = len(names)
    snaps = [EdgeSet(n, arr[t_index == k, :2]) for k in range(len(bins))]
    return TemporalGraph(n, snaps, list(names), bins.tolist())


def write_edge_list(g: TemporalGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in range(1, g.T + 1):
            for i, j in g.snapshot(t).edges():
                fh.write(f"{g.node_names[i]}\t{g.node_names[j]}\t{t}\n")


def static_edges(g: TemporalGraph) -> EdgeSet:
    """Union of all snapshot edge sets."""
    parts = [s.edges() for s in g.snapshots]
    return EdgeSet(g.n_nodes, np.concatenate(parts) if parts else np.zeros((0, 2), np.int64))


def jaccard_drift(prev: Iterable[int], cur: Iterable[int]) -> float:
    a, b = set(prev), set(cur)
    union = a | b
    if not union:
        return 0.0
    return 1.0 - len(a & b) / len(union)


def structural_drift(g: TemporalGraph, t: int, v: int) -> float:
    """Jaccard distance between the neighbour sets of ``v`` at ``t-1`` and ``t``."""
    if not 2 <= t <= g.T:
        raise IndexError(f"drift needs 2 <= t <= {g.T}, got {t}")
    return jaccard_drift(g.snapshot(t - 1).neighbors(v).tolist(), g.snapshot(t).neighbors(v).tolist())


def drift_vector(g: TemporalGraph, t: int) -> np.ndarray:
    """Drift of every node at ``t`` (unclamped)."""
    if not 2 <= t <= g.T:
        raise IndexError(f"drift needs 2 <= t <= {g.T}, got {t}")
    prev, cur = g.snapshot(t - 1), g.snapshot(t)
    out = np.zeros(g.n_nodes)
    for v in range(g.n_nodes):
        a, b = prev.neighbors(v), cur.neighbors(v)
        if len(a) == 0 and len(b) == 0:
            continue
        inter = len(np.intersect1d(a, b, assume_unique=True))
        out[v] = 1.0 - inter / (len(a) + len(b) - inter)
    return out


class SamplingTable:
    """Cumulative ``degree**power`` weights for one snapshot."""

    def __init__(self, weights: np.ndarray, t: int):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.sum() <= 0:
            raise EmptyTableError(f"snapshot {t} has no node with positive degree")
        self.t = t
        self.weights = weights
        self.cumulative = np.cumsum(weights)
        self.total = float(self.cumulative[-1])
        self.normalised = self.cumulative / self.total
        self.normalised[-1] = 1.0
        # bucket b covers u in [b/M, (b+1)/M); guide[b] bounds the search from below
        M = 4 * len(weights)
        edges = np.arange(M + 1) / M
        self.guide = np.minimum(np.searchsorted(self.normalised, edges, side="right"),
                                len(weights) - 1).astype(np.int64)
        self.guide[-1] = len(weights) - 1

    @property
    def probabilities(self) -> np.ndarray:
        return self.weights / self.total

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        u = rng.random(size)
        idx = np.searchsorted(self.normalised, u, side="right")
        return np.minimum(idx, len(self.weights) - 1)


def build_negative_table(g: TemporalGraph, t: int, power: float = 0.75) -> SamplingTable:
    deg = g.snapshot(t).degrees.astype(np.float64)
    w = np.zeros_like(deg)
    active = deg > 0
    w[active] = deg[active] ** power
    return SamplingTable(w, t)


def read_node_labels(path, g: TemporalGraph):
    """``node<TAB>label`` rows -> (node ids, raw labels, skipped count)."""
    ids, labels, skipped = [], [], 0
    for lineno, parts in _rows(path):
        if len(parts) != 2:
            raise GraphFormatError(f"{path}:{lineno}: expected node<TAB>label")
        if not g.has_node(parts[0]):
            skipped += 1
            continue
        ids.append(g.node_id(parts[0]))
        labels.append(parts[1])
    return np.asarray(ids, dtype=np.int64), labels, skipped


def read_edge_labels(path, g: TemporalGraph):
    """``src<TAB>dst<TAB>label`` rows -> (edge array, raw labels, skipped count).

    Edges whose endpoints are unknown or that never occur in any snapshot are
    skipped.
    """
    union = static_edges(g)
    edges, labels, skipped = [], [], 0
    for lineno, parts in _rows(path):
        if len(parts) != 3:
            raise GraphFormatError(f"{path}:{lineno}: expected src<TAB>dst<TAB>label")
        a, b, lab = parts
        if not (g.has_node(a) and g.has_node(b)):
            skipped += 1
            continue
        i, j = g.node_id(a), g.node_id(b)
        if not union.has_edge(i, j):
            skipped += 1
            continue
        edges.append((i, j))
        labels.append(lab)
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2), labels, skipped


def _rows(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n\r")
            if not line.strip() or line.startswith("#"):
                continue
            yield lineno, [p.strip() for p in line.split("\t")]
