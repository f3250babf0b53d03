"""Truncated uniform random walks on single snapshots and skip-gram contexts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .temporal_graph import TemporalGraph


@dataclass(frozen=True)
class Walk:
    nodes: tuple[int, ...]
    t: int

    def __len__(self):
        return len(self.nodes)


@dataclass
class WalkSet:
    """Walks of one snapshot stored as a ``(n_walks, walk_length)`` matrix.

    Rows are padded with ``-1`` after a walk hits a dead end.
    """

    paths: np.ndarray
    t: int
    walks_per_node: int
    walk_length: int
    seed: object

    def __len__(self):
        return len(self.paths)

    def __iter__(self) -> Iterator[Walk]:
        for row in self.paths:
            yield Walk(tuple(int(v) for v in row[row >= 0]), self.t)

    @property
    def lengths(self) -> np.ndarray:
        return (self.paths >= 0).sum(axis=1)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, (tuple, list)):
        return np.random.default_rng(np.random.SeedSequence([int(s) for s in seed]))
    return np.random.default_rng(seed)


def generate_walks(g: TemporalGraph, t: int, walks_per_node: int, walk_length: int, seed=0) -> WalkSet:
    """``walks_per_node`` walks from every node with an edge at ``t``.

    Walks are produced in rounds; each round visits the start nodes in a fresh
    random order.  All walkers of a round advance together.
    """
    if walks_per_node < 1 or walk_length < 1:
        raise ValueError("walks_per_node and walk_length must be >= 1")
    rng = _rng(seed)
    snap = g.snapshot(t)
    deg = snap.degrees
    starts = np.flatnonzero(deg > 0)
    if len(starts) == 0:
        return WalkSet(np.zeros((0, walk_length), np.int64), t, walks_per_node, walk_length, seed)

    order = np.concatenate([rng.permutation(starts) for _ in range(walks_per_node)])
    paths = np.full((len(order), walk_length), -1, dtype=np.int64)
    paths[:, 0] = order
    cur = order.copy()
    alive = np.ones(len(order), dtype=bool)
    for step in range(1, walk_length):
        d = deg[cur]
        alive &= d > 0
        r = rng.random(len(cur))
        # dead walkers still consume a draw so the stream stays aligned
        pick = snap.indptr[cur] + np.minimum((r * d).astype(np.int64), np.maximum(d - 1, 0))
        nxt = np.where(alive, snap.indices[np.minimum(pick, max(len(snap.indices) - 1, 0))], -1)
        paths[:, step] = nxt
        cur = np.where(alive, nxt, cur)
    return WalkSet(paths, t, walks_per_node, walk_length, seed)


def contexts(walk: Walk | Sequence[int], window: int) -> list[tuple[int, int]]:
    """Ordered (center, context) pairs within ``window`` positions."""
    if window < 1:
        raise ValueError("window must be >= 1")
    nodes = walk.nodes if isinstance(walk, Walk) else tuple(walk)
    out = []
    for p, c in enumerate(nodes):
        for q in range(max(0, p - window), min(len(nodes), p + window + 1)):
            if q != p and nodes[q] != c:
                out.append((c, nodes[q]))
    return out


def _offset_template(length: int, window: int) -> tuple[np.ndarray, np.ndarray]:
    ps, qs = [], []
    for p in range(length):
        for q in range(max(0, p - window), min(length, p + window + 1)):
            if q != p:
                ps.append(p)
                qs.append(q)
    return np.asarray(ps, np.int64), np.asarray(qs, np.int64)


def context_pairs(walks: WalkSet, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised :func:`contexts` over a whole walk set.

    Returns ``centers``, ``ctx`` and ``walk_ptr`` where pairs of walk ``w``
    occupy ``walk_ptr[w]:walk_ptr[w+1]``.  Pair order matches calling
    :func:`contexts` walk by walk.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    n_walks = len(walks)
    if n_walks == 0:
        z = np.zeros(0, np.int64)
        return z, z, np.zeros(1, np.int64)
    P, Q = _offset_template(walks.walk_length, window)
    c = walks.paths[:, P]
    x = walks.paths[:, Q]
    keep = (c >= 0) & (x >= 0) & (c != x)
    walk_ptr = np.zeros(n_walks + 1, np.int64)
    np.cumsum(keep.sum(axis=1), out=walk_ptr[1:])
    return c[keep], x[keep], walk_ptr
