"""Synthetic temporal networks with planted evolutionary patterns.

Nodes are split into ``c`` equal communities.  Inside each community every
node gets a temporal role (periodic, trend or stable).  An intra-community
pair is periodic if either endpoint is periodic, otherwise trend if either
endpoint is trend, otherwise stable.  Each edge class is therefore tied to
the behaviour of its endpoints over time:

* stable   - present with probability ``p_in`` in every snapshot
* periodic - present with probability ``p_in`` when ``t mod P < duty*P``
* trend    - present with probability ``p_in * t / T``

Inter-community pairs are noise edges present with probability ``p_out``;
they carry no edge label.
"""
from __future__ import annotations

import json
import logging
import warnings
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .temporal_graph import EdgeSet, TemporalGraph, write_edge_list

logger = logging.getLogger(__name__)

EDGE_CLASSES = ("stable", "periodic", "trend")
STABLE, PERIODIC, TREND = range(3)


@dataclass
class SynthSpec:
    n: int = 200
    c: int = 4
    T: int = 24
    p_in: float = 0.3
    p_out: float = 0.01
    rho: float = 0.5
    period: int = 4
    duty: float = 0.5
    trend: float = 0.25
    seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n < 2 or self.c < 1 or self.c > self.n:
            raise ValueError("need n >= 2 and 1 <= c <= n")
        if self.T < 1:
            raise ValueError("T must be >= 1")
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ValueError(f"need 0 <= p_out < p_in <= 1 (p_in={self.p_in}, p_out={self.p_out})")
        if self.period < 2:
            raise ValueError("period must be >= 2")
        if not 0 <= self.rho <= 1 or not 0 <= self.trend <= 1 or self.rho + self.trend > 1:
            raise ValueError("rho and trend must be fractions with rho + trend <= 1")
        if not 0 < self.duty < 1:
            raise ValueError("duty must lie in (0, 1)")


@dataclass
class SynthDataset:
    graph: TemporalGraph
    communities: np.ndarray          # node -> community
    roles: np.ndarray | None         # node -> role (periodic datasets only)
    edge_pairs: np.ndarray           # labelled static edges (i < j)
    edge_labels: np.ndarray          # index into EDGE_CLASSES
    spec: dict

    def node_label_rows(self):
        return [(self.graph.node_names[v], f"c{self.communities[v]}") for v in range(self.graph.n_nodes)]

    def edge_label_rows(self):
        names = self.graph.node_names
        return [(names[i], names[j], EDGE_CLASSES[l]) for (i, j), l in zip(self.edge_pairs, self.edge_labels)]

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "edges": out / "edges.tsv",
            "node_labels": out / "node_labels.tsv",
            "edge_labels": out / "edge_labels.tsv",
            "spec": out / "spec.json",
        }
        write_edge_list(self.graph, paths["edges"])
        with open(paths["node_labels"], "w", encoding="utf-8") as fh:
            fh.writelines(f"{a}\t{b}\n" for a, b in self.node_label_rows())
        with open(paths["edge_labels"], "w", encoding="utf-8") as fh:
            fh.writelines(f"{a}\t{b}\t{c}\n" for a, b, c in self.edge_label_rows())
        with open(paths["spec"], "w", encoding="utf-8") as fh:
            json.dump(self.spec, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return {k: str(v) for k, v in paths.items()}


def _communities(n: int, c: int) -> np.ndarray:
    return (np.arange(n) * c) // n


def _check_degree(n, c, p_in, p_out):
    n_c = n / c
    expected = p_in * (n_c - 1) + p_out * (n - n_c)
    if expected < 1:
        warnings.warn(f"expected degree per snapshot is {expected:.2f} < 1; embeddings will be noisy",
                      RuntimeWarning, stacklevel=3)


def synth_sbm(n: int, c: int, p_in: float, p_out: float, T: int, seed: int = 0) -> SynthDataset:
    """Snapshots drawn i.i.d. from one stochastic block model."""
    SynthSpec(n=n, c=c, T=T, p_in=p_in, p_out=p_out, seed=seed)
    _check_degree(n, c, p_in, p_out)
    rng = np.random.default_rng(seed)
    comm = _communities(n, c)
    iu, ju = np.triu_indices(n, 1)
    prob = np.where(comm[iu] == comm[ju], p_in, p_out)
    snaps = []
    for _ in range(T):
        keep = rng.random(len(iu)) < prob
        snaps.append(EdgeSet(n, np.stack([iu[keep], ju[keep]], axis=1)))
    g = TemporalGraph(n, snaps, [f"v{i}" for i in range(n)])
    spec = dict(kind="sbm", n=n, c=c, T=T, p_in=p_in, p_out=p_out, seed=seed)
    return SynthDataset(g, comm, None, np.zeros((0, 2), np.int64), np.zeros(0, np.int64), spec)


def assign_roles(comm: np.ndarray, rho: float, trend: float, rng: np.random.Generator) -> np.ndarray:
    roles = np.full(len(comm), STABLE, dtype=np.int64)
    for k in np.unique(comm):
        members = rng.permutation(np.flatnonzero(comm == k))
        n_per = int(round(rho * len(members)))
        n_tr = int(round(trend * len(members)))
        roles[members[:n_per]] = PERIODIC
        roles[members[n_per:n_per + n_tr]] = TREND
    return roles


def pair_classes(role_a, role_b):
    ra, rb = np.asarray(role_a), np.asarray(role_b)
    return np.where((ra == PERIODIC) | (rb == PERIODIC), PERIODIC,
                    np.where((ra == TREND) | (rb == TREND), TREND, STABLE))


def periodic_on(t: int, period: int, duty: float) -> bool:
    return (t % period) < duty * period


def synth_periodic(spec: SynthSpec | None = None, seed: int | None = None) -> SynthDataset:
    """Temporal network with planted periodic, trend and stable edges."""
    spec = spec or SynthSpec()
    if seed is not None:
        spec = SynthSpec(**{**asdict(spec), "seed": seed})
    n, T = spec.n, spec.T
    _check_degree(n, spec.c, spec.p_in, spec.p_out)
    rng = np.random.default_rng(spec.seed)
    comm = _communities(n, spec.c)
    roles = assign_roles(comm, spec.rho, spec.trend, rng)

    iu, ju = np.triu_indices(n, 1)
    intra = comm[iu] == comm[ju]
    pair_class = pair_classes(roles[iu], roles[ju])
    seen = np.zeros(len(iu), dtype=bool)
    snaps = []
    for t in range(1, T + 1):
        prob = np.full(len(iu), spec.p_out)
        prob[intra & (pair_class == STABLE)] = spec.p_in
        prob[intra & (pair_class == PERIODIC)] = spec.p_in if periodic_on(t, spec.period, spec.duty) else 0.0
        prob[intra & (pair_class == TREND)] = spec.p_in * t / T
        keep = rng.random(len(iu)) < prob
        seen |= keep
        snaps.append(EdgeSet(n, np.stack([iu[keep], ju[keep]], axis=1)))

    labelled = seen & intra
    g = TemporalGraph(n, snaps, [f"v{i}" for i in range(n)])
    spec_d = dict(kind="periodic", **asdict(spec))
    return SynthDataset(g, comm, roles, np.stack([iu[labelled], ju[labelled]], axis=1),
                        pair_class[labelled], spec_d)
