"""Per-snapshot embeddings, the relative-position decoder, and incremental training.

Loss terms for snapshot ``t`` (all vectors below are time-``t`` vectors)::

    struct   = -sum_pairs [log s(u_i.u_j) + sum_n log s(-u_i.u_n)]
    temporal =  sum_pairs 1 - cos(u_i - u_j, s(W [f_i ; f_j]))
    smooth   =  sum_i ||u_i - u_i^{t-1}|| / max(drift_i, eps)

where ``s`` is the logistic sigmoid and ``f_i`` the temporal features of
node ``i``'s frozen history.  The numpy functions here are reference
implementations with exact gradients; :func:`train_snapshot` runs the
compiled per-pair loop in :mod:`epne._sgd`.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import _sgd
from .kernels import FEATURE_MODES, KernelBank, batch_features, feature_dim
from .temporal_graph import (EPS_DRIFT, EmptyTableError, SamplingTable, TemporalGraph,
                             build_negative_table, drift_vector)
from .walks import context_pairs, generate_walks

logger = logging.getLogger(__name__)

EPS_NORM = 1e-8


class ConfigError(ValueError):
    """Invalid hyperparameter; ``field`` names the offending key."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class TrainingAborted(RuntimeError):
    pass


@dataclass
class TrainConfig:
    d: int = 32
    history_len: int = 8
    scales: int = 3
    decay_rate: float = 0.5
    custom_scales: tuple[float, ...] | None = None
    features: str = "both"
    alpha: float = 1.0
    beta: float = 0.01
    negatives: int = 5
    neg_power: float = 0.75
    walks_per_node: int = 10
    walk_length: int = 10
    window: int = 5
    epochs: int = 10
    lr: float = 0.025
    decoder_lr: float = 0.025
    decoder_chunk: int = 4096
    init_noise: float = 1e-3
    eps_drift: float = EPS_DRIFT
    raw_cos: bool = False
    regenerate_walks: bool = True
    smooth_per_walk: bool = False
    workers: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.custom_scales is not None:
            self.custom_scales = tuple(float(x) for x in self.custom_scales) or None
        self.validate()

    def validate(self):
        positive_ints = ("d", "history_len", "scales", "negatives", "walks_per_node",
                         "walk_length", "window", "epochs", "decoder_chunk", "workers")
        for name in positive_ints:
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        for name in ("alpha", "beta", "init_noise", "neg_power"):
            if not getattr(self, name) >= 0:
                raise ConfigError(name, "must be >= 0")
        for name in ("lr", "decoder_lr", "decay_rate", "eps_drift"):
            if not getattr(self, name) > 0:
                raise ConfigError(name, "must be > 0")
        if self.features not in FEATURE_MODES:
            raise ConfigError("features", f"must be one of {FEATURE_MODES}")
        try:
            self.kernel_bank()
        except ValueError as exc:
            raise ConfigError("scales" if not self.custom_scales else "custom_scales", str(exc)) from None

    def kernel_bank(self) -> KernelBank:
        return KernelBank.build(self.history_len, self.scales, self.decay_rate, self.custom_scales)

    @property
    def deepwalk_equivalent(self) -> bool:
        return self.alpha == 0 and self.beta == 0

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["custom_scales"] is not None:
            out["custom_scales"] = list(out["custom_scales"])
        return out

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


class EmbeddingStore:
    """``u_i^t`` for ``t = 1..T``; snapshots before the current one are frozen."""

    def __init__(self, n_nodes: int, T: int, d: int):
        self.n_nodes, self.T, self.d = n_nodes, T, d
        self.data = np.zeros((T, n_nodes, d))
        self.current = 0  # last snapshot that has been initialised

    def __getitem__(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.current:
            raise IndexError(f"snapshot {t} not trained (current={self.current})")
        view = self.data[t - 1]
        if t < self.current:
            view = view.view()
            view.flags.writeable = False
        return view

    def begin(self, t: int, rng: np.random.Generator, noise: float = 1e-3) -> np.ndarray:
        """Initialise the time-``t`` slice and return it (writable)."""
        if t != self.current + 1:
            raise ValueError(f"snapshots must be trained in order; expected {self.current + 1}, got {t}")
        if t == 1:
            half = 0.5 / self.d
            self.data[0] = rng.uniform(-half, half, size=(self.n_nodes, self.d))
        else:
            self.data[t - 1] = self.data[t - 2] + rng.normal(0.0, noise, size=(self.n_nodes, self.d))
        self.current = t
        return self.data[t - 1]

    def history(self, t: int, h: int) -> np.ndarray:
        """Stacked ``(m, n_nodes, d)`` window ``u^{t-m}..u^{t-1}`` with ``m = min(h, t-1)``."""
        lo = max(1, t - h)
        return self.data[lo - 1:t - 1]

    def window(self, v: int, t: int, h: int) -> np.ndarray:
        return self.history(t, h)[:, v, :]

    def is_finite(self) -> bool:
        return bool(np.isfinite(self.data[:self.current]).all())


@dataclass
class Decoder:
    W: np.ndarray  # (d, 2 * d_s)

    @classmethod
    def init(cls, d: int, d_s: int, rng: np.random.Generator) -> "Decoder":
        return cls(rng.normal(0.0, 1.0 / math.sqrt(2 * d_s), size=(d, 2 * d_s)))

    @property
    def d_s(self) -> int:
        return self.W.shape[1] // 2

    def halves(self) -> tuple[np.ndarray, np.ndarray]:
        return self.W[:, :self.d_s], self.W[:, self.d_s:]


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=np.float64)))


def log_sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return -np.logaddexp(0.0, -x)


def decode_relpos(s_i: np.ndarray, s_j: np.ndarray, dec: Decoder | np.ndarray) -> np.ndarray:
    W = dec.W if isinstance(dec, Decoder) else np.asarray(dec)
    s_i, s_j = np.asarray(s_i), np.asarray(s_j)
    if s_i.shape[-1] != W.shape[1] // 2 or s_j.shape[-1] != W.shape[1] // 2:
        raise ValueError(f"feature length {s_i.shape[-1]} does not match decoder width {W.shape[1]}")
    return sigmoid(np.concatenate([s_i, s_j], axis=-1) @ W.T)


def draw_negatives(table: SamplingTable, centers, ctx, k: int, rng: np.random.Generator) -> np.ndarray:
    """``k`` negatives per pair, redrawn while they hit the pair's own nodes.

    Draws that cannot avoid the pair (e.g. only two nodes have edges) are
    marked ``-1`` and ignored by the losses.
    """
    centers = np.ascontiguousarray(centers, dtype=np.int64)
    ctx = np.ascontiguousarray(ctx, dtype=np.int64)
    uniforms = rng.random((len(centers), k))
    pool = rng.random(len(centers) * k // 2 + 64)
    return _sgd.draw_negatives(table.normalised, table.guide, uniforms, pool, centers, ctx)


def struct_loss(pairs, U, negs=None, *, table=None, k=5, rng=None):
    """Negative-sampling skip-gram loss and its gradient w.r.t. ``U``.

    Pass ``negs`` (shape ``(n_pairs, k)``) to freeze sampling; otherwise they
    are drawn from ``table``.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    if negs is None:
        negs = draw_negatives(table, i, j, k, rng)
    negs = np.asarray(negs, dtype=np.int64).reshape(len(pairs), -1)
    grad = np.zeros_like(U)
    pos = np.einsum("pd,pd->p", U[i], U[j])
    loss = -log_sigmoid(pos).sum()
    c = sigmoid(pos) - 1.0
    np.add.at(grad, i, c[:, None] * U[j])
    np.add.at(grad, j, c[:, None] * U[i])
    valid = negs >= 0
    nn = np.where(valid, negs, 0)
    neg = np.einsum("pd,pkd->pk", U[i], U[nn])
    loss -= (log_sigmoid(-neg) * valid).sum()
    cn = sigmoid(neg) * valid
    np.add.at(grad, i, np.einsum("pk,pkd->pd", cn, U[nn]))
    np.add.at(grad, nn.reshape(-1), (cn[:, :, None] * U[i][:, None, :]).reshape(-1, U.shape[1]))
    return float(loss), grad


def temporal_loss(pairs, U, S, W, *, raw_cos=False, eps_norm=EPS_NORM):
    """Cosine relative-position loss.

    Returns ``(loss, grad_U, grad_W, n_skipped)``.  ``S`` holds every node's
    temporal features (rows) and is treated as a constant.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    i, j = pairs[:, 0], pairs[:, 1]
    W = W.W if isinstance(W, Decoder) else W
    d_s = W.shape[1] // 2
    x = U[i] - U[j]
    Z = S[i] @ W[:, :d_s].T + S[j] @ W[:, d_s:].T
    g = sigmoid(Z)
    nx = np.linalg.norm(x, axis=1)
    ng = np.linalg.norm(g, axis=1)
    ok = (nx >= eps_norm) & (ng >= eps_norm)
    x, g, Z, nx, ng, ii, jj = x[ok], g[ok], Z[ok], nx[ok], ng[ok], i[ok], j[ok]
    cos = np.einsum("pd,pd->p", x, g) / (nx * ng)
    sign = 1.0 if raw_cos else -1.0
    loss = float(cos.sum() if raw_cos else (1.0 - cos).sum())
    dx = sign * (g / (nx * ng)[:, None] - (cos / nx ** 2)[:, None] * x)
    dg = sign * (x / (nx * ng)[:, None] - (cos / ng ** 2)[:, None] * g)
    dz = dg * g * (1.0 - g)
    gU = np.zeros_like(U)
    np.add.at(gU, ii, dx)
    np.add.at(gU, jj, -dx)
    gW = np.concatenate([dz.T @ S[ii], dz.T @ S[jj]], axis=1)
    return loss, gU, gW, int((~ok).sum())


def drift_weights(g: TemporalGraph, t: int, eps: float = EPS_DRIFT) -> np.ndarray:
    return np.maximum(drift_vector(g, t), eps)


def smooth_loss(U, U_prev, weights):
    """``sum_i ||u_i - u_prev_i|| / w_i`` and its (sub)gradient.

    ``weights`` are clamped drifts; zero displacement contributes a zero
    gradient.
    """
    diff = U - U_prev
    norm = np.linalg.norm(diff, axis=1)
    loss = float((norm / weights).sum())
    safe = np.where(norm > 0, norm, 1.0)
    grad = np.where(norm[:, None] > 0, diff / (safe * weights)[:, None], 0.0)
    return loss, grad


@dataclass
class EpochStats:
    t: int
    epoch: int
    lr: float
    n_pairs: int
    struct: float
    temporal: float
    smooth: float
    total: float
    temporal_pairs: int = 0
    skipped: int = 0


@dataclass
class LossTrace:
    rows: list[EpochStats] = field(default_factory=list)

    def extend(self, other: "LossTrace"):
        self.rows.extend(other.rows)

    def for_snapshot(self, t: int) -> list[EpochStats]:
        return [r for r in self.rows if r.t == t]

    def totals(self, t: int) -> list[float]:
        return [r.total for r in self.for_snapshot(t)]


def _epoch_lr(cfg: TrainConfig, epoch: int) -> float:
    if cfg.epochs == 1:
        return cfg.lr
    return cfg.lr * (1.0 - 0.9 * epoch / (cfg.epochs - 1))


def _seed(cfg: TrainConfig, *parts: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, *parts]))


# subsystem ids for seed splitting
_INIT, _WALKS, _NEGS, _DECODER = 1, 2, 3, 4


def snapshot_features(store: EmbeddingStore, t: int, cfg: TrainConfig, bank: KernelBank | None = None):
    """Temporal features of every node at ``t`` and a per-node usability mask."""
    bank = bank or cfg.kernel_bank()
    d_s = feature_dim(cfg.d, bank, cfg.features)
    if t < 2:
        return np.zeros((store.n_nodes, d_s)), np.zeros(store.n_nodes, dtype=np.bool_)
    S, degenerate = batch_features(store.history(t, cfg.history_len), bank, cfg.features)
    return S, np.full(store.n_nodes, not degenerate, dtype=np.bool_)


def train_snapshot(g: TemporalGraph, t: int, store: EmbeddingStore, dec: Decoder,
                   cfg: TrainConfig, bank: KernelBank | None = None) -> LossTrace:
    """Fit the time-``t`` embeddings (and keep training ``dec``)."""
    bank = bank or cfg.kernel_bank()
    U = store.begin(t, _seed(cfg, _INIT, t), cfg.init_noise)
    U_prev = store.data[t - 2] if t > 1 else None
    S, temporal_ok = snapshot_features(store, t, cfg, bank)
    use_temporal = cfg.alpha > 0 and bool(temporal_ok.any())
    use_smooth = cfg.beta > 0 and t > 1
    weights = drift_weights(g, t, cfg.eps_drift) if t > 1 else None
    all_nodes = np.arange(g.n_nodes, dtype=np.int64)

    try:
        table = build_negative_table(g, t, cfg.neg_power)
    except EmptyTableError:
        table = None

    W1, W2 = dec.halves()
    A = S @ W1.T
    B = S @ W2.T
    Gi = np.zeros((g.n_nodes, cfg.d))
    Gj = np.zeros((g.n_nodes, cfg.d))

    trace = LossTrace()
    walks = None
    for epoch in range(cfg.epochs):
        lr = _epoch_lr(cfg, epoch)
        if walks is None or cfg.regenerate_walks:
            walks = generate_walks(g, t, cfg.walks_per_node, cfg.walk_length,
                                   (cfg.seed, _WALKS, t, epoch if cfg.regenerate_walks else 0))
        centers, ctx, walk_ptr = context_pairs(walks, cfg.window)
        if table is not None and len(centers):
            negs = draw_negatives(table, centers, ctx, cfg.negatives, _seed(cfg, _NEGS, t, epoch))
        else:
            negs = np.zeros((0, cfg.negatives), np.int64)

        stats = np.zeros(4)
        if cfg.smooth_per_walk and use_smooth:
            starts = walks.paths[:, 0]
            for w in range(len(walks)):
                lo, hi = walk_ptr[w], walk_ptr[w + 1]
                _run_pairs(U, centers[lo:hi], ctx[lo:hi], negs[lo:hi], lr, cfg, A, B, Gi, Gj,
                           temporal_ok, use_temporal, stats)
                _sgd.smooth_prox(U, U_prev, weights, lr * cfg.beta, starts[w:w + 1])
                if use_temporal and (w + 1) % max(1, cfg.decoder_chunk // max(1, hi - lo)) == 0:
                    A, B = _decoder_step(dec, S, Gi, Gj, lr, cfg, A, B)
            if use_temporal:
                A, B = _decoder_step(dec, S, Gi, Gj, lr, cfg, A, B)
        else:
            for lo in range(0, len(centers), cfg.decoder_chunk):
                hi = min(lo + cfg.decoder_chunk, len(centers))
                _run_pairs(U, centers[lo:hi], ctx[lo:hi], negs[lo:hi], lr, cfg, A, B, Gi, Gj,
                           temporal_ok, use_temporal, stats)
                if use_temporal:
                    A, B = _decoder_step(dec, S, Gi, Gj, lr, cfg, A, B)
                if not np.isfinite(stats).all() or not np.isfinite(U[centers[lo:hi]]).all():
                    raise TrainingAborted(
                        f"non-finite loss at snapshot {t}, epoch {epoch}, pairs {lo}..{hi} "
                        f"(first pair {centers[lo]}->{ctx[lo]}), lr={lr:.6g}")
            if use_smooth:
                _sgd.smooth_prox(U, U_prev, weights, lr * cfg.beta, all_nodes)

        if not np.isfinite(U).all() or not np.isfinite(dec.W).all():
            raise TrainingAborted(f"non-finite parameters after snapshot {t}, epoch {epoch}, lr={lr:.6g}")

        n_pairs = len(centers)
        tp = int(stats[_sgd.TEMPORAL_PAIRS])
        skipped = int(stats[_sgd.SKIPPED])
        if use_temporal and tp + skipped and skipped / (tp + skipped) > 0.10:
            warnings.warn(f"snapshot {t} epoch {epoch}: {skipped} of {tp + skipped} temporal pairs "
                          "skipped by the norm guard", RuntimeWarning, stacklevel=2)
        struct = stats[_sgd.STRUCT_LOSS] / n_pairs if n_pairs else 0.0
        temporal = stats[_sgd.TEMPORAL_LOSS] / tp if tp else 0.0
        smooth = smooth_loss(U, U_prev, weights)[0] / g.n_nodes if use_smooth else 0.0
        total = struct + cfg.alpha * temporal + cfg.beta * smooth
        trace.rows.append(EpochStats(t, epoch, lr, n_pairs, struct, temporal, smooth, total, tp, skipped))
        logger.debug("t=%d epoch=%d lr=%.4g struct=%.4f temporal=%.4f smooth=%.4f",
                     t, epoch, lr, struct, temporal, smooth)
    return trace


def _run_pairs(U, centers, ctx, negs, lr, cfg, A, B, Gi, Gj, temporal_ok, use_temporal, stats):
    if len(centers) == 0:
        return
    if cfg.workers > 1:
        _sgd.sgd_pass_parallel(U, centers, ctx, negs, lr, cfg.alpha, A, B, Gi, Gj, temporal_ok,
                               use_temporal, EPS_NORM, cfg.raw_cos, stats, cfg.workers)
    else:
        _sgd.sgd_pass(U, centers, ctx, negs, lr, cfg.alpha, A, B, Gi, Gj, temporal_ok,
                      use_temporal, EPS_NORM, cfg.raw_cos, stats)


def _decoder_step(dec, S, Gi, Gj, lr, cfg, A, B):
    """Apply the accumulated decoder gradient and refresh the cached projections."""
    scale = cfg.decoder_lr * (lr / cfg.lr) * cfg.alpha
    d_s = dec.d_s
    dec.W[:, :d_s] -= scale * (Gi.T @ S)
    dec.W[:, d_s:] -= scale * (Gj.T @ S)
    Gi[:] = 0.0
    Gj[:] = 0.0
    W1, W2 = dec.halves()
    return S @ W1.T, S @ W2.T


def train_all(g: TemporalGraph, cfg: TrainConfig, callback=None):
    """Train snapshots ``1..T`` in order.  Returns ``(store, decoder, trace)``."""
    bank = cfg.kernel_bank()
    if cfg.workers > 1:
        import numba
        numba.set_num_threads(min(cfg.workers, numba.config.NUMBA_NUM_THREADS))
    store = EmbeddingStore(g.n_nodes, g.T, cfg.d)
    dec = Decoder.init(cfg.d, feature_dim(cfg.d, bank, cfg.features), _seed(cfg, _DECODER))
    trace = LossTrace()
    for t in range(1, g.T + 1):
        trace.extend(train_snapshot(g, t, store, dec, cfg, bank))
        if callback is not None:
            callback(t, store, dec)
    return store, dec, trace
