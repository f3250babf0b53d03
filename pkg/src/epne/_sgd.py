"""Compiled inner loops for per-pair SGD.

Every pair step computes the gradients of its joint loss from the current
vectors and then applies them together, so a single-pair call is an exact
gradient step on that pair's loss.  The decoder is read through the cached
projections ``A = S @ W1.T`` and ``B = S @ W2.T``; its gradient w.r.t. the
pre-activation is accumulated per node in ``Gi``/``Gj`` and applied by the
caller.
"""
import math

import numpy as np
from numba import njit, prange

# stats slots
STRUCT_LOSS, TEMPORAL_LOSS, TEMPORAL_PAIRS, SKIPPED = 0, 1, 2, 3


@njit(cache=True, inline="always")
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, inline="always")
def _sig_logsig(x):
    """``(sigmoid(x), log(sigmoid(x)))`` from a single exponential."""
    if x >= 0:
        e = math.exp(-x)
        return 1.0 / (1.0 + e), -math.log1p(e)
    e = math.exp(x)
    return e / (1.0 + e), x - math.log1p(e)


@njit(cache=True, fastmath=True)
def _pair_step(U, i, j, negs_row, lr, alpha, A, B, Gi, Gj, use_temporal,
               eps_norm, raw_cos, gi, gj, gn, x, g, stats):
    d = U.shape[1]
    k = negs_row.shape[0]
    # structural term
    dot = 0.0
    for c in range(d):
        dot += U[i, c] * U[j, c]
    sg, lsg = _sig_logsig(dot)
    loss = -lsg
    coef = sg - 1.0
    for c in range(d):
        gi[c] = coef * U[j, c]
        gj[c] = coef * U[i, c]
    for m in range(k):
        n = negs_row[m]
        if n < 0:
            for c in range(d):
                gn[m, c] = 0.0
            continue
        dot = 0.0
        for c in range(d):
            dot += U[i, c] * U[n, c]
        sg, lsg = _sig_logsig(-dot)
        loss -= lsg
        coef = 1.0 - sg
        for c in range(d):
            gi[c] += coef * U[n, c]
            gn[m, c] = coef * U[i, c]

    stats[STRUCT_LOSS] += loss

    # temporal term: D(u_i - u_j, sigmoid(A_i + B_j))
    if use_temporal:
        nx = 0.0
        ng = 0.0
        xg = 0.0
        for c in range(d):
            x[c] = U[i, c] - U[j, c]
            g[c] = _sigmoid(A[i, c] + B[j, c])
            nx += x[c] * x[c]
            ng += g[c] * g[c]
            xg += x[c] * g[c]
        nx = math.sqrt(nx)
        ng = math.sqrt(ng)
        if nx < eps_norm or ng < eps_norm:
            stats[SKIPPED] += 1.0
        else:
            cos = xg / (nx * ng)
            sign = 1.0 if raw_cos else -1.0
            stats[TEMPORAL_LOSS] += cos if raw_cos else 1.0 - cos
            stats[TEMPORAL_PAIRS] += 1.0
            for c in range(d):
                dx = sign * (g[c] / (nx * ng) - cos * x[c] / (nx * nx))
                dg = sign * (x[c] / (nx * ng) - cos * g[c] / (ng * ng))
                dz = dg * g[c] * (1.0 - g[c])
                gi[c] += alpha * dx
                gj[c] -= alpha * dx
                Gi[i, c] += dz
                Gj[j, c] += dz

    for c in range(d):
        U[i, c] -= lr * gi[c]
        U[j, c] -= lr * gj[c]
    for m in range(k):
        n = negs_row[m]
        if n < 0:
            continue
        for c in range(d):
            U[n, c] -= lr * gn[m, c]


@njit(cache=True)
def sgd_pass(U, centers, ctx, negs, lr, alpha, A, B, Gi, Gj, temporal_ok,
             use_temporal, eps_norm, raw_cos, stats):
    d = U.shape[1]
    k = negs.shape[1]
    gi = np.empty(d)
    gj = np.empty(d)
    gn = np.empty((k, d))
    x = np.empty(d)
    g = np.empty(d)
    for p in range(centers.shape[0]):
        i = centers[p]
        j = ctx[p]
        temporal = use_temporal and temporal_ok[i] and temporal_ok[j]
        _pair_step(U, i, j, negs[p], lr, alpha, A, B, Gi, Gj, temporal,
                   eps_norm, raw_cos, gi, gj, gn, x, g, stats)


@njit(cache=True, parallel=True)
def sgd_pass_parallel(U, centers, ctx, negs, lr, alpha, A, B, Gi, Gj, temporal_ok,
                      use_temporal, eps_norm, raw_cos, stats, n_blocks):
    """Lock-free variant: blocks of pairs race on ``U``, ``Gi`` and ``Gj``."""
    d = U.shape[1]
    k = negs.shape[1]
    n = centers.shape[0]
    block_stats = np.zeros((n_blocks, stats.shape[0]))
    for b in prange(n_blocks):
        gi = np.empty(d)
        gj = np.empty(d)
        gn = np.empty((k, d))
        x = np.empty(d)
        g = np.empty(d)
        lo = b * n // n_blocks
        hi = (b + 1) * n // n_blocks
        for p in range(lo, hi):
            i = centers[p]
            j = ctx[p]
            temporal = use_temporal and temporal_ok[i] and temporal_ok[j]
            _pair_step(U, i, j, negs[p], lr, alpha, A, B, Gi, Gj, temporal,
                       eps_norm, raw_cos, gi, gj, gn, x, g, block_stats[b])
    for b in range(n_blocks):
        for s in range(stats.shape[0]):
            stats[s] += block_stats[b, s]


@njit(cache=True)
def smooth_prox(U, U_prev, weights, step, nodes):
    """Proximal step on ``step * ||u - u_prev|| / w`` for the listed nodes."""
    d = U.shape[1]
    for idx in range(nodes.shape[0]):
        v = nodes[idx]
        norm = 0.0
        for c in range(d):
            diff = U[v, c] - U_prev[v, c]
            norm += diff * diff
        norm = math.sqrt(norm)
        if norm == 0.0:
            continue
        shrink = step / weights[v]
        scale = 0.0 if shrink >= norm else 1.0 - shrink / norm
        for c in range(d):
            U[v, c] = U_prev[v, c] + scale * (U[v, c] - U_prev[v, c])


@njit(cache=True, inline="always")
def _lookup(cumulative, guide, u):
    # first index with cumulative[idx] > u, searching only u's guide bucket
    b = int(u * (guide.shape[0] - 1))
    lo = guide[b]
    hi = guide[b + 1]
    while lo < hi:
        mid = (lo + hi) >> 1
        if cumulative[mid] > u:
            hi = mid
        else:
            lo = mid + 1
    return min(lo, cumulative.shape[0] - 1)


@njit(cache=True)
def draw_negatives(cumulative, guide, uniforms, pool, centers, ctx):
    """Map uniforms to nodes through the cumulative weights (normalised to 1).

    ``guide[b]`` is the first index whose cumulative weight exceeds
    ``b / (len(guide) - 1)``, so each lookup searches a single bucket.
    Collisions with the pair's own nodes are redrawn from ``pool`` in order;
    once the pool runs dry the slot is set to ``-1``.
    """
    n_pairs, k = uniforms.shape
    out = np.empty((n_pairs, k), dtype=np.int64)
    used = 0
    for p in range(n_pairs):
        i = centers[p]
        j = ctx[p]
        for m in range(k):
            v = _lookup(cumulative, guide, uniforms[p, m])
            while v == i or v == j:
                if used >= pool.shape[0]:
                    v = -1
                    break
                v = _lookup(cumulative, guide, pool[used])
                used += 1
            out[p, m] = v
    return out
