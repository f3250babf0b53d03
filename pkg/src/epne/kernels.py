"""Fixed causal-convolution kernels over embedding histories.

A history window holds a node's last ``h`` embedding vectors, oldest first.
Kernel index ``k = 0`` multiplies the oldest vector and ``k = h-1`` the most
recent one.  The bank is a set of Haar wavelets (zero-mean square pulses at
several scales and shifts) plus one exponential decay kernel.

Feature layout produced by :func:`temporal_features`::

    [decay block (d) | haar_0 block (d) | haar_1 block (d) | ...]

with Haar kernels in bank order: scale by scale, oldest shift first.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

FEATURE_MODES = ("both", "time", "freq")


class KernelConfigError(ValueError):
    pass


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class Kernel:
    weights: np.ndarray
    kind: str  # "haar" or "decay"
    params: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weights)

    @property
    def active(self) -> bool:
        return bool(np.any(self.weights != 0))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _haar_weights(h: int, start: int, stop: int) -> np.ndarray:
    """+ on the older half of ``[start, stop)``, - on the recent half.

    Odd supports leave the middle step at zero; magnitudes are normalised by
    the number of non-zero steps.  Supports shorter than 2 give a zero kernel.
    """
    w = np.zeros(h)
    width = stop - start
    half = width // 2
    if half == 0:
        return w
    amp = 1.0 / math.sqrt(2 * half)
    w[start:start + half] = amp
    w[stop - half:stop] = -amp
    return w


def _scale_kernels(h: int, fraction: float, label: dict) -> list[Kernel]:
    count = max(1, _round_half_up(1.0 / fraction))
    bounds = [min(h, _round_half_up(k * fraction * h)) for k in range(count + 1)]
    bounds[-1] = min(h, bounds[-1])
    out = []
    for k in range(count):
        a, b = bounds[k], bounds[k + 1]
        out.append(Kernel(_haar_weights(h, a, b), "haar",
                          dict(label, shift=a, support=b - a, index=k)))
    return out


def dyadic_fractions(L: int) -> list[float]:
    return [0.5 ** (l - 1) for l in range(1, L + 1)]


def haar_bank(h: int, L: int) -> list[Kernel]:
    """Dyadic Haar kernels: level ``l`` has ``2**(l-1)`` kernels tiling ``[0, h)``."""
    if h < 2:
        raise KernelConfigError(f"history length must be >= 2 for Haar kernels, got {h}")
    if not 1 <= L <= int(math.floor(math.log2(h))):
        raise KernelConfigError(f"scale count L={L} not in 1..floor(log2({h}))")
    out = []
    for level, frac in enumerate(dyadic_fractions(L), 1):
        out.extend(_scale_kernels(h, frac, {"level": level}))
    return out


def custom_haar_bank(h: int, fractions) -> list[Kernel]:
    """Haar kernels whose supports are given as fractions of the window.

    A fraction ``b`` yields ``round(1/b)`` kernels of support ``round(b*h)``.
    """
    out = []
    for level, frac in enumerate(fractions, 1):
        if not 0 < frac <= 1:
            raise KernelConfigError(f"custom scale {frac} must lie in (0, 1]")
        if _round_half_up(frac * h) < 2:
            raise KernelConfigError(f"custom scale {frac} gives support < 2 for h={h}")
        out.extend(_scale_kernels(h, frac, {"level": level, "fraction": frac}))
    return out


def decay_kernel(h: int, rate: float) -> Kernel:
    """``exp(-rate * age)`` with age 0 for the most recent step."""
    if h < 1:
        raise KernelConfigError("history length must be >= 1")
    if not rate > 0:
        raise KernelConfigError(f"decay rate must be positive, got {rate}")
    age = np.arange(h - 1, -1, -1, dtype=np.float64)
    return Kernel(np.exp(-rate * age), "decay", {"rate": rate})


@dataclass(frozen=True)
class KernelBank:
    haar: tuple[Kernel, ...]
    decay: Kernel
    h: int
    L: int
    fractions: tuple[float, ...]

    @classmethod
    def build(cls, h: int, L: int, decay_rate: float = 0.5, custom_scales=None) -> "KernelBank":
        if custom_scales:
            fr = tuple(float(b) for b in custom_scales)
            haar = custom_haar_bank(h, fr)
        else:
            fr = tuple(dyadic_fractions(L))
            haar = haar_bank(h, L)
        return cls(tuple(haar), decay_kernel(h, decay_rate), h, len(fr), fr)

    @property
    def kernels(self) -> tuple[Kernel, ...]:
        return self.haar + (self.decay,)

    @property
    def n_haar(self) -> int:
        return len(self.haar)

    @property
    def decay_rate(self) -> float:
        return self.decay.params["rate"]

    def truncated(self, m: int) -> "KernelBank":
        """Same layout regenerated for a window of ``m < h`` steps.

        Haar kernels whose rescaled support drops below 2 become zero kernels.
        """
        if m == self.h:
            return self
        if not 1 <= m <= self.h:
            raise KernelConfigError(f"cannot truncate a length-{self.h} bank to {m}")
        haar = []
        for level, frac in enumerate(self.fractions, 1):
            haar.extend(_scale_kernels(m, frac, {"level": level}))
        return KernelBank(tuple(haar), decay_kernel(m, self.decay_rate), m, self.L, self.fractions)

    def feature_kernels(self, mode: str = "both") -> np.ndarray:
        """Kernel matrix ``(n_blocks, h)`` in feature-layout order."""
        if mode not in FEATURE_MODES:
            raise KernelConfigError(f"feature mode must be one of {FEATURE_MODES}")
        rows = []
        if mode in ("both", "time"):
            rows.append(self.decay.weights)
        if mode in ("both", "freq"):
            rows.extend(k.weights for k in self.haar)
        return np.stack(rows)


def n_blocks(bank: KernelBank, mode: str = "both") -> int:
    return {"both": bank.n_haar + 1, "time": 1, "freq": bank.n_haar}[mode]


def feature_dim(d: int, bank: KernelBank, mode: str = "both") -> int:
    return d * n_blocks(bank, mode)


def causal_conv(window: np.ndarray, kernel) -> np.ndarray:
    """``sum_k window[k] * f[k]`` for a history window of shape ``(m, d)``."""
    f = kernel.weights if isinstance(kernel, Kernel) else np.asarray(kernel, dtype=np.float64)
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    if window.shape[0] != f.shape[0]:
        raise ShapeError(f"window has {window.shape[0]} steps, kernel has {f.shape[0]}")
    return f @ window


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    degenerate: bool


def _haar_halves(kernel: Kernel, m: int):
    """Slices of the older and recent halves, and the amplitude, of a Haar kernel."""
    a = kernel.params["shift"]
    half = kernel.params["support"] // 2
    if half == 0:
        return None
    b = a + kernel.params["support"]
    return slice(a, a + half), slice(b - half, b), 1.0 / math.sqrt(2 * half)


def bank_outputs(history: np.ndarray, bank: KernelBank, mode: str = "both") -> np.ndarray:
    """Kernel outputs stacked in feature-layout order: shape ``(n_blocks,) + history.shape[1:]``.

    Haar outputs are computed as ``amp * (sum(older) - sum(recent))`` so a
    constant history gives exact zeros.
    """
    m = history.shape[0]
    if m == 0:
        raise ShapeError("empty history window")
    sub = bank.truncated(m)
    sub.feature_kernels(mode)  # validates the mode
    out = []
    if mode in ("both", "time"):
        out.append(np.tensordot(sub.decay.weights, history, axes=(0, 0)))
    if mode in ("both", "freq"):
        for k in sub.haar:
            halves = _haar_halves(k, m)
            if halves is None:
                out.append(np.zeros(history.shape[1:]))
                continue
            older, recent, amp = halves
            out.append(amp * (history[older].sum(axis=0) - history[recent].sum(axis=0)))
    return np.stack(out)


def temporal_features(window: np.ndarray, bank: KernelBank, mode: str = "both") -> FeatureVector:
    """Temporal features of one node from its ``(m, d)`` history window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim == 1:
        window = window[:, None]
    out = bank_outputs(window, bank, mode).reshape(-1)
    return FeatureVector(out, window.shape[0] < 2)


def batch_features(history: np.ndarray, bank: KernelBank, mode: str = "both") -> tuple[np.ndarray, bool]:
    """Features of every node at once.

    ``history`` has shape ``(m, n_nodes, d)``, oldest snapshot first.  Returns
    an ``(n_nodes, d_s)`` matrix and the degenerate flag.
    """
    m, n, d = history.shape
    blocks = bank_outputs(history, bank, mode)           # (n_blocks, n, d)
    return np.ascontiguousarray(blocks.transpose(1, 0, 2)).reshape(n, -1), m < 2
