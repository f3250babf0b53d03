"""Downstream evaluation: softmax regression, F1 scores, node/edge tasks, 2-D projection."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

NODE_RATIOS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)
# Mean cross-entropy is used, so this is much smaller than an sklearn-style C=1.
DEFAULT_LAM = 1e-4
RESULT_COLUMNS = ("task", "train_ratio", "macro_f1_mean", "macro_f1_std", "micro_f1_mean", "micro_f1_std")


class DegenerateTaskError(ValueError):
    """Fewer than two classes available for training."""


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.X) != len(self.y):
            raise ValueError("feature rows and labels differ in length")
        if len(self.y) and (self.y.min() < 0 or self.y.max() >= self.n_classes):
            raise ValueError("labels must lie in [0, n_classes)")

    @classmethod
    def from_raw(cls, X, raw_labels) -> tuple["LabeledDataset", list[str]]:
        classes = sorted(set(raw_labels))
        index = {c: k for k, c in enumerate(classes)}
        return cls(X, np.array([index[c] for c in raw_labels], dtype=np.int64), len(classes)), classes


@dataclass
class LinearClassifier:
    W: np.ndarray  # (C, n_features + 1); last column is the bias
    lam: float
    losses: list[float]

    def scores(self, X):
        X = np.asarray(X, dtype=np.float64)
        return X @ self.W[:, :-1].T + self.W[:, -1]

    def predict_proba(self, X):
        return _softmax(self.scores(X))

    def predict(self, X):
        return np.argmax(self.scores(X), axis=1)


def _softmax(Z):
    Z = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(Z)
    return E / E.sum(axis=1, keepdims=True)


def _objective(W, Xb, Y, lam):
    Z = Xb @ W.T
    Z = Z - Z.max(axis=1, keepdims=True)
    logp = Z - np.log(np.exp(Z).sum(axis=1, keepdims=True))
    n = len(Xb)
    loss = -(Y * logp).sum() / n + 0.5 * lam * (W[:, :-1] ** 2).sum()
    grad = (np.exp(logp) - Y).T @ Xb / n
    grad[:, :-1] += lam * W[:, :-1]
    return loss, grad


def fit_logreg(train: LabeledDataset, lam: float = DEFAULT_LAM, iters: int = 500, seed: int = 0,
               tol: float = 1e-6) -> LinearClassifier:
    """Multinomial logistic regression, mean cross-entropy plus ``lam/2 * ||W||^2``.

    The bias column is not penalised.  Full-batch gradient descent with a
    diagonal preconditioner and an Armijo backtracking line search; ``seed`` is accepted for interface
    symmetry (the fit is deterministic from a zero start).
    """
    present = np.unique(train.y)
    if len(present) < 2:
        raise DegenerateTaskError(f"training set has {len(present)} class(es); need at least 2")
    C = train.n_classes
    Xb = np.hstack([train.X, np.ones((len(train.X), 1))])
    Y = np.zeros((len(train.y), C))
    Y[np.arange(len(train.y)), train.y] = 1.0
    W = np.zeros((C, Xb.shape[1]))
    # diagonal curvature bound per column; keeps the bias moving when lam is large
    precond = 0.5 * (Xb ** 2).mean(axis=0)
    precond[:-1] += lam
    precond = 1.0 / np.maximum(precond, 1e-12)
    loss, grad = _objective(W, Xb, Y, lam)
    losses = [loss]
    step = 1.0
    for _ in range(iters):
        if float((grad ** 2).sum()) < tol ** 2:
            break
        direction = grad * precond
        slope = float((grad * direction).sum())
        while True:
            W_new = W - step * direction
            new_loss, new_grad = _objective(W_new, Xb, Y, lam)
            if new_loss <= loss - 0.5 * step * slope or step < 1e-12:
                break
            step *= 0.5
        if new_loss > loss:
            break
        W, loss, grad = W_new, new_loss, new_grad
        losses.append(loss)
        step = min(1.0, step * 2.0)
    return LinearClassifier(W, lam, losses)


def confusion(pred, gold, C: int) -> np.ndarray:
    M = np.zeros((C, C), dtype=np.int64)
    np.add.at(M, (np.asarray(gold), np.asarray(pred)), 1)
    return M


def f1_scores(pred, gold, C: int) -> tuple[float, float]:
    """(macro, micro) F1 for single-label multiclass predictions.

    Macro averages over classes occurring in ``gold`` or ``pred``.
    """
    pred, gold = np.asarray(pred), np.asarray(gold)
    if len(pred) != len(gold):
        raise ValueError("pred and gold differ in length")
    if len(gold) == 0:
        return 0.0, 0.0
    M = confusion(pred, gold, C)
    tp = np.diag(M).astype(np.float64)
    fp = M.sum(axis=0) - tp
    fn = M.sum(axis=1) - tp
    denom = 2 * tp + fp + fn
    per_class = np.divide(2 * tp, denom, out=np.zeros(C), where=denom > 0)
    seen = (M.sum(axis=0) + M.sum(axis=1)) > 0
    macro = float(per_class[seen].mean())
    micro = float(2 * tp.sum() / (2 * tp.sum() + fp.sum() + fn.sum()))
    return macro, micro


def stratified_split(y, train_ratio: float, rng: np.random.Generator):
    train, test = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        k = int(round(train_ratio * len(idx)))
        if len(idx) >= 2:
            k = min(max(k, 1), len(idx) - 1)
        train.append(idx[:k])
        test.append(idx[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class TaskResult:
    task: str
    train_ratio: float
    macro_mean: float
    macro_std: float
    micro_mean: float
    micro_std: float
    repeats: int = 0
    skipped: int = 0

    def row(self) -> list[str]:
        return [self.task, f"{self.train_ratio:g}", f"{self.macro_mean:.4f}", f"{self.macro_std:.4f}",
                f"{self.micro_mean:.4f}", f"{self.micro_std:.4f}"]


def evaluate_splits(data: LabeledDataset, task: str, train_ratio: float, repeats: int = 10,
                    seed: int = 0, lam: float = DEFAULT_LAM, iters: int = 500) -> TaskResult:
    macro, micro = [], []
    for r in range(repeats):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        tr, te = stratified_split(data.y, train_ratio, rng)
        clf = fit_logreg(LabeledDataset(data.X[tr], data.y[tr], data.n_classes), lam, iters, seed)
        ma, mi = f1_scores(clf.predict(data.X[te]), data.y[te], data.n_classes)
        macro.append(ma)
        micro.append(mi)
    return TaskResult(task, train_ratio, float(np.mean(macro)), float(np.std(macro)),
                      float(np.mean(micro)), float(np.std(micro)), repeats)


def node_dataset(emb: np.ndarray, node_ids, raw_labels) -> LabeledDataset:
    data, _ = LabeledDataset.from_raw(emb[np.asarray(node_ids, dtype=np.int64)], list(raw_labels))
    if data.n_classes < 2:
        raise DegenerateTaskError("node labels cover fewer than 2 classes")
    return data


def edge_features(emb: np.ndarray, edges) -> np.ndarray:
    """``[u_min ; u_max]`` with endpoints ordered by internal id."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lo = edges.min(axis=1)
    hi = edges.max(axis=1)
    return np.hstack([emb[lo], emb[hi]])


def edge_dataset(emb: np.ndarray, edges, raw_labels) -> LabeledDataset:
    data, _ = LabeledDataset.from_raw(edge_features(emb, edges), list(raw_labels))
    if data.n_classes < 2:
        raise DegenerateTaskError("edge labels cover fewer than 2 classes")
    return data


def node_task(emb, node_ids, raw_labels, train_ratios=NODE_RATIOS, repeats=10, seed=0,
              lam=DEFAULT_LAM, iters=500, skipped=0) -> list[TaskResult]:
    data = node_dataset(emb, node_ids, raw_labels)
    out = []
    for ratio in train_ratios:
        res = evaluate_splits(data, "node", ratio, repeats, seed, lam, iters)
        res.skipped = skipped
        out.append(res)
    return out


def edge_task(emb, edges, raw_labels, train_ratio=0.7, repeats=10, seed=0,
              lam=DEFAULT_LAM, iters=500, skipped=0) -> TaskResult:
    data = edge_dataset(emb, edges, raw_labels)
    res = evaluate_splits(data, "edge", train_ratio, repeats, seed, lam, iters)
    res.skipped = skipped
    return res


def write_results(results, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(RESULT_COLUMNS) + "\n")
        for r in results:
            fh.write("\t".join(r.row()) + "\n")


def _top_direction(C: np.ndarray, iters: int, tol: float) -> tuple[np.ndarray, float]:
    n = C.shape[0]
    v = np.ones(n) / np.sqrt(n)
    # start off any accidental orthogonality with a fixed deterministic tilt
    v = v + np.linspace(0.0, 1e-3, n)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = C @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return v, 0.0
        w /= norm
        if np.linalg.norm(w - v) < tol:
            v = w
            lam = norm
            break
        v, lam = w, norm
    return v, float(v @ C @ v)


def project_2d(X, iters: int = 1000, tol: float = 1e-10) -> np.ndarray:
    """Top-2 principal-component coordinates via power iteration with deflation.

    Each component's sign makes its largest-magnitude loading positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) < 2:
        raise ValueError("projection needs at least 2 points")
    Xc = X - X.mean(axis=0)
    C = Xc.T @ Xc / len(Xc)
    scale = np.abs(C).max()
    coords = np.zeros((len(X), 2))
    if scale == 0:
        warnings.warn("all points identical; projection is zero", RuntimeWarning, stacklevel=2)
        return coords
    comps = []
    Cd = C.copy()
    for k in range(2):
        v, ev = _top_direction(Cd, iters, tol)
        if ev <= 1e-12 * scale:
            warnings.warn("rank-deficient data; second coordinate zero-filled", RuntimeWarning, stacklevel=2)
            break
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        comps.append(v)
        Cd = Cd - ev * np.outer(v, v)
    for k, v in enumerate(comps):
        coords[:, k] = Xc @ v
    return coords
