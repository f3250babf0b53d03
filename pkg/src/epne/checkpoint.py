"""Text checkpoints in a word2vec-style layout.

Embedding file for snapshot ``t``::

    <|V|> <d> <t>
    <node_name> v1 ... vd

Decoder file::

    <d> <2*d_s>
    w11 ... w1k

Numbers are written with ``repr`` so reloading is exact and two runs with
identical parameters produce identical bytes.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


class CheckpointError(ValueError):
    pass


def _fmt(row) -> str:
    return " ".join(repr(float(x)) for x in row)


def embedding_path(out_dir, t: int) -> Path:
    return Path(out_dir) / f"emb_t{t:04d}.txt"


def decoder_path(out_dir) -> Path:
    return Path(out_dir) / "decoder.txt"


def write_embeddings(path, U: np.ndarray, names, t: int) -> None:
    U = np.asarray(U)
    if len(names) != len(U):
        raise CheckpointError("name count does not match embedding rows")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{U.shape[0]} {U.shape[1]} {t}\n")
        for name, row in zip(names, U):
            fh.write(f"{name} {_fmt(row)}\n")


def read_embeddings(path) -> tuple[list[str], np.ndarray, int]:
    """Return ``(names, U, t)``."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise CheckpointError(f"{path}: header must be '|V| d t'")
        n, d, t = (int(x) for x in header)
        names, rows = [], []
        for lineno, line in enumerate(fh, 2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != d + 1:
                raise CheckpointError(f"{path}:{lineno}: expected {d + 1} fields, got {len(parts)}")
            names.append(parts[0])
            rows.append([float(x) for x in parts[1:]])
    if len(names) != n:
        raise CheckpointError(f"{path}: header says {n} nodes, found {len(names)}")
    return names, np.array(rows, dtype=np.float64).reshape(n, d), t


def write_decoder(path, W: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{W.shape[0]} {W.shape[1]}\n")
        for row in W:
            fh.write(_fmt(row) + "\n")


def read_decoder(path) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        d, k = (int(x) for x in fh.readline().split())
        W = np.array([[float(x) for x in line.split()] for line in fh if line.strip()])
    if W.shape != (d, k):
        raise CheckpointError(f"{path}: expected a {d}x{k} matrix, found {W.shape}")
    return W


def latest_snapshot(out_dir) -> int:
    found = sorted(Path(out_dir).glob("emb_t*.txt"))
    if not found:
        raise CheckpointError(f"no embedding checkpoints in {out_dir}")
    return int(found[-1].stem[len("emb_t"):])
