"""Command line entry point: ``epne train|eval|synth|project|features-dump``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import (CheckpointError, decoder_path, embedding_path, latest_snapshot, read_embeddings,
                         write_decoder, write_embeddings)
from .config import RunConfig, load_config
from .evaluate import DegenerateTaskError, edge_task, node_task, project_2d, write_results
from .kernels import batch_features
from .model import ConfigError, TrainingAborted, train_all
from .synth import SynthSpec, synth_periodic, synth_sbm
from .temporal_graph import (EmptyGraphError, GraphFormatError, load_edge_list, read_edge_labels,
                             read_node_labels)

logger = logging.getLogger("epne")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
LOSS_COLUMNS = ("epoch", "t", "L_struct", "L_temporal", "L_smooth", "total")


class InputError(Exception):
    pass


def _workers(arg: int | None) -> int | None:
    env = os.environ.get("EPNE_WORKERS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError("EPNE_WORKERS", f"not an integer: {env!r}") from None
        if value < 1:
            raise ConfigError("EPNE_WORKERS", "must be >= 1")
        return value
    return arg


def _load_run(args) -> RunConfig:
    overrides = {}
    workers = _workers(getattr(args, "workers", None))
    if workers is not None:
        overrides["workers"] = workers
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return load_config(args.config, overrides)


def _require(path: Path | None, what: str):
    if path is None:
        raise InputError(f"config does not name a {what} file")
    if not path.is_file():
        raise InputError(f"{what} file not found: {path}")


def _write_manifest(run: RunConfig, path: Path, extra: dict):
    cfg = run.train
    lines = [
        f"config_sha256={run.digest()}",
        f"seed={cfg.seed}",
        f"code_version={__version__}",
        f"python={platform.python_version()}",
        f"numpy={np.__version__}",
        f"mode={'deepwalk-equivalent' if cfg.deepwalk_equivalent else 'epne'}",
        f"deterministic={'true' if cfg.workers == 1 else 'false'}",
    ]
    lines += [f"{k}={v}" for k, v in extra.items()]
    lines += ["", "# resolved configuration", run.canonical()]
    path.write_text("\n".join(lines), encoding="utf-8")


def cmd_train(args) -> int:
    run = _load_run(args)
    _require(run.edges, "edge list")
    g = load_edge_list(run.edges, run.slicing)
    run.out_dir.mkdir(parents=True, exist_ok=True)
    store, dec, trace = train_all(g, run.train)
    for t in range(1, g.T + 1):
        write_embeddings(embedding_path(run.out_dir, t), store.data[t - 1], g.node_names, t)
    write_decoder(decoder_path(run.out_dir), dec.W)
    with open(run.out_dir / "losses.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(LOSS_COLUMNS) + "\n")
        for r in trace.rows:
            fh.write(f"{r.epoch}\t{r.t}\t{r.struct:.6f}\t{r.temporal:.6f}\t{r.smooth:.6f}\t{r.total:.6f}\n")
    _write_manifest(run, run.out_dir / "manifest.txt",
                    {"snapshots": g.T, "nodes": g.n_nodes, "bins": ",".join(map(str, g.bin_ids))})
    if not args.no_plots:
        from .plotting import plot_losses
        plot_losses(trace.rows, run.out_dir / "losses.png")
    print(f"trained {g.T} snapshot(s) of {g.n_nodes} nodes -> {run.out_dir}")
    return EXIT_OK


def _embeddings_for(run: RunConfig, g, snapshot: int) -> tuple[np.ndarray, int]:
    t = snapshot or latest_snapshot(run.out_dir)
    path = embedding_path(run.out_dir, t)
    if not path.is_file():
        raise InputError(f"no checkpoint for snapshot {t} in {run.out_dir}; run 'epne train' first")
    names, U, _ = read_embeddings(path)
    if names != list(g.node_names):
        raise InputError(f"{path} does not match the nodes of {run.edges}")
    return U, t


def cmd_eval(args) -> int:
    run = _load_run(args)
    _require(run.edges, "edge list")
    labels = run.node_labels if args.task == "node" else run.edge_labels
    _require(labels, f"{args.task} label")
    g = load_edge_list(run.edges, run.slicing)
    U, t = _embeddings_for(run, g, args.snapshot if args.snapshot is not None else run.eval.snapshot)
    ev = run.eval
    repeats = args.repeats or ev.repeats
    if args.task == "node":
        ids, raw, skipped = read_node_labels(labels, g)
        results = node_task(U, ids, raw, ev.train_ratios, repeats, ev.seed, ev.lam, ev.iters, skipped)
    else:
        edges, raw, skipped = read_edge_labels(labels, g)
        results = [edge_task(U, edges, raw, ev.edge_ratio, repeats, ev.seed, ev.lam, ev.iters, skipped)]
    if skipped:
        logger.warning("skipped %d labelled %s(s) not present in the graph", skipped, args.task)
    out = Path(args.out) if args.out else run.out_dir / f"results_{args.task}.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_results(results, out)
    if not args.no_plots:
        from .plotting import plot_f1
        plot_f1(results, out.with_suffix(".png"), title=f"{args.task} classification (t={t})")
    for r in results:
        print("\t".join(r.row()))
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        if args.kind == "sbm":
            ds = synth_sbm(args.n, args.c, args.p_in, args.p_out, args.T, args.seed)
        else:
            spec = SynthSpec(n=args.n, c=args.c, T=args.T, p_in=args.p_in, p_out=args.p_out, rho=args.rho,
                             period=args.period, duty=args.duty, trend=args.trend, seed=args.seed)
            ds = synth_periodic(spec)
    except ValueError as exc:
        raise InputError(f"invalid synthetic spec: {exc}") from None
    paths = ds.write(args.out)
    for key, p in paths.items():
        print(f"{key}\t{p}")
    return EXIT_OK


def _read_label_map(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) == 2 and not line.startswith("#"):
                out[parts[0]] = parts[1]
    return out


def cmd_project(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise InputError(f"checkpoint not found: {ckpt}")
    if args.labels and not Path(args.labels).is_file():
        raise InputError(f"label file not found: {args.labels}")
    names, U, t = read_embeddings(ckpt)
    labels = _read_label_map(args.labels) if args.labels else {}
    coords = project_2d(U)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    node_labels = [labels.get(n, "") for n in names]
    with open(out, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "x", "y", "label"])
        for name, (x, y), lab in zip(names, coords, node_labels):
            w.writerow([name, f"{x:.6f}", f"{y:.6f}", lab])
    if not args.no_plots:
        from .plotting import plot_projection
        plot_projection(coords, node_labels, out.with_suffix(".png"), title=f"snapshot {t}")
    print(f"projected {len(names)} nodes -> {out}")
    return EXIT_OK


def cmd_features_dump(args) -> int:
    run = _load_run(args)
    _require(run.edges, "edge list")
    g = load_edge_list(run.edges, run.slicing)
    t = args.t
    if not 1 <= t <= g.T:
        raise InputError(f"snapshot {t} outside 1..{g.T}")
    cfg = run.train
    lo = max(1, t - cfg.history_len)
    hist = []
    for s in range(lo, t):
        path = embedding_path(run.out_dir, s)
        if not path.is_file():
            raise InputError(f"missing checkpoint {path}; run 'epne train' first")
        hist.append(read_embeddings(path)[1])
    bank = cfg.kernel_bank()
    out = Path(args.out) if args.out else run.out_dir / f"features_t{t:04d}.tsv"
    out.parent.mkdir(parents=True, exist_ok=True)
    if hist:
        S, degenerate = batch_features(np.stack(hist), bank, cfg.features)
    else:
        S, degenerate = np.zeros((g.n_nodes, 0)), True
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("node\tdegenerate\t" + "\t".join(f"s{k}" for k in range(S.shape[1])) + "\n")
        for name, row in zip(g.node_names, S):
            fh.write(f"{name}\t{int(degenerate)}\t" + "\t".join(f"{x:.8g}" for x in row) + "\n")
    print(f"wrote {g.n_nodes} feature rows (history {len(hist)}) -> {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="epne", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="train embeddings for every snapshot")
    tr.add_argument("config")
    tr.add_argument("--workers", type=int, default=None,
                    help="worker threads; >1 gives up bit-for-bit determinism (env EPNE_WORKERS overrides)")
    tr.add_argument("--seed", type=int, default=None, help="override train.seed")
    tr.add_argument("--no-plots", action="store_true")
    tr.set_defaults(func=cmd_train)

    ev = sub.add_parser("eval", help="node or edge classification from trained embeddings")
    ev.add_argument("task", choices=("node", "edge"))
    ev.add_argument("config")
    ev.add_argument("--snapshot", type=int, default=None, help="embedding snapshot (default: last)")
    ev.add_argument("--repeats", type=int, default=None)
    ev.add_argument("--out", default=None, help="results TSV (default: <output dir>/results_<task>.tsv)")
    ev.add_argument("--no-plots", action="store_true")
    ev.set_defaults(func=cmd_eval)

    sy = sub.add_parser("synth", help="write a synthetic temporal network with labels")
    sy.add_argument("--out", required=True)
    sy.add_argument("--kind", choices=("periodic", "sbm"), default="periodic")
    d = SynthSpec()
    sy.add_argument("--n", type=int, default=d.n)
    sy.add_argument("--c", type=int, default=d.c)
    sy.add_argument("--T", type=int, default=d.T)
    sy.add_argument("--p-in", type=float, default=d.p_in)
    sy.add_argument("--p-out", type=float, default=d.p_out)
    sy.add_argument("--rho", type=float, default=d.rho)
    sy.add_argument("--period", type=int, default=d.period)
    sy.add_argument("--duty", type=float, default=d.duty)
    sy.add_argument("--trend", type=float, default=d.trend)
    sy.add_argument("--seed", type=int, default=0)
    sy.set_defaults(func=cmd_synth)

    pr = sub.add_parser("project", help="2-D PCA projection of one embedding checkpoint")
    pr.add_argument("checkpoint")
    pr.add_argument("--labels", default=None, help="node<TAB>label file")
    pr.add_argument("--out", required=True, help="output CSV (node,x,y,label)")
    pr.add_argument("--no-plots", action="store_true")
    pr.set_defaults(func=cmd_project)

    fd = sub.add_parser("features-dump", help="debug: temporal features of every node at snapshot t")
    fd.add_argument("config")
    fd.add_argument("--t", type=int, required=True)
    fd.add_argument("--out", default=None)
    fd.set_defaults(func=cmd_features_dump)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InputError, GraphFormatError, EmptyGraphError, CheckpointError,
            DegenerateTaskError) as exc:
        print(f"epne: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (TrainingAborted, FloatingPointError) as exc:
        print(f"epne: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
