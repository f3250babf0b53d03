"""Run configuration: an INI file with ``[data]``, ``[train]``, ``[eval]`` and ``[output]``.

Example::

    [data]
    edges = edges.tsv
    slicing = by-interval(3600)
    node_labels = labels.tsv

    [train]
    d = 32
    alpha = 1.0
    beta = 0.01

    [output]
    dir = run1

Relative paths are resolved against the directory holding the config file.
Unknown sections and keys are rejected.
"""
from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .evaluate import DEFAULT_LAM, NODE_RATIOS
from .model import ConfigError, TrainConfig
from .temporal_graph import SnapshotSpec

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class EvalConfig:
    snapshot: int = 0          # 0 means the final snapshot
    repeats: int = 10
    train_ratios: tuple[float, ...] = NODE_RATIOS
    edge_ratio: float = 0.7
    lam: float = DEFAULT_LAM
    iters: int = 500
    seed: int = 0

    def validate(self):
        if self.snapshot < 0:
            raise ConfigError("eval.snapshot", "must be >= 0 (0 = last)")
        if self.repeats < 1:
            raise ConfigError("eval.repeats", "must be >= 1")
        if self.iters < 1:
            raise ConfigError("eval.iters", "must be >= 1")
        if self.lam < 0:
            raise ConfigError("eval.lam", "must be >= 0")
        for r in (*self.train_ratios, self.edge_ratio):
            if not 0 < r < 1:
                raise ConfigError("eval.train_ratios" if r != self.edge_ratio else "eval.edge_ratio",
                                  f"ratio {r} must lie in (0, 1)")


@dataclass
class RunConfig:
    edges: Path
    out_dir: Path
    slicing: SnapshotSpec = field(default_factory=lambda: SnapshotSpec("by-id"))
    node_labels: Path | None = None
    edge_labels: Path | None = None
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    source: Path | None = None

    def canonical(self) -> str:
        """Stable text form of every setting; the manifest hash is taken over this."""
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["data"] = {"edges": str(self.edges), "slicing": self.slicing.text}
        if self.node_labels:
            cp["data"]["node_labels"] = str(self.node_labels)
        if self.edge_labels:
            cp["data"]["edge_labels"] = str(self.edge_labels)
        cp["train"] = {k: _render(v) for k, v in self.train.to_dict().items()}
        cp["eval"] = {f.name: _render(getattr(self.eval, f.name)) for f in fields(EvalConfig)}
        cp["output"] = {"dir": str(self.out_dir)}
        lines = []
        for section in cp.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{k} = {v}" for k, v in sorted(cp[section].items()))
            lines.append("")
        return "\n".join(lines)

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode("utf-8")).hexdigest()


def _render(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (list, tuple)):
        return ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v).lower() if isinstance(v, bool) else str(v)


def _coerce(name: str, raw: str, default):
    raw = raw.strip()
    try:
        if isinstance(default, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple) or default is None:
            if not raw:
                return None
            return tuple(float(x) for x in raw.replace("[", "").replace("]", "").split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(name, f"cannot parse {raw!r}") from None


def _section_values(cp, section, cls, prefix):
    defaults = {f.name: f.default for f in fields(cls)}
    if section not in cp:
        return {}
    out = {}
    for key, raw in cp[section].items():
        if key not in defaults:
            raise ConfigError(f"{prefix}.{key}", "unknown key")
        out[key] = _coerce(f"{prefix}.{key}", raw, defaults[key])
    return out


def _path(base: Path, raw: str | None):
    if raw is None or not raw.strip():
        return None
    p = Path(raw.strip()).expanduser()
    return p if p.is_absolute() else (base / p)


_SECTIONS = {"data": {"edges", "slicing", "node_labels", "edge_labels"},
             "train": None, "eval": None, "output": {"dir"}}


def parse_config(text: str, base_dir=".", source=None, overrides: dict | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(source or "<config>"))
    except configparser.Error as exc:
        raise ConfigError("config", str(exc).splitlines()[0]) from None
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(section, "unknown section")
        allowed = _SECTIONS[section]
        if allowed is not None:
            for key in cp[section]:
                if key not in allowed:
                    raise ConfigError(f"{section}.{key}", "unknown key")
    base = Path(base_dir)
    data = cp["data"] if "data" in cp else {}
    if "edges" not in data:
        raise ConfigError("data.edges", "required")
    try:
        slicing = SnapshotSpec.parse(data.get("slicing", "by-id"))
    except ValueError as exc:
        raise ConfigError("data.slicing", str(exc)) from None

    train_kw = _section_values(cp, "train", TrainConfig, "train")
    train_kw.update(overrides or {})
    eval_kw = _section_values(cp, "eval", EvalConfig, "eval")
    try:
        train = TrainConfig(**train_kw)
    except ConfigError as exc:
        raise ConfigError(f"train.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    ev = EvalConfig(**eval_kw)
    ev.validate()
    out = cp["output"].get("dir") if "output" in cp else None
    return RunConfig(
        edges=_path(base, data["edges"]),
        out_dir=_path(base, out) if out else base / "out",
        slicing=slicing,
        node_labels=_path(base, data.get("node_labels")),
        edge_labels=_path(base, data.get("edge_labels")),
        train=train,
        eval=ev,
        source=Path(source) if source else None,
    )


def load_config(path, overrides: dict | None = None) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent, path, overrides)
