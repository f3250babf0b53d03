"""Temporal network embedding from snapshot random walks plus kernel features of embedding histories."""
from .kernels import KernelBank, causal_conv, temporal_features
from .model import Decoder, EmbeddingStore, TrainConfig, train_all, train_snapshot
from .temporal_graph import SnapshotSpec, TemporalGraph, load_edge_list

__version__ = "0.1.0"

__all__ = [
    "Decoder",
    "EmbeddingStore",
    "KernelBank",
    "SnapshotSpec",
    "TemporalGraph",
    "TrainConfig",
    "causal_conv",
    "load_edge_list",
    "temporal_features",
    "train_all",
    "train_snapshot",
]
