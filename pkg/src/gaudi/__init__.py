"""Hierarchical graph variational autoencoder with MinCut pooling.

An hourglass graph VAE that maps whole graphs into a structured
8-dimensional latent space, together with the simulators that generate
its benchmark datasets (small-world graphs, localization-microscopy
point clouds, flocking dynamics, brain connectivity) and the metrics
that quantify the latent-space organization.
"""

__version__ = "0.1.0"

from .config import PRESETS, TrainConfig, preset_config
from .dataset_io import load_dataset, save_dataset
from .errors import GaudiError
from .estimator import GaudiEmbedder, as_dataset
from .graph import Graph, GraphDataset, kfn_graph, knn_graph
from .metrics import MetricsReport, evaluate
from .model import init_parameters, load_checkpoint, save_checkpoint
from .training import EmbeddingRecord, embed, train

__all__ = [
    "EmbeddingRecord",
    "GaudiEmbedder",
    "GaudiError",
    "Graph",
    "GraphDataset",
    "MetricsReport",
    "PRESETS",
    "TrainConfig",
    "as_dataset",
    "embed",
    "evaluate",
    "init_parameters",
    "kfn_graph",
    "knn_graph",
    "load_checkpoint",
    "load_dataset",
    "preset_config",
    "save_checkpoint",
    "save_dataset",
    "train",
]
