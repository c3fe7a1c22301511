"""Data sources: Watts-Strogatz graphs, SMLM point clouds, Vicsek flocking, brain connectivity."""

from .brain import BrainRecord, brain_ingest, brain_surrogate, surrogate_matrix, threshold_pairs
from .smlm import SMLMParams, smlm_dataset, smlm_sample
from .vicsek import (
    Frame,
    VicsekParams,
    frames_to_graphs,
    vicsek_alignment,
    vicsek_clustering,
    vicsek_dataset,
    vicsek_simulate,
    voronoi_areas_periodic,
)
from .watts_strogatz import WSParams, watts_strogatz, watts_strogatz_dataset

__all__ = [
    "BrainRecord",
    "Frame",
    "SMLMParams",
    "VicsekParams",
    "WSParams",
    "brain_ingest",
    "brain_surrogate",
    "frames_to_graphs",
    "smlm_dataset",
    "smlm_sample",
    "surrogate_matrix",
    "threshold_pairs",
    "vicsek_alignment",
    "vicsek_clustering",
    "vicsek_dataset",
    "vicsek_simulate",
    "voronoi_areas_periodic",
    "watts_strogatz",
    "watts_strogatz_dataset",
]
