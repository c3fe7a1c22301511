"""Simulated single-molecule localization point clouds (ring vs spot).

The hierarchical process: complex centers arranged on a ring or spread
over a spot, three proteins per complex with Gaussian offsets, Bernoulli
labeling, a geometric number of localizations per labeled protein with
Gaussian localization noise, and a Poisson number of uniform background
points. Each sample becomes a graph by connecting every localization to
its six most distant neighbors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..graph import GraphDataset, inverse_center_distance_features, kfn_graph, normalize_coords
from ._rng import substream

log = logging.getLogger(__name__)

RING = "ring"
SPOT = "spot"


@dataclass
class SMLMParams:
    shape_class: str | None = None      # None: draw ring/spot with prob 1/2
    complexes_min: int = 6
    complexes_max: int = 15
    proteins_per_complex: int = 3
    protein_offset_std: float = 13.0    # nm
    label_prob: float = 0.5
    mean_localizations: float = 8.0     # geometric mean, support {1, 2, ...}
    localization_std: float = 20.0      # nm
    radius_min: float = 50.0            # nm
    radius_max: float = 100.0           # nm
    ring_error_std_max: float = np.sqrt(2.0) * 20.0
    noise_rate: float = 10.0            # Poisson mean of background points
    k_furthest: int = 6
    min_points: int = 8

    def validate(self):
        if not 0.0 <= self.label_prob <= 1.0:
            raise ContractError(f"label_prob must lie in [0, 1], got {self.label_prob}")
        if self.mean_localizations < 1.0:
            raise ContractError("mean_localizations must be at least 1")
        if self.radius_min <= 0 or self.radius_max < self.radius_min:
            raise ContractError("need 0 < radius_min <= radius_max")
        for name in ("protein_offset_std", "localization_std", "ring_error_std_max", "noise_rate"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        if self.shape_class not in (None, RING, SPOT):
            raise ContractError(f"unknown shape_class {self.shape_class!r}")
        return self


def geometric_localization_count(rng, mean):
    """Number of localizations for a labeled protein: support {1, 2, ...}."""
    return int(rng.geometric(1.0 / mean))


def sample_points(params, rng):
    """Raw localization cloud and its shape class."""
    shape = params.shape_class
    if shape is None:
        shape = RING if rng.random() < 0.5 else SPOT
    n_complexes = int(rng.integers(params.complexes_min, params.complexes_max + 1))
    radius = float(rng.uniform(params.radius_min, params.radius_max))
    if shape == RING:
        radial_std = float(rng.uniform(0.0, params.ring_error_std_max))
    else:
        radial_std = np.sqrt(2.0) * radius

    points = []
    for _ in range(n_complexes):
        angle = rng.uniform(0.0, 2.0 * np.pi)
        r = radius + (rng.normal(0.0, radial_std) if radial_std > 0.0 else 0.0)
        center = np.array([r * np.cos(angle), r * np.sin(angle)])
        for _ in range(params.proteins_per_complex):
            protein = center + rng.normal(0.0, params.protein_offset_std, size=2)
            if rng.random() < params.label_prob:
                count = geometric_localization_count(rng, params.mean_localizations)
                offsets = rng.normal(0.0, params.localization_std, size=(count, 2))
                points.extend(protein + offsets)
    n_noise = int(rng.poisson(params.noise_rate))
    if n_noise:
        points.extend(rng.uniform(-2.0 * radius, 2.0 * radius, size=(n_noise, 2)))
    if points:
        return np.vstack(points), shape
    return np.zeros((0, 2)), shape


def smlm_sample(params, seed, index=0, max_attempts=1000):
    """One assembly as a normalized furthest-neighbor graph.

    Degenerate draws with fewer than ``min_points`` localizations are
    rejected and regenerated from the next substream.
    """
    params.validate()
    for attempt in range(max_attempts):
        rng = substream(seed, index, attempt)
        points, shape = sample_points(params, rng)
        if len(points) >= params.min_points:
            break
        log.warning(
            "smlm sample %d attempt %d produced %d points (< %d); regenerating",
            index, attempt, len(points), params.min_points,
        )
    else:
        raise ContractError(
            f"smlm sample {index}: no draw reached {params.min_points} points "
            f"in {max_attempts} attempts"
        )
    g = kfn_graph(points, params.k_furthest, labels={"shape_class": shape})
    return inverse_center_distance_features(normalize_coords(g))


def smlm_dataset(count, seed, params=None):
    params = params or SMLMParams()
    graphs = [smlm_sample(params, seed, index=i) for i in range(count)]
    return GraphDataset(graphs=graphs, generator="smlm", seed=seed)
