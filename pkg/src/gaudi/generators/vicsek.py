"""Vicsek flocking simulation with periodic boundaries and steady-state diagnostics.

Particles move at constant speed; each step every particle adopts the
circular mean heading of all particles within the flocking radius
(itself included) plus uniform noise scaled by eta, then advances along
its new heading. Frames become graphs via a periodic 12-nearest-neighbor
construction with node degree and inverse pair distance as features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Voronoi

from ..errors import ContractError
from ..graph import GraphDataset, knn_graph, pairwise_distances
from ._rng import substream


@dataclass
class VicsekParams:
    n_particles: int = 100
    box_size: float = 100.0
    speed: float = 1.0
    dt: float = 1.0
    flock_radius: float = 1.0   # R_f
    noise: float = 0.5          # eta
    total_steps: int = 8000
    analyzed_steps: int = 1000

    def validate(self):
        if self.flock_radius <= 0:
            raise ContractError("flock_radius must be positive")
        if not 0.0 <= self.noise <= 1.0:
            raise ContractError(f"noise must lie in [0, 1], got {self.noise}")
        if self.analyzed_steps > self.total_steps:
            raise ContractError("analyzed_steps cannot exceed total_steps")
        return self


@dataclass
class Frame:
    positions: np.ndarray  # n x 2, in [0, L)
    headings: np.ndarray   # n


def vicsek_simulate(params, rng, initial_positions=None, initial_headings=None):
    """Run the simulation; returns the last ``analyzed_steps`` frames."""
    params.validate()
    n, box = params.n_particles, params.box_size
    if initial_positions is None:
        pos = rng.uniform(0.0, box, size=(n, 2))
    else:
        pos = np.array(initial_positions, dtype=np.float64)
    if initial_headings is None:
        theta = rng.uniform(-np.pi, np.pi, size=n)
    else:
        theta = np.array(initial_headings, dtype=np.float64)
    frames = []
    keep_from = params.total_steps - params.analyzed_steps
    for step in range(params.total_steps):
        diff = pos[:, None, :] - pos[None, :, :]
        diff -= box * np.round(diff / box)
        within = (diff * diff).sum(axis=2) < params.flock_radius**2
        within = within.astype(np.float64)
        mean_sin = within @ np.sin(theta)
        mean_cos = within @ np.cos(theta)
        mean_angle = np.arctan2(mean_sin, mean_cos)
        theta = mean_angle + params.noise * rng.uniform(-0.5, 0.5, size=n) * params.dt
        pos = pos + params.speed * params.dt * np.column_stack(
            (np.cos(theta), np.sin(theta))
        )
        pos %= box
        if step >= keep_from:
            frames.append(Frame(positions=pos.copy(), headings=theta.copy()))
    return frames


def vicsek_alignment(frame):
    """Global alignment coefficient: |mean unit velocity|, in [0, 1]."""
    headings = frame.headings
    if headings.size == 0:
        raise ContractError("empty frame")
    mean = np.array([np.cos(headings).mean(), np.sin(headings).mean()])
    return float(np.sqrt((mean * mean).sum()))


def voronoi_areas_periodic(positions, box):
    """Per-particle Voronoi cell areas on the torus, via the 3x3 tiling."""
    n = positions.shape[0]
    offsets = [
        np.array([dx, dy])
        for dx in (-box, 0.0, box)
        for dy in (-box, 0.0, box)
    ]
    tiled = np.vstack([positions + off for off in offsets])
    center_index = 4  # the (0, 0) offset; torus cell i is the region of point 4*n + i
    vor = Voronoi(tiled)
    areas = np.empty(n)
    for i in range(n):
        region = vor.regions[vor.point_region[center_index * n + i]]
        verts = vor.vertices[region]
        x, y = verts[:, 0], verts[:, 1]
        areas[i] = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    return areas


def vicsek_clustering(frame, flock_radius, box):
    """Fraction of particles whose Voronoi cell is smaller than pi * R_f^2."""
    if frame.positions.shape[0] == 0:
        raise ContractError("empty frame")
    areas = voronoi_areas_periodic(frame.positions, box)
    return float((areas < np.pi * flock_radius**2).mean())


def frames_to_graphs(frames, box, k=12, eps=1e-6, labels=None):
    """Graphs with degree node features and inverse min-image distance edge features."""
    if not frames:
        raise ContractError("frames is empty")
    graphs = []
    for frame_id, frame in enumerate(frames):
        g = knn_graph(frame.positions, k=k, periodic_box=box)
        degree = g.adjacency.sum(axis=1, keepdims=True)
        dist = pairwise_distances(frame.positions, periodic_box=box)
        lengths = dist[g.edges[:, 0], g.edges[:, 1]]
        edge_features = (1.0 / np.maximum(lengths, eps)).reshape(-1, 1)
        g.node_features = degree
        g.edge_features = edge_features
        g.labels = dict(labels or {})
        g.labels["frame_id"] = frame_id
        graphs.append(g)
    return graphs


def vicsek_dataset(
    n_sims,
    seed,
    rf_values=(1.0, 2.0),
    total_steps=8000,
    analyzed_steps=1000,
    n_particles=100,
    box_size=100.0,
    k=12,
):
    """Simulations alternating over the flocking radii, eta uniform in [0, 1]."""
    graphs = []
    for sim_id in range(n_sims):
        rng = substream(seed, sim_id)
        params = VicsekParams(
            n_particles=n_particles,
            box_size=box_size,
            flock_radius=float(rf_values[sim_id % len(rf_values)]),
            noise=float(rng.uniform()),
            total_steps=total_steps,
            analyzed_steps=analyzed_steps,
        )
        frames = vicsek_simulate(params, rng)
        graphs.extend(
            frames_to_graphs(
                frames,
                box=box_size,
                k=k,
                labels={
                    "R_f": params.flock_radius,
                    "eta": params.noise,
                    "sim_id": sim_id,
                },
            )
        )
    return GraphDataset(graphs=graphs, generator="vicsek", seed=seed)
