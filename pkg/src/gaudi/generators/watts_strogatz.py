"""Watts-Strogatz small-world graphs with ring-layout geometric features.

Nodes sit on a ring, each initially connected to its C nearest ring
neighbors; every lattice edge is then rewired once with probability p
(replace the far endpoint with a uniformly random node, rejecting
self-loops and duplicates). Rewiring moves edges but never adds or
removes them, so the edge count is always n*C/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError
from ..graph import (
    Graph,
    GraphDataset,
    _edges_from_pairs,
    inverse_center_distance_features,
    normalize_coords,
)
from ._rng import substream


@dataclass
class WSParams:
    n_nodes: int = 80
    ring_degree: int = 4      # C, even
    rewire_prob: float = 0.1  # p

    def validate(self):
        if self.ring_degree % 2 != 0 or self.ring_degree <= 0:
            raise ContractError(f"C must be a positive even number, got {self.ring_degree}")
        if not 0.0 <= self.rewire_prob <= 1.0:
            raise ContractError(f"p must lie in [0, 1], got {self.rewire_prob}")
        if self.n_nodes <= self.ring_degree:
            raise ContractError("need more nodes than ring degree")
        return self


def _ring_coords(n):
    angles = 2.0 * np.pi * np.arange(n) / n
    return np.column_stack((np.cos(angles), np.sin(angles)))


def watts_strogatz(params, rng):
    """One rewired ring-lattice graph with normalized inverse-distance features."""
    params.validate()
    n, c, p = params.n_nodes, params.ring_degree, params.rewire_prob
    edge_set = set()
    lattice = []
    for d in range(1, c // 2 + 1):
        for i in range(n):
            pair = (i, (i + d) % n)
            lattice.append(pair)
            edge_set.add((min(pair), max(pair)))
    for i, j in lattice:
        if rng.random() < p:
            old = (min(i, j), max(i, j))
            for _ in range(10 * n):
                r = int(rng.integers(n))
                cand = (min(i, r), max(i, r))
                if r != i and cand not in edge_set:
                    edge_set.discard(old)
                    edge_set.add(cand)
                    break
    edges, adjacency = _edges_from_pairs(edge_set, n)
    g = Graph(
        coords=_ring_coords(n),
        node_features=np.zeros((n, 0)),
        edges=edges,
        edge_features=np.zeros((edges.shape[0], 0)),
        adjacency=adjacency,
        labels={"C": c, "p": p},
    )
    return inverse_center_distance_features(normalize_coords(g))


def watts_strogatz_dataset(count, seed, c_values=(2, 4, 6, 8), n_nodes=80):
    """``count`` graphs cycling through the C values, p uniform in [0, 1]."""
    graphs = []
    for i in range(count):
        rng = substream(seed, i)
        params = WSParams(
            n_nodes=n_nodes,
            ring_degree=int(c_values[i % len(c_values)]),
            rewire_prob=float(rng.uniform()),
        )
        graphs.append(watts_strogatz(params, rng))
    return GraphDataset(graphs=graphs, generator="watts-strogatz", seed=seed)
