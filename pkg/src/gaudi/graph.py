"""Graph data model and geometric graph construction.

A :class:`Graph` is the unit flowing through the whole pipeline: node
coordinates, node/edge feature matrices, an explicit edge list (undirected
edges stored directed both ways) and the matching dense adjacency matrix,
plus a label map holding the generating parameters.

Graphs are immutable by convention after construction; nothing here
mutates them once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DegenerateInputError, ShapeError


@dataclass
class Graph:
    coords: np.ndarray          # n x d, d in {2, 3}
    node_features: np.ndarray   # n x f_v
    edges: np.ndarray           # e x 2 int, both directions present
    edge_features: np.ndarray   # e x f_e
    adjacency: np.ndarray       # n x n binary, symmetric, zero diagonal
    labels: dict = field(default_factory=dict)

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @property
    def n_edges(self):
        return self.edges.shape[0]


def check_graph(g):
    """Validate the structural invariants of a graph; raises on violation."""
    n = g.coords.shape[0]
    if g.adjacency.shape != (n, n):
        raise ShapeError(f"adjacency shape {g.adjacency.shape} does not match n={n}")
    if not np.array_equal(g.adjacency, g.adjacency.T):
        raise ContractError("adjacency is not symmetric")
    if np.any(np.diag(g.adjacency) != 0):
        raise ContractError("adjacency has nonzero diagonal")
    if g.node_features.shape[0] != n:
        raise ShapeError("node_features row count does not match n")
    if g.edge_features.shape[0] != g.edges.shape[0]:
        raise ShapeError("edge_features row count does not match edge count")
    if not (np.isfinite(g.node_features).all() and np.isfinite(g.edge_features).all()):
        raise ContractError("non-finite feature values")
    from_list = np.zeros((n, n))
    if g.edges.size:
        from_list[g.edges[:, 0], g.edges[:, 1]] = 1.0
    if not np.array_equal(from_list, g.adjacency):
        raise ContractError("edge list and adjacency disagree")
    return g


def _edges_from_pairs(pairs, n):
    """Directed edge list and adjacency from canonical undirected pairs.

    Pairs are deduplicated and sorted lexicographically; each appears as
    (i, j) immediately followed by (j, i), so the file layout and all
    scatter plans are deterministic.
    """
    uniq = sorted({(min(i, j), max(i, j)) for i, j in pairs})
    edges = np.zeros((2 * len(uniq), 2), dtype=np.intp)
    for e, (i, j) in enumerate(uniq):
        edges[2 * e] = (i, j)
        edges[2 * e + 1] = (j, i)
    adjacency = np.zeros((n, n))
    if edges.size:
        adjacency[edges[:, 0], edges[:, 1]] = 1.0
    return edges, adjacency


def pairwise_distances(points, periodic_box=None):
    """All-pairs Euclidean distances; minimum-image convention when periodic."""
    diff = points[:, None, :] - points[None, :, :]
    if periodic_box is not None:
        box = float(periodic_box)
        diff -= box * np.round(diff / box)
    return np.sqrt((diff * diff).sum(axis=2))


def _neighbor_pairs(dist, k, furthest):
    n = dist.shape[0]
    pairs = []
    idx = np.arange(n)
    for i in range(n):
        row = dist[i].copy()
        row[i] = -np.inf if furthest else np.inf
        key = -row if furthest else row
        order = np.lexsort((idx, key))  # ties broken by lower node index
        for j in order[:k]:
            pairs.append((i, int(j)))
    return pairs


def knn_graph(points, k, periodic_box=None, labels=None):
    """Connect each point to its k nearest neighbors, symmetrized by union.

    Distances are Euclidean, or minimum-image when ``periodic_box`` (the
    square box side) is given. Ties break toward the lower node index.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n <= k:
        raise ContractError(f"knn_graph needs more points than k ({n} <= {k})")
    dist = pairwise_distances(points, periodic_box)
    pairs = _neighbor_pairs(dist, k, furthest=False)
    edges, adjacency = _edges_from_pairs(pairs, n)
    return Graph(
        coords=points,
        node_features=np.zeros((n, 0)),
        edges=edges,
        edge_features=np.zeros((edges.shape[0], 0)),
        adjacency=adjacency,
        labels=dict(labels or {}),
    )


def kfn_graph(points, k, labels=None):
    """Connect each point to the k points at greatest Euclidean distance."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n <= k:
        raise ContractError(f"kfn_graph needs more points than k ({n} <= {k})")
    dist = pairwise_distances(points)
    pairs = _neighbor_pairs(dist, k, furthest=True)
    edges, adjacency = _edges_from_pairs(pairs, n)
    return Graph(
        coords=points,
        node_features=np.zeros((n, 0)),
        edges=edges,
        edge_features=np.zeros((edges.shape[0], 0)),
        adjacency=adjacency,
        labels=dict(labels or {}),
    )


def normalize_coords(g):
    """Center coordinates at the origin and scale by their joint standard deviation.

    The divisor is the scalar std over all coordinate entries of the graph,
    so the operation is idempotent. Labels and connectivity are preserved.
    """
    if g.coords.shape[0] < 2:
        raise ContractError("normalize_coords needs at least 2 nodes")
    centered = g.coords - g.coords.mean(axis=0, keepdims=True)
    std = float(centered.std())
    if std == 0.0:
        raise DegenerateInputError("all points coincide; coordinate variance is zero")
    return Graph(
        coords=centered / std,
        node_features=g.node_features,
        edges=g.edges,
        edge_features=g.edge_features,
        adjacency=g.adjacency,
        labels=g.labels,
    )


def inverse_center_distance_features(g, eps=1e-6):
    """Single-column features: 1/distance-to-center per node, 1/length per edge.

    ``eps`` clamps near-coincident points so features stay finite.
    """
    radii = np.sqrt((g.coords * g.coords).sum(axis=1))
    node_features = (1.0 / np.maximum(radii, eps)).reshape(-1, 1)
    if g.edges.size:
        diffs = g.coords[g.edges[:, 0]] - g.coords[g.edges[:, 1]]
        lengths = np.sqrt((diffs * diffs).sum(axis=1))
        edge_features = (1.0 / np.maximum(lengths, eps)).reshape(-1, 1)
    else:
        edge_features = np.zeros((0, 1))
    return Graph(
        coords=g.coords,
        node_features=node_features,
        edges=g.edges,
        edge_features=edge_features,
        adjacency=g.adjacency,
        labels=g.labels,
    )


@dataclass
class GraphDataset:
    """Ordered collection of graphs sharing feature dimensionalities."""

    graphs: list
    generator: str = ""
    seed: int = 0

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    @property
    def feature_dims(self):
        """(f_v, f_e, coord_dim) shared by all graphs; zeros when empty."""
        if not self.graphs:
            return 0, 0, 0
        g = self.graphs[0]
        return (
            g.node_features.shape[1],
            g.edge_features.shape[1],
            g.coords.shape[1],
        )

    def validate(self):
        f_v, f_e, d = self.feature_dims
        for i, g in enumerate(self.graphs):
            if (
                g.node_features.shape[1] != f_v
                or g.edge_features.shape[1] != f_e
                or g.coords.shape[1] != d
            ):
                raise ShapeError(f"graph {i} has inconsistent feature dimensions")
        return self
