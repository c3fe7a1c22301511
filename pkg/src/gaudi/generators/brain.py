"""Brain connectivity ingestion plus a synthetic surrogate cohort.

Ingestion reads three plain-text files (connection matrices, region
coordinates, subject metadata), keeps the top 20 percent strongest
connections per subject (ties included), and builds graphs with
inverse-distance features over the normalized 3-D region coordinates.

The surrogate generator writes the same three files for a synthetic
cohort with a planted aging effect: long-range connections attenuate
monotonically with age. It stands in for non-redistributable cohort
data; real files in the same format drop in unmodified.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError, FormatError
from ..graph import (
    Graph,
    GraphDataset,
    _edges_from_pairs,
    inverse_center_distance_features,
    normalize_coords,
)
from ._rng import substream

N_REGIONS = 120
KEEP_FRACTION = 0.20
ANATOMICAL_GROUPS = (
    "frontal",
    "parietal",
    "temporal",
    "occipital",
    "subcortical",
    "cerebellar",
)


@dataclass
class BrainRecord:
    subject_id: str
    matrix: np.ndarray  # 120 x 120 symmetric, non-negative, zero diagonal
    age: float
    sex: str


def _check_matrix(subject_id, matrix):
    if matrix.shape != (N_REGIONS, N_REGIONS):
        raise FormatError(
            f"subject {subject_id}: matrix is {matrix.shape}, expected "
            f"({N_REGIONS}, {N_REGIONS})"
        )
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-9):
        raise FormatError(f"subject {subject_id}: matrix is not symmetric")
    if np.any(matrix < 0.0):
        raise FormatError(f"subject {subject_id}: negative connection values")
    matrix = matrix.copy()
    np.fill_diagonal(matrix, 0.0)
    return matrix


def threshold_pairs(matrix, keep_fraction=KEEP_FRACTION):
    """Undirected pairs whose strength reaches the keep-fraction cutoff.

    Zero entries are absent connections and never become edges. The
    cutoff is the ceil(keep_fraction * m)-th largest of the m positive
    upper-triangle values; ties at the cutoff are all kept.
    """
    iu, ju = np.triu_indices(matrix.shape[0], k=1)
    values = matrix[iu, ju]
    positive = values[values > 0.0]
    if positive.size == 0:
        return []
    k = int(np.ceil(keep_fraction * positive.size))
    cutoff = np.sort(positive, kind="stable")[-k]
    keep = values >= cutoff
    return list(zip(iu[keep], ju[keep]))


def _subject_graph(record, coords):
    pairs = threshold_pairs(record.matrix)
    edges, adjacency = _edges_from_pairs(pairs, N_REGIONS)
    g = Graph(
        coords=coords,
        node_features=np.zeros((N_REGIONS, 0)),
        edges=edges,
        edge_features=np.zeros((edges.shape[0], 0)),
        adjacency=adjacency,
        labels={"age": record.age, "sex": record.sex, "subject_id": record.subject_id},
    )
    return inverse_center_distance_features(normalize_coords(g))


# ---------------------------------------------------------------------------
# file parsing


def _read_matrix_file(path):
    subjects = []
    with open(path, encoding="utf-8") as fh:
        lines = [line.strip() for line in fh if line.strip()]
    i = 0
    while i < len(lines):
        subject_id = lines[i]
        rows = lines[i + 1 : i + 1 + N_REGIONS]
        if len(rows) < N_REGIONS:
            raise FormatError(
                f"subject {subject_id}: expected {N_REGIONS} matrix rows, got {len(rows)}"
            )
        try:
            matrix = np.array(
                [[float(x) for x in row.split(",")] for row in rows]
            )
        except ValueError as exc:
            raise FormatError(f"subject {subject_id}: {exc}") from exc
        if matrix.shape[1] != N_REGIONS:
            raise FormatError(
                f"subject {subject_id}: matrix is {matrix.shape}, expected "
                f"({N_REGIONS}, {N_REGIONS})"
            )
        subjects.append((subject_id, _check_matrix(subject_id, matrix)))
        i += 1 + N_REGIONS
    return subjects


def _read_coords_file(path):
    coords = np.zeros((N_REGIONS, 3))
    names = []
    groups = []
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    if len(rows) != N_REGIONS:
        raise FormatError(f"coords file has {len(rows)} rows, expected {N_REGIONS}")
    for row in rows:
        parts = [p.strip() for p in row.split(",")]
        if len(parts) != 6:
            raise FormatError(f"coords row has {len(parts)} fields, expected 6")
        idx = int(parts[0])
        names.append(parts[1])
        groups.append(parts[2])
        coords[idx] = [float(parts[3]), float(parts[4]), float(parts[5])]
    return coords, names, groups


def _read_metadata_file(path):
    meta = {}
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip()]
    for row in rows:
        parts = [p.strip() for p in row.split(",")]
        if len(parts) != 3:
            raise FormatError(f"metadata row has {len(parts)} fields, expected 3")
        meta[parts[0]] = (float(parts[1]), parts[2])
    return meta


def brain_ingest(matrix_path, coords_path, metadata_path):
    """Build a dataset from the three-file ingestion format."""
    subjects = _read_matrix_file(matrix_path)
    coords, _, _ = _read_coords_file(coords_path)
    meta = _read_metadata_file(metadata_path)
    graphs = []
    for subject_id, matrix in subjects:
        if subject_id not in meta:
            raise FormatError(f"subject {subject_id}: missing metadata row")
        age, sex = meta[subject_id]
        record = BrainRecord(subject_id=subject_id, matrix=matrix, age=age, sex=sex)
        graphs.append(_subject_graph(record, coords))
    return GraphDataset(graphs=graphs, generator="brain", seed=0)


# ---------------------------------------------------------------------------
# surrogate cohort


def _surrogate_coords(rng):
    # roughly ellipsoidal region layout, fixed per cohort
    directions = rng.normal(size=(N_REGIONS, 3))
    directions /= np.sqrt((directions * directions).sum(axis=1, keepdims=True))
    radii = rng.uniform(0.6, 1.0, size=(N_REGIONS, 1))
    return directions * radii * np.array([70.0, 85.0, 60.0])


def surrogate_matrix(base, dist_norm, age, rng, age_effect=0.6, noise_std=0.02):
    """One subject's connection matrix with the planted aging attenuation."""
    f = (age - 18.0) / 70.0
    n = base.shape[0]
    noise = np.triu(rng.normal(0.0, noise_std, size=(n, n)), k=1)
    noise = noise + noise.T
    matrix = base * (1.0 - age_effect * f * dist_norm) + noise
    matrix = np.clip(matrix, 0.0, None)
    np.fill_diagonal(matrix, 0.0)
    return matrix


def brain_surrogate(n_subjects, seed, out_dir, age_effect=0.6, noise_std=0.02):
    """Write a synthetic cohort in the ingestion format and return its dataset.

    Connection strength between distant regions decays linearly with age,
    so age is recoverable from the surviving edge lengths after
    thresholding. Identical seeds produce byte-identical files.
    """
    if n_subjects < 2:
        raise ContractError("need at least 2 subjects")
    from pathlib import Path

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    coords = _surrogate_coords(substream(seed, 0))
    dist = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    dist_norm = dist / dist.max()

    base_rng = substream(seed, 1)
    base = base_rng.uniform(0.2, 1.0, size=(N_REGIONS, N_REGIONS))
    base = np.triu(base, k=1)
    base = base + base.T

    matrix_lines = []
    meta_lines = []
    for i in range(n_subjects):
        rng = substream(seed, 2, i)
        age = float(rng.uniform(18.0, 88.0))
        sex = "F" if rng.random() < 0.5 else "M"
        matrix = surrogate_matrix(base, dist_norm, age, rng, age_effect, noise_std)
        subject_id = f"sub-{i:04d}"
        matrix_lines.append(subject_id)
        matrix_lines.extend(
            ",".join("%.17g" % v for v in row) for row in matrix
        )
        meta_lines.append(f"{subject_id},{'%.17g' % age},{sex}")

    coords_lines = [
        f"{r},region_{r:03d},{ANATOMICAL_GROUPS[r % len(ANATOMICAL_GROUPS)]},"
        + ",".join("%.17g" % v for v in coords[r])
        for r in range(N_REGIONS)
    ]

    matrix_path = out_dir / "matrices.txt"
    coords_path = out_dir / "coords.txt"
    metadata_path = out_dir / "metadata.txt"
    matrix_path.write_text("\n".join(matrix_lines) + "\n", encoding="utf-8")
    coords_path.write_text("\n".join(coords_lines) + "\n", encoding="utf-8")
    metadata_path.write_text("\n".join(meta_lines) + "\n", encoding="utf-8")

    dataset = brain_ingest(matrix_path, coords_path, metadata_path)
    dataset.generator = "brain-surrogate"
    dataset.seed = seed
    return dataset
