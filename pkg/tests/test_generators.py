"""Generator tests: spec examples plus independent oracles."""

import numpy as np
import pytest

from gaudi.dataset_io import save_dataset
from gaudi.errors import ContractError, FormatError
from gaudi.generators import (
    Frame,
    SMLMParams,
    VicsekParams,
    WSParams,
    brain_ingest,
    brain_surrogate,
    frames_to_graphs,
    smlm_dataset,
    smlm_sample,
    surrogate_matrix,
    threshold_pairs,
    vicsek_alignment,
    vicsek_clustering,
    vicsek_dataset,
    vicsek_simulate,
    voronoi_areas_periodic,
    watts_strogatz,
    watts_strogatz_dataset,
)
from gaudi.generators._rng import substream
from gaudi.generators.smlm import sample_points


# ---------------------------------------------------------------------------
# Watts-Strogatz


def test_ws_ring_cycle():
    g = watts_strogatz(WSParams(ring_degree=2, rewire_prob=0.0), substream(0, 0))
    degrees = g.adjacency.sum(axis=0)
    assert np.all(degrees == 2)
    assert g.n_edges // 2 == 80


def test_ws_lattice_clustering_coefficient():
    g = watts_strogatz(WSParams(ring_degree=4, rewire_prob=0.0), substream(0, 0))
    adj = g.adjacency
    assert np.all(adj.sum(axis=0) == 4)
    assert g.n_edges // 2 == 160
    # brute-force local clustering: triangles among each node's neighbors
    for i in range(80):
        nbrs = np.flatnonzero(adj[i])
        links = sum(
            adj[a, b] for ai, a in enumerate(nbrs) for b in nbrs[ai + 1 :]
        )
        coeff = links / (len(nbrs) * (len(nbrs) - 1) / 2)
        assert coeff == 0.5


@pytest.mark.parametrize("p", [0.1, 0.5, 1.0])
def test_ws_edge_count_conserved(p):
    for c in (2, 4, 6, 8):
        g = watts_strogatz(WSParams(ring_degree=c, rewire_prob=p), substream(3, c))
        assert g.n_edges // 2 == 80 * c // 2


def test_ws_features_constant_on_ring():
    g = watts_strogatz(WSParams(ring_degree=2, rewire_prob=0.0), substream(0, 0))
    # ring layout: all nodes at the same normalized radius sqrt(2)
    assert np.allclose(g.node_features, 1.0 / np.sqrt(2.0))


def test_ws_dataset_labels_and_determinism(tmp_path):
    ds = watts_strogatz_dataset(12, seed=5)
    assert {g.labels["C"] for g in ds} == {2, 4, 6, 8}
    assert all(0.0 <= g.labels["p"] <= 1.0 for g in ds)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(ds, p1)
    save_dataset(watts_strogatz_dataset(12, seed=5), p2)
    assert p1.read_bytes() == p2.read_bytes()


# ---------------------------------------------------------------------------
# SMLM


def _noise_free_ring_params():
    return SMLMParams(
        shape_class="ring",
        complexes_min=6,
        complexes_max=6,
        protein_offset_std=0.0,
        label_prob=1.0,
        localization_std=0.0,
        radius_min=50.0,
        radius_max=50.0,
        ring_error_std_max=0.0,
        noise_rate=0.0,
    )


def test_smlm_noise_free_points_on_circle():
    points, shape = sample_points(_noise_free_ring_params(), substream(1, 0))
    assert shape == "ring"
    radii = np.sqrt((points**2).sum(axis=1))
    assert np.allclose(radii, 50.0)
    assert len(points) >= 6 * 3  # every protein labeled, >= 1 localization each


def test_smlm_geometric_sampler_mean():
    rng = substream(7, 0)
    draws = rng.geometric(1.0 / 8.0, size=100_000)
    assert draws.min() >= 1
    assert 7.8 <= draws.mean() <= 8.2


def test_smlm_class_balance():
    params = SMLMParams()
    count = sum(
        sample_points(params, substream(11, i))[1] == "ring" for i in range(10_000)
    )
    assert abs(count / 10_000 - 0.5) <= 0.015


def test_smlm_sample_graph_shape():
    g = smlm_sample(SMLMParams(), seed=3, index=0)
    assert g.labels["shape_class"] in ("ring", "spot")
    assert g.node_features.shape[1] == 1
    assert g.edge_features.shape[1] == 1
    assert g.n_nodes >= 8
    assert np.allclose(g.coords.mean(axis=0), 0.0, atol=1e-12)


def test_smlm_rejects_degenerate_and_regenerates(caplog):
    # label_prob ~ 0 gives mostly-empty draws; rejection must kick in
    params = SMLMParams(label_prob=0.02, noise_rate=2.0)
    with caplog.at_level("WARNING"):
        g = smlm_sample(params, seed=9, index=0)
    assert g.n_nodes >= 8
    assert any("regenerating" in r.message for r in caplog.records)


def test_smlm_dataset_deterministic(tmp_path):
    d1 = smlm_dataset(5, seed=21)
    d2 = smlm_dataset(5, seed=21)
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    save_dataset(d1, p1)
    save_dataset(d2, p2)
    assert p1.read_bytes() == p2.read_bytes()


# ---------------------------------------------------------------------------
# Vicsek


def test_vicsek_single_particle_constant_heading():
    params = VicsekParams(n_particles=1, noise=0.0, total_steps=50, analyzed_steps=50)
    frames = vicsek_simulate(
        params, substream(0, 0), initial_positions=[[5.0, 5.0]], initial_headings=[0.7]
    )
    for f in frames:
        assert np.allclose(f.headings, 0.7)


def test_vicsek_two_particles_average_headings():
    params = VicsekParams(
        n_particles=2, noise=0.0, flock_radius=2.0, total_steps=3, analyzed_steps=3
    )
    frames = vicsek_simulate(
        params,
        substream(0, 0),
        initial_positions=[[5.0, 5.0], [5.0, 5.0]],
        initial_headings=[0.8, -0.8],
    )
    # circular mean of (theta, -theta) is 0 after one step, and stays there
    for f in frames:
        assert np.allclose(f.headings, 0.0, atol=1e-12)


def test_vicsek_speed_and_wrapping():
    params = VicsekParams(n_particles=4, noise=1.0, total_steps=40, analyzed_steps=40)
    rng = substream(2, 0)
    frames = vicsek_simulate(params, rng)
    prev = None
    for f in frames:
        assert np.all(f.positions >= 0.0) and np.all(f.positions < params.box_size)
        if prev is not None:
            diff = f.positions - prev
            diff -= params.box_size * np.round(diff / params.box_size)
            steps = np.sqrt((diff**2).sum(axis=1))
            assert np.allclose(steps, params.speed * params.dt, atol=1e-9)
        prev = f.positions


def test_alignment_trivial_cases():
    assert vicsek_alignment(Frame(np.zeros((4, 2)), np.full(4, 1.1))) == pytest.approx(1.0)
    opposing = np.array([0.0, np.pi, 0.5, 0.5 + np.pi, 1.3, 1.3 + np.pi, 2.0, 2.0 + np.pi])
    assert vicsek_alignment(Frame(np.zeros((8, 2)), opposing)) == pytest.approx(0.0, abs=1e-12)


def test_alignment_matches_direct_recomputation(rng):
    headings = rng.uniform(-np.pi, np.pi, size=37)
    got = vicsek_alignment(Frame(np.zeros((37, 2)), headings))
    direct = np.hypot(np.cos(headings).sum(), np.sin(headings).sum()) / 37
    assert abs(got - direct) < 1e-12


def test_voronoi_grid_areas():
    side = np.arange(5.0, 100.0, 10.0)
    xx, yy = np.meshgrid(side, side)
    pts = np.column_stack((xx.ravel(), yy.ravel()))
    areas = voronoi_areas_periodic(pts, box=100.0)
    assert np.allclose(areas, 100.0, atol=1e-6)
    c = vicsek_clustering(Frame(pts, np.zeros(100)), flock_radius=2.0, box=100.0)
    assert c == 0.0


def test_voronoi_partitions_box(rng):
    pts = rng.uniform(0.0, 100.0, size=(60, 2))
    areas = voronoi_areas_periodic(pts, box=100.0)
    assert abs(areas.sum() - 100.0**2) < 1e-6


def test_voronoi_tight_cluster(rng):
    pts = 50.0 + rng.normal(scale=0.3, size=(100, 2))
    c = vicsek_clustering(Frame(pts, np.zeros(100)), flock_radius=2.0, box=100.0)
    assert c > 0.8


def test_frames_to_graphs_complete_case():
    # 13 points, k=12: the graph is complete, so every degree is 12
    pts = np.column_stack((np.linspace(10.0, 40.0, 13), np.full(13, 5.0)))
    pts[0] = (1.0, 5.0)
    pts[1] = (99.0, 5.0)  # min-image distance 2 across the boundary
    graphs = frames_to_graphs([Frame(pts, np.zeros(13))], box=100.0, k=12)
    g = graphs[0]
    assert np.all(g.node_features == 12.0)
    edge = np.flatnonzero((g.edges[:, 0] == 0) & (g.edges[:, 1] == 1))
    assert g.edge_features[edge[0], 0] == pytest.approx(0.5)


def test_frames_to_graphs_degrees_match_brute_force(rng):
    pts = rng.uniform(0.0, 100.0, size=(40, 2))
    g = frames_to_graphs([Frame(pts, np.zeros(40))], box=100.0, k=5)[0]
    diff = pts[:, None, :] - pts[None, :, :]
    diff -= 100.0 * np.round(diff / 100.0)
    dist = np.sqrt((diff**2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    neighbor = np.zeros((40, 40), dtype=bool)
    for i in range(40):
        for j in np.argsort(dist[i], kind="stable")[:5]:
            neighbor[i, j] = neighbor[j, i] = True
    assert np.array_equal(g.adjacency.astype(bool), neighbor)
    assert np.array_equal(g.node_features[:, 0], neighbor.sum(axis=1))


def test_vicsek_dataset_labels():
    ds = vicsek_dataset(2, seed=4, total_steps=30, analyzed_steps=3)
    assert len(ds) == 6
    assert {g.labels["R_f"] for g in ds} == {1.0, 2.0}
    assert {g.labels["sim_id"] for g in ds} == {0, 1}
    assert all(0.0 <= g.labels["eta"] <= 1.0 for g in ds)


# ---------------------------------------------------------------------------
# brain


def _random_symmetric(rng, n=120):
    m = np.triu(rng.uniform(0.05, 1.0, size=(n, n)), k=1)
    return m + m.T


def test_threshold_keeps_top_fifth_of_positive_values(rng):
    matrix = np.zeros((120, 120))
    iu = np.triu_indices(120, k=1)
    order = rng.permutation(iu[0].size)[:100]
    matrix[iu[0][order], iu[1][order]] = np.linspace(1.0, 2.0, 100)
    matrix = matrix + matrix.T
    assert len(threshold_pairs(matrix)) == 20


def test_threshold_all_equal_keeps_everything():
    matrix = np.ones((120, 120)) - np.eye(120)
    assert len(threshold_pairs(matrix)) == 120 * 119 // 2


def test_surrogate_edge_count(tmp_path):
    ds = brain_surrogate(2, seed=13, out_dir=tmp_path)
    expected = int(np.ceil(0.2 * (120 * 119 / 2)))
    for g in ds:
        assert g.n_edges // 2 == expected == 1428


def test_surrogate_planted_age_effect(rng):
    base = _random_symmetric(rng)
    coords = rng.normal(size=(120, 3))
    dist = np.sqrt(((coords[:, None] - coords[None]) ** 2).sum(axis=2))
    dist_norm = dist / dist.max()
    young = surrogate_matrix(base, dist_norm, 20.0, substream(0, 1))
    old = surrogate_matrix(base, dist_norm, 85.0, substream(0, 2))
    long_range = dist_norm > np.median(dist_norm)
    assert old[long_range].mean() < young[long_range].mean()


def test_surrogate_files_byte_identical(tmp_path):
    brain_surrogate(3, seed=17, out_dir=tmp_path / "a")
    brain_surrogate(3, seed=17, out_dir=tmp_path / "b")
    for name in ("matrices.txt", "coords.txt", "metadata.txt"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_surrogate_age_signal_regression(tmp_path):
    ds = brain_surrogate(400, seed=29, out_dir=tmp_path)
    # independent oracle: regress mean connection strength on age directly
    # from the emitted matrix file
    from gaudi.generators.brain import _read_matrix_file, _read_metadata_file

    subjects = _read_matrix_file(tmp_path / "matrices.txt")
    meta = _read_metadata_file(tmp_path / "metadata.txt")
    ages = np.array([meta[sid][0] for sid, _ in subjects])
    strengths = np.array([m.sum() / (120 * 119) for _, m in subjects])
    slope, intercept = np.polyfit(ages, strengths, 1)
    pred = slope * ages + intercept
    r2 = 1.0 - ((strengths - pred) ** 2).sum() / ((strengths - strengths.mean()) ** 2).sum()
    assert r2 >= 0.3
    assert len(ds) == 400


def test_ingest_rejects_asymmetric(tmp_path):
    ds_dir = tmp_path / "cohort"
    brain_surrogate(2, seed=31, out_dir=ds_dir)
    lines = (ds_dir / "matrices.txt").read_text().splitlines()
    row1 = lines[1].split(",")
    row1[5] = "%.17g" % (float(row1[5]) + 1.0)  # break symmetry for sub-0000
    lines[1] = ",".join(row1)
    (ds_dir / "matrices.txt").write_text("\n".join(lines) + "\n")
    with pytest.raises(FormatError, match="sub-0000"):
        brain_ingest(
            ds_dir / "matrices.txt", ds_dir / "coords.txt", ds_dir / "metadata.txt"
        )


def test_ingest_labels(tmp_path):
    ds = brain_surrogate(3, seed=37, out_dir=tmp_path)
    for g in ds:
        assert 18.0 <= g.labels["age"] <= 88.0
        assert g.labels["sex"] in ("F", "M")


def test_zero_noise_vicsek_reaches_consensus():
    # eta=0, R_f=2 dense regime aligns essentially fully by step 8000
    params = VicsekParams(flock_radius=2.0, noise=0.0, total_steps=8000, analyzed_steps=1)
    frames = vicsek_simulate(params, substream(42, 0))
    assert vicsek_alignment(frames[-1]) >= 0.99
