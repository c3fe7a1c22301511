"""The hierarchical graph VAE: preprocessing, encoder, latent heads, decoder, heads.

The network is an hourglass. Two message-passing rounds lift raw node and
edge features to the hidden width; three encoder blocks interleave graph
convolution with soft-cluster pooling (n -> 20 -> 5 -> global mean);
an 8-dimensional Gaussian bottleneck is sampled by reparameterization;
three decoder blocks upsample through the encoder's own cluster
assignments and binarized coarse adjacencies (skip connections); two
small dense heads reconstruct the input node and edge features.

All forward functions operate on a :class:`PackedBatch` -- any number of
graphs stacked into flat node/edge matrices -- so a mini-batch records a
single tape. A single graph is just a pack of one.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import IndexPlan, Tensor, constant, parameter
from .errors import ConfigError, ContractError, ShapeError
from .graph import Graph

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# parameters


def _glorot(rng, fan_in, fan_out):
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_parameters(cfg, rng):
    """Freshly initialized parameter tensors, keyed by canonical name.

    Weights are Glorot-uniform; biases zero except the log-sigma head
    bias at -1, which starts sigma near 0.37 and keeps the KL term from
    dominating early training.
    """
    h, d = cfg.hidden_dim, cfg.latent_dim
    f_v, f_e = cfg.node_dim, cfg.edge_dim
    k0, k1 = cfg.pool_sizes
    shapes = {}

    def dense(prefix, fan_in, fan_out):
        shapes[prefix + ".w"] = (fan_in, fan_out)
        shapes[prefix + ".b"] = (1, fan_out)

    dense("pre0.msg", 2 * f_v + f_e, h)
    dense("pre0.upd", f_v + h, h)
    dense("pre1.msg", 2 * h + f_e, h)
    dense("pre1.upd", 2 * h, h)
    for level, width in (("enc0", k0), ("enc1", k1)):
        dense(level + ".nbr", h, h)
        dense(level + ".mix", 2 * h, h)
        dense(level + ".assign1", h, h)
        dense(level + ".assign2", h, width)
    dense("enc2.nbr", h, h)
    dense("enc2.mix", 2 * h, h)
    dense("mu", h, d)
    dense("logsigma", h, d)
    dense("dec0.nbr", d, h)
    dense("dec0.mix", d + h, h)
    for level in ("dec1", "dec2"):
        dense(level + ".nbr", h, h)
        dense(level + ".mix", 2 * h, h)
    dense("node_head.0", h, h)
    dense("node_head.1", h, h)
    dense("node_head.2", h, f_v)
    dense("edge_head.0", 2 * h, h)
    dense("edge_head.1", h, f_e)

    params = {}
    for name, shape in shapes.items():  # insertion order: deterministic draws
        if name.endswith(".w"):
            params[name] = parameter(_glorot(rng, *shape))
        else:
            params[name] = parameter(np.zeros(shape))
    params["logsigma.b"].value[:] = -1.0
    return params


def clear_gradients(params):
    for p in params.values():
        p.clear_grad()


# ---------------------------------------------------------------------------
# batch packing


@dataclass
class PackedBatch:
    graphs: list
    node_starts: np.ndarray      # B+1 offsets into the flat node matrix
    edge_starts: np.ndarray      # B+1 offsets into the flat edge matrix
    node_x: Tensor               # N x f_v
    edge_x: Tensor               # E x f_e
    recv_plan: IndexPlan         # edge -> receiving node (global index)
    send_plan: IndexPlan         # edge -> sending node
    adjacencies: list            # per-graph dense adjacency (constants)
    pool_sizes: tuple            # effective (k0, k1) shared by the pack

    @property
    def size(self):
        return len(self.graphs)


def effective_pool_sizes(n_nodes, pool_sizes):
    """Pooling targets, shrunk for graphs smaller than the configured sizes."""
    sizes = []
    current = n_nodes
    for target in pool_sizes:
        k = min(current - 1, target)
        sizes.append(k)
        current = k
    return tuple(sizes)


def pack_graphs(graphs, pool_sizes=(20, 5)):
    """Stack graphs into one flat batch; all members must share pool targets."""
    if not graphs:
        raise ContractError("cannot pack an empty list of graphs")
    eff = effective_pool_sizes(graphs[0].n_nodes, pool_sizes)
    for g in graphs:
        if effective_pool_sizes(g.n_nodes, pool_sizes) != eff:
            raise ContractError("pack members must share effective pool sizes")
    if eff != tuple(pool_sizes):
        log.warning(
            "graphs with %d nodes shrink pooling targets %s -> %s",
            graphs[0].n_nodes, tuple(pool_sizes), eff,
        )
    node_starts = np.cumsum([0] + [g.n_nodes for g in graphs])
    edge_starts = np.cumsum([0] + [g.n_edges for g in graphs])
    n_total = int(node_starts[-1])
    recv = np.concatenate(
        [g.edges[:, 0] + off for g, off in zip(graphs, node_starts[:-1])]
    ) if edge_starts[-1] else np.zeros(0, dtype=np.intp)
    send = np.concatenate(
        [g.edges[:, 1] + off for g, off in zip(graphs, node_starts[:-1])]
    ) if edge_starts[-1] else np.zeros(0, dtype=np.intp)
    return PackedBatch(
        graphs=list(graphs),
        node_starts=node_starts,
        edge_starts=edge_starts,
        node_x=constant(np.vstack([g.node_features for g in graphs])),
        edge_x=constant(
            np.vstack([g.edge_features for g in graphs])
            if edge_starts[-1]
            else np.zeros((0, graphs[0].edge_features.shape[1]))
        ),
        recv_plan=IndexPlan(recv, n_total),
        send_plan=IndexPlan(send, n_total),
        adjacencies=[g.adjacency for g in graphs],
        pool_sizes=eff,
    )


def group_for_packing(graphs, pool_sizes=(20, 5)):
    """Split a graph list into packable runs (same effective pool sizes)."""
    runs = {}
    for g in graphs:
        runs.setdefault(effective_pool_sizes(g.n_nodes, pool_sizes), []).append(g)
    return list(runs.values())


def _uniform_starts(count, block):
    return np.arange(count + 1) * block


# ---------------------------------------------------------------------------
# forward pieces


def _dense(params, prefix, x):
    return ad.linear(x, params[prefix + ".w"], params[prefix + ".b"])


def _message_round(params, prefix, v, batch):
    """One message-passing round: per-edge messages, summed into receivers.

    The dense layer on [v_i, v_j, e_ij] is evaluated as three node/edge
    level products (the layer distributes over the concatenation), so the
    expensive matmuls run once per node instead of once per edge.
    """
    w = params[prefix + ".msg.w"]
    b = params[prefix + ".msg.b"]
    in_dim = v.value.shape[1]
    w_self = ad.slice_rows(w, 0, in_dim)
    w_nbr = ad.slice_rows(w, in_dim, 2 * in_dim)
    w_edge = ad.slice_rows(w, 2 * in_dim, w.value.shape[0])
    self_term = ad.gather_rows(ad.matmul(v, w_self), batch.recv_plan)
    nbr_term = ad.gather_rows(ad.matmul(v, w_nbr), batch.send_plan)
    edge_term = ad.linear(batch.edge_x, w_edge, b)
    messages = ad.relu(ad.add(ad.add(self_term, nbr_term), edge_term))
    aggregated = ad.scatter_sum_rows(messages, batch.recv_plan)
    update_in = ad.concat_cols(v, aggregated)
    return ad.relu(_dense(params, prefix + ".upd", update_in))


def preprocess(params, batch):
    """Two message-passing rounds lifting input features to the hidden width."""
    v = batch.node_x
    v = _message_round(params, "pre0", v, batch)
    v = _message_round(params, "pre1", v, batch)
    return v


def gcl(params, prefix, v, adjacencies, starts):
    """Graph convolution: mix each node with the sum of transformed neighbors."""
    transformed = ad.relu(_dense(params, prefix + ".nbr", v))
    aggregated = ad.seg_adj_matmul(adjacencies, transformed, starts)
    return ad.relu(_dense(params, prefix + ".mix", ad.concat_cols(v, aggregated)))


def cluster_assignments(params, prefix, v, k):
    """Row-stochastic soft assignment of nodes to k clusters (two dense layers)."""
    hidden = ad.relu(_dense(params, prefix + ".assign1", v))
    logits = _dense(params, prefix + ".assign2", hidden)
    if k < logits.value.shape[1]:
        logits = ad.slice_cols(logits, 0, k)
    return ad.softmax_rows(logits)


def coarse_adjacency(s_value, adjacencies, starts_fine):
    """Per-graph pooled adjacency S_g^T A_g S_g (plain arrays)."""
    coarse = []
    for a_g, (f0, f1) in zip(adjacencies, zip(starts_fine[:-1], starts_fine[1:])):
        s_g = s_value[f0:f1]
        coarse.append(s_g.T @ a_g @ s_g)
    return coarse


def mincut_pool(params, prefix, v, adjacencies, starts_fine, k):
    """Soft-cluster pooling: S, pooled features S^T V, coarse adjacency S^T A S.

    The coarse adjacency feeds only the (non-differentiable) binarization,
    so it is computed outside the tape.
    """
    batch = len(starts_fine) - 1
    s = cluster_assignments(params, prefix, v, k)
    starts_coarse = _uniform_starts(batch, k)
    pooled = ad.seg_pool(s, v, starts_fine, starts_coarse)
    coarse = coarse_adjacency(s.value, adjacencies, starts_fine)
    return s, pooled, coarse


def binarize_adjacency(a_hat, threshold):
    """Zero the diagonal, symmetrically degree-normalize, then threshold to 0/1.

    Rows with zero degree get a zero normalization factor, so isolated
    pooled clusters stay disconnected rather than producing NaNs.
    """
    a_hat = np.asarray(a_hat, dtype=np.float64)
    if a_hat.ndim != 2 or a_hat.shape[0] != a_hat.shape[1]:
        raise ShapeError(f"expected a square matrix, got {a_hat.shape}")
    a_check = a_hat.copy()
    np.fill_diagonal(a_check, 0.0)
    degrees = a_check.sum(axis=1)
    inv_sqrt = np.where(degrees > 0.0, 1.0 / np.sqrt(np.where(degrees > 0, degrees, 1.0)), 0.0)
    a_norm = inv_sqrt[:, None] * a_check * inv_sqrt[None, :]
    return (a_norm >= threshold).astype(np.float64)


@dataclass
class SkipState:
    """Everything the decoder and the pooling loss reuse from the encoder.

    assignments[l] is the packed row-stochastic S at level l; adjacencies[l]
    the per-graph binary adjacency lists (level 0 is the input graphs); and
    starts[l] the packed row offsets at that level.
    """

    assignments: list        # [S0, S1] packed tensors
    adjacencies: list        # [A0, A1, A2] lists of per-graph matrices
    starts: list             # [node_starts, starts_k0, starts_k1]
    batch: int

    @property
    def node_counts(self):
        return tuple(
            int(np.diff(s)[0]) for s in self.starts
        )


def encode(params, batch, cfg):
    """Compress a packed batch to per-graph latent means and deviations."""
    k0, k1 = batch.pool_sizes
    t0, t1 = cfg.thresholds
    b = batch.size
    v = preprocess(params, batch)

    v = gcl(params, "enc0", v, batch.adjacencies, batch.node_starts)
    s0, v, coarse1 = mincut_pool(
        params, "enc0", v, batch.adjacencies, batch.node_starts, k0
    )
    a1 = [binarize_adjacency(a, t0) for a in coarse1]
    starts_k0 = _uniform_starts(b, k0)

    v = gcl(params, "enc1", v, a1, starts_k0)
    s1, v, coarse2 = mincut_pool(params, "enc1", v, a1, starts_k0, k1)
    a2 = [binarize_adjacency(a, t1) for a in coarse2]
    starts_k1 = _uniform_starts(b, k1)

    v = gcl(params, "enc2", v, a2, starts_k1)
    h = ad.seg_mean_rows(v, starts_k1)  # global mean pool to one node per graph

    mu = _dense(params, "mu", h)
    # saturate the log-deviation so sigma and sigma^2 stay finite for any
    # finite input; +-60 is far outside the range training ever visits
    sigma = ad.exp(ad.clip(_dense(params, "logsigma", h), -60.0, 60.0))
    skips = SkipState(
        assignments=[s0, s1],
        adjacencies=[batch.adjacencies, a1, a2],
        starts=[batch.node_starts, starts_k0, starts_k1],
        batch=b,
    )
    return mu, sigma, skips


def sample_latent(mu, sigma, rng):
    """Reparameterized draw z = mu + eps * sigma; gradients reach both heads."""
    eps = rng.standard_normal(mu.value.shape)
    return ad.add(mu, ad.mul(constant(eps), sigma))


def decode(params, z, skips):
    """Mirror the encoder: upsample through the stored assignments and GCLs."""
    if z.value.shape[0] != skips.batch:
        raise ContractError(
            f"latent batch {z.value.shape[0]} does not match skips ({skips.batch})"
        )
    b = skips.batch
    starts_n, starts_k0, starts_k1 = skips.starts
    k1 = int(starts_k1[-1]) // b
    # global-pool level: the assignment is the all-ones column, which
    # broadcasts each graph's latent vector to its k1 coarse nodes
    ones = constant(np.ones((int(starts_k1[-1]), 1)))
    v = ad.seg_upsample(ones, z, starts_k1, _uniform_starts(b, 1))
    v = gcl(params, "dec0", v, skips.adjacencies[2], starts_k1)
    v = ad.seg_upsample(skips.assignments[1], v, starts_k0, starts_k1)
    v = gcl(params, "dec1", v, skips.adjacencies[1], starts_k0)
    v = ad.seg_upsample(skips.assignments[0], v, starts_n, starts_k0)
    v = gcl(params, "dec2", v, skips.adjacencies[0], starts_n)
    return v


def reconstruct_heads(params, v_dec, batch):
    """Dense reconstruction heads for node and edge features (no output activation)."""
    h = ad.relu(_dense(params, "node_head.0", v_dec))
    h = ad.relu(_dense(params, "node_head.1", h))
    node_hat = _dense(params, "node_head.2", h)

    w = params["edge_head.0.w"]
    hidden = w.value.shape[1]
    half = w.value.shape[0] // 2
    w_i = ad.slice_rows(w, 0, half)
    w_j = ad.slice_rows(w, half, 2 * half)
    # concat(V[i], V[j]) @ W == V[i] @ W_i + V[j] @ W_j, evaluated node-wise
    term_i = ad.gather_rows(ad.matmul(v_dec, w_i), batch.recv_plan)
    term_j = ad.gather_rows(ad.matmul(v_dec, w_j), batch.send_plan)
    e = ad.relu(ad.add(ad.add(term_i, term_j), params["edge_head.0.b"]))
    edge_hat = _dense(params, "edge_head.1", e)
    return node_hat, edge_hat


def forward(params, batch, cfg, rng):
    """Full pass: encode, sample, decode, reconstruct."""
    mu, sigma, skips = encode(params, batch, cfg)
    z = sample_latent(mu, sigma, rng)
    v_dec = decode(params, z, skips)
    node_hat, edge_hat = reconstruct_heads(params, v_dec, batch)
    return mu, sigma, skips, node_hat, edge_hat


# ---------------------------------------------------------------------------
# checkpoints

CHECKPOINT_VERSION = 1


def save_checkpoint(path, params, cfg):
    arrays = {name: p.value for name, p in params.items()}
    np.savez(
        path,
        __version__=np.array([CHECKPOINT_VERSION]),
        __config__=np.array([json.dumps(cfg.to_dict(), sort_keys=True)]),
        **arrays,
    )


def load_checkpoint(path):
    """Parameters and config from a checkpoint; shapes validated against config."""
    from .config import TrainConfig

    with np.load(path, allow_pickle=False) as data:
        if "__version__" not in data or int(data["__version__"][0]) != CHECKPOINT_VERSION:
            raise ConfigError(f"unsupported checkpoint version in {path}")
        cfg = TrainConfig.from_dict(json.loads(str(data["__config__"][0])))
        params = {
            name: parameter(data[name])
            for name in data.files
            if not name.startswith("__")
        }
    expected = init_parameters(cfg, np.random.default_rng(0))
    if set(expected) != set(params):
        raise ConfigError("checkpoint parameter names do not match its config")
    for name, p in expected.items():
        if params[name].value.shape != p.value.shape:
            raise ConfigError(
                f"checkpoint parameter {name} has shape {params[name].value.shape}, "
                f"expected {p.value.shape}"
            )
    return params, cfg
