"""Loss assembly and the training loop.

The objective is alpha * node MAE + gamma * edge MAE + beta * KL + the
pooling loss (always weighted 1). Reconstruction targets are the
normalized input node/edge features. Losses are computed per graph and
averaged over the mini-batch, so the learning-rate presets keep their
meaning across batch sizes.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tape, backward, constant
from .errors import ConfigError, ContractError, TrainingError
from .model import (
    clear_gradients,
    encode,
    forward,
    group_for_packing,
    init_parameters,
    pack_graphs,
)
from .optim import AdamState, adam_step

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# loss terms (all return per-graph (B, 1) tensors)


def reconstruction_loss(node_hat, node_target, edge_hat, edge_target, batch):
    """Per-graph mean absolute error over node and edge feature entries."""
    if node_hat.value.shape != node_target.value.shape:
        raise ContractError("node reconstruction shape mismatch")
    if edge_hat.value.shape != edge_target.value.shape:
        raise ContractError("edge reconstruction shape mismatch")
    l_node = ad.seg_mean_all(
        ad.absolute(ad.sub(node_hat, node_target)), batch.node_starts
    )
    l_edge = ad.seg_mean_all(
        ad.absolute(ad.sub(edge_hat, edge_target)), batch.edge_starts
    )
    return l_node, l_edge


def kl_loss(mu, sigma):
    """Per-graph KL(N(mu, diag sigma^2) || N(0, I)), closed form."""
    if np.any(sigma.value <= 0.0):
        raise ContractError("sigma must be positive")
    inner = ad.sub(
        ad.sub(ad.add(ad.mul(mu, mu), ad.mul(sigma, sigma)), constant([[1.0]])),
        ad.scale(ad.log(sigma), 2.0),
    )
    return ad.scale(ad.sum_cols(inner), 0.5)


def _mincut_level(s, adjacencies, starts):
    """One pooling level's loss: relaxed-cut term plus orthogonality penalty."""
    k = s.value.shape[1]
    batch = len(starts) - 1
    starts_coarse = np.arange(batch + 1) * k

    t = ad.seg_adj_matmul(adjacencies, s, starts)
    cut_num = ad.seg_sum_all(ad.mul(s, t), starts)
    degrees = np.vstack([a.sum(axis=1, keepdims=True) for a in adjacencies])
    row_mass = ad.sum_cols(ad.mul(s, s))
    cut_den = ad.seg_sum_all(ad.mul(row_mass, constant(degrees)), starts)
    cut = ad.scale(ad.safe_div(cut_num, cut_den), -1.0)

    sts = ad.seg_pool(s, s, starts, starts_coarse)
    norms = ad.seg_frobenius(sts, starts_coarse)
    normalized = ad.seg_scale(sts, ad.div(constant(np.ones((batch, 1))), norms), starts_coarse)
    target = constant(np.tile(np.eye(k) / np.sqrt(k), (batch, 1)))
    ortho = ad.seg_frobenius(ad.sub(normalized, target), starts_coarse)
    return cut, ortho


def mincut_loss(skips):
    """Pooling loss summed over the two cluster-assignment levels."""
    total = None
    parts = []
    for level in (0, 1):
        cut, ortho = _mincut_level(
            skips.assignments[level], skips.adjacencies[level], skips.starts[level]
        )
        parts.append((cut.value.copy(), ortho.value.copy()))
        level_total = ad.add(cut, ortho)
        total = level_total if total is None else ad.add(total, level_total)
    return total, parts


def total_loss(cfg, l_node, l_edge, l_kl, l_mincut):
    """Weighted batch-mean objective; raises naming any non-finite part."""
    parts = {
        "node": l_node,
        "edge": l_edge,
        "kl": l_kl,
        "mincut": l_mincut,
    }
    for name, part in parts.items():
        if not np.isfinite(part.value).all():
            raise TrainingError(f"non-finite {name} loss")
    weighted = ad.add(
        ad.add(
            ad.scale(ad.mean_all(l_node), cfg.alpha),
            ad.scale(ad.mean_all(l_edge), cfg.gamma),
        ),
        ad.add(
            ad.scale(ad.mean_all(l_kl), cfg.beta),
            ad.mean_all(l_mincut),  # pooling loss always weighted 1
        ),
    )
    return weighted


def batch_losses(params, batch, cfg, rng):
    """Forward pass plus all loss parts for one packed batch."""
    mu, sigma, skips, node_hat, edge_hat = forward(params, batch, cfg, rng)
    l_node, l_edge = reconstruction_loss(
        node_hat, batch.node_x, edge_hat, batch.edge_x, batch
    )
    l_kl = kl_loss(mu, sigma)
    l_mincut, _ = mincut_loss(skips)
    return l_node, l_edge, l_kl, l_mincut


# ---------------------------------------------------------------------------
# training loop


def _check_dims(dataset, cfg):
    f_v, f_e, _ = dataset.feature_dims
    if f_v != cfg.node_dim or f_e != cfg.edge_dim:
        raise ConfigError(
            f"dataset features ({f_v}, {f_e}) do not match config "
            f"({cfg.node_dim}, {cfg.edge_dim})"
        )


def train(dataset, cfg, rng=None):
    """Train on the dataset; returns (parameters, per-epoch loss trace).

    Deterministic given the seed: initialization, shuffling, and latent
    draws all come from one generator.
    """
    cfg.validate()
    if len(dataset) == 0:
        raise ContractError("dataset is empty")
    _check_dims(dataset, cfg)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    params = init_parameters(cfg, rng)
    state = AdamState()
    graphs = list(dataset)
    trace = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(graphs))
        sums = {"node": 0.0, "edge": 0.0, "kl": 0.0, "mincut": 0.0, "total": 0.0}
        for batch_index, lo in enumerate(range(0, len(order), cfg.batch_size)):
            chunk = [graphs[i] for i in order[lo : lo + cfg.batch_size]]
            try:
                step_parts = _train_step(params, chunk, cfg, rng, state)
            except TrainingError as exc:
                raise TrainingError(
                    f"epoch {epoch} batch {batch_index}: {exc}"
                ) from exc
            for key in sums:
                sums[key] += step_parts[key] * len(chunk)
        record = {"epoch": epoch}
        record.update({k: v / len(graphs) for k, v in sums.items()})
        trace.append(record)
        log.info(
            "epoch %d: total %.6f (node %.6f edge %.6f kl %.6f mincut %.6f)",
            epoch, record["total"], record["node"], record["edge"],
            record["kl"], record["mincut"],
        )
    return params, trace


def _train_step(params, chunk, cfg, rng, state):
    """One optimizer step on a mini-batch; returns per-graph mean loss parts."""
    clear_gradients(params)
    total = len(chunk)
    parts = {"node": 0.0, "edge": 0.0, "kl": 0.0, "mincut": 0.0, "total": 0.0}
    for group in group_for_packing(chunk, cfg.pool_sizes):
        batch = pack_graphs(group, cfg.pool_sizes)
        with Tape() as tape:
            l_node, l_edge, l_kl, l_mincut = batch_losses(params, batch, cfg, rng)
            loss = total_loss(cfg, l_node, l_edge, l_kl, l_mincut)
            share = ad.scale(loss, len(group) / total)
        backward(tape, share)
        parts["node"] += float(l_node.value.sum())
        parts["edge"] += float(l_edge.value.sum())
        parts["kl"] += float(l_kl.value.sum())
        parts["mincut"] += float(l_mincut.value.sum())
        parts["total"] += loss.item() * len(group)
    adam_step(params, state, cfg.lr)
    return {k: v / total for k, v in parts.items()}


# ---------------------------------------------------------------------------
# embedding


@dataclass
class EmbeddingRecord:
    """One analyzed unit: a latent mean vector plus its generating labels."""

    latent: np.ndarray
    labels: dict = field(default_factory=dict)


def embed(dataset, params, cfg, average_by=None, chunk_size=256):
    """Deterministic per-graph latent means, labels attached.

    With ``average_by`` (e.g. "sim_id"), records sharing that label are
    averaged into one; labels that vary within a group are dropped.
    """
    graphs = list(dataset)
    if not graphs:
        return []
    _check_dims(dataset, cfg)
    latents = np.zeros((len(graphs), cfg.latent_dim))
    by_pool = {}
    for i, g in enumerate(graphs):
        from .model import effective_pool_sizes

        by_pool.setdefault(effective_pool_sizes(g.n_nodes, cfg.pool_sizes), []).append(i)
    for indices in by_pool.values():
        for lo in range(0, len(indices), chunk_size):
            chunk = indices[lo : lo + chunk_size]
            batch = pack_graphs([graphs[i] for i in chunk], cfg.pool_sizes)
            mu, _, _ = encode(params, batch, cfg)
            latents[chunk] = mu.value
    records = [
        EmbeddingRecord(latent=latents[i], labels=dict(g.labels))
        for i, g in enumerate(graphs)
    ]
    if average_by is None:
        return records
    return average_records(records, average_by)


def average_records(records, key):
    """Average latent vectors over records sharing ``key``; keep stable labels."""
    groups = {}
    for rec in records:
        if key not in rec.labels:
            raise ContractError(f"records lack the label '{key}'")
        groups.setdefault(rec.labels[key], []).append(rec)
    merged = []
    for value, members in groups.items():
        latent = np.mean([m.latent for m in members], axis=0)
        labels = dict(members[0].labels)
        for m in members[1:]:
            for k in list(labels):
                if labels[k] != m.labels.get(k, object()):
                    del labels[k]
        labels[key] = value
        merged.append(EmbeddingRecord(latent=latent, labels=labels))
    return merged
