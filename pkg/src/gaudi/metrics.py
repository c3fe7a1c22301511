"""Latent-space evaluation: PCA, 1-NN accuracy, Isomap continuity, SVM AUC, R^2.

All metrics are pure functions of embedding records. Unless a variant is
explicitly full-latent, they operate in the plane of the first two
principal components of the record set.
"""

from __future__ import annotations

import heapq
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, UndefinedCorrelationError
from .linalg import symmetric_eigendecomposition

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# PCA


def pca(latents, out_dim=2):
    """Principal-component projection plus explained-variance shares.

    Deterministic: eigenvectors follow the solver's sign convention
    (largest-magnitude entry positive).
    """
    x = np.asarray(latents, dtype=np.float64)
    if x.shape[0] < 2:
        raise ContractError("pca needs at least 2 records")
    centered = x - x.mean(axis=0, keepdims=True)
    cov = centered.T @ centered / x.shape[0]
    lam, vec = symmetric_eigendecomposition(cov)
    lam = np.maximum(lam, 0.0)
    total = lam.sum()
    shares = lam / total if total > 0.0 else np.zeros_like(lam)
    return centered @ vec[:, :out_dim], shares[:out_dim]


# ---------------------------------------------------------------------------
# leave-one-out nearest neighbor


def one_nn_accuracy(points, labels):
    """Leave-one-out 1-NN classification accuracy (ties toward lower index)."""
    points = np.asarray(points, dtype=np.float64)
    labels = list(labels)
    if points.shape[0] < 2:
        raise ContractError("one_nn_accuracy needs at least 2 points")
    if len(set(labels)) < 2:
        raise ContractError("one_nn_accuracy needs at least 2 classes")
    diff = points[:, None, :] - points[None, :, :]
    dist = (diff * diff).sum(axis=2)
    np.fill_diagonal(dist, np.inf)
    nearest = dist.argmin(axis=1)  # first minimum = lowest index on ties
    correct = sum(labels[i] == labels[j] for i, j in enumerate(nearest))
    return correct / len(labels)


# ---------------------------------------------------------------------------
# Spearman rank correlation


def _average_ranks(values):
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average of ranks i+1..j+1
        i = j + 1
    return ranks


def spearman(x, y):
    """Spearman rank-order correlation (average ranks on ties)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 3:
        raise ContractError("spearman needs two equal-length vectors of size >= 3")
    if np.all(x == x[0]) or np.all(y == y[0]):
        raise UndefinedCorrelationError("correlation of a constant vector is undefined")
    rx = _average_ranks(x)
    ry = _average_ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    return float((rx * ry).sum() / np.sqrt((rx * rx).sum() * (ry * ry).sum()))


# ---------------------------------------------------------------------------
# 1-D Isomap


def _components(n, neighbors):
    comp = np.full(n, -1)
    current = 0
    for start in range(n):
        if comp[start] >= 0:
            continue
        stack = [start]
        comp[start] = current
        while stack:
            u = stack.pop()
            for v, _ in neighbors[u]:
                if comp[v] < 0:
                    comp[v] = current
                    stack.append(v)
        current += 1
    return comp, current


def isomap_1d(points, k=8):
    """1-D embedding preserving geodesic (graph shortest-path) distances.

    Builds a symmetric k-NN graph weighted by Euclidean distance, bridges
    disconnected components through their closest point pair, runs
    all-pairs Dijkstra, and applies classical MDS (top eigenvector of the
    double-centered squared-distance matrix, scaled by sqrt(lambda_1)).
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < k + 2:
        raise ContractError(f"isomap_1d needs at least k+2 points ({n} < {k + 2})")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff * diff).sum(axis=2))
    order_idx = np.arange(n)
    neighbors = [[] for _ in range(n)]
    edge_set = set()
    for i in range(n):
        row = dist[i].copy()
        row[i] = np.inf
        for j in np.lexsort((order_idx, row))[:k]:
            edge_set.add((min(i, int(j)), max(i, int(j))))
    for i, j in edge_set:
        neighbors[i].append((j, dist[i, j]))
        neighbors[j].append((i, dist[i, j]))

    comp, n_comp = _components(n, neighbors)
    while n_comp > 1:
        # bridge the two components with the smallest Euclidean gap
        masked = dist.copy()
        same = comp[:, None] == comp[None, :]
        masked[same] = np.inf
        i, j = np.unravel_index(np.argmin(masked), masked.shape)
        neighbors[i].append((int(j), dist[i, j]))
        neighbors[int(j)].append((i, dist[i, j]))
        comp, n_comp = _components(n, neighbors)

    geo = np.full((n, n), np.inf)
    for source in range(n):
        row = geo[source]
        row[source] = 0.0
        heap = [(0.0, source)]
        while heap:
            d, u = heapq.heappop(heap)
            if d > row[u]:
                continue
            for v, w in neighbors[u]:
                nd = d + w
                if nd < row[v]:
                    row[v] = nd
                    heapq.heappush(heap, (nd, v))

    squared = geo * geo
    j_center = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j_center @ squared @ j_center
    lam, vec = symmetric_eigendecomposition(b)
    if lam[0] <= 0.0:
        return np.zeros(n)
    return vec[:, 0] * np.sqrt(lam[0])


def continuity_score(records, class_key, continuous_key, k=8):
    """Mean absolute Spearman correlation between a 1-D Isomap embedding of
    each class's PCA-plane points and the continuous generating parameter.

    ``class_key=None`` treats the whole record set as a single group.
    Groups smaller than k+2 are skipped with a warning.
    """
    latents = np.vstack([r.latent for r in records])
    plane, _ = pca(latents, out_dim=2)
    groups = {}
    for i, r in enumerate(records):
        if continuous_key not in r.labels:
            raise ContractError(f"records lack the label '{continuous_key}'")
        if class_key is not None and class_key not in r.labels:
            raise ContractError(f"records lack the label '{class_key}'")
        key = r.labels[class_key] if class_key is not None else "__all__"
        groups.setdefault(key, []).append(i)
    per_class = {}
    for key in sorted(groups, key=str):
        idx = groups[key]
        if len(idx) < k + 2:
            log.warning(
                "continuity: class %r has %d members (< %d); skipped",
                key, len(idx), k + 2,
            )
            continue
        coords = isomap_1d(plane[idx], k=k)
        values = [records[i].labels[continuous_key] for i in idx]
        per_class[key] = abs(spearman(coords, values))
    if not per_class:
        raise ContractError("continuity: no class has enough members")
    return float(np.mean(list(per_class.values()))), per_class


# ---------------------------------------------------------------------------
# linear SVM + AUC


def _rank_auc(scores, labels):
    """Mann-Whitney AUC from decision scores (average ranks; ties count 1/2)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ContractError("AUC needs both classes present")
    ranks = _average_ranks(scores)
    u = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _roc_curve(scores, labels):
    order = np.argsort(-scores, kind="stable")
    labels = np.asarray(labels, dtype=bool)[order]
    scores = np.asarray(scores, dtype=np.float64)[order]
    n_pos = max(int(labels.sum()), 1)
    n_neg = max(int((~labels).sum()), 1)
    tps = np.cumsum(labels)
    fps = np.cumsum(~labels)
    # keep one point per distinct threshold
    keep = np.r_[scores[1:] != scores[:-1], True]
    fpr = np.r_[0.0, fps[keep] / n_neg]
    tpr = np.r_[0.0, tps[keep] / n_pos]
    return np.column_stack((fpr, tpr))


def svm_auc(points, labels, trade_off=1.0, tol=1e-6, max_iter=100_000):
    """Linear soft-margin SVM by deterministic subgradient descent, then AUC.

    Labels are truthy=positive. The AUC comes from the signed decision
    values via the rank statistic, so it is invariant to any monotone
    rescaling of the margin.
    """
    x = np.asarray(points, dtype=np.float64)
    y = np.where(np.asarray(labels, dtype=bool), 1.0, -1.0)
    if len(set(y)) < 2:
        raise ContractError("svm_auc needs both classes present")
    n, d = x.shape
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std[std == 0.0] = 1.0
    xs = (x - mean) / std

    lam = 1.0 / (trade_off * n)
    w = np.zeros(d)
    b = 0.0
    radius = 1.0 / np.sqrt(lam)
    for t in range(1, max_iter + 1):
        margins = y * (xs @ w + b)
        active = margins < 1.0
        grad_w = lam * w - (y[active, None] * xs[active]).sum(axis=0) / n
        grad_b = -y[active].sum() / n
        step = 1.0 / (lam * t)
        new_w = w - step * grad_w
        new_b = b - step * grad_b
        norm = np.sqrt((new_w * new_w).sum())
        if norm > radius:
            new_w *= radius / norm
        delta = max(np.abs(new_w - w).max(), abs(new_b - b))
        w, b = new_w, new_b
        if delta < tol:
            break
    scores = xs @ w + b
    return _rank_auc(scores, y > 0), _roc_curve(scores, y > 0)


# ---------------------------------------------------------------------------
# linear regression R^2


def r_squared(features, target):
    """Ordinary least squares with intercept via the normal equations.

    Rank-deficient designs fall back to the smallest-norm solution (with a
    logged warning) through the eigendecomposition pseudo-inverse.
    """
    f = np.asarray(features, dtype=np.float64)
    if f.ndim == 1:
        f = f.reshape(-1, 1)
    y = np.asarray(target, dtype=np.float64).reshape(-1)
    n = len(y)
    if n <= f.shape[1] + 1:
        raise ContractError("r_squared needs more records than feature columns + 1")
    x = np.hstack((np.ones((n, 1)), f))
    xtx = x.T @ x
    xty = x.T @ y
    lam, vec = symmetric_eigendecomposition(xtx)
    cutoff = max(lam[0], 0.0) * 1e-12
    usable = lam > cutoff
    if not usable.all():
        log.warning(
            "r_squared: rank-deficient design (%d of %d directions); "
            "using the smallest-norm solution", int(usable.sum()), len(lam),
        )
    inv = np.where(usable, 1.0 / np.where(usable, lam, 1.0), 0.0)
    beta = vec @ (inv * (vec.T @ xty))
    residual = y - x @ beta
    ss_res = float((residual * residual).sum())
    centered = y - y.mean()
    ss_tot = float((centered * centered).sum())
    if ss_tot == 0.0:
        raise ContractError("r_squared: target is constant")
    return 1.0 - ss_res / ss_tot


# ---------------------------------------------------------------------------
# dataset-specific report assembly


@dataclass
class MetricsReport:
    preset: str
    one_nn_accuracy: float | None = None
    continuity_score: float | None = None
    continuity_per_class: dict = field(default_factory=dict)
    auc_pc: float | None = None
    auc_full: float | None = None
    r_squared_pc: float | None = None
    r_squared_full: float | None = None
    explained_variance: tuple = ()
    roc_pc: np.ndarray | None = None
    roc_full: np.ndarray | None = None

    def validate_ranges(self):
        for name in ("one_nn_accuracy", "continuity_score", "auc_pc", "auc_full"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ContractError(f"{name} out of range: {v}")
        for name in ("r_squared_pc", "r_squared_full"):
            v = getattr(self, name)
            if v is not None and v > 1.0 + 1e-12:
                raise ContractError(f"{name} out of range: {v}")
        return self

    def to_json_line(self):
        import json

        def fmt(v):
            return None if v is None else float("%.17g" % v)

        payload = {
            "preset": self.preset,
            "one_nn_accuracy": fmt(self.one_nn_accuracy),
            "continuity_score": fmt(self.continuity_score),
            "continuity_per_class": {
                str(k): fmt(v) for k, v in sorted(self.continuity_per_class.items(), key=lambda kv: str(kv[0]))
            },
            "auc_pc": fmt(self.auc_pc),
            "auc_full": fmt(self.auc_full),
            "r_squared_pc": fmt(self.r_squared_pc),
            "r_squared_full": fmt(self.r_squared_full),
            "explained_variance": [fmt(v) for v in self.explained_variance],
        }
        return json.dumps(payload, sort_keys=True)


def _require_label(records, key):
    for r in records:
        if key not in r.labels:
            raise ContractError(f"records lack the label '{key}'")
    return [r.labels[key] for r in records]


AGE_SPLIT_YEARS = 55.0


def evaluate(records, preset):
    """Assemble the metrics applicable to one dataset preset."""
    if not records:
        raise ContractError("no records to evaluate")
    latents = np.vstack([r.latent for r in records])
    plane, shares = pca(latents, out_dim=2)
    report = MetricsReport(preset=preset, explained_variance=tuple(shares))

    if preset == "watts-strogatz":
        classes = _require_label(records, "C")
        report.one_nn_accuracy = one_nn_accuracy(plane, classes)
        report.continuity_score, report.continuity_per_class = continuity_score(
            records, "C", "p"
        )
    elif preset == "smlm":
        classes = _require_label(records, "shape_class")
        report.one_nn_accuracy = one_nn_accuracy(plane, classes)
        positive = [c == "ring" for c in classes]
        report.auc_pc, report.roc_pc = svm_auc(plane, positive)
        report.auc_full, report.roc_full = svm_auc(latents, positive)
    elif preset == "vicsek":
        classes = _require_label(records, "R_f")
        report.one_nn_accuracy = one_nn_accuracy(plane, classes)
        report.continuity_score, report.continuity_per_class = continuity_score(
            records, "R_f", "eta"
        )
    elif preset == "brain":
        ages = np.asarray(_require_label(records, "age"), dtype=np.float64)
        report.continuity_score, report.continuity_per_class = continuity_score(
            records, None, "age"
        )
        older = ages >= AGE_SPLIT_YEARS
        report.auc_pc, report.roc_pc = svm_auc(plane, older)
        report.auc_full, report.roc_full = svm_auc(latents, older)
        report.r_squared_pc = r_squared(plane, ages)
        report.r_squared_full = r_squared(latents, ages)
    else:
        raise ContractError(f"unknown evaluation preset '{preset}'")
    return report.validate_ranges()
