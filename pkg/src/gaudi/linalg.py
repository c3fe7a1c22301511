"""Symmetric eigendecomposition by cyclic Jacobi rotations.

Matrices in this package are at most a few hundred square, and bit-level
determinism across runs matters more than speed, so plain Jacobi sweeps
are the right tool (no LAPACK dispatch involved).
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError


def symmetric_eigendecomposition(m, symmetry_tol=1e-9):
    """Eigenvalues (descending) and orthonormal eigenvectors of a symmetric matrix.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors in columns,
    ``m @ v_i = lam_i * v_i``. Sign convention: the largest-magnitude entry
    of each eigenvector is positive (first such entry on ties).
    """
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {a.shape}")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > symmetry_tol * max(scale, 1.0):
        raise ContractError("matrix is not symmetric within tolerance")

    n = a.shape[0]
    a = 0.5 * (a + a.T)  # exact symmetry for the sweep
    v = np.eye(n)
    if n > 1:
        norm = np.sqrt((a * a).sum())
        if norm > 0.0:
            tol = 1e-14 * norm
            for _ in range(60):
                off = np.sqrt(2.0 * (np.triu(a, 1) ** 2).sum())
                if off <= tol:
                    break
                for p in range(n - 1):
                    for q in range(p + 1, n):
                        apq = a[p, q]
                        if abs(apq) <= 1e-18 * norm:
                            continue
                        theta = 0.5 * (a[q, q] - a[p, p]) / apq
                        if theta == 0.0:
                            t = 1.0
                        else:
                            t = np.sign(theta) / (
                                abs(theta) + np.sqrt(theta * theta + 1.0)
                            )
                        c = 1.0 / np.sqrt(t * t + 1.0)
                        s = t * c
                        ap = a[:, p].copy()
                        aq = a[:, q].copy()
                        a[:, p] = c * ap - s * aq
                        a[:, q] = s * ap + c * aq
                        ap = a[p, :].copy()
                        aq = a[q, :].copy()
                        a[p, :] = c * ap - s * aq
                        a[q, :] = s * ap + c * aq
                        vp = v[:, p].copy()
                        vq = v[:, q].copy()
                        v[:, p] = c * vp - s * vq
                        v[:, q] = s * vp + c * vq

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    vectors = v[:, order]
    for j in range(n):
        col = vectors[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            vectors[:, j] = -col
    return eigenvalues, vectors
