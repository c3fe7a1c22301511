"""Dense reverse-mode automatic differentiation on 2-D float64 tensors.

Every value is a matrix (scalars are 1x1). Operations executed inside a
``with Tape() as tape:`` block are recorded; ``backward(tape, loss)`` then
replays the tape in reverse and accumulates adjoints into ``Tensor.grad``.
Tensors used several times accumulate gradient additively.

Besides the usual matrix/elementwise primitives, the module provides
"segment" operations that act block-wise on a stack of independent graphs
packed into one tall matrix (row ranges delimited by a ``starts`` offset
array). They make mini-batch training a single tape instead of one tape
per graph, which is what keeps CPU training throughput acceptable.

Tapes are thread-local: independent graphs may be processed on separate
threads with separate tapes, but a single tape is never shared.
"""

from __future__ import annotations

import threading

import numpy as np

from .errors import ContractError, ShapeError

_local = threading.local()


def _tape_stack():
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = []
        _local.stack = stack
    return stack


def active_tape():
    """The innermost recording tape on this thread, or None."""
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tape:
    """Ordered record of operations for one reverse sweep.

    Inputs of an op are always recorded (created) before the op itself, so
    iterating the op list in reverse is a valid topological order.
    """

    __slots__ = ("_ops",)

    def __init__(self):
        self._ops = []

    def __len__(self):
        return len(self._ops)

    def __enter__(self):
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        _tape_stack().pop()
        return False


class Tensor:
    """A dense float64 matrix with an additive gradient accumulator."""

    __slots__ = ("value", "requires_grad", "_grad")

    def __init__(self, value, requires_grad=False):
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        elif arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim != 2:
            raise ShapeError(f"tensors are 2-D, got shape {arr.shape}")
        self.value = np.ascontiguousarray(arr)
        self.requires_grad = requires_grad
        self._grad = None

    @property
    def shape(self):
        return self.value.shape

    @property
    def grad(self):
        if self._grad is None:
            return np.zeros_like(self.value)
        return self._grad

    def accumulate_grad(self, g):
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        self._grad += g

    def clear_grad(self):
        self._grad = None

    def item(self):
        return float(self.value[0, 0])

    def __repr__(self):
        return f"Tensor(shape={self.value.shape}, requires_grad={self.requires_grad})"


def _make(value, requires_grad):
    t = Tensor.__new__(Tensor)
    t.value = value
    t.requires_grad = requires_grad
    t._grad = None
    return t


def constant(value):
    return Tensor(value, requires_grad=False)


def parameter(value):
    return Tensor(value, requires_grad=True)


def _record(out, back):
    tape = active_tape()
    if tape is not None and out.requires_grad:
        tape._ops.append((out, back))


def backward(tape, loss):
    """Reverse sweep: accumulate d(loss)/d(tensor) for every tensor on the tape.

    Tensors not reachable from ``loss`` keep a zero gradient.
    """
    if loss.value.shape != (1, 1):
        raise ContractError(f"backward needs a scalar loss, got shape {loss.value.shape}")
    loss.accumulate_grad(np.ones((1, 1)))
    for out, back in reversed(tape._ops):
        g = out._grad
        if g is not None:
            back(g)


# ---------------------------------------------------------------------------
# broadcasting helpers


def _unbroadcast(g, shape):
    """Reduce gradient ``g`` to ``shape`` by summing broadcast axes."""
    if g.shape == shape:
        return g
    if shape[0] == 1 and g.shape[0] != 1:
        g = g.sum(axis=0, keepdims=True)
    if shape[1] == 1 and g.shape[1] != 1:
        g = g.sum(axis=1, keepdims=True)
    return g


def _check_broadcast(a, b, opname):
    sa, sb = a.value.shape, b.value.shape
    if sa != sb:
        if (sa[0] != sb[0] and 1 not in (sa[0], sb[0])) or (
            sa[1] != sb[1] and 1 not in (sa[1], sb[1])
        ):
            raise ShapeError(f"{opname}: incompatible shapes {sa} and {sb}")


# ---------------------------------------------------------------------------
# core matrix ops


def matmul(a, b):
    if a.value.shape[1] != b.value.shape[0]:
        raise ShapeError(
            f"matmul: inner dimensions disagree ({a.value.shape} x {b.value.shape})"
        )
    out = _make(a.value @ b.value, a.requires_grad or b.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(g @ b.value.T)
        if b.requires_grad:
            b.accumulate_grad(a.value.T @ g)

    _record(out, back)
    return out


def transpose(a):
    out = _make(np.ascontiguousarray(a.value.T), a.requires_grad)

    def back(g):
        a.accumulate_grad(g.T)

    _record(out, back)
    return out


def linear(x, w, b=None):
    """x @ w + b with b broadcast across rows. Fused for fewer tape entries."""
    if x.value.shape[1] != w.value.shape[0]:
        raise ShapeError(
            f"linear: inner dimensions disagree ({x.value.shape} x {w.value.shape})"
        )
    v = x.value @ w.value
    rg = x.requires_grad or w.requires_grad
    if b is not None:
        v += b.value
        rg = rg or b.requires_grad
    out = _make(v, rg)

    def back(g):
        if x.requires_grad:
            x.accumulate_grad(g @ w.value.T)
        if w.requires_grad:
            w.accumulate_grad(x.value.T @ g)
        if b is not None and b.requires_grad:
            b.accumulate_grad(g.sum(axis=0, keepdims=True))

    _record(out, back)
    return out


# ---------------------------------------------------------------------------
# elementwise ops (full shape, per-row vector, per-column vector or scalar)


def add(a, b):
    _check_broadcast(a, b, "add")
    out = _make(a.value + b.value, a.requires_grad or b.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g, b.value.shape))

    _record(out, back)
    return out


def sub(a, b):
    _check_broadcast(a, b, "sub")
    out = _make(a.value - b.value, a.requires_grad or b.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g, a.value.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(-g, b.value.shape))

    _record(out, back)
    return out


def mul(a, b):
    _check_broadcast(a, b, "mul")
    out = _make(a.value * b.value, a.requires_grad or b.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g * b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate_grad(_unbroadcast(g * a.value, b.value.shape))

    _record(out, back)
    return out


def div(a, b):
    _check_broadcast(a, b, "div")
    out = _make(a.value / b.value, a.requires_grad or b.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(_unbroadcast(g / b.value, a.value.shape))
        if b.requires_grad:
            b.accumulate_grad(
                _unbroadcast(-g * a.value / (b.value * b.value), b.value.shape)
            )

    _record(out, back)
    return out


def scale(a, c):
    """Multiply by a plain python scalar constant."""
    c = float(c)
    out = _make(a.value * c, a.requires_grad)

    def back(g):
        a.accumulate_grad(g * c)

    _record(out, back)
    return out


def relu(a):
    out = _make(np.maximum(a.value, 0.0), a.requires_grad)

    def back(g):
        # subgradient at exactly 0 is 0
        a.accumulate_grad(g * (a.value > 0.0))

    _record(out, back)
    return out


def exp(a):
    out = _make(np.exp(a.value), a.requires_grad)

    def back(g):
        a.accumulate_grad(g * out.value)

    _record(out, back)
    return out


def log(a):
    out = _make(np.log(a.value), a.requires_grad)

    def back(g):
        a.accumulate_grad(g / a.value)

    _record(out, back)
    return out


def clip(a, lo, hi):
    """Saturating clamp; gradient passes only through the interior."""
    out = _make(np.clip(a.value, lo, hi), a.requires_grad)

    def back(g):
        a.accumulate_grad(g * ((a.value > lo) & (a.value < hi)))

    _record(out, back)
    return out


def absolute(a):
    out = _make(np.abs(a.value), a.requires_grad)

    def back(g):
        a.accumulate_grad(g * np.sign(a.value))

    _record(out, back)
    return out


def softmax_rows(a):
    """Row-wise softmax, stabilized by subtracting each row's max."""
    shifted = a.value - a.value.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = _make(y, a.requires_grad)

    def back(g):
        gy = g * y
        a.accumulate_grad(gy - y * gy.sum(axis=1, keepdims=True))

    _record(out, back)
    return out


# ---------------------------------------------------------------------------
# shape ops


def concat_cols(a, b):
    if a.value.shape[0] != b.value.shape[0]:
        raise ShapeError(
            f"concat_cols: row counts disagree ({a.value.shape} vs {b.value.shape})"
        )
    na = a.value.shape[1]
    out = _make(np.hstack((a.value, b.value)), a.requires_grad or b.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(g[:, :na])
        if b.requires_grad:
            b.accumulate_grad(g[:, na:])

    _record(out, back)
    return out


def slice_cols(a, j0, j1):
    out = _make(np.ascontiguousarray(a.value[:, j0:j1]), a.requires_grad)

    def back(g):
        full = np.zeros_like(a.value)
        full[:, j0:j1] = g
        a.accumulate_grad(full)

    _record(out, back)
    return out


def slice_rows(a, i0, i1):
    out = _make(np.ascontiguousarray(a.value[i0:i1]), a.requires_grad)

    def back(g):
        full = np.zeros_like(a.value)
        full[i0:i1] = g
        a.accumulate_grad(full)

    _record(out, back)
    return out


# ---------------------------------------------------------------------------
# reductions


def sum_all(a):
    out = _make(np.array([[a.value.sum()]]), a.requires_grad)

    def back(g):
        a.accumulate_grad(np.full_like(a.value, g[0, 0]))

    _record(out, back)
    return out


def mean_all(a):
    n = a.value.size
    out = _make(np.array([[a.value.sum() / n]]), a.requires_grad)

    def back(g):
        a.accumulate_grad(np.full_like(a.value, g[0, 0] / n))

    _record(out, back)
    return out


def sum_cols(a):
    """Row sums as an (n, 1) column."""
    out = _make(a.value.sum(axis=1, keepdims=True), a.requires_grad)

    def back(g):
        a.accumulate_grad(np.broadcast_to(g, a.value.shape).copy())

    _record(out, back)
    return out


def mean_rows(a):
    """Column means as a (1, k) row."""
    n = a.value.shape[0]
    out = _make(a.value.mean(axis=0, keepdims=True), a.requires_grad)

    def back(g):
        a.accumulate_grad(np.broadcast_to(g / n, a.value.shape).copy())

    _record(out, back)
    return out


def frobenius_norm(a):
    v = float(np.sqrt((a.value * a.value).sum()))
    out = _make(np.array([[v]]), a.requires_grad)

    def back(g):
        if v > 0.0:
            a.accumulate_grad((g[0, 0] / v) * a.value)

    _record(out, back)
    return out


# ---------------------------------------------------------------------------
# gather / scatter over rows


class IndexPlan:
    """Precomputed bookkeeping for scatter-adds along a fixed row index vector.

    ``np.add.at`` is slow; sorting the indices once and using
    ``np.add.reduceat`` on contiguous runs is much faster and deterministic.
    """

    __slots__ = ("idx", "n_rows", "order", "run_starts", "targets")

    def __init__(self, idx, n_rows):
        idx = np.asarray(idx, dtype=np.intp)
        self.idx = idx
        self.n_rows = int(n_rows)
        if idx.size:
            order = np.argsort(idx, kind="stable")
            sorted_idx = idx[order]
            run_starts = np.flatnonzero(
                np.r_[True, sorted_idx[1:] != sorted_idx[:-1]]
            )
            self.order = order
            self.run_starts = run_starts
            self.targets = sorted_idx[run_starts]
        else:
            self.order = idx
            self.run_starts = np.zeros(0, dtype=np.intp)
            self.targets = np.zeros(0, dtype=np.intp)

    def sum_into(self, rows, width):
        out = np.zeros((self.n_rows, width))
        if self.idx.size:
            sums = np.add.reduceat(rows[self.order], self.run_starts, axis=0)
            out[self.targets] = sums
        return out


def gather_rows(a, plan):
    """out[e] = a[plan.idx[e]]; adjoint scatter-adds back into a."""
    out = _make(a.value[plan.idx], a.requires_grad)

    def back(g):
        a.accumulate_grad(plan.sum_into(g, g.shape[1]))

    _record(out, back)
    return out


def scatter_sum_rows(a, plan):
    """out[i] = sum of a's rows e with plan.idx[e] == i (empty sums are zero)."""
    out = _make(plan.sum_into(a.value, a.value.shape[1]), a.requires_grad)

    def back(g):
        a.accumulate_grad(g[plan.idx])

    _record(out, back)
    return out


# ---------------------------------------------------------------------------
# segment ops: block-wise operations over graphs packed into one matrix.
# `starts` arrays have B+1 entries delimiting each graph's row range.


def _blocks(starts):
    return zip(starts[:-1], starts[1:])


def seg_pool(s, v, starts_fine, starts_coarse):
    """Per block: out_g = S_g^T V_g (soft cluster pooling of node features)."""
    h = v.value.shape[1]
    out_v = np.empty((int(starts_coarse[-1]), h))
    for g, ((f0, f1), (c0, c1)) in enumerate(
        zip(_blocks(starts_fine), _blocks(starts_coarse))
    ):
        np.matmul(s.value[f0:f1].T, v.value[f0:f1], out=out_v[c0:c1])
    out = _make(out_v, s.requires_grad or v.requires_grad)

    def back(g):
        if s.requires_grad and s._grad is None:
            s._grad = np.zeros_like(s.value)
        if v.requires_grad and v._grad is None:
            v._grad = np.zeros_like(v.value)
        for (f0, f1), (c0, c1) in zip(_blocks(starts_fine), _blocks(starts_coarse)):
            gb = g[c0:c1]
            if s.requires_grad:
                s._grad[f0:f1] += v.value[f0:f1] @ gb.T
            if v.requires_grad:
                v._grad[f0:f1] += s.value[f0:f1] @ gb

    _record(out, back)
    return out


def seg_upsample(s, z, starts_fine, starts_coarse):
    """Per block: out_g = S_g Z_g (copy coarse feature rows back to fine nodes)."""
    h = z.value.shape[1]
    out_v = np.empty((int(starts_fine[-1]), h))
    for (f0, f1), (c0, c1) in zip(_blocks(starts_fine), _blocks(starts_coarse)):
        np.matmul(s.value[f0:f1], z.value[c0:c1], out=out_v[f0:f1])
    out = _make(out_v, s.requires_grad or z.requires_grad)

    def back(g):
        if s.requires_grad and s._grad is None:
            s._grad = np.zeros_like(s.value)
        if z.requires_grad and z._grad is None:
            z._grad = np.zeros_like(z.value)
        for (f0, f1), (c0, c1) in zip(_blocks(starts_fine), _blocks(starts_coarse)):
            gb = g[f0:f1]
            if s.requires_grad:
                s._grad[f0:f1] += gb @ z.value[c0:c1].T
            if z.requires_grad:
                z._grad[c0:c1] += s.value[f0:f1].T @ gb

    _record(out, back)
    return out


def seg_adj_matmul(adjacencies, x, starts):
    """Per block: out_g = A_g X_g with constant square matrices A_g."""
    out_v = np.empty_like(x.value)
    for a_g, (r0, r1) in zip(adjacencies, _blocks(starts)):
        np.matmul(a_g, x.value[r0:r1], out=out_v[r0:r1])
    out = _make(out_v, x.requires_grad)

    def back(g):
        if x._grad is None:
            x._grad = np.zeros_like(x.value)
        for a_g, (r0, r1) in zip(adjacencies, _blocks(starts)):
            x._grad[r0:r1] += a_g.T @ g[r0:r1]

    _record(out, back)
    return out


def seg_sum_all(a, starts):
    """Per-block sum of all entries, as a (B, 1) column."""
    starts = np.asarray(starts)
    csum = np.r_[0.0, np.cumsum(a.value.sum(axis=1))]
    out = _make((csum[starts[1:]] - csum[starts[:-1]]).reshape(-1, 1), a.requires_grad)

    def back(g):
        if a._grad is None:
            a._grad = np.zeros_like(a.value)
        a._grad += np.repeat(g[:, 0], np.diff(starts))[:, None]

    _record(out, back)
    return out


def seg_mean_all(a, starts):
    """Per-block mean of all entries, as a (B, 1) column (empty blocks give 0)."""
    starts = np.asarray(starts)
    sizes = np.diff(starts) * a.value.shape[1]
    safe = np.where(sizes > 0, sizes, 1)
    csum = np.r_[0.0, np.cumsum(a.value.sum(axis=1))]
    means = (csum[starts[1:]] - csum[starts[:-1]]) / safe
    out = _make(means.reshape(-1, 1), a.requires_grad)

    def back(g):
        if a._grad is None:
            a._grad = np.zeros_like(a.value)
        a._grad += np.repeat(g[:, 0] / safe, np.diff(starts))[:, None]

    _record(out, back)
    return out


def seg_mean_rows(a, starts):
    """Per-block column means, stacked into a (B, h) matrix."""
    starts = np.asarray(starts)
    counts = np.diff(starts).astype(np.float64)
    csum = np.vstack((np.zeros((1, a.value.shape[1])), np.cumsum(a.value, axis=0)))
    out_v = (csum[starts[1:]] - csum[starts[:-1]]) / counts[:, None]
    out = _make(out_v, a.requires_grad)

    def back(g):
        if a._grad is None:
            a._grad = np.zeros_like(a.value)
        a._grad += np.repeat(g / counts[:, None], np.diff(starts), axis=0)

    _record(out, back)
    return out


def seg_frobenius(a, starts):
    """Per-block Frobenius norm, as a (B, 1) column."""
    starts = np.asarray(starts)
    sq = a.value * a.value
    csum = np.r_[0.0, np.cumsum(sq.sum(axis=1))]
    norms = np.sqrt(csum[starts[1:]] - csum[starts[:-1]])
    out = _make(norms.reshape(-1, 1), a.requires_grad)

    def back(g):
        if a._grad is None:
            a._grad = np.zeros_like(a.value)
        safe = np.where(norms > 0.0, norms, 1.0)
        a._grad += np.repeat((g[:, 0] / safe) * (norms > 0.0), np.diff(starts))[
            :, None
        ] * a.value

    _record(out, back)
    return out


def seg_scale(a, s, starts):
    """Multiply each block of ``a`` by its per-block scalar s[g] (a (B,1) tensor)."""
    starts = np.asarray(starts)
    rows = np.repeat(s.value[:, 0], np.diff(starts))[:, None]
    out = _make(a.value * rows, a.requires_grad or s.requires_grad)

    def back(g):
        if a.requires_grad:
            a.accumulate_grad(g * rows)
        if s.requires_grad:
            gs = (g * a.value).sum(axis=1)
            csum = np.r_[0.0, np.cumsum(gs)]
            s.accumulate_grad((csum[starts[1:]] - csum[starts[:-1]]).reshape(-1, 1))

    _record(out, back)
    return out


def safe_div(num, den):
    """Elementwise num/den with 0 where den == 0 (zero-degree guard)."""
    if num.value.shape != den.value.shape:
        raise ShapeError(
            f"safe_div: shapes disagree ({num.value.shape} vs {den.value.shape})"
        )
    mask = den.value != 0.0
    d = np.where(mask, den.value, 1.0)
    out_v = np.where(mask, num.value / d, 0.0)
    out = _make(out_v, num.requires_grad or den.requires_grad)

    def back(g):
        if num.requires_grad:
            num.accumulate_grad(np.where(mask, g / d, 0.0))
        if den.requires_grad:
            den.accumulate_grad(np.where(mask, -g * out_v / d, 0.0))

    _record(out, back)
    return out
