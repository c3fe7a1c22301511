"""Adam optimizer over named parameter tensors."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, TrainingError


class AdamState:
    """First/second moment accumulators, one pair per parameter name.

    beta1=0.9, beta2=0.999, eps=1e-8; the step counter t increases by one
    per call to :func:`adam_step`.
    """

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {}
        self.v = {}


def adam_step(params, state, lr):
    """One bias-corrected Adam update, in place; gradients are cleared after.

    ``params`` maps name -> Tensor. Parameters whose gradient was never
    touched this step are updated with a zero gradient (no movement).
    """
    if lr <= 0.0:
        raise ContractError(f"learning rate must be positive, got {lr}")
    state.t += 1
    b1, b2, eps = state.beta1, state.beta2, state.eps
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p._grad
        if g is None:
            g = np.zeros_like(p.value)
        elif not np.isfinite(g).all():
            raise TrainingError(f"non-finite gradient for parameter '{name}'")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p.value -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
        p._grad = None
