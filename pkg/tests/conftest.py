"""Shared test helpers: independent numerical oracles.

The finite-difference oracle here is deliberately implemented with plain
numpy only, so gradient checks never depend on the reverse-mode code path
they are verifying.
"""

import numpy as np
import pytest

from gaudi.autodiff import Tape, backward


def central_difference(f, x, h=1e-5):
    """Central finite differences of a scalar function f() w.r.t. array x.

    f reads x in place; x is restored after the sweep.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = f()
        flat[i] = orig - h
        fm = f()
        flat[i] = orig
        gflat[i] = (fp - fm) / (2.0 * h)
    return grad


def max_rel_err(a, b, floor=1e-6):
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def reverse_grads(build, tensors):
    """Run build() on a fresh tape, backprop, and return each tensor's grad."""
    for t in tensors:
        t.clear_grad()
    with Tape() as tape:
        loss = build()
    backward(tape, loss)
    return [t.grad.copy() for t in tensors]


def assert_grads_match(build, tensors, tol=1e-4, h=1e-5, floor=1e-6):
    """Compare reverse-mode gradients of build() against central differences."""
    got = reverse_grads(build, tensors)
    for t, g in zip(tensors, got):
        num = central_difference(lambda: build().item(), t.value, h=h)
        err = max_rel_err(g, num, floor=floor)
        assert err < tol, f"gradient mismatch: rel err {err:.3e} (tol {tol})"


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
