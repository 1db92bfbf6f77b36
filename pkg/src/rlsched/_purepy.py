"""Pure NumPy kernels for the policy/value MLP.

Reference implementation for any trunk depth; the compiled extension in
``_kernels.pyx`` mirrors the two-hidden-layer case.  Weight matrices are
(out, in) so a forward step is ``x @ W.T + b``.
"""

from __future__ import annotations

import numpy as np


def mlp_forward(trunk, heads, X):
    """Batched forward pass.

    trunk: sequence of (W, b); heads: ((Wp, bp), (Wv, bv)).
    Returns (logits (n, A), values (n,), activations [X, h1, ..., hk]).
    """
    (Wp, bp), (Wv, bv) = heads
    a = X
    acts = [X]
    for W, b in trunk:
        a = np.tanh(a @ W.T + b)
        acts.append(a)
    logits = a @ Wp.T + bp
    values = (a @ Wv.T + bv).ravel()
    return logits, values, acts


def mlp_backward(trunk, heads, acts, dlogits, dvalues):
    """Gradients of the scalar loss whose upstream derivatives are given.

    Returns grads in parameter order [gW1, gb1, ..., gWk, gbk, gWp, gbp, gWv, gbv].
    """
    (Wp, _), (Wv, _) = heads
    top = acts[-1]
    gWp = dlogits.T @ top
    gbp = dlogits.sum(axis=0)
    dv = dvalues[:, None]
    gWv = dv.T @ top
    gbv = dv.sum(axis=0)
    da = dlogits @ Wp + dv @ Wv

    trunk_grads = []
    for (W, _), a_in, a_out in zip(reversed(trunk), reversed(acts[:-1]), reversed(acts[1:])):
        dz = da * (1.0 - a_out * a_out)
        trunk_grads.append((dz.T @ a_in, dz.sum(axis=0)))
        da = dz @ W

    grads = []
    for gW, gb in reversed(trunk_grads):
        grads.extend((gW, gb))
    grads.extend((gWp, gbp, gWv, gbv))
    return grads


def act_forward(trunk, heads, x):
    """Single-observation forward; returns (logits (A,), value float)."""
    logits, values, _ = mlp_forward(trunk, heads, x[None, :])
    return logits[0], float(values[0])
