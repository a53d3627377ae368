"""Pure-NumPy kernels for the extended forward/backward passes.

This is the fallback backend used when the compiled extension is not
available.  Both backends implement the same two entry points:

``ext_forward(weights, biases, act, points, keep)``
    Propagates the network value together with first and pure second
    derivatives with respect to both inputs, batched over points.

``ext_backward(weights, stash, seeds)``
    Reverse accumulation: given per-point adjoints of the five outputs
    ``(u, u_x, u_t, u_xx, u_tt)``, returns gradients with respect to every
    weight matrix and bias vector.

The derivative streams are propagated layer by layer.  For a hidden layer
with pre-activation ``a = W z + b`` and input streams ``(z, z', z'')`` per
direction, the outputs are ``sigma(a)``, ``sigma'(a) * a'`` and
``sigma''(a) * a'^2 + sigma'(a) * a''``.  The backward pass follows the
same structure and therefore needs the third activation derivative.
"""

import numpy as np

ACT_TANH = 0
ACT_COS = 1

BACKEND_NAME = "numpy"


def _act_chain(a, act):
    """sigma and its first three derivatives, evaluated elementwise."""
    if act == ACT_TANH:
        s0 = np.tanh(a)
        s1 = 1.0 - s0 * s0
        s2 = -2.0 * s0 * s1
        s3 = s1 * (6.0 * s0 * s0 - 2.0)
    elif act == ACT_COS:
        s0 = np.cos(a)
        s1 = -np.sin(a)
        s2 = -s0
        s3 = -s1
    else:
        raise ValueError(f"unknown activation id {act}")
    return s0, s1, s2, s3


def ext_forward(weights, biases, act, points, keep=False):
    """Batched extended forward pass.

    Returns ``(out, stash)`` where ``out`` has shape (n, 5) with columns
    ``(u, u_x, u_t, u_xx, u_tt)``.  ``stash`` holds the per-layer
    intermediates needed by :func:`ext_backward` (or ``None``).
    """
    z = np.ascontiguousarray(points, dtype=np.float64)
    n = z.shape[0]
    zx = np.zeros_like(z)
    zx[:, 0] = 1.0
    zt = np.zeros_like(z)
    zt[:, 1] = 1.0
    zxx = np.zeros((n, z.shape[1]))
    ztt = np.zeros((n, z.shape[1]))
    stash = [] if keep else None
    last = len(weights) - 1
    for k, (w, b) in enumerate(zip(weights, biases)):
        a = z @ w.T + b
        px = zx @ w.T
        qx = zxx @ w.T
        pt = zt @ w.T
        qt = ztt @ w.T
        if k == last:
            out = np.column_stack([a[:, 0], px[:, 0], pt[:, 0], qx[:, 0], qt[:, 0]])
            if keep:
                stash.append((z, zx, zxx, zt, ztt))
            return out, stash
        s0, s1, s2, s3 = _act_chain(a, act)
        if keep:
            stash.append((z, zx, zxx, zt, ztt, s1, s2, s3, px, qx, pt, qt))
        z = s0
        zx = s1 * px
        zxx = s2 * px * px + s1 * qx
        zt = s1 * pt
        ztt = s2 * pt * pt + s1 * qt
    raise ValueError("network needs at least one layer")


def ext_backward(weights, stash, seeds):
    """Gradients of a scalar loss with respect to weights and biases.

    ``seeds[:, j]`` is dLoss/d(output_j) per point, with outputs ordered as
    ``(u, u_x, u_t, u_xx, u_tt)``.
    """
    last = len(weights) - 1
    dws = [None] * len(weights)
    dbs = [None] * len(weights)
    # Adjoints of the current layer's output streams (value, x-, t-derivative
    # and second-derivative streams).  At the top these are the seeds.
    za = np.ascontiguousarray(seeds[:, 0:1])
    pxa = np.ascontiguousarray(seeds[:, 1:2])
    pta = np.ascontiguousarray(seeds[:, 2:3])
    qxa = np.ascontiguousarray(seeds[:, 3:4])
    qta = np.ascontiguousarray(seeds[:, 4:5])
    for k in range(last, -1, -1):
        if k == last:
            z, zx, zxx, zt, ztt = stash[k]
            aa, pxb, qxb, ptb, qtb = za, pxa, qxa, pta, qta
        else:
            z, zx, zxx, zt, ztt, s1, s2, s3, px, qx, pt, qt = stash[k]
            aa = (
                za * s1
                + pxa * s2 * px
                + qxa * (s3 * px * px + s2 * qx)
                + pta * s2 * pt
                + qta * (s3 * pt * pt + s2 * qt)
            )
            pxb = pxa * s1 + 2.0 * qxa * s2 * px
            qxb = qxa * s1
            ptb = pta * s1 + 2.0 * qta * s2 * pt
            qtb = qta * s1
        w = weights[k]
        dws[k] = aa.T @ z + pxb.T @ zx + qxb.T @ zxx + ptb.T @ zt + qtb.T @ ztt
        dbs[k] = aa.sum(axis=0)
        if k > 0:
            za = aa @ w
            pxa = pxb @ w
            qxa = qxb @ w
            pta = ptb @ w
            qta = qtb @ w
    return dws, dbs
