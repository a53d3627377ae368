"""Adam optimizer over lists of parameter arrays."""

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators plus step counter.

    Arrays mirror the shapes of the parameters being optimized (here the
    weight list followed by the bias list of an MLP, but any list of
    arrays works).
    """

    m: list
    v: list
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, arrays, **kw) -> "AdamState":
        return cls(
            m=[np.zeros_like(a) for a in arrays],
            v=[np.zeros_like(a) for a in arrays],
            **kw,
        )


def adam_step(state: AdamState, arrays, grads, lr):
    """One Adam update with bias correction, applied in place.

    Returns ``(state, arrays)``; both are the same (mutated) objects, the
    caller being the single owner during a training loop.
    """
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for a, g, m, v in zip(arrays, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        a -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state, arrays
