"""Fully connected networks with extended (input-derivative) propagation.

A network maps a space-time point (x, t) to a scalar.  Besides the plain
forward value, the kernels propagate first and pure second derivatives with
respect to both inputs in the same pass, and a reverse pass accumulates
gradients of collocation losses with respect to all weights and biases.
Activations are restricted to tanh and cos, each with analytic derivative
chains up to third order.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels

ACTIVATIONS = {"tanh": kernels.ACT_TANH, "cos": kernels.ACT_COS}

EXT_FIELDS = ("u", "u_x", "u_t", "u_xx", "u_tt")


def param_count(dims) -> int:
    """Total number of scalar parameters of a NN(d_1, ..., d_K)."""
    return int(sum((dims[k] + 1) * dims[k + 1] for k in range(len(dims) - 1)))


@dataclass
class MLPParams:
    """Weights and biases of a fully connected network NN(d_1, ..., d_K).

    ``weights[k]`` has shape (d_{k+2}, d_{k+1}) acting on column vectors;
    the activation is applied after every layer except the last.
    """

    dims: tuple
    weights: list
    biases: list
    activation: str = "tanh"

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.dims) - 1:
            raise ValueError("layer count mismatch: need K-1 weight/bias pairs")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[k + 1], self.dims[k]):
                raise ValueError(f"weight {k} has shape {w.shape}, expected "
                                 f"{(self.dims[k + 1], self.dims[k])}")
            if b.shape != (self.dims[k + 1],):
                raise ValueError(f"bias {k} has shape {b.shape}, expected "
                                 f"{(self.dims[k + 1],)}")
        if not all(np.isfinite(w).all() for w in self.weights) or not all(
            np.isfinite(b).all() for b in self.biases
        ):
            raise ValueError("non-finite input")

    @property
    def n_params(self) -> int:
        return param_count(self.dims)

    @property
    def act_id(self) -> int:
        return ACTIVATIONS[self.activation]

    def copy(self) -> "MLPParams":
        return MLPParams(
            self.dims,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )

    def flat(self) -> np.ndarray:
        """All parameters concatenated (weights row-major, then bias, per layer)."""
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)


def init_params(dims, activation="tanh", seed=0) -> MLPParams:
    """Seeded Glorot-style uniform initialization, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for k in range(len(dims) - 1):
        bound = np.sqrt(6.0 / (dims[k] + dims[k + 1]))
        weights.append(rng.uniform(-bound, bound, size=(dims[k + 1], dims[k])))
        biases.append(np.zeros(dims[k + 1]))
    return MLPParams(tuple(dims), weights, biases, activation)


@dataclass(frozen=True)
class ExtendedState:
    """Value and input derivatives of a network at one point."""

    u: float
    u_x: float
    u_t: float
    u_xx: float
    u_tt: float


class ExtBatch:
    """Extended states for a batch of points, stored column-wise.

    Fields may be absent (None) when assembled from a reduced snapshot
    basis; reading an absent or unknown field raises
    ``ValueError("unsupported derivative order")``.
    """

    __slots__ = EXT_FIELDS

    def __init__(self, u=None, u_x=None, u_t=None, u_xx=None, u_tt=None):
        self.u = u
        self.u_x = u_x
        self.u_t = u_t
        self.u_xx = u_xx
        self.u_tt = u_tt

    def get(self, name: str) -> np.ndarray:
        if name not in EXT_FIELDS:
            raise ValueError("unsupported derivative order")
        value = getattr(self, name)
        if value is None:
            raise ValueError("unsupported derivative order")
        return value

    @classmethod
    def from_matrix(cls, out: np.ndarray) -> "ExtBatch":
        return cls(u=out[:, 0], u_x=out[:, 1], u_t=out[:, 2], u_xx=out[:, 3], u_tt=out[:, 4])


def _check_points(points) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"points must have shape (n, 2), got {pts.shape}")
    if pts.size and not np.isfinite(pts).all():
        raise ValueError("non-finite input")
    return pts


def extended_forward_batch(params: MLPParams, points) -> ExtBatch:
    """Extended forward pass over a batch of (x, t) points."""
    pts = _check_points(points)
    out, _ = kernels.ext_forward(params.weights, params.biases, params.act_id, pts)
    return ExtBatch.from_matrix(out)


def extended_forward(params: MLPParams, point) -> ExtendedState:
    """Extended forward pass at a single point."""
    ext = extended_forward_batch(params, np.asarray(point, dtype=np.float64).reshape(1, 2))
    return ExtendedState(
        u=float(ext.u[0]),
        u_x=float(ext.u_x[0]),
        u_t=float(ext.u_t[0]),
        u_xx=float(ext.u_xx[0]),
        u_tt=float(ext.u_tt[0]),
    )


def mlp_forward(params: MLPParams, point) -> float:
    """Plain network value; same code path as :func:`extended_forward`."""
    return extended_forward(params, point).u


def mlp_forward_batch(params: MLPParams, points) -> np.ndarray:
    return extended_forward_batch(params, points).u


def mlp_provider(params: MLPParams) -> Callable:
    """Provider of extended states at arbitrary points, backed by a network."""

    def provide(points):
        return extended_forward_batch(params, points)

    return provide


@dataclass
class LossTerm:
    """One mean-of-squared-residuals term over a fixed set of points.

    ``residual(ext)`` returns the per-point residual; ``residual_grad(ext)``
    returns its derivatives with respect to the five extended-state fields,
    shape (n, 5) ordered as ``(u, u_x, u_t, u_xx, u_tt)``.  Optional
    per-point weights multiply the squared residuals inside the mean.
    """

    points: np.ndarray
    residual: Callable
    residual_grad: Callable
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = _check_points(self.points)
        if self.points.shape[0] == 0:
            raise ValueError("empty collocation set")

    def value(self, ext: ExtBatch) -> float:
        r = self.residual(ext)
        sq = r * r if self.weights is None else self.weights * r * r
        return float(np.mean(sq))

    def seeds(self, ext: ExtBatch) -> np.ndarray:
        """Per-point adjoints of the extended-state fields for this term."""
        r = self.residual(ext)
        dr = self.residual_grad(ext)
        scale = 2.0 * r / r.shape[0]
        if self.weights is not None:
            scale = scale * self.weights
        return dr * scale[:, None]


def loss_value(params: MLPParams, terms) -> float:
    total = 0.0
    for term in terms:
        total += term.value(extended_forward_batch(params, term.points))
    return total


def eval_terms(params: MLPParams, terms, want_grad=True):
    """Loss, gradients and per-term residuals in one concatenated pass.

    All term point sets go through the kernels as a single batch (the
    extended forward pass is row-independent, so per-point values match
    separate passes bitwise); seeds are assembled per term and pushed
    through one reverse pass.
    """
    points = np.vstack([t.points for t in terms])
    out, stash = kernels.ext_forward(
        params.weights, params.biases, params.act_id, points, keep=want_grad
    )
    total = 0.0
    residuals = []
    seeds = np.empty_like(out) if want_grad else None
    row = 0
    for term in terms:
        stop = row + term.points.shape[0]
        ext = ExtBatch.from_matrix(out[row:stop])
        r = term.residual(ext)
        residuals.append(r)
        sq = r * r if term.weights is None else term.weights * r * r
        total += float(np.mean(sq))
        if want_grad:
            dr = term.residual_grad(ext)
            scale = 2.0 * r / r.shape[0]
            if term.weights is not None:
                scale = scale * term.weights
            seeds[row:stop] = dr * scale[:, None]
        row = stop
    if not want_grad:
        return total, None, residuals
    grads = kernels.ext_backward(params.weights, stash, seeds)
    return total, grads, residuals


def loss_grad_params(params: MLPParams, terms):
    """Gradient of a sum of loss terms with respect to all parameters.

    Reverse accumulation through the extended forward pass; returns
    ``(dweights, dbiases)`` lists shaped like the parameters.
    """
    _, grads, _ = eval_terms(params, terms)
    return grads


def loss_value_and_grad(params: MLPParams, terms):
    """Loss and gradient in one pass over the terms (training hot path)."""
    total, grads, _ = eval_terms(params, terms)
    return total, grads
