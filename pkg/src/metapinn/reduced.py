"""The reduced meta-network: one hidden layer whose activation functions are
pre-trained networks.

Per hidden neuron i, the values and input derivatives of its network are
precomputed on the reduced collocation sets and stored as snapshot columns.
Online training for a new parameter value then only updates the output
coefficients c against the collocation loss, with an explicit analytic
gradient assembled from the snapshot matrices, so a training epoch never
touches the underlying networks.  The terminal online loss doubles as the
error indicator used by the greedy offline stage.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adam import AdamState, adam_step
from .mlp import ExtBatch, MLPParams, extended_forward_batch, mlp_provider
from .pde import CollocationSet, PDEDefinition, stiff_keep_mask
from .training import FullPINN, pinn_loss


class OnlineDivergence(RuntimeError):
    """Raised when the coefficient iteration becomes non-finite."""

    def __init__(self, epoch: int, last_delta: float):
        super().__init__(
            f"online divergence at epoch {epoch} (last finite loss {last_delta:.3e})"
        )
        self.epoch = epoch
        self.last_delta = last_delta


@dataclass
class OnlineConfig:
    lr: float = 0.025
    epochs: int = 2000
    optimizer: str = "plain-gd"   # or "adam"

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("online learning rate must be >= 0")
        if self.epochs < 0:
            raise ValueError("online epochs must be >= 0")
        if self.optimizer not in ("plain-gd", "adam"):
            raise ValueError(f"unknown online optimizer {self.optimizer!r}")


# Snapshot fields stored per family: interior value/derivative columns, the
# boundary value column and the initial value (and velocity) columns.
_INTERIOR_FIELDS = {
    "kg": ("u", "u_xx", "u_tt"),
    "burgers": ("u", "u_x", "u_t", "u_xx"),
    "ac": ("u", "u_t", "u_xx"),
}


@dataclass
class BasisBlock:
    """Snapshot columns of one network on the reduced collocation sets."""

    interior: dict          # field name -> (n_interior,) array
    boundary_u: np.ndarray
    initial_u: np.ndarray
    initial_ut: Optional[np.ndarray] = None


def precompute_basis(pinn, colloc_r: CollocationSet, pde: PDEDefinition) -> BasisBlock:
    """Evaluate one network on the reduced sets, keeping only the columns the
    family's online residual and gradient read."""
    if min(colloc_r.interior.shape[0], colloc_r.boundary.shape[0], colloc_r.initial.shape[0]) == 0:
        raise ValueError("empty collocation set")
    params = pinn.params if isinstance(pinn, FullPINN) else pinn
    ext_o = extended_forward_batch(params, colloc_r.interior)
    ext_b = extended_forward_batch(params, colloc_r.boundary)
    ext_i = extended_forward_batch(params, colloc_r.initial_points)
    interior = {name: ext_o.get(name) for name in _INTERIOR_FIELDS[pde.name]}
    return BasisBlock(
        interior=interior,
        boundary_u=ext_b.u,
        initial_u=ext_i.u,
        initial_ut=ext_i.u_t if pde.time_order == 2 else None,
    )


@dataclass
class PrecomputedBasis:
    """Stacked snapshot matrices, one column per hidden neuron."""

    colloc: CollocationSet
    interior: dict = field(default_factory=dict)   # field -> (n_o, n) matrix
    boundary_u: Optional[np.ndarray] = None        # (n_b, n)
    initial_u: Optional[np.ndarray] = None         # (n_i, n)
    initial_ut: Optional[np.ndarray] = None

    @property
    def n_neurons(self) -> int:
        return 0 if self.boundary_u is None else self.boundary_u.shape[1]

    def append(self, block: BasisBlock):
        def cat(mat, col):
            col = col.reshape(-1, 1)
            return col.copy() if mat is None else np.hstack([mat, col])

        for name, col in block.interior.items():
            self.interior[name] = cat(self.interior.get(name), col)
        self.boundary_u = cat(self.boundary_u, block.boundary_u)
        self.initial_u = cat(self.initial_u, block.initial_u)
        if block.initial_ut is not None:
            self.initial_ut = cat(self.initial_ut, block.initial_ut)


@dataclass
class StiffFilter:
    threshold: float = 0.8
    mode: str = "max"   # or "quantile"


class GptModel:
    """Meta-network state: sampled parameters, their networks, the shared
    snapshot basis and the greedy history."""

    def __init__(self, pde: PDEDefinition, colloc_r: CollocationSet,
                 stiff_filter: Optional[StiffFilter] = None):
        self.pde = pde
        self.colloc_r = colloc_r
        self.stiff_filter = stiff_filter
        self.mus = []
        self.pinns = []
        self.basis = PrecomputedBasis(colloc=colloc_r)
        self.history = []
        self.xi = None               # training set of the offline run, if any
        self.neuron_losses = []      # loss of each network on the active reduced sets
        self._uxx = {"interior": [], "boundary": [], "initial": []}
        self.masks = {
            "interior": np.ones(colloc_r.interior.shape[0], dtype=bool),
            "boundary": np.ones(colloc_r.boundary.shape[0], dtype=bool),
            "initial": np.ones(colloc_r.initial.shape[0], dtype=bool),
        }
        self._active = None

    @property
    def n_neurons(self) -> int:
        return len(self.mus)

    def add_neuron(self, pinn: FullPINN):
        mu = np.asarray(pinn.mu, dtype=np.float64)
        for prev in self.mus:
            if np.array_equal(prev, mu):
                raise ValueError(f"parameter {mu} already sampled")
        self.mus.append(mu)
        self.pinns.append(pinn)
        self.basis.append(precompute_basis(pinn, self.colloc_r, self.pde))
        if self.stiff_filter is not None:
            for name, pts in (("interior", self.colloc_r.interior),
                              ("boundary", self.colloc_r.boundary),
                              ("initial", self.colloc_r.initial_points)):
                ext = extended_forward_batch(pinn.params, pts)
                self._uxx[name].append(np.abs(ext.u_xx))
            for name in self.masks:
                self.masks[name] = stiff_keep_mask(
                    np.vstack(self._uxx[name]),
                    self.stiff_filter.threshold,
                    self.stiff_filter.mode,
                )
        self._active = None
        self._refresh_neuron_losses()

    def _refresh_neuron_losses(self):
        sets = self.active_colloc()
        self.neuron_losses = [
            pinn_loss(mlp_provider(p.params), self.pde, mu, sets)
            for p, mu in zip(self.pinns, self.mus)
        ]

    def active_colloc(self) -> CollocationSet:
        """Reduced sets with the stiff-filter masks applied."""
        return CollocationSet(
            self.colloc_r.interior[self.masks["interior"]],
            self.colloc_r.boundary[self.masks["boundary"]],
            self.colloc_r.initial[self.masks["initial"]],
            strategy=self.colloc_r.strategy,
            seed=self.colloc_r.seed,
        )

    def active(self) -> dict:
        """Masked snapshot matrices and data vectors for the online solver."""
        if self._active is None:
            mo, mb, mi = self.masks["interior"], self.masks["boundary"], self.masks["initial"]
            sets = self.active_colloc()
            a = {
                "interior": {k: np.ascontiguousarray(v[mo]) for k, v in self.basis.interior.items()},
                "P_b": np.ascontiguousarray(self.basis.boundary_u[mb]),
                "P_i": np.ascontiguousarray(self.basis.initial_u[mi]),
                "Pt_i": None if self.basis.initial_ut is None
                        else np.ascontiguousarray(self.basis.initial_ut[mi]),
                "x_o": sets.interior[:, 0], "t_o": sets.interior[:, 1],
                "g_b": self.pde.dirichlet(sets.boundary[:, 0], sets.boundary[:, 1]),
                "u0_i": self.pde.initial(sets.initial),
                "v0_i": None if self.pde.time_order != 2
                        else self.pde.initial_velocity(sets.initial),
            }
            if min(a["interior"]["u"].shape[0], a["P_b"].shape[0], a["P_i"].shape[0]) == 0:
                raise ValueError("empty collocation set")
            self._active = a
        return self._active


def _check_coeffs(c, model) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.shape[0] != model.n_neurons:
        raise ValueError(
            f"coefficient vector has length {c.shape[0]}, model has {model.n_neurons} neurons"
        )
    return c


def _loss_and_grad(c, model, mu, want_grad=True):
    """Collocation loss of the combination and its gradient in c, assembled
    entirely from the snapshot matrices.  Overflow is resolved by the
    divergence checks of the callers, not warned about here."""
    a = model.active()
    pde = model.pde
    mu = np.asarray(mu, dtype=np.float64)
    n = c.shape[0]

    combo = {name: mat @ c for name, mat in a["interior"].items()}
    ext = ExtBatch(**{
        "u": combo.get("u"), "u_x": combo.get("u_x"), "u_t": combo.get("u_t"),
        "u_xx": combo.get("u_xx"), "u_tt": combo.get("u_tt"),
    })
    r_o = pde.residual(ext, a["x_o"], a["t_o"], mu)
    r_b = a["P_b"] @ c - a["g_b"]
    r_i = a["P_i"] @ c - a["u0_i"]
    loss = float(np.mean(r_o ** 2) + np.mean(r_b ** 2) + np.mean(r_i ** 2))
    r_v = None
    if a["Pt_i"] is not None:
        r_v = a["Pt_i"] @ c - a["v0_i"]
        loss += float(np.mean(r_v ** 2))
    if not want_grad:
        return loss, None

    dr = pde.residual_state_grad(ext, a["x_o"], a["t_o"], mu)
    col = {"u": 0, "u_x": 1, "u_t": 2, "u_xx": 3, "u_tt": 4}
    grad = np.zeros(n)
    n_o = r_o.shape[0]
    for name, mat in a["interior"].items():
        grad += (2.0 / n_o) * (mat.T @ (dr[:, col[name]] * r_o))
    grad += (2.0 / r_b.shape[0]) * (a["P_b"].T @ r_b)
    grad += (2.0 / r_i.shape[0]) * (a["P_i"].T @ r_i)
    if r_v is not None:
        grad += (2.0 / r_v.shape[0]) * (a["Pt_i"].T @ r_v)
    return loss, grad


def gpt_loss(c, model: GptModel, mu) -> float:
    """Reduced collocation loss of the coefficient vector c at parameter mu."""
    c = _check_coeffs(c, model)
    with np.errstate(over="ignore", invalid="ignore"):
        loss, _ = _loss_and_grad(c, model, mu, want_grad=False)
    return loss


def gpt_grad(c, model: GptModel, mu) -> np.ndarray:
    """Analytic gradient of :func:`gpt_loss` with respect to c."""
    c = _check_coeffs(c, model)
    _, grad = _loss_and_grad(c, model, mu)
    return grad


def online_train(c0, model: GptModel, mu, config: OnlineConfig):
    """Coefficient training c <- c - lr * grad; returns (c, terminal loss).

    The terminal loss is the error indicator for mu.  Plain gradient descent
    by default; Adam opt-in via the config.
    """
    c = _check_coeffs(c0, model).copy()
    last_delta = np.inf
    state = AdamState.zeros_like([c]) if config.optimizer == "adam" else None
    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(config.epochs):
            loss, grad = _loss_and_grad(c, model, mu)
            if not np.isfinite(loss):
                raise OnlineDivergence(epoch, last_delta)
            last_delta = loss
            if state is None:
                c -= config.lr * grad
            else:
                adam_step(state, [c], [grad], config.lr)
    delta = gpt_loss(c, model, mu)
    if not np.isfinite(delta):
        raise OnlineDivergence(config.epochs, last_delta)
    return c, delta


def init_coeffs(mu, model: GptModel) -> np.ndarray:
    """Inverse-distance interpolation of the canonical unit coefficient
    vectors of the up-to-2^d nearest sampled parameters (exact hit: that
    unit vector; ties broken by earliest sample index)."""
    if model.n_neurons < 1:
        raise ValueError("model has no neurons")
    mu = np.asarray(mu, dtype=np.float64)
    sampled = np.asarray(model.mus)
    dist = np.linalg.norm(sampled - mu[None, :], axis=1)
    c = np.zeros(model.n_neurons)
    hit = np.flatnonzero(dist == 0.0)
    if hit.size:
        c[hit[0]] = 1.0
        return c
    k = min(2 ** mu.shape[0], model.n_neurons)
    order = np.lexsort((np.arange(dist.shape[0]), dist))[:k]
    w = 1.0 / dist[order]
    c[order] = w / w.sum()
    return c


def gpt_predict(c, model: GptModel, points) -> np.ndarray:
    """Surrogate values sum_i c_i * network_i at arbitrary points."""
    c = _check_coeffs(c, model)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    out = np.zeros(pts.shape[0])
    for ci, pinn in zip(c, model.pinns):
        if ci != 0.0:
            out += ci * extended_forward_batch(pinn.params, pts).u
    return out
