"""Training of full physics-informed networks at a single parameter value.

The loss is the mean squared PDE residual over interior collocation points
plus mean squared deviations from the boundary and initial data (and from
the initial velocity for second-order-in-time families).  Training runs
full-batch Adam with an optional early-stopping threshold and an optional
second phase at a reduced learning rate.  The self-adaptive variant carries
trainable per-point weights on the interior and initial terms, updated by
gradient ascent while the network descends.
"""

import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .adam import AdamState, adam_step
from .mlp import LossTerm, MLPParams, eval_terms, init_params, mlp_provider
from .pde import CollocationSet, PDEDefinition


class TrainingDivergence(RuntimeError):
    """Raised when the training loss becomes non-finite."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


@dataclass
class TrainConfig:
    dims: tuple = (2, 20, 20, 1)
    activation: str = "tanh"
    lr: float = 5e-4
    epochs: int = 10000
    stop_loss: Optional[float] = None
    sa_enabled: bool = False
    sa_lr: Optional[float] = None      # defaults to lr
    extra_epochs: int = 0              # second Adam phase (reduced rate)
    extra_lr: Optional[float] = None   # defaults to lr / 10

    def __post_init__(self):
        if self.lr < 0:
            raise ValueError("learning rate must be >= 0")
        if self.epochs < 0 or self.extra_epochs < 0:
            raise ValueError("epoch counts must be >= 0")


@dataclass
class SAWeights:
    """Trainable per-point mask parameters for interior and initial terms.

    The effective weight of a point is 1 + raw^2, so weights never drop
    below one and the unweighted loss is recovered at raw = 0.
    """

    raw_interior: np.ndarray
    raw_initial: np.ndarray

    @property
    def interior(self) -> np.ndarray:
        return 1.0 + self.raw_interior ** 2

    @property
    def initial(self) -> np.ndarray:
        return 1.0 + self.raw_initial ** 2


@dataclass
class FullPINN:
    """A network trained at one parameter value."""

    mu: np.ndarray
    params: MLPParams
    colloc: CollocationSet
    terminal_loss: float
    epochs_run: int
    wall_time: float
    seed: int
    loss_history: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _unit_grad(col):
    def grad(ext):
        n = np.shape(ext.u)[0]
        dr = np.zeros((n, 5))
        dr[:, col] = 1.0
        return dr

    return grad


def build_loss_terms(pde: PDEDefinition, mu, colloc: CollocationSet, sa: Optional[SAWeights] = None):
    """Loss terms for one PDE family at one parameter value.

    Order: interior residual, boundary deviation, initial deviation and,
    for second-order families, initial-velocity deviation.
    """
    mu = np.asarray(mu, dtype=np.float64)
    x_o, t_o = colloc.interior[:, 0], colloc.interior[:, 1]
    x_b, t_b = colloc.boundary[:, 0], colloc.boundary[:, 1]
    g_b = pde.dirichlet(x_b, t_b)
    u0 = pde.initial(colloc.initial)

    terms = [
        LossTerm(
            colloc.interior,
            residual=lambda ext: pde.residual(ext, x_o, t_o, mu),
            residual_grad=lambda ext: pde.residual_state_grad(ext, x_o, t_o, mu),
            weights=None if sa is None else sa.interior,
        ),
        LossTerm(
            colloc.boundary,
            residual=lambda ext: ext.u - g_b,
            residual_grad=_unit_grad(0),
        ),
        LossTerm(
            colloc.initial_points,
            residual=lambda ext: ext.u - u0,
            residual_grad=_unit_grad(0),
            weights=None if sa is None else sa.initial,
        ),
    ]
    if pde.time_order == 2:
        v0 = pde.initial_velocity(colloc.initial)
        terms.append(
            LossTerm(
                colloc.initial_points,
                residual=lambda ext: ext.u_t - v0,
                residual_grad=_unit_grad(2),
            )
        )
    return terms


def pinn_loss(u_provider, pde: PDEDefinition, mu, colloc: CollocationSet,
              sa: Optional[SAWeights] = None) -> float:
    """Collocation loss of any extended-state provider (network or analytic)."""
    total = 0.0
    for term in build_loss_terms(pde, mu, colloc, sa=sa):
        total += term.value(u_provider(term.points))
    return total


def _epoch(params, terms, collect_residuals=False):
    """One full-batch pass: loss, parameter gradients, optional residuals."""
    total, grads, residuals = eval_terms(params, terms)
    return total, grads, residuals if collect_residuals else None


def _run_training(pde, mu, config: TrainConfig, seed, colloc, sa: Optional[SAWeights]):
    mu = pde.domain.validate(mu)
    params = init_params(config.dims, config.activation, seed)
    terms = build_loss_terms(pde, mu, colloc, sa=sa)
    arrays = params.weights + params.biases
    state = AdamState.zeros_like(arrays)
    if sa is not None:
        sa_arrays = [sa.raw_interior, sa.raw_initial]
        sa_state = AdamState.zeros_like(sa_arrays)
        sa_lr = config.sa_lr if config.sa_lr is not None else config.lr
    total_epochs = config.epochs + config.extra_epochs
    extra_lr = config.extra_lr if config.extra_lr is not None else config.lr / 10.0
    history = []
    start = time.perf_counter()
    epochs_run = 0
    for epoch in range(total_epochs):
        with np.errstate(over="ignore", invalid="ignore"):
            loss, (dws, dbs), residuals = _epoch(params, terms, collect_residuals=sa is not None)
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch)
        history.append(loss)
        if config.stop_loss is not None and loss < config.stop_loss:
            break
        lr = config.lr if epoch < config.epochs else extra_lr
        adam_step(state, arrays, dws + dbs, lr)
        if sa is not None:
            # Ascent on the mask parameters: maximize the same loss.
            grads = []
            for raw, term_idx in ((sa.raw_interior, 0), (sa.raw_initial, 2)):
                r = residuals[term_idx]
                grads.append(-(2.0 * raw * r * r) / r.shape[0])
            adam_step(sa_state, sa_arrays, grads, sa_lr)
            terms[0].weights = sa.interior
            terms[2].weights = sa.initial
        epochs_run = epoch + 1
    terminal = pinn_loss(mlp_provider(params), pde, mu, colloc, sa=None)
    wall = time.perf_counter() - start
    return FullPINN(
        mu=mu,
        params=params,
        colloc=colloc,
        terminal_loss=terminal,
        epochs_run=epochs_run,
        wall_time=wall,
        seed=int(seed),
        loss_history=np.asarray(history),
    )


def train_full_pinn(pde: PDEDefinition, mu, config: TrainConfig, seed, colloc) -> FullPINN:
    """Full-batch Adam on the collocation loss; deterministic per seed."""
    return _run_training(pde, mu, config, seed, colloc, sa=None)


def train_sa_pinn(pde: PDEDefinition, mu, config: TrainConfig, seed, colloc) -> FullPINN:
    """Self-adaptive training: per-point mask weights ascend the loss the
    network descends.  Mask state is discarded from the returned network."""
    if not config.sa_enabled:
        return train_full_pinn(pde, mu, config, seed, colloc)
    sa = SAWeights(
        raw_interior=np.ones(colloc.interior.shape[0]),
        raw_initial=np.ones(colloc.initial.shape[0]),
    )
    return _run_training(pde, mu, config, seed, colloc, sa=sa)
