"""Greedy offline stage: grow the meta-network one neuron at a time.

Each round scans the training set with the current meta-network, records
the terminal online loss as an error indicator for every candidate, trains
a full network at the worst candidate and appends it as a new neuron.
Already-sampled parameters are excluded from the argmax (their indicator is
still recorded).  A final scan with the terminal model is kept so the
indicator-decay curve has a value at every model size.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .pde import PDEDefinition, CollocationSet
from .reduced import (
    GptModel,
    OnlineConfig,
    OnlineDivergence,
    StiffFilter,
    init_coeffs,
    online_train,
)
from .training import TrainConfig, train_sa_pinn

log = logging.getLogger(__name__)


@dataclass
class GreedyConfig:
    xi: np.ndarray                     # training set, shape (m, d_s)
    n_max: int
    train: TrainConfig
    online: OnlineConfig
    colloc: CollocationSet
    mu1: Optional[np.ndarray] = None   # default: seeded-random element of xi
    tol: Optional[float] = None
    seed: int = 0
    colloc_r: Optional[CollocationSet] = None   # defaults to colloc
    stiff_filter: Optional[StiffFilter] = None
    workers: int = 1

    def __post_init__(self):
        self.xi = np.atleast_2d(np.asarray(self.xi, dtype=np.float64))
        if self.xi.shape[0] == 0:
            raise ValueError("training set is empty")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.mu1 is not None:
            self.mu1 = np.asarray(self.mu1, dtype=np.float64)
            if not any(np.array_equal(self.mu1, row) for row in self.xi):
                raise ValueError("mu1 must be an element of the training set")


@dataclass
class GreedyRound:
    """Record of one round: the neuron added and the scan run afterwards.

    ``scan_deltas`` aligns with the training set; ``max_indicator`` and
    ``argmax_index`` range over candidates not yet sampled.  The last
    round's argmax is the parameter the next round would have picked.
    """

    n_neurons: int
    chosen_mu: np.ndarray
    chosen_index: int
    train_time: float
    scan_deltas: Optional[np.ndarray]
    max_indicator: float
    argmax_index: Optional[int]
    scan_time: float
    scan_epochs: int = 0
    n_diverged: int = 0


def scan_indicators(model: GptModel, xi, online_config: OnlineConfig,
                    exclude_indices=(), workers: int = 1):
    """Indicator table over the training set.

    Returns ``(deltas, argmax_index, n_diverged)`` where ``deltas[j]`` is the
    terminal online loss at ``xi[j]`` (+inf when the online solve diverged,
    which forces that candidate to be examined) and ``argmax_index`` is the
    worst candidate outside ``exclude_indices``.
    """
    if model.n_neurons < 1:
        raise ValueError("model has no neurons")
    xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))

    def solve(mu):
        try:
            _, delta = online_train(init_coeffs(mu, model), model, mu, online_config)
            return delta
        except OnlineDivergence:
            return np.inf

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            deltas = np.array(list(pool.map(solve, xi)))
    else:
        deltas = np.array([solve(mu) for mu in xi])
    n_diverged = int(np.isinf(deltas).sum())
    if n_diverged:
        log.warning("online training diverged at %d of %d scan points", n_diverged, len(xi))
    allowed = np.ones(len(xi), dtype=bool)
    allowed[list(exclude_indices)] = False
    if not allowed.any():
        return deltas, None, n_diverged
    masked = np.where(allowed, deltas, -np.inf)
    return deltas, int(np.argmax(masked)), n_diverged


def _round_seeds(seed, n):
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


def run_offline(pde: PDEDefinition, config: GreedyConfig) -> GptModel:
    """Greedy offline loop; returns the model with its full round history.

    Stops when ``n_max`` neurons are placed, when the worst indicator drops
    below ``tol``, or when the training set is exhausted.  With
    ``n_max == 1`` the model is a single given/random neuron and no scan is
    performed.
    """
    xi = config.xi
    seeds = _round_seeds(config.seed, config.n_max)
    if config.mu1 is not None:
        mu1_idx = next(i for i, row in enumerate(xi) if np.array_equal(row, config.mu1))
    else:
        mu1_idx = int(np.random.default_rng(config.seed).integers(0, xi.shape[0]))
    colloc_r = config.colloc_r if config.colloc_r is not None else config.colloc

    model = GptModel(pde, colloc_r, stiff_filter=config.stiff_filter)
    model.xi = xi
    chosen = [mu1_idx]
    t0 = time.perf_counter()
    pinn = train_sa_pinn(pde, xi[mu1_idx], config.train, seeds[0], config.colloc)
    train_time = time.perf_counter() - t0
    model.add_neuron(pinn)

    while True:
        n = model.n_neurons
        if config.n_max == 1:
            model.history.append(GreedyRound(
                n_neurons=n, chosen_mu=xi[chosen[-1]].copy(), chosen_index=chosen[-1],
                train_time=train_time, scan_deltas=None, max_indicator=np.nan,
                argmax_index=None, scan_time=0.0,
            ))
            break
        t0 = time.perf_counter()
        deltas, argmax, n_div = scan_indicators(
            model, xi, config.online, exclude_indices=chosen, workers=config.workers
        )
        scan_time = time.perf_counter() - t0
        max_ind = np.nan if argmax is None else float(deltas[argmax])
        model.history.append(GreedyRound(
            n_neurons=n, chosen_mu=xi[chosen[-1]].copy(), chosen_index=chosen[-1],
            train_time=train_time, scan_deltas=deltas, max_indicator=max_ind,
            argmax_index=argmax, scan_time=scan_time,
            scan_epochs=config.online.epochs, n_diverged=n_div,
        ))
        if n >= config.n_max or argmax is None:
            break
        if config.tol is not None and max_ind < config.tol:
            break
        chosen.append(argmax)
        t0 = time.perf_counter()
        pinn = train_sa_pinn(pde, xi[argmax], config.train, seeds[n], config.colloc)
        train_time = time.perf_counter() - t0
        model.add_neuron(pinn)
    return model


def validate_history(model: GptModel) -> bool:
    """Check the argmax certificates: each neuron from round 2 on attains
    the maximal indicator of the previous round's table over the candidates
    not yet sampled at that point."""
    rounds = model.history
    if len(rounds) != model.n_neurons:
        return False
    idx = [rnd.chosen_index for rnd in rounds]
    for n in range(1, len(rounds)):
        prev = rounds[n - 1]
        if prev.scan_deltas is None or prev.argmax_index is None:
            return False
        mask = np.ones(len(prev.scan_deltas), dtype=bool)
        mask[idx[:n]] = False
        best = np.max(np.where(mask, prev.scan_deltas, -np.inf))
        if prev.argmax_index != idx[n]:
            return False
        if prev.scan_deltas[idx[n]] != best or prev.max_indicator != best:
            return False
    return True


def uniform_baseline(pde: PDEDefinition, config: GreedyConfig, n: int) -> GptModel:
    """Non-adaptive baseline: n networks at stride-selected training-set rows."""
    xi = config.xi
    if n > xi.shape[0]:
        raise ValueError("cannot select more parameters than the training set holds")
    idx = np.round(np.linspace(0, xi.shape[0] - 1, n)).astype(int)
    seeds = _round_seeds(config.seed, n)
    colloc_r = config.colloc_r if config.colloc_r is not None else config.colloc
    model = GptModel(pde, colloc_r, stiff_filter=config.stiff_filter)
    model.xi = xi
    for k, i in enumerate(idx):
        t0 = time.perf_counter()
        pinn = train_sa_pinn(pde, xi[i], config.train, seeds[k], config.colloc)
        model.add_neuron(pinn)
        model.history.append(GreedyRound(
            n_neurons=model.n_neurons, chosen_mu=xi[i].copy(), chosen_index=int(i),
            train_time=time.perf_counter() - t0, scan_deltas=None,
            max_indicator=np.nan, argmax_index=None, scan_time=0.0,
        ))
    return model
