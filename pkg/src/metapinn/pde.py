"""The three parametric PDE families, collocation sampling and stiff filtering.

Every family lives on the space-time strip [-1, 1] x [0, T] with Dirichlet
boundary data.  Residuals are pure functions of the extended state
(u, u_x, u_t, u_xx, u_tt) plus the point and the parameter vector, and each
family also exposes the analytic derivatives of its residual with respect
to the extended-state fields (used both for training and for the explicit
coefficient gradient of the reduced network).
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .mlp import ExtBatch


@dataclass(frozen=True)
class ParameterDomain:
    """Closed box in parameter space: one (lo, hi) interval per component."""

    bounds: tuple

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not lo <= hi:
                raise ValueError(f"empty interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    def contains(self, mu) -> bool:
        mu = np.asarray(mu, dtype=np.float64)
        if mu.shape != (self.dim,):
            return False
        return all(lo <= v <= hi for v, (lo, hi) in zip(mu, self.bounds))

    def validate(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=np.float64)
        if not self.contains(mu):
            raise ValueError("parameter outside domain")
        return mu

    def tensor_grid(self, counts) -> np.ndarray:
        """Tensorial grid, lexicographic order, shape (prod(counts), dim)."""
        if len(counts) != self.dim:
            raise ValueError("one grid size per parameter component required")
        axes = [np.linspace(lo, hi, int(c)) for (lo, hi), c in zip(self.bounds, counts)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([m.ravel() for m in mesh])

    def sample(self, n, seed) -> np.ndarray:
        rng = np.random.default_rng(seed)
        lo = np.array([b[0] for b in self.bounds])
        hi = np.array([b[1] for b in self.bounds])
        return lo + (hi - lo) * rng.random((n, self.dim))


def kg_residual(ext, x, t, mu):
    """u_tt + alpha*u_xx + beta*u + gamma*u^2 + x*cos(t) - x^2*cos^2(t)."""
    alpha, beta, gamma = mu
    ct = np.cos(t)
    return ext.u_tt + alpha * ext.u_xx + beta * ext.u + gamma * ext.u ** 2 \
        + x * ct - x * x * ct * ct


def kg_residual_state_grad(ext, x, t, mu):
    alpha, beta, gamma = mu
    n = np.shape(ext.u)[0]
    dr = np.zeros((n, 5))
    dr[:, 0] = beta + 2.0 * gamma * ext.u
    dr[:, 3] = alpha
    dr[:, 4] = 1.0
    return dr


def burgers_residual(ext, x, t, mu):
    """u_t + u*u_x - nu*u_xx."""
    (nu,) = mu
    return ext.u_t + ext.u * ext.u_x - nu * ext.u_xx


def burgers_residual_state_grad(ext, x, t, mu):
    (nu,) = mu
    n = np.shape(ext.u)[0]
    dr = np.zeros((n, 5))
    dr[:, 0] = ext.u_x
    dr[:, 1] = ext.u
    dr[:, 2] = 1.0
    dr[:, 3] = -nu
    return dr


def allen_cahn_residual(ext, x, t, mu):
    """u_t - lam*u_xx + eps*(u^3 - u)."""
    lam, eps = mu
    return ext.u_t - lam * ext.u_xx + eps * (ext.u ** 3 - ext.u)


def allen_cahn_residual_state_grad(ext, x, t, mu):
    lam, eps = mu
    n = np.shape(ext.u)[0]
    dr = np.zeros((n, 5))
    dr[:, 0] = eps * (3.0 * ext.u ** 2 - 1.0)
    dr[:, 2] = 1.0
    dr[:, 3] = -lam
    return dr


@dataclass(frozen=True)
class PDEDefinition:
    """One parametric PDE family on [-1, 1] x [0, T] with Dirichlet data."""

    name: str
    time_order: int
    t_final: float
    domain: ParameterDomain
    residual: Callable
    residual_state_grad: Callable
    dirichlet: Callable          # g(x, t) on the boundary
    initial: Callable            # u_0(x)
    initial_velocity: Optional[Callable] = None   # u_t(x, 0), second order only
    x_range: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if (self.time_order == 2) != (self.initial_velocity is not None):
            raise ValueError("initial-velocity data required exactly when time order is 2")


KLEIN_GORDON = PDEDefinition(
    name="kg",
    time_order=2,
    t_final=5.0,
    domain=ParameterDomain(((-2.0, -1.0), (0.0, 1.0), (0.0, 1.0))),
    residual=kg_residual,
    residual_state_grad=kg_residual_state_grad,
    dirichlet=lambda x, t: x * np.cos(t),
    initial=lambda x: np.asarray(x, dtype=np.float64),
    initial_velocity=lambda x: np.zeros_like(np.asarray(x, dtype=np.float64)),
)

BURGERS = PDEDefinition(
    name="burgers",
    time_order=1,
    t_final=1.0,
    domain=ParameterDomain(((0.005, 1.0),)),
    residual=burgers_residual,
    residual_state_grad=burgers_residual_state_grad,
    dirichlet=lambda x, t: np.zeros_like(np.asarray(x, dtype=np.float64)),
    initial=lambda x: -np.sin(np.pi * np.asarray(x, dtype=np.float64)),
)

ALLEN_CAHN = PDEDefinition(
    name="ac",
    time_order=1,
    t_final=1.0,
    domain=ParameterDomain(((0.0001, 0.001), (1.0, 5.0))),
    residual=allen_cahn_residual,
    residual_state_grad=allen_cahn_residual_state_grad,
    dirichlet=lambda x, t: -np.ones_like(np.asarray(x, dtype=np.float64)),
    initial=lambda x: np.asarray(x, dtype=np.float64) ** 2 * np.cos(np.pi * np.asarray(x)),
)

_FAMILIES = {p.name: p for p in (KLEIN_GORDON, BURGERS, ALLEN_CAHN)}


def get_pde(name: str) -> PDEDefinition:
    try:
        return _FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown pde family {name!r}; choose from {sorted(_FAMILIES)}")


@dataclass(frozen=True)
class CollocationSet:
    """Interior, boundary and initial collocation points.

    ``interior`` and ``boundary`` are (n, 2) arrays of (x, t); ``initial``
    is an (n,) array of x values (evaluated at t = 0).
    """

    interior: np.ndarray
    boundary: np.ndarray
    initial: np.ndarray
    strategy: str = "uniform-random"
    seed: int = 0

    @property
    def initial_points(self) -> np.ndarray:
        """Initial x values lifted to (x, 0) space-time points."""
        return np.column_stack([self.initial, np.zeros_like(self.initial)])


STRATEGIES = ("uniform-random", "uniform-grid", "latin-hypercube")


def _lhs_1d(n, lo, hi, rng):
    """n points in [lo, hi], exactly one per equal-width stratum."""
    u = (rng.permutation(n) + rng.random(n)) / n
    return lo + (hi - lo) * u


def sample_collocation(pde: PDEDefinition, counts, strategy="uniform-random", seed=0):
    """Draw collocation sets for a PDE family, deterministic per seed.

    ``counts`` is (n_interior, n_boundary, n_initial).  The grid strategy
    requires a square interior count and an even boundary count.
    """
    n_o, n_b, n_i = (int(c) for c in counts)
    if min(n_o, n_b, n_i) <= 0:
        raise ValueError("collocation counts must be positive")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown sampling strategy {strategy!r}")
    xlo, xhi = pde.x_range
    T = pde.t_final
    rng = np.random.default_rng(seed)

    if strategy == "uniform-random":
        interior = np.column_stack([
            xlo + (xhi - xlo) * rng.random(n_o),
            T * rng.random(n_o),
        ])
        sides = np.where(rng.integers(0, 2, size=n_b) == 0, xlo, xhi)
        boundary = np.column_stack([sides, T * rng.random(n_b)])
        initial = xlo + (xhi - xlo) * rng.random(n_i)
    elif strategy == "uniform-grid":
        side = math.isqrt(n_o)
        if side * side != n_o:
            raise ValueError(f"grid strategy needs a square interior count, got {n_o}")
        if n_b % 2 != 0:
            raise ValueError(f"grid strategy needs an even boundary count, got {n_b}")
        xs = np.linspace(xlo, xhi, side + 2)[1:-1]
        ts = np.linspace(0.0, T, side + 2)[1:-1]
        gx, gt = np.meshgrid(xs, ts, indexing="ij")
        interior = np.column_stack([gx.ravel(), gt.ravel()])
        tb = np.linspace(0.0, T, n_b // 2)
        boundary = np.column_stack([
            np.concatenate([np.full(n_b // 2, xlo), np.full(n_b // 2, xhi)]),
            np.concatenate([tb, tb]),
        ])
        initial = np.linspace(xlo, xhi, n_i)
    else:  # latin-hypercube
        interior = np.column_stack([
            _lhs_1d(n_o, xlo, xhi, rng),
            _lhs_1d(n_o, 0.0, T, rng),
        ])
        sides = np.where(rng.integers(0, 2, size=n_b) == 0, xlo, xhi)
        boundary = np.column_stack([sides, _lhs_1d(n_b, 0.0, T, rng)])
        initial = _lhs_1d(n_i, xlo, xhi, rng)

    return CollocationSet(interior, boundary, initial, strategy=strategy, seed=seed)


def stiff_keep_mask(values, threshold=0.8, mode="max"):
    """Keep-mask for one collocation subset given |u_xx| magnitudes.

    ``values`` has shape (n_bases, n_points).  A point is dropped when, for
    any basis, its magnitude strictly exceeds ``threshold * max`` over the
    subset ("max" mode) or the ``threshold`` quantile ("quantile" mode).
    """
    vals = np.abs(np.atleast_2d(np.asarray(values, dtype=np.float64)))
    if vals.shape[1] == 0:
        return np.zeros(0, dtype=bool)
    if mode == "max":
        cut = threshold * vals.max(axis=1)
    elif mode == "quantile":
        cut = np.quantile(vals, threshold, axis=1)
    else:
        raise ValueError(f"unknown filter mode {mode!r}")
    return ~(vals > cut[:, None]).any(axis=0)


def filter_stiff_points(uxx_values, colloc: CollocationSet, threshold=0.8, mode="max"):
    """Drop stiff points from every collocation subset.

    ``uxx_values`` maps subset name ("interior", "boundary", "initial") to a
    (n_bases, n_points) table of |u_xx| magnitudes on that subset; subsets
    without an entry are kept unchanged.  Returns the filtered set and the
    keep-masks used.
    """
    masks = {}
    parts = {}
    for name in ("interior", "boundary", "initial"):
        pts = getattr(colloc, name)
        if name in uxx_values:
            mask = stiff_keep_mask(uxx_values[name], threshold, mode)
            if mask.shape[0] != pts.shape[0]:
                raise ValueError(f"{name}: {mask.shape[0]} values for {pts.shape[0]} points")
        else:
            mask = np.ones(pts.shape[0], dtype=bool)
        masks[name] = mask
        parts[name] = pts[mask]
    filtered = CollocationSet(
        parts["interior"], parts["boundary"], parts["initial"],
        strategy=colloc.strategy, seed=colloc.seed,
    )
    return filtered, masks


def boundary_initial_terms(pde: PDEDefinition, provider, colloc: CollocationSet):
    """Per-point deviations from the boundary and initial data.

    ``provider`` maps an (n, 2) array of points to an :class:`ExtBatch`.
    Returns a dict with "boundary", "initial" and, for second-order
    families, "initial_velocity" deviation vectors.
    """
    out = {}
    ext_b = provider(colloc.boundary)
    out["boundary"] = ext_b.u - pde.dirichlet(colloc.boundary[:, 0], colloc.boundary[:, 1])
    ext_i = provider(colloc.initial_points)
    out["initial"] = ext_i.u - pde.initial(colloc.initial)
    if pde.time_order == 2:
        out["initial_velocity"] = ext_i.u_t - pde.initial_velocity(colloc.initial)
    return out
