"""Test-set error metrics, runtime accounting and the snapshot-SVD diagnostic."""

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .mlp import mlp_forward_batch
from .pde import PDEDefinition
from .reduced import GptModel, OnlineConfig, gpt_predict, init_coeffs, online_train
from .training import FullPINN, TrainConfig, train_sa_pinn

log = logging.getLogger(__name__)


def error_metrics(gpt_values, reference_values):
    """Relative L2 error and maximum pointwise absolute error."""
    g = np.asarray(gpt_values, dtype=np.float64).ravel()
    r = np.asarray(reference_values, dtype=np.float64).ravel()
    if g.shape != r.shape:
        raise ValueError(f"length mismatch: {g.shape} vs {r.shape}")
    ref_norm = np.linalg.norm(r)
    if ref_norm == 0.0:
        raise ValueError("degenerate reference")
    diff = g - r
    return float(np.linalg.norm(diff) / ref_norm), float(np.abs(diff).max())


def eval_grid(pde: PDEDefinition, shape=(101, 101)) -> np.ndarray:
    """Uniform evaluation grid over the space-time strip, shape (nx*nt, 2)."""
    nx, nt = shape
    xs = np.linspace(pde.x_range[0], pde.x_range[1], nx)
    ts = np.linspace(0.0, pde.t_final, nt)
    gx, gt = np.meshgrid(xs, ts, indexing="ij")
    return np.column_stack([gx.ravel(), gt.ravel()])


@dataclass
class ErrorRow:
    mu: np.ndarray
    rel_l2: float
    max_abs: float
    delta: float
    t_online: float


@dataclass
class ErrorReport:
    rows: list
    grid_shape: tuple
    skipped: list = field(default_factory=list)

    @property
    def worst_rel_l2(self) -> float:
        return max(row.rel_l2 for row in self.rows)

    @property
    def worst_max_abs(self) -> float:
        return max(row.max_abs for row in self.rows)


def evaluate_test_set(model: GptModel, test_params, references, grid_shape=(101, 101),
                      online_config: Optional[OnlineConfig] = None) -> ErrorReport:
    """Online-solve every test parameter and compare against references.

    ``references[j]`` is a :class:`FullPINN` or an array of reference values
    on the evaluation grid; ``None`` entries are skipped with a warning.
    """
    online_config = online_config or OnlineConfig()
    pts = eval_grid(model.pde, grid_shape)
    rows, skipped = [], []
    for mu, ref in zip(np.atleast_2d(np.asarray(test_params, dtype=np.float64)), references):
        if ref is None:
            log.warning("no reference for %s; skipped", mu)
            skipped.append(mu)
            continue
        t0 = time.perf_counter()
        c, delta = online_train(init_coeffs(mu, model), model, mu, online_config)
        t_online = time.perf_counter() - t0
        values = gpt_predict(c, model, pts)
        ref_values = mlp_forward_batch(ref.params, pts) if isinstance(ref, FullPINN) \
            else np.asarray(ref, dtype=np.float64).ravel()
        rel_l2, max_abs = error_metrics(values, ref_values)
        rows.append(ErrorRow(mu=mu, rel_l2=rel_l2, max_abs=max_abs,
                             delta=delta, t_online=t_online))
    return ErrorReport(rows=rows, grid_shape=tuple(grid_shape), skipped=skipped)


@dataclass
class TimingCurve:
    """Cumulative cost curves for repeated queries.

    The surrogate curve starts at the total offline cost; both curves grow
    by the mean measured per-query time, so the breakeven index obeys
    ``ceil(offline_total / (t_full - t_gpt))`` exactly whenever the
    surrogate is marginally cheaper.
    """

    offline_total: float
    t_full_mean: float
    t_gpt_mean: float
    horizon: int
    full_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    gpt_times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def queries(self) -> np.ndarray:
        return np.arange(1, self.horizon + 1)

    @property
    def full_cum(self) -> np.ndarray:
        return self.queries * self.t_full_mean

    @property
    def gpt_cum(self) -> np.ndarray:
        return self.offline_total + self.queries * self.t_gpt_mean

    @property
    def marginal_ratio(self) -> float:
        return self.t_gpt_mean / self.t_full_mean

    @property
    def breakeven(self) -> Optional[int]:
        hit = np.flatnonzero(self.gpt_cum <= self.full_cum)
        return int(hit[0]) + 1 if hit.size else None


def offline_cost(model: GptModel) -> float:
    """Total offline investment: all full trainings plus all scans."""
    return float(sum(r.train_time + r.scan_time for r in model.history))


def timing_benchmark(model: GptModel, pde: PDEDefinition, query_params,
                     full_config: TrainConfig, online_config: OnlineConfig,
                     colloc, horizon: Optional[int] = None,
                     offline_total: Optional[float] = None,
                     single_thread: bool = True) -> TimingCurve:
    """Measure per-query full-training versus online-solve wall time.

    Measurements run with BLAS pinned to one thread for comparability
    (``single_thread=False`` overrides).
    """
    import contextlib

    if single_thread:
        from threadpoolctl import threadpool_limits

        guard = threadpool_limits(limits=1)
    else:
        guard = contextlib.nullcontext()
    queries = np.atleast_2d(np.asarray(query_params, dtype=np.float64))
    if queries.shape[0] < 1:
        raise ValueError("need at least one query")
    full_times, gpt_times = [], []
    with guard:
        for i, mu in enumerate(queries):
            t0 = time.perf_counter()
            train_sa_pinn(pde, mu, full_config, seed=900 + i, colloc=colloc)
            full_times.append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            online_train(init_coeffs(mu, model), model, mu, online_config)
            gpt_times.append(time.perf_counter() - t0)
    off = offline_cost(model) if offline_total is None else float(offline_total)
    t_full = float(np.mean(full_times))
    t_gpt = float(np.mean(gpt_times))
    if horizon is None:
        horizon = 10
        if t_gpt < t_full:
            horizon = max(10, 2 * int(np.ceil(off / (t_full - t_gpt))))
    return TimingCurve(
        offline_total=off, t_full_mean=t_full, t_gpt_mean=t_gpt, horizon=horizon,
        full_times=np.asarray(full_times), gpt_times=np.asarray(gpt_times),
    )


def svd_decay_report(snapshot_matrix, label="") -> np.ndarray:
    """Normalized singular-value spectrum sigma_k / sigma_1 of a snapshot matrix."""
    mat = np.asarray(snapshot_matrix, dtype=np.float64)
    if mat.size == 0 or not np.any(mat):
        raise ValueError("zero matrix")
    s = np.linalg.svd(mat, compute_uv=False)
    return s / s[0]
