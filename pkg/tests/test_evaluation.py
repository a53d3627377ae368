import logging

import numpy as np
import pytest

from metapinn.evaluation import (
    TimingCurve,
    error_metrics,
    evaluate_test_set,
    eval_grid,
    svd_decay_report,
)
from metapinn.pde import BURGERS
from metapinn.reduced import OnlineConfig

from test_reduced import quick_model


# ------------------------------------------------------------- error metrics

def test_error_metrics_identical():
    v = np.array([1.0, 2.0, 3.0])
    assert error_metrics(v, v) == (0.0, 0.0)


def test_error_metrics_half_norm():
    v = np.array([1.0, -2.0, 0.5])
    rel, _ = error_metrics(v, 2 * v)
    assert rel == pytest.approx(0.5)


def test_error_metrics_orthogonal():
    rel, mx = error_metrics(np.array([1.0, 0.0]), np.array([0.0, 1.0]))
    assert rel == pytest.approx(np.sqrt(2))
    assert mx == 1.0


def test_error_metrics_degenerate_reference():
    with pytest.raises(ValueError, match="degenerate reference"):
        error_metrics(np.ones(3), np.zeros(3))


def test_error_metrics_scale_covariant():
    rng = np.random.default_rng(0)
    g, r = rng.normal(size=20), rng.normal(size=20)
    rel, mx = error_metrics(g, r)
    for s in (2.0, -0.3, 1e6):
        rel_s, mx_s = error_metrics(s * g, s * r)
        assert rel_s == pytest.approx(rel, rel=1e-12)
        assert mx_s == pytest.approx(abs(s) * mx, rel=1e-12)


# ------------------------------------------------------------------ test set

def test_evaluate_at_samples_with_frozen_coefficients_is_exact():
    model = quick_model(BURGERS, [(0.25,), (0.5,), (0.75,)])
    # zero online epochs at the sampled parameters: the initial coefficients
    # are the unit vectors, so the surrogate IS the reference network
    report = evaluate_test_set(model, np.asarray(model.mus), model.pinns,
                               grid_shape=(21, 21), online_config=OnlineConfig(lr=0.02, epochs=0))
    assert len(report.rows) == 3
    for row in report.rows:
        assert row.rel_l2 == 0.0 and row.max_abs == 0.0


def test_worst_case_dominates_rows():
    model = quick_model(BURGERS, [(0.25,), (0.75,)], epochs=40)
    test_mus = np.array([[0.3], [0.6], [0.9]])
    cfg_tiny = OnlineConfig(lr=0.02, epochs=20)
    refs = [quick_model(BURGERS, [tuple(mu)], epochs=40).pinns[0] for mu in test_mus]
    report = evaluate_test_set(model, test_mus, refs, grid_shape=(11, 11), online_config=cfg_tiny)
    assert report.worst_rel_l2 >= max(r.rel_l2 for r in report.rows) - 1e-15
    assert all(report.worst_rel_l2 >= r.rel_l2 for r in report.rows)


def test_missing_reference_skipped_with_warning(caplog):
    model = quick_model(BURGERS, [(0.25,), (0.75,)])
    with caplog.at_level(logging.WARNING):
        report = evaluate_test_set(model, np.array([[0.3], [0.6]]), [None, model.pinns[0]],
                                   grid_shape=(11, 11), online_config=OnlineConfig(lr=0.0, epochs=0))
    assert len(report.rows) == 1
    assert len(report.skipped) == 1
    assert "skipped" in caplog.text


def test_eval_grid_shape():
    pts = eval_grid(BURGERS, (11, 7))
    assert pts.shape == (77, 2)
    assert pts[:, 0].min() == -1.0 and pts[:, 0].max() == 1.0
    assert pts[:, 1].min() == 0.0 and pts[:, 1].max() == BURGERS.t_final


# ------------------------------------------------------------------- timing

def test_timing_curve_monotone_and_breakeven_identity():
    curve = TimingCurve(offline_total=10.0, t_full_mean=2.0, t_gpt_mean=0.5, horizon=20)
    assert np.all(np.diff(curve.full_cum) > 0)
    assert np.all(np.diff(curve.gpt_cum) > 0)
    q = curve.breakeven
    assert q == int(np.ceil(10.0 / (2.0 - 0.5)))
    assert curve.gpt_cum[q - 1] <= curve.full_cum[q - 1]
    if q > 1:
        assert curve.gpt_cum[q - 2] > curve.full_cum[q - 2]


def test_timing_curve_exact_integer_crossing():
    curve = TimingCurve(offline_total=9.0, t_full_mean=2.0, t_gpt_mean=1.0, horizon=30)
    assert curve.breakeven == 9 == int(np.ceil(9.0 / 1.0))


def test_timing_curve_no_breakeven_when_surrogate_slower():
    curve = TimingCurve(offline_total=5.0, t_full_mean=1.0, t_gpt_mean=1.5, horizon=50)
    assert curve.breakeven is None
    assert curve.marginal_ratio == 1.5


# ----------------------------------------------------------------- svd decay

def test_svd_rank_one():
    u = np.arange(1.0, 6.0)
    v = np.array([2.0, -1.0, 0.5])
    ratios = svd_decay_report(np.outer(u, v), label="rank1")
    assert ratios[0] == 1.0
    assert ratios[1] <= 1e-12


def test_svd_orthonormal_columns_flat():
    q, _ = np.linalg.qr(np.random.default_rng(1).normal(size=(30, 6)))
    ratios = svd_decay_report(q)
    assert np.allclose(ratios, 1.0, atol=1e-12)


def test_svd_spectrum_normalized_and_sorted():
    m = np.random.default_rng(2).normal(size=(40, 8))
    ratios = svd_decay_report(m)
    assert ratios[0] == 1.0
    assert np.all(np.diff(ratios) <= 0)
    assert ratios.shape == (8,)


def test_svd_zero_matrix_rejected():
    with pytest.raises(ValueError, match="zero matrix"):
        svd_decay_report(np.zeros((5, 3)))


@pytest.mark.slow
def test_worst_case_error_decreases_with_model_size():
    # growing the hidden layer can only improve the worst-case test error
    # (up to optimizer slack): micro-scale analog with trained networks
    from metapinn.greedy import GreedyConfig, run_offline
    from metapinn.pde import sample_collocation
    from metapinn.reduced import GptModel
    from metapinn.training import TrainConfig, train_full_pinn

    colloc = sample_collocation(BURGERS, (250, 50, 50), seed=3)
    train_cfg = TrainConfig(dims=(2, 10, 10, 1), activation="tanh", lr=5e-3, epochs=2000)
    cfg = GreedyConfig(
        xi=np.linspace(0.3, 1.0, 9).reshape(-1, 1), n_max=3, train=train_cfg,
        online=OnlineConfig(lr=0.02, epochs=300),
        colloc=colloc, mu1=np.array([0.3]), seed=5,
    )
    full = run_offline(BURGERS, cfg)
    test_mus = np.array([[0.45], [0.7], [0.95]])
    refs = [train_full_pinn(BURGERS, mu, train_cfg, seed=400 + i, colloc=colloc)
            for i, mu in enumerate(test_mus)]
    worst = []
    staged = GptModel(BURGERS, full.colloc_r)
    for pinn in full.pinns:
        staged.add_neuron(pinn)
        report = evaluate_test_set(staged, test_mus, refs, grid_shape=(41, 41),
                                   online_config=OnlineConfig(lr=0.02, epochs=300))
        worst.append(report.worst_rel_l2)
    assert all(b <= 1.5 * a for a, b in zip(worst, worst[1:]))
    assert worst[-1] <= worst[0]
