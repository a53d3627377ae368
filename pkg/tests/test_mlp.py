import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metapinn.mlp import (
    ExtBatch,
    LossTerm,
    MLPParams,
    extended_forward,
    extended_forward_batch,
    init_params,
    loss_grad_params,
    loss_value,
    mlp_forward,
    param_count,
)
from metapinn.pde import KLEIN_GORDON

from oracles import fd_extended, fd_param_grad, rel_err


def single_unit(w1, w2, b1=0.0, v=1.0, c=0.0, activation="cos"):
    """NN(2,1,1): u = v * sigma(w1*x + w2*t + b1) + c."""
    return MLPParams(
        (2, 1, 1),
        [np.array([[w1, w2]]), np.array([[v]])],
        [np.array([b1]), np.array([c])],
        activation,
    )


def test_param_count_examples():
    assert param_count((2, 40, 40, 1)) == 1801
    assert param_count((2, 1, 1)) == 3 + 2
    p = init_params((2, 5, 5, 1), seed=0)
    assert p.n_params == param_count((2, 5, 5, 1)) == sum(a.size for a in p.weights + p.biases)


@given(st.lists(st.integers(min_value=1, max_value=9), min_size=1, max_size=4))
def test_param_count_invariant(hidden):
    dims = (2, *hidden, 1)
    p = init_params(dims, seed=1)
    assert p.n_params == sum(w.size + b.size for w, b in zip(p.weights, p.biases))


def test_zero_params_forward():
    dims = (2, 3, 3, 1)
    p = MLPParams(
        dims,
        [np.zeros((dims[k + 1], dims[k])) for k in range(3)],
        [np.zeros(dims[k + 1]) for k in range(3)],
        "tanh",
    )
    assert mlp_forward(p, (0.3, -0.7)) == 0.0
    ext = extended_forward(p, (1.0, 2.0))
    assert ext.u == 0.0
    assert ext.u_x == ext.u_t == ext.u_xx == ext.u_tt == 0.0


def test_zero_weights_bias_composition():
    # zero weights: the output is the biases pushed through the activations,
    # independent of the input, with all derivatives zero
    dims = (2, 2, 1)
    b1 = np.array([0.4, -0.2])
    b2 = np.array([0.7])
    p = MLPParams(dims, [np.zeros((2, 2)), np.zeros((1, 2))], [b1, b2], "tanh")
    # with zero weights every affine layer returns its bias: u = b2
    ext = extended_forward(p, (0.9, 0.1))
    assert ext.u == b2[0]
    assert ext.u_x == ext.u_t == ext.u_xx == ext.u_tt == 0.0


def test_single_cos_unit_value():
    p = single_unit(1.0, 1.0, activation="cos")
    assert mlp_forward(p, (0.0, 0.0)) == 1.0


def test_single_cos_unit_extended():
    # u = cos(x + t): at the origin u=1, first derivatives 0, second -1
    p = single_unit(1.0, 1.0, activation="cos")
    ext = extended_forward(p, (0.0, 0.0))
    assert (ext.u, ext.u_x, ext.u_t, ext.u_xx, ext.u_tt) == (1.0, 0.0, 0.0, -1.0, -1.0)


@pytest.mark.parametrize("activation", ["tanh", "cos"])
def test_single_unit_closed_form(activation):
    # depth-1 closed forms are exact to machine precision
    rng = np.random.default_rng(7)
    for _ in range(10):
        w1, w2, b1, v, c = rng.uniform(-2, 2, 5)
        p = single_unit(w1, w2, b1, v, c, activation)
        x, t = rng.uniform(-1, 1, 2)
        a = w1 * x + w2 * t + b1
        if activation == "cos":
            s0, s1, s2 = np.cos(a), -np.sin(a), -np.cos(a)
        else:
            s0 = np.tanh(a)
            s1 = 1 - s0 ** 2
            s2 = -2 * s0 * s1
        ext = extended_forward(p, (x, t))
        assert ext.u == pytest.approx(v * s0 + c, abs=1e-15)
        assert ext.u_x == pytest.approx(v * s1 * w1, abs=1e-15)
        assert ext.u_t == pytest.approx(v * s1 * w2, abs=1e-15)
        assert ext.u_xx == pytest.approx(v * s2 * w1 * w1, abs=1e-14)
        assert ext.u_tt == pytest.approx(v * s2 * w2 * w2, abs=1e-14)


@pytest.mark.parametrize("activation", ["tanh", "cos"])
def test_extended_forward_matches_finite_differences(activation):
    rng = np.random.default_rng(11)
    p = init_params((2, 5, 5, 1), activation, seed=5)
    points = rng.uniform(-1, 1, (10, 2))
    exact = {k: [] for k in ("u_x", "u_t", "u_xx", "u_tt")}
    fd = {k: [] for k in ("u_x", "u_t", "u_xx", "u_tt")}
    for point in points:
        ext = extended_forward(p, point)
        fx, ft, fxx, ftt = fd_extended(p, point, h1=1e-4, h2=1e-3)
        for key, e, f in (("u_x", ext.u_x, fx), ("u_t", ext.u_t, ft),
                          ("u_xx", ext.u_xx, fxx), ("u_tt", ext.u_tt, ftt)):
            exact[key].append(e)
            fd[key].append(f)
    for key in exact:
        assert rel_err(fd[key], exact[key]) < 1e-5


def test_mlp_forward_is_extended_value():
    p = init_params((2, 6, 1), "cos", seed=9)
    pts = np.random.default_rng(1).uniform(-1, 1, (20, 2))
    u_batch = extended_forward_batch(p, pts).u
    for i, point in enumerate(pts):
        assert mlp_forward(p, point) == u_batch[i]


def test_non_finite_rejected():
    p = init_params((2, 3, 1), seed=0)
    with pytest.raises(ValueError, match="non-finite input"):
        mlp_forward(p, (np.nan, 0.0))
    w = [a.copy() for a in p.weights]
    w[0][0, 0] = np.inf
    with pytest.raises(ValueError, match="non-finite input"):
        MLPParams(p.dims, w, p.biases, p.activation)


def test_unsupported_derivative_order():
    ext = ExtBatch(u=np.zeros(3))
    with pytest.raises(ValueError, match="unsupported derivative order"):
        ext.get("u_xt")
    with pytest.raises(ValueError, match="unsupported derivative order"):
        ext.get("u_t")  # not populated


def _kg_terms(points, mu):
    x, t = points[:, 0], points[:, 1]
    return [
        LossTerm(
            points,
            residual=lambda ext: KLEIN_GORDON.residual(ext, x, t, mu),
            residual_grad=lambda ext: KLEIN_GORDON.residual_state_grad(ext, x, t, mu),
        )
    ]


def test_loss_grad_matches_finite_differences():
    rng = np.random.default_rng(3)
    p = init_params((2, 4, 4, 1), "tanh", seed=2)
    pts = np.column_stack([rng.uniform(-1, 1, 10), rng.uniform(0, 5, 10)])
    mu = np.array([-1.5, 0.5, 0.8])
    terms = _kg_terms(pts, mu)
    dws, dbs = loss_grad_params(p, terms)
    fdw, fdb = fd_param_grad(lambda q: loss_value(q, terms), p, h=1e-6)
    exact = np.concatenate([a.ravel() for a in dws + dbs])
    fd = np.concatenate([a.ravel() for a in fdw + fdb])
    assert rel_err(fd, exact) < 1e-6


def test_dead_unit_gets_zero_gradient():
    # hidden unit 2 of the last hidden layer has zero outgoing weight: its
    # incoming weights and bias receive zero gradient
    p = init_params((2, 4, 4, 1), "tanh", seed=13)
    p.weights[2][0, 2] = 0.0
    pts = np.random.default_rng(0).uniform(0.1, 1, (10, 2))
    mu = np.array([-1.0, 0.3, 0.4])
    dws, dbs = loss_grad_params(p, _kg_terms(pts, mu))
    assert np.all(dws[1][2, :] == 0.0)
    assert dbs[1][2] == 0.0


def test_gradient_additivity_over_disjoint_sets():
    rng = np.random.default_rng(8)
    p = init_params((2, 5, 1), "cos", seed=4)
    mu = np.array([-1.2, 0.1, 0.9])
    a = np.column_stack([rng.uniform(-1, 1, 6), rng.uniform(0, 5, 6)])
    b = np.column_stack([rng.uniform(-1, 1, 9), rng.uniform(0, 5, 9)])
    ga = loss_grad_params(p, _kg_terms(a, mu))
    gb = loss_grad_params(p, _kg_terms(b, mu))
    gboth = loss_grad_params(p, _kg_terms(a, mu) + _kg_terms(b, mu))
    for k in range(len(p.weights)):
        assert np.allclose(gboth[0][k], ga[0][k] + gb[0][k], rtol=1e-12, atol=1e-15)
        assert np.allclose(gboth[1][k], ga[1][k] + gb[1][k], rtol=1e-12, atol=1e-15)


def test_empty_points_rejected():
    with pytest.raises(ValueError, match="empty collocation set"):
        LossTerm(np.zeros((0, 2)), residual=lambda e: e.u, residual_grad=lambda e: None)
