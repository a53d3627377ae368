import numpy as np
import pytest

from metapinn.kernels import get_backend
from metapinn.mlp import init_params

from oracles import rel_err

try:
    get_backend("compiled")
    HAVE_COMPILED = True
except ImportError:
    HAVE_COMPILED = False

needs_compiled = pytest.mark.skipif(not HAVE_COMPILED, reason="compiled backend not built")


@needs_compiled
@pytest.mark.parametrize("dims", [(2, 1, 1), (2, 5, 5, 1), (2, 20, 20, 1), (2, 16, 8, 4, 1)])
@pytest.mark.parametrize("act", [0, 1])
def test_backends_agree(dims, act):
    np_be = get_backend("numpy")
    cy_be = get_backend("compiled")
    p = init_params(dims, "tanh", seed=dims[1] + act)
    rng = np.random.default_rng(0)
    pts = np.column_stack([rng.uniform(-1, 1, 200), rng.uniform(0, 5, 200)])
    out_np, stash_np = np_be.ext_forward(p.weights, p.biases, act, pts, keep=True)
    out_cy, stash_cy = cy_be.ext_forward(p.weights, p.biases, act, pts, keep=True)
    assert rel_err(out_cy, out_np) < 1e-13
    seeds = rng.normal(size=(200, 5))
    g_np = np_be.ext_backward(p.weights, stash_np, seeds)
    g_cy = cy_be.ext_backward(p.weights, stash_cy, seeds)
    for a, b in zip(g_np[0] + g_np[1], g_cy[0] + g_cy[1]):
        assert rel_err(b, a) < 1e-12


@needs_compiled
def test_backend_names():
    assert get_backend("numpy").BACKEND_NAME == "numpy"
    assert get_backend("compiled").BACKEND_NAME == "compiled"
    with pytest.raises(ValueError):
        get_backend("fortran")
