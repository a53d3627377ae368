"""Kernel backend selection.

The hot inner loops (extended forward pass and reverse accumulation over
collocation batches) exist twice: a compiled Cython extension
(``metapinn._fastcore``) and a pure-NumPy fallback (``metapinn._slowcore``).
The compiled backend is preferred when importable; set
``METAPINN_BACKEND=numpy`` or ``METAPINN_BACKEND=compiled`` to force one.
"""

import os

from . import _slowcore

ACT_TANH = _slowcore.ACT_TANH
ACT_COS = _slowcore.ACT_COS

_requested = os.environ.get("METAPINN_BACKEND", "").strip().lower()

if _requested in ("", "compiled"):
    try:
        from . import _fastcore as _impl

        HAVE_COMPILED = True
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "METAPINN_BACKEND=compiled but metapinn._fastcore is not built"
            )
        _impl = _slowcore
        HAVE_COMPILED = False
elif _requested in ("numpy", "python"):
    _impl = _slowcore
    HAVE_COMPILED = False
else:
    raise ValueError(f"unknown METAPINN_BACKEND value: {_requested!r}")

BACKEND = _impl.BACKEND_NAME

ext_forward = _impl.ext_forward
ext_backward = _impl.ext_backward


def get_backend(name):
    """Return a specific backend module ("numpy" or "compiled"), for tests
    and benchmarks that compare the two."""
    if name == "numpy":
        return _slowcore
    if name == "compiled":
        from . import _fastcore

        return _fastcore
    raise ValueError(f"unknown backend {name!r}")
