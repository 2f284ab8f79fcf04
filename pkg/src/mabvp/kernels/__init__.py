"""Backend selection for the hot kernels.

The environment variable MABVP_BACKEND picks the implementation:

    auto   (default) numba if importable, numpy otherwise
    numba  require the JIT backend, fail loudly if unavailable
    numpy  force the pure-NumPy fallback

Both backends expose eval_point, eval_grid, shoot and operator_apply with
identical contracts; benchmarks/compare_backends.py measures the gap.
"""

from __future__ import annotations

import importlib
import os
import warnings

_REQUESTED = os.environ.get("MABVP_BACKEND", "auto").strip().lower()
if _REQUESTED not in {"auto", "numba", "numpy"}:
    warnings.warn(
        f"MABVP_BACKEND={_REQUESTED!r} is not one of auto/numba/numpy; using auto",
        RuntimeWarning,
    )
    _REQUESTED = "auto"

if _REQUESTED == "numpy":
    from . import numpy_backend as _active
else:
    try:
        from . import numba_backend as _active
    except ImportError:
        if _REQUESTED == "numba":
            raise
        warnings.warn("numba unavailable; falling back to the numpy backend", RuntimeWarning)
        from . import numpy_backend as _active

BACKEND = _active.NAME

eval_point = _active.eval_point
eval_grid = _active.eval_grid
shoot = _active.shoot
operator_apply = _active.operator_apply


def get_backend(name: str):
    """Load a specific backend module by name ('numba' or 'numpy')."""
    if name not in {"numba", "numpy"}:
        raise ValueError(f"unknown backend {name!r}")
    return importlib.import_module(f".{name}_backend", __package__)
