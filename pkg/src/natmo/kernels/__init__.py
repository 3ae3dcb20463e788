"""Backend selection for the MLP evaluation kernel.

Imports the compiled Cython kernel when it was built, otherwise falls back
to the NumPy reference implementation.  Setting ``NATMO_PURE_PYTHON=1``
forces the fallback regardless.  Both backends implement the same
``mlp_eval`` contract; see :mod:`natmo.kernels.pyref`.
"""

from __future__ import annotations

import os

import numpy as np

from . import pyref
from .pyref import SIGMOID, TANH, param_count

if os.environ.get("NATMO_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = pyref
    BACKEND = "python"
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]

        if not hasattr(_impl, "mlp_eval"):
            raise ImportError("stale _fast build")
        BACKEND = "cython"
    except ImportError:
        _impl = pyref
        BACKEND = "python"

ACTIVATION_IDS = {"tanh": TANH, "sigmoid": SIGMOID}

__all__ = [
    "BACKEND",
    "ACTIVATION_IDS",
    "available_backends",
    "backend_name",
    "mlp_eval",
    "param_count",
]


def backend_name() -> str:
    return BACKEND


def available_backends() -> dict:
    """Name -> module for every importable backend (used by the benchmark)."""
    out = {"python": pyref}
    try:
        from . import _fast  # type: ignore[attr-defined]

        if hasattr(_fast, "mlp_eval"):
            out["cython"] = _fast
    except ImportError:
        pass
    return out


def mlp_eval(x, theta, widths, activation, order=0, want_jac=False, impl=None):
    """Evaluate an MLP and, optionally, its input derivatives and Jacobians.

    ``x``: (m, n0) inputs; ``theta``: packed parameters; ``widths``: full
    layer-width tuple; ``activation``: "tanh" or "sigmoid"; ``order``: number
    of input derivatives (scalar input only).  Returns the 6-tuple described
    in :mod:`natmo.kernels.pyref`.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("x must be a 2-D (m, n) array")
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or widths[-1] != 1 or any(w < 1 for w in widths):
        raise ValueError(f"invalid layer widths {widths}")
    if widths[0] != x.shape[1]:
        raise ValueError(f"input dim {x.shape[1]} does not match widths[0]={widths[0]}")
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    if order >= 1 and widths[0] != 1:
        raise ValueError("input derivatives require a 1-D input")
    theta = np.ascontiguousarray(theta, dtype=np.float64)
    d = param_count(widths)
    if theta.shape != (d,):
        raise ValueError(f"theta has shape {theta.shape}, expected ({d},)")
    try:
        act_id = ACTIVATION_IDS[activation]
    except KeyError:
        raise ValueError(f"unknown activation {activation!r}") from None
    backend = _impl if impl is None else impl
    return backend.mlp_eval(x, theta, np.asarray(widths, dtype=np.int64), act_id, order, bool(want_jac))
