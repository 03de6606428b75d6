"""Backend selection for the scattered-point kernels.

The compiled extension is used when it was built; otherwise the pure-Python
module is loaded. Setting ``TSAVG_PURE_PYTHON=1`` forces the fallback.
"""
import os

import numpy as np

from . import _kernels_py

if os.environ.get("TSAVG_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def compensated_dot(values, weights):
    """Column-wise ``sum_i values[i, :] * weights[i]`` (Neumaier, ascending ``i``)."""
    v = np.ascontiguousarray(np.atleast_2d(np.asarray(values, dtype=np.float64)))
    w = np.ascontiguousarray(np.asarray(weights, dtype=np.float64).ravel())
    return np.asarray(_impl.compensated_dot(v, w))


def linear_steps(mu, coef, x0):
    """All iterates of ``x <- x + mu[i] * (coef[i] * x)`` starting at ``x0``."""
    m = np.ascontiguousarray(np.asarray(mu, dtype=np.float64).ravel())
    c = np.ascontiguousarray(np.asarray(coef, dtype=np.float64).ravel())
    return np.asarray(_impl.linear_steps(m, c, float(x0)))


def first_exit(path, lo, hi):
    """Index of the first entry of ``path`` outside ``[lo, hi]``, or -1."""
    p = np.ascontiguousarray(np.asarray(path, dtype=np.float64).ravel())
    return int(_impl.first_exit(p, float(lo), float(hi)))


__all__ = ["BACKEND", "compensated_dot", "linear_steps", "first_exit"]
