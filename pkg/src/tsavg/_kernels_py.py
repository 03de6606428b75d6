"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Every loop here performs the same floating-point operations in the same
order as the compiled version; results are bit-identical.
"""
import numpy as np


def compensated_dot(values, weights):
    values = np.ascontiguousarray(values, dtype=np.float64)
    weights = np.ascontiguousarray(weights, dtype=np.float64)
    m, n = values.shape
    if weights.shape[0] != m:
        raise ValueError("values and weights disagree in length")
    out = np.empty(n, dtype=np.float64)
    w = weights.tolist()
    for j in range(n):
        s = 0.0
        c = 0.0
        for vi, wi in zip(values[:, j].tolist(), w):
            v = vi * wi
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        out[j] = s + c
    return out


def linear_steps(mu, coef, x0):
    mu = np.ascontiguousarray(mu, dtype=np.float64)
    coef = np.ascontiguousarray(coef, dtype=np.float64)
    if coef.shape[0] != mu.shape[0]:
        raise ValueError("mu and coef disagree in length")
    out = [float(x0)]
    x = float(x0)
    for m_i, c_i in zip(mu.tolist(), coef.tolist()):
        x = x + m_i * (c_i * x)
        out.append(x)
    return np.array(out, dtype=np.float64)


def first_exit(path, lo, hi):
    for i, v in enumerate(np.asarray(path, dtype=np.float64).tolist()):
        if v < lo or v > hi:
            return i
    return -1
