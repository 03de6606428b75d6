"""Partial averaging over shift intervals and the proximity constant.

The averaged right-hand side is piecewise constant in ``t``: on the i-th
shift interval ``[delta^(i)(t0), delta^(i+1)(t0))`` it equals
``gamma**i / len_i * B(x)`` with ``B(x)`` the delta integral of ``X(., x)``
over the first interval. ``gamma = 1`` gives the Delta-periodic case.
"""
from __future__ import annotations

import logging
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from .errors import (
    CertificateMissing,
    NonPositiveParameter,
    ShiftLeavesScale,
    ZeroLengthPeriodInterval,
)
from .shifts import PeriodicityCertificate, ShiftOperator, forward_shift
from .timescale import delta_integral

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class VectorField:
    """Right-hand side ``X(t, x)`` with its bound ``M`` and Lipschitz constant.

    ``coefficient`` marks a scalar linear field ``X(t, x) = a(t) x``; the
    solver then steps scattered runs through the compiled kernel.
    """

    func: Callable[[float, np.ndarray], object]
    dim: int = 1
    bound: Optional[float] = None
    lipschitz: Optional[float] = None
    certificate: Optional[PeriodicityCertificate] = None
    coefficient: Optional[Callable[[float], float]] = None
    name: str = ""

    def __post_init__(self):
        for label, v in (("bound", self.bound), ("lipschitz", self.lipschitz)):
            if v is not None and not v > 0:
                raise NonPositiveParameter(f"{label} must be positive, got {v}")

    def __call__(self, t, x):
        return np.atleast_1d(np.asarray(self.func(t, np.atleast_1d(x)), dtype=np.float64))

    @classmethod
    def scalar_linear(cls, coefficient, **kw):
        return cls(lambda t, x: coefficient(t) * x, dim=1, coefficient=coefficient, **kw)

    def at(self, x):
        """The grid function ``t -> X(t, x)`` for a frozen state ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        return lambda t: self(t, x)

    def with_certificate(self, cert):
        return VectorField(
            self.func, self.dim, self.bound, self.lipschitz, cert, self.coefficient, self.name
        )


class ConstantsEstimate(NamedTuple):
    bound: float
    lipschitz: float
    sample_count: int


def estimate_constants(field: VectorField, times, lo, hi, n_samples=256, seed=0):
    """Sample estimates of ``M = sup|X|`` and the Lipschitz constant on a box.

    States are drawn uniformly from ``[lo, hi]`` (plus the box corners along
    the diagonal); ``times`` are the scale points to evaluate at.
    """
    rng = np.random.default_rng(seed)
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    xs = np.vstack([lo, hi, rng.uniform(lo, hi, size=(n_samples, lo.size))])
    M, lam, count = 0.0, 0.0, 0
    for t in times:
        vals = np.array([field(float(t), x) for x in xs])
        M = max(M, float(np.max(np.linalg.norm(vals, axis=1))))
        dx = np.linalg.norm(xs[1:] - xs[:-1], axis=1)
        dv = np.linalg.norm(vals[1:] - vals[:-1], axis=1)
        ok = dx > 0
        if ok.any():
            lam = max(lam, float(np.max(dv[ok] / dx[ok])))
        count += len(xs)
    return ConstantsEstimate(M, lam, count)


# ---------------------------------------------------------------------------


def base_integral(field: VectorField, op: ShiftOperator, T: float, t0: float, x) -> np.ndarray:
    """``int_{t0}^{delta_+(T, t0)} X(t, x) Delta t``."""
    end = forward_shift(op, T, t0)
    if end == op.scale.snap(t0):
        raise ZeroLengthPeriodInterval(f"delta_+({T}, {t0}) = {t0}")
    return np.atleast_1d(delta_integral(op.scale, field.at(x), t0, end))


def base_average(field: VectorField, op: ShiftOperator, T: float, t0: float, x) -> np.ndarray:
    """Mean of ``X(., x)`` over the first shift interval."""
    end = forward_shift(op, T, t0)
    return base_integral(field, op, T, t0, x) / (end - op.scale.snap(t0))


def _interval_lengths(op, T, t0, n):
    """Breakpoints reachable on the scale and the lengths of ``n`` intervals."""
    bps = [op.scale.snap(t0)]
    failure = None
    for k in range(n):
        try:
            bps.append(forward_shift(op, T, bps[-1]))
        except ShiftLeavesScale as exc:
            failure = ShiftLeavesScale(f"iteration {k}: {exc}", iteration=k)
            break
    bps = np.array(bps)
    if op.gap is not None:
        lengths = np.array([op.gap(T, bps[0], i) for i in range(n)])
    elif failure is not None:
        raise failure
    else:
        lengths = np.diff(bps)
    if np.any(lengths <= 0):
        raise ZeroLengthPeriodInterval("a shift interval has nonpositive length")
    return bps, lengths


def intervals_to_cover(op: ShiftOperator, T: float, t0: float, horizon=None, cap=10_000) -> int:
    """Number of shift intervals needed to reach ``horizon`` (or all reachable ones)."""
    t = op.scale.snap(t0)
    for n in range(1, cap + 1):
        try:
            t = forward_shift(op, T, t)
        except ShiftLeavesScale:
            return max(n - 1, 1)
        if horizon is not None and t >= horizon:
            return n
    return cap


@dataclass
class AveragedField:
    """Piecewise-constant-in-time averaged right-hand side.

    Immutable apart from the per-state cache of the base integral, which is
    guarded by a lock.
    """

    breakpoints: np.ndarray
    lengths: np.ndarray
    gamma: float
    integral: Callable[[np.ndarray], np.ndarray]
    dim: int = 1
    lipschitz: Optional[float] = None
    bound: Optional[float] = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def n_intervals(self) -> int:
        return len(self.lengths)

    @property
    def K(self) -> float:
        return float(np.max(self.lengths))

    def scaling(self, i: int) -> float:
        return self.gamma ** i / self.lengths[i]

    def base(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        key = x.tobytes()
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            hit = np.asarray(self.integral(x), dtype=np.float64)
            with self._lock:
                self._cache.setdefault(key, hit)
        return hit

    def interval_value(self, i: int, x) -> np.ndarray:
        if not 0 <= i < self.n_intervals:
            raise IndexError(f"interval {i} outside 0..{self.n_intervals - 1}")
        return self.scaling(i) * self.base(x)

    def interval_index(self, t: float) -> int:
        i = int(np.searchsorted(self.breakpoints, t, side="right")) - 1
        if i < 0:
            raise ValueError(f"t={t} precedes the first breakpoint {self.breakpoints[0]}")
        if i >= self.n_intervals:
            last = self.n_intervals - 1
            warnings.warn(
                f"t={t} lies beyond the last materialized shift interval; "
                f"extending interval {last}",
                RuntimeWarning,
                stacklevel=3,
            )
            i = last
        return i

    def __call__(self, t, x):
        return self.interval_value(self.interval_index(t), x)


def _check_certificate(field, certificate, kinds):
    cert = certificate if certificate is not None else field.certificate
    if cert is None or cert.kind not in kinds:
        got = None if cert is None else cert.kind
        raise CertificateMissing(f"averaging needs a certificate of kind {kinds}, got {got}")
    return cert


def _build(field, op, T, t0, gamma, N):
    if N is None:
        # with an exact gap formula the interval opened by the last reachable
        # breakpoint is usable too
        N = intervals_to_cover(op, T, t0) + (1 if op.gap is not None else 0)
    if N < 1:
        raise ValueError("need at least one shift interval")
    bps, lengths = _interval_lengths(op, T, t0, N)
    end = forward_shift(op, T, t0)
    if end == op.scale.snap(t0):
        raise ZeroLengthPeriodInterval(f"delta_+({T}, {t0}) = {t0}")
    return AveragedField(
        breakpoints=bps,
        lengths=lengths,
        gamma=float(gamma),
        integral=lambda x: base_integral(field, op, T, t0, x),
        dim=field.dim,
        lipschitz=field.lipschitz,
        bound=field.bound,
    )


def build_averaged_field_periodic(
    field: VectorField, op: ShiftOperator, T: float, t0: float, N=None, certificate=None
) -> AveragedField:
    """Averaged field for a Delta-periodic right-hand side.

    Interval ``i`` carries ``B(x) / len_i``, the mean of ``X(., x)`` over that
    interval when ``X`` is Delta-periodic.
    """
    _check_certificate(field, certificate, ("delta_periodic",))
    return _build(field, op, T, t0, 1.0, N)


def build_averaged_field_quasiperiodic(
    field: VectorField, op: ShiftOperator, T: float, t0: float, gamma: float, N=None,
    certificate=None,
) -> AveragedField:
    """Averaged field ``gamma**i / len_i * B(x)`` for a geometric quasiperiodic field."""
    cert = _check_certificate(field, certificate, ("quasi_periodic", "delta_periodic"))
    if abs(cert.gamma - gamma) > 1e-9 * max(1.0, abs(gamma)):
        raise CertificateMissing(f"certificate factor {cert.gamma} does not match gamma={gamma}")
    return _build(field, op, T, t0, gamma, N)


def error_bound_constant(M: float, lam: float, L: float, K: float) -> float:
    """``C = 2 M (lam L + K) exp(lam L)``."""
    for label, v in (("M", M), ("lambda", lam), ("L", L), ("K", K)):
        if not v > 0:
            raise NonPositiveParameter(f"{label} must be positive, got {v}")
    return 2.0 * M * (lam * L + K) * math.exp(lam * L)


def interval_length_bound(op: ShiftOperator, T: float, t0: float, N: int) -> float:
    """Largest of the first ``N`` shift-interval lengths (``i = 0`` included)."""
    if N < 1:
        raise ValueError("N must be at least 1")
    return float(np.max(_interval_lengths(op, T, t0, N)[1]))
