"""Shift operators, periodicity in shifts and the integral identities built on them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import (
    DegenerateFunction,
    NonPositiveDerivative,
    NotMonotone,
    PointNotOnScale,
    ShiftLeavesScale,
)
from .timescale import (
    ContinuousInterval,
    ExplicitPoints,
    GeometricCondensation,
    Interval,
    TimeScale,
    delta_derivative_numeric,
    delta_integral,
)

VERIFY_TOL = 1e-9
GAMMA_FLOOR = 1e-9
NODES_PER_INTERVAL = 64
# largest admissible ulp(t) / dist(t, condensation limit) for a sample point
RESOLUTION = 1e-11


@dataclass(frozen=True)
class ShiftOperator:
    """Forward/backward shifts ``delta_pm(s, t)`` on a time scale.

    ``gap(T, t0, i)``, when given, returns the length of the i-th shift
    interval ``[delta^(i)(t0), delta^(i+1)(t0)]`` without forming the
    difference of two nearly equal breakpoints.
    """

    scale: TimeScale
    forward: Callable[[float, float], float]
    backward: Optional[Callable[[float, float], float]] = None
    derivative: Optional[Callable[[float, float], float]] = None
    t0: float = 0.0
    period: float = 1.0
    kind: str = "custom"
    gap: Optional[Callable[[float, float, int], float]] = None

    @classmethod
    def additive(cls, scale, period, t0=0.0):
        """``delta_pm(s, t) = t +- s`` (the shifts of R, Z and hZ)."""
        return cls(
            scale,
            forward=lambda s, t: t + s,
            backward=lambda s, t: t - s,
            derivative=lambda s, t: 1.0,
            t0=t0,
            period=period,
            kind="additive",
            gap=lambda T, t0_, i: float(T),
        )

    @classmethod
    def geometric(cls, scale, q, period=1.0, t0=0.0, limit=1.0):
        """Shifts of the scale ``{limit - q**-n}``: ``t -> limit - (limit - t) q**-s``."""
        q = float(q)
        seg = next(
            (g for g in scale.segments
             if isinstance(g, GeometricCondensation) and g.q == q and g.limit == limit),
            None,
        )

        def move(s, t, sign):
            # family points are shifted by index: near the limit neighbouring
            # points are a few ulps apart and the closed form cannot tell them apart
            if seg is not None and float(s).is_integer():
                n = seg.index_of(t)
                if isinstance(n, int):
                    m = n + sign * int(s)
                    if 0 <= m <= seg.n_effective:
                        return float(seg.family[m])
                    return math.nan
            return limit - (limit - t) * q ** (-sign * s)

        return cls(
            scale,
            forward=lambda s, t: move(s, t, 1),
            backward=lambda s, t: move(s, t, -1),
            derivative=lambda s, t: q ** (-s),
            t0=t0,
            period=period,
            kind="geometric",
            gap=lambda T, t0_, i: (limit - t0_) * q ** (-i * T) * (1.0 - q ** (-T)),
        )

    @classmethod
    def from_table(cls, scale, shift, pairs, t0=0.0, period=None, derivative=None):
        """Forward shift of one fixed size ``shift`` given as ``(t, image)`` pairs."""
        table = sorted((float(a), float(b)) for a, b in pairs)
        src = np.array([a for a, _ in table])
        dst = np.array([b for _, b in table])

        def lookup(keys, vals, t):
            j = int(np.argmin(np.abs(keys - t)))
            if abs(keys[j] - t) > 1e-12 * max(1.0, abs(keys[j])):
                raise ShiftLeavesScale(f"{t} not in shift table")
            return float(vals[j])

        def fwd(s, t):
            if s != shift:
                raise ShiftLeavesScale(f"table only defines shift size {shift}, got {s}")
            return lookup(src, dst, t)

        def bwd(s, t):
            if s != shift:
                raise ShiftLeavesScale(f"table only defines shift size {shift}, got {s}")
            return lookup(dst, src, t)

        return cls(
            scale, fwd, bwd, derivative, t0=t0,
            period=shift if period is None else period, kind="table",
        )


def _on_scale(op: ShiftOperator, image: float, t: float, what: str) -> float:
    ts = op.scale
    if not math.isfinite(image):
        raise ShiftLeavesScale(f"{what} of {t} is not finite")
    try:
        snapped = ts.snap(image)
    except PointNotOnScale:
        raise ShiftLeavesScale(f"{what} of {t} -> {image} is not a scale point") from None
    limits = ts.condensation_limits
    if snapped in limits and t not in limits:
        # the exact image lies between the last materialized point and the limit
        raise ShiftLeavesScale(f"{what} of {t} lands beyond the materialized scale")
    return snapped


def forward_shift(op: ShiftOperator, s: float, t: float) -> float:
    t = op.scale.snap(t)
    return _on_scale(op, float(op.forward(s, t)), t, f"delta_+({s}, .)")


def backward_shift(op: ShiftOperator, s: float, t: float) -> float:
    if op.backward is None:
        raise ShiftLeavesScale("operator has no backward shift")
    t = op.scale.snap(t)
    return _on_scale(op, float(op.backward(s, t)), t, f"delta_-({s}, .)")


def shift_delta_derivative(op: ShiftOperator, T: float, t: float) -> float:
    """Delta derivative of ``delta_+(T, .)`` at ``t`` (analytic when supplied)."""
    if op.derivative is not None:
        d = float(op.derivative(T, t))
    else:
        d = float(delta_derivative_numeric(op.scale, lambda u: op.forward(T, u), t).value)
    if not d > 0:
        raise NonPositiveDerivative(
            f"delta_+^Delta({T}, {t}) = {d} <= 0; the operator is misconfigured"
        )
    return d


def iterate_shift(op: ShiftOperator, T: float, t: float, i: int) -> float:
    """``delta^(i)(t)``: the forward shift by ``T`` composed ``i`` times."""
    if i < 0:
        raise ValueError("iteration count must be nonnegative")
    t = op.scale.snap(t)
    for k in range(i):
        try:
            t = forward_shift(op, T, t)
        except ShiftLeavesScale as exc:
            raise ShiftLeavesScale(f"iteration {k}: {exc}", iteration=k) from exc
    return t


def shift_breakpoints(op: ShiftOperator, T: float, t0: float, n: int) -> np.ndarray:
    """``[delta^(0)(t0), ..., delta^(n)(t0)]``."""
    out = [op.scale.snap(t0)]
    for k in range(n):
        try:
            out.append(forward_shift(op, T, out[-1]))
        except ShiftLeavesScale as exc:
            raise ShiftLeavesScale(f"iteration {k}: {exc}", iteration=k) from exc
    return np.array(out)


# ---------------------------------------------------------------------------
# periodicity certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PeriodicityCertificate:
    """Outcome of a periodicity check.

    ``max_residual`` is measured as ``|lhs - rhs| / max(1, |rhs|)`` per
    component so functions that blow up near a condensation point are judged
    relative to their size; ``max_abs_residual`` is the raw maximum.
    """

    kind: str  # "delta_periodic" | "quasi_periodic" | "none"
    period: float
    gamma: float
    max_residual: float
    sample_count: int
    max_abs_residual: float = 0.0
    tolerance: float = VERIFY_TOL

    @property
    def certified(self) -> bool:
        return self.kind != "none"


def default_samples(op: ShiftOperator, T: float, direction: str = "forward") -> np.ndarray:
    """Scale points (from ``op.t0`` on) whose shift by ``T`` stays on the scale.

    Every scattered point is used, plus 64 Gauss-Legendre nodes on each
    continuous piece. Condensation limits are excluded, and so are points
    (or images) so close to a limit that one ulp exceeds ``RESOLUTION``
    times their distance to it: there the stored float no longer pins down
    the point well enough to test a function that varies on that scale.
    """
    ts = op.scale
    shift = forward_shift if direction == "forward" else backward_shift
    limits = set(ts.condensation_limits)
    cand = [float(p) for p in ts.all_points() if p >= op.t0 and float(p) not in limits]
    nodes, _ = np.polynomial.legendre.leggauss(NODES_PER_INTERVAL)
    for iv in ts.intervals():
        lo = max(iv.a, op.t0)
        if lo >= iv.b:
            continue
        cand.extend((lo + (iv.b - lo) * (nodes + 1.0) / 2.0).tolist())
    def resolved(u):
        return all(np.spacing(abs(u)) <= RESOLUTION * abs(lim - u) for lim in limits)

    out = []
    for t in sorted(cand):
        try:
            image = shift(op, T, t)
        except (ShiftLeavesScale, PointNotOnScale):
            continue
        if resolved(t) and resolved(image):
            out.append(t)
    return np.array(out)


def _vals(f, t):
    return np.atleast_1d(np.asarray(f(t), dtype=np.float64))


def _shifted_terms(op, f, T, samples, direction):
    shift = forward_shift if direction == "forward" else backward_shift
    lhs, rhs, used = [], [], []
    for t in samples:
        t = float(t)
        image = shift(op, T, t)
        if direction == "forward":
            d = shift_delta_derivative(op, T, t)
        else:
            # derivative of delta_-(T, .) is the reciprocal of delta_+^Delta at the image
            d = 1.0 / shift_delta_derivative(op, T, image)
        a, b = _vals(f, image) * d, _vals(f, t)
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            continue
        lhs.append(a)
        rhs.append(b)
        used.append(t)
    if not used:
        return np.empty((0, 1)), np.empty((0, 1))
    return np.vstack(lhs), np.vstack(rhs)


def _residuals(lhs, target):
    diff = np.abs(lhs - target)
    scaled = diff / np.maximum(1.0, np.abs(target))
    return float(scaled.max(initial=0.0)), float(diff.max(initial=0.0))


def verify_delta_periodic(
    op: ShiftOperator, f, T: float, samples=None, tol: float = VERIFY_TOL,
    check_backward: bool = False,
) -> PeriodicityCertificate:
    """Check ``f(delta_+(T, t)) delta_+^Delta(T, t) = f(t)`` on sample points.

    Failure is reported through the certificate (``kind="none"``).
    With ``check_backward`` the identity for ``delta_-`` is checked too.
    """
    pts = default_samples(op, T) if samples is None else np.asarray(samples, dtype=float)
    lhs, rhs = _shifted_terms(op, f, T, pts, "forward")
    res, absres = _residuals(lhs, rhs)
    count = len(lhs)
    if check_backward:
        bpts = default_samples(op, T, "backward") if samples is None else pts
        lhs_b, rhs_b = _shifted_terms(op, f, T, bpts, "backward")
        r2, a2 = _residuals(lhs_b, rhs_b)
        res, absres, count = max(res, r2), max(absres, a2), count + len(lhs_b)
    kind = "delta_periodic" if count and res <= tol else "none"
    return PeriodicityCertificate(kind, T, 1.0, res, count, absres, tol)


def verify_quasiperiodic(
    op: ShiftOperator, f, T: float, samples=None, tol: float = VERIFY_TOL
) -> PeriodicityCertificate:
    """Estimate the factor ``gamma`` in ``f(delta_+(T,t)) delta_+^Delta(T,t) = gamma f(t)``.

    ``gamma`` is the median of pointwise ratios over components whose size
    exceeds ``1e-9 * max|f|``; the residual is measured against ``gamma f(t)``.
    """
    pts = default_samples(op, T) if samples is None else np.asarray(samples, dtype=float)
    lhs, rhs = _shifted_terms(op, f, T, pts, "forward")
    scale = float(np.max(np.abs(rhs), initial=0.0))
    if scale == 0.0:
        raise DegenerateFunction("f vanishes at every sample point; gamma is unidentifiable")
    mask = np.abs(rhs) > GAMMA_FLOOR * scale
    gamma = float(np.median(lhs[mask] / rhs[mask]))
    res, absres = _residuals(lhs, gamma * rhs)
    kind = "quasi_periodic" if res <= tol else "none"
    return PeriodicityCertificate(kind, T, gamma, res, len(lhs), absres, tol)


# ---------------------------------------------------------------------------
# integral identities
# ---------------------------------------------------------------------------


def _sample_walk(ts: TimeScale, a, b):
    nodes = np.linspace(0.0, 1.0, NODES_PER_INTERVAL)
    out = []
    for item in ts.points_between(a, b):
        if isinstance(item, Interval):
            out.extend((item.a + (item.b - item.a) * nodes).tolist())
        else:
            out.append(item)
    return out


def image_scale(ts: TimeScale, nu, a: float, b: float) -> TimeScale:
    """The time scale ``nu([a, b]_T)`` for a strictly increasing ``nu``."""
    segs, run = [], []
    for item in ts.points_between(a, b):
        if isinstance(item, Interval):
            if run:
                segs.append(ExplicitPoints(tuple(run)))
                run = []
            segs.append(ContinuousInterval(float(nu(item.a)), float(nu(item.b))))
        else:
            run.append(float(nu(item)))
    if run:
        segs.append(ExplicitPoints(tuple(run)))
    return TimeScale(segs)


def substitution_rule_check(
    ts: TimeScale, nu, g, a: float, b: float, nu_delta=None, nu_inverse=None
) -> float:
    """Residual of the substitution rule for a strictly increasing ``nu``.

    Compares ``int_a^b g(s) nu^Delta(s) Delta s`` on ``ts`` with
    ``int_{nu(a)}^{nu(b)} g(nu^{-1}(s)) Delta~s`` on the image scale.
    """
    a, b = ts.snap(a), ts.snap(b)
    walk = _sample_walk(ts, a, b)
    images = [float(nu(s)) for s in walk]
    if any(y <= x for x, y in zip(images, images[1:])):
        raise NotMonotone("nu is not strictly increasing on the sampled points")
    if nu_delta is None:
        def nu_delta(s):
            return delta_derivative_numeric(ts, nu, s).value

    lhs = delta_integral(ts, lambda s: np.asarray(g(s)) * nu_delta(s), a, b)

    tilde = image_scale(ts, nu, a, b)
    back = {}
    for item in ts.points_between(a, b):
        if not isinstance(item, Interval):
            back[tilde.snap(nu(item))] = item

    def g_pullback(s):
        if s in back:
            return g(back[s])
        if nu_inverse is not None:
            return g(nu_inverse(s))
        for iv in ts.intervals():
            lo, hi = nu(iv.a), nu(iv.b)
            if lo <= s <= hi:
                return g(optimize.brentq(lambda u: nu(u) - s, iv.a, iv.b, xtol=1e-15))
        raise PointNotOnScale(f"{s} has no preimage")

    rhs = delta_integral(tilde, g_pullback, tilde.snap(nu(a)), tilde.snap(nu(b)))
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs))))


def periodic_integral_invariance_check(
    op: ShiftOperator, f, T: float, t0: float, t: float, gamma: float = 1.0
) -> float:
    """Residual of ``int_{delta(t0)}^{delta(t)} f = gamma * int_{t0}^{t} f``.

    ``gamma = 1`` is the Delta-periodic case. Returns the max-norm residual.
    """
    ts = op.scale
    base = delta_integral(ts, f, t0, t)
    shifted = delta_integral(ts, f, forward_shift(op, T, t0), forward_shift(op, T, t))
    return float(np.max(np.abs(np.asarray(shifted) - gamma * np.asarray(base))))
