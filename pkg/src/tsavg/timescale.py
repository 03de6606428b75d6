"""Time scales and the basic calculus on them.

A time scale is a closed subset of the real line. Here it is assembled from
segments of four kinds (uniform grids, explicit point lists, closed intervals
and geometric families accumulating at a condensation point) and queried
through the jump operators ``sigma``/``rho`` and the graininess ``mu``.

Module-level functions implement the delta integral, a numeric delta
derivative and the time-scale exponential ``e_p(t, t0)``.
"""
from __future__ import annotations

import functools
import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple, Sequence, Union

import numpy as np
from scipy import integrate

from . import kernels
from .errors import (
    EmptyInterval,
    KappaViolation,
    NotRegressive,
    PointNotOnScale,
    QuadratureFailure,
)

log = logging.getLogger(__name__)

MEMBERSHIP_RTOL = 1e-12
QUAD_ATOL = 1e-10
QUAD_RTOL = 1e-10
DEFAULT_N_MAX = 64


def membership_tol(p: float) -> float:
    return MEMBERSHIP_RTOL * max(1.0, abs(p))


# ---------------------------------------------------------------------------
# segments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class UniformGrid:
    """Points ``start + i*step`` for ``i = 0..count-1``."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if not self.step > 0:
            raise ValueError(f"UniformGrid step must be positive, got {self.step}")
        if self.count < 1:
            raise ValueError("UniformGrid needs at least one point")

    def _runs(self):
        pts = float(self.start) + float(self.step) * np.arange(self.count, dtype=np.float64)
        gaps = np.full(self.count, float(self.step))
        return [_PointRun(pts, gaps, np.zeros(self.count, dtype=bool))]


@dataclass(frozen=True)
class ExplicitPoints:
    points: tuple

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        if not pts:
            raise ValueError("ExplicitPoints needs at least one point")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("ExplicitPoints must be strictly increasing")
        object.__setattr__(self, "points", pts)

    def _runs(self):
        pts = np.array(self.points, dtype=np.float64)
        gaps = np.append(np.diff(pts), 0.0)
        return [_PointRun(pts, gaps, np.zeros(len(pts), dtype=bool))]


@dataclass(frozen=True)
class ContinuousInterval:
    a: float
    b: float

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"ContinuousInterval needs a < b, got [{self.a}, {self.b}]")

    def _runs(self):
        return [_IntervalRun(float(self.a), float(self.b))]


@functools.lru_cache(maxsize=64)
def _geometric_family(q: float, n_max: int, lim: float):
    pts = []
    for n in range(n_max + 1):
        t = lim - q ** (-n)
        if t >= lim or (pts and t <= pts[-1]):
            break
        pts.append(t)
    n_eff = len(pts) - 1
    if n_eff < n_max:
        log.warning(
            "geometric family q=%g truncated at n=%d (n_max=%d): later points "
            "are not representable apart from the limit",
            q, n_eff, n_max,
        )
    gaps = [(q - 1.0) * q ** (-n - 1) for n in range(n_eff)]
    gaps.append(q ** (-n_eff))
    pts, gaps = np.array(pts), np.array(gaps)
    pts.setflags(write=False)
    gaps.setflags(write=False)
    return pts, gaps


@dataclass(frozen=True)
class GeometricCondensation:
    """The family ``t_n = limit - q**(-n)``, ``n = 0..n_max``, plus ``limit``.

    Points that are indistinguishable from ``limit`` (or from their
    predecessor) in double precision are dropped; ``n_effective`` reports the
    last index actually materialized. The graininess uses the closed form
    ``(q - 1) q**(-n-1)`` rather than a difference of nearly equal floats,
    and the last materialized point jumps straight to ``limit``.
    """

    q: float
    n_max: int = DEFAULT_N_MAX
    limit: float = 1.0

    def __post_init__(self):
        if not self.q > 1:
            raise ValueError(f"GeometricCondensation needs q > 1, got {self.q}")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")
        object.__setattr__(
            self, "_cached", _geometric_family(float(self.q), int(self.n_max), float(self.limit))
        )

    @property
    def n_effective(self) -> int:
        return len(self._cached[0]) - 1

    @property
    def family(self) -> np.ndarray:
        """Materialized points ``t_0 .. t_{n_effective}`` (limit excluded)."""
        return self._cached[0]

    def gap_to_limit(self, n: int) -> float:
        """Exact distance ``limit - t_n`` (no cancellation)."""
        return float(self.q) ** (-n)

    def index_of(self, t: float) -> float:
        """Generator index ``n`` of ``t``.

        Materialized points are resolved by lookup, since ``-ln(limit - t)/ln q``
        loses the parity of ``n`` close to the limit; other values fall back
        to that formula.
        """
        pts = self.family
        j = int(np.searchsorted(pts, t))
        near = [jj for jj in (j - 1, j) if 0 <= jj < len(pts)]
        if near:
            jj = min(near, key=lambda k: abs(pts[k] - t))
            if abs(pts[jj] - t) <= membership_tol(pts[jj]):
                return jj
        return -math.log(self.limit - t) / math.log(self.q)

    def _runs(self):
        pts, gaps = self._cached
        ld = np.zeros(len(pts) + 1, dtype=bool)
        ld[-1] = True
        return [
            _PointRun(
                np.append(pts, float(self.limit)), np.append(gaps, 0.0), ld
            )
        ]


Segment = Union[UniformGrid, ExplicitPoints, ContinuousInterval, GeometricCondensation]


@dataclass
class _PointRun:
    points: np.ndarray
    mu: np.ndarray  # gap to the next scale point; last entry patched on assembly
    left_dense: np.ndarray

    @property
    def lo(self):
        return float(self.points[0])

    @property
    def hi(self):
        return float(self.points[-1])


@dataclass
class _IntervalRun:
    a: float
    b: float

    @property
    def lo(self):
        return self.a

    @property
    def hi(self):
        return self.b


class Interval(NamedTuple):
    """A continuous piece ``[a, b]`` yielded by :meth:`TimeScale.points_between`."""

    a: float
    b: float


class PointClass(NamedTuple):
    """Left/right type of a point.

    ``right``/``left`` follow ``sigma(t) > t`` and ``rho(t) < t`` literally,
    so the minimum is left-dense and the maximum right-dense by convention.
    ``endpoint`` ("min", "max", "both" or "") marks those cases; an endpoint
    counts as isolated when its one real neighbour is at positive distance.
    """

    right: str  # "scattered" | "dense"
    left: str
    endpoint: str = ""

    @property
    def isolated(self) -> bool:
        right = self.right == "scattered" or self.endpoint in ("max", "both")
        left = self.left == "scattered" or self.endpoint in ("min", "both")
        return right and left

    @property
    def dense(self) -> bool:
        return self.right == "dense" and self.left == "dense"

    @property
    def label(self) -> str:
        if self.isolated:
            return "isolated"
        if self.dense:
            return "dense"
        return f"right-{self.right}/left-{self.left}"


# ---------------------------------------------------------------------------
# the time scale
# ---------------------------------------------------------------------------


class TimeScale:
    """Closed subset of the reals built from ordered, non-overlapping segments.

    Instances are immutable after construction.

    Parameters
    ----------
    segments : sequence of Segment
        Any order; they are sorted by left endpoint and must not overlap
        (touching endpoints count as overlap).
    """

    def __init__(self, segments: Sequence[Segment]):
        if not segments:
            raise ValueError("a time scale needs at least one segment")
        runs = []
        for seg in segments:
            runs.extend(seg._runs())
        runs.sort(key=lambda r: r.lo)
        for left, right in zip(runs, runs[1:]):
            if not left.hi < right.lo:
                raise ValueError(
                    f"segments overlap: [{left.lo}, {left.hi}] and [{right.lo}, {right.hi}]"
                )
        merged: list = []
        for run in runs:
            if merged and isinstance(run, _PointRun) and isinstance(merged[-1], _PointRun):
                prev = merged[-1]
                prev.mu[-1] = run.lo - prev.hi
                merged[-1] = _PointRun(
                    np.concatenate([prev.points, run.points]),
                    np.concatenate([prev.mu, run.mu]),
                    np.concatenate([prev.left_dense, run.left_dense]),
                )
            else:
                if merged and isinstance(merged[-1], _PointRun):
                    merged[-1].mu[-1] = run.lo - merged[-1].hi
                merged.append(run)
        if isinstance(merged[-1], _PointRun):
            merged[-1].mu[-1] = 0.0  # sigma(max) = max
        for run in merged:
            if isinstance(run, _PointRun):
                run.points.setflags(write=False)
                run.mu.setflags(write=False)
                run.left_dense.setflags(write=False)
        self.segments = tuple(segments)
        self._runs = tuple(merged)
        self._los = np.array([r.lo for r in merged])

    def __repr__(self):
        return f"TimeScale({list(self.segments)!r})"

    # -- basic geometry ----------------------------------------------------

    @property
    def inf(self) -> float:
        return self._runs[0].lo

    @property
    def sup(self) -> float:
        return self._runs[-1].hi

    @property
    def condensation_limits(self) -> tuple:
        out = []
        for run in self._runs:
            if isinstance(run, _PointRun):
                out.extend(float(p) for p in run.points[run.left_dense])
        return tuple(out)

    @property
    def is_isolated(self) -> bool:
        """True when the scale has no continuous intervals."""
        return all(isinstance(r, _PointRun) for r in self._runs)

    def _locate(self, t: float):
        """Return ``(run_index, point_index_or_None, snapped_value)`` or None."""
        t = float(t)
        k = int(np.searchsorted(self._los, t, side="right")) - 1
        best = None
        for r in (k, k + 1):
            if r < 0 or r >= len(self._runs):
                continue
            run = self._runs[r]
            if isinstance(run, _IntervalRun):
                tol = membership_tol(t)
                if run.a - tol <= t <= run.b + tol:
                    snapped = min(max(t, run.a), run.b)
                    if abs(snapped - run.a) <= membership_tol(run.a):
                        snapped = run.a
                    elif abs(snapped - run.b) <= membership_tol(run.b):
                        snapped = run.b
                    cand = (abs(snapped - t), r, None, snapped)
                    if best is None or cand[0] < best[0]:
                        best = cand
            else:
                pts = run.points
                j = int(np.searchsorted(pts, t))
                for jj in (j - 1, j):
                    if 0 <= jj < len(pts):
                        p = float(pts[jj])
                        d = abs(p - t)
                        if d <= membership_tol(p) and (best is None or d < best[0]):
                            best = (d, r, jj, p)
        return None if best is None else best[1:]

    def _require(self, t: float):
        loc = self._locate(t)
        if loc is None:
            raise PointNotOnScale(f"{t!r} is not a point of the time scale")
        return loc

    def contains(self, t: float) -> bool:
        return self._locate(t) is not None

    __contains__ = contains

    def snap(self, t: float) -> float:
        """Return the scale point matching ``t`` within membership tolerance."""
        return self._require(t)[2]

    # -- jump operators ------------------------------------------------------

    def sigma(self, t: float) -> float:
        """Forward jump ``inf{s in T : s > t}`` (``t`` itself at the maximum)."""
        r, j, t = self._require(t)
        run = self._runs[r]
        if j is not None:
            if j + 1 < len(run.points):
                return float(run.points[j + 1])
        elif t < run.b:
            return t
        return self._runs[r + 1].lo if r + 1 < len(self._runs) else t

    def rho(self, t: float) -> float:
        """Backward jump ``sup{s in T : s < t}`` (``t`` itself at the minimum)."""
        r, j, t = self._require(t)
        run = self._runs[r]
        if j is not None:
            if run.left_dense[j]:
                return t
            if j > 0:
                return float(run.points[j - 1])
        elif t > run.a:
            return t
        return self._runs[r - 1].hi if r > 0 else t

    def mu(self, t: float) -> float:
        """Graininess ``sigma(t) - t``.

        On geometric families the closed-form gap is returned, which agrees
        with ``sigma(t) - t`` up to rounding.
        """
        r, j, t = self._require(t)
        run = self._runs[r]
        if j is not None:
            return float(run.mu[j])
        if t < run.b:
            return 0.0
        return self._runs[r + 1].lo - run.b if r + 1 < len(self._runs) else 0.0

    def classify(self, t: float) -> PointClass:
        t = self.snap(t)
        right = "scattered" if self.sigma(t) > t else "dense"
        left = "scattered" if self.rho(t) < t else "dense"
        lo, hi = t == self.inf, t == self.sup
        endpoint = "both" if lo and hi else "min" if lo else "max" if hi else ""
        return PointClass(right, left, endpoint)

    def in_kappa(self, t: float) -> bool:
        """Membership in T^kappa (T minus a left-scattered maximum)."""
        t = self.snap(t)
        return not (t == self.sup and self.rho(t) < t)

    # -- walks -------------------------------------------------------------

    def _check_range(self, a, b):
        a = self.snap(a)
        b = self.snap(b)
        if a > b:
            raise EmptyInterval(f"empty range: a={a} > b={b}")
        return a, b

    def points_between(self, a: float, b: float) -> Iterator[Union[float, Interval]]:
        """Walk ``[a, b]_T`` in increasing order.

        Isolated and one-sided points come out as floats, continuous pieces
        as :class:`Interval` descriptors.
        """
        a, b = self._check_range(a, b)
        for run in self._runs:
            if run.hi < a or run.lo > b:
                continue
            if isinstance(run, _PointRun):
                lo = int(np.searchsorted(run.points, a, side="left"))
                hi = int(np.searchsorted(run.points, b, side="right"))
                for p in run.points[lo:hi]:
                    yield float(p)
            else:
                lo, hi = max(a, run.a), min(b, run.b)
                yield lo if lo == hi else Interval(lo, hi)

    def pieces(self, a: float, b: float):
        """Decompose ``[a, b)`` into scattered and continuous pieces.

        Yields ``("points", pts, mu)`` with the right-scattered points in
        ``[a, b)`` and their graininess, or ``("interval", lo, hi)``.
        Right endpoints of intervals that jump to a later segment appear as
        one-point ``"points"`` pieces.
        """
        a, b = self._check_range(a, b)
        if a == b:
            return
        for r, run in enumerate(self._runs):
            if run.hi < a or run.lo >= b:
                continue
            if isinstance(run, _PointRun):
                lo = int(np.searchsorted(run.points, a, side="left"))
                hi = int(np.searchsorted(run.points, b, side="left"))
                pts, mu = run.points[lo:hi], run.mu[lo:hi]
                keep = mu > 0
                if not keep.all():
                    pts, mu = pts[keep], mu[keep]
                if len(pts):
                    yield ("points", pts, mu)
            else:
                lo, hi = max(a, run.a), min(b, run.b)
                if lo < hi:
                    yield ("interval", lo, hi)
                if run.b < b and r + 1 < len(self._runs):
                    yield (
                        "points",
                        np.array([run.b]),
                        np.array([self._runs[r + 1].lo - run.b]),
                    )

    def scattered_points(self, a: float, b: float):
        """Right-scattered points of ``[a, b)`` and their graininess."""
        pts, mus = [], []
        for piece in self.pieces(a, b):
            if piece[0] == "points":
                pts.append(piece[1])
                mus.append(piece[2])
        if not pts:
            return np.empty(0), np.empty(0)
        return np.concatenate(pts), np.concatenate(mus)

    def all_points(self) -> np.ndarray:
        """Every isolated-kind point of the scale (interval runs excluded)."""
        out = [r.points for r in self._runs if isinstance(r, _PointRun)]
        return np.concatenate(out) if out else np.empty(0)

    def intervals(self) -> list:
        return [Interval(r.a, r.b) for r in self._runs if isinstance(r, _IntervalRun)]

    def last_point_at_or_below(self, t: float) -> float:
        """Largest scale point ``<= t``; condensation limits are skipped."""
        best = None
        for run in self._runs:
            if run.lo > t:
                break
            if isinstance(run, _IntervalRun):
                best = min(t, run.b)
            else:
                pts = run.points[~run.left_dense]
                k = int(np.searchsorted(pts, t, side="right"))
                if k:
                    best = float(pts[k - 1])
        if best is None:
            raise PointNotOnScale(f"no scale point at or below {t}")
        return best


# ---------------------------------------------------------------------------
# functions on a time scale
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridFunction:
    """A (possibly vector-valued) function on the points of a time scale."""

    func: Callable[[float], object]
    dim: int | None = None
    name: str = ""

    def __call__(self, t):
        return self.func(t)

    @classmethod
    def tabulated(cls, points, values, name=""):
        """Function given by a table; lookups use the scale membership tolerance."""
        pts = np.asarray(points, dtype=np.float64)
        vals = np.asarray(values, dtype=np.float64)
        order = np.argsort(pts)
        pts, vals = pts[order], vals[order]

        def lookup(t):
            j = int(np.searchsorted(pts, t))
            for jj in (j - 1, j):
                if 0 <= jj < len(pts) and abs(pts[jj] - t) <= membership_tol(pts[jj]):
                    return vals[jj] if vals.ndim > 1 else float(vals[jj])
            raise PointNotOnScale(f"{t!r} is not tabulated")

        dim = 1 if vals.ndim == 1 else vals.shape[1]
        return cls(lookup, dim, name)


def _eval_rows(f, pts):
    rows = [np.atleast_1d(np.asarray(f(float(t)), dtype=np.float64)) for t in pts]
    return np.ascontiguousarray(np.vstack(rows))


def _quad(f, lo, hi):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            probe = np.asarray(f(lo), dtype=np.float64)
            if probe.ndim == 0:
                val, err = integrate.quad(
                    lambda s: float(f(s)), lo, hi,
                    epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=200,
                )
                val, err = np.array([val]), err
            else:
                val, err = integrate.quad_vec(
                    lambda s: np.asarray(f(s), dtype=np.float64), lo, hi,
                    epsabs=QUAD_ATOL, epsrel=QUAD_RTOL, limit=200,
                )
                val = np.atleast_1d(val)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"quadrature on [{lo}, {hi}] failed: {exc}") from exc
    if err > max(QUAD_ATOL, QUAD_RTOL * float(np.max(np.abs(val)))):
        raise QuadratureFailure(f"quadrature error {err:.3g} on [{lo}, {hi}] above tolerance")
    return val


def _neumaier_add(s, c, v):
    t = s + v
    c = c + np.where(np.abs(s) >= np.abs(v), (s - t) + v, (v - t) + s)
    return t, c


def delta_integral(ts: TimeScale, f, a: float, b: float):
    """Delta integral of ``f`` over ``[a, b)`` on ``ts``.

    Scattered points contribute ``f(t) mu(t)`` (compensated sum in ascending
    order); continuous pieces use adaptive quadrature. Returns a float for
    scalar ``f`` and an array otherwise.
    """
    a, b = ts._check_range(a, b)
    probe = np.asarray(f(a), dtype=np.float64)
    scalar = probe.ndim == 0
    s = np.zeros(probe.size)
    c = np.zeros(probe.size)
    pieces = list(ts.pieces(a, b))
    if len(pieces) == 1 and pieces[0][0] == "points":
        total = kernels.compensated_dot(_eval_rows(f, pieces[0][1]), pieces[0][2])
    else:
        for piece in pieces:
            if piece[0] == "points":
                v = kernels.compensated_dot(_eval_rows(f, piece[1]), piece[2])
            else:
                v = _quad(f, piece[1], piece[2])
            s, c = _neumaier_add(s, c, v)
        total = s + c
    return float(total[0]) if scalar else total


class Derivative(NamedTuple):
    value: object
    step: float
    method: str  # "jump" | "central" | "forward" | "backward"


def delta_derivative_numeric(ts: TimeScale, f, t: float) -> Derivative:
    """Delta derivative of ``f`` at ``t``.

    Exact difference quotient at right-scattered points; second-order finite
    differences with step ``max(1e-6, 1e-6|t|)`` at right-dense points.
    """
    t = ts.snap(t)
    if not ts.in_kappa(t):
        raise KappaViolation(f"{t} is a left-scattered maximum; no delta derivative")
    st = ts.sigma(t)
    if st > t:
        m = st - t
        val = (np.asarray(f(st), dtype=np.float64) - np.asarray(f(t), dtype=np.float64)) / m
        return Derivative(_unwrap(val), m, "jump")
    h = max(1e-6, 1e-6 * abs(t))
    interval = next((iv for iv in ts.intervals() if iv.a <= t <= iv.b), None)
    F = lambda s: np.asarray(f(s), dtype=np.float64)  # noqa: E731
    if interval is None:
        # left-dense maximum at a condensation limit: only the nearest point is available
        r = ts.rho(t) if ts.rho(t) < t else _previous_point(ts, t)
        val = (F(t) - F(r)) / (t - r)
        return Derivative(_unwrap(val), t - r, "backward")
    if t - h >= interval.a and t + h <= interval.b:
        val = (F(t + h) - F(t - h)) / (2 * h)
        return Derivative(_unwrap(val), h, "central")
    if t + 2 * h <= interval.b:
        val = (-3 * F(t) + 4 * F(t + h) - F(t + 2 * h)) / (2 * h)
        return Derivative(_unwrap(val), h, "forward")
    val = (3 * F(t) - 4 * F(t - h) + F(t - 2 * h)) / (2 * h)
    return Derivative(_unwrap(val), h, "backward")


def _previous_point(ts, t):
    pts = ts.all_points()
    k = int(np.searchsorted(pts, t, side="left"))
    if k == 0:
        raise KappaViolation(f"no points to the left of {t}")
    return float(pts[k - 1])


def _unwrap(val):
    val = np.asarray(val)
    return float(val) if val.ndim == 0 else val


def exp_function(ts: TimeScale, p, t: float, t0: float) -> float:
    """Time-scale exponential ``e_p(t, t0)``.

    Scattered runs use the step ``y <- y + mu*(p*y)`` (so the forward step
    identity holds exactly); continuous runs multiply by ``exp(int p)``.
    For ``t < t0`` the reciprocal ``1/e_p(t0, t)`` is returned.
    """
    t, t0 = ts.snap(t), ts.snap(t0)
    if t < t0:
        return 1.0 / exp_function(ts, p, t0, t)
    y = 1.0
    for piece in ts.pieces(t0, t):
        if piece[0] == "points":
            pts, mu = piece[1], piece[2]
            pv = np.array([float(p(float(s))) for s in pts])
            bad = np.nonzero(1.0 + mu * pv == 0.0)[0]
            if len(bad):
                raise NotRegressive(f"1 + mu*p vanishes at t={pts[bad[0]]}")
            y = float(kernels.linear_steps(mu, pv, y)[-1])
        else:
            y *= math.exp(float(_quad(p, piece[1], piece[2])[0]))
    return y


# ---------------------------------------------------------------------------
# declarative construction
# ---------------------------------------------------------------------------


def segment_from_spec(spec: dict) -> Segment:
    kind = spec.get("kind")
    if kind == "geometric":
        return GeometricCondensation(
            float(spec["q"]), int(spec.get("n_max", DEFAULT_N_MAX)), float(spec.get("limit", 1.0))
        )
    if kind == "uniform":
        return UniformGrid(float(spec.get("start", 0.0)), float(spec["step"]), int(spec["count"]))
    if kind == "points":
        return ExplicitPoints(tuple(spec["points"]))
    if kind == "interval":
        return ContinuousInterval(float(spec["a"]), float(spec["b"]))
    raise ValueError(f"unknown segment kind {kind!r}")


def scale_from_spec(spec: dict) -> TimeScale:
    """Build a :class:`TimeScale` from ``{"kind": ..., params}``.

    ``kind = "union"`` takes a ``segments`` list of single-segment specs.
    """
    if spec.get("kind") == "union":
        return TimeScale([segment_from_spec(s) for s in spec["segments"]])
    return TimeScale([segment_from_spec(spec)])
