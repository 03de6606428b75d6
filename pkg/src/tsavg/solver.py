"""Solving ``x^Delta = eps X(t, x)`` on a time scale and comparing solutions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.integrate import solve_ivp

from . import kernels
from .errors import EmptyHorizon, FieldEvaluationFailure, GridMismatch, NotIsolated
from .timescale import TimeScale, _quad

IVP_RTOL = 1e-10
IVP_ATOL = 1e-10


@dataclass(frozen=True)
class Box:
    """Axis-aligned domain ``D = [lo, hi]`` with a margin for the rho-neighbourhood.

    ``margin=None`` means 10% of the box extent in every coordinate.
    """

    lo: tuple
    hi: tuple
    margin: Optional[float] = None

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        if len(lo) != len(hi) or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError(f"invalid box {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def ball(cls, radius, dim=1, margin=None):
        """The max-norm ball ``{|x| <= radius}``."""
        return cls((-radius,) * dim, (radius,) * dim, margin)

    def _margin(self):
        ext = np.array(self.hi) - np.array(self.lo)
        return 0.1 * ext if self.margin is None else np.full(ext.shape, float(self.margin))

    def contains(self, x) -> bool:
        x = np.atleast_1d(x)
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def contains_inner(self, x) -> bool:
        """Membership in ``D'``: ``x`` together with its margin lies in ``D``."""
        x = np.atleast_1d(x)
        m = self._margin()
        return bool(np.all(x - m >= self.lo) and np.all(x + m <= self.hi))


@dataclass(frozen=True)
class DynamicSystem:
    field: object  # VectorField or AveragedField: callable (t, x) -> array
    epsilon: float
    t0: float
    x0: tuple
    domain: Optional[Box] = None

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be nonnegative, got {self.epsilon}")
        x0 = tuple(float(v) for v in np.atleast_1d(self.x0))
        object.__setattr__(self, "x0", x0)
        if self.domain is not None and not self.domain.contains_inner(x0):
            raise ValueError(f"x0={x0} does not lie in D together with its margin")


@dataclass(frozen=True)
class Trajectory:
    """Solution samples; ``exact[k]`` is False for samples from dense integration."""

    times: np.ndarray
    states: np.ndarray  # shape (m, n)
    exact: np.ndarray
    status: str  # "completed" | "left_domain" | "horizon_reached"
    tail_bound: Optional[float] = None

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.states[-1]


def horizon_point(epsilon: float, L: float, ts: TimeScale, t0: float):
    """``(point, saturated)``: the largest scale point ``<= t0 + L/eps``.

    Condensation limits are never returned; ``saturated`` is True when the
    target lies beyond every usable scale point.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    t0 = ts.snap(t0)
    target = math.inf if epsilon == 0 else t0 + L / epsilon
    try:
        point = ts.last_point_at_or_below(target)
    except Exception as exc:
        raise EmptyHorizon(str(exc)) from None
    if point < t0:
        raise EmptyHorizon(f"no scale point in [{t0}, {target}]")
    usable_max = ts.last_point_at_or_below(math.inf)
    return point, point == usable_max and target > point


def horizon_for(epsilon: float, L: float, ts: TimeScale, t0: float) -> float:
    """Largest scale point in ``[t0, t0 + L/eps]`` (saturating at the scale's end)."""
    return horizon_point(epsilon, L, ts, t0)[0]


def _eval(field, t, x):
    try:
        v = np.atleast_1d(np.asarray(field(t, x), dtype=np.float64))
    except Exception as exc:
        raise FieldEvaluationFailure(f"field evaluation failed at t={t}: {exc}") from exc
    if not np.all(np.isfinite(v)):
        raise FieldEvaluationFailure(f"field is not finite at t={t}, x={x}")
    return v


def solve(
    sys: DynamicSystem, ts: TimeScale, horizon_end: Optional[float] = None,
    L: Optional[float] = None, dense_samples: int = 0,
) -> Trajectory:
    """Solve ``x^Delta = eps X(t, x), x(t0) = x0`` up to ``horizon_end``.

    Right-scattered points take the exact step ``x + mu*(eps*X(t, x))``;
    continuous pieces are integrated with an embedded Runge-Kutta pair at
    tolerance 1e-10, except for scalar linear fields, whose exact
    exponential solution is used. Give ``L`` instead of ``horizon_end`` to solve on
    ``[t0, t0 + L/eps]``; if that window runs past the scale the status is
    ``"horizon_reached"``. Leaving the domain stops the solve with status
    ``"left_domain"``; the first sample outside ``D`` is kept.
    """
    t0 = ts.snap(sys.t0)
    saturated = False
    if horizon_end is None:
        if L is None:
            raise ValueError("give horizon_end or L")
        horizon_end, saturated = horizon_point(sys.epsilon, L, ts, t0)
    end = ts.snap(horizon_end)
    if end < t0:
        raise EmptyHorizon(f"horizon {end} precedes t0={t0}")
    eps = float(sys.epsilon)
    field = sys.field
    box = sys.domain
    x = np.array(sys.x0, dtype=np.float64)
    times, states, exact = [t0], [x.copy()], [True]
    status = "horizon_reached" if saturated else "completed"
    linear = getattr(field, "coefficient", None) is not None and x.size == 1

    for piece in ts.pieces(t0, end):
        if piece[0] == "points":
            pts, mu = piece[1], piece[2]
            nxt = np.append(pts[1:], ts.sigma(float(pts[-1])))
            if linear:
                try:
                    coef = np.array([eps * float(field.coefficient(float(p))) for p in pts])
                except Exception as exc:
                    raise FieldEvaluationFailure(f"coefficient evaluation failed: {exc}") from exc
                if not np.all(np.isfinite(coef)):
                    raise FieldEvaluationFailure("linear coefficient is not finite")
                path = kernels.linear_steps(mu, coef, float(x[0]))[1:]
                stop = len(path)
                if box is not None:
                    k = kernels.first_exit(path, box.lo[0], box.hi[0])
                    if k >= 0:
                        stop, status = k + 1, "left_domain"
                times.extend(nxt[:stop].tolist())
                states.extend(path[:stop, None])
                exact.extend([True] * stop)
                x = np.array([path[stop - 1]])
            else:
                for p, m, q in zip(pts.tolist(), mu.tolist(), nxt.tolist()):
                    x = x + m * (eps * _eval(field, p, x))
                    times.append(q)
                    states.append(x.copy())
                    exact.append(True)
                    if box is not None and not box.contains(x):
                        status = "left_domain"
                        break
        elif linear:
            # scalar linear field: exact solution x(b) = x(a) exp(eps int_a^b a(s) ds)
            lo, hi = piece[1], piece[2]
            t_eval = np.linspace(lo, hi, dense_samples + 2)[1:]
            t_eval[-1] = hi
            rate = lambda s: eps * float(field.coefficient(s))  # noqa: E731
            x_lo = x.copy()
            for t in t_eval.tolist():
                x = x_lo * math.exp(float(_quad(rate, lo, t)[0]))
                if not np.all(np.isfinite(x)):
                    raise FieldEvaluationFailure(f"solution overflow on [{lo}, {t}]")
                times.append(t)
                states.append(x.copy())
                exact.append(False)
            if box is not None and not box.contains(x):
                status = "left_domain"
        else:
            lo, hi = piece[1], piece[2]
            t_eval = np.linspace(lo, hi, dense_samples + 2)[1:]
            sol = solve_ivp(
                lambda t, y: eps * _eval(field, t, y), (lo, hi), x,
                method="RK45", t_eval=t_eval, rtol=IVP_RTOL, atol=IVP_ATOL,
            )
            if not sol.success:
                raise FieldEvaluationFailure(f"integration on [{lo}, {hi}] failed: {sol.message}")
            t_eval[-1] = hi
            for k, t in enumerate(t_eval.tolist()):
                times.append(t)
                states.append(sol.y[:, k].copy())
                exact.append(False)
            x = sol.y[:, -1].copy()
            if box is not None and not box.contains(x):
                status = "left_domain"
        if status == "left_domain":
            break

    tail = None
    bound = getattr(field, "bound", None)
    limits = [c for c in ts.condensation_limits if c > times[-1]]
    if limits and bound is not None and status != "left_domain":
        nearest = min(limits)
        if ts.sigma(times[-1]) == nearest:
            tail = eps * bound * (nearest - times[-1])
    return Trajectory(
        np.array(times), np.vstack(states), np.array(exact, dtype=bool), status, tail
    )


def product_solution_linear(ts: TimeScale, p_of_i, y0: float, k: int, t0=None, path=False):
    """Exact solution of ``y^Delta = p_i y`` after ``k`` scattered steps.

    ``p_of_i`` is a callable ``i -> p_i`` or a sequence. The value is
    ``y0 * prod_{i<k} (1 + p_i mu(sigma^i(t0)))``, accumulated as
    ``y + mu*(p*y)`` in ascending ``i``. With ``path=True`` all ``k + 1``
    partial products are returned.
    """
    t = ts.inf if t0 is None else ts.snap(t0)
    mus = []
    for i in range(k):
        m = ts.mu(t)
        if m == 0.0:
            raise NotIsolated(f"step {i}: t={t} is right-dense")
        mus.append(m)
        t = ts.sigma(t)
    p = [p_of_i(i) for i in range(k)] if callable(p_of_i) else list(p_of_i)[:k]
    out = kernels.linear_steps(np.array(mus), np.array(p, dtype=np.float64), float(y0))
    return out if path else float(out[-1])


class ProximityReport(NamedTuple):
    max_diff: float
    argmax_t: float
    times: np.ndarray
    diffs: np.ndarray


def compare_trajectories(a: Trajectory, b: Trajectory) -> ProximityReport:
    """Pointwise ``|a(t) - b(t)|`` on a common grid and its maximum."""
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise GridMismatch("trajectories are sampled on different time grids")
    diffs = np.linalg.norm(a.states - b.states, axis=1)
    k = int(np.argmax(diffs))
    return ProximityReport(float(diffs[k]), float(a.times[k]), a.times.copy(), diffs)
