"""Experiment configuration: TOML files describing scale, shift, field and run.

Example::

    [scale]
    kind = "geometric"
    q = [1.8, 2.0, 3.0]      # a list runs every value
    n_max = 64

    [shift]
    kind = "geometric"        # additive | geometric | table
    period = 2                # T, the period of the field
    scale_period = 1          # P, the period of the scale

    [field]
    builtin = "alternating-linear"   # or: expression = "-x[0] / (1 - t)"

    [run]
    epsilon = [0.04, 0.02, 0.01, 0.005]
    L = 1.0
    t0 = 0.0
    x0 = [1.0]

    [domain]
    radius = 2.0              # or lo = [...], hi = [...]

    [verify]
    expect = "quasi_periodic"

    [output]
    dir = "out"
    format = "csv+svg"
"""
from __future__ import annotations

import ast
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .averaging import VectorField
from .shifts import ShiftOperator
from .solver import Box
from .timescale import GeometricCondensation, TimeScale, scale_from_spec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    scale: dict
    shift: dict
    field: dict
    epsilons: tuple = (0.005,)
    L: float = 1.0
    t0: float = 0.0
    x0: tuple = (1.0,)
    domain: dict = field(default_factory=lambda: {"radius": 2.0})
    verify: dict = field(default_factory=dict)
    out_dir: str = "out"
    fmt: str = "csv"
    seed: int = 0
    parallel: int = 1

    def __post_init__(self):
        if not self.epsilons:
            raise ConfigError("at least one epsilon is required")
        if any(not e >= 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be nonnegative")
        if self.fmt not in ("csv", "csv+svg"):
            raise ConfigError(f"unknown output format {self.fmt!r}")
        if self.scale.get("kind") == "geometric":
            for q in self.q_values:
                if not q > 1:
                    raise ConfigError(f"geometric scale needs q > 1, got {q}")
        T = self.period
        P = float(self.shift.get("scale_period", 1.0 if self.shift.get("kind") != "additive" else T))
        if T < P:
            raise ConfigError(f"period T={T} is smaller than the scale period P={P}")

    @property
    def q_values(self) -> tuple:
        q = self.scale.get("q")
        if q is None:
            return (None,)
        return tuple(float(v) for v in (q if isinstance(q, list) else [q]))

    @property
    def period(self) -> float:
        if "period" not in self.shift:
            raise ConfigError("shift.period (T) is required")
        return float(self.shift["period"])

    def build_scale(self, q=None) -> TimeScale:
        spec = dict(self.scale)
        if q is not None:
            spec["q"] = q
        try:
            return scale_from_spec(spec)
        except (KeyError, ValueError, TypeError) as exc:
            raise ConfigError(f"bad [scale] section: {exc}") from exc

    def build_shift(self, ts: TimeScale, q=None) -> ShiftOperator:
        kind = self.shift.get("kind", "geometric")
        P = float(self.shift.get("scale_period", 1.0))
        t0 = float(self.t0)
        if kind == "additive":
            return ShiftOperator.additive(ts, period=P, t0=t0)
        if kind == "geometric":
            q = q if q is not None else self.q_values[0]
            if q is None:
                raise ConfigError("geometric shift needs scale.q")
            limit = float(self.scale.get("limit", 1.0))
            return ShiftOperator.geometric(ts, q, period=P, t0=t0, limit=limit)
        if kind == "table":
            pairs = self.shift.get("pairs")
            if not pairs:
                raise ConfigError("table shift needs a 'pairs' list")
            return ShiftOperator.from_table(ts, self.period, pairs, t0=t0, period=P)
        raise ConfigError(f"unknown shift kind {kind!r}")

    def build_domain(self) -> Box:
        d = self.domain
        margin = d.get("margin")
        dim = len(self.x0)
        if "radius" in d:
            return Box.ball(float(d["radius"]), dim, margin)
        try:
            return Box(tuple(d["lo"]), tuple(d["hi"]), margin)
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"bad [domain] section: {exc}") from exc

    def build_field(self, ts: TimeScale, q=None) -> VectorField:
        return field_from_spec(self.field, ts, q, self.build_domain(), len(self.x0))


# ---------------------------------------------------------------------------
# fields
# ---------------------------------------------------------------------------


def _geometric_segment(ts):
    for seg in ts.segments:
        if isinstance(seg, GeometricCondensation):
            return seg
    raise ConfigError("this builtin field needs a geometric scale")


def alternating_linear(ts: TimeScale, box: Optional[Box] = None) -> VectorField:
    """``X(t, x) = (-1)**k x`` with ``k = round(-ln(limit - t) / ln q)``.

    The exponent is rounded to the nearest integer before taking the sign,
    which keeps the power real.
    """
    seg = _geometric_segment(ts)

    def sign(t):
        return -1.0 if round(seg.index_of(t)) % 2 else 1.0

    bound = None if box is None else max(abs(v) for v in box.lo + box.hi)
    return VectorField.scalar_linear(sign, bound=bound, lipschitz=1.0, name="alternating-linear")


def reciprocal_gap(ts: TimeScale, box: Optional[Box] = None) -> VectorField:
    """``X(t, x) = x / (limit - t)``; unbounded towards the condensation point."""
    seg = _geometric_segment(ts)
    return VectorField.scalar_linear(lambda t: 1.0 / (seg.limit - t), name="reciprocal-gap")


def constant_field(value=1.0, dim=1) -> VectorField:
    v = np.full(dim, float(value))
    return VectorField(lambda t, x: v, dim=dim, bound=abs(float(value)) or None, name="constant")


def scaled_linear(c: float, box: Optional[Box] = None) -> VectorField:
    """``X(t, x) = c x``."""
    bound = None if box is None else abs(c) * max(abs(v) for v in box.lo + box.hi)
    return VectorField.scalar_linear(lambda t: c, bound=bound or None,
                                     lipschitz=abs(c) or None, name="scaled-linear")


_ALLOWED_NODES = (
    ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
    ast.Subscript, ast.Tuple,
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.Mod, ast.FloorDiv, ast.USub, ast.UAdd,
    ast.IfExp, ast.Compare, ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq,
)
_FUNCS = {
    name: getattr(math, name)
    for name in ("sin", "cos", "tan", "exp", "log", "sqrt", "floor", "ceil", "fabs", "atan")
}
_FUNCS.update(abs=abs, round=round, pi=math.pi, e=math.e)


def expression_field(expr: str, params: dict, dim: int, bound=None, lipschitz=None) -> VectorField:
    """Field given by an arithmetic expression in ``t``, ``x`` (an array) and ``params``.

    Only arithmetic, comparisons, subscripts and a fixed set of math
    functions are accepted.
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse field expression {expr!r}: {exc}") from exc
    names = set(_FUNCS) | set(params) | {"t", "x"}
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED_NODES):
            raise ConfigError(f"disallowed syntax {type(node).__name__} in field expression")
        if isinstance(node, ast.Name) and node.id not in names:
            raise ConfigError(f"unknown name {node.id!r} in field expression")
    code = compile(tree, "<field>", "eval")
    env = {"__builtins__": {}, **_FUNCS, **{k: float(v) for k, v in params.items()}}

    def func(t, x):
        return eval(code, env, {"t": t, "x": x})  # noqa: S307 - AST checked above

    return VectorField(func, dim=dim, bound=bound, lipschitz=lipschitz, name=expr)


def field_from_spec(spec: dict, ts: TimeScale, q, box: Box, dim: int) -> VectorField:
    bound = spec.get("bound")
    lip = spec.get("lipschitz")
    if "builtin" in spec:
        name = spec["builtin"]
        if name == "alternating-linear":
            f = alternating_linear(ts, box)
        elif name == "reciprocal-gap":
            f = reciprocal_gap(ts, box)
        elif name == "constant":
            f = constant_field(spec.get("value", 1.0), dim)
        elif name == "scaled-linear":
            f = scaled_linear(float(spec["c"]), box)
        else:
            raise ConfigError(f"unknown builtin field {name!r}")
        if bound is not None or lip is not None:
            f = replace(f, bound=bound if bound is not None else f.bound,
                        lipschitz=lip if lip is not None else f.lipschitz)
        return f
    if "expression" in spec:
        params = dict(spec.get("params", {}))
        if q is not None:
            params.setdefault("q", q)
        return expression_field(spec["expression"], params, dim, bound, lip)
    raise ConfigError("[field] needs 'builtin' or 'expression'")


# ---------------------------------------------------------------------------
# loading
# ---------------------------------------------------------------------------


def _as_tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def config_from_dict(data: dict) -> ExperimentConfig:
    try:
        run = data.get("run", {})
        out = data.get("output", {})
        return ExperimentConfig(
            scale=dict(data["scale"]),
            shift=dict(data.get("shift", {})),
            field=dict(data["field"]),
            epsilons=tuple(float(e) for e in _as_tuple(run.get("epsilon", 0.005))),
            L=float(run.get("L", 1.0)),
            t0=float(run.get("t0", 0.0)),
            x0=tuple(float(v) for v in _as_tuple(run.get("x0", 1.0))),
            domain=dict(data.get("domain", {"radius": 2.0})),
            verify=dict(data.get("verify", {})),
            out_dir=str(out.get("dir", "out")),
            fmt=str(out.get("format", "csv")),
            seed=int(run.get("seed", 0)),
            parallel=int(run.get("parallel", 1)),
        )
    except KeyError as exc:
        raise ConfigError(f"missing config section or key: {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        with open(Path(path), "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc
    return config_from_dict(data)
